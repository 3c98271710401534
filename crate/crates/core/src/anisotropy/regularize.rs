//! Smooth, strongly elliptic approximations `H_n ≥ H` of a convex
//! p-homogeneous integrand.
//!
//! `G_n = φ_n * H + ε_n |z|²/2` is computed by quadrature of an even `C^∞`
//! bump on a polar grid, `K_n = {G_n ≤ 1}` is traced by radial root finding
//! along an adaptively refined set of angles, and the gauge `Φ_n` of `K_n` is
//! stored as a periodic spline of its angular profile.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, illinois};
use crate::spline::PeriodicSpline;
use crate::vec2::{Sym2, Vec2};

use super::gauge::{AngularProfile, Gauge};
use super::Anisotropy;

/// Quadrature nodes `y_k` in the unit disc and weights `w_k` (summing to one)
/// for the bump `exp(−1/(1−|y|²))`. Angles are uniform with an even count, so
/// the node set is symmetric under `y ↦ −y` and `Σ w_k y_k = 0`.
pub(crate) fn bump_quadrature(radial: usize, angular: usize) -> Vec<(Vec2, f64)> {
    let (x, w) = gauss_legendre(radial);
    let angular = angular + angular % 2;
    let mut out = Vec::with_capacity(radial * angular);
    for (xi, wi) in x.iter().zip(&w) {
        let r = 0.5 * (xi + 1.0);
        let bump = (-1.0 / (1.0 - r * r)).exp();
        let wr = 0.5 * wi * r * bump;
        for k in 0..angular {
            let a = TAU * (k as f64 + 0.5) / angular as f64;
            out.push((Vec2::polar(a) * r, wr));
        }
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    out.iter_mut().for_each(|(_, w)| *w /= total);
    out
}

/// The bump `b(r) = exp(−1/(1−r²))` and its first two derivatives, with
/// `b'/r` returned in place of `b'` (finite at `r = 0`).
fn bump(r: f64) -> (f64, f64, f64) {
    if r >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - r * r;
    let b = (-1.0 / u).exp();
    let u2 = u * u;
    let d1_over_r = -2.0 * b / u2;
    let d2 = -2.0 * b / u2 + 4.0 * r * r * b / (u2 * u2) - 8.0 * r * r * b / (u2 * u);
    (b, d1_over_r, d2)
}

/// Convolution with the rescaled bump `φ_ε`, split along the lines where the
/// integrand is not smooth. Each ring `|y| = ρ` is cut where it crosses a
/// singular line and the radial integral is cut where a ring becomes tangent
/// to one, with a square-root substitution past the tangency. The nodes then
/// move smoothly with `z`, so the computed convolution is itself smooth.
pub(crate) struct Mollifier {
    eps: f64,
    lines: Vec<(Vec2, f64)>,
    radial: Vec<(f64, f64)>,
    arc: Vec<(f64, f64)>,
    ring: Vec<(Vec2, f64)>,
    mass: f64,
}

impl Mollifier {
    pub(crate) fn new(eps: f64, lines: &[Vec2], radial_nodes: usize, angular_nodes: usize) -> Self {
        let unit = |n: usize| {
            let (x, w) = gauss_legendre(n);
            x.iter().zip(&w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect::<Vec<_>>()
        };
        let n = angular_nodes + angular_nodes % 2;
        let mut m = Mollifier {
            eps,
            lines: lines.iter().map(|d| (*d, d.angle())).collect(),
            radial: unit(radial_nodes),
            arc: unit((angular_nodes / 4).max(8)),
            ring: (0..n).map(|i| (Vec2::polar(TAU * (i as f64 + 0.5) / n as f64), TAU / n as f64)).collect(),
            mass: 1.0,
        };
        let mut mass = 0.0;
        m.visit(Vec2::ZERO, |r, wr, ring| mass += wr * bump(r).0 * r * ring.iter().map(|n| n.1).sum::<f64>());
        m.mass = mass;
        m
    }

    /// `(φ_ε * h)(z)`.
    pub(crate) fn convolve(&self, h: &impl Fn(Vec2) -> f64, z: Vec2) -> f64 {
        let mut total = 0.0;
        self.visit(z, |r, wr, ring| {
            let rho = self.eps * r;
            let s: f64 = ring.iter().map(|&(e, w)| w * h(z - e * rho)).sum();
            total += wr * bump(r).0 * r * s;
        });
        total / self.mass
    }

    /// Value, gradient and Hessian of `φ_ε * h` at `z`, differentiating the
    /// kernel. The affine function `h(z) + ⟨slope, · − z⟩`, which the kernel
    /// derivatives annihilate, is subtracted from the integrand first.
    pub(crate) fn convolve_d2(
        &self,
        h: &impl Fn(Vec2) -> f64,
        z: Vec2,
        slope: Vec2,
    ) -> (f64, Vec2, Sym2) {
        let (mut v, mut g, mut hess) = (0.0, Vec2::ZERO, Sym2::ZERO);
        let h0 = h(z);
        self.visit(z, |r, wr, ring| {
            let (b, d1r, d2) = bump(r);
            for &(e, w) in ring {
                let y = e * (self.eps * r);
                let hz = wr * w * r * (h(z - y) - h0 + slope.dot(y));
                v += hz * b;
                g += e * (hz * d1r * r);
                let ee = Sym2::outer(e);
                hess = hess.add(&ee.scale(hz * (d2 - d1r))).add(&Sym2::identity().scale(hz * d1r));
            }
        });
        let m = self.mass;
        (h0 + v / m, g * (1.0 / (m * self.eps)) + slope, hess.scale(1.0 / (m * self.eps * self.eps)))
    }

    /// Calls `f(r, w_r, ring)` for every radial node of the split quadrature
    /// of `∫₀¹ ∫₀^{2π} · dα dr` centred at `z`, with `ring` the unit
    /// directions and angular weights for that radius.
    fn visit(&self, z: Vec2, mut f: impl FnMut(f64, f64, &[(Vec2, f64)])) {
        let mut breaks = [0.0; 16];
        let mut nb = 1;
        let mut extra: Vec<f64> = Vec::new();
        for (d, _) in &self.lines {
            let t = d.cross(z).abs() / self.eps;
            if t > 1e-12 && t < 1.0 - 1e-12 {
                if nb < 15 {
                    breaks[nb] = t;
                    nb += 1;
                } else {
                    extra.push(t);
                }
            }
        }
        let mut breaks: Vec<f64> = breaks[..nb].iter().copied().chain(extra).collect();
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        let mut cuts: Vec<f64> = Vec::new();
        let mut nodes: Vec<(Vec2, f64)> = Vec::new();
        for (k, iv) in breaks.windows(2).enumerate() {
            let (lo, hi) = (iv[0], iv[1]);
            let len = hi - lo;
            if len <= 0.0 {
                continue;
            }
            for &(s, w) in &self.radial {
                let (r, jac) = if k == 0 { (lo + len * s, len) } else { (lo + len * s * s, 2.0 * len * s) };
                if r > 0.995 {
                    // exp(−1/(1−r²)) < 1e−43
                    continue;
                }
                let wr = w * jac;
                let rho = self.eps * r;
                cuts.clear();
                for (d, beta) in &self.lines {
                    let c = d.cross(z) / rho;
                    if c.abs() < 1.0 {
                        let a = c.asin();
                        cuts.push((beta + a).rem_euclid(TAU));
                        cuts.push((beta + PI - a).rem_euclid(TAU));
                    }
                }
                if cuts.is_empty() {
                    f(r, wr, &self.ring);
                    continue;
                }
                cuts.sort_by(f64::total_cmp);
                let first = cuts[0];
                cuts.push(first + TAU);
                nodes.clear();
                for c in cuts.windows(2) {
                    let len = c[1] - c[0];
                    nodes.extend(self.arc.iter().map(|&(s, w)| (Vec2::polar(c[0] + len * s), w * len)));
                }
                f(r, wr, &nodes);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MollifyOptions {
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Initial uniform angular table size.
    pub base_angles: usize,
    /// Relative interpolation tolerance driving angular refinement.
    pub table_tol: f64,
    pub max_knots: usize,
    /// Radius `δ` of the ball that must stay inside `K_n`; `None` uses half
    /// the inradius of `K`.
    pub delta: Option<f64>,
}

impl Default for MollifyOptions {
    fn default() -> Self {
        MollifyOptions {
            radial_nodes: 64,
            angular_nodes: 48,
            base_angles: 256,
            table_tol: 1e-10,
            max_knots: 40_000,
            delta: None,
        }
    }
}

/// A smooth regularisation `H_n = Φ_n^p` of a base anisotropy.
#[derive(Debug, Clone)]
pub struct RegularizedAnisotropy {
    base: Anisotropy,
    eps: f64,
    delta: f64,
    smoothed: Anisotropy,
    lambda: f64,
    big_lambda: f64,
}

impl RegularizedAnisotropy {
    pub fn base(&self) -> &Anisotropy {
        &self.base
    }

    /// Mollification radius `ε_n`.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The smoothed integrand `H_n` as an ordinary anisotropy.
    pub fn smoothed(&self) -> &Anisotropy {
        &self.smoothed
    }

    /// Sampled ellipticity pair `(λ_n, Λ_n)` with
    /// `λ_n |v|²|z|^{p−2} ≤ (D²H_n(z) v, v) ≤ Λ_n |v|²|z|^{p−2}`.
    pub fn ellipticity(&self) -> (f64, f64) {
        (self.lambda, self.big_lambda)
    }

    pub fn eval_h(&self, z: Vec2) -> f64 {
        self.smoothed.eval_h(z)
    }

    pub fn knots(&self) -> usize {
        match self.smoothed.gauge() {
            Gauge::Profile(p) => p.spline().len(),
            _ => 0,
        }
    }
}

/// Builds `H_n` for mollification radius `eps`.
pub fn mollify_regularize(
    a: &Anisotropy,
    eps: f64,
    opts: &MollifyOptions,
) -> Result<RegularizedAnisotropy> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("mollification radius {eps} must be positive")));
    }
    let p = a.p();
    let mol = Mollifier::new(eps, &a.gauge().singular_lines(), opts.radial_nodes, opts.angular_nodes);
    let h = |y: Vec2| a.eval_h(y);
    let g_n = |z: Vec2| -> f64 { mol.convolve(&h, z) + 0.5 * eps * z.norm_sq() };
    let delta = opts.delta.unwrap_or(0.5 / a.gauge().unit_circle_range(2048).1);
    if g_n(Vec2::ZERO) >= 1.0 {
        return Err(Error::RegularizationTooCoarse(format!(
            "G_n(0) = {} ≥ 1 for ε = {eps}",
            g_n(Vec2::ZERO)
        )));
    }

    // Radius of K_n along direction θ; the gauge profile is its reciprocal.
    // `guess` narrows the initial bracket when a good prediction exists.
    let radius_near = |theta: f64, guess: Option<f64>| -> Result<f64> {
        let e = Vec2::polar(theta);
        // G_n ≥ H, so G_n ≥ 1 where H = 1.
        let hi = 1.0 / a.gauge().value(e);
        let f = |r: f64| g_n(e * r) - 1.0;
        // Secant iteration seeded with the slope p/r of a p-homogeneous
        // level function; the bracketed solver is the fallback.
        let r0 = guess.filter(|r| *r > 0.0 && *r < hi).unwrap_or(hi);
        let (mut x0, mut f0) = (r0, f(r0));
        let mut x1 = x0 - f0 * x0 / p;
        for _ in 0..12 {
            if !(x1 > 0.0 && x1 <= hi) {
                break;
            }
            let f1 = f(x1);
            if (x1 - x0).abs() <= 1e-14 * hi || f1 == 0.0 {
                return Ok(x1);
            }
            let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            (x0, f0, x1) = (x1, f1, x2);
        }
        illinois(f, 0.0, hi, 1e-14 * hi)
    };
    let radius = |theta: f64| radius_near(theta, None);

    let mut angles: Vec<f64> =
        (0..opts.base_angles).map(|i| TAU * i as f64 / opts.base_angles as f64).collect();
    let mut radii: Vec<f64> = angles.par_iter().map(|&t| radius(t)).collect::<Result<_>>()?;
    let min_gap = (eps / 64.0).max(1e-9);
    let mut spline = build_profile(&angles, &radii)?;
    // Intervals (by left endpoint) whose midpoint has not yet been accepted.
    let mut pending: Vec<f64> = angles.clone();
    for _round in 0..60 {
        let n = angles.len();
        let candidates: Vec<f64> = pending
            .iter()
            .filter_map(|&t0| {
                let i = angles.partition_point(|&t| t < t0);
                let t1 = if i + 1 < n { angles[i + 1] } else { angles[0] + TAU };
                (t1 - t0 > 2.0 * min_gap).then_some(0.5 * (t0 + t1))
            })
            .collect();
        let inserts: Vec<(f64, f64, f64)> = candidates
            .par_iter()
            .map(|&mid| radius_near(mid, Some(1.0 / spline.eval(mid).0)).map(|r| (mid, r)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter_map(|(mid, r)| {
                let exact = 1.0 / r;
                let (g, _, g2) = spline.eval(mid);
                let i = angles.partition_point(|&t| t < mid).max(1) - 1;
                let half = mid - angles[i];
                // Bound the induced curvature error by a fraction of the
                // local curvature of the profile.
                let curv = (g + g2).abs().max(eps * g);
                let tol = (opts.table_tol * exact).min(curv * half * half / 64.0).max(1e-13 * exact);
                ((g - exact).abs() > tol).then_some((angles[i], mid.rem_euclid(TAU), r))
            })
            .collect();
        if inserts.is_empty() {
            break;
        }
        if angles.len() + inserts.len() > opts.max_knots {
            return Err(Error::Numeric(format!(
                "angular table for ε = {eps} exceeds {} knots",
                opts.max_knots
            )));
        }
        pending = inserts.iter().flat_map(|&(t0, m, _)| [t0, m]).collect();
        let mut merged: Vec<(f64, f64)> = angles.iter().copied().zip(radii.iter().copied()).collect();
        merged.extend(inserts.iter().map(|&(_, m, r)| (m, r)));
        merged.sort_by(|x, y| x.0.total_cmp(&y.0));
        angles = merged.iter().map(|m| m.0).collect();
        radii = merged.iter().map(|m| m.1).collect();
        spline = build_profile(&angles, &radii)?;
    }

    let rmin = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if rmin < delta {
        return Err(Error::RegularizationTooCoarse(format!(
            "B_δ(0) ⊄ K_n: min radius {rmin} < δ = {delta} at ε = {eps}"
        )));
    }
    // Curvature g + g'' of the profile at each knot, from the implicit
    // function theorem on {G_n = 1}.
    let fine = Mollifier::new(eps, &a.gauge().singular_lines(), 2 * opts.radial_nodes, opts.angular_nodes);
    let log_curv: Vec<f64> = angles
        .par_iter()
        .zip(radii.par_iter())
        .map(|(&theta, &rho)| {
            let e = Vec2::polar(theta);
            let z = e * rho;
            let (_, dc, hc) = fine.convolve_d2(&h, z, a.gradient_h(z));
            let dg = dc + z * eps;
            let hg = hc.add(&Sym2::identity().scale(eps));
            let t = dg.perp().normalized();
            let q = rho * hg.quad(t) / (dg.dot(z) * t.dot(e.perp()).powi(2));
            if q > 0.0 && q.is_finite() {
                Ok(q.ln())
            } else {
                Err(Error::Numeric(format!("non-positive curvature {q} of K_n at θ = {theta}")))
            }
        })
        .collect::<Result<_>>()?;
    let curvature = PeriodicSpline::new(angles.clone(), log_curv)?;
    let smoothed =
        Anisotropy::new(Gauge::Profile(AngularProfile::with_curvature(spline, curvature)), p)?;

    // Ellipticity pair on the unit circle (D²H_n / |z|^{p−2} is 0-homogeneous),
    // sampled at the knots, their midpoints and a uniform grid.
    let n = angles.len();
    let mut samples: Vec<f64> = (0..4096).map(|i| TAU * i as f64 / 4096.0).collect();
    for i in 0..n {
        let t1 = if i + 1 < n { angles[i + 1] } else { angles[0] + TAU };
        samples.push(angles[i]);
        samples.push(0.5 * (angles[i] + t1));
    }
    let (lambda, big_lambda) = samples
        .par_iter()
        .map(|&t| {
            smoothed.hessian_h(Vec2::polar(t)).map_or((f64::NAN, f64::NAN), |h| h.eigenvalues())
        })
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |x, y| (x.0.min(y.0), x.1.max(y.1)));

    Ok(RegularizedAnisotropy { base: a.clone(), eps, delta, smoothed, lambda, big_lambda })
}

fn build_profile(angles: &[f64], radii: &[f64]) -> Result<PeriodicSpline> {
    PeriodicSpline::new(angles.to_vec(), radii.iter().map(|r| 1.0 / r).collect())
}
