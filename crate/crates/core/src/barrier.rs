//! Hopf barriers `ū(x) = w(Φ̌°(x − x1))` on gauge annuli and the numerical
//! Hopf configuration: touching annuli, boundary slopes and comparison.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::anisotropy::{Anisotropy, Gauge, Smoothness};
use crate::domain::{BoundarySample, ConvexDomain, Mesh};
use crate::error::{Error, Result};
use crate::solver::{
    comparison_check, harmonic_extension, harmonic_residuals, ComparisonReport, DiscreteField, EnergyProblem,
};
use crate::vec2::Vec2;

const RAYS: usize = 720;

/// `A_r = {x : r > Φ̌°(x − x1) > r/2}`.
#[derive(Debug, Clone)]
pub struct GaugeAnnulus {
    center: Vec2,
    r: f64,
    gauge: Gauge,
}

impl GaugeAnnulus {
    pub fn new(center: Vec2, r: f64, gauge: Gauge) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("annulus level r = {r} must be positive")));
        }
        Ok(GaugeAnnulus { center, r, gauge })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    /// `Φ̌°(x − x1)`.
    pub fn level(&self, x: Vec2) -> f64 {
        self.gauge.reversed_polar(x - self.center)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let l = self.level(x);
        l > 0.5 * self.r && l < self.r
    }

    /// Point on the ray through `e` with `Φ̌° = level`.
    pub fn ray_point(&self, e: Vec2, level: f64) -> Vec2 {
        self.center + e * (level / self.gauge.reversed_polar(e))
    }

    /// Euclidean extent `(min, max)` of the unit level set `{Φ̌° = 1}`.
    pub fn unit_extent(&self) -> (f64, f64) {
        (0..RAYS)
            .map(|k| 1.0 / self.gauge.reversed_polar(Vec2::polar(TAU * k as f64 / RAYS as f64)))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Strictly decreasing radial solution `w` with `w(r/2) = m`, `w(r) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierProfile {
    pub p: f64,
    pub n: u32,
    pub r: f64,
    pub m: f64,
    pub a: f64,
    pub b: f64,
}

/// Solves for `(A, B)` in `w(t) = A/(p−N)·t^{(p−N)/(p−1)} + B`, or
/// `w(t) = A log t + B` when `p = N`.
pub fn barrier_profile(p: f64, n: u32, r: f64, m: f64) -> Result<BarrierProfile> {
    if !(p > 1.0) || n < 2 || !(r > 0.0) {
        return Err(Error::Domain(format!("barrier needs p > 1, N ≥ 2, r > 0 (got {p}, {n}, {r})")));
    }
    if !(m > 0.0) {
        return Err(Error::Domain(format!("barrier boundary value m = {m} must be positive")));
    }
    let nf = n as f64;
    let (a, b) = if p == nf {
        let a = -m / 2f64.ln();
        (a, -a * r.ln())
    } else {
        let g = (p - nf) / (p - 1.0);
        let a = m * (p - nf) / ((0.5 * r).powf(g) - r.powf(g));
        (a, -a / (p - nf) * r.powf(g))
    };
    Ok(BarrierProfile { p, n, r, m, a, b })
}

impl BarrierProfile {
    fn is_log(&self) -> bool {
        self.p == self.n as f64
    }

    fn gamma(&self) -> f64 {
        (self.p - self.n as f64) / (self.p - 1.0)
    }

    pub fn w(&self, t: f64) -> f64 {
        if self.is_log() {
            self.a * (t / self.r).ln()
        } else {
            self.a / (self.p - self.n as f64) * (t.powf(self.gamma()) - self.r.powf(self.gamma()))
        }
    }

    pub fn dw(&self, t: f64) -> f64 {
        self.a / (self.p - 1.0) * t.powf((1.0 - self.n as f64) / (self.p - 1.0))
    }

    /// `(−w'(t))^{p−1} t^{N−1}`, constant along the profile.
    pub fn invariant(&self, t: f64) -> f64 {
        (-self.dw(t)).powf(self.p - 1.0) * t.powf(self.n as f64 - 1.0)
    }
}

/// `w(Φ̌°(x − x1))` on the closed annulus.
pub fn barrier_field(annulus: &GaugeAnnulus, profile: &BarrierProfile, x: Vec2) -> Result<f64> {
    let l = annulus.level(x);
    let r = annulus.r;
    let tol = 1e-12 * r;
    if l < 0.5 * r - tol || l > r + tol {
        return Err(Error::Domain(format!("point ({}, {}) at level {l} is outside the annulus", x.x, x.y)));
    }
    Ok(profile.w(l.clamp(0.5 * r, r)))
}

/// Polar mesh of the annulus in gauge coordinates: rays of `Φ̌°` times
/// evenly spaced levels. Nodes on the two level sets are boundary nodes.
#[derive(Debug, Clone)]
pub struct AnnulusMesh {
    pub mesh: Arc<Mesh>,
    /// Exact `Φ̌°` level of each node.
    pub levels: Vec<f64>,
}

impl AnnulusMesh {
    pub fn new(annulus: &GaugeAnnulus, h: f64) -> Result<Self> {
        let r = annulus.r;
        let (_, hi) = annulus.unit_extent();
        if !(h > 0.0) || h >= 0.5 * r * hi {
            return Err(Error::Meshing(format!("mesh size {h} does not resolve the annulus")));
        }
        let nl = ((0.5 * r * hi / h).ceil() as usize).max(2);
        let dirs: Vec<Vec2> = (0..RAYS).map(|k| Vec2::polar(TAU * k as f64 / RAYS as f64)).collect();
        let perim: f64 = (0..RAYS)
            .map(|k| (annulus.ray_point(dirs[(k + 1) % RAYS], r) - annulus.ray_point(dirs[k], r)).norm())
            .sum();
        let na = ((perim / h).ceil() as usize).max(12);
        let mut nodes = Vec::with_capacity((nl + 1) * na);
        let mut levels = Vec::with_capacity((nl + 1) * na);
        let mut boundary = Vec::with_capacity((nl + 1) * na);
        for k in 0..=nl {
            let lv = if k == nl { r } else { 0.5 * r * (1.0 + k as f64 / nl as f64) };
            for j in 0..na {
                let e = Vec2::polar(TAU * j as f64 / na as f64);
                nodes.push(annulus.ray_point(e, lv));
                levels.push(lv);
                boundary.push(k == 0 || k == nl);
            }
        }
        let id = |k: usize, j: usize| k * na + j % na;
        let mut tris = Vec::with_capacity(2 * nl * na);
        for k in 0..nl {
            for j in 0..na {
                let (a, b, c, d) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
                if (nodes[a] - nodes[c]).norm() <= (nodes[b] - nodes[d]).norm() {
                    tris.push([a, b, c]);
                    tris.push([a, c, d]);
                } else {
                    tris.push([a, b, d]);
                    tris.push([b, c, d]);
                }
            }
        }
        let mesh = Mesh::from_parts(nodes, tris, boundary, h)?;
        Ok(AnnulusMesh { mesh: Arc::new(mesh), levels })
    }

    /// Nodal barrier values; exact on both level sets.
    pub fn barrier(&self, profile: &BarrierProfile) -> Result<DiscreteField> {
        let values = self
            .levels
            .iter()
            .map(|&l| {
                if l == profile.r {
                    0.0
                } else if l == 0.5 * profile.r {
                    profile.m
                } else {
                    profile.w(l)
                }
            })
            .collect();
        DiscreteField::new(self.mesh.clone(), values, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierResidual {
    pub h: f64,
    pub interior_nodes: usize,
    /// Largest nodal weak residual, normalized by `‖φ_i‖_{L²}`.
    pub max: f64,
    /// Root mean square over interior nodes.
    pub rms: f64,
}

/// Weak residual of `div(Φ^{p−1}(Dū) DΦ(Dū))` for the interpolated barrier
/// against interior hat functions.
pub fn verify_barrier_pde(annulus: &GaugeAnnulus, profile: &BarrierProfile, mesh: &AnnulusMesh) -> Result<BarrierResidual> {
    let aniso = Anisotropy::new(annulus.gauge.clone(), profile.p)?;
    if aniso.smoothness() != Smoothness::Smooth {
        return Err(Error::Precondition("barrier PDE check needs a smooth gauge; regularize first".into()));
    }
    let field = mesh.barrier(profile)?;
    residual_of_field(&aniso, &field)
}

fn residual_of_field(aniso: &Anisotropy, field: &DiscreteField) -> Result<BarrierResidual> {
    let m = field.mesh();
    let res = harmonic_residuals(aniso, m, field.values());
    let interior: Vec<f64> = m.interior_nodes().map(|i| res[i]).collect();
    if interior.is_empty() {
        return Err(Error::Resolution("annulus mesh has no interior nodes".into()));
    }
    let max = interior.iter().copied().fold(0.0, f64::max);
    let rms = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
    Ok(BarrierResidual { h: m.h(), interior_nodes: interior.len(), max, rms })
}

/// Least-squares slope of `log residual` against `log h`.
pub fn convergence_rate(samples: &[BarrierResidual]) -> f64 {
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.h.ln(), s.max.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchingConfig {
    pub x0: Vec2,
    pub x1: Vec2,
    pub r: f64,
    /// Smallest distance to `∂Ω` of outer level-set samples away from `x0`.
    pub inclusion_margin: f64,
}

/// Finds `(x1, r)` with `x1 + A_r ⊆ Ω` touching `∂Ω` only at `x0`.
///
/// The outer level set is tangent to `∂Ω` at `x0` when
/// `x1 = x0 + r·DΦ(n)` for the interior normal `n`; `r` is halved from the
/// inradius scale until the sampled inclusion holds, down to `r_floor`.
pub fn hopf_touching_config(
    domain: &ConvexDomain,
    sample: &BoundarySample,
    gauge: &Gauge,
    r_floor: f64,
) -> Option<TouchingConfig> {
    let x0 = sample.point;
    let diam = domain.diameter();
    if !domain.is_disc() && domain.vertex_distance(x0) <= r_floor.max(1e-9 * diam) {
        return None;
    }
    let n = -sample.normal;
    let dir = gauge.gradient(n);
    let probe = GaugeAnnulus::new(Vec2::ZERO, 1.0, gauge.clone()).ok()?;
    let (lo, hi) = probe.unit_extent();
    let tau = 1e-9 * diam;
    let mut r = 2.0 * domain.inradius() / hi;
    while r >= r_floor {
        let x1 = x0 + dir * r;
        let ann = GaugeAnnulus::new(x1, r, gauge.clone()).ok()?;
        let touch = (ann.level(x0) - r).abs() <= 1e-9 * r;
        let mut ok = touch;
        let mut margin = f64::INFINITY;
        for k in 0..RAYS {
            if !ok {
                break;
            }
            let y = ann.ray_point(Vec2::polar(TAU * k as f64 / RAYS as f64), r);
            let sd = domain.signed_distance(y);
            if sd < -tau {
                ok = false;
            } else if (y - x0).norm() >= 0.25 * r * lo {
                margin = margin.min(sd);
            }
        }
        if ok && margin > tau {
            return Some(TouchingConfig { x0, x1, r, inclusion_margin: margin });
        }
        r *= 0.5;
    }
    None
}

/// Lower barrier on the nodes of an arbitrary mesh: `w(Φ̌°)` in the closed
/// annulus, `m` inside it and `0` outside. Returns the field and the mask of
/// annulus nodes.
pub fn barrier_on_mesh(
    annulus: &GaugeAnnulus,
    profile: &BarrierProfile,
    mesh: Arc<Mesh>,
) -> Result<(DiscreteField, Vec<bool>)> {
    let r = annulus.r;
    let mut mask = Vec::with_capacity(mesh.num_nodes());
    let values = mesh
        .nodes()
        .iter()
        .map(|&x| {
            let l = annulus.level(x);
            mask.push(l >= 0.5 * r && l <= r);
            if l < 0.5 * r {
                profile.m
            } else if l > r {
                0.0
            } else {
                profile.w(l)
            }
        })
        .collect();
    Ok((DiscreteField::new(mesh, values, false)?, mask))
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfReport {
    pub samples: usize,
    /// Offset along the interior normal used for the difference quotients.
    pub step: f64,
    pub min_slope: f64,
    pub mean_slope: f64,
    pub worst_point: Option<Vec2>,
    pub passed: bool,
    /// False for crystalline anisotropies, which lie outside the lemma.
    pub within_hypotheses: bool,
    pub touching: Option<TouchingConfig>,
    /// Inward slope of the barrier at its touching point.
    pub barrier_slope: Option<f64>,
    /// Comparison of `u` with the discretely harmonic barrier.
    pub comparison: Option<ComparisonReport>,
    /// `max (ū − u)` over annulus nodes for the interpolated barrier.
    pub sandwich_deficit: Option<f64>,
    pub sandwich_holds: Option<bool>,
}

/// One-sided difference quotients `u(x0 + s·n)/s` at boundary samples,
/// cross-checked against a barrier on a touching annulus at the first
/// sample that admits one. The barrier height is just below the smallest
/// value of `u` on the inner part of the annulus.
pub fn hopf_slope_check(problem: &EnergyProblem, u: &DiscreteField, samples: &[BoundarySample]) -> Result<HopfReport> {
    let mesh = problem.mesh();
    let domain = problem.domain();
    let h = mesh.h();
    let step = 2.0 * h;
    if step > 0.25 * domain.inradius() {
        return Err(Error::Resolution(format!("mesh size {h} is too coarse near the boundary")));
    }
    if samples.is_empty() {
        return Err(Error::Configuration("no boundary samples".into()));
    }
    let mut min_slope = f64::INFINITY;
    let mut worst_point = None;
    let mut total = 0.0;
    for s in samples {
        let x = s.point - s.normal * step;
        let v = u.eval(x).ok_or_else(|| Error::Domain("interior probe left the mesh".into()))?;
        let slope = v / step;
        total += slope;
        if slope < min_slope {
            min_slope = slope;
            worst_point = Some(s.point);
        }
    }
    let aniso = problem.smooth_anisotropy()?;
    let within_hypotheses = problem.anisotropy().smoothness() == Smoothness::Smooth;
    let mut touching = None;
    let mut barrier_slope = None;
    let mut comparison = None;
    let mut sandwich = None;
    for s in samples {
        let Some(cfg) = hopf_touching_config(domain, s, aniso.gauge(), 10.0 * h) else {
            continue;
        };
        let ann = GaugeAnnulus::new(cfg.x1, cfg.r, aniso.gauge().clone())?;
        let m = mesh
            .nodes()
            .iter()
            .zip(u.values())
            .filter(|(x, _)| ann.level(**x) <= 0.6 * cfg.r)
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min);
        if !(m > 0.0 && m.is_finite()) {
            continue;
        }
        let profile = barrier_profile(problem.p(), 2, cfg.r, 0.999 * m)?;
        let (lower, mask) = barrier_on_mesh(&ann, &profile, mesh.clone())?;
        // Direct nodal sandwich against the interpolated barrier.
        let deficit = (0..mesh.num_nodes())
            .filter(|&i| mask[i])
            .map(|i| lower.values()[i] - u.values()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        sandwich = Some(deficit);
        // The discretely harmonic barrier with the same rim data satisfies
        // the comparison hypotheses exactly.
        let neighbors = mesh.node_neighbors();
        let fixed: Vec<bool> = (0..mesh.num_nodes())
            .map(|i| !mask[i] || mesh.is_boundary(i) || neighbors[i].iter().any(|&j| !mask[j]))
            .collect();
        let tol = 1e-10;
        let discrete = harmonic_extension(&aniso, mesh, lower.values(), &fixed, tol)?;
        let discrete = DiscreteField::new(mesh.clone(), discrete, false)?;
        let res = harmonic_residuals(&aniso, mesh, discrete.values());
        let harmonic_tol = (0..mesh.num_nodes())
            .filter(|&i| !fixed[i])
            .map(|i| res[i])
            .fold(1e-8 * profile.m, f64::max);
        comparison = Some(comparison_check(problem, u, &discrete, &mask, harmonic_tol)?);
        // Inward derivative of w(Φ̌°(x − x1)) at the touching point.
        let d = 1e-6 * cfg.r;
        let n = -s.normal;
        let dl = (ann.level(cfg.x0 + n * d) - ann.level(cfg.x0 - n * d)) / (2.0 * d);
        barrier_slope = Some(profile.dw(cfg.r) * dl);
        touching = Some(cfg);
        break;
    }
    let scale = u.max_abs();
    let sandwich_holds = sandwich.map(|d| d <= 1e-6 * scale);
    let passed = min_slope > 0.0
        && comparison.as_ref().map_or(true, |c| c.holds)
        && sandwich_holds.unwrap_or(true);
    Ok(HopfReport {
        samples: samples.len(),
        step,
        min_slope,
        mean_slope: total / samples.len() as f64,
        worst_point,
        passed,
        within_hypotheses,
        touching,
        barrier_slope,
        comparison,
        sandwich_deficit: sandwich,
        sandwich_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::ConvexBody;

    fn euclid() -> Gauge {
        Anisotropy::euclidean(2.0).unwrap().gauge().clone()
    }

    #[test]
    fn profile_coefficients() {
        let b = barrier_profile(2.0, 2, 1.0, 1.0).unwrap();
        assert!((b.a + 1.0 / 2f64.ln()).abs() < 1e-15 && b.b == 0.0);
        let b = barrier_profile(3.0, 2, 1.0, 1.0).unwrap();
        assert!((b.a - 1.0 / (0.5f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((b.b + b.a).abs() < 1e-12);
        for (p, n) in [(2.0, 2), (3.0, 2), (1.5, 2), (4.0, 3)] {
            let b = barrier_profile(p, n, 0.7, 2.5).unwrap();
            assert_eq!(b.w(0.7), 0.0);
            assert!((b.w(0.35) - 2.5).abs() < 1e-13);
            assert!(b.a < 0.0);
            let i0 = b.invariant(0.35);
            for k in 0..=20 {
                let t = 0.35 + 0.35 * k as f64 / 20.0;
                assert!((b.invariant(t) - i0).abs() <= 1e-12 * i0);
            }
        }
        assert!(matches!(barrier_profile(2.0, 2, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn field_values() {
        let ann = GaugeAnnulus::new(Vec2::ZERO, 1.0, euclid()).unwrap();
        let b = barrier_profile(2.0, 2, 1.0, 1.0).unwrap();
        let v = barrier_field(&ann, &b, Vec2::new(0.75, 0.0)).unwrap();
        assert!((v + 0.75f64.ln() / 2f64.ln()).abs() < 1e-14 && (v - 0.4150).abs() < 1e-4);
        assert_eq!(barrier_field(&ann, &b, Vec2::new(0.0, 1.0)).unwrap(), 0.0);
        assert!((barrier_field(&ann, &b, Vec2::new(-0.5, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(barrier_field(&ann, &b, Vec2::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn shifted_gauge_breaks_symmetry() {
        let body = ConvexBody::Disc { center: Vec2::new(0.5, 0.0), radius: 1.0 };
        let g = Anisotropy::from_body(&body, 2.0).unwrap().gauge().clone();
        let ann = GaugeAnnulus::new(Vec2::new(0.2, 0.1), 1.0, g).unwrap();
        let b = barrier_profile(2.0, 2, 1.0, 1.0).unwrap();
        let d = Vec2::new(0.3, 0.6);
        let plus = barrier_field(&ann, &b, ann.center() + d).unwrap();
        let minus = barrier_field(&ann, &b, ann.center() - d).unwrap();
        assert!((plus - minus).abs() > 0.1, "{plus} {minus}");
    }

    #[test]
    fn constant_field_has_no_residual() {
        let ann = GaugeAnnulus::new(Vec2::ZERO, 1.0, euclid()).unwrap();
        let m = AnnulusMesh::new(&ann, 0.1).unwrap();
        let a = Anisotropy::euclidean(2.0).unwrap();
        let c = DiscreteField::new(m.mesh.clone(), vec![0.3; m.mesh.num_nodes()], false).unwrap();
        assert_eq!(residual_of_field(&a, &c).unwrap().max, 0.0);
    }

    #[test]
    fn euclidean_disc_touching() {
        let d = ConvexDomain::unit_disc();
        let s = &d.boundary_samples(8, 0.0)[1];
        let cfg = hopf_touching_config(&d, s, &euclid(), 0.01).unwrap();
        assert!((cfg.x1 - (s.point - s.normal * cfg.r)).norm() < 1e-12);
        assert!(cfg.inclusion_margin > 0.0);
        let sq = ConvexDomain::unit_square();
        let corner = BoundarySample { point: Vec2::new(1.0, 1.0), normal: Vec2::new(1.0, 1.0).normalized() };
        assert!(hopf_touching_config(&sq, &corner, &euclid(), 0.01).is_none());
    }
}
