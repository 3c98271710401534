//! Gauges (Minkowski functionals) of planar convex bodies, their polars and
//! derivatives.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{self, max_over_angles};
use crate::spline::PeriodicSpline;
use crate::vec2::{Sym2, Vec2};

use super::body::{ell_r_norm, ConvexBody};

/// A positively 1-homogeneous convex function vanishing only at the origin.
#[derive(Debug, Clone)]
pub enum Gauge {
    /// `Φ(z) = max_k ⟨a_k, z⟩`; unit ball is the polygon with `vertices`.
    Polyhedral { normals: Vec<Vec2>, vertices: Vec<Vec2> },
    /// ℓ_r norm for `1 < r < ∞`.
    EllR { r: f64 },
    /// Gauge of the disc `{|ξ − c| ≤ R}`:
    /// `Φ(z) = (sqrt(zᵀ M z) − ⟨c, z⟩) / a` with `a = R² − |c|²`, `M = c cᵀ + a I`.
    ShiftedDisc { center: Vec2, radius: f64, metric: Sym2, a: f64 },
    /// Tabulated angular profile `Φ(z) = |z| g(arg z)`.
    Profile(AngularProfile),
}

/// Angular profile `g(θ) = Φ(e_θ)` interpolated by a periodic cubic spline.
///
/// The curvature `g + g''` can be supplied separately as a spline of its
/// logarithm; it then stays positive between knots even where the value
/// spline cannot resolve it.
#[derive(Debug, Clone)]
pub struct AngularProfile {
    spline: Arc<PeriodicSpline>,
    log_curvature: Option<Arc<PeriodicSpline>>,
}

impl AngularProfile {
    pub fn new(spline: PeriodicSpline) -> Self {
        AngularProfile { spline: Arc::new(spline), log_curvature: None }
    }

    pub fn with_curvature(spline: PeriodicSpline, log_curvature: PeriodicSpline) -> Self {
        AngularProfile { spline: Arc::new(spline), log_curvature: Some(Arc::new(log_curvature)) }
    }

    /// `g + g''` at angle `theta`.
    pub fn curvature(&self, theta: f64) -> f64 {
        match &self.log_curvature {
            Some(c) => c.eval(theta).0.exp(),
            None => {
                let (g, _, g2) = self.spline.eval(theta);
                g + g2
            }
        }
    }

    pub fn spline(&self) -> &PeriodicSpline {
        &self.spline
    }

    /// `(g, g', g'')` at angle `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        self.spline.eval(theta)
    }
}

const KINK_REL_TOL: f64 = 1e-9;

impl Gauge {
    pub fn from_body(body: &ConvexBody) -> Result<Gauge> {
        body.validate()?;
        Ok(match body {
            ConvexBody::Polytope { vertices } => Gauge::polyhedral(vertices.clone()),
            ConvexBody::EllR { r } if r.is_infinite() => Gauge::polyhedral(vec![
                Vec2::new(1.0, -1.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(-1.0, -1.0),
            ]),
            ConvexBody::EllR { r } if *r == 1.0 => Gauge::polyhedral(vec![
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(-1.0, 0.0),
                Vec2::new(0.0, -1.0),
            ]),
            ConvexBody::EllR { r } => Gauge::EllR { r: *r },
            ConvexBody::Disc { center, radius } => {
                let a = radius * radius - center.norm_sq();
                let metric = Sym2::outer(*center).add(&Sym2::identity().scale(a));
                Gauge::ShiftedDisc { center: *center, radius: *radius, metric, a }
            }
        })
    }

    fn polyhedral(vertices: Vec<Vec2>) -> Gauge {
        let n = vertices.len();
        let normals = (0..n)
            .map(|i| {
                let a = vertices[i];
                let e = vertices[(i + 1) % n] - a;
                let nrm = Vec2::new(e.y, -e.x);
                nrm / nrm.dot(a)
            })
            .collect();
        Gauge::Polyhedral { normals, vertices }
    }

    /// Whether the gauge is `C²` away from the origin.
    pub fn is_smooth(&self) -> bool {
        match self {
            Gauge::Polyhedral { .. } => false,
            Gauge::EllR { r } => *r >= 2.0,
            Gauge::ShiftedDisc { .. } | Gauge::Profile(_) => true,
        }
    }

    /// Unit directions of the lines through the origin carrying the points
    /// where the gauge fails to be `C²` (up to sign, deduplicated).
    pub fn singular_lines(&self) -> Vec<Vec2> {
        let mut dirs: Vec<Vec2> = match self {
            Gauge::Polyhedral { vertices, .. } => vertices.iter().map(|v| v.normalized()).collect(),
            Gauge::EllR { r } if *r < 2.0 => vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            _ => Vec::new(),
        };
        let mut out: Vec<Vec2> = Vec::with_capacity(dirs.len());
        for d in dirs.drain(..) {
            if out.iter().all(|e| e.cross(d).abs() > 1e-12) {
                out.push(d);
            }
        }
        out
    }

    pub fn value(&self, z: Vec2) -> f64 {
        match self {
            Gauge::Polyhedral { normals, .. } => {
                normals.iter().map(|a| a.dot(z)).fold(f64::NEG_INFINITY, f64::max).max(0.0)
            }
            Gauge::EllR { r } => ell_r_norm(z, *r),
            Gauge::ShiftedDisc { center, metric, a, .. } => {
                let q = metric.quad(z).max(0.0).sqrt();
                ((q - center.dot(z)) / a).max(0.0)
            }
            Gauge::Profile(p) => {
                let r = z.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r * p.eval(z.angle()).0
                }
            }
        }
    }

    /// Gradient where differentiable; at a kink of a polyhedral gauge the
    /// gradient of the lowest-index active facet (an element of the
    /// subdifferential). Zero at the origin.
    pub fn gradient(&self, z: Vec2) -> Vec2 {
        if z == Vec2::ZERO {
            return Vec2::ZERO;
        }
        match self {
            Gauge::Polyhedral { normals, .. } => {
                let mut best = (f64::NEG_INFINITY, Vec2::ZERO);
                for a in normals {
                    let v = a.dot(z);
                    if v > best.0 {
                        best = (v, *a);
                    }
                }
                best.1
            }
            Gauge::EllR { r } => {
                let n = ell_r_norm(z, *r);
                let comp = |c: f64| c.signum() * (c.abs() / n).powf(r - 1.0);
                Vec2::new(comp(z.x), comp(z.y))
            }
            Gauge::ShiftedDisc { center, metric, a, .. } => {
                let mz = metric.apply(z);
                let q = metric.quad(z).sqrt();
                (mz / q - *center) / *a
            }
            Gauge::Profile(p) => {
                let r = z.norm();
                let u = z / r;
                let (g, g1, _) = p.eval(z.angle());
                u * g + u.perp() * g1
            }
        }
    }

    /// Hessian away from the origin; `None` where the gauge is not twice
    /// differentiable (polyhedral gauges, ℓ_r with `r < 2` on the axes).
    pub fn hessian(&self, z: Vec2) -> Option<Sym2> {
        if z == Vec2::ZERO {
            return None;
        }
        match self {
            Gauge::Polyhedral { .. } => None,
            Gauge::EllR { r } => {
                if *r < 2.0 && (z.x == 0.0 || z.y == 0.0) {
                    return None;
                }
                // Φ = n, ∂_i n = s_i (|z_i|/n)^{r-1},
                // ∂_ij n = (r-1)/n [ (|z_i|/n)^{r-2} δ_ij − (|z_i| |z_j| / n²)^{r-1} s_i s_j ].
                let n = ell_r_norm(z, *r);
                let (a, b) = (z.x.abs() / n, z.y.abs() / n);
                let (sa, sb) = (z.x.signum(), z.y.signum());
                let k = (r - 1.0) / n;
                let xx = k * (a.powf(r - 2.0) - a.powf(2.0 * r - 2.0));
                let yy = k * (b.powf(r - 2.0) - b.powf(2.0 * r - 2.0));
                let xy = -k * (a * b).powf(r - 1.0) * sa * sb;
                Some(Sym2::new(xx, xy, yy))
            }
            Gauge::ShiftedDisc { metric, a, .. } => {
                let mz = metric.apply(z);
                let q = metric.quad(z).sqrt();
                Some(metric.scale(1.0 / q).add(&Sym2::outer(mz).scale(-1.0 / (q * q * q))).scale(1.0 / a))
            }
            Gauge::Profile(p) => {
                let r = z.norm();
                let t = (z / r).perp();
                Some(Sym2::outer(t).scale(p.curvature(z.angle()) / r))
            }
        }
    }

    /// Whether `z` lies on a non-differentiability set of the gauge (within a
    /// relative tolerance).
    pub fn is_kink(&self, z: Vec2) -> bool {
        match self {
            Gauge::Polyhedral { normals, .. } => {
                if z == Vec2::ZERO {
                    return true;
                }
                let mut vals: Vec<f64> = normals.iter().map(|a| a.dot(z)).collect();
                vals.sort_by(|a, b| b.total_cmp(a));
                vals[0] - vals[1] <= KINK_REL_TOL * vals[0].abs().max(z.norm())
            }
            _ => z == Vec2::ZERO,
        }
    }

    /// Polar gauge `Φ°(z) = sup{⟨ξ, z⟩ : Φ(ξ) ≤ 1}`, the support function of
    /// the unit ball.
    pub fn polar(&self, z: Vec2) -> f64 {
        if z == Vec2::ZERO {
            return 0.0;
        }
        match self {
            Gauge::Polyhedral { vertices, .. } => {
                vertices.iter().map(|v| v.dot(z)).fold(f64::NEG_INFINITY, f64::max)
            }
            Gauge::EllR { r } => ell_r_norm(z, r / (r - 1.0)),
            Gauge::ShiftedDisc { center, radius, .. } => center.dot(z) + radius * z.norm(),
            Gauge::Profile(_) => self.polar_numeric(z),
        }
    }

    /// Polar gauge by sampling the boundary of the unit ball along 512 rays
    /// with golden-section refinement of the best 8.
    pub fn polar_numeric(&self, z: Vec2) -> f64 {
        if z == Vec2::ZERO {
            return 0.0;
        }
        let f = |t: f64| {
            let e = Vec2::polar(t);
            e.dot(z) / self.value(e)
        };
        max_over_angles(&f, 512, 8).1
    }

    /// Reversed polar `Φ̌°(x) = Φ°(−x)`.
    pub fn reversed_polar(&self, x: Vec2) -> f64 {
        self.polar(-x)
    }

    /// Minimum and maximum of `Φ` on the unit circle, sampled.
    pub fn unit_circle_range(&self, samples: usize) -> (f64, f64) {
        (0..samples)
            .map(|i| self.value(Vec2::polar(TAU * i as f64 / samples as f64)))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Minkowski functional `Φ(z) = inf{t > 0 : z/t ∈ K}` evaluated by bisection
/// along the ray through `z` with relative tolerance `1e-10`. Works for any
/// membership oracle.
pub fn minkowski_gauge(body: &ConvexBody, z: Vec2) -> Result<f64> {
    body.validate()?;
    if z == Vec2::ZERO {
        return Ok(0.0);
    }
    // Φ(z) = 1/s where s = sup{s : s z ∈ K}.
    let inside = |s: f64| body.contains(z * s);
    let mut hi = 1.0 / z.norm();
    let mut guard = 0;
    while inside(hi) {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Configuration("convex body is unbounded along ray".into()));
        }
    }
    let mut lo = hi * 0.5;
    while !inside(lo) {
        lo *= 0.5;
        guard += 1;
        if guard > 400 {
            return Err(Error::Configuration("origin is not interior to the body".into()));
        }
    }
    while hi - lo > 1e-11 * lo {
        let m = 0.5 * (lo + hi);
        if inside(m) {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(1.0 / (0.5 * (lo + hi)))
}

/// Polar gauge of a body from its gauge: `Φ°(z) = sup_θ ⟨e_θ, z⟩ / Φ(e_θ)`.
pub fn polar_gauge(body: &ConvexBody, z: Vec2) -> Result<f64> {
    Ok(Gauge::from_body(body)?.polar(z))
}

/// Result of [`check_polar_identities`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct PolarIdentityReport {
    pub point: Vec2,
    /// The gauge is not differentiable at the sample (or its image under the
    /// polar gradient); nothing was checked.
    pub skipped_nonsmooth: bool,
    /// `|Φ(DΦ°(x)) − 1|`
    pub gauge_of_polar_gradient: f64,
    /// `|Φ°(DΦ(x)) − 1|`
    pub polar_of_gauge_gradient: f64,
    /// `|Φ(x) DΦ°(DΦ(x)) − x|`
    pub inverse_map: f64,
    pub tolerance: f64,
    pub holds: bool,
}

fn central_gradient<F: Fn(Vec2) -> f64>(f: &F, x: Vec2) -> (Vec2, f64) {
    let h = numerics::fd_step(x.norm());
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let (fxp, fxm, fyp, fym, f0) = (f(x + ex), f(x - ex), f(x + ey), f(x - ey), f(x));
    let grad = Vec2::new((fxp - fxm) / (2.0 * h), (fyp - fym) / (2.0 * h));
    // One-sided derivative mismatch flags a kink.
    let kink = ((fxp - f0) - (f0 - fxm)).abs().max(((fyp - f0) - (f0 - fym)).abs()) / h;
    (grad, kink)
}

/// Verifies `Φ(DΦ°(x)) = 1`, `Φ°(DΦ(x)) = 1` and `Φ(x) DΦ°(DΦ(x)) = x` with
/// gradients by central differences.
pub fn check_polar_identities(gauge: &Gauge, x: Vec2, tolerance: f64) -> PolarIdentityReport {
    let phi = |z: Vec2| gauge.value(z);
    let polar = |z: Vec2| gauge.polar(z);
    let (dphi, kink1) = central_gradient(&phi, x);
    let (dpolar, kink2) = central_gradient(&polar, x);
    let (dpolar_at_dphi, kink3) = central_gradient(&polar, dphi);
    let kink_tol = 1e-4;
    if kink1 > kink_tol || kink2 > kink_tol || kink3 > kink_tol {
        return PolarIdentityReport {
            point: x,
            skipped_nonsmooth: true,
            gauge_of_polar_gradient: f64::NAN,
            polar_of_gauge_gradient: f64::NAN,
            inverse_map: f64::NAN,
            tolerance,
            holds: false,
        };
    }
    let e1 = (gauge.value(dpolar) - 1.0).abs();
    let e2 = (gauge.polar(dphi) - 1.0).abs();
    let e3 = (dpolar_at_dphi * gauge.value(x) - x).norm() / x.norm();
    PolarIdentityReport {
        point: x,
        skipped_nonsmooth: false,
        gauge_of_polar_gradient: e1,
        polar_of_gauge_gradient: e2,
        inverse_map: e3,
        tolerance,
        holds: e1 <= tolerance && e2 <= tolerance && e3 <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shifted() -> ConvexBody {
        ConvexBody::Disc { center: Vec2::new(0.5, 0.0), radius: 1.0 }
    }

    /// Independent oracle: solve |z/t − c| = R for t by direct quadratic formula
    /// in t (not the metric form used by the gauge).
    fn disc_gauge_oracle(c: Vec2, r: f64, z: Vec2) -> f64 {
        // |z − t c|² = R² t²  ⇔  (|c|² − R²) t² − 2 (z·c) t + |z|² = 0
        let qa = c.norm_sq() - r * r;
        let qb = -2.0 * z.dot(c);
        let qc = z.norm_sq();
        let disc = (qb * qb - 4.0 * qa * qc).sqrt();
        let roots = [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)];
        roots.into_iter().filter(|t| *t > 0.0).fold(f64::NAN, f64::max)
    }

    #[test]
    fn gauge_examples() {
        let sq = ConvexBody::square();
        assert_relative_eq!(minkowski_gauge(&sq, Vec2::new(3.0, 1.0)).unwrap(), 3.0, max_relative = 1e-10);
        assert_relative_eq!(Gauge::from_body(&sq).unwrap().value(Vec2::new(3.0, 1.0)), 3.0);

        let d = shifted();
        let g = Gauge::from_body(&d).unwrap();
        for (z, want) in [(Vec2::new(1.0, 0.0), 2.0 / 3.0), (Vec2::new(-1.0, 0.0), 2.0)] {
            assert_relative_eq!(disc_gauge_oracle(Vec2::new(0.5, 0.0), 1.0, z), want, max_relative = 1e-14);
            assert_relative_eq!(g.value(z), want, max_relative = 1e-14);
            assert_relative_eq!(minkowski_gauge(&d, z).unwrap(), want, max_relative = 1e-10);
        }
        let e = Gauge::from_body(&ConvexBody::euclidean()).unwrap();
        assert_relative_eq!(e.value(Vec2::new(0.6, 0.8)), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn origin_not_interior_is_configuration_error() {
        let bad = ConvexBody::Disc { center: Vec2::new(1.0, 0.0), radius: 0.5 };
        assert!(matches!(minkowski_gauge(&bad, Vec2::new(1.0, 0.0)), Err(Error::Configuration(_))));
        assert!(matches!(polar_gauge(&bad, Vec2::new(1.0, 0.0)), Err(Error::Configuration(_))));
    }

    #[test]
    fn polar_examples() {
        let l1 = Gauge::from_body(&ConvexBody::EllR { r: 1.0 }).unwrap();
        assert_relative_eq!(l1.polar(Vec2::new(2.0, -3.0)), 3.0);
        let g = Gauge::from_body(&shifted()).unwrap();
        assert_relative_eq!(g.polar(Vec2::new(1.0, 0.0)), 1.5);
        // numeric support function agrees with the closed form
        assert_relative_eq!(g.polar_numeric(Vec2::new(1.0, 0.0)), 1.5, max_relative = 1e-9);
        assert_relative_eq!(g.polar_numeric(Vec2::new(-0.3, 0.7)), g.polar(Vec2::new(-0.3, 0.7)), max_relative = 1e-9);
        assert_eq!(g.polar(Vec2::ZERO), 0.0);
        assert_eq!(l1.polar(Vec2::ZERO), 0.0);
    }

    #[test]
    fn polar_identities() {
        let e = Gauge::from_body(&ConvexBody::euclidean()).unwrap();
        let r = check_polar_identities(&e, Vec2::new(1.0, 1.0), 1e-8);
        assert!(r.holds && !r.skipped_nonsmooth, "{r:?}");

        let g = Gauge::from_body(&shifted()).unwrap();
        let r = check_polar_identities(&g, Vec2::new(1.0, 0.0), 1e-6);
        assert!(r.holds, "{r:?}");

        let sq = Gauge::from_body(&ConvexBody::square()).unwrap();
        let r = check_polar_identities(&sq, Vec2::new(1.0, 1.0), 1e-6);
        assert!(r.skipped_nonsmooth);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let gauges = [
            Gauge::from_body(&shifted()).unwrap(),
            Gauge::from_body(&ConvexBody::EllR { r: 3.0 }).unwrap(),
            Gauge::from_body(&ConvexBody::EllR { r: 1.5 }).unwrap(),
        ];
        for g in &gauges {
            for k in 0..13 {
                let z = Vec2::polar(0.37 + 0.45 * k as f64) * (0.5 + 0.1 * k as f64);
                let h = 1e-6;
                let fd = Vec2::new(
                    (g.value(z + Vec2::new(h, 0.0)) - g.value(z - Vec2::new(h, 0.0))) / (2.0 * h),
                    (g.value(z + Vec2::new(0.0, h)) - g.value(z - Vec2::new(0.0, h))) / (2.0 * h),
                );
                assert!((fd - g.gradient(z)).norm() < 1e-7, "{g:?} {z:?}");
                let hs = g.hessian(z).unwrap();
                let gx = (g.gradient(z + Vec2::new(h, 0.0)) - g.gradient(z - Vec2::new(h, 0.0))) / (2.0 * h);
                let gy = (g.gradient(z + Vec2::new(0.0, h)) - g.gradient(z - Vec2::new(0.0, h))) / (2.0 * h);
                assert!((gx.x - hs.xx).abs() < 1e-5 && (gx.y - hs.xy).abs() < 1e-5 && (gy.y - hs.yy).abs() < 1e-5);
            }
        }
    }
}
