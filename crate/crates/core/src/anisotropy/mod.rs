//! Convex positively p-homogeneous integrands `H = Φ^p`, including non-even
//! and crystalline (polyhedral) gauges, their regularisation and Hessian
//! probes.

mod body;
mod gauge;
mod probe;
mod regularize;

pub use body::ConvexBody;
pub use gauge::{
    check_polar_identities, minkowski_gauge, polar_gauge, AngularProfile, Gauge,
    PolarIdentityReport,
};
pub use probe::{
    fd_hessian, hessian_probe_h_theta, hessian_probe_hp2, lemmaquad_lambda_hat, HThetaProbe,
    HessianProbe,
};
pub use regularize::{mollify_regularize, MollifyOptions, RegularizedAnisotropy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::{Sym2, Vec2};

/// Smoothness class of an anisotropy away from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    /// Polyhedral unit ball, or otherwise not twice differentiable.
    Crystalline,
    Smooth,
}

/// Serialized form of an anisotropy: a convex body plus the exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropySpec {
    #[serde(flatten)]
    pub body: ConvexBody,
    pub p: f64,
}

impl AnisotropySpec {
    pub fn build(&self) -> Result<Anisotropy> {
        Anisotropy::from_body(&self.body, self.p)
    }
}

/// `H = Φ^p` for a gauge `Φ` and exponent `p > 1`.
#[derive(Debug, Clone)]
pub struct Anisotropy {
    gauge: Gauge,
    p: f64,
}

/// Where a subgradient came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SubgradientSource {
    /// Gradient at a point of differentiability.
    Exact,
    /// Kink: gradient of the mollified integrand `φ_ε * H` at the point.
    Mollified { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Subgradient {
    pub vector: Vec2,
    pub source: SubgradientSource,
}

/// Mollifier radius used by [`Anisotropy::subgrad_h`] at kinks.
pub const DEFAULT_KINK_EPS: f64 = 1e-6;

impl Anisotropy {
    pub fn new(gauge: Gauge, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Configuration(format!("exponent p = {p} must exceed 1")));
        }
        Ok(Anisotropy { gauge, p })
    }

    pub fn from_body(body: &ConvexBody, p: f64) -> Result<Self> {
        Anisotropy::new(Gauge::from_body(body)?, p)
    }

    /// `|z|^p`.
    pub fn euclidean(p: f64) -> Result<Self> {
        Anisotropy::from_body(&ConvexBody::euclidean(), p)
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn smoothness(&self) -> Smoothness {
        if self.gauge.is_smooth() {
            Smoothness::Smooth
        } else {
            Smoothness::Crystalline
        }
    }

    /// `H(z) = Φ(z)^p`.
    pub fn eval_h(&self, z: Vec2) -> f64 {
        let phi = self.gauge.value(z);
        if self.p == 2.0 {
            phi * phi
        } else {
            phi.powf(self.p)
        }
    }

    /// Gradient of `H` (a subgradient at kinks of polyhedral gauges).
    pub fn gradient_h(&self, z: Vec2) -> Vec2 {
        let phi = self.gauge.value(z);
        if phi == 0.0 {
            return Vec2::ZERO;
        }
        self.gauge.gradient(z) * (self.p * phi.powf(self.p - 1.0))
    }

    /// An element of the convex subdifferential of `H` at `z`. At kinks the
    /// gradient of the mollified `φ_ε * H` with `ε = DEFAULT_KINK_EPS` is
    /// returned and the source records it.
    pub fn subgrad_h(&self, z: Vec2) -> Subgradient {
        self.subgrad_h_with(z, DEFAULT_KINK_EPS)
    }

    pub fn subgrad_h_with(&self, z: Vec2, kink_eps: f64) -> Subgradient {
        if z == Vec2::ZERO || !self.gauge.is_kink(z) {
            return Subgradient { vector: self.gradient_h(z), source: SubgradientSource::Exact };
        }
        let eps = kink_eps * z.norm();
        let v = regularize::bump_quadrature(8, 32)
            .iter()
            .fold(Vec2::ZERO, |acc, (y, w)| acc + self.gradient_h(z - *y * eps) * *w);
        Subgradient { vector: v, source: SubgradientSource::Mollified { eps } }
    }

    /// Hessian of `H` where it exists. At the origin it exists only for `p = 2`
    /// direction-independent gauges or `p > 2` (zero); `None` is returned
    /// there otherwise.
    pub fn hessian_h(&self, z: Vec2) -> Option<Sym2> {
        let p = self.p;
        if z == Vec2::ZERO {
            return if p > 2.0 { Some(Sym2::ZERO) } else { None };
        }
        let phi = self.gauge.value(z);
        let d = self.gauge.gradient(z);
        let d2 = self.gauge.hessian(z)?;
        Some(
            Sym2::outer(d)
                .scale(p * (p - 1.0) * phi.powf(p - 2.0))
                .add(&d2.scale(p * phi.powf(p - 1.0))),
        )
    }

    /// `H^{2/p} = Φ²`.
    pub fn eval_h2p(&self, z: Vec2) -> f64 {
        let phi = self.gauge.value(z);
        phi * phi
    }

    pub fn gradient_h2p(&self, z: Vec2) -> Vec2 {
        self.gauge.gradient(z) * (2.0 * self.gauge.value(z))
    }

    pub fn hessian_h2p(&self, z: Vec2) -> Option<Sym2> {
        let d = self.gauge.gradient(z);
        let d2 = self.gauge.hessian(z)?;
        Some(Sym2::outer(d).add(&d2.scale(self.gauge.value(z))).scale(2.0))
    }

    /// `H_θ(z) = (θ + H^{2/p}(z))^{p/2}`.
    pub fn eval_h_theta(&self, z: Vec2, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(Error::Domain(format!("θ = {theta} must be positive")));
        }
        Ok((theta + self.eval_h2p(z)).powf(0.5 * self.p))
    }

    /// `(1/C)|z|^p ≤ H(z) ≤ C|z|^p`, with `C` estimated by sampling the unit
    /// circle.
    pub fn coercivity_constant(&self) -> f64 {
        let (lo, hi) = self.gauge.unit_circle_range(4096);
        hi.powf(self.p).max(lo.powf(-self.p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linf2() -> Anisotropy {
        Anisotropy::from_body(&ConvexBody::square(), 2.0).unwrap()
    }

    fn shifted(p: f64) -> Anisotropy {
        Anisotropy::from_body(&ConvexBody::Disc { center: Vec2::new(0.5, 0.0), radius: 1.0 }, p)
            .unwrap()
    }

    #[test]
    fn eval_and_subgradient_examples() {
        let e = Anisotropy::euclidean(2.0).unwrap();
        assert_relative_eq!(e.eval_h(Vec2::new(3.0, 4.0)), 25.0, max_relative = 1e-14);
        let s = e.subgrad_h(Vec2::new(3.0, 4.0));
        assert_eq!(s.source, SubgradientSource::Exact);
        assert!((s.vector - Vec2::new(6.0, 8.0)).norm() < 1e-12);

        let c = linf2();
        assert_relative_eq!(c.eval_h(Vec2::new(2.0, 1.0)), 4.0);
        let s = c.subgrad_h(Vec2::new(2.0, 1.0));
        assert!((s.vector - Vec2::new(4.0, 0.0)).norm() < 1e-12);

        for a in [&e, &c] {
            assert_eq!(a.eval_h(Vec2::ZERO), 0.0);
            assert_eq!(a.subgrad_h(Vec2::ZERO).vector, Vec2::ZERO);
        }
    }

    #[test]
    fn kink_subgradient_is_recorded_and_averages_faces() {
        let c = linf2();
        let s = c.subgrad_h(Vec2::new(1.0, 1.0));
        assert!(matches!(s.source, SubgradientSource::Mollified { .. }));
        // ∂H(1,1) = 2 conv{(1,0),(0,1)}; the mollified gradient is (1,1) by symmetry.
        assert!((s.vector - Vec2::new(1.0, 1.0)).norm() < 1e-6, "{s:?}");
    }

    #[test]
    fn theta_rejects_nonpositive() {
        assert!(matches!(linf2().eval_h_theta(Vec2::new(1.0, 0.0), 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn p2_collapse_of_h_theta() {
        let c = linf2();
        let z = Vec2::new(0.3, -0.7);
        assert_relative_eq!(c.eval_h_theta(z, 0.25).unwrap(), 0.25 + c.eval_h(z), max_relative = 1e-14);
    }

    #[test]
    fn coercivity_bounds_hold() {
        for a in [linf2(), shifted(3.0), Anisotropy::from_body(&ConvexBody::EllR { r: 1.0 }, 1.5).unwrap()] {
            let c = a.coercivity_constant();
            for k in 0..50 {
                let z = Vec2::polar(0.13 * k as f64) * (0.1 + 0.2 * k as f64);
                let h = a.eval_h(z);
                let zp = z.norm().powf(a.p());
                assert!(h <= c * zp * (1.0 + 1e-9) && h >= zp / c * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"disc","center":[0.5,0.0],"radius":1.0,"p":2.0}"#;
        let spec: AnisotropySpec = serde_json::from_str(json).unwrap();
        let back: AnisotropySpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let poly: AnisotropySpec = serde_json::from_str(
            r#"{"kind":"polytope","vertices":[[1,-1],[1,1],[-1,1],[-1,-1]],"p":3}"#,
        )
        .unwrap();
        assert_relative_eq!(poly.build().unwrap().eval_h(Vec2::new(2.0, 1.0)), 8.0);
    }

    fn arb_aniso() -> impl Strategy<Value = Anisotropy> {
        prop_oneof![
            (1.2f64..4.0).prop_map(|p| linf2_p(p)),
            (1.2f64..4.0).prop_map(shifted),
            (1.0f64..6.0, 1.2f64..4.0)
                .prop_map(|(r, p)| Anisotropy::from_body(&ConvexBody::EllR { r }, p).unwrap()),
        ]
    }

    fn linf2_p(p: f64) -> Anisotropy {
        Anisotropy::from_body(&ConvexBody::square(), p).unwrap()
    }

    fn arb_vec() -> impl Strategy<Value = Vec2> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn homogeneity(a in arb_aniso(), z in arb_vec(), ti in 0usize..3) {
            prop_assume!(z.norm() > 1e-3);
            let t = [0.5, 2.0, 10.0][ti];
            let lhs = a.eval_h(z * t);
            let rhs = t.powf(a.p()) * a.eval_h(z);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            prop_assert!(a.eval_h(z) > 0.0);
        }

        #[test]
        fn subgradient_inequality(a in arb_aniso(), z in arb_vec(), w in arb_vec()) {
            let g = a.subgrad_h(z).vector;
            let lhs = a.eval_h(w);
            let rhs = a.eval_h(z) + g.dot(w - z);
            prop_assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn gauge_body_consistency(z in arb_vec(), k in 0usize..3) {
            let body = [
                ConvexBody::Disc { center: Vec2::new(0.5, 0.0), radius: 1.0 },
                ConvexBody::Polytope { vertices: vec![Vec2::new(1.0, -0.5), Vec2::new(0.2, 1.0), Vec2::new(-0.7, -0.3)] },
                ConvexBody::EllR { r: 3.0 },
            ][k].clone();
            let g = Gauge::from_body(&body).unwrap();
            let phi = g.value(z);
            prop_assume!((phi - 1.0).abs() > 1e-9);
            prop_assert_eq!(phi <= 1.0, body.contains(z));
        }

        #[test]
        fn polar_involution_on_even_bodies(z in arb_vec(), r in 1.1f64..8.0) {
            // The polar of ℓ_r is ℓ_{r'}; its polar must give back ℓ_r.
            prop_assume!(z.norm() > 1e-3);
            let g = Gauge::EllR { r };
            let rp = r / (r - 1.0);
            let polar = Gauge::EllR { r: rp };
            prop_assert!((polar.polar(z) - g.value(z)).abs() <= 1e-10 * g.value(z));
            // Numerical route: sup over the polar unit ball.
            prop_assert!((polar.polar_numeric(z) - g.value(z)).abs() <= 1e-8 * g.value(z));
        }
    }
}
