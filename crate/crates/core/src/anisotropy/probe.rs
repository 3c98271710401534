//! Finite-difference probes of ellipticity constants.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{bisect, golden_max};
use crate::vec2::{Sym2, Vec2};

use super::Anisotropy;

/// Hessian of `f` at `z` by central differences with step `h`. Falls back to
/// a least-squares quadratic fit on a 5×5 stencil when the estimates at `h`
/// and `2h` disagree (a kink inside the stencil). The flag reports the
/// fallback.
pub fn fd_hessian<F: Fn(Vec2) -> f64>(f: &F, z: Vec2, h: f64) -> (Sym2, bool) {
    let central = |h: f64| {
        let f0 = f(z);
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        let xx = (f(z + ex) - 2.0 * f0 + f(z - ex)) / (h * h);
        let yy = (f(z + ey) - 2.0 * f0 + f(z - ey)) / (h * h);
        let xy = (f(z + ex + ey) - f(z + ex - ey) - f(z - ex + ey) + f(z - ex - ey)) / (4.0 * h * h);
        Sym2::new(xx, xy, yy)
    };
    let a = central(h);
    let b = central(2.0 * h);
    let scale = a.xx.abs().max(a.yy.abs()).max(a.xy.abs()).max(1.0);
    let diff = (a.xx - b.xx).abs().max((a.yy - b.yy).abs()).max((a.xy - b.xy).abs());
    if diff <= 1e-3 * scale {
        return (a, false);
    }
    (quadratic_fit(f, z, h), true)
}

fn quadratic_fit<F: Fn(Vec2) -> f64>(f: &F, z: Vec2, h: f64) -> Sym2 {
    // f ≈ c0 + c1 x + c2 y + c3 x²/2 + c4 xy + c5 y²/2 on a 5×5 stencil.
    let mut ata = [[0.0f64; 6]; 6];
    let mut atb = [0.0f64; 6];
    for i in -2i32..=2 {
        for j in -2i32..=2 {
            let (x, y) = (i as f64, j as f64);
            let row = [1.0, x, y, 0.5 * x * x, x * y, 0.5 * y * y];
            let v = f(z + Vec2::new(x * h, y * h));
            for r in 0..6 {
                atb[r] += row[r] * v;
                for c in 0..6 {
                    ata[r][c] += row[r] * row[c];
                }
            }
        }
    }
    let c = solve6(ata, atb);
    Sym2::new(c[3] / (h * h), c[4] / (h * h), c[5] / (h * h))
}

fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> [f64; 6] {
    for k in 0..6 {
        let piv = (k..6).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..6 {
            let m = a[i][k] / a[k][k];
            for j in k..6 {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = [0.0; 6];
    for k in (0..6).rev() {
        let s: f64 = (k + 1..6).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Step for second differences at scale `r`: fourth root of machine precision.
fn hessian_step(r: f64) -> f64 {
    f64::EPSILON.powf(0.25) * r
}

/// `λ̂ = λ / sup_{G=1} ⟨DG(z), z⟩` for a smooth strongly convex `G` with
/// `G(0) = 0` and `D²G ≥ λ Id`. The level set is traced along 512 rays and the
/// best 8 are refined by golden-section search.
pub fn lemmaquad_lambda_hat<G: Fn(Vec2) -> f64 + Sync>(g: &G, lambda: f64) -> Result<f64> {
    let level = |theta: f64| -> Result<Vec2> {
        let e = Vec2::polar(theta);
        let mut hi = 1.0;
        let mut n = 0;
        while g(e * hi) < 1.0 {
            hi *= 2.0;
            n += 1;
            if n > 60 {
                return Err(Error::Numeric(format!("level set {{G=1}} not reached along ray θ = {theta}")));
            }
        }
        let r = bisect(|r| g(e * r) - 1.0, 0.0, hi, 1e-14 * hi)?;
        Ok(e * r)
    };
    let radial_slope = |theta: f64| -> f64 {
        match level(theta) {
            Ok(z) => {
                let h = f64::EPSILON.cbrt() * z.norm();
                let dg = Vec2::new(
                    (g(z + Vec2::new(h, 0.0)) - g(z - Vec2::new(h, 0.0))) / (2.0 * h),
                    (g(z + Vec2::new(0.0, h)) - g(z - Vec2::new(0.0, h))) / (2.0 * h),
                );
                dg.dot(z)
            }
            Err(_) => f64::NAN,
        }
    };
    let n = 512;
    let step = TAU / n as f64;
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * step;
        level(t)?;
        vals.push((i, radial_slope(t)));
    }
    vals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut sup = vals[0].1;
    for &(i, _) in vals.iter().take(8) {
        let t = i as f64 * step;
        let (_, v) = golden_max(radial_slope, t - step, t + step, 1e-10);
        sup = sup.max(v);
    }
    if !(sup > 0.0) {
        return Err(Error::Numeric("non-positive radial slope on level set".into()));
    }
    Ok(lambda / sup)
}

/// Estimated constants of `λ̂|v|² ≤ (D²H^{2/p}(z) v, v) ≤ Λ̂|v|²`.
#[derive(Debug, Clone, Serialize)]
pub struct HessianProbe {
    pub lambda: f64,
    pub big_lambda: f64,
    pub samples: usize,
    pub degenerate: bool,
    /// Samples where the quadratic-fit fallback was used.
    pub kink_fallbacks: usize,
}

/// Probes strong ellipticity of `H^{2/p}` on the unit circle (its Hessian is
/// 0-homogeneous). Eigen-decomposition of the 2×2 Hessian covers every `v`.
pub fn hessian_probe_hp2(a: &Anisotropy, samples: usize, tol: f64) -> HessianProbe {
    let f = |z: Vec2| a.eval_h2p(z);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut fallbacks = 0;
    for i in 0..samples {
        let z = Vec2::polar(TAU * (i as f64 + 0.5) / samples as f64);
        let (h, fb) = fd_hessian(&f, z, hessian_step(1.0));
        fallbacks += fb as usize;
        let (l, u) = h.eigenvalues();
        lo = lo.min(l);
        hi = hi.max(u);
    }
    HessianProbe { lambda: lo, big_lambda: hi, samples, degenerate: lo <= tol, kink_fallbacks: fallbacks }
}

/// Per-θ fitted constants of the weighted bound
/// `λ̃ w |v|² ≤ (D²H_θ v, v) ≤ Λ̃ w |v|²`, `w = (θ + H^{2/p})^{(p−2)/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct HThetaProbe {
    pub thetas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub big_lambdas: Vec<f64>,
    /// `(max − min) / max` of the fitted lower constant across θ.
    pub lambda_variation: f64,
    pub big_lambda_variation: f64,
    pub certified: bool,
}

/// Sweeps `θ` and fits the weighted ellipticity constants of `H_θ` over
/// `z` on circles of log-spaced radii (plus the origin).
pub fn hessian_probe_h_theta(
    a: &Anisotropy,
    thetas: &[f64],
    angles: usize,
    max_variation: f64,
) -> Result<HThetaProbe> {
    if thetas.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("θ must be positive".into()));
    }
    let p = a.p();
    let mut radii = vec![0.0];
    radii.extend((0..29).map(|k| 10f64.powf(-4.0 + 0.25 * k as f64)));
    let mut lambdas = Vec::new();
    let mut bigs = Vec::new();
    for &theta in thetas {
        let f = |z: Vec2| (theta + a.eval_h2p(z)).powf(0.5 * p);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &radii {
            let n = if r == 0.0 { 1 } else { angles };
            for i in 0..n {
                let z = Vec2::polar(TAU * (i as f64 + 0.5) / angles as f64) * r;
                let scale = r.max(theta.sqrt());
                let (h, _) = fd_hessian(&f, z, hessian_step(scale));
                let w = (theta + a.eval_h2p(z)).powf(0.5 * (p - 2.0));
                let (l, u) = h.eigenvalues();
                lo = lo.min(l / w);
                hi = hi.max(u / w);
            }
        }
        lambdas.push(lo);
        bigs.push(hi);
    }
    let variation = |v: &[f64]| {
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mn = v.iter().copied().fold(f64::INFINITY, f64::min);
        (mx - mn) / mx.abs()
    };
    let lv = variation(&lambdas);
    let bv = variation(&bigs);
    let positive = lambdas.iter().all(|l| *l > 0.0);
    Ok(HThetaProbe {
        thetas: thetas.to_vec(),
        lambdas,
        big_lambdas: bigs,
        lambda_variation: lv,
        big_lambda_variation: bv,
        certified: positive && lv < max_variation && bv < max_variation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::{mollify_regularize, ConvexBody, MollifyOptions};
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_hat_closed_forms() {
        let half = |z: Vec2| 0.5 * z.norm_sq();
        assert_abs_diff_eq!(lemmaquad_lambda_hat(&half, 1.0).unwrap(), 0.5, epsilon = 1e-8);
        let full = |z: Vec2| z.norm_sq();
        assert_abs_diff_eq!(lemmaquad_lambda_hat(&full, 2.0).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lambda_hat_tilted_matches_sampling_oracle() {
        // G = |z|²/2 + (z·t)²/2 with t = (1, 0.5): D²G = I + t tᵀ ≥ I.
        let t = Vec2::new(1.0, 0.5);
        let g = |z: Vec2| 0.5 * z.norm_sq() + 0.5 * z.dot(t).powi(2);
        let got = lemmaquad_lambda_hat(&g, 1.0).unwrap();
        // Quadratic G: ⟨DG(z), z⟩ = 2 G(z) = 2 on the level set, so λ̂ = 1/2.
        assert!(got > 0.0);
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-7);
        // Non-quadratic tilt: dense brute-force oracle over the level set.
        let g4 = |z: Vec2| 0.5 * z.norm_sq() + 0.1 * z.x.powi(4);
        let got = lemmaquad_lambda_hat(&g4, 1.0).unwrap();
        let mut sup: f64 = 0.0;
        for k in 0..20000 {
            let e = Vec2::polar(TAU * k as f64 / 20000.0);
            let r = bisect(|r| g4(e * r) - 1.0, 0.0, 10.0, 1e-14).unwrap();
            let z = e * r;
            let dg = Vec2::new(z.x + 0.4 * z.x.powi(3), z.y);
            sup = sup.max(dg.dot(z));
        }
        assert_abs_diff_eq!(got, 1.0 / sup, epsilon = 1e-8);
    }

    #[test]
    fn lambda_hat_reports_untraceable_level_set() {
        let flat = |_z: Vec2| 0.0;
        assert!(matches!(lemmaquad_lambda_hat(&flat, 1.0), Err(Error::Numeric(_))));
    }

    #[test]
    fn hp2_probe_examples() {
        let e = Anisotropy::euclidean(2.0).unwrap();
        let r = hessian_probe_hp2(&e, 64, 1e-6);
        assert_abs_diff_eq!(r.lambda, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.big_lambda, 2.0, epsilon = 1e-6);

        // H = |z|_4^4: at e_1 the tangential second derivative of |z|_4² vanishes.
        let l4 = Anisotropy::from_body(&ConvexBody::EllR { r: 4.0 }, 4.0).unwrap();
        let f = |z: Vec2| l4.eval_h2p(z);
        let (h, _) = fd_hessian(&f, Vec2::new(1.0, 0.0), 1.2e-4);
        assert_abs_diff_eq!(h.yy, 0.0, epsilon = 1e-6);
        let r = hessian_probe_hp2(&l4, 256, 1e-3);
        assert!(r.degenerate && r.lambda < 1e-3, "{r:?}");

        let c = Anisotropy::from_body(&ConvexBody::square(), 2.0).unwrap();
        let reg = mollify_regularize(&c, 1e-2, &MollifyOptions::default()).unwrap();
        let r = hessian_probe_hp2(reg.smoothed(), 512, 1e-8);
        assert!(!r.degenerate && r.lambda > 0.0, "{r:?}");
    }

    #[test]
    fn h_theta_examples() {
        // Φ = |·|, p = 4, θ = 1: H_θ = (1 + |z|²)², D²H_θ(0) = 4 Id.
        let e4 = Anisotropy::euclidean(4.0).unwrap();
        let f = |z: Vec2| e4.eval_h_theta(z, 1.0).unwrap();
        assert_abs_diff_eq!(f(Vec2::ZERO), 1.0);
        let (h, _) = fd_hessian(&f, Vec2::ZERO, 1.2e-4);
        assert_abs_diff_eq!(h.xx, 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.yy, 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.xy, 0.0, epsilon = 1e-6);

        let thetas: Vec<f64> = (0..7).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect();
        let r = hessian_probe_h_theta(&e4, &thetas, 16, 0.1).unwrap();
        assert!(r.certified, "{r:?}");
        // Exact constants for the Euclidean case: p and p(p − 1).
        for (l, u) in r.lambdas.iter().zip(&r.big_lambdas) {
            assert!((l - 4.0).abs() < 1e-3 && *u <= 12.0 + 1e-3 && *u > 11.0);
        }
        assert!(hessian_probe_h_theta(&e4, &[0.0], 4, 0.1).is_err());
    }

    #[test]
    fn h_theta_p2_is_theta_free() {
        let c = Anisotropy::from_body(&ConvexBody::square(), 2.0).unwrap();
        let reg = mollify_regularize(&c, 1e-2, &MollifyOptions::default()).unwrap();
        let r = hessian_probe_h_theta(reg.smoothed(), &[1e-3, 1e-2, 1e-1, 1.0], 64, 0.1).unwrap();
        assert!(r.certified, "{r:?}");
    }
}
