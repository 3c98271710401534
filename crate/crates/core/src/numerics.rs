//! Scalar numerical building blocks: quadrature, root bracketing, line search
//! maximisation.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a).abs() <= f64::EPSILON * m.abs() {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integral of `f` over `[a, b]` (with `0 < a < b`) where `f` may blow up
/// like an integrable power at the left end. The interval is split
/// geometrically toward `a` and each piece is integrated by adaptive Simpson.
pub fn integrate_geometric<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate_geometric(f, b, a, tol);
    }
    if a <= 0.0 || b / a < 4.0 {
        return adaptive_simpson(f, a, b, tol);
    }
    let mut total = 0.0;
    let mut hi = b;
    let pieces = ((b / a).log2().ceil() as usize).max(1);
    let piece_tol = tol / pieces as f64;
    while hi > a {
        let lo = (0.5 * hi).max(a);
        total += adaptive_simpson(f, lo, hi, piece_tol);
        hi = lo;
    }
    total
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Bisection for a sign change of `f` on `[a, b]`; returns the midpoint of
/// the final bracket once its width is below `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numeric(format!(
            "bisection bracket [{a}, {b}] has no sign change ({fa}, {fb})"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a local maximum of `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximum of `f` over the circle of directions: `samples` uniform angles
/// followed by golden-section refinement of the best `refine` candidates.
/// Returns `(theta, value)`.
pub fn max_over_angles<F: Fn(f64) -> f64>(f: &F, samples: usize, refine: usize) -> (f64, f64) {
    let step = std::f64::consts::TAU / samples as f64;
    let mut vals: Vec<(usize, f64)> = (0..samples).map(|i| (i, f(i as f64 * step))).collect();
    vals.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut best = (vals[0].0 as f64 * step, vals[0].1);
    for &(i, _) in vals.iter().take(refine) {
        let t = i as f64 * step;
        let (arg, val) = golden_max(f, t - step, t + step, 1e-12);
        if val > best.1 {
            best = (arg, val);
        }
    }
    best
}

/// Central-difference step for first derivatives at scale `x`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cosine() {
        let v = adaptive_simpson(&|t: f64| t.cos(), 0.0, 1.0, 1e-13);
        assert!((v - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn geometric_split_handles_integrable_singularity() {
        // int_{1e-8}^{1} t^{-1/2} dt = 2 (1 - 1e-4)
        let v = integrate_geometric(&|t: f64| t.powf(-0.5), 1e-8, 1.0, 1e-13);
        assert!((v - 2.0 * (1.0 - 1e-4)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bisection_and_golden() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|t| t * t + 1.0, 0.0, 2.0, 1e-14).is_err());
        let (arg, val) = golden_max(|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-10);
        assert!((arg - 0.3).abs() < 1e-8 && val.abs() < 1e-15);
    }
}

/// Illinois (modified regula falsi) root finder on a sign-changing bracket.
/// Converges superlinearly for smooth `f`; the bracket is always kept.
pub fn illinois<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numeric(format!(
            "root bracket [{a}, {b}] has no sign change ({fa}, {fb})"
        )));
    }
    let mut side = 0i8;
    let mut prev = f64::NAN;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        if (c - prev).abs() <= tol {
            return Ok(c);
        }
        prev = c;
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() <= tol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= tol {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}
