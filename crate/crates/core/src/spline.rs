//! Cubic interpolating splines on non-uniform knots: periodic (angular
//! profiles) and natural (tabulated data on an interval).

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// C² periodic cubic spline with period `2π`, used for angular profiles of
/// 1-homogeneous gauges.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// `knots` must be strictly increasing in `[0, 2π)`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 3 || values.len() != n {
            return Err(Error::Numeric("periodic spline needs at least 3 knots".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots[0] < 0.0 || knots[n - 1] >= TAU {
            return Err(Error::Numeric("spline knots must increase within [0, 2pi)".into()));
        }
        let h = |i: usize| -> f64 {
            if i + 1 < n {
                knots[i + 1] - knots[i]
            } else {
                knots[0] + TAU - knots[n - 1]
            }
        };
        // Cyclic tridiagonal system: a_i M_{i-1} + b_i M_i + c_i M_{i+1} = r_i.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            let hp = h((i + n - 1) % n);
            let hi = h(i);
            a[i] = hp;
            b[i] = 2.0 * (hp + hi);
            c[i] = hi;
            let yn = values[(i + 1) % n];
            let yp = values[(i + n - 1) % n];
            r[i] = 6.0 * ((yn - values[i]) / hi - (values[i] - yp) / hp);
        }
        let second = solve_cyclic(&a, &b, &c, &r);
        Ok(PeriodicSpline { knots, values, second })
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value and first two derivatives at angle `theta`.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        let n = self.knots.len();
        let mut x = theta.rem_euclid(TAU);
        // Interval containing x, wrapping past the last knot.
        let i = match self.knots.partition_point(|&k| k <= x) {
            0 => {
                x += TAU;
                n - 1
            }
            k => k - 1,
        };
        let (x0, x1) = if i + 1 < n {
            (self.knots[i], self.knots[i + 1])
        } else {
            (self.knots[n - 1], self.knots[0] + TAU)
        };
        let j = (i + 1) % n;
        let h = x1 - x0;
        let (y0, y1) = (self.values[i], self.values[j]);
        let (m0, m1) = (self.second[i], self.second[j]);
        let a = x1 - x;
        let b = x - x0;
        let val = m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b;
        let d1 = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - (y0 / h - m0 * h / 6.0)
            + (y1 / h - m1 * h / 6.0);
        let d2 = (m0 * a + m1 * b) / h;
        (val, d1, d2)
    }
}

/// Natural cubic spline on `[x_0, x_n]`, extended by its end values outside.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
    /// `∫_{x_0}^{x_i}` of the spline.
    cumulative: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::Configuration("table needs at least 2 points of equal length".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Configuration("table abscissae must be finite and increasing".into()));
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut a = vec![0.0; m];
            let mut b = vec![0.0; m];
            let mut c = vec![0.0; m];
            let mut r = vec![0.0; m];
            for k in 0..m {
                let i = k + 1;
                let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                a[k] = h0;
                b[k] = 2.0 * (h0 + h1);
                c[k] = h1;
                r[k] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            let inner = solve_tridiagonal(&a, &b, &c, &r);
            second[1..n - 1].copy_from_slice(&inner);
        }
        let mut cumulative = vec![0.0; n];
        for i in 1..n {
            let h = xs[i] - xs[i - 1];
            cumulative[i] = cumulative[i - 1] + 0.5 * h * (ys[i - 1] + ys[i])
                - h * h * h * (second[i - 1] + second[i]) / 24.0;
        }
        Ok(NaturalSpline { xs, ys, second, cumulative })
    }

    fn segment(&self, x: f64) -> usize {
        self.xs.partition_point(|&k| k <= x).clamp(1, self.xs.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let (a, b) = ((self.xs[i + 1] - x) / h, (x - self.xs[i]) / h);
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    /// `∫_{x_0}^{x}` of the extended spline (negative for `x < x_0`).
    pub fn integral_from_start(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (x - self.xs[0]) * self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.cumulative[n - 1] + (x - self.xs[n - 1]) * self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let b = (x - self.xs[i]) / h;
        let a = 1.0 - b;
        // ∫ of the segment from x_i to x in terms of the local coordinate.
        let lin = h * (self.ys[i] * (1.0 - a * a) / 2.0 + self.ys[i + 1] * b * b / 2.0);
        let cub = h * h * h / 6.0
            * (self.second[i] * (-(a * a * a * a) / 4.0 + a * a / 2.0 - 0.25)
                + self.second[i + 1] * (b * b * b * b / 4.0 - b * b / 2.0));
        self.cumulative[i] + lin + cub
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
}

/// Solves a cyclic tridiagonal system via Sherman-Morrison.
fn solve_cyclic(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(a, &bb, c, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = r[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (r[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
