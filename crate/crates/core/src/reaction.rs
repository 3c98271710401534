//! Reaction terms `f`, their primitives `F`, the threshold `M_f`, the
//! transform `φ(t) = ∫_1^t F^{−1/p}` with its inverse `ψ`, and validators for
//! the structural hypotheses on `f`.
//!
//! `f` is represented on `[0, ∞)` and extended evenly to negative arguments,
//! so `F` is odd.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, integrate_geometric};
use crate::spline::NaturalSpline;

/// Upper end of the geometric scans for `M_f` and `lim f(t)/t^{p−1}`.
pub const HORIZON: f64 = 1e6;
const SCAN_START: f64 = 1e-10;
const SCAN_PER_DECADE: usize = 200;
const QUAD_TOL: f64 = 1e-12;

/// Serialized reaction description; `p` comes from the anisotropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReactionSpec {
    /// `f(t) = c`.
    Constant { c: f64 },
    /// `f(t) = c t^{q−1}`.
    Power { c: f64, q: f64 },
    /// `f(t) = λ t^{p−1}`; `λ` defaults to 1 and is replaced by the computed
    /// eigenvalue in eigen runs.
    Eigen {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    /// `f(t) = c (1 − t)`.
    AffineCutoff { c: f64 },
    /// Natural cubic interpolation of samples, constant beyond the table.
    Table { ts: Vec<f64>, fs: Vec<f64> },
}

impl ReactionSpec {
    pub fn build(&self, p: f64) -> Result<Reaction> {
        let family = match self {
            ReactionSpec::Constant { c } => {
                positive("constant reaction c", *c)?;
                Family::Power { c: *c, q: 1.0 }
            }
            ReactionSpec::Power { c, q } => {
                positive("power reaction c", *c)?;
                if !(*q >= 1.0) || !q.is_finite() {
                    return Err(Error::Configuration(format!("power reaction needs q ≥ 1, got {q}")));
                }
                Family::Power { c: *c, q: *q }
            }
            ReactionSpec::Eigen { lambda } => {
                let l = lambda.unwrap_or(1.0);
                positive("eigen reaction λ", l)?;
                Family::Eigen { lambda: l }
            }
            ReactionSpec::AffineCutoff { c } => {
                positive("affine cutoff c", *c)?;
                Family::AffineCutoff { c: *c }
            }
            ReactionSpec::Table { ts, fs } => {
                if ts.first().is_some_and(|&t| t < 0.0) {
                    return Err(Error::Configuration("table abscissae must be nonnegative".into()));
                }
                Family::Table(Arc::new(NaturalSpline::new(ts.clone(), fs.clone())?))
            }
        };
        Reaction::with_family(family, p)
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Configuration(format!("{what} must be positive and finite, got {v}")))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Family {
    Power { c: f64, q: f64 },
    Eigen { lambda: f64 },
    AffineCutoff { c: f64 },
    Table(Arc<NaturalSpline>),
    Custom(ScalarFn),
}

/// A reaction `f` with exponent `p`, primitive `F` and threshold `M_f`.
#[derive(Clone)]
pub struct Reaction {
    family: Family,
    p: f64,
    m_f: f64,
}

impl fmt::Debug for Reaction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.family {
            Family::Power { c, q } => format!("power(c={c}, q={q})"),
            Family::Eigen { lambda } => format!("eigen(λ={lambda})"),
            Family::AffineCutoff { c } => format!("affine_cutoff(c={c})"),
            Family::Table(t) => format!("table({} points)", t.xs().len()),
            Family::Custom(_) => "custom".into(),
        };
        fm.debug_struct("Reaction").field("f", &kind).field("p", &self.p).field("m_f", &self.m_f).finish()
    }
}

impl Reaction {
    fn with_family(family: Family, p: f64) -> Result<Reaction> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Configuration(format!("exponent p must exceed 1, got {p}")));
        }
        let mut r = Reaction { family, p, m_f: f64::INFINITY };
        r.m_f = match &r.family {
            Family::Power { .. } | Family::Eigen { .. } => f64::INFINITY,
            Family::AffineCutoff { .. } => 1.0,
            Family::Table(_) | Family::Custom(_) => {
                let rr = r.clone();
                compute_mf(|t| rr.f(t), HORIZON)?
            }
        };
        Ok(r)
    }

    /// A reaction given by an arbitrary continuous `f` on `[0, ∞)`; `F` is
    /// computed by adaptive quadrature.
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, p: f64) -> Result<Reaction> {
        Reaction::with_family(Family::Custom(Arc::new(f)), p)
    }

    pub fn eigen(lambda: f64, p: f64) -> Result<Reaction> {
        ReactionSpec::Eigen { lambda: Some(lambda) }.build(p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `M_f = inf{t > 0 : f(t) ≤ 0}`, possibly `+∞`.
    pub fn m_f(&self) -> f64 {
        self.m_f
    }

    pub fn is_eigen(&self) -> bool {
        matches!(self.family, Family::Eigen { .. })
    }

    pub fn eigen_lambda(&self) -> Option<f64> {
        match self.family {
            Family::Eigen { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// For `F = C t^q` returns `(C, q)`.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Power { c, q } => Some((c / q, q)),
            Family::Eigen { lambda } => Some((lambda / self.p, self.p)),
            _ => None,
        }
    }

    /// Exponent `γ` such that `φ(u)` is an affine function of `u^γ` for
    /// power reactions (`γ = 0` meaning `log u`).
    pub fn power_concavity_exponent(&self) -> Option<f64> {
        self.power_law().map(|(_, q)| (self.p - q) / self.p)
    }

    pub fn f(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.family {
            Family::Power { c, q } => {
                if *q == 1.0 {
                    *c
                } else {
                    c * t.powf(q - 1.0)
                }
            }
            Family::Eigen { lambda } => lambda * t.powf(self.p - 1.0),
            Family::AffineCutoff { c } => c * (1.0 - t),
            Family::Table(s) => s.eval(t),
            Family::Custom(f) => f(t),
        }
    }

    /// `f_+ = max{f, 0}`.
    pub fn f_plus(&self, t: f64) -> f64 {
        self.f(t).max(0.0)
    }

    /// Derivative `f'(t)` for `t > 0` (finite differences for tables and
    /// custom reactions).
    pub fn f_prime(&self, t: f64) -> f64 {
        match &self.family {
            Family::Power { c, q } => c * (q - 1.0) * t.powf(q - 2.0),
            Family::Eigen { lambda } => lambda * (self.p - 1.0) * t.powf(self.p - 2.0),
            Family::AffineCutoff { c } => -c,
            _ => {
                let h = crate::numerics::fd_step(t).min(0.5 * t);
                (self.f(t + h) - self.f(t - h)) / (2.0 * h)
            }
        }
    }

    /// `F(t) = ∫_0^t f`.
    pub fn primitive(&self, t: f64) -> f64 {
        if t < 0.0 {
            return -self.primitive(-t);
        }
        match &self.family {
            Family::Power { c, q } => c / q * t.powf(*q),
            Family::Eigen { lambda } => lambda / self.p * t.powf(self.p),
            Family::AffineCutoff { c } => c * (t - 0.5 * t * t),
            Family::Table(s) => s.integral_from_start(t) - s.integral_from_start(0.0),
            Family::Custom(f) => {
                if t == 0.0 {
                    return 0.0;
                }
                let g = |s: f64| f(s);
                let rough = t * (g(0.0).abs() + g(0.5 * t).abs() + g(t).abs()) / 3.0;
                let a = 1e-15 * t;
                a * g(a) + integrate_geometric(&g, a, t, 1e-3 * QUAD_TOL * rough.max(f64::MIN_POSITIVE))
            }
        }
    }

    /// `F_+ = max{F, 0}`.
    pub fn primitive_plus(&self, t: f64) -> f64 {
        self.primitive(t).max(0.0)
    }
}

/// `inf{t > 0 : f(t) ≤ 0}` by a geometric scan up to `horizon` followed by
/// bisection; `+∞` when `f` stays positive.
pub fn compute_mf(f: impl Fn(f64) -> f64, horizon: f64) -> Result<f64> {
    if !(f(SCAN_START) > 0.0) {
        return Err(Error::Configuration(format!(
            "reaction must be positive near 0, f({SCAN_START}) = {}",
            f(SCAN_START)
        )));
    }
    let steps = ((horizon / SCAN_START).log10() * SCAN_PER_DECADE as f64).ceil() as usize;
    let ratio = (horizon / SCAN_START).powf(1.0 / steps as f64);
    let mut prev = SCAN_START;
    for k in 1..=steps {
        let t = SCAN_START * ratio.powi(k as i32);
        if f(t) <= 0.0 {
            return first_crossing(&f, prev, t);
        }
        prev = t;
    }
    Ok(f64::INFINITY)
}

/// Leftmost point of `{f ≤ 0}` in `(lo, hi]` given `f(lo) > 0 ≥ f(hi)`.
fn first_crossing(f: &impl Fn(f64) -> f64, lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..8 {
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-15 * b {
            let m = 0.5 * (a + b);
            if f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        // Any nonpositive sample left of the crossing means the bisection
        // found a later zero.
        let n = 1024;
        match (1..n).map(|i| lo + (b - lo) * i as f64 / n as f64).find(|&t| f(t) <= 0.0) {
            Some(t) if t < b * (1.0 - 1e-12) => hi = t,
            _ => {
                // f must stay nonpositive just past the crossing.
                if (3..=12).any(|k| f(b * (1.0 + 10f64.powi(-k))) > 0.0) {
                    break;
                }
                return Ok(b);
            }
        }
    }
    Err(Error::AmbiguousThreshold(format!(
        "sign of f oscillates below resolution near t = {hi}"
    )))
}

/// `φ` and `ψ = φ^{−1}` for a reaction.
#[derive(Debug, Clone)]
pub struct PhiTransform {
    reaction: Reaction,
}

impl PhiTransform {
    pub fn new(reaction: Reaction) -> Self {
        PhiTransform { reaction }
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    fn p(&self) -> f64 {
        self.reaction.p
    }

    /// `φ(t) = ∫_1^t F(s)^{−1/p} ds` on `(0, M_f]`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        let m = self.reaction.m_f;
        if !(t > 0.0) || t > m * (1.0 + 1e-14) || !t.is_finite() {
            return Err(Error::Domain(format!("φ is defined on (0, {m}], got t = {t}")));
        }
        let t = t.min(m);
        let p = self.p();
        if let Some((c, q)) = self.reaction.power_law() {
            let k = c.powf(-1.0 / p);
            return Ok(if q == p { k * t.ln() } else { k * p / (p - q) * (t.powf((p - q) / p) - 1.0) });
        }
        Ok(self.phi_panels(t))
    }

    /// Composite Gauss-Legendre on panels halving toward 0. `F` is
    /// accumulated along the sorted nodes, so each `f` value is used once.
    fn phi_panels(&self, t: f64) -> f64 {
        if t == 1.0 {
            return 0.0;
        }
        let p = self.p();
        let (lo, hi) = (t.min(1.0), t.max(1.0));
        let mut edges = vec![lo];
        while *edges.last().unwrap() > 1e-17 * lo {
            let e = 0.5 * edges.last().unwrap();
            edges.push(e);
        }
        edges.reverse();
        let mut e = lo;
        while e < hi {
            e = (2.0 * e).min(hi);
            edges.push(e);
        }
        let (x24, w24) = gauss_legendre(24);
        let (x8, w8) = gauss_legendre(8);
        let f = |s: f64| self.reaction.f(s);
        let integrate = |a: f64, b: f64| -> f64 {
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            h * x8.iter().zip(&w8).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
        };
        // F(e_0) ≈ e_0 f(e_0) for the tiny first edge.
        let mut big_f = edges[0] * f(edges[0]);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            let mut prev = a;
            let mut acc = 0.0;
            for (x, wt) in x24.iter().zip(&w24) {
                let s = c + h * x;
                big_f += integrate(prev, s);
                prev = s;
                acc += wt * big_f.powf(-1.0 / p);
            }
            big_f += integrate(prev, b);
            if a >= lo {
                total += h * acc;
            }
        }
        if t < 1.0 {
            -total
        } else {
            total
        }
    }

    /// `φ'(t) = F(t)^{−1/p}`.
    pub fn phi_prime(&self, t: f64) -> f64 {
        self.reaction.primitive(t).powf(-1.0 / self.p())
    }

    /// `ψ(s)`, the `t` with `φ(t) = s`.
    pub fn psi(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("ψ argument must be finite, got {s}")));
        }
        let p = self.p();
        if let Some((c, q)) = self.reaction.power_law() {
            let k = c.powf(1.0 / p);
            if q == p {
                return Ok((k * s).exp());
            }
            let base = 1.0 + s * k * (p - q) / p;
            if !(base > 0.0) {
                return Err(Error::Domain(format!("s = {s} outside the range of φ")));
            }
            return Ok(base.powf(p / (p - q)));
        }
        let m = self.reaction.m_f;
        // Bracket [lo, hi] with φ(lo) ≤ s ≤ φ(hi).
        let (mut lo, mut hi) = (1.0, 1.0);
        if s < 0.0 {
            while self.phi(lo)? > s {
                lo *= 0.5;
                if lo < 1e-200 {
                    return Err(Error::Domain(format!("s = {s} below the range of φ")));
                }
            }
        } else {
            if s > self.phi(m.min(1e15))? {
                return Err(Error::Domain(format!("s = {s} above the range of φ")));
            }
            while self.phi(hi)? < s {
                hi = (2.0 * hi).min(m).min(1e15);
            }
        }
        if s < 0.0 {
            hi = (2.0 * lo).min(1.0);
        } else {
            lo = (0.5 * hi).max(1.0).min(hi);
        }
        // Safeguarded Newton with φ' = F^{−1/p}.
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.phi(t)? - s;
            if r.abs() <= 1e-13 * (1.0 + s.abs()) {
                return Ok(t);
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = t - r / self.phi_prime(t);
            t = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// `ψ'(s) = F(ψ(s))^{1/p}`.
    pub fn psi_prime(&self, s: f64) -> Result<f64> {
        let t = self.psi(s)?;
        Ok(self.reaction.primitive(t).powf(1.0 / self.p()))
    }

    /// `ψ''(s) = (1/p) F^{2/p−1}(ψ) f(ψ)`.
    pub fn psi_second(&self, s: f64) -> Result<f64> {
        let t = self.psi(s)?;
        let p = self.p();
        Ok(self.reaction.primitive(t).powf(2.0 / p - 1.0) * self.reaction.f(t) / p)
    }

    /// `ψ''/ψ' = (F^{1/p})'(ψ) = f(ψ) / (p F(ψ)^{1−1/p})`.
    pub fn psi_ratio(&self, s: f64) -> Result<f64> {
        let t = self.psi(s)?;
        Ok(self.root_slope(t))
    }

    /// `(F^{1/p})'(t) = f(t) / (p F(t)^{1−1/p})`.
    pub fn root_slope(&self, t: f64) -> f64 {
        let p = self.p();
        if let Some((c, q)) = self.reaction.power_law() {
            // Closed form avoids cancellation at small t.
            return q / p * c.powf(1.0 / p) * t.powf(q / p - 1.0);
        }
        self.reaction.f(t) / (p * self.reaction.primitive(t).powf(1.0 - 1.0 / p))
    }

    /// Numerical range `(φ(t_min), φ(t_max))` with `t_min = 1e−12` and
    /// `t_max = min(M_f, 1e15)`.
    pub fn range(&self) -> Result<(f64, f64)> {
        let m = self.reaction.m_f;
        Ok((self.phi(1e-12_f64.min(0.5 * m))?, self.phi(m.min(1e15))?))
    }
}

/// Outcome of one discrete convexity-type test.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub passed: bool,
    /// Largest signed defect found (positive means violated).
    pub worst_defect: f64,
    /// Points `(a, m, b)` of the worst test.
    pub worst_triple: Option<[f64; 3]>,
    pub tests: usize,
}

impl ConditionCheck {
    pub(crate) fn new() -> Self {
        ConditionCheck { passed: true, worst_defect: f64::NEG_INFINITY, worst_triple: None, tests: 0 }
    }

    pub(crate) fn record(&mut self, defect: f64, triple: [f64; 3], threshold: f64) {
        self.tests += 1;
        let defect = if defect.is_nan() { f64::INFINITY } else { defect };
        if defect > self.worst_defect {
            self.worst_defect = defect;
            self.worst_triple = Some(triple);
        }
        if defect > threshold {
            self.passed = false;
        }
    }
}

/// Pass/fail of the structural conditions on `f` over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    /// `F^{1/p}` concave.
    pub root_concave: ConditionCheck,
    /// `F/f` convex.
    pub ratio_convex: ConditionCheck,
    /// `f(t)/t^{p−1}` non-increasing.
    pub normalized_nonincreasing: ConditionCheck,
    /// `t ↦ F(t^{1/p})` strictly concave.
    pub strict_concavity: ConditionCheck,
    /// `t ↦ e^{(p−1)t}/f(e^t)` convex.
    pub exp_convex: ConditionCheck,
}

impl HypothesisReport {
    /// Both halves of the main structural condition: `F^{1/p}` concave and
    /// `F/f` convex.
    pub fn main_condition(&self) -> bool {
        self.root_concave.passed && self.ratio_convex.passed
    }
}

/// Relative tolerance for non-strict midpoint tests.
pub const HYPOTHESIS_TOL: f64 = 1e-9;
/// Strictness margin for the concavity of `F(t^{1/p})`.
pub const STRICT_MARGIN: f64 = 1e-10;

/// Default test grid inside `(0, M_f)`.
pub fn default_grid(reaction: &Reaction, n: usize) -> Vec<f64> {
    let m = reaction.m_f();
    if m.is_finite() {
        (1..=n).map(|i| m * i as f64 / (n + 1) as f64).collect()
    } else {
        (0..n).map(|i| 1e-3 * 1e6_f64.powf(i as f64 / (n - 1).max(1) as f64)).collect()
    }
}

/// Discrete midpoint tests of the structural conditions on consecutive grid
/// pairs.
pub fn check_hypotheses(reaction: &Reaction, grid: &[f64]) -> HypothesisReport {
    let p = reaction.p();
    let big_f = |t: f64| reaction.primitive(t);
    let mut root_concave = ConditionCheck::new();
    let mut ratio_convex = ConditionCheck::new();
    let mut normalized = ConditionCheck::new();
    let mut strict = ConditionCheck::new();
    let mut exp_convex = ConditionCheck::new();
    let mut pts: Vec<f64> = grid.iter().copied().filter(|t| *t > 0.0 && *t < reaction.m_f()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        let tri = [a, m, b];

        let g = |t: f64| big_f(t).powf(1.0 / p);
        let (ga, gm, gb) = (g(a), g(m), g(b));
        let scale = ga.abs().max(gm.abs()).max(gb.abs());
        root_concave.record(0.5 * (ga + gb) - gm, tri, HYPOTHESIS_TOL * scale);

        let g = |t: f64| big_f(t) / reaction.f(t);
        let (ga, gm, gb) = (g(a), g(m), g(b));
        let scale = ga.abs().max(gm.abs()).max(gb.abs());
        ratio_convex.record(gm - 0.5 * (ga + gb), tri, HYPOTHESIS_TOL * scale);

        let g = |t: f64| reaction.f(t) / t.powf(p - 1.0);
        let (ga, gb) = (g(a), g(b));
        normalized.record(gb - ga, tri, HYPOTHESIS_TOL * ga.abs().max(gb.abs()));

        let g = |t: f64| big_f(t.powf(1.0 / p));
        let (ga, gm, gb) = (g(a), g(m), g(b));
        let scale = ga.abs().max(gm.abs()).max(gb.abs());
        strict.record(0.5 * (ga + gb) - gm, tri, -STRICT_MARGIN * scale);

        let (la, lb) = (a.ln(), b.ln());
        let lm = 0.5 * (la + lb);
        let g = |u: f64| ((p - 1.0) * u).exp() / reaction.f(u.exp());
        let (ga, gm, gb) = (g(la), g(lm), g(lb));
        let scale = ga.abs().max(gm.abs()).max(gb.abs());
        exp_convex.record(gm - 0.5 * (ga + gb), [la, lm, lb], HYPOTHESIS_TOL * scale);
    }
    HypothesisReport {
        root_concave,
        ratio_convex,
        normalized_nonincreasing: normalized,
        strict_concavity: strict,
        exp_convex,
    }
}

/// Monotonicity of `ψ''/ψ'` and convexity of `ψ'/ψ''` on a grid of `s`.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub ratio_nonincreasing: ConditionCheck,
    pub inverse_ratio_convex: ConditionCheck,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.ratio_nonincreasing.passed && self.inverse_ratio_convex.passed
    }
}

/// Checks that `s ↦ ψ''/ψ'` is non-increasing and `s ↦ ψ'/ψ''` convex,
/// using the closed-form derivatives through the reaction.
pub fn check_lemmavarphi(transform: &PhiTransform, s_grid: &[f64]) -> Result<LemmaReport> {
    let r = transform.reaction();
    let hyp = check_hypotheses(r, &default_grid(r, 200));
    if !hyp.main_condition() {
        return Err(Error::Precondition(
            "F^{1/p} concave and F/f convex must hold before checking ψ".into(),
        ));
    }
    let mut s: Vec<f64> = s_grid.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let ratios: Vec<f64> = s.iter().map(|&x| transform.psi_ratio(x)).collect::<Result<_>>()?;
    let mut mono = ConditionCheck::new();
    for i in 1..s.len() {
        let scale = ratios[i].abs().max(ratios[i - 1].abs());
        let mid = if i + 1 < s.len() { s[i] } else { 0.5 * (s[i - 1] + s[i]) };
        mono.record(ratios[i] - ratios[i - 1], [s[i - 1], mid, s[i]], HYPOTHESIS_TOL * scale);
    }
    let mut convex = ConditionCheck::new();
    for i in 1..s.len().saturating_sub(1) {
        let (a, m, b) = (s[i - 1], s[i], s[i + 1]);
        let k = |j: usize| 1.0 / ratios[j];
        let lam = (b - m) / (b - a);
        let chord = lam * k(i - 1) + (1.0 - lam) * k(i + 1);
        let scale = k(i - 1).abs().max(k(i).abs()).max(k(i + 1).abs());
        convex.record(k(i) - chord, [a, m, b], HYPOTHESIS_TOL * scale);
    }
    Ok(LemmaReport { ratio_nonincreasing: mono, inverse_ratio_convex: convex })
}

/// Existence verdict from the limits `μ_0`, `μ_∞` of `f(t)/t^{p−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Existence {
    /// `μ_∞ < λ_1 < μ_0`: a nontrivial nonnegative critical point exists.
    Exists,
    /// `μ_0 = μ_∞ = λ_1`: nontrivial solutions are first eigenfunctions.
    OnlyEigenfunctions,
    /// Only the trivial solution.
    NoNontrivial,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExistenceReport {
    pub mu_0: f64,
    pub mu_inf: f64,
    pub lambda_1: f64,
    pub verdict: Existence,
}

/// Estimates `μ_0 = lim_{t→0} f/t^{p−1}` and `μ_∞ = lim_{t→∞} f/t^{p−1}` and
/// compares them with `λ_1`.
pub fn brezis_oswald_check(reaction: &Reaction, lambda_1: f64) -> ExistenceReport {
    let p = reaction.p();
    let g = |t: f64| reaction.f(t) / t.powf(p - 1.0);
    let mu_0 = {
        let (near, far) = (g(SCAN_START), g(10.0 * SCAN_START));
        if near > 1e6 && near > far * (1.0 + 1e-3) {
            f64::INFINITY
        } else {
            near
        }
    };
    let mu_inf = {
        let (far, near) = (g(HORIZON), g(0.1 * HORIZON));
        if far.abs() < 1e-4 && far.abs() < near.abs() * (1.0 - 1e-3) {
            0.0
        } else {
            far
        }
    };
    let close = |a: f64| (a - lambda_1).abs() <= 1e-9 * lambda_1.abs();
    let verdict = if close(mu_0) && close(mu_inf) {
        Existence::OnlyEigenfunctions
    } else if mu_inf < lambda_1 && lambda_1 < mu_0 {
        Existence::Exists
    } else {
        Existence::NoNontrivial
    };
    ExistenceReport { mu_0, mu_inf, lambda_1, verdict }
}
