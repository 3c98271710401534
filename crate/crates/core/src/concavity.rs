//! The concavity function `c_v(x, y, t) = t v(x) + (1−t) v(y) − v(tx + (1−t)y)`,
//! sampled scans for its positive maximum, and numerical checks of the
//! structural hypotheses behind concavity of `φ(u)`.

use std::io::Write;

use nalgebra::{SMatrix, SVector};
use rand::{RngExt, SeedableRng};
use rand::rngs::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anisotropy::Anisotropy;
use crate::domain::{ConvexDomain, Mesh};
use crate::error::{Error, Result};
use crate::reaction::{check_lemmavarphi, ConditionCheck, LemmaReport, PhiTransform};
use crate::solver::{DiscreteField, EnergyProblem};
use crate::vec2::{Sym2, Vec2};

/// Something that can be evaluated pointwise; `None` outside its domain.
pub trait ScalarField: Sync {
    fn value(&self, x: Vec2) -> Option<f64>;
}

impl ScalarField for DiscreteField {
    fn value(&self, x: Vec2) -> Option<f64> {
        self.eval(x)
    }
}

impl<F: Fn(Vec2) -> f64 + Sync> ScalarField for F {
    fn value(&self, x: Vec2) -> Option<f64> {
        Some(self(x))
    }
}

/// A callable restricted to a domain.
pub struct Restricted<'a, F> {
    pub f: F,
    pub domain: &'a ConvexDomain,
}

impl<F: Fn(Vec2) -> f64 + Sync> ScalarField for Restricted<'_, F> {
    fn value(&self, x: Vec2) -> Option<f64> {
        // Allow points that sit on the boundary up to rounding.
        (self.domain.signed_distance(x) >= -1e-12).then(|| (self.f)(x))
    }
}

fn value_at(v: &(impl ScalarField + ?Sized), x: Vec2) -> Result<f64> {
    v.value(x).ok_or_else(|| Error::Domain(format!("point ({}, {}) is outside the field's domain", x.x, x.y)))
}

/// `t v(x) + (1−t) v(y) − v(tx + (1−t)y)`.
pub fn concavity_function(v: &(impl ScalarField + ?Sized), x: Vec2, y: Vec2, t: f64) -> Result<f64> {
    let vx = value_at(v, x)?;
    let vy = value_at(v, y)?;
    let vm = value_at(v, x * t + y * (1.0 - t))?;
    Ok(combine(vx, vy, vm, t))
}

#[inline]
fn combine(vx: f64, vy: f64, vm: f64, t: f64) -> f64 {
    t * vx + (1.0 - t) * vy - vm
}

/// How the pass threshold of a scan is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute { value: f64 },
    /// Multiple of the largest `|v|` seen by the scan.
    Relative { value: f64 },
    /// `c·h·Lip(v)`, with `Lip` from element gradients over the region.
    Interpolation { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanOptions {
    pub pairs: usize,
    pub t_steps: usize,
    pub refine: usize,
    pub seed: u64,
    pub tolerance: Tolerance,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { pairs: 20_000, t_steps: 17, refine: 16, seed: 0, tolerance: Tolerance::Relative { value: 1e-4 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub x: Vec2,
    pub y: Vec2,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub max_violation: f64,
    pub arg: Option<Triple>,
    pub pairs: usize,
    pub t_steps: usize,
    pub evaluations: usize,
    pub seed: u64,
    /// Largest `|v|` over the sampled points.
    pub field_scale: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Refined worst triples, largest first.
    pub worst: Vec<Triple>,
    pub boundary: Option<KorevaarReport>,
}

impl ConcavityReport {
    /// `rank,x1,x2,y1,y2,t,value` rows.
    pub fn write_worst_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rank,x1,x2,y1,y2,t,value")?;
        for (i, tr) in self.worst.iter().enumerate() {
            writeln!(w, "{i},{},{},{},{},{},{}", tr.x.x, tr.x.y, tr.y.x, tr.y.y, tr.t, tr.value)?;
        }
        Ok(())
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Point pairs in `region` from a randomly rotated 4-d Halton sequence.
pub fn sample_pairs(region: &ConvexDomain, n: usize, seed: u64) -> Vec<(Vec2, Vec2)> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let shift: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
    let (lo, hi) = region.bounding_box();
    let span = hi - lo;
    let coord = |i: u64, d: usize| {
        let base = [2, 3, 5, 7][d];
        (radical_inverse(i, base) + shift[d]).fract()
    };
    let mut out = Vec::with_capacity(n);
    let mut i = 1u64;
    let limit = 200 * n as u64 + 1000;
    while out.len() < n && i < limit {
        let x = lo + Vec2::new(span.x * coord(i, 0), span.y * coord(i, 1));
        let y = lo + Vec2::new(span.x * coord(i, 2), span.y * coord(i, 3));
        i += 1;
        if region.contains(x) && region.contains(y) {
            out.push((x, y));
        }
    }
    out
}

/// `c·h·Lip(v)` over the elements whose centroid lies in `region`.
pub fn interpolation_tolerance(v: &DiscreteField, region: &ConvexDomain, c: f64) -> f64 {
    let mesh = v.mesh();
    let lip = mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let g = (mesh.nodes()[t[0]] + mesh.nodes()[t[1]] + mesh.nodes()[t[2]]) / 3.0;
            region.contains(g)
        })
        .map(|(k, _)| mesh.gradient(v.values(), k).norm())
        .fold(0.0, f64::max);
    c * mesh.h() * lip
}

/// Scans `c_v` over quasi-random pairs in `region` and a uniform `t` grid,
/// then sharpens the worst triples by coordinate ascent.
pub fn max_concavity_violation(
    v: &(impl ScalarField + ?Sized),
    region: &ConvexDomain,
    opts: &ScanOptions,
) -> Result<ConcavityReport> {
    let tolerance_abs = match opts.tolerance {
        Tolerance::Interpolation { .. } => {
            return Err(Error::Configuration("interpolation tolerance needs a discrete field".into()))
        }
        _ => None,
    };
    scan(v, region, opts, tolerance_abs)
}

/// As [`max_concavity_violation`], with the interpolation tolerance available.
pub fn max_concavity_violation_field(
    v: &DiscreteField,
    region: &ConvexDomain,
    opts: &ScanOptions,
) -> Result<ConcavityReport> {
    let tol = match opts.tolerance {
        Tolerance::Interpolation { c } => Some(interpolation_tolerance(v, region, c)),
        _ => None,
    };
    scan(v, region, opts, tol)
}

fn scan(
    v: &(impl ScalarField + ?Sized),
    region: &ConvexDomain,
    opts: &ScanOptions,
    tol_override: Option<f64>,
) -> Result<ConcavityReport> {
    let pairs = sample_pairs(region, opts.pairs, opts.seed);
    let nt = opts.t_steps.max(2);
    let ts: Vec<f64> = (1..nt - 1).map(|k| k as f64 / (nt - 1) as f64).collect();
    // Per pair: best interior triple and the largest |v| seen.
    let per_pair: Vec<(f64, usize, f64)> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let (Some(vx), Some(vy)) = (v.value(x), v.value(y)) else {
                return (f64::NEG_INFINITY, 0, 0.0);
            };
            let mut best = (f64::NEG_INFINITY, 0usize);
            let mut scale = vx.abs().max(vy.abs());
            for (k, &t) in ts.iter().enumerate() {
                if let Some(vm) = v.value(x * t + y * (1.0 - t)) {
                    scale = scale.max(vm.abs());
                    let c = combine(vx, vy, vm, t);
                    if c > best.0 {
                        best = (c, k);
                    }
                }
            }
            (best.0, best.1, scale)
        })
        .collect();
    let field_scale = per_pair.iter().fold(0.0f64, |m, p| m.max(p.2));
    let mut order: Vec<usize> = (0..pairs.len()).filter(|&i| per_pair[i].0 > f64::NEG_INFINITY).collect();
    // Largest first, ties by pair index.
    order.sort_by(|&a, &b| per_pair[b].0.total_cmp(&per_pair[a].0).then(a.cmp(&b)));
    let diam = region.diameter();
    let mut worst: Vec<Triple> = order
        .iter()
        .take(opts.refine)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            let (x, y) = pairs[i];
            let t = ts[per_pair[i].1];
            let start = Triple { x, y, t, value: per_pair[i].0 };
            refine(v, region, start, diam)
        })
        .collect();
    worst.sort_by(|a, b| b.value.total_cmp(&a.value));
    let arg = worst.first().copied();
    let max_violation = arg.map_or(f64::NEG_INFINITY, |a| a.value);
    let tolerance = tol_override.unwrap_or(match opts.tolerance {
        Tolerance::Absolute { value } => value,
        Tolerance::Relative { value } => value * field_scale,
        Tolerance::Interpolation { .. } => 0.0,
    });
    Ok(ConcavityReport {
        max_violation,
        arg,
        pairs: pairs.len(),
        t_steps: nt,
        evaluations: pairs.len() * ts.len(),
        seed: opts.seed,
        field_scale,
        tolerance,
        passed: max_violation <= tolerance,
        worst,
        boundary: None,
    })
}

/// Coordinate ascent on `(x, y, t)` keeping all three points in `region`.
fn refine(v: &(impl ScalarField + ?Sized), region: &ConvexDomain, start: Triple, diam: f64) -> Triple {
    let eval = |s: &[f64; 5]| -> Option<f64> {
        let (x, y, t) = (Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3]), s[4]);
        if !(0.0..=1.0).contains(&t) || !region.contains(x) || !region.contains(y) {
            return None;
        }
        concavity_function(v, x, y, t).ok()
    };
    let mut s = [start.x.x, start.x.y, start.y.x, start.y.y, start.t];
    let mut best = start.value;
    let mut step = [0.02 * diam, 0.02 * diam, 0.02 * diam, 0.02 * diam, 0.5 / 16.0];
    for _ in 0..400 {
        let mut improved = false;
        for c in 0..5 {
            for sign in [1.0, -1.0] {
                let mut trial = s;
                trial[c] += sign * step[c];
                if let Some(val) = eval(&trial) {
                    if val > best {
                        best = val;
                        s = trial;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|h| *h *= 0.5);
            if step[0] < 1e-7 * diam {
                break;
            }
        }
    }
    Triple { x: Vec2::new(s[0], s[1]), y: Vec2::new(s[2], s[3]), t: s[4], value: best }
}

/// `φ(max(u, floor))` at every node, with `floor = floor_rel·max u`.
pub fn transformed_field(u: &DiscreteField, transform: &PhiTransform, floor_rel: f64) -> Result<DiscreteField> {
    let floor = floor_rel * u.max();
    if !(floor > 0.0) {
        return Err(Error::Precondition("transform needs a field with positive maximum".into()));
    }
    let values = u.values().iter().map(|&w| transform.phi(w.max(floor))).collect::<Result<Vec<_>>>()?;
    DiscreteField::new(u.mesh().clone(), values, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub passed: bool,
    pub tested: usize,
    pub skipped: usize,
    /// Largest `2g(x)g(y) − (g(x)+g(y))g((x+y)/2)`, relative to the terms.
    pub worst_defect: f64,
    pub worst_pair: Option<(f64, f64)>,
}

/// Checks `(g(x)+g(y))·g((x+y)/2) ≥ 2g(x)g(y)` at pairs with `g(x)+g(y) > 0`.
pub fn harmonic_concave_check(g: impl Fn(f64) -> f64, pairs: &[(f64, f64)], rel_tol: f64) -> HarmonicReport {
    let mut rep = HarmonicReport { passed: true, tested: 0, skipped: 0, worst_defect: f64::NEG_INFINITY, worst_pair: None };
    for &(x, y) in pairs {
        let (gx, gy) = (g(x), g(y));
        if !(gx + gy > 0.0) {
            rep.skipped += 1;
            continue;
        }
        let gm = g(0.5 * (x + y));
        let lhs = (gx + gy) * gm;
        let rhs = 2.0 * gx * gy;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        let defect = (rhs - lhs) / scale;
        rep.tested += 1;
        if defect > rep.worst_defect || defect.is_nan() {
            rep.worst_defect = if defect.is_nan() { f64::INFINITY } else { defect };
            rep.worst_pair = Some((x, y));
        }
        if !(defect <= rel_tol) {
            rep.passed = false;
        }
    }
    rep
}

/// All pairs of an `n`-point uniform grid on `[lo, hi]`.
pub fn grid_pairs(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((pts[i], pts[j]));
        }
    }
    out
}

/// `b_ε(z) = p + ((p−1)H^{2/p}(z) − ε)(ε + H^{2/p}(z))^{(p−2)/2}`.
pub fn b_eps(aniso: &Anisotropy, z: Vec2, eps: f64) -> f64 {
    let p = aniso.p();
    let h = aniso.eval_h2p(z);
    if h == 0.0 {
        return p - eps.powf(0.5 * p);
    }
    p + ((p - 1.0) * h - eps) * (eps + h).powf(0.5 * (p - 2.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct KenningtonReport {
    /// `s ↦ f(ψ(s))/F(ψ(s))^{1−1/p}` non-increasing.
    pub monotone: ConditionCheck,
    pub lemma: LemmaReport,
    pub eps: f64,
    pub b_at_zero: f64,
    pub b_min: f64,
    pub b_positive: bool,
    pub passed: bool,
}

/// Checks the monotonicity and harmonic-concavity hypotheses of the
/// transformed equation on `v_range`, and positivity of `b_ε`.
pub fn kennington_hypothesis_check(
    problem: &EnergyProblem,
    transform: &PhiTransform,
    v_range: (f64, f64),
    eps: f64,
) -> Result<KenningtonReport> {
    let (lo, hi) = v_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Configuration(format!("invalid v-range [{lo}, {hi}]")));
    }
    let n = 1000;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let r = transform.reaction();
    let p = r.p();
    let k = |s: f64| -> Result<f64> {
        let t = transform.psi(s)?;
        Ok(r.f(t) / r.primitive(t).powf(1.0 - 1.0 / p))
    };
    let ks: Vec<f64> = grid.iter().map(|&s| k(s)).collect::<Result<_>>()?;
    let mut monotone = ConditionCheck::new();
    for i in 1..n {
        let scale = ks[i].abs().max(ks[i - 1].abs());
        monotone.record(ks[i] - ks[i - 1], [grid[i - 1], grid[i], grid[i]], 1e-9 * scale);
    }
    let lemma = check_lemmavarphi(transform, &grid)?;
    let aniso = problem.anisotropy();
    let b_at_zero = b_eps(aniso, Vec2::ZERO, eps);
    let mut b_min = b_at_zero;
    for i in 0..=48 {
        let rad = 10f64.powf(-3.0 + 6.0 * i as f64 / 48.0);
        for j in 0..64 {
            let z = Vec2::polar(std::f64::consts::TAU * j as f64 / 64.0) * rad;
            b_min = b_min.min(b_eps(aniso, z, eps));
        }
    }
    let b_positive = b_min > 0.0;
    let passed = monotone.passed && lemma.passed() && b_positive;
    Ok(KenningtonReport { monotone, lemma, eps, b_at_zero, b_min, b_positive, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KorevaarReport {
    pub delta: f64,
    pub hessian_samples: usize,
    /// Largest Hessian eigenvalue over the strip samples.
    pub hessian_max_eigenvalue: f64,
    pub hessian_threshold: f64,
    pub hessian_passed: bool,
    pub plane_samples: usize,
    /// Smallest `v(x0) + Dv(x0)·(x − x0) − v(x)` over nodes at distance ≥ 2h.
    pub plane_min_margin: f64,
    pub plane_passed: bool,
    pub passed: bool,
}

/// Quadratic least-squares fit `v(x0 + d) ≈ c + g·d + ½dᵀHd`.
struct QuadFit {
    center: Vec2,
    c: f64,
    g: Vec2,
    hess: Sym2,
}

impl QuadFit {
    fn value(&self, x: Vec2) -> f64 {
        let d = x - self.center;
        self.c + self.g.dot(d) + 0.5 * self.hess.quad(d)
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        self.g + self.hess.apply(x - self.center)
    }
}

fn fit_quadratic(mesh: &Mesh, values: &[f64], center: Vec2, nodes: &[usize]) -> Option<QuadFit> {
    if nodes.len() < 6 {
        return None;
    }
    let s = mesh.h();
    let mut ata = SMatrix::<f64, 6, 6>::zeros();
    let mut atb = SVector::<f64, 6>::zeros();
    for &j in nodes {
        let d = (mesh.nodes()[j] - center) / s;
        let row = SVector::<f64, 6>::from([1.0, d.x, d.y, 0.5 * d.x * d.x, d.x * d.y, 0.5 * d.y * d.y]);
        ata += row * row.transpose();
        atb += row * values[j];
    }
    let sol = ata.cholesky()?.solve(&atb);
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(QuadFit {
        center,
        c: sol[0],
        g: Vec2::new(sol[1], sol[2]) / s,
        hess: Sym2 { xx: sol[3] / (s * s), xy: sol[4] / (s * s), yy: sol[5] / (s * s) },
    })
}

fn two_ring(neighbors: &[Vec<usize>], i: usize, usable: &[bool]) -> Vec<usize> {
    let mut out = vec![i];
    for &j in &neighbors[i] {
        out.push(j);
        out.extend(neighbors[j].iter().copied());
    }
    out.sort_unstable();
    out.dedup();
    out.retain(|&j| usable[j]);
    out
}

/// Hessian negativity in the strip `Ω_{δ/2} ∖ Ω_δ` and tangent-plane
/// majorization at boundary points of `Ω_{δ/2}`.
pub fn korevaar_boundary_check(v: &DiscreteField, domain: &ConvexDomain, delta: f64) -> Result<KorevaarReport> {
    let mesh = v.mesh();
    let h = mesh.h();
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("strip width must be positive, got {delta}")));
    }
    if 0.5 * delta < 2.0 * h {
        return Err(Error::Resolution(format!("strip width {delta} is below four mesh sizes (h = {h})")));
    }
    let inner = domain.inner_domain(0.5 * delta)?;
    let neighbors = mesh.node_neighbors();
    let sd: Vec<f64> = mesh.nodes().iter().map(|&x| domain.signed_distance(x)).collect();
    // Nodes trusted for fits: interior, inside Ω_{δ/4}, away from polygon vertices.
    let vertex_ok = |x: Vec2| domain.is_disc() || domain.vertex_distance(x) >= delta;
    let usable: Vec<bool> = (0..mesh.num_nodes()).map(|i| !mesh.is_boundary(i) && sd[i] >= 0.25 * delta).collect();
    let values = v.values();
    let scale = v.max_abs().max(f64::MIN_POSITIVE);
    let diam = domain.diameter();
    let hessian_threshold = -1e-6 * scale / (diam * diam);

    let strip: Vec<usize> = (0..mesh.num_nodes())
        .filter(|&i| usable[i] && sd[i] >= 0.5 * delta && sd[i] <= delta && vertex_ok(mesh.nodes()[i]))
        .collect();
    if strip.len() < 8 {
        return Err(Error::Resolution(format!("only {} nodes in the boundary strip", strip.len())));
    }
    let eigs: Vec<Option<f64>> = strip
        .par_iter()
        .map(|&i| {
            let fit = fit_quadratic(mesh, values, mesh.nodes()[i], &two_ring(&neighbors, i, &usable))?;
            Some(fit.hess.eigenvalues().1)
        })
        .collect();
    if eigs.iter().any(Option::is_none) {
        return Err(Error::Resolution("quadratic fit failed in the boundary strip".into()));
    }
    let hessian_max_eigenvalue = eigs.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let hessian_passed = hessian_max_eigenvalue < hessian_threshold;

    let n_plane = ((inner.perimeter() / h).ceil() as usize).clamp(16, 256);
    let samples: Vec<Vec2> = inner
        .boundary_samples(n_plane, delta)
        .into_iter()
        .map(|b| b.point)
        .filter(|&x| vertex_ok(x))
        .collect();
    let targets: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| usable[i] && sd[i] >= 0.5 * delta - 1e-12).collect();
    let margins: Vec<Option<f64>> = samples
        .par_iter()
        .map(|&x0| {
            let near = targets
                .iter()
                .copied()
                .min_by(|&a, &b| (mesh.nodes()[a] - x0).norm_sq().total_cmp(&(mesh.nodes()[b] - x0).norm_sq()))?;
            let fit = fit_quadratic(mesh, values, mesh.nodes()[near], &two_ring(&neighbors, near, &usable))?;
            let (v0, g0) = (fit.value(x0), fit.gradient(x0));
            let m = targets
                .iter()
                .filter(|&&j| (mesh.nodes()[j] - x0).norm() >= 2.0 * h)
                .map(|&j| v0 + g0.dot(mesh.nodes()[j] - x0) - values[j])
                .fold(f64::INFINITY, f64::min);
            Some(m)
        })
        .collect();
    if samples.is_empty() || margins.iter().any(Option::is_none) {
        return Err(Error::Resolution("tangent-plane fit failed on the inner boundary".into()));
    }
    let plane_min_margin = margins.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let plane_passed = plane_min_margin > 0.0;
    Ok(KorevaarReport {
        delta,
        hessian_samples: strip.len(),
        hessian_max_eigenvalue,
        hessian_threshold,
        hessian_passed,
        plane_samples: samples.len(),
        plane_min_margin,
        plane_passed,
        passed: hessian_passed && plane_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn quadratic_sections() {
        let (x, y) = (Vec2::ZERO, Vec2::new(1.0, 0.0));
        let neg = |z: Vec2| -z.norm_sq();
        let pos = |z: Vec2| z.norm_sq();
        assert_eq!(concavity_function(&neg, x, y, 0.5).unwrap(), -0.25);
        assert_eq!(concavity_function(&pos, x, y, 0.5).unwrap(), 0.25);
        let lin = |z: Vec2| 2.0 * z.x - z.y + 0.5;
        assert!(concavity_function(&lin, Vec2::new(0.3, -1.0), Vec2::new(2.0, 0.7), 0.3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn outside_points_are_errors() {
        let d = ConvexDomain::unit_disc();
        let f = Restricted { f: |z: Vec2| z.x, domain: &d };
        assert!(matches!(concavity_function(&f, Vec2::ZERO, Vec2::new(2.0, 0.0), 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn harmonic_examples() {
        let pairs = grid_pairs(0.1, 3.0, 40);
        assert!(harmonic_concave_check(|x| x, &pairs, 1e-12).passed);
        let c = harmonic_concave_check(|_| 2.0, &pairs, 1e-12);
        assert!(c.passed && c.worst_defect.abs() < 1e-15);
        let sq = harmonic_concave_check(|x| x * x, &[(1.0, 2.0)], 0.0);
        assert!(sq.passed && ((8.0 - 11.25) / 11.25 - sq.worst_defect).abs() < 1e-15);
        assert!(harmonic_concave_check(|x| x * x, &grid_pairs(1.0, 2.0, 50), 0.0).passed);
        // exp(x²) is not harmonic concave: 1/g = exp(−x²) is not convex near 0.
        assert!(!harmonic_concave_check(|x: f64| (x * x).exp(), &grid_pairs(-0.5, 0.5, 20), 0.0).passed);
    }

    #[test]
    fn b_eps_values() {
        let a = Anisotropy::euclidean(2.0).unwrap();
        assert_eq!(b_eps(&a, Vec2::ZERO, 0.01), 1.99);
        assert!((b_eps(&a, Vec2::new(1.0, 0.0), 0.1) - 2.9).abs() < 1e-14);
        let a3 = Anisotropy::euclidean(3.0).unwrap();
        assert_eq!(b_eps(&a3, Vec2::ZERO, 0.04), 3.0 - 0.04f64.powf(1.5));
    }

    #[test]
    fn scan_finds_convexity_and_respects_concavity() {
        let d = ConvexDomain::unit_disc();
        let opts = ScanOptions { pairs: 2000, ..Default::default() };
        let conc = max_concavity_violation(&Restricted { f: |z: Vec2| (1.0 - z.norm_sq()).sqrt(), domain: &d }, &d, &opts).unwrap();
        assert!(conc.passed && conc.max_violation <= 0.0);
        let conv = max_concavity_violation(&Restricted { f: |z: Vec2| z.norm_sq(), domain: &d }, &d, &opts).unwrap();
        assert!(!conv.passed && conv.max_violation > 0.5);
        let a = conv.arg.unwrap();
        assert_eq!(concavity_function(&|z: Vec2| z.norm_sq(), a.x, a.y, a.t).unwrap(), a.value);
        let again = max_concavity_violation(&Restricted { f: |z: Vec2| z.norm_sq(), domain: &d }, &d, &opts).unwrap();
        assert_eq!(conv, again);
    }

    #[test]
    fn korevaar_on_interpolated_fields() {
        let d = ConvexDomain::unit_disc();
        let mesh = Arc::new(d.triangulate(0.02).unwrap());
        let root = DiscreteField::from_fn(mesh.clone(), |x| 0.5 * (1.0 - x.norm_sq()).max(0.0).sqrt(), false).unwrap();
        let rep = korevaar_boundary_check(&root, &d, 0.1).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.plane_min_margin > 0.0 && rep.hessian_max_eigenvalue < 0.0);
        let lin = DiscreteField::from_fn(mesh.clone(), |x| x.x + 2.0 * x.y, false).unwrap();
        let rep = korevaar_boundary_check(&lin, &d, 0.1).unwrap();
        assert!(!rep.hessian_passed);
        assert!(matches!(korevaar_boundary_check(&root, &d, 0.05), Err(Error::Resolution(_))));
    }
}
