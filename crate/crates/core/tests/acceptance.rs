//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs every criterion by default; pass criterion numbers as arguments to
//! run a subset (`cargo test --test acceptance -- 1 8`).

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::Instant;

use fpl_core::anisotropy::{
    hessian_probe_h_theta, hessian_probe_hp2, mollify_regularize, Anisotropy, ConvexBody, MollifyOptions,
};
use fpl_core::barrier::{
    barrier_profile, convergence_rate, hopf_slope_check, verify_barrier_pde, AnnulusMesh, GaugeAnnulus,
};
use fpl_core::concavity::{b_eps, concavity_function, max_concavity_violation_field, ScanOptions, Tolerance};
use fpl_core::domain::ConvexDomain;
use fpl_core::reaction::{check_lemmavarphi, PhiTransform, Reaction, ReactionSpec};
use fpl_core::solver::{minimize_j, rayleigh_eigen, DiscreteField, EnergyProblem, LadderOptions, SolverOptions};
use fpl_core::Vec2;
use rand::rngs::Xoshiro256PlusPlus;
use rand::{RngExt, SeedableRng};

type Outcome = Result<String, String>;

/// Square of the first zero of `J_0`.
const J01_SQ: f64 = 5.783_185_962_946_784;
/// Maximum of the torsion function of the unit square (Fourier series).
const SQUARE_TORSION_MAX: f64 = 0.07367;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn torsion_problem(domain: ConvexDomain, body: &ConvexBody, h: f64, opts: SolverOptions) -> EnergyProblem {
    let a = Anisotropy::from_body(body, 2.0).unwrap();
    let r = ReactionSpec::Constant { c: 1.0 }.build(2.0).unwrap();
    EnergyProblem::build(a, r, domain, h, opts).unwrap()
}

/// `max` violation of `√u` on the inner domain at `1e-4·‖√u‖_∞`.
fn sqrt_scan(u: &DiscreteField, domain: &ConvexDomain, delta: f64) -> (f64, f64, bool) {
    let v = u.map(|w| w.max(0.0).sqrt());
    let tol = 1e-4 * v.max_abs();
    let opts = ScanOptions { tolerance: Tolerance::Absolute { value: tol }, ..ScanOptions::default() };
    let region = domain.inner_domain(delta).unwrap();
    let rep = max_concavity_violation_field(&v, &region, &opts).unwrap();
    (rep.max_violation, tol, rep.passed)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let d = ConvexDomain::unit_disc();
    let pr = torsion_problem(d.clone(), &ConvexBody::euclidean(), 0.02, SolverOptions::default());
    let u = minimize_j(&pr).map_err(|e| e.to_string())?.field;
    let err = pr
        .mesh()
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(x, v)| (v - 0.25 * (1.0 - x.norm_sq())).abs())
        .fold(0.0, f64::max);
    let (viol, tol, scan_ok) = sqrt_scan(&u, &d, 0.05);
    let secs = start.elapsed().as_secs_f64();
    ensure(
        err <= 5e-3 && scan_ok && secs <= 60.0,
        format!("nodal error {err:.2e} (≤ 5e-3), √u violation {viol:.2e} (tol {tol:.2e}), {secs:.1} s (≤ 60)"),
    )
}

fn criterion_2() -> Outcome {
    let d = ConvexDomain::unit_square();
    let pr = torsion_problem(d.clone(), &ConvexBody::euclidean(), 0.02, SolverOptions::default());
    let u = minimize_j(&pr).map_err(|e| e.to_string())?.field;
    let rel = (u.max() - SQUARE_TORSION_MAX).abs() / SQUARE_TORSION_MAX;
    let (viol, tol, scan_ok) = sqrt_scan(&u, &d, 0.05);
    ensure(
        rel <= 0.02 && scan_ok,
        format!("max u {:.6} ({:.2}% off), √u violation {viol:.2e} (tol {tol:.2e})", u.max(), 100.0 * rel),
    )
}

fn eigen_disc() -> Result<(EnergyProblem, DiscreteField, f64), String> {
    let a = Anisotropy::euclidean(2.0).unwrap();
    let r = Reaction::eigen(1.0, 2.0).unwrap();
    let pr = EnergyProblem::build(a, r, ConvexDomain::unit_disc(), 0.02, SolverOptions::default()).unwrap();
    let res = rayleigh_eigen(&pr).map_err(|e| e.to_string())?;
    let lambda = res.eigenvalue.ok_or("no eigenvalue")?;
    Ok((pr, res.field, lambda))
}

fn criterion_3() -> Outcome {
    let (_, u, lambda) = eigen_disc()?;
    let rel = (lambda - J01_SQ).abs() / J01_SQ;
    let floor = 1e-8 * u.max();
    let v = u.map(|w| w.max(floor).ln());
    let region = ConvexDomain::unit_disc().inner_domain(0.05).unwrap();
    let rep = max_concavity_violation_field(&v, &region, &ScanOptions::default()).map_err(|e| e.to_string())?;
    ensure(
        rel <= 0.01 && rep.passed,
        format!("λ1 {lambda:.5} ({:.3}% off), log u violation {:.2e} (tol {:.2e})", 100.0 * rel, rep.max_violation, rep.tolerance),
    )
}

fn criterion_4() -> Outcome {
    let d = ConvexDomain::unit_square();
    let pr = torsion_problem(d.clone(), &ConvexBody::square(), 0.01, SolverOptions::default());
    let res = minimize_j(&pr).map_err(|e| e.to_string())?;
    let (viol, tol, scan_ok) = sqrt_scan(&res.field, &d, 0.05);
    ensure(
        res.converged && res.residual <= 1e-4 && scan_ok,
        format!(
            "{} rungs, converged {}, residual {:.2e} (≤ 1e-4), √u violation {viol:.2e} (tol {tol:.2e}), h = 0.01",
            res.ladder.len(),
            res.converged,
            res.residual
        ),
    )
}

fn criterion_5() -> Outcome {
    let body = ConvexBody::Disc { center: Vec2::new(0.5, 0.0), radius: 1.0 };
    let a = Anisotropy::from_body(&body, 2.0).unwrap();
    let e = Vec2::new(1.0, 0.0);
    let (fwd, back) = (a.gauge().value(e), a.gauge().value(-e));
    let gauge_ok = (fwd - 2.0 / 3.0).abs() <= 1e-12 && (back - 2.0).abs() <= 1e-12;
    let d = ConvexDomain::unit_disc();
    let pr = torsion_problem(d.clone(), &body, 0.02, SolverOptions::default());
    let res = minimize_j(&pr).map_err(|e| e.to_string())?;
    let com = res.field.center_of_mass();
    let (viol, tol, scan_ok) = sqrt_scan(&res.field, &d, 0.05);
    ensure(
        gauge_ok && res.converged && scan_ok && com.norm() > 1e-3,
        format!(
            "Φ(e) {fwd:.6}, Φ(−e) {back:.6}, converged {}, √u violation {viol:.2e} (tol {tol:.2e}), center of mass ({:.4}, {:.4})",
            res.converged, com.x, com.y
        ),
    )
}

fn criterion_6() -> Outcome {
    let (_, u, _) = eigen_disc()?;
    let region = ConvexDomain::unit_disc().inner_domain(0.05).unwrap();
    let rep = max_concavity_violation_field(&u, &region, &ScanOptions::default()).map_err(|e| e.to_string())?;
    ensure(
        rep.max_violation > rep.tolerance,
        format!("raw eigenfunction violation {:.2e} (> tol {:.2e})", rep.max_violation, rep.tolerance),
    )
}

fn criterion_7() -> Outcome {
    let euclid = Anisotropy::euclidean(2.0).unwrap();
    let probe = hessian_probe_hp2(&euclid, 360, 1e-8);
    let exact = (probe.lambda - 2.0).abs() <= 1e-6 && (probe.big_lambda - 2.0).abs() <= 1e-6;
    let cryst = Anisotropy::from_body(&ConvexBody::square(), 2.0).unwrap();
    let reg = mollify_regularize(&cryst, 1e-2, &MollifyOptions::default()).map_err(|e| e.to_string())?;
    let reg_probe = hessian_probe_hp2(reg.smoothed(), 360, 1e-8);
    let thetas: Vec<f64> = (0..7).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect();
    let mut spreads = Vec::new();
    let mut certified = true;
    for p in [2.0, 3.0] {
        let a = Anisotropy::euclidean(p).unwrap();
        let t = hessian_probe_h_theta(&a, &thetas, 32, 0.1).map_err(|e| e.to_string())?;
        certified &= t.certified;
        spreads.push(format!("p={p}: {:.1e}/{:.1e}", t.lambda_variation, t.big_lambda_variation));
    }
    ensure(
        exact && reg_probe.lambda > 0.0 && certified,
        format!(
            "|z|²: λ̂ {:.8} Λ̂ {:.8}; regularized |z|∞² at ε=1e-2: λ̂ {:.3e}; H_θ spreads {}",
            probe.lambda,
            probe.big_lambda,
            reg_probe.lambda,
            spreads.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let euclid = ConvexBody::euclidean();
    for p in [2.0, 3.0] {
        let prof = barrier_profile(p, 2, 1.0, 1.0).map_err(|e| e.to_string())?;
        let i_r = prof.invariant(1.0);
        let inv = (0..=40).map(|k| (prof.invariant(0.5 + k as f64 / 80.0) - i_r).abs() / i_r.abs()).fold(0.0, f64::max);
        ok &= inv <= 1e-9;
        if p == 2.0 {
            let da = (prof.a + 1.0 / LN_2).abs();
            ok &= da <= 1e-12;
            notes.push(format!("A + 1/log 2 = {da:.1e}"));
        }
        let a = Anisotropy::from_body(&euclid, p).unwrap();
        let ann = GaugeAnnulus::new(Vec2::ZERO, 1.0, a.gauge().clone()).map_err(|e| e.to_string())?;
        let res: Vec<_> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| verify_barrier_pde(&ann, &prof, &AnnulusMesh::new(&ann, h)?))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let rate = convergence_rate(&res);
        ok &= rate >= 1.0;
        notes.push(format!("p={p}: invariant {inv:.1e}, residual rate {rate:.2}"));
    }
    let d = ConvexDomain::unit_disc();
    let pr = torsion_problem(d.clone(), &euclid, 0.02, SolverOptions::default());
    let u = minimize_j(&pr).map_err(|e| e.to_string())?.field;
    let hopf = hopf_slope_check(&pr, &u, &d.boundary_samples(64, 0.0)).map_err(|e| e.to_string())?;
    let comparison = hopf.comparison.as_ref().is_some_and(|c| c.rejected.is_none() && c.holds);
    let sandwich = hopf.sandwich_holds.unwrap_or(false);
    ok &= comparison && sandwich && hopf.min_slope >= 0.4;
    notes.push(format!(
        "comparison {comparison}, sandwich {sandwich}, Hopf slope {:.4} (≥ 0.4)",
        hopf.min_slope
    ));
    ensure(ok, notes.join("; "))
}

fn criterion_9() -> Outcome {
    let d = ConvexDomain::unit_square();
    let run = |eps0: f64| {
        let opts = SolverOptions { ladder: LadderOptions { eps0, factor: 0.5, floor: 5e-5 }, ..SolverOptions::default() };
        minimize_j(&torsion_problem(d.clone(), &ConvexBody::square(), 0.04, opts))
    };
    let a = run(0.1).map_err(|e| e.to_string())?;
    let b = run(0.05).map_err(|e| e.to_string())?;
    let incs: Vec<f64> = a.ladder.iter().filter_map(|s| s.increment).collect();
    let decreasing = incs.windows(2).all(|w| w[1] < w[0]);
    let scale = a.field.max_abs();
    let last = *incs.last().ok_or("ladder has a single rung")?;
    let ratio = a.ladder.iter().filter_map(|s| s.min_ratio_to_base).fold(f64::INFINITY, f64::min);
    let gap = a.field.values().iter().zip(b.field.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(
        decreasing && last <= 1e-4 * scale && ratio >= 1.0 && gap <= 1e-3 * scale,
        format!(
            "{} rungs, increments decreasing {decreasing}, final {:.2e} (≤ {:.2e}), min H_n/H {ratio:.6}, ladder gap {gap:.2e} (≤ {:.2e})",
            a.ladder.len(),
            last,
            1e-4 * scale,
            1e-3 * scale
        ),
    )
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `∫_1^t F(s)^{−1/p} ds` after `s = e^x`, for a closed-form primitive.
fn phi_oracle(big_f: &dyn Fn(f64) -> f64, p: f64, t: f64) -> f64 {
    let g = |x: f64| x.exp() * big_f(x.exp()).powf(-1.0 / p);
    simpson(&g, 0.0, t.ln(), 1e-14)
}

fn criterion_10() -> Outcome {
    let mut worst_trip: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let ts = [1e-4, 1e-2, 0.3, 1.0, 2.5, 40.0];
    // (c, q) of f = c t^{q−1}, F = (c/q) t^q.
    let families: [(f64, f64, f64); 5] = [(1.0, 1.0, 2.0), (1.5, 1.5, 2.0), (2.0, 1.5, 3.0), (3.0, 3.0, 3.0), (5.0, 2.0, 2.0)];
    for (c, q, p) in families {
        let spec = if q == p { ReactionSpec::Eigen { lambda: Some(c) } } else { ReactionSpec::Power { c, q } };
        let closed = PhiTransform::new(spec.build(p).unwrap());
        let numeric = PhiTransform::new(Reaction::custom(move |t| c * t.powf(q - 1.0), p).unwrap());
        let big_f = move |t: f64| c / q * t.powf(q);
        for &t in &ts {
            for tr in [&closed, &numeric] {
                let s = tr.phi(t).map_err(|e| e.to_string())?;
                let back = tr.psi(s).map_err(|e| e.to_string())?;
                worst_trip = worst_trip.max((back - t).abs() / t);
            }
            let oracle = phi_oracle(&big_f, p, t);
            let a = closed.phi(t).unwrap();
            let b = numeric.phi(t).unwrap();
            let scale = oracle.abs().max(1.0);
            worst_quad = worst_quad.max((a - oracle).abs() / scale).max((a - b).abs() / scale);
        }
    }
    let mut lemma_ok = true;
    for (c, q) in [(1.0, 1.0), (1.5, 1.5)] {
        let tr = PhiTransform::new(ReactionSpec::Power { c, q }.build(2.0).unwrap());
        let (lo, hi) = (tr.phi(1e-6).unwrap(), tr.phi(10.0).unwrap());
        let grid: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * i as f64 / 999.0).collect();
        lemma_ok &= check_lemmavarphi(&tr, &grid).map_err(|e| e.to_string())?.passed();
    }
    let mut b_exact = true;
    for p in [1.5, 2.0, 3.0, 4.5] {
        let a = Anisotropy::euclidean(p).unwrap();
        for eps in [1e-3, 1e-2, 0.5] {
            b_exact &= b_eps(&a, Vec2::ZERO, eps) == p - eps.powf(p / 2.0);
        }
    }
    ensure(
        worst_trip <= 1e-9 && worst_quad <= 1e-9 && lemma_ok && b_exact,
        format!(
            "round trip {worst_trip:.1e}, closed form vs quadrature {worst_quad:.1e}, lemma grids {lemma_ok}, b_ε(0) exact {b_exact}"
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let v = |x: Vec2| -(x.x * x.x) + 0.5 * x.x * x.y - 2.0 * x.y * x.y + (3.0 * x.x).sin();
    let shifted = |x: Vec2| v(x) + 0.7 * x.x - 1.3 * x.y + 0.25;
    let mut worst: f64 = 0.0;
    let pt = |rng: &mut Xoshiro256PlusPlus| Vec2::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
    for _ in 0..100_000 {
        let (x, y) = (pt(&mut rng), pt(&mut rng));
        let t: f64 = rng.random();
        let c = concavity_function(&v, x, y, t).unwrap();
        let scale = v(x).abs().max(v(y).abs()).max(1.0);
        let sym = (c - concavity_function(&v, y, x, 1.0 - t).unwrap()).abs();
        let ends = concavity_function(&v, x, y, 0.0).unwrap().abs().max(concavity_function(&v, x, y, 1.0).unwrap().abs());
        let affine = (c - concavity_function(&shifted, x, y, t).unwrap()).abs();
        worst = worst.max(sym.max(ends).max(affine) / scale);
    }
    ensure(worst <= 1e-13, format!("worst identity defect {worst:.1e} over 1e5 triples"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "torsion disc", criterion_1),
        (2, "torsion square", criterion_2),
        (3, "eigenvalue disc", criterion_3),
        (4, "crystalline torsion", criterion_4),
        (5, "non-even anisotropy", criterion_5),
        (6, "negative control", criterion_6),
        (7, "ellipticity probes", criterion_7),
        (8, "barrier suite", criterion_8),
        (9, "regularization convergence", criterion_9),
        (10, "reaction suite", criterion_10),
        (11, "concavity-function algebra", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
