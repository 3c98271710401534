//! P1 minimisation of `J`, the auxiliary functionals `I_ε` and the Rayleigh
//! quotient, with weak-residual, criticality and comparison checks.

mod energy;
mod newton;

pub use newton::TraceEntry;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use energy::{Functional, ReactionTerm};
use newton::NewtonOptions;

use crate::anisotropy::{mollify_regularize, Anisotropy, MollifyOptions, Smoothness};
use crate::domain::{ConvexDomain, Mesh};
use crate::error::{Error, Result};
use crate::reaction::Reaction;
use crate::vec2::Vec2;

/// Nodal values of a P1 field on a shared mesh.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    zero_boundary: bool,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>, zero_boundary: bool) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Configuration(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("field value at node {i} is not finite")));
        }
        if zero_boundary {
            if let Some(i) = (0..values.len()).find(|&i| mesh.is_boundary(i) && values[i] != 0.0) {
                return Err(Error::Configuration(format!("boundary node {i} is not zero")));
            }
        }
        Ok(DiscreteField { mesh, values, zero_boundary })
    }

    /// Nodal interpolant of `f`; boundary nodes are set to zero when
    /// `zero_boundary` is requested.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> f64, zero_boundary: bool) -> Result<Self> {
        let values = (0..mesh.num_nodes())
            .map(|i| if zero_boundary && mesh.is_boundary(i) { 0.0 } else { f(mesh.nodes()[i]) })
            .collect();
        DiscreteField::new(mesh, values, zero_boundary)
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_nodes();
        DiscreteField { mesh, values: vec![0.0; n], zero_boundary: true }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// P1 interpolation at `x`; `None` outside the mesh.
    pub fn eval(&self, x: Vec2) -> Option<f64> {
        self.mesh.interpolate(&self.values, x)
    }

    /// Lumped `(∫|w|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let m = self.mesh.lumped_mass();
        m.iter().zip(&self.values).map(|(m, v)| m * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }

    /// Nodal map; the result keeps the boundary flag only if `g(0) = 0`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> DiscreteField {
        let values: Vec<f64> = self.values.iter().map(|&v| g(v)).collect();
        let zero_boundary = self.zero_boundary && g(0.0) == 0.0;
        DiscreteField { mesh: self.mesh.clone(), values, zero_boundary }
    }

    /// `node,x,y,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,x,y,value")?;
        for (i, (p, v)) in self.mesh.nodes().iter().zip(&self.values).enumerate() {
            writeln!(w, "{i},{},{},{}", p.x, p.y, v)?;
        }
        Ok(())
    }

    /// Center of mass of the density `|w|`.
    pub fn center_of_mass(&self) -> Vec2 {
        let m = self.mesh.lumped_mass();
        let mut c = Vec2::ZERO;
        let mut total = 0.0;
        for ((p, v), m) in self.mesh.nodes().iter().zip(&self.values).zip(&m) {
            c += *p * (m * v.abs());
            total += m * v.abs();
        }
        if total > 0.0 {
            c / total
        } else {
            c
        }
    }
}

/// Regularisation ladder `ε_n = ε_0·factor^n`, stopping at the first
/// `ε_n ≤ floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderOptions {
    pub eps0: f64,
    pub factor: f64,
    pub floor: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions { eps0: 0.1, factor: 0.5, floor: 1e-4 }
    }
}

impl LadderOptions {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.eps0 > 0.0 && self.factor > 0.0 && self.factor < 1.0 && self.floor > 0.0) {
            return Err(Error::Configuration(format!("invalid ladder {self:?}")));
        }
        let mut out = vec![self.eps0];
        while *out.last().unwrap() > self.floor {
            let next = out.last().unwrap() * self.factor;
            out.push(next);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Projected-gradient tolerance, relative to `1 + |J|`.
    pub tol: f64,
    pub max_iter: usize,
    pub ladder: LadderOptions,
    /// Relative eigenvalue change that stops inverse iteration.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 200, ladder: LadderOptions::default(), eigen_tol: 1e-10, eigen_max_iter: 500 }
    }
}

/// Anisotropy, reaction, domain and mesh of one Dirichlet problem.
#[derive(Debug, Clone)]
pub struct EnergyProblem {
    anisotropy: Anisotropy,
    reaction: Reaction,
    domain: ConvexDomain,
    mesh: Arc<Mesh>,
    options: SolverOptions,
}

impl EnergyProblem {
    pub fn new(
        anisotropy: Anisotropy,
        reaction: Reaction,
        domain: ConvexDomain,
        mesh: Arc<Mesh>,
        options: SolverOptions,
    ) -> Result<Self> {
        if anisotropy.p() != reaction.p() {
            return Err(Error::Configuration(format!(
                "anisotropy exponent {} differs from reaction exponent {}",
                anisotropy.p(),
                reaction.p()
            )));
        }
        Ok(EnergyProblem { anisotropy, reaction, domain, mesh, options })
    }

    /// Triangulates `domain` with mesh size `h`.
    pub fn build(
        anisotropy: Anisotropy,
        reaction: Reaction,
        domain: ConvexDomain,
        h: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        let mesh = Arc::new(domain.triangulate(h)?);
        EnergyProblem::new(anisotropy, reaction, domain, mesh, options)
    }

    pub fn anisotropy(&self) -> &Anisotropy {
        &self.anisotropy
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn p(&self) -> f64 {
        self.anisotropy.p()
    }

    pub fn with_anisotropy(&self, anisotropy: Anisotropy) -> Result<Self> {
        EnergyProblem::new(anisotropy, self.reaction.clone(), self.domain.clone(), self.mesh.clone(), self.options)
    }

    pub fn with_reaction(&self, reaction: Reaction) -> Result<Self> {
        EnergyProblem::new(self.anisotropy.clone(), reaction, self.domain.clone(), self.mesh.clone(), self.options)
    }

    pub fn with_options(&self, options: SolverOptions) -> Self {
        EnergyProblem { options, ..self.clone() }
    }

    /// Distance to `∂Ω`, zero on boundary nodes.
    pub fn initial_guess(&self) -> DiscreteField {
        DiscreteField::from_fn(self.mesh.clone(), |x| self.domain.signed_distance(x).max(0.0), true)
            .expect("distance field is finite")
    }

    /// `H` itself when smooth, otherwise its regularisation at the ladder
    /// floor.
    pub fn smooth_anisotropy(&self) -> Result<Anisotropy> {
        match self.anisotropy.smoothness() {
            Smoothness::Smooth => Ok(self.anisotropy.clone()),
            Smoothness::Crystalline => {
                let eps = *self.options.ladder.values()?.last().unwrap();
                Ok(mollify_regularize(&self.anisotropy, eps, &MollifyOptions::default())?.smoothed().clone())
            }
        }
    }

    fn newton_options(&self, nonneg: bool) -> NewtonOptions {
        NewtonOptions { tol: self.options.tol, max_iter: self.options.max_iter, nonneg }
    }
}

/// One rung of the regularisation ladder (a single rung without `eps` for
/// smooth anisotropies).
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub eps: Option<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `‖u_n − u_{n−1}‖_∞` against the previous rung.
    pub increment: Option<f64>,
    /// Sampled `(λ_n, Λ_n)` of the regularised integrand.
    pub ellipticity: Option<(f64, f64)>,
    /// `min H_n/H` over sampled rays (at least 1 when `H_n ≥ H`).
    pub min_ratio_to_base: Option<f64>,
    pub eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub field: DiscreteField,
    /// The (possibly regularised) integrand of the final rung.
    #[serde(skip)]
    pub final_anisotropy: Anisotropy,
    pub energy: f64,
    pub max_value: f64,
    pub eigenvalue: Option<f64>,
    pub residual: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub ladder: Vec<StageReport>,
    pub trace: Vec<TraceEntry>,
    pub anomaly: Option<String>,
    pub wall_time_s: f64,
}

fn ray_ratio(base: &Anisotropy, smoothed: &Anisotropy) -> f64 {
    (0..720)
        .map(|k| {
            let z = Vec2::polar(std::f64::consts::TAU * k as f64 / 720.0);
            smoothed.eval_h(z) / base.eval_h(z)
        })
        .fold(f64::INFINITY, f64::min)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Integrands for each rung: the anisotropy itself when smooth, else the
/// mollified ladder.
fn rungs(problem: &EnergyProblem) -> Result<Vec<(Option<f64>, Anisotropy, Option<(f64, f64)>, Option<f64>)>> {
    let a = problem.anisotropy();
    if a.smoothness() == Smoothness::Smooth {
        return Ok(vec![(None, a.clone(), None, None)]);
    }
    problem
        .options
        .ladder
        .values()?
        .into_iter()
        .map(|eps| {
            let reg = mollify_regularize(a, eps, &MollifyOptions::default())?;
            let ratio = ray_ratio(a, reg.smoothed());
            Ok((Some(eps), reg.smoothed().clone(), Some(reg.ellipticity()), Some(ratio)))
        })
        .collect()
}

/// `J(w) = Σ_T |T| [H(∇w)/p − (F(w_a) + F(w_b) + F(w_c))/3]`.
pub fn assemble_j(problem: &EnergyProblem, field: &DiscreteField) -> f64 {
    let f = Functional { aniso: &problem.anisotropy, mixed: None, reaction: ReactionTerm::Primitive(&problem.reaction) };
    f.energy(&problem.mesh, &field.values)
}

/// `J` and its gradient with respect to the nodal values.
pub fn assemble_j_gradient(problem: &EnergyProblem, field: &DiscreteField) -> (f64, Vec<f64>) {
    let f = Functional { aniso: &problem.anisotropy, mixed: None, reaction: ReactionTerm::Primitive(&problem.reaction) };
    f.energy_gradient(&problem.mesh, &field.values)
}

/// `I_ε(w) = (1/p)∫[εF(w)^{2/p} + H^{2/p}(Dw)]^{p/2} − ∫F(w)`, vertex rule in
/// both terms.
pub fn assemble_i_eps(problem: &EnergyProblem, field: &DiscreteField, eps: f64) -> f64 {
    let f = Functional {
        aniso: &problem.anisotropy,
        mixed: Some((eps, &problem.reaction)),
        reaction: ReactionTerm::Primitive(&problem.reaction),
    };
    f.energy(&problem.mesh, &field.values)
}

fn residual_of(f: &Functional, mesh: &Mesh, x: &[f64]) -> f64 {
    let (_, g) = f.energy_gradient(mesh, x);
    let norms = mesh.hat_l2_norms();
    mesh.interior_nodes().map(|i| (g[i] / norms[i]).abs()).fold(0.0, f64::max)
}

fn trivial_anomaly(problem: &EnergyProblem, x: &[f64]) -> Option<String> {
    let max = x.iter().copied().fold(0.0, f64::max);
    if max > 1e-12 {
        return None;
    }
    let (c, q) = problem.reaction.power_law()?;
    // Only sublinear power laws (q < p) are known to have a nontrivial
    // minimiser regardless of λ_1.
    (q < problem.p() && c > 0.0).then(|| format!("trivial minimiser although existence holds (max u = {max:e})"))
}

/// Minimises `J` over nonnegative P1 fields through the regularisation
/// ladder, warm-starting every rung.
pub fn minimize_j(problem: &EnergyProblem) -> Result<SolveResult> {
    minimize_functional(problem, None)
}

/// Minimises `I_ε`; for eigen reactions the minimum is taken over the
/// normalised nonnegative set (`‖u‖_p = 1`).
pub fn minimize_i_eps(problem: &EnergyProblem, eps: f64) -> Result<SolveResult> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("ε = {eps} must be nonnegative")));
    }
    let p = problem.p();
    let b0 = p - eps.powf(0.5 * p);
    if !(b0 > 0.0) {
        return Err(Error::Precondition(format!("b_ε(0) = p − ε^(p/2) = {b0} is not positive")));
    }
    if problem.reaction.is_eigen() {
        return eigen_ladder(problem, (eps > 0.0).then_some(eps));
    }
    if eps == 0.0 {
        return minimize_j(problem);
    }
    minimize_functional(problem, Some(eps))
}

fn minimize_functional(problem: &EnergyProblem, eps: Option<f64>) -> Result<SolveResult> {
    let start = Instant::now();
    let mesh = problem.mesh.clone();
    let mut x = problem.initial_guess().values;
    let mut ladder = Vec::new();
    let mut trace = Vec::new();
    let mut last = None;
    for (stage, (eps_n, aniso, ell, ratio)) in rungs(problem)?.into_iter().enumerate() {
        let f = Functional {
            aniso: &aniso,
            mixed: eps.map(|e| (e, &problem.reaction)),
            reaction: ReactionTerm::Primitive(&problem.reaction),
        };
        let out = newton::minimize(&f, &mesh, x.clone(), problem.newton_options(true), stage);
        trace.extend(out.trace.iter().copied());
        if !out.converged {
            return Err(Error::Convergence {
                iterations: out.iterations,
                message: format!(
                    "rung {stage} (ε = {eps_n:?}) stalled at projected gradient {:e}, energy {:e}",
                    out.grad_norm, out.energy
                ),
            });
        }
        let increment = (stage > 0).then(|| max_diff(&out.x, &x));
        ladder.push(StageReport {
            eps: eps_n,
            energy: out.energy,
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            increment,
            ellipticity: ell,
            min_ratio_to_base: ratio,
            eigenvalue: None,
        });
        x = out.x;
        last = Some((aniso, out.energy, out.grad_norm));
    }
    let (aniso, energy, grad_norm) = last.expect("at least one rung");
    let f = Functional {
        aniso: &aniso,
        mixed: eps.map(|e| (e, &problem.reaction)),
        reaction: ReactionTerm::Primitive(&problem.reaction),
    };
    let residual = residual_of(&f, &mesh, &x);
    let anomaly = trivial_anomaly(problem, &x);
    let field = DiscreteField::new(mesh, x, true)?;
    Ok(SolveResult {
        max_value: field.max(),
        field,
        final_anisotropy: aniso,
        energy,
        eigenvalue: None,
        residual,
        grad_norm,
        converged: true,
        ladder,
        trace,
        anomaly,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// First Dirichlet eigenpair: minimises `∫H(Du)/∫u^p` over nonnegative fields
/// by nonlinear inverse iteration, normalising `‖u‖_p = 1` (lumped).
pub fn rayleigh_eigen(problem: &EnergyProblem) -> Result<SolveResult> {
    eigen_ladder(problem, None)
}

fn normalize(x: &mut [f64], mass: &[f64], p: f64) {
    let n = mass.iter().zip(x.iter()).map(|(m, v)| m * v.abs().powf(p)).sum::<f64>().powf(1.0 / p);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

fn eigen_ladder(problem: &EnergyProblem, eps: Option<f64>) -> Result<SolveResult> {
    let start = Instant::now();
    let p = problem.p();
    let mesh = problem.mesh.clone();
    let mass = mesh.lumped_mass();
    let mut x = problem.initial_guess().values;
    normalize(&mut x, &mass, p);
    // The mixed integrand uses F(t) = λ t^p / p with the reaction's λ; the
    // quotient itself does not depend on it beyond the ε-term.
    let mut ladder = Vec::new();
    let mut trace = Vec::new();
    let mut last = None;
    for (stage, (eps_n, aniso, ell, ratio)) in rungs(problem)?.into_iter().enumerate() {
        let kinetic = Functional {
            aniso: &aniso,
            mixed: eps.map(|e| (e, &problem.reaction)),
            reaction: ReactionTerm::None,
        };
        let quotient = |x: &[f64]| p * kinetic.energy(&mesh, x);
        let prev_x = x.clone();
        let mut lambda = quotient(&x);
        let mut iterations = 0;
        let mut done = false;
        for k in 0..problem.options.eigen_max_iter {
            iterations = k + 1;
            let rhs: Vec<f64> = x.iter().map(|v| v.max(0.0).powf(p - 1.0)).collect();
            let frozen = Functional { reaction: ReactionTerm::Frozen(&rhs), ..kinetic };
            let guess: Vec<f64> = x.iter().map(|v| v * lambda.powf(-1.0 / (p - 1.0))).collect();
            let out = newton::minimize(&frozen, &mesh, guess, problem.newton_options(true), stage);
            if !out.converged {
                return Err(Error::Convergence {
                    iterations: k,
                    message: format!("inverse iteration step {k} did not converge (gradient {:e})", out.grad_norm),
                });
            }
            let mut next = out.x;
            normalize(&mut next, &mass, p);
            let l_next = quotient(&next);
            let change = max_diff(&next, &x);
            trace.push(TraceEntry { stage, iteration: k, energy: l_next, grad_norm: change, step: 1.0 });
            let stalled = (lambda - l_next).abs() <= problem.options.eigen_tol * lambda;
            // Ties keep the previous iterate.
            if !(stalled && l_next > lambda) {
                x = next;
                lambda = l_next;
            }
            if stalled && change <= 1e-7 {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Convergence {
                iterations,
                message: format!("inverse iteration at rung {stage} did not settle (λ ≈ {lambda})"),
            });
        }
        ladder.push(StageReport {
            eps: eps_n,
            energy: lambda,
            iterations,
            grad_norm: 0.0,
            increment: (stage > 0).then(|| max_diff(&x, &prev_x)),
            ellipticity: ell,
            min_ratio_to_base: ratio,
            eigenvalue: Some(lambda),
        });
        last = Some((aniso, lambda));
    }
    let (aniso, lambda) = last.expect("at least one rung");
    let reaction = Reaction::eigen(lambda, p)?;
    let f = Functional {
        aniso: &aniso,
        mixed: eps.map(|e| (e, &problem.reaction)),
        reaction: ReactionTerm::Primitive(&reaction),
    };
    let (energy, g) = f.energy_gradient(&mesh, &x);
    let grad_norm = mesh.interior_nodes().filter(|&i| x[i] > 0.0 || g[i] < 0.0).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
    let residual = residual_of(&f, &mesh, &x);
    let field = DiscreteField::new(mesh, x, true)?;
    Ok(SolveResult {
        max_value: field.max(),
        field,
        final_anisotropy: aniso,
        energy,
        eigenvalue: Some(lambda),
        residual,
        grad_norm,
        converged: true,
        ladder,
        trace,
        anomaly: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `max_i |∫(D(H/p)(Du), Dφ_i) − f(u)φ_i| / ‖φ_i‖_{L²}` over interior hat
/// functions, with the vertex rule for the reaction. Non-smooth `H` is
/// replaced by its regularisation at the ladder floor.
pub fn residual_el(problem: &EnergyProblem, field: &DiscreteField) -> Result<f64> {
    let aniso = problem.smooth_anisotropy()?;
    let f = Functional { aniso: &aniso, mixed: None, reaction: ReactionTerm::Primitive(&problem.reaction) };
    Ok(residual_of(&f, &problem.mesh, &field.values))
}

/// Weak residual of the Euler-Lagrange equation of `I_ε`.
pub fn residual_el_eps(problem: &EnergyProblem, field: &DiscreteField, eps: f64) -> Result<f64> {
    let aniso = problem.smooth_anisotropy()?;
    let f = Functional {
        aniso: &aniso,
        mixed: Some((eps, &problem.reaction)),
        reaction: ReactionTerm::Primitive(&problem.reaction),
    };
    Ok(residual_of(&f, &problem.mesh, &field.values))
}

/// Residual of the homogeneous equation (`f ≡ 0`) at each node.
pub fn harmonic_residuals(aniso: &Anisotropy, mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let f = Functional { aniso, mixed: None, reaction: ReactionTerm::None };
    let (_, g) = f.energy_gradient(mesh, values);
    let norms = mesh.hat_l2_norms();
    g.iter().zip(&norms).map(|(g, n)| (g / n).abs()).collect()
}

/// Discrete H-harmonic extension: minimises `∫H(Dw)/p` with `w = values` on
/// the `fixed` nodes.
pub fn harmonic_extension(aniso: &Anisotropy, mesh: &Mesh, values: &[f64], fixed: &[bool], tol: f64) -> Result<Vec<f64>> {
    if values.len() != mesh.num_nodes() || fixed.len() != mesh.num_nodes() {
        return Err(Error::Configuration("extension data does not match the mesh".into()));
    }
    let f = Functional { aniso, mixed: None, reaction: ReactionTerm::None };
    let opts = NewtonOptions { tol, max_iter: 200, nonneg: false };
    let out = newton::minimize_fixed(&f, mesh, fixed, values.to_vec(), opts, 0);
    if !out.converged {
        return Err(Error::Convergence {
            iterations: out.iterations,
            message: format!("harmonic extension stalled at gradient {:e}", out.grad_norm),
        });
    }
    Ok(out.x)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalityReport {
    /// `‖argmin J_u − u‖_∞`.
    pub distance: f64,
    /// `J_u(u) − min J_u ≥ 0`.
    pub energy_gap: f64,
    pub critical: bool,
    pub max_value: f64,
    pub min_value: f64,
    pub m_f: f64,
    /// `0 ≤ u ≤ M_f` nodally, up to `bound_tolerance`.
    pub bound_holds: bool,
    pub bound_tolerance: f64,
}

/// Freezes `f(u)` and re-minimises the convex `J_u(v) = ∫H(Dv)/p − f(u)v`
/// over `v ≥ 0` starting from `u`.
pub fn verify_energy_critical(problem: &EnergyProblem, field: &DiscreteField) -> Result<CriticalityReport> {
    let aniso = problem.smooth_anisotropy()?;
    let u = &field.values;
    let rhs: Vec<f64> = u.iter().map(|&v| problem.reaction.f(v)).collect();
    let f = Functional { aniso: &aniso, mixed: None, reaction: ReactionTerm::Frozen(&rhs) };
    let e0 = f.energy(&problem.mesh, u);
    let out = newton::minimize(&f, &problem.mesh, u.clone(), problem.newton_options(true), 0);
    let distance = max_diff(&out.x, u);
    let energy_gap = (e0 - out.energy).max(0.0);
    let scale = field.max_abs().max(out.x.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    let critical = out.converged
        && distance <= 1e-6 * scale.max(1e-300)
        && energy_gap <= problem.options.tol * (1.0 + e0.abs());
    let h = problem.mesh.h();
    let bound_tolerance = (1e-6 * field.max_abs()).max(h * h);
    let m_f = problem.reaction.m_f();
    let (max_value, min_value) = (field.max(), field.min());
    Ok(CriticalityReport {
        distance,
        energy_gap,
        critical,
        max_value,
        min_value,
        m_f,
        bound_holds: min_value >= -bound_tolerance && max_value <= m_f + bound_tolerance,
        bound_tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `None` when the inputs were accepted.
    pub rejected: Option<String>,
    pub holds: bool,
    pub checked_nodes: usize,
    /// `max (lower − upper)` over the subregion.
    pub max_deficit: f64,
    pub tolerance: f64,
    /// `(node, upper, lower)` where `upper < lower − tolerance`.
    pub violations: Vec<(usize, f64, f64)>,
}

/// Checks `upper ≥ lower` on the nodes of `subregion` given that the order
/// holds on its boundary nodes and `lower` is H-harmonic inside (weak
/// residual at most `harmonic_tol`).
pub fn comparison_check(
    problem: &EnergyProblem,
    upper: &DiscreteField,
    lower: &DiscreteField,
    subregion: &[bool],
    harmonic_tol: f64,
) -> Result<ComparisonReport> {
    let mesh = &problem.mesh;
    if subregion.len() != mesh.num_nodes() {
        return Err(Error::Configuration("subregion mask does not match the mesh".into()));
    }
    let tolerance = 1e-6 * upper.max_abs().max(lower.max_abs());
    let neighbors = mesh.node_neighbors();
    let on_rim = |i: usize| mesh.is_boundary(i) || neighbors[i].iter().any(|&j| !subregion[j]);
    let nodes: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| subregion[i]).collect();
    let reject = |why: String| ComparisonReport {
        rejected: Some(why),
        holds: false,
        checked_nodes: 0,
        max_deficit: f64::NAN,
        tolerance,
        violations: Vec::new(),
    };
    if nodes.is_empty() {
        return Ok(reject("empty subregion".into()));
    }
    if let Some(&i) = nodes.iter().find(|&&i| on_rim(i) && lower.values[i] > upper.values[i] + tolerance) {
        return Ok(reject(format!(
            "boundary ordering fails at node {i}: lower {} > upper {}",
            lower.values[i], upper.values[i]
        )));
    }
    let aniso = problem.smooth_anisotropy()?;
    let res = harmonic_residuals(&aniso, mesh, &lower.values);
    if let Some(&i) = nodes.iter().find(|&&i| !on_rim(i) && res[i] > harmonic_tol) {
        return Ok(reject(format!("lower is not harmonic at node {i}: residual {} > {harmonic_tol}", res[i])));
    }
    let mut max_deficit = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for &i in &nodes {
        let d = lower.values[i] - upper.values[i];
        max_deficit = max_deficit.max(d);
        if d > tolerance {
            violations.push((i, upper.values[i], lower.values[i]));
        }
    }
    Ok(ComparisonReport {
        rejected: None,
        holds: violations.is_empty(),
        checked_nodes: nodes.len(),
        max_deficit,
        tolerance,
        violations,
    })
}
