use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fpl_core::anisotropy::Smoothness;
use fpl_core::barrier::{hopf_slope_check, HopfReport};
use fpl_core::concavity::{
    kennington_hypothesis_check, korevaar_boundary_check, max_concavity_violation_field, transformed_field,
    ConcavityReport, KenningtonReport, KorevaarReport,
};
use fpl_core::reaction::{
    brezis_oswald_check, check_hypotheses, default_grid, Existence, ExistenceReport, HypothesisReport, PhiTransform,
    Reaction,
};
use fpl_core::solver::{
    minimize_j, rayleigh_eigen, verify_energy_critical, CriticalityReport, DiscreteField, EnergyProblem, SolveResult,
};
use fpl_core::{Error, Vec2};
use serde::Serialize;

use crate::config::{ExperimentConfig, TransformKind};
use crate::svg;

/// Floor of `u` (relative to its maximum) before applying the transform.
const TRANSFORM_FLOOR: f64 = 1e-8;
const HYPOTHESIS_GRID: usize = 400;
const HOPF_SAMPLES: usize = 64;
const COARSE_EIGEN_FLOOR: f64 = 1e-2;
/// Contour levels drawn in the SVG plots.
const CONTOURS: usize = 12;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Hypotheses,
    Existence,
    Solve,
    Criticality,
    Transform,
    Concavity,
    Boundary,
    Artifacts,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Hypotheses => "hypotheses",
            Stage::Existence => "existence",
            Stage::Solve => "solve",
            Stage::Criticality => "criticality",
            Stage::Transform => "transform",
            Stage::Concavity => "concavity",
            Stage::Boundary => "boundary",
            Stage::Artifacts => "artifacts",
        }
    }
}

/// An error tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {} failed: {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for fpl_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.scan.seed = seed;
        }
        if let Some(h) = self.h {
            cfg.h = h;
        }
    }

    /// Output directory: `--out`, else the config's `output`, else
    /// `out/<name>`.
    pub fn output_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        match (&self.out, &cfg.output) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => dir.clone(),
            (None, None) => Path::new("out").join(&cfg.name),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshSummary {
    pub h: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub min_angle_deg: f64,
}

/// `report.json`. Everything except `timing` is a deterministic function of
/// the config and seed.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub mesh: MeshSummary,
    pub smoothness: Smoothness,
    pub hypotheses: HypothesisReport,
    pub existence: Option<ExistenceReport>,
    pub solve: serde_json::Value,
    pub lambda_1: Option<f64>,
    pub max_u: f64,
    pub center_of_mass: Vec2,
    pub criticality: Option<CriticalityReport>,
    pub transform: TransformKind,
    pub concavity: Option<ConcavityReport>,
    pub korevaar: Option<KorevaarReport>,
    pub hopf: Option<HopfReport>,
    pub kennington: Option<KenningtonReport>,
    /// Outcome of every enabled check.
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
    /// Wall-clock seconds per stage.
    pub timing: BTreeMap<String, f64>,
}

impl ExperimentReport {
    /// The report as JSON with `timing` removed, for reproducibility checks.
    pub fn deterministic_json(&self) -> serde_json::Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v)
    }
}

/// The fields computed by a run, kept for artifact writing and tests.
pub struct RunOutput {
    pub report: ExperimentReport,
    pub u: DiscreteField,
    pub v: DiscreteField,
}

struct Timer {
    laps: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Timer { laps: BTreeMap::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.laps.insert(stage.name().into(), (now - self.last).as_secs_f64());
        self.last = now;
    }
}

fn stage_fail(stage: Stage, msg: String) -> StageError {
    StageError { stage, error: Error::Precondition(msg) }
}

fn hypotheses_hold(rep: &HypothesisReport, smoothness: Smoothness) -> Result<(), String> {
    let mut failed = Vec::new();
    if !rep.root_concave.passed {
        failed.push("F^{1/p} concave");
    }
    if !rep.ratio_convex.passed {
        failed.push("F/f convex");
    }
    if !rep.normalized_nonincreasing.passed {
        failed.push("f(t)/t^{p-1} non-increasing");
    }
    if smoothness == Smoothness::Crystalline && !rep.strict_concavity.passed {
        failed.push("F(t^{1/p}) strictly concave");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(failed.join(", "))
    }
}

/// First eigenvalue on a coarse mesh for the existence check. Crystalline
/// anisotropies stop the ladder at `COARSE_EIGEN_FLOOR`; the verdict only
/// needs `λ_1` up to a few percent.
fn coarse_lambda_1(problem: &EnergyProblem, h: f64) -> fpl_core::Result<f64> {
    let coarse_h = (2.0 * h).max(0.05).min(0.25 * problem.domain().inradius());
    let reaction = Reaction::eigen(1.0, problem.p())?;
    let mut opts = *problem.options();
    opts.ladder.floor = opts.ladder.floor.max(COARSE_EIGEN_FLOOR);
    let coarse =
        EnergyProblem::build(problem.anisotropy().clone(), reaction, problem.domain().clone(), coarse_h, opts)?;
    let res = rayleigh_eigen(&coarse)?;
    res.eigenvalue.ok_or_else(|| Error::Numeric("eigen solve returned no eigenvalue".into()))
}

fn solve_summary(res: &SolveResult, timer: &mut BTreeMap<String, f64>) -> serde_json::Value {
    let mut v = serde_json::to_value(res).unwrap_or(serde_json::Value::Null);
    if let Some(obj) = v.as_object_mut() {
        obj.remove("wall_time_s");
        obj.remove("trace");
        let iterations = res.trace.len();
        obj.insert("iterations".into(), iterations.into());
    }
    timer.insert("solver_wall".into(), res.wall_time_s);
    v
}

/// Runs the full pipeline without writing artifacts.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunOutput, StageError> {
    let mut timer = Timer::new();
    cfg.validate().at(Stage::Config)?;
    let aniso = cfg.anisotropy.build().at(Stage::Config)?;
    let p = aniso.p();
    let smoothness = aniso.smoothness();
    let reaction = cfg.reaction.build(p).at(Stage::Config)?;
    let is_eigen = reaction.is_eigen();
    let problem = EnergyProblem::build(aniso, reaction.clone(), cfg.domain.clone(), cfg.h, cfg.solver)
        .at(Stage::Config)?;
    let mesh = problem.mesh().clone();
    let mesh_summary = MeshSummary {
        h: cfg.h,
        nodes: mesh.num_nodes(),
        triangles: mesh.num_triangles(),
        min_angle_deg: mesh.min_angle_deg(),
    };
    timer.lap(Stage::Config);

    let hypotheses = check_hypotheses(&reaction, &default_grid(&reaction, HYPOTHESIS_GRID));
    hypotheses_hold(&hypotheses, smoothness)
        .map_err(|what| stage_fail(Stage::Hypotheses, format!("structural conditions fail: {what}")))?;
    timer.lap(Stage::Hypotheses);

    let existence = if is_eigen {
        None
    } else {
        let lambda_1 = coarse_lambda_1(&problem, cfg.h).at(Stage::Existence)?;
        let rep = brezis_oswald_check(&reaction, lambda_1);
        if rep.verdict != Existence::Exists {
            return Err(stage_fail(
                Stage::Existence,
                format!("no nontrivial solution: μ_0 = {}, μ_∞ = {}, λ_1 ≈ {}", rep.mu_0, rep.mu_inf, rep.lambda_1),
            ));
        }
        Some(rep)
    };
    timer.lap(Stage::Existence);

    let result = if is_eigen { rayleigh_eigen(&problem) } else { minimize_j(&problem) }.at(Stage::Solve)?;
    let u = result.field.clone();
    let lambda_1 = result.eigenvalue;
    let mut checks = BTreeMap::new();
    checks.insert("solve_converged".to_string(), result.converged);
    timer.lap(Stage::Solve);

    // Eigen runs continue with the computed eigenvalue in the reaction.
    let problem = match lambda_1 {
        Some(l) if is_eigen => problem.with_reaction(Reaction::eigen(l, p).at(Stage::Solve)?).at(Stage::Solve)?,
        _ => problem,
    };

    let criticality = if cfg.checks.criticality {
        let rep = verify_energy_critical(&problem, &u).at(Stage::Criticality)?;
        checks.insert("critical".into(), rep.critical);
        checks.insert("bounds".into(), rep.bound_holds);
        Some(rep)
    } else {
        None
    };
    timer.lap(Stage::Criticality);

    let transform = PhiTransform::new(problem.reaction().clone());
    let v = match cfg.transform {
        TransformKind::Phi => transformed_field(&u, &transform, TRANSFORM_FLOOR).at(Stage::Transform)?,
        TransformKind::Identity => u.clone(),
    };
    timer.lap(Stage::Transform);

    let concavity = if cfg.checks.concavity {
        let region = cfg.domain.inner_domain(0.5 * cfg.delta).at(Stage::Concavity)?;
        let rep = max_concavity_violation_field(&v, &region, &cfg.scan).at(Stage::Concavity)?;
        let ok = if cfg.checks.expect_violation { rep.max_violation > rep.tolerance } else { rep.passed };
        checks.insert("concavity".into(), ok);
        Some(rep)
    } else {
        None
    };
    timer.lap(Stage::Concavity);

    let korevaar = if cfg.checks.boundary {
        let rep = korevaar_boundary_check(&v, &cfg.domain, cfg.delta).at(Stage::Boundary)?;
        checks.insert("korevaar".into(), rep.passed);
        Some(rep)
    } else {
        None
    };
    let hopf = if cfg.checks.hopf {
        let samples = cfg.domain.boundary_samples(HOPF_SAMPLES, cfg.delta);
        let rep = hopf_slope_check(&problem, &u, &samples).at(Stage::Boundary)?;
        checks.insert("hopf".into(), rep.passed);
        Some(rep)
    } else {
        None
    };
    let kennington = if cfg.checks.kennington && cfg.transform == TransformKind::Phi {
        let range = (v.min(), v.max());
        let rep = kennington_hypothesis_check(&problem, &transform, range, cfg.kennington_eps).at(Stage::Boundary)?;
        checks.insert("kennington".into(), rep.passed);
        Some(rep)
    } else {
        None
    };
    timer.lap(Stage::Boundary);

    let passed = checks.values().all(|&b| b);
    let solve = solve_summary(&result, &mut timer.laps);
    let report = ExperimentReport {
        name: cfg.name.clone(),
        seed: cfg.scan.seed,
        config: cfg.clone(),
        mesh: mesh_summary,
        smoothness,
        hypotheses,
        existence,
        solve,
        lambda_1,
        max_u: u.max(),
        center_of_mass: u.center_of_mass(),
        criticality,
        transform: cfg.transform,
        concavity,
        korevaar,
        hopf,
        kennington,
        checks,
        passed,
        timing: timer.laps,
    };
    Ok(RunOutput { report, u, v })
}

fn create(dir: &Path, name: &str) -> fpl_core::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `report.json`, field and mesh CSVs, the worst triples and SVG
/// contour plots of `u` and `v` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> fpl_core::Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&out.report)?;
    fs::write(dir.join("report.json"), json + "\n")?;
    let mesh = out.u.mesh();
    mesh.write_nodes_csv(create(dir, "nodes.csv")?)?;
    mesh.write_triangles_csv(create(dir, "triangles.csv")?)?;
    out.u.write_csv(create(dir, "u.csv")?)?;
    out.v.write_csv(create(dir, "v.csv")?)?;
    if let Some(c) = &out.report.concavity {
        c.write_worst_csv(create(dir, "worst_triples.csv")?)?;
    }
    let domain = &out.report.config.domain;
    fs::write(dir.join("u.svg"), svg::contour_svg(&out.u, domain, CONTOURS, "u"))?;
    let label = match out.report.transform {
        TransformKind::Phi => "φ(u)",
        TransformKind::Identity => "u",
    };
    fs::write(dir.join("v.svg"), svg::contour_svg(&out.v, domain, CONTOURS, label))?;
    Ok(())
}

/// Runs the pipeline and writes artifacts. The report's `passed` decides the
/// exit status.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutput, StageError> {
    let out = run_pipeline(cfg)?;
    write_artifacts(&out, dir).at(Stage::Artifacts)?;
    Ok(out)
}
