use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiment::{run_experiment, Overrides, Stage};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error { stage: String, message: String },
}

impl Status {
    fn label(&self) -> String {
        match self {
            Status::Pass => "pass".into(),
            Status::Fail => "fail".into(),
            Status::Error { stage, .. } => format!("error:{stage}"),
        }
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    /// `lambda_1` for eigen runs, `max_u` otherwise.
    pub quantity: &'static str,
    pub value: f64,
    pub max_violation: f64,
    pub tolerance: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub rows: Vec<SummaryRow>,
    pub summary: PathBuf,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Pass)
    }
}

/// `*.json` files directly inside `dir`, sorted by name.
pub fn config_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_one(path: &Path, out_root: &Path, overrides: &Overrides) -> SummaryRow {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let error_row = |stage: Stage, message: String, experiment: String| SummaryRow {
        experiment,
        quantity: "max_u",
        value: f64::NAN,
        max_violation: f64::NAN,
        tolerance: f64::NAN,
        status: Status::Error { stage: stage.name().into(), message },
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return error_row(Stage::Config, e.to_string(), stem),
    };
    overrides.apply(&mut cfg);
    let dir = out_root.join(&cfg.name);
    match run_experiment(&cfg, &dir) {
        Ok(out) => {
            let r = &out.report;
            let (quantity, value) = match r.lambda_1 {
                Some(l) => ("lambda_1", l),
                None => ("max_u", r.max_u),
            };
            let (max_violation, tolerance) =
                r.concavity.as_ref().map_or((f64::NAN, f64::NAN), |c| (c.max_violation, c.tolerance));
            SummaryRow {
                experiment: cfg.name.clone(),
                quantity,
                value,
                max_violation,
                tolerance,
                status: if r.passed { Status::Pass } else { Status::Fail },
            }
        }
        Err(e) => error_row(e.stage, e.error.to_string(), cfg.name.clone()),
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "experiment,quantity,value,max_violation,tolerance,status")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.experiment,
            r.quantity,
            num(r.value),
            num(r.max_violation),
            num(r.tolerance),
            r.status.label()
        )?;
    }
    Ok(())
}

/// Runs every config in `dir` (in parallel, reported in file order) and
/// writes `summary.csv` under the output root.
pub fn run_suite(dir: &Path, overrides: &Overrides) -> std::io::Result<SuiteOutcome> {
    let files = config_files(dir)?;
    let out_root = overrides.out.clone().unwrap_or_else(|| Path::new("out").join("suite"));
    // Per-experiment directories live below the root, so `--out` must not
    // be forwarded as a single experiment directory.
    let inner = Overrides { out: None, ..overrides.clone() };
    let rows: Vec<SummaryRow> = files.par_iter().map(|f| run_one(f, &out_root, &inner)).collect();
    fs::create_dir_all(&out_root)?;
    let summary = out_root.join("summary.csv");
    write_summary(&rows, std::io::BufWriter::new(fs::File::create(&summary)?))?;
    Ok(SuiteOutcome { rows, summary })
}
