use std::path::{Path, PathBuf};

use fpl_core::anisotropy::AnisotropySpec;
use fpl_core::concavity::ScanOptions;
use fpl_core::domain::ConvexDomain;
use fpl_core::reaction::ReactionSpec;
use fpl_core::solver::SolverOptions;
use fpl_core::{Error, Result, Vec2};
use serde::{Deserialize, Serialize};

/// Transform applied to `u` before the concavity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// The transform `φ` built from the reaction.
    #[default]
    Phi,
    /// `u` itself.
    Identity,
}

/// Which post-solve checks run; all enabled by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Checks {
    pub criticality: bool,
    pub concavity: bool,
    pub boundary: bool,
    pub hopf: bool,
    pub kennington: bool,
    /// Whether a concavity violation counts as success (negative controls).
    pub expect_violation: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { criticality: true, concavity: true, boundary: true, hopf: true, kennington: true, expect_violation: false }
    }
}

/// Hopf barrier section used by the `barrier` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierConfig {
    pub center: Vec2,
    pub r: f64,
    pub m: f64,
    pub n: u32,
    /// Mesh sizes for the refinement study, coarse to fine.
    pub h: Vec<f64>,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { center: Vec2::ZERO, r: 1.0, m: 1.0, n: 2, h: vec![0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: ConvexDomain,
    pub anisotropy: AnisotropySpec,
    pub reaction: ReactionSpec,
    pub h: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub scan: ScanOptions,
    /// Strip width; the concavity scan runs on `Ω_{δ/2}`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub transform: TransformKind,
    /// `ε` at which the transformed-equation hypotheses are evaluated.
    #[serde(default = "default_kennington_eps")]
    pub kennington_eps: f64,
    /// Mollification radius used by the probes and barrier commands when
    /// the anisotropy is crystalline.
    #[serde(default = "default_probe_eps")]
    pub probe_eps: f64,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_kennington_eps() -> f64 {
    1e-2
}

fn default_probe_eps() -> f64 {
    1e-2
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Configuration(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Cross-field checks that parsing alone cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Configuration(format!("invalid experiment name {:?}", self.name)));
        }
        if !(self.h > 0.0) {
            return Err(Error::Configuration(format!("mesh size h = {} must be positive", self.h)));
        }
        if !(self.anisotropy.p > 1.0) {
            return Err(Error::Configuration(format!("exponent p = {} must exceed 1", self.anisotropy.p)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Configuration(format!("δ = {} must be positive", self.delta)));
        }
        if !(self.kennington_eps > 0.0) || !(self.probe_eps > 0.0) {
            return Err(Error::Configuration("kennington_eps and probe_eps must be positive".into()));
        }
        if let Some(b) = &self.barrier {
            if !(b.r > 0.0 && b.m > 0.0) || b.n < 2 || b.h.is_empty() || b.h.iter().any(|h| !(*h > 0.0)) {
                return Err(Error::Configuration(format!("invalid barrier section {b:?}")));
            }
        }
        if self.scan.pairs == 0 || self.scan.t_steps < 3 {
            return Err(Error::Configuration("scan needs pairs > 0 and t_steps ≥ 3".into()));
        }
        // Shared p: the reaction is built with the anisotropy's exponent.
        self.reaction.build(self.anisotropy.p)?;
        self.anisotropy.build()?;
        self.solver.ladder.values()?;
        Ok(())
    }
}
