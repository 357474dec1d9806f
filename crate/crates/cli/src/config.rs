use std::collections::BTreeMap;
use std::path::PathBuf;

use dgff::levelset::ScheduleRule;
use dgff::{CenteringSchedule, ContinuumDomain, DyadicSquare, SamplerKind};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Levelset,
    Chaos,
    VerifyPotential,
    Compare,
}

fn unit_square() -> ContinuumDomain {
    ContinuumDomain::unit_square()
}
fn one() -> usize {
    1
}
fn default_r() -> u32 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_depth() -> u32 {
    dgff::chaos::DEFAULT_DEPTH
}
fn default_grid() -> usize {
    dgff::chaos::DEFAULT_GRID
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "unit_square")]
    pub domain: ContinuumDomain,
    #[serde(default)]
    pub lambda: f64,
    #[serde(rename = "N", alias = "n", default)]
    pub n: Vec<u32>,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// Profile radius of the point measure.
    #[serde(default = "default_r")]
    pub r: u32,
    #[serde(default)]
    pub schedule: ScheduleRule,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schedule_values: BTreeMap<u32, f64>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// Extraction offset: atoms have `h >= a_N + b`.
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_depth")]
    pub depth: u32,
    /// Chaos pixels per side of the dyadic square.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub write_fields: bool,
    #[serde(default)]
    pub render: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        serde_json::from_value(serde_json::json!({ "kind": kind })).expect("defaults deserialize")
    }

    pub fn schedule(&self) -> Result<CenteringSchedule> {
        Ok(match self.schedule {
            ScheduleRule::Canonical => CenteringSchedule::canonical(self.lambda)?,
            ScheduleRule::Custom => CenteringSchedule::custom(self.lambda, self.schedule_values.clone())?,
        })
    }

    /// The dyadic square equal to `domain`, if it is one.
    pub fn dyadic_root(&self) -> Result<DyadicSquare> {
        let bad = || CliError::Config("chaos runs need a dyadic square domain".into());
        let ContinuumDomain::Square { x0, y0, side } = self.domain else { return Err(bad()) };
        let n = -side.log2();
        if n < 0.0 || n.fract() != 0.0 {
            return Err(bad());
        }
        let (k, l) = (x0 / side, y0 / side);
        if k.fract() != 0.0 || l.fract() != 0.0 {
            return Err(bad());
        }
        Ok(DyadicSquare { k: k as i64, l: l as i64, n: n as u32 })
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CliError::Config(m));
        self.domain.validate()?;
        let levelset = matches!(self.kind, ExperimentKind::Levelset | ExperimentKind::Compare);
        let chaos = matches!(self.kind, ExperimentKind::Chaos | ExperimentKind::Compare);
        if levelset || chaos {
            if self.replicas < 1 {
                return err("replicas must be >= 1".into());
            }
        }
        if levelset {
            if !(self.lambda > 0.0 && self.lambda < 1.0) {
                return err(format!("lambda must lie in (0, 1), got {}", self.lambda));
            }
            if self.n.is_empty() {
                return err("N list is empty".into());
            }
            if let Some(n) = self.n.iter().find(|n| **n < 8) {
                return err(format!("N values must be >= 8, got {n}"));
            }
            if self.r > 16 {
                return err(format!("profile radius {} is too large", self.r));
            }
            self.schedule()?;
        }
        if chaos {
            if !(self.lambda >= 0.0 && self.lambda < 1.0) {
                return err(format!("lambda must lie in [0, 1), got {}", self.lambda));
            }
            self.dyadic_root()?;
            if !self.grid.is_power_of_two() || self.grid < 2 {
                return err(format!("grid must be a power of two, got {}", self.grid));
            }
            if self.depth < 1 || self.depth > self.grid.trailing_zeros() {
                return err(format!("depth must lie in 1..={}", self.grid.trailing_zeros()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub source: String,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    pub replica: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seeds: Vec<SeedEntry>,
    pub files: Vec<String>,
}
