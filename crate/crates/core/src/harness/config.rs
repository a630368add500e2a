//! Experiment configuration schema.

use crate::error::{Error, Result};
use crate::params::{ModelParams, ScalingRule};
use crate::pit::IncrementDist;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "SWEEPHOUSE_OUT_DIR";

/// The per-replicate computation an experiment runs. Each op emits one or
/// more named statistics per replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpKind {
    /// Rescaled duration of the time-changed branching sweep pair.
    /// Statistic: `sigma_fix`.
    SweepFixationTime,
    /// Conditioned sweep recorded at level crossings, rescaled, and compared
    /// to the limit profile. Statistics: `sup_restricted` (sup distance off
    /// the wall times, margin `eps`) and `m1_upper`.
    SweepShape { eps: f64, m1_tol: f64, per_unit: u32 },
    /// Passage-time and shape statistics of the five sweep stages.
    /// Statistics: `phase_1` .. `phase_5`.
    PhaseDeviations,
    /// Conditioned-walk functionals. Statistics: `drawdown_up`,
    /// `drawdown_down`, and `lil_fluctuation` (driftless walk run to
    /// horizon N^beta).
    WalkFunctionals { beta: f64 },
    /// Multi-type run compared to the deterministic trajectory system driven
    /// by the empirical contender marks. Statistics: `pit_m1_upper` (max
    /// over compared families) and `pit_m1_resident`.
    PitDistance { lambda: f64, horizon: f64, m1_tol: f64 },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::SweepFixationTime => "sweep_fixation_time",
            OpKind::SweepShape { .. } => "sweep_shape",
            OpKind::PhaseDeviations => "phase_deviations",
            OpKind::WalkFunctionals { .. } => "walk_functionals",
            OpKind::PitDistance { .. } => "pit_distance",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OpKind::SweepFixationTime | OpKind::PhaseDeviations => Ok(()),
            OpKind::SweepShape { eps, m1_tol, per_unit } => {
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(Error::invalid(format!("eps = {eps} must be positive")));
                }
                if !(*m1_tol > 0.0 && m1_tol.is_finite()) {
                    return Err(Error::invalid(format!("m1_tol = {m1_tol} must be positive")));
                }
                if *per_unit == 0 {
                    return Err(Error::invalid("per_unit must be >= 1"));
                }
                Ok(())
            }
            OpKind::WalkFunctionals { beta } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::invalid(format!("beta = {beta} must be positive")));
                }
                Ok(())
            }
            OpKind::PitDistance { lambda, horizon, m1_tol } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid(format!("lambda = {lambda} must be >= 0")));
                }
                if !(*horizon > 0.0 && horizon.is_finite()) {
                    return Err(Error::invalid(format!("horizon = {horizon} must be positive")));
                }
                if !(*m1_tol > 0.0 && m1_tol.is_finite()) {
                    return Err(Error::invalid(format!("m1_tol = {m1_tol} must be positive")));
                }
                Ok(())
            }
        }
    }
}

/// Parameter grid; one cell per population size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: Vec<u64>,
    pub a: f64,
    pub scaling: ScalingRule,
    /// Fitness-increment distribution, required by ops that mutate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<IncrementDist>,
}

/// Target and pass criteria for one statistic's convergence verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTolerance {
    /// Limit the medians should approach.
    pub target: f64,
    /// Largest admissible |median - target| at the largest N; None skips the
    /// final-gap check (trend-only verdict).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Whether a FAIL verdict fails the run. Non-gating verdicts are
    /// reported but do not affect exit status.
    #[serde(default = "default_true")]
    pub gate: bool,
}

fn default_true() -> bool {
    true
}

impl Default for StatTolerance {
    fn default() -> Self {
        StatTolerance { target: 0.0, threshold: None, gate: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub id: String,
    /// Name of the claim the experiment probes; carried into artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    pub op: OpKind,
    pub grid: GridSpec,
    pub replicates: u32,
    pub seed: u64,
    /// Output directory; falls back to SWEEPHOUSE_OUT_DIR, then
    /// "sweephouse-out".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Verdict tolerances keyed by statistic name; unlisted statistics get
    /// target 0, no threshold, gating on.
    #[serde(default)]
    pub tolerances: BTreeMap<String, StatTolerance>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema v{} not supported (expected v{CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::Config(format!(
                "experiment id {:?} must be a nonempty [A-Za-z0-9_-]+ token",
                self.id
            )));
        }
        if self.grid.n.is_empty() {
            return Err(Error::Config("grid has no population sizes".into()));
        }
        if !self.grid.n.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("grid sizes must be strictly increasing".into()));
        }
        self.op.validate()?;
        for &n in &self.grid.n {
            self.grid.scaling.params(n, self.grid.a)?;
        }
        if let Some(g) = &self.grid.gamma {
            g.validate()?;
        }
        if matches!(self.op, OpKind::PitDistance { .. }) && self.grid.gamma.is_none() {
            return Err(Error::Config("pit_distance needs grid.gamma".into()));
        }
        for (name, tol) in &self.tolerances {
            if !tol.target.is_finite() {
                return Err(Error::Config(format!("tolerance {name}: target must be finite")));
            }
            if let Some(t) = tol.threshold {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::Config(format!("tolerance {name}: threshold must be positive")));
                }
            }
        }
        Ok(())
    }

    pub fn cell_params(&self, idx: usize) -> Result<ModelParams> {
        let n = *self
            .grid
            .n
            .get(idx)
            .ok_or_else(|| Error::Config(format!("no grid cell {idx}")))?;
        self.grid.scaling.params(n, self.grid.a)
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(format!("config encode: {e}")))
    }

    pub fn tolerance_for(&self, statistic: &str) -> StatTolerance {
        self.tolerances.get(statistic).cloned().unwrap_or_default()
    }
}

/// Output directory resolution order: explicit override, config, env var,
/// then "sweephouse-out".
pub fn resolve_out_dir(flag: Option<&std::path::Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &config.out_dir {
        return p.clone();
    }
    if let Ok(p) = std::env::var(OUT_DIR_ENV) {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from("sweephouse-out")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "demo".into(),
            statement: None,
            op: OpKind::SweepFixationTime,
            grid: GridSpec {
                n: vec![100, 1000, 10_000],
                a: 1.0,
                scaling: ScalingRule::Power { b: 0.2 },
                gamma: None,
            },
            replicates: 4,
            seed: 7,
            out_dir: None,
            tolerances: BTreeMap::new(),
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut config = minimal();
        config.statement = Some("sweep-duration-limit".into());
        config.tolerances.insert(
            "sigma_fix".into(),
            StatTolerance { target: 1.6, threshold: Some(0.32), gate: true },
        );
        let text = config.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut c = minimal();
        c.grid.n = vec![];
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.grid.n = vec![1000, 1000];
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.schema_version = 99;
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.id = "bad id!".into();
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.op = OpKind::PitDistance { lambda: 1.0, horizon: 2.0, m1_tol: 0.05 };
        assert!(c.validate().is_err(), "pit op without gamma must be rejected");
    }

    #[test]
    fn out_dir_resolution_order() {
        let mut config = minimal();
        assert_eq!(
            resolve_out_dir(Some(std::path::Path::new("/tmp/x")), &config),
            PathBuf::from("/tmp/x")
        );
        config.out_dir = Some(PathBuf::from("cfg-dir"));
        assert_eq!(resolve_out_dir(None, &config), PathBuf::from("cfg-dir"));
    }
}
