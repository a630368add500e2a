//! Shipped experiment presets. Each maps to one named claim about the
//! scaling limits; thresholds are the documented desk-scale gates.

use super::config::{ExperimentConfig, GridSpec, OpKind, StatTolerance, CONFIG_SCHEMA_VERSION};
use crate::params::ScalingRule;
use crate::pit::IncrementDist;
use std::collections::BTreeMap;

pub const PRESET_NAMES: &[&str] = &[
    "sweep-duration",
    "sweep-shape",
    "phase-deviations",
    "walk-functionals",
    "clonal-distance",
];

fn grid_b02() -> GridSpec {
    GridSpec {
        n: vec![1_000, 10_000, 100_000],
        a: 1.0,
        scaling: ScalingRule::Power { b: 0.2 },
        gamma: None,
    }
}

fn tol(target: f64, threshold: Option<f64>, gate: bool) -> StatTolerance {
    StatTolerance { target, threshold, gate }
}

/// Returns the named preset, or None for an unknown name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let config = match name {
        "sweep-duration" => ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "sweep-duration".into(),
            statement: Some("sweep-duration-limit".into()),
            op: OpKind::SweepFixationTime,
            grid: grid_b02(),
            replicates: 200,
            seed: 202,
            out_dir: None,
            // The rescaled duration tends to 2(1-b)/a = 1.6 on this grid;
            // the gate allows 20% at the largest N.
            tolerances: BTreeMap::from([(
                "sigma_fix".to_string(),
                tol(1.6, Some(0.32), true),
            )]),
        },
        "sweep-shape" => ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "sweep-shape".into(),
            statement: Some("house-shape-limit".into()),
            op: OpKind::SweepShape { eps: 0.1, m1_tol: 0.02, per_unit: 100 },
            grid: grid_b02(),
            replicates: 200,
            seed: 102,
            out_dir: None,
            tolerances: BTreeMap::from([
                ("sup_restricted".to_string(), tol(0.0, Some(0.30), true)),
                ("m1_upper".to_string(), tol(0.0, Some(0.15), true)),
            ]),
        },
        "phase-deviations" => ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "phase-deviations".into(),
            statement: Some("stage-decomposition-bounds".into()),
            op: OpKind::PhaseDeviations,
            grid: grid_b02(),
            replicates: 200,
            seed: 103,
            out_dir: None,
            tolerances: BTreeMap::from([
                // The phase-one delay stabilizes in distribution instead of
                // vanishing; its trend is reported, not gated.
                ("phase_1".to_string(), tol(0.0, None, false)),
                ("phase_2".to_string(), tol(0.0, None, true)),
                // The phase-three ratio has skeleton ln(sqrt(ln N) - 1) /
                // sqrt(ln N), which keeps rising until N ~ 10^9 before it
                // decays to 0; on this grid the trend is reported, not gated.
                ("phase_3".to_string(), tol(0.0, None, false)),
                ("phase_4".to_string(), tol(0.0, None, true)),
                ("phase_5".to_string(), tol(0.0, None, true)),
            ]),
        },
        "walk-functionals" => ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "walk-functionals".into(),
            statement: Some("passage-fluctuation-bounds".into()),
            // beta = 1.5 keeps the driftless horizon N^beta tractable at
            // N = 10^5 while still growing superlinearly.
            op: OpKind::WalkFunctionals { beta: 1.5 },
            grid: grid_b02(),
            replicates: 500,
            seed: 104,
            out_dir: None,
            tolerances: BTreeMap::from([
                ("drawdown_up".to_string(), tol(0.0, None, true)),
                ("drawdown_down".to_string(), tol(0.0, None, true)),
                ("lil_fluctuation".to_string(), tol(0.0, None, true)),
            ]),
        },
        "clonal-distance" => ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            id: "clonal-distance".into(),
            statement: Some("interacting-trajectories-limit".into()),
            op: OpKind::PitDistance { lambda: 1.0, horizon: 2.5, m1_tol: 0.05 },
            grid: GridSpec {
                n: vec![1_000, 10_000, 100_000],
                a: 1.0,
                scaling: ScalingRule::Power { b: 0.3 },
                gamma: Some(IncrementDist::unit_pair()),
            },
            replicates: 50,
            seed: 105,
            out_dir: None,
            // The limit here is not settled; trends are reported, never gated.
            tolerances: BTreeMap::from([
                ("pit_m1_upper".to_string(), tol(0.0, None, false)),
                ("pit_m1_resident".to_string(), tol(0.0, None, false)),
            ]),
        },
        _ => return None,
    };
    Some(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_names_a_statement() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&config.id, name);
            assert!(config.statement.is_some(), "{name} lacks a statement");
            assert!(config.grid.n.len() >= 3, "{name} grid too small for verdicts");
            let text = config.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(config, back, "{name} does not round-trip through TOML");
        }
        assert!(preset("no-such-preset").is_none());
    }

    #[test]
    fn preset_seeds_are_distinct() {
        let mut seeds: Vec<u64> = PRESET_NAMES.iter().map(|n| preset(n).unwrap().seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), PRESET_NAMES.len());
    }
}
