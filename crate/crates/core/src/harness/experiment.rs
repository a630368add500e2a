//! Monte Carlo experiment runner: replicate evaluation, aggregation, and
//! artifact persistence.

use super::config::{resolve_out_dir, ExperimentConfig, OpKind};
use crate::error::{Error, Result};
use crate::gw::{
    phase_statistic, simulate_gw, simulate_gw_conditioned_survival, stage_levels, GwParams, Phase,
    PhaseOptions, StopRule,
};
use crate::house::{
    fixation_time_rescaled, rescale, sup_distance_restricted, transition_levels, House, Line,
};
use crate::m1::m1_distance;
use crate::moran::{
    build_time_changed_pair, simulate_moran_conditioned_fixation, RecordPolicy, SweepPath,
    Terminal,
};
use crate::params::ModelParams;
use crate::pit::{pit_vs_moran_distance, IncrementDist, MultiMoranOptions};
use crate::rng::replicate_rng;
use crate::stats::Summary;
use crate::walks::{
    lil_fluctuation_stat, lil_horizon, log_drawdown_down, log_drawdown_up,
    mutant_embedded_up_prob, simulate_conditioned_walk, LatticePath, DEFAULT_EVENT_CAP,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

pub const TABLE_SCHEMA_VERSION: u32 = 1;
pub const TABLE_CSV_VERSION: u32 = 1;

/// Aggregated statistics of one statistic at one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: u64,
    pub a: f64,
    pub phi: f64,
    pub b: f64,
    pub statistic: String,
    /// Successful replicates behind the summary.
    pub count: u32,
    /// Replicates abandoned at the event cap (excluded from the summary).
    pub capped: u32,
    pub median: f64,
    pub mean: f64,
    pub se_mean: f64,
    pub se_median: f64,
    pub q10: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    /// Rows ordered by grid cell, then statistic name.
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Distinct statistic names, sorted.
    pub fn statistics(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.statistic.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Rows of one statistic in increasing N order.
    pub fn rows_for(&self, statistic: &str) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> =
            self.rows.iter().filter(|r| r.statistic == statistic).collect();
        rows.sort_by_key(|r| r.n);
        rows
    }

    /// Deterministic CSV rendering: fixed row order, shortest round-trip
    /// floats.
    pub fn csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# result-table-csv v{TABLE_CSV_VERSION}\n"));
        out.push_str(&format!("# experiment={}\n", self.experiment));
        if let Some(s) = &self.statement {
            out.push_str(&format!("# statement={s}\n"));
        }
        out.push_str(
            "n,a,phi,b,statistic,count,capped,median,mean,se_mean,se_median,q10,q90,min,max\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.a,
                r.phi,
                r.b,
                r.statistic,
                r.count,
                r.capped,
                r.median,
                r.mean,
                r.se_mean,
                r.se_median,
                r.q10,
                r.q90,
                r.min,
                r.max
            ));
        }
        out
    }
}

/// Everything a finished experiment leaves behind.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: ExperimentConfig,
    pub table: ResultTable,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub table: ResultTable,
    pub warnings: Vec<String>,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// One replicate of the configured op. Returns (statistic name, value)
/// pairs; the RNG stream is owned by the (cell, replicate) pair, so the
/// result is independent of scheduling.
fn evaluate<R: Rng>(
    op: &OpKind,
    params: &ModelParams,
    gamma: Option<&IncrementDist>,
    rng: &mut R,
) -> Result<Vec<(&'static str, f64)>> {
    match op {
        OpKind::SweepFixationTime => {
            let pair = sample_fixation_pair(params, rng)?;
            Ok(vec![("sigma_fix", fixation_time_rescaled(&pair, params)?)])
        }
        OpKind::SweepShape { eps, m1_tol, per_unit } => {
            let (l23, l34) = transition_levels(params);
            let record = RecordPolicy::log_crossings(params.n(), *per_unit, &[l23, l34]);
            let path = simulate_moran_conditioned_fixation(params, &record, rng)?;
            let house = House::from_params(params)?;
            let window = house.default_window();
            let mut sup = 0.0f64;
            let mut m1 = 0.0f64;
            for which in [Line::Mutant, Line::Resident] {
                let emp = rescale(&path, params, which, window)?;
                let profile = house.to_cadlag(which, window)?;
                sup = sup.max(sup_distance_restricted(&emp, &profile, which, *eps, &house)?);
                m1 = m1.max(m1_distance(&emp, &profile, *m1_tol)?.upper);
            }
            Ok(vec![("m1_upper", m1), ("sup_restricted", sup)])
        }
        OpKind::PhaseDeviations => {
            let opts = PhaseOptions::default();
            let mut out = Vec::with_capacity(5);
            for phase in [Phase::One, Phase::Two, Phase::Three, Phase::Four, Phase::Five] {
                let name = match phase {
                    Phase::One => "phase_1",
                    Phase::Two => "phase_2",
                    Phase::Three => "phase_3",
                    Phase::Four => "phase_4",
                    Phase::Five => "phase_5",
                };
                out.push((name, phase_statistic(phase, params, &opts, rng)?));
            }
            Ok(out)
        }
        OpKind::WalkFunctionals { beta } => {
            let n = params.n();
            let p = mutant_embedded_up_prob(params.s());
            let w = simulate_conditioned_walk(p, 1, n, rng)?;
            let up = log_drawdown_up(&w, n)?;
            // The resident side of the same sweep descends from N-1 to 0.
            let resident: Vec<i32> =
                w.values().iter().map(|&x| (n as i64 - x as i64) as i32).collect();
            let down = log_drawdown_down(&LatticePath::new(resident)?, n)?;
            let lil = lil_fluctuation_stat(lil_horizon(n, *beta), n, rng)?;
            Ok(vec![
                ("drawdown_down", down),
                ("drawdown_up", up),
                ("lil_fluctuation", lil),
            ])
        }
        OpKind::PitDistance { lambda, horizon, m1_tol } => {
            let gamma =
                gamma.ok_or_else(|| Error::Config("pit_distance needs grid.gamma".into()))?;
            let distances = pit_vs_moran_distance(
                params,
                *lambda,
                gamma,
                *horizon,
                *m1_tol,
                &MultiMoranOptions::default(),
                rng,
            )?;
            let resident = distances[0].bracket.upper;
            let worst = distances.iter().map(|d| d.bracket.upper).fold(0.0, f64::max);
            Ok(vec![("pit_m1_resident", resident), ("pit_m1_upper", worst)])
        }
    }
}

/// Time-changed branching pair conditioned on the sweep completing: the
/// mutant leg is conditioned to reach the junction, the resident leg retried
/// until it is absorbed rather than regrowing to N.
pub fn sample_fixation_pair<R: Rng>(params: &ModelParams, rng: &mut R) -> Result<SweepPath> {
    let stages = stage_levels(params);
    let n = params.n();
    let junction = stages.high;
    if junction == 0 || junction >= n {
        return Err(Error::invalid("population too small for the stage decomposition"));
    }
    let mutant = GwParams::mutant(params)?;
    let resident = GwParams::resident(params)?;
    for _ in 0..64 {
        let z1 = simulate_gw_conditioned_survival(
            &mutant,
            &StopRule::hit_level(junction).with_cap(DEFAULT_EVENT_CAP),
            rng,
        )?;
        let z0 = simulate_gw(
            &resident,
            n - junction,
            &StopRule::hit_level(n).with_cap(DEFAULT_EVENT_CAP),
            rng,
        )?;
        let pair = build_time_changed_pair(&z1, &z0, params)?;
        if matches!(pair.terminal(), Terminal::Fixation) {
            return Ok(pair);
        }
    }
    Err(Error::PathContract(
        "resident leg regrew to N in 64 consecutive attempts".into(),
    ))
}

struct CellOutcome {
    values: BTreeMap<&'static str, Vec<f64>>,
    capped: u32,
    failed: u32,
    first_error: Option<String>,
}

/// Runs the whole grid. Replicates are independent ChaCha streams keyed by
/// (cell, replicate), evaluated in parallel, and aggregated from sorted
/// samples, so the table is identical for every thread count. Artifacts are
/// persisted as CSV plus a JSON summary embedding the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let (table, warnings) = compute_table(config)?;
    let dir = resolve_out_dir(None, config);
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join(format!("{}.csv", config.id));
    let json_path = dir.join(format!("{}.json", config.id));
    std::fs::write(&csv_path, table.csv_string())?;
    let artifact =
        RunArtifact { config: config.clone(), table: table.clone(), warnings: warnings.clone() };
    let mut buf = Vec::new();
    serde_json::to_writer_pretty(&mut buf, &artifact)
        .map_err(|e| Error::Format(format!("artifact encode: {e}")))?;
    buf.push(b'\n');
    std::fs::write(&json_path, buf)?;
    Ok(ExperimentRun { table, warnings, csv_path, json_path })
}

/// The aggregation half of [`run_experiment`], without touching the
/// filesystem.
pub fn compute_table(config: &ExperimentConfig) -> Result<(ResultTable, Vec<String>)> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    if config.replicates == 0 {
        warnings.push("replicates = 0: table is empty".to_string());
    }
    let cells: Vec<ModelParams> = (0..config.grid.n.len())
        .map(|i| config.cell_params(i))
        .collect::<Result<_>>()?;
    if config.grid.n.len() > u32::MAX as usize {
        return Err(Error::Config("grid too large".into()));
    }

    for (cell_idx, params) in cells.iter().enumerate() {
        if config.replicates == 0 {
            continue;
        }
        let outcome = run_cell(config, cell_idx, params)?;
        if outcome.capped > 0 {
            warnings.push(format!(
                "cell n={}: {} replicate(s) hit the event cap; summaries are partial",
                params.n(),
                outcome.capped
            ));
        }
        if outcome.failed > 0 {
            warnings.push(format!(
                "cell n={}: {} replicate(s) failed: {}",
                params.n(),
                outcome.failed,
                outcome.first_error.as_deref().unwrap_or("unknown error")
            ));
        }
        if outcome.values.values().all(|v| v.is_empty()) {
            warnings.push(format!("cell n={}: no successful replicates", params.n()));
            continue;
        }
        for (name, mut values) in outcome.values {
            values.sort_by(f64::total_cmp);
            let summary = match Summary::from_values(values) {
                Some(s) => s,
                None => continue,
            };
            rows.push(ResultRow {
                n: params.n(),
                a: params.a(),
                phi: params.phi(),
                b: params.b(),
                statistic: name.to_string(),
                count: summary.count as u32,
                capped: outcome.capped,
                median: summary.median,
                mean: summary.mean,
                se_mean: summary.se_mean,
                se_median: summary.se_median,
                q10: summary.q10,
                q90: summary.q90,
                min: summary.min,
                max: summary.max,
            });
        }
    }
    let table = ResultTable {
        schema_version: TABLE_SCHEMA_VERSION,
        experiment: config.id.clone(),
        statement: config.statement.clone(),
        rows,
    };
    Ok((table, warnings))
}

fn run_cell(config: &ExperimentConfig, cell_idx: usize, params: &ModelParams) -> Result<CellOutcome> {
    let gamma = config.grid.gamma.as_ref();
    let results: Vec<Result<Vec<(&'static str, f64)>>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(config.seed, cell_idx as u32, rep);
            evaluate(&config.op, params, gamma, &mut rng)
        })
        .collect();
    let mut outcome = CellOutcome {
        values: BTreeMap::new(),
        capped: 0,
        failed: 0,
        first_error: None,
    };
    for res in results {
        match res {
            Ok(stats) => {
                for (name, value) in stats {
                    outcome.values.entry(name).or_default().push(value);
                }
            }
            Err(Error::EventCapExceeded { .. }) => outcome.capped += 1,
            Err(e) => {
                outcome.failed += 1;
                outcome.first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    Ok(outcome)
}

/// Writes the table CSV to an arbitrary writer (the persisted file uses the
/// same bytes).
pub fn write_table_csv<W: Write>(table: &ResultTable, mut w: W) -> Result<()> {
    w.write_all(table.csv_string().as_bytes())?;
    Ok(())
}

/// Reads a persisted JSON artifact back.
pub fn read_artifact(path: &std::path::Path) -> Result<RunArtifact> {
    let text = std::fs::read_to_string(path)?;
    let artifact: RunArtifact = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("artifact decode {}: {e}", path.display())))?;
    if artifact.table.schema_version != TABLE_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "table schema v{} not supported",
            artifact.table.schema_version
        )));
    }
    Ok(artifact)
}
