//! Convergence verdicts: monotone-trend plus final-gap tests over a result
//! table.

use super::config::StatTolerance;
use super::experiment::ResultTable;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Ratio between the asymptotic standard errors of the 90th percentile and
/// the median under a normal density approximation.
const Q90_SE_RATIO: f64 = 1.7103 / 1.2533;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub statistic: String,
    pub target: f64,
    pub threshold: Option<f64>,
    /// Whether a FAIL here should fail the run.
    pub gate: bool,
    pub points: usize,
    /// Median gaps |median - target| shrink along N, one combined SE of
    /// slack per step.
    pub median_monotone: bool,
    /// Same trend for the 90th percentile; checked only against target 0
    /// (true otherwise).
    pub q90_monotone: bool,
    /// |median - target| at the largest N.
    pub final_gap: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn line(&self) -> String {
        let status = match (self.pass, self.gate) {
            (true, true) => "PASS",
            (false, true) => "FAIL",
            (true, false) => "pass (report-only)",
            (false, false) => "fail (report-only)",
        };
        let gap = match self.threshold {
            Some(t) => format!("final gap {:.4} vs threshold {:.4}", self.final_gap, t),
            None => format!("final gap {:.4} (trend-only)", self.final_gap),
        };
        format!(
            "[{status}] {}: target {}, median trend {}, q90 trend {}, {gap}",
            self.statistic,
            self.target,
            if self.median_monotone { "ok" } else { "broken" },
            if self.q90_monotone { "ok" } else { "broken" },
        )
    }
}

/// Evaluates every statistic in the table against its tolerance entry
/// (unlisted statistics get target 0, no threshold, gating on).
///
/// PASS requires at least 3 grid points, median gaps to the target
/// nonincreasing along N up to one combined standard error of slack per
/// step, the same for the 90th percentile when the target is 0, and the
/// final median gap at most the threshold when one is set.
pub fn convergence_report(
    table: &ResultTable,
    tolerances: &BTreeMap<String, StatTolerance>,
) -> Result<Vec<Verdict>> {
    let stats = table.statistics();
    if stats.is_empty() {
        return Err(Error::invalid("result table has no rows to report on"));
    }
    let mut verdicts = Vec::with_capacity(stats.len());
    for stat in stats {
        let rows = table.rows_for(&stat);
        if rows.len() < 3 {
            return Err(Error::invalid(format!(
                "statistic {stat}: {} grid points, need at least 3",
                rows.len()
            )));
        }
        let tol = tolerances.get(&stat).cloned().unwrap_or_default();
        let gaps: Vec<f64> = rows.iter().map(|r| (r.median - tol.target).abs()).collect();
        let mut median_monotone = true;
        for i in 0..gaps.len() - 1 {
            let slack = rows[i].se_median.hypot(rows[i + 1].se_median);
            if gaps[i + 1] > gaps[i] + slack {
                median_monotone = false;
            }
        }
        let mut q90_monotone = true;
        if tol.target == 0.0 {
            for i in 0..rows.len() - 1 {
                let se_i = rows[i].se_median * Q90_SE_RATIO;
                let se_j = rows[i + 1].se_median * Q90_SE_RATIO;
                if rows[i + 1].q90 > rows[i].q90 + se_i.hypot(se_j) {
                    q90_monotone = false;
                }
            }
        }
        let final_gap = *gaps.last().unwrap();
        let gap_ok = tol.threshold.map_or(true, |t| final_gap <= t);
        verdicts.push(Verdict {
            statistic: stat,
            target: tol.target,
            threshold: tol.threshold,
            gate: tol.gate,
            points: rows.len(),
            median_monotone,
            q90_monotone,
            final_gap,
            pass: median_monotone && q90_monotone && gap_ok,
        });
    }
    Ok(verdicts)
}

/// True when every gating verdict passed.
pub fn all_gates_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.pass || !v.gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{ResultRow, TABLE_SCHEMA_VERSION};

    fn row(n: u64, stat: &str, median: f64, se: f64, q90: f64) -> ResultRow {
        ResultRow {
            n,
            a: 1.0,
            phi: 0.1,
            b: 0.2,
            statistic: stat.into(),
            count: 100,
            capped: 0,
            median,
            mean: median,
            se_mean: se / 1.2533,
            se_median: se,
            q10: median / 2.0,
            q90,
            min: 0.0,
            max: q90 * 2.0,
        }
    }

    fn table(rows: Vec<ResultRow>) -> ResultTable {
        ResultTable {
            schema_version: TABLE_SCHEMA_VERSION,
            experiment: "t".into(),
            statement: None,
            rows,
        }
    }

    #[test]
    fn decreasing_below_threshold_passes() {
        let t = table(vec![
            row(1000, "s", 0.30, 0.01, 0.5),
            row(10_000, "s", 0.20, 0.01, 0.35),
            row(100_000, "s", 0.12, 0.01, 0.2),
        ]);
        let tol = BTreeMap::from([(
            "s".to_string(),
            StatTolerance { target: 0.0, threshold: Some(0.15), gate: true },
        )]);
        let verdicts = convergence_report(&t, &tol).unwrap();
        assert_eq!(verdicts.len(), 1);
        assert!(verdicts[0].pass, "{}", verdicts[0].line());
        assert!(all_gates_pass(&verdicts));
    }

    #[test]
    fn constant_medians_above_threshold_fail() {
        let t = table(vec![
            row(1000, "s", 0.30, 0.001, 0.4),
            row(10_000, "s", 0.30, 0.001, 0.4),
            row(100_000, "s", 0.30, 0.001, 0.4),
        ]);
        let tol = BTreeMap::from([(
            "s".to_string(),
            StatTolerance { target: 0.0, threshold: Some(0.15), gate: true },
        )]);
        let verdicts = convergence_report(&t, &tol).unwrap();
        // Flat is monotone within slack, but the final gap misses.
        assert!(verdicts[0].median_monotone);
        assert!(!verdicts[0].pass);
        assert!(!all_gates_pass(&verdicts));
    }

    #[test]
    fn increase_beyond_slack_breaks_trend() {
        let t = table(vec![
            row(1000, "s", 0.10, 0.001, 0.2),
            row(10_000, "s", 0.20, 0.001, 0.3),
            row(100_000, "s", 0.05, 0.001, 0.1),
        ]);
        let verdicts = convergence_report(&t, &BTreeMap::new()).unwrap();
        assert!(!verdicts[0].median_monotone);
        assert!(!verdicts[0].pass);
    }

    #[test]
    fn nonzero_target_measures_gap_from_both_sides() {
        let t = table(vec![
            row(1000, "sigma", 2.4, 0.02, 2.9),
            row(10_000, "sigma", 1.95, 0.02, 2.3),
            row(100_000, "sigma", 1.7, 0.02, 1.9),
        ]);
        let tol = BTreeMap::from([(
            "sigma".to_string(),
            StatTolerance { target: 1.6, threshold: Some(0.32), gate: true },
        )]);
        let verdicts = convergence_report(&t, &tol).unwrap();
        assert!(verdicts[0].pass, "{}", verdicts[0].line());
        // Approaching from below works the same way.
        let t = table(vec![
            row(1000, "sigma", 1.0, 0.02, 1.2),
            row(10_000, "sigma", 1.3, 0.02, 1.5),
            row(100_000, "sigma", 1.5, 0.02, 1.6),
        ]);
        let verdicts = convergence_report(&t, &tol).unwrap();
        assert!(verdicts[0].pass, "{}", verdicts[0].line());
    }

    #[test]
    fn two_points_is_an_error_and_report_only_does_not_gate() {
        let t = table(vec![row(1000, "s", 0.3, 0.01, 0.4), row(10_000, "s", 0.2, 0.01, 0.3)]);
        assert!(convergence_report(&t, &BTreeMap::new()).is_err());

        let t = table(vec![
            row(1000, "s", 0.10, 0.001, 0.2),
            row(10_000, "s", 0.30, 0.001, 0.4),
            row(100_000, "s", 0.50, 0.001, 0.6),
        ]);
        let tol = BTreeMap::from([(
            "s".to_string(),
            StatTolerance { target: 0.0, threshold: None, gate: false },
        )]);
        let verdicts = convergence_report(&t, &tol).unwrap();
        assert!(!verdicts[0].pass);
        assert!(all_gates_pass(&verdicts), "non-gating FAIL must not gate");
        assert!(verdicts[0].line().contains("report-only"));
    }
}
