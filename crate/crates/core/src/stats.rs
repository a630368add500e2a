//! Small statistics toolbox for Monte Carlo output: summaries, quantiles,
//! two-sample distances, and compensated summation for long sojourn-time sums.

use std::collections::BTreeMap;

/// Kahan compensated accumulator. Sojourn-time sums can run over 10^9 terms
/// spanning many orders of magnitude; naive summation loses the small terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Summary of one batch of replicate values. Values are sorted on
/// construction, so the aggregate is independent of replicate ordering.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub se_mean: f64,
    /// Normal-approximation standard error of the median, 1.2533 sd / sqrt(n).
    pub se_median: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn from_values(mut values: Vec<f64>) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        let se_mean = sd / (n as f64).sqrt();
        Some(Summary {
            count: n,
            mean,
            sd,
            se_mean,
            se_median: 1.2533 * se_mean,
            median: quantile_sorted(&values, 0.5),
            q10: quantile_sorted(&values, 0.1),
            q90: quantile_sorted(&values, 0.9),
            min: values[0],
            max: values[n - 1],
        })
    }
}

/// Linear-interpolation quantile of an ascending slice (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    quantile_sorted(&v, 0.5)
}

/// Two-sample Kolmogorov-Smirnov statistic, sup |F1 - F2|.
pub fn ks_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(!xs.is_empty() && !ys.is_empty());
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("non-finite sample"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("non-finite sample"));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance past ties together so the CDF gap is always measured
        // between jump points.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    sup
}

/// Total variation distance between two empirical distributions on integer
/// states, each given as state -> count.
pub fn tv_distance(p: &BTreeMap<i64, u64>, q: &BTreeMap<i64, u64>) -> f64 {
    let np: u64 = p.values().sum();
    let nq: u64 = q.values().sum();
    assert!(np > 0 && nq > 0);
    let mut keys: Vec<i64> = p.keys().chain(q.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let mut acc = 0.0;
    for k in keys {
        let pp = *p.get(&k).unwrap_or(&0) as f64 / np as f64;
        let qq = *q.get(&k).unwrap_or(&0) as f64 / nq as f64;
        acc += (pp - qq).abs();
    }
    acc / 2.0
}

/// Standard error of an empirical frequency p over n trials.
pub fn freq_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_keeps_small_terms() {
        let mut k = Kahan::new();
        k.add(1e16);
        for _ in 0..10_000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 10_000.0);
    }

    #[test]
    fn summary_of_identical_values() {
        let s = Summary::from_values(vec![2.0; 10]).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(s.se_mean, 0.0);
        assert_eq!(s.q10, 2.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&v, 0.5), 1.5);
        assert_eq!(quantile_sorted(&v, 0.0), 0.0);
        assert_eq!(quantile_sorted(&v, 1.0), 3.0);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a = vec![0.0, 1.0];
        let b = vec![5.0, 6.0];
        assert_eq!(ks_statistic(&a, &b), 1.0);
    }

    #[test]
    fn tv_distance_of_shifted_point_masses() {
        let mut p = BTreeMap::new();
        let mut q = BTreeMap::new();
        p.insert(0, 10);
        q.insert(1, 10);
        assert_eq!(tv_distance(&p, &q), 1.0);
        assert_eq!(tv_distance(&p, &p), 0.0);
    }
}
