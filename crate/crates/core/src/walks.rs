//! Nearest-neighbour random walks conditioned to stay positive, their
//! Doob h-transforms, path functionals, and logarithmic drawdown statistics.
//!
//! The conditioned walk with upward bias p > 1/2 moves up from state k with
//! probability (1 - r^(k+1)) / ((1 + r)(1 - r^k)), r = (1-p)/p. The driftless
//! analogue (h(k) = k) moves up with probability (k+1)/(2k). Both are pinned
//! to step up from 0.

use crate::error::{Error, Result};
use crate::stats::Kahan;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

/// Default horizon exponent for the fluctuation statistic: the walk needs
/// n^beta steps with beta > 2 to have reached level n with high probability.
pub const DEFAULT_LIL_BETA: f64 = 2.5;

/// A nearest-neighbour path on the integers: consecutive entries differ by
/// exactly 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath(Vec<i32>);

impl LatticePath {
    pub fn new(values: Vec<i32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty lattice path"));
        }
        for w in values.windows(2) {
            if (w[1] - w[0]).abs() != 1 {
                return Err(Error::invalid(format!(
                    "non-unit step {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(LatticePath(values))
    }

    pub fn values(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a valid path has at least one state
    }

    /// Number of steps (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.0.len() - 1
    }
}

/// Up-step probability of the mutant count's embedded jump chain: selection
/// strength s = a * phi gives p = (1+s)/(2+s).
pub fn mutant_embedded_up_prob(s: f64) -> f64 {
    (1.0 + s) / (2.0 + s)
}

/// Up-step probability of the resident count's embedded jump chain: 1/(2+s).
pub fn resident_embedded_up_prob(s: f64) -> f64 {
    1.0 / (2.0 + s)
}

fn check_p(p: f64) -> Result<f64> {
    if p > 0.5 && p < 1.0 {
        Ok((1.0 - p) / p)
    } else {
        Err(Error::invalid(format!("bias p = {p} outside (1/2, 1)")))
    }
}

/// Up-step probability from state k of the biased walk conditioned to stay
/// positive forever. State 0 steps up with probability 1.
pub fn h_transform_up_prob(k: u64, p: f64) -> Result<f64> {
    let r = check_p(p)?;
    if k <= 1 {
        // At 0 the walk has nowhere else to go; at 1 the down-step would hit
        // the forbidden state, so both probabilities are exactly 1.
        return Ok(1.0);
    }
    let lr = (1.0 - p).ln() - p.ln(); // ln r < 0
    // 1 - r^k = -expm1(k ln r); stable for r near 1 and exact once r^k
    // underflows (both factors saturate to 1 and the ratio tends to p).
    let num = -f64::exp_m1((k + 1) as f64 * lr);
    let den = -f64::exp_m1(k as f64 * lr);
    Ok(num / ((1.0 + r) * den))
}

/// Up-step probability from state k of the driftless walk conditioned to stay
/// positive: (k+1)/(2k), and 1 from state 0.
pub fn bessel_up_prob(k: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        (k as f64 + 1.0) / (2.0 * k as f64)
    }
}

/// Checks that the conditioned biased walk dominates the driftless one:
/// strictly larger up-step probability for every 2 <= k <= k_max. At k = 1
/// both probabilities equal 1, so only equality is required there.
pub fn drift_dominates(p: f64, k_max: u64) -> Result<bool> {
    check_p(p)?;
    if k_max == 0 {
        return Err(Error::invalid("k_max must be >= 1"));
    }
    if h_transform_up_prob(1, p)? != bessel_up_prob(1) {
        return Ok(false);
    }
    let lr = (1.0 - p).ln() - p.ln();
    for k in 2..=k_max {
        // Compare logarithms; each side is assembled from ln/expm1 so the
        // sign of the gap survives r^k underflow. ln(1 + r) = ln(1/p) = -ln p.
        let lhs = (-f64::exp_m1((k + 1) as f64 * lr)).ln() + p.ln()
            - (-f64::exp_m1(k as f64 * lr)).ln();
        let rhs = ((k + 1) as f64).ln() - (2.0 * k as f64).ln();
        if lhs <= rhs {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Simulates the conditioned walk from `start` until it first reaches
/// `target`. The walk never returns to 0, so the hitting time is a.s. finite.
pub fn simulate_conditioned_walk<R: Rng>(
    p: f64,
    start: u64,
    target: u64,
    rng: &mut R,
) -> Result<LatticePath> {
    check_p(p)?;
    if start >= target {
        return Err(Error::invalid("start must lie below target"));
    }
    let probs = ConditionedUpProbs::new(p)?;
    let mut values = Vec::with_capacity(2 * (target - start) as usize);
    let mut k = start;
    values.push(k as i32);
    let mut events: u64 = 0;
    while k < target {
        events += 1;
        if events > DEFAULT_EVENT_CAP {
            return Err(Error::EventCapExceeded {
                cap: DEFAULT_EVENT_CAP,
            });
        }
        if rng.random::<f64>() < probs.get(k) {
            k += 1;
        } else {
            k -= 1;
        }
        values.push(k as i32);
    }
    Ok(LatticePath(values))
}

/// Simulates the driftless conditioned walk for exactly `steps` steps.
pub fn simulate_bessel<R: Rng>(start: u64, steps: u64, rng: &mut R) -> Result<LatticePath> {
    let mut values = Vec::with_capacity(steps as usize + 1);
    let mut k = start;
    values.push(k as i32);
    for _ in 0..steps {
        if k == 0 || rng.random::<f64>() < bessel_up_prob(k) {
            k += 1;
        } else {
            k -= 1;
        }
        values.push(k as i32);
    }
    Ok(LatticePath(values))
}

/// Simulates the driftless conditioned walk from `start` until it first
/// reaches `target` (a.s. finite; expected duration is of order target^2).
pub fn simulate_bessel_until<R: Rng>(
    start: u64,
    target: u64,
    cap: u64,
    rng: &mut R,
) -> Result<LatticePath> {
    if start >= target {
        return Err(Error::invalid("start must lie below target"));
    }
    let mut values = Vec::new();
    let mut k = start;
    values.push(k as i32);
    let mut events: u64 = 0;
    while k < target {
        events += 1;
        if events > cap {
            return Err(Error::EventCapExceeded { cap });
        }
        if k == 0 || rng.random::<f64>() < bessel_up_prob(k) {
            k += 1;
        } else {
            k -= 1;
        }
        values.push(k as i32);
    }
    Ok(LatticePath(values))
}

/// Plain biased walk (up with probability p) from `start`, absorbed at 0 or
/// at `hi` if given.
pub fn simulate_walk<R: Rng>(
    p: f64,
    start: u64,
    hi: Option<u64>,
    cap: u64,
    rng: &mut R,
) -> Result<LatticePath> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("step probability p = {p} outside (0, 1)")));
    }
    if let Some(h) = hi {
        if start > h {
            return Err(Error::invalid("start lies above the upper barrier"));
        }
    }
    let mut values = Vec::new();
    let mut k = start as i64;
    values.push(k as i32);
    let mut events: u64 = 0;
    while k > 0 && hi.map_or(true, |h| k < h as i64) {
        events += 1;
        if events > cap {
            return Err(Error::EventCapExceeded { cap });
        }
        if rng.random::<f64>() < p {
            k += 1;
        } else {
            k -= 1;
        }
        values.push(k as i32);
    }
    Ok(LatticePath(values))
}

/// Precomputed conditioned up-step probabilities: dense table for small
/// states, constant p above it, where the table is already flat to machine
/// precision because r^k has underflowed.
pub struct ConditionedUpProbs {
    p: f64,
    table: Vec<f64>,
}

const UP_PROB_TABLE: usize = 4096;

impl ConditionedUpProbs {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        let table = (0..UP_PROB_TABLE as u64)
            .map(|k| h_transform_up_prob(k, p).expect("validated p"))
            .collect();
        Ok(ConditionedUpProbs { p, table })
    }

    #[inline]
    pub fn get(&self, k: u64) -> f64 {
        if (k as usize) < self.table.len() {
            self.table[k as usize]
        } else {
            self.p
        }
    }
}

/// Index reversal for excursion paths: a path from K down to 0 that never
/// returns to K maps to a path from 0 up to K that never returns to 0.
pub fn reverse_path(w: &LatticePath) -> Result<LatticePath> {
    let v = w.values();
    let k = v[0];
    let last = *v.last().unwrap();
    if k < 1 || last != 0 {
        return Err(Error::PathContract(format!(
            "expected a path from some K >= 1 down to 0, got {k} -> {last}"
        )));
    }
    for &x in &v[1..v.len() - 1] {
        if x < 1 || x >= k {
            return Err(Error::PathContract(format!(
                "interior state {x} outside [1, {}]",
                k - 1
            )));
        }
    }
    Ok(LatticePath(v.iter().rev().copied().collect()))
}

/// Hitting times, return times, last visits before the first zero, and the
/// running maximum before the first zero.
#[derive(Clone, Debug, Default)]
pub struct PathFunctionals {
    /// tau[k]: first index at which the path equals k.
    pub tau: BTreeMap<i32, usize>,
    /// tau_plus[k]: first index >= 1 at which the path equals k.
    pub tau_plus: BTreeMap<i32, usize>,
    /// sigma[k]: last visit of k strictly before the first zero. Present only
    /// if the path hits 0.
    pub sigma: Option<BTreeMap<i32, usize>>,
    /// Maximum value attained before the first zero. Present only if the path
    /// hits 0.
    pub s_max: Option<i32>,
}

pub fn path_functionals(w: &LatticePath) -> PathFunctionals {
    let v = w.values();
    let mut f = PathFunctionals::default();
    for (i, &x) in v.iter().enumerate() {
        f.tau.entry(x).or_insert(i);
        if i >= 1 {
            f.tau_plus.entry(x).or_insert(i);
        }
    }
    let first_zero = v.iter().position(|&x| x == 0);
    if let Some(z) = first_zero {
        if v[0] == 0 {
            // A path that starts at 0: nothing happens strictly before it.
            f.sigma = Some(BTreeMap::new());
            f.s_max = Some(0);
            return f;
        }
        let mut sigma = BTreeMap::new();
        let mut s_max = i32::MIN;
        for (i, &x) in v.iter().enumerate().take(z + 1) {
            sigma.insert(x, i);
            if i < z {
                s_max = s_max.max(x);
            }
        }
        f.sigma = Some(sigma);
        f.s_max = Some(s_max);
    }
    f
}

#[inline]
fn log_base(x: f64, ln_n: f64) -> f64 {
    x.ln() / ln_n
}

/// Drawdown of an ascending passage in logarithmic scale: for every level k
/// first hit by the path, the deepest dip below k before level k+1 is first
/// hit, measured as log_N k - log_N w(n); returns the maximum over k.
pub fn log_drawdown_up(w: &LatticePath, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("log base requires N >= 2"));
    }
    let v = w.values();
    if v.iter().skip(1).any(|&x| x < 1) || *v.last().unwrap() < v[0] {
        return Err(Error::PathContract(
            "expected a positive path ascending to its final level".into(),
        ));
    }
    let ln_n = (n as f64).ln();
    let mut best: f64 = 0.0;
    let mut level = v[0]; // current record level k with tau_k already passed
    let mut window_min = v[0];
    for &x in &v[1..] {
        if x > level {
            // tau_{k+1} reached: close the window for k.
            if level >= 1 && window_min >= 1 {
                best = best.max(log_base(level as f64, ln_n) - log_base(window_min as f64, ln_n));
            }
            level = x;
            window_min = x;
        } else {
            window_min = window_min.min(x);
        }
    }
    if level >= 1 && window_min >= 1 {
        best = best.max(log_base(level as f64, ln_n) - log_base(window_min as f64, ln_n));
    }
    Ok(best)
}

/// Drawdown of a descending passage in logarithmic scale, measured against
/// last visits: the dip below the pre-zero maximum S before its last visit,
/// and for each level k the dip below k between the last visits of k and
/// k-1; returns the largest of all of these.
pub fn log_drawdown_down(w: &LatticePath, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("log base requires N >= 2"));
    }
    let f = path_functionals(w);
    let (sigma, s_max) = match (f.sigma, f.s_max) {
        (Some(s), Some(m)) => (s, m),
        _ => {
            return Err(Error::Undefined(
                "descending drawdown requires the path to hit 0".into(),
            ))
        }
    };
    if s_max < 1 {
        return Ok(0.0);
    }
    let v = w.values();
    let ln_n = (n as f64).ln();
    let mut best: f64 = 0.0;

    let sigma_of = |k: i32| -> Result<usize> {
        sigma
            .get(&k)
            .copied()
            .ok_or_else(|| Error::Undefined(format!("level {k} not visited before the first zero")))
    };

    // The deepest dip below level k over a window is attained at the window
    // minimum, so each window costs one log pair.
    let mut dip = |k: i32, window: &[i32]| {
        if let Some(&m) = window.iter().min() {
            best = best.max(log_base(k as f64, ln_n) - log_base(m as f64, ln_n));
        }
    };
    // Dip before the last visit of the maximum.
    let sig_s = sigma_of(s_max)?;
    dip(s_max, &v[..sig_s]);
    // Dips between consecutive last visits on the way down.
    for k in (1..=s_max).rev() {
        let lo = sigma_of(k)?;
        let hi = sigma_of(k - 1)?;
        dip(k, &v[lo..hi]);
    }
    Ok(best)
}

/// Suggested horizon n_max = N^beta for `lil_fluctuation_stat`.
pub fn lil_horizon(n: u64, beta: f64) -> u64 {
    (n as f64).powf(beta).round() as u64
}

/// One replicate of the fluctuation statistic of the driftless conditioned
/// walk started at 0: sup over 1 <= j <= n_max of
/// |log_N W*(j) - log_N sqrt(j)|.
///
/// The horizon is N^beta steps, so the loop stays log-free: dev(j, k) > sup
/// iff k^2 leaves [j e^{-2 sup ln N}, j e^{2 sup ln N}], checked with bounds
/// padded so rounding can only add spurious exact re-evaluations.
pub fn lil_fluctuation_stat<R: Rng>(n_max: u64, n: u64, rng: &mut R) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("log base requires N >= 2"));
    }
    if n_max == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let ln_n = (n as f64).ln();
    // Up-step thresholds on raw u64 draws, floor((k+1)/(2k) * 2^64); the
    // table grows with the running maximum of the walk.
    let mut thresh: Vec<u64> = vec![u64::MAX, u64::MAX];
    let mut k: u64 = 0;
    let mut sup: f64 = 0.0;
    let mut hi = 1.0 - 1e-9;
    let mut lo = 1.0 + 1e-9;
    for j in 1..=n_max {
        if k == 0 || rng.random::<u64>() < thresh[k as usize] {
            k += 1;
            if k as usize >= thresh.len() {
                let t = (((k + 1) as u128) << 64) / (2 * k as u128);
                thresh.push(t as u64);
            }
        } else {
            k -= 1;
            if k == 0 {
                continue;
            }
        }
        let k2 = (k * k) as f64;
        let jf = j as f64;
        if k2 > jf * hi || k2 < jf * lo {
            let dev = ((k as f64).ln() - 0.5 * jf.ln()).abs() / ln_n;
            if dev > sup {
                sup = dev;
                hi = (2.0 * sup * ln_n).exp() * (1.0 - 1e-9);
                lo = (-2.0 * sup * ln_n).exp() * (1.0 + 1e-9);
            }
        }
    }
    Ok(sup)
}

/// First index at which the path reaches `level`, if any.
pub fn first_passage(w: &LatticePath, level: i32) -> Option<usize> {
    w.values().iter().position(|&x| x == level)
}

/// Kahan-summed total of f64 samples; exposed for long accumulations in
/// callers that fold over path statistics.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = Kahan::new();
    for v in values {
        k.add(v);
    }
    k.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn lattice_path_rejects_non_unit_steps() {
        assert!(LatticePath::new(vec![0, 2]).is_err());
        assert!(LatticePath::new(vec![]).is_err());
        assert!(LatticePath::new(vec![3, 2, 3, 4]).is_ok());
    }

    #[test]
    fn h_transform_is_certain_from_one() {
        for p in [0.51, 0.6, 0.75, 0.9, 0.999] {
            assert_eq!(h_transform_up_prob(1, p).unwrap(), 1.0);
        }
    }

    #[test]
    fn h_transform_hand_value_at_two() {
        // p = 2/3 gives r = 1/2: (1 - 1/8) / ((3/2)(3/4)) = 7/9.
        let got = h_transform_up_prob(2, 2.0 / 3.0).unwrap();
        assert!((got - 7.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn h_transform_tends_to_p() {
        let got = h_transform_up_prob(60, 0.7).unwrap();
        assert!((got - 0.7).abs() < 1e-9);
        // Far beyond underflow of r^k the value is exactly p.
        let far = h_transform_up_prob(10_000_000, 0.51).unwrap();
        assert!((far - 0.51).abs() < 1e-15);
    }

    #[test]
    fn h_transform_requires_upward_bias() {
        assert!(h_transform_up_prob(3, 0.5).is_err());
        assert!(h_transform_up_prob(3, 0.2).is_err());
        assert!(h_transform_up_prob(3, 1.0).is_err());
    }

    #[test]
    fn bessel_up_probs() {
        assert_eq!(bessel_up_prob(0), 1.0);
        assert_eq!(bessel_up_prob(1), 1.0);
        assert_eq!(bessel_up_prob(2), 0.75);
        assert!((bessel_up_prob(1_000_000) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn drift_dominates_moderate_biases() {
        for p in [0.51, 0.55, 0.7, 0.95] {
            assert!(drift_dominates(p, 2_000).unwrap());
        }
    }

    #[test]
    fn drift_equality_at_one() {
        // Both walks are pinned upward at k = 1; strict domination starts at 2.
        for p in [0.51, 0.8] {
            assert_eq!(h_transform_up_prob(1, p).unwrap(), bessel_up_prob(1));
            let h2 = h_transform_up_prob(2, p).unwrap();
            assert!(h2 > bessel_up_prob(2));
        }
    }

    #[test]
    fn conditioned_walk_reaches_target_and_stays_positive() {
        let mut rng = seeded_rng(1);
        let w = simulate_conditioned_walk(0.7, 1, 50, &mut rng).unwrap();
        assert_eq!(*w.values().last().unwrap(), 50);
        assert!(w.values().iter().all(|&x| x >= 1));
    }

    #[test]
    fn conditioned_walk_from_zero_steps_up() {
        let mut rng = seeded_rng(2);
        let w = simulate_conditioned_walk(0.6, 0, 5, &mut rng).unwrap();
        assert_eq!(w.values()[0], 0);
        assert_eq!(w.values()[1], 1);
        assert!(w.values().iter().skip(1).all(|&x| x >= 1));
    }

    #[test]
    fn bessel_walk_never_returns_to_zero() {
        let mut rng = seeded_rng(3);
        let w = simulate_bessel(0, 20_000, &mut rng).unwrap();
        assert!(w.values().iter().skip(1).all(|&x| x >= 1));
        assert_eq!(w.steps(), 20_000);
    }

    #[test]
    fn plain_walk_absorbs() {
        let mut rng = seeded_rng(4);
        let w = simulate_walk(0.3, 10, None, 1_000_000, &mut rng).unwrap();
        assert_eq!(*w.values().last().unwrap(), 0);
        let w2 = simulate_walk(0.8, 1, Some(30), 1_000_000, &mut rng).unwrap();
        let last = *w2.values().last().unwrap();
        assert!(last == 0 || last == 30);
    }

    #[test]
    fn reverse_path_swaps_endpoints() {
        let w = LatticePath::new(vec![1, 0]).unwrap();
        assert_eq!(reverse_path(&w).unwrap().values(), &[0, 1]);

        let w = LatticePath::new(vec![3, 2, 1, 2, 1, 0]).unwrap();
        let r = reverse_path(&w).unwrap();
        assert_eq!(r.values(), &[0, 1, 2, 1, 2, 3]);
    }

    #[test]
    fn reverse_path_rejects_returns_to_start() {
        // Interior visit of the starting level is a return.
        let w = LatticePath::new(vec![2, 1, 2, 1, 0]).unwrap();
        assert!(reverse_path(&w).is_err());
        // Must end at 0.
        let w = LatticePath::new(vec![2, 1]).unwrap();
        assert!(reverse_path(&w).is_err());
    }

    #[test]
    fn functionals_on_hand_path() {
        let w = LatticePath::new(vec![2, 1, 2, 1, 0]).unwrap();
        let f = path_functionals(&w);
        assert_eq!(f.tau[&1], 1);
        assert_eq!(f.tau[&0], 4);
        assert_eq!(f.tau_plus[&2], 2);
        let sigma = f.sigma.unwrap();
        assert_eq!(sigma[&2], 2);
        assert_eq!(sigma[&1], 3);
        assert_eq!(sigma[&0], 4);
        assert_eq!(f.s_max.unwrap(), 2);
    }

    #[test]
    fn functionals_without_zero() {
        let w = LatticePath::new(vec![1, 2, 3]).unwrap();
        let f = path_functionals(&w);
        assert!(f.sigma.is_none());
        assert!(f.s_max.is_none());
    }

    #[test]
    fn drawdown_up_of_monotone_path_is_zero() {
        let w = LatticePath::new(vec![1, 2, 3, 4, 5]).unwrap();
        assert_eq!(log_drawdown_up(&w, 10).unwrap(), 0.0);
    }

    #[test]
    fn drawdown_up_hand_value() {
        // Window of level 2 contains a dip to 1: the statistic is log_N 2.
        let w = LatticePath::new(vec![1, 2, 1, 2, 3]).unwrap();
        let got = log_drawdown_up(&w, 10).unwrap();
        assert!((got - 2f64.ln() / 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn drawdown_down_of_monotone_path_is_zero() {
        let w = LatticePath::new(vec![3, 2, 1, 0]).unwrap();
        assert_eq!(log_drawdown_down(&w, 10).unwrap(), 0.0);
    }

    #[test]
    fn drawdown_down_hand_value() {
        let w = LatticePath::new(vec![2, 1, 2, 1, 0]).unwrap();
        let got = log_drawdown_down(&w, 10).unwrap();
        assert!((got - 2f64.ln() / 10f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn drawdown_down_requires_zero() {
        let w = LatticePath::new(vec![2, 3, 4]).unwrap();
        assert!(log_drawdown_down(&w, 10).is_err());
    }

    #[test]
    fn lil_stat_is_nonnegative_and_finite() {
        let mut rng = seeded_rng(5);
        let s = lil_fluctuation_stat(lil_horizon(100, DEFAULT_LIL_BETA), 100, &mut rng).unwrap();
        assert!(s >= 0.0 && s.is_finite());
    }

    #[test]
    fn lil_horizon_rounds() {
        assert_eq!(lil_horizon(100, 2.5), 100_000);
    }

    #[test]
    fn embedded_up_probs() {
        assert!((mutant_embedded_up_prob(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((resident_embedded_up_prob(1.0) - 1.0 / 3.0).abs() < 1e-15);
        // The two jump chains are mirror images: probabilities sum to 1.
        let s = 0.37;
        assert!((mutant_embedded_up_prob(s) + resident_embedded_up_prob(s) - 1.0).abs() < 1e-15);
    }
}
