//! Recurrent beneficial mutations and their deterministic scaling limit.
//!
//! The stochastic side is a multi-type Moran model: mutations arrive at rate
//! lambda/ln(N), each adding A * phi to the fitness of one uniformly chosen
//! individual (A drawn from an increment distribution), and an individual of
//! fitness M replaces one of fitness M' at rate (1 + (M-M')+) / N per ordered
//! pair. The deterministic side is a system of piecewise-linear trajectories
//! driven by arrival marks (T_i, A_i): each new trajectory climbs from height
//! b with slope A_i; a trajectory reaching height 1 freezes and kinks every
//! trajectory above b down by its old slope; a trajectory descending to b
//! dies to 0. Event times on the deterministic side are exact rationals.

use crate::error::{Error, Result};
use crate::m1::CadlagPath;
use crate::moran::RecordPolicy;
use crate::params::ModelParams;
use crate::stats::Kahan;
use crate::walks::DEFAULT_EVENT_CAP;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Distribution of the fitness increments A (the realized fitness gain is
/// A * phi).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementDist {
    /// Finitely many atoms (value, probability); probabilities are
    /// normalized on use. Size-biasing is exact.
    Finite { atoms: Vec<(f64, f64)> },
    /// Continuous uniform on [lo, hi]; size-biasing by rejection against the
    /// density bound at hi.
    Uniform { lo: f64, hi: f64 },
}

impl IncrementDist {
    /// A two-atom uniform choice between increments 1 and 2.
    pub fn unit_pair() -> IncrementDist {
        IncrementDist::Finite { atoms: vec![(1.0, 0.5), (2.0, 0.5)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IncrementDist::Finite { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("increment distribution has no atoms"));
                }
                for &(v, p) in atoms {
                    if !(v > 0.0 && v.is_finite() && p > 0.0 && p.is_finite()) {
                        return Err(Error::invalid(format!("bad atom ({v}, {p})")));
                    }
                }
                Ok(())
            }
            IncrementDist::Uniform { lo, hi } => {
                if !(0.0 <= *lo && lo < hi && hi.is_finite() && *hi > 0.0) {
                    return Err(Error::invalid(format!("bad uniform range [{lo}, {hi}]")));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementDist::Finite { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let mut u = rng.random::<f64>() * total;
                for &(v, p) in atoms {
                    u -= p;
                    if u <= 0.0 {
                        return v;
                    }
                }
                atoms.last().unwrap().0
            }
            IncrementDist::Uniform { lo, hi } => rng.random_range(*lo..*hi),
        }
    }

    /// Sample from the size-biased distribution (density proportional to
    /// x times the original).
    pub fn sample_size_biased<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementDist::Finite { atoms } => {
                let total: f64 = atoms.iter().map(|&(v, p)| v * p).sum();
                let mut u = rng.random::<f64>() * total;
                for &(v, p) in atoms {
                    u -= v * p;
                    if u <= 0.0 {
                        return v;
                    }
                }
                atoms.last().unwrap().0
            }
            IncrementDist::Uniform { lo, hi } => loop {
                let x = rng.random_range(*lo..*hi);
                if rng.random::<f64>() * hi <= x {
                    return x;
                }
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Multi-type Moran simulation.

/// Fenwick tree over f64 weights, supporting prefix sums and sampling.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Fenwick {
        Fenwick { tree: vec![0.0; n + 1] }
    }

    fn from_values(values: &[f64]) -> Fenwick {
        let mut f = Fenwick::new(values.len());
        for (i, &v) in values.iter().enumerate() {
            f.add(i, v);
        }
        f
    }

    fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, mut i: usize, delta: f64) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights at indices < i.
    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    /// Smallest index i with prefix(i+1) > x. Assumes 0 <= x < total.
    fn find(&self, mut x: f64) -> usize {
        let mut pos = 0usize;
        let mut mask = self.tree.len().next_power_of_two() >> 1;
        while mask > 0 {
            let next = pos + mask;
            if next < self.tree.len() && self.tree[next] <= x {
                x -= self.tree[next];
                pos = next;
            }
            mask >>= 1;
        }
        pos.min(self.len() - 1)
    }
}

/// One mutant family (or the founding resident) in the multi-type model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyRecord {
    /// Absolute fitness level (sum of increments times phi; 0 for the
    /// founder).
    pub fitness: f64,
    /// Natural arrival time; None for the founding resident.
    pub arrival_time: Option<f64>,
    /// The increment draw A; None for the founder.
    pub increment: Option<f64>,
    /// Family the mutated individual came from.
    pub parent: Option<usize>,
    /// (natural time, count) at recorded level crossings, starting at the
    /// arrival state.
    pub breakpoints: Vec<(f64, u64)>,
    /// Whether the family's count ever reached the contender threshold.
    pub contender: bool,
    pub final_count: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiMoranTrace {
    pub families: Vec<FamilyRecord>,
    /// Natural-time horizon the simulation ran to.
    pub horizon: f64,
    pub events: u64,
    /// ceil(ln(N)/phi): the size a family must reach to count as a contender.
    pub contender_threshold: u64,
}

#[derive(Clone, Debug)]
pub struct MultiMoranOptions {
    /// Level-grid resolution for recorded family paths (levels per unit of
    /// log_N scale).
    pub per_unit: u32,
    pub event_cap: u64,
    /// When set, replaces the Poisson mutation process with these
    /// (natural time, increment) arrivals; lambda is ignored.
    pub forced_arrivals: Option<Vec<(f64, f64)>>,
}

impl Default for MultiMoranOptions {
    fn default() -> Self {
        MultiMoranOptions { per_unit: 50, event_cap: DEFAULT_EVENT_CAP, forced_arrivals: None }
    }
}

struct Families {
    /// Sorted by fitness, ties by creation order.
    fitness: Vec<f64>,
    counts: Vec<u64>,
    /// Trace index of each sorted slot.
    record_idx: Vec<usize>,
    ctree: Fenwick,
    mctree: Fenwick,
    gtree: Fenwick,
    sum_sq: u128,
    /// N * selective rate: sum over ordered pairs of (M_i - M_j)+ c_i c_j.
    sel_total: f64,
    n: u64,
}

impl Families {
    fn new(n: u64) -> Families {
        let mut f = Families {
            fitness: Vec::new(),
            counts: Vec::new(),
            record_idx: Vec::new(),
            ctree: Fenwick::new(0),
            mctree: Fenwick::new(0),
            gtree: Fenwick::new(0),
            sum_sq: 0,
            sel_total: 0.0,
            n,
        };
        f.insert(0.0, n, 0);
        f
    }

    fn len(&self) -> usize {
        self.fitness.len()
    }

    /// Insert a family keeping fitness order; rebuilds the trees (arrivals
    /// are rare next to replacement events).
    fn insert(&mut self, fitness: f64, count: u64, record_idx: usize) -> usize {
        let pos = self.fitness.partition_point(|&m| m <= fitness);
        self.fitness.insert(pos, fitness);
        self.counts.insert(pos, count);
        self.record_idx.insert(pos, record_idx);
        self.rebuild();
        pos
    }

    fn rebuild(&mut self) {
        let cf: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let mcf: Vec<f64> = self
            .counts
            .iter()
            .zip(&self.fitness)
            .map(|(&c, &m)| c as f64 * m)
            .collect();
        let gf: Vec<f64> = self
            .counts
            .iter()
            .map(|&c| c as f64 * (self.n - c) as f64)
            .collect();
        self.ctree = Fenwick::from_values(&cf);
        self.mctree = Fenwick::from_values(&mcf);
        self.gtree = Fenwick::from_values(&gf);
        self.sum_sq = self.counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
        self.sel_total = self.exact_sel_total();
    }

    fn exact_sel_total(&self) -> f64 {
        // sum over sorted pairs j < i of (M_i - M_j) c_i c_j via prefix sums.
        let mut acc = 0.0;
        let mut c_pref = 0.0;
        let mut mc_pref = 0.0;
        for i in 0..self.len() {
            let ci = self.counts[i] as f64;
            acc += ci * (self.fitness[i] * c_pref - mc_pref);
            c_pref += ci;
            mc_pref += ci * self.fitness[i];
        }
        acc
    }

    /// Apply a count change of +-1, updating all aggregates in O(log F).
    fn bump(&mut self, pos: usize, delta: i64) {
        let old = self.counts[pos];
        let new = old.checked_add_signed(delta).expect("count stays nonnegative");
        debug_assert!(new <= self.n);
        let m = self.fitness[pos];
        let df = delta as f64;
        // Selective total: pos against everyone below and above it.
        let c_below = self.ctree.prefix(pos);
        let mc_below = self.mctree.prefix(pos);
        let c_above = self.ctree.total() - c_below - old as f64;
        let mc_above = self.mctree.total() - mc_below - old as f64 * m;
        self.sel_total += df * ((m * c_below - mc_below) + (mc_above - m * c_above));
        self.ctree.add(pos, df);
        self.mctree.add(pos, df * m);
        let g_old = old as f64 * (self.n - old) as f64;
        let g_new = new as f64 * (self.n - new) as f64;
        self.gtree.add(pos, g_new - g_old);
        self.sum_sq = self.sum_sq - (old as u128) * (old as u128) + (new as u128) * (new as u128);
        self.counts[pos] = new;
    }

    /// N * neutral rate: N^2 - sum of squared counts, exact.
    fn neutral_total(&self) -> f64 {
        ((self.n as u128) * (self.n as u128) - self.sum_sq) as f64
    }

    /// Ordered pair (i, j), i != j, with probability proportional to
    /// c_i * c_j: the first index is drawn proportional to c_i (N - c_i),
    /// the second proportional to c_j skipping i. Exact, no rejection.
    fn sample_distinct_pair<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let g_total = self.neutral_total();
        let i = self.gtree.find(rng.random::<f64>() * g_total);
        let ci = self.counts[i] as f64;
        let mut x = rng.random::<f64>() * (self.n as f64 - ci);
        let pref = self.ctree.prefix(i);
        if x >= pref {
            x += ci;
        }
        let j = self.ctree.find(x.min(self.n as f64 - 1e-9));
        (i, j)
    }

    /// Family index proportional to count (a uniformly chosen individual).
    fn sample_by_count<R: Rng>(&self, rng: &mut R) -> usize {
        self.ctree.find(rng.random::<f64>() * self.n as f64)
    }

    fn fitness_spread(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            if self.counts[i] > 0 {
                lo = lo.min(self.fitness[i]);
                hi = hi.max(self.fitness[i]);
            }
        }
        if hi > lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Runs the multi-type model from a homogeneous fitness-0 population until
/// the given horizon on the rescaled clock (natural time horizon * ln(N) /
/// phi). Family count paths are recorded at geometric level crossings plus
/// the contender threshold.
pub fn simulate_multi_moran<R: Rng>(
    params: &ModelParams,
    lambda: f64,
    gamma: &IncrementDist,
    horizon: f64,
    opts: &MultiMoranOptions,
    rng: &mut R,
) -> Result<MultiMoranTrace> {
    params.require_selection()?;
    gamma.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("mutation rate lambda = {lambda} must be >= 0")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon {horizon} must be positive")));
    }
    if let Some(forced) = &opts.forced_arrivals {
        if !forced.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::invalid("forced arrival times must be strictly increasing"));
        }
        if !forced.iter().all(|&(t, a)| t >= 0.0 && a > 0.0 && t.is_finite() && a.is_finite()) {
            return Err(Error::invalid("forced arrivals need t >= 0 and A > 0"));
        }
    }

    let n = params.n();
    let phi = params.phi();
    let horizon_nat = horizon * params.log_n() / phi;
    let threshold = ((params.log_n() / phi).ceil() as u64).clamp(1, n);
    let mut levels = RecordPolicy::geometric_levels(n, opts.per_unit.max(1));
    levels.push(threshold);
    levels.sort_unstable();
    levels.dedup();
    let is_level = |c: u64| levels.binary_search(&c).is_ok();

    let mut records = vec![FamilyRecord {
        fitness: 0.0,
        arrival_time: None,
        increment: None,
        parent: None,
        breakpoints: vec![(0.0, n)],
        contender: false,
        final_count: n,
    }];
    let mut fams = Families::new(n);
    let mutation_rate = lambda / params.log_n();
    let mut clock = Kahan::new();
    let mut events: u64 = 0;
    let mut forced_iter = opts.forced_arrivals.as_deref().unwrap_or(&[]).iter().copied();
    let mut next_forced = forced_iter.next();
    let forced_mode = opts.forced_arrivals.is_some();
    // Refresh the incrementally maintained selective total periodically.
    const REFRESH: u64 = 1 << 16;

    loop {
        if events % REFRESH == REFRESH - 1 {
            fams.sel_total = fams.exact_sel_total();
        }
        let neutral = fams.neutral_total() / n as f64;
        let selective = fams.sel_total.max(0.0) / n as f64;
        let mutation = if forced_mode { 0.0 } else { mutation_rate };
        let total = neutral + selective + mutation;

        // Forced arrivals preempt the exponential clock.
        let mut step = if total > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / total
        } else {
            f64::INFINITY
        };
        let mut forced_now = false;
        if let Some((ft, _)) = next_forced {
            if ft <= clock.value() + step {
                step = ft - clock.value();
                forced_now = true;
            }
        }
        if !forced_now && clock.value() + step > horizon_nat {
            break;
        }
        clock.add(step.max(0.0));
        events += 1;
        if events > opts.event_cap {
            return Err(Error::EventCapExceeded { cap: opts.event_cap });
        }

        // Which event fired.
        if forced_now {
            let (ft, a) = next_forced.unwrap();
            next_forced = forced_iter.next();
            spawn_family(&mut fams, &mut records, ft, a, phi, threshold, rng);
            continue;
        }
        let u = rng.random::<f64>() * total;
        if u < mutation {
            let a = gamma.sample(rng);
            let t = clock.value();
            spawn_family(&mut fams, &mut records, t, a, phi, threshold, rng);
            continue;
        }
        let (win, lose) = if u < mutation + neutral {
            fams.sample_distinct_pair(rng)
        } else {
            // Selective event: rejection against the alive fitness spread.
            let spread = fams.fitness_spread();
            if spread <= 0.0 {
                continue; // stale total, no selective pressure in truth
            }
            loop {
                let (i, j) = fams.sample_distinct_pair(rng);
                let gap = fams.fitness[i] - fams.fitness[j];
                if gap > 0.0 && rng.random::<f64>() * spread <= gap {
                    break (i, j);
                }
            }
        };
        let t = clock.value();
        fams.bump(win, 1);
        fams.bump(lose, -1);
        for pos in [win, lose] {
            let c = fams.counts[pos];
            let rec = &mut records[fams.record_idx[pos]];
            if c >= threshold {
                rec.contender = true;
            }
            if is_level(c) || c == 0 {
                if rec.breakpoints.last().map(|b| b.1) != Some(c) {
                    rec.breakpoints.push((t, c));
                }
            }
        }
    }

    let mut trace_final = vec![0u64; records.len()];
    for pos in 0..fams.len() {
        trace_final[fams.record_idx[pos]] = fams.counts[pos];
    }
    for (rec, &c) in records.iter_mut().zip(&trace_final) {
        rec.final_count = c;
    }
    debug_assert_eq!(trace_final.iter().sum::<u64>(), n);
    Ok(MultiMoranTrace {
        families: records,
        horizon: horizon_nat,
        events,
        contender_threshold: threshold,
    })
}

fn spawn_family<R: Rng>(
    fams: &mut Families,
    records: &mut Vec<FamilyRecord>,
    t: f64,
    a: f64,
    phi: f64,
    threshold: u64,
    rng: &mut R,
) {
    let parent_pos = fams.sample_by_count(rng);
    let parent_rec = fams.record_idx[parent_pos];
    let fitness = fams.fitness[parent_pos] + a * phi;
    fams.bump(parent_pos, -1);
    let c = fams.counts[parent_pos];
    let rec = &mut records[parent_rec];
    if rec.breakpoints.last().map(|b| b.1) != Some(c) {
        rec.breakpoints.push((t, c));
    }
    records.push(FamilyRecord {
        fitness,
        arrival_time: Some(t),
        increment: Some(a),
        parent: Some(parent_rec),
        breakpoints: vec![(t, 1)],
        contender: threshold <= 1,
        final_count: 1,
    });
    fams.insert(fitness, 1, records.len() - 1);
}

impl MultiMoranTrace {
    /// (rescaled arrival time, increment, trace index) of every contender
    /// family, in arrival order.
    pub fn contender_marks(&self, params: &ModelParams) -> Vec<(f64, f64, usize)> {
        let scale = params.time_rescale();
        self.families
            .iter()
            .enumerate()
            .filter(|(_, f)| f.contender && f.arrival_time.is_some())
            .map(|(i, f)| (f.arrival_time.unwrap() * scale, f.increment.unwrap(), i))
            .collect()
    }

    /// Rescaled log-size path of one family on house axes.
    pub fn rescaled_path(
        &self,
        family: usize,
        params: &ModelParams,
        window: (f64, f64),
    ) -> Result<CadlagPath> {
        let rec = self
            .families
            .get(family)
            .ok_or_else(|| Error::invalid(format!("no family {family}")))?;
        let scale = params.time_rescale();
        let pre = if rec.arrival_time.is_none() { 1.0 } else { 0.0 };
        let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(rec.breakpoints.len());
        for &(t, c) in &rec.breakpoints {
            let v = params.log_n_plus(c as f64);
            let rt = t * scale;
            match jumps.last_mut() {
                Some(last) if rt <= last.0 => last.1 = v,
                _ => jumps.push((rt, v)),
            }
        }
        let (w0, w1) = window;
        if !(w0 < w1 && w0.is_finite() && w1.is_finite()) {
            return Err(Error::invalid(format!("bad window [{w0}, {w1}]")));
        }
        let lo = w0.min(-1.0);
        let hi = w1.max(self.horizon * scale + 1.0);
        CadlagPath::step_fn((lo, hi), pre, &jumps)?.restrict(w0, w1)
    }
}

// ---------------------------------------------------------------------------
// Deterministic interacting trajectories with exact rational event times.

pub type Q = BigRational;

fn q_from(x: f64) -> Result<Q> {
    BigRational::from_f64(x).ok_or_else(|| Error::invalid(format!("{x} is not finite")))
}

fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitEventKind {
    /// A trajectory reached height 1: slope zeroed, kink transmitted.
    ReachOne,
    /// A trajectory descended to height b: jumped to 0, dead.
    DeathAtB,
    /// A new trajectory appeared at height b.
    Arrival,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PitEvent {
    pub time: Q,
    pub kind: PitEventKind,
    pub trajectory: usize,
    /// For ReachOne: the slope v that was transmitted as a kink.
    pub transmitted: Option<Q>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitStatus {
    /// Not yet arrived (only before its mark time).
    Latent,
    Active,
    Dead,
}

#[derive(Clone, Debug)]
pub struct PitTrajectory {
    /// (T_i, A_i); None for the initial resident.
    pub mark: Option<(Q, Q)>,
    /// Piecewise description: (start time, height at start, slope) per
    /// linear segment, in time order.
    segments: Vec<(Q, Q, Q)>,
    pub status: PitStatus,
    pub death_time: Option<Q>,
}

impl PitTrajectory {
    pub fn segments(&self) -> &[(Q, Q, Q)] {
        &self.segments
    }
}

#[derive(Clone, Debug)]
pub struct PitSystem {
    pub b: Q,
    pub horizon: Q,
    pub trajectories: Vec<PitTrajectory>,
    pub events: Vec<PitEvent>,
}

struct ActiveState {
    h: Q,
    slope: Q,
}

/// Evolves the deterministic system driven by `arrivals` = (T_i, A_i) with
/// wall height b up to the horizon. Inputs are converted to their exact
/// binary rationals, so identical inputs give bitwise-identical traces.
pub fn pit_evolve(arrivals: &[(f64, f64)], b: f64, horizon: f64) -> Result<PitSystem> {
    if !(0.0..1.0).contains(&b) {
        return Err(Error::invalid(format!("wall height b = {b} outside [0, 1)")));
    }
    if !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon {horizon} must be finite")));
    }
    let marks: Vec<(Q, Q)> = arrivals
        .iter()
        .map(|&(t, a)| Ok((q_from(t)?, q_from(a)?)))
        .collect::<Result<_>>()?;
    pit_evolve_exact(&marks, q_from(b)?, q_from(horizon)?)
}

/// Exact-rational variant of [`pit_evolve`]. Simultaneous events resolve in
/// the fixed order: height-1 events, then deaths at b, then arrivals; ties
/// within a kind by trajectory index.
pub fn pit_evolve_exact(marks: &[(Q, Q)], bq: Q, hq: Q) -> Result<PitSystem> {
    let one = Q::from_integer(BigInt::from(1));
    let zero = Q::zero();
    if bq < zero || bq >= one {
        return Err(Error::invalid("wall height b outside [0, 1)"));
    }
    if !hq.is_positive() {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !marks.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(Error::invalid("arrival times must be strictly increasing"));
    }
    if !marks.iter().all(|(t, a)| !t.is_negative() && a.is_positive()) {
        return Err(Error::invalid("arrivals need T >= 0 and A > 0"));
    }

    let mut trajectories = vec![PitTrajectory {
        mark: None,
        segments: vec![(zero.clone(), one.clone(), zero.clone())],
        status: PitStatus::Active,
        death_time: None,
    }];
    for m in marks {
        trajectories.push(PitTrajectory {
            mark: Some(m.clone()),
            segments: Vec::new(),
            status: PitStatus::Latent,
            death_time: None,
        });
    }
    let mut state: Vec<Option<ActiveState>> = Vec::with_capacity(trajectories.len());
    state.push(Some(ActiveState { h: one.clone(), slope: zero.clone() }));
    for _ in marks {
        state.push(None);
    }
    let mut next_arrival = 0usize;
    let mut events: Vec<PitEvent> = Vec::new();
    let mut cur = zero.clone();

    loop {
        // Next event time: earliest projected boundary hit or arrival.
        let mut t_next: Option<Q> = None;
        let consider = |t: Q, t_next: &mut Option<Q>| {
            if t >= cur && t_next.as_ref().map_or(true, |cand| &t < cand) {
                *t_next = Some(t);
            }
        };
        for s in state.iter().flatten() {
            if s.slope.is_positive() && s.h < one {
                consider(&cur + (&one - &s.h) / &s.slope, &mut t_next);
            }
            if s.slope.is_negative() && s.h > bq {
                consider(&cur + (&s.h - &bq) / (-&s.slope), &mut t_next);
            }
        }
        if next_arrival < marks.len() {
            consider(marks[next_arrival].0.clone(), &mut t_next);
        }
        let t = match t_next {
            Some(t) if t <= hq => t,
            _ => break,
        };

        // Advance every active trajectory to t.
        let dt = &t - &cur;
        for s in state.iter_mut().flatten() {
            let advance = &s.slope * &dt;
            s.h += advance;
        }
        cur = t.clone();

        // Height-1 events, in index order.
        let mut kinks: Vec<(usize, Q)> = Vec::new();
        for (i, s) in state.iter_mut().enumerate() {
            if let Some(s) = s {
                if s.h == one && s.slope.is_positive() {
                    kinks.push((i, s.slope.clone()));
                    s.slope = zero.clone();
                }
            }
        }
        for (i, v) in kinks {
            events.push(PitEvent {
                time: cur.clone(),
                kind: PitEventKind::ReachOne,
                trajectory: i,
                transmitted: Some(v.clone()),
            });
            trajectories[i].segments.push((cur.clone(), one.clone(), zero.clone()));
            for (j, s) in state.iter_mut().enumerate() {
                if j == i {
                    continue;
                }
                if let Some(s) = s {
                    if s.h > bq {
                        s.slope -= &v;
                        trajectories[j].segments.push((cur.clone(), s.h.clone(), s.slope.clone()));
                    }
                }
            }
        }

        // Deaths at b, in index order.
        for i in 0..state.len() {
            let dying = matches!(&state[i], Some(s) if s.h == bq && s.slope.is_negative());
            if dying {
                state[i] = None;
                trajectories[i].status = PitStatus::Dead;
                trajectories[i].death_time = Some(cur.clone());
                trajectories[i].segments.push((cur.clone(), zero.clone(), zero.clone()));
                events.push(PitEvent {
                    time: cur.clone(),
                    kind: PitEventKind::DeathAtB,
                    trajectory: i,
                    transmitted: None,
                });
            }
        }

        // Arrival.
        if next_arrival < marks.len() && marks[next_arrival].0 == cur {
            let (_, a) = marks[next_arrival].clone();
            let idx = next_arrival + 1;
            next_arrival += 1;
            state[idx] = Some(ActiveState { h: bq.clone(), slope: a.clone() });
            trajectories[idx].status = PitStatus::Active;
            trajectories[idx].segments.push((cur.clone(), bq.clone(), a));
            events.push(PitEvent {
                time: cur.clone(),
                kind: PitEventKind::Arrival,
                trajectory: idx,
                transmitted: None,
            });
        }
    }

    Ok(PitSystem { b: bq, horizon: hq, trajectories, events })
}

impl PitSystem {
    /// Exact height of trajectory i at rational time t in [0, horizon].
    pub fn exact_height(&self, i: usize, t: &Q) -> Q {
        let traj = &self.trajectories[i];
        if traj.mark.as_ref().is_some_and(|(ti, _)| t < ti) {
            return Q::zero();
        }
        if traj.segments.is_empty() {
            return Q::zero();
        }
        if traj.mark.is_none() && t < &self.trajectories[i].segments[0].0 {
            return Q::from_integer(BigInt::from(1));
        }
        let mut seg = &traj.segments[0];
        for s in &traj.segments {
            if &s.0 <= t {
                seg = s;
            } else {
                break;
            }
        }
        &seg.1 + &seg.2 * (t - &seg.0)
    }

    /// The trajectory as a cadlag path on the window (which must end at or
    /// before the horizon). Latent stretches are 0 (the resident is 1 before
    /// time 0), deaths jump to 0.
    pub fn trajectory_path(&self, i: usize, window: (f64, f64)) -> Result<CadlagPath> {
        let (w0, w1) = window;
        if !(w0 < w1 && w0.is_finite() && w1.is_finite()) {
            return Err(Error::invalid(format!("bad window [{w0}, {w1}]")));
        }
        if q_from(w1)? > self.horizon {
            return Err(Error::invalid("window extends past the evolution horizon"));
        }
        let traj = &self.trajectories[i];
        let pre = if traj.mark.is_none() { 1.0 } else { 0.0 };
        let lo = w0.min(-1.0);
        let hi = w1.max(q_to_f64(&self.horizon) + 1.0);
        let mut times = vec![lo];
        let mut v0 = Vec::new();
        let mut v1 = Vec::new();
        let push = |end: f64, a: f64, b: f64, times: &mut Vec<f64>, v0: &mut Vec<f64>, v1: &mut Vec<f64>| {
            if end > *times.last().unwrap() {
                times.push(end);
                v0.push(a);
                v1.push(b);
            }
        };
        let mut prev_end = lo;
        let mut prev_val = pre;
        for (k, (t0, h0, slope)) in traj.segments.iter().enumerate() {
            let start = q_to_f64(t0);
            let end_q = traj
                .segments
                .get(k + 1)
                .map(|s| s.0.clone())
                .unwrap_or_else(|| self.horizon.clone());
            let end = q_to_f64(&end_q);
            if start > prev_end {
                push(start, prev_val, prev_val, &mut times, &mut v0, &mut v1);
            }
            let h_start = q_to_f64(h0);
            let h_end = q_to_f64(&(h0 + slope * (&end_q - t0)));
            push(end, h_start, h_end, &mut times, &mut v0, &mut v1);
            prev_end = end;
            prev_val = h_end;
        }
        if traj.segments.is_empty() {
            push(hi, pre, pre, &mut times, &mut v0, &mut v1);
        } else if prev_end < hi {
            push(hi, prev_val, prev_val, &mut times, &mut v0, &mut v1);
        }
        CadlagPath::from_pieces(times, v0, v1)?.restrict(w0, w1)
    }

    pub const CSV_VERSION: u32 = 1;

    /// Trajectory panel CSV: t, H_0, ..., H_k at every event time with
    /// left-limit rows at jumps.
    pub fn write_csv<W: Write>(&self, window: (f64, f64), mut w: W) -> Result<()> {
        let paths: Vec<CadlagPath> = (0..self.trajectories.len())
            .map(|i| self.trajectory_path(i, window))
            .collect::<Result<_>>()?;
        let mut cuts: Vec<f64> = paths
            .iter()
            .flat_map(|p| p.extended_graph().vertices().iter().map(|v| v.0).collect::<Vec<_>>())
            .collect();
        cuts.push(window.0);
        cuts.push(window.1);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        writeln!(w, "# pit-trace-csv v{}", Self::CSV_VERSION)?;
        let header: Vec<String> = (0..paths.len()).map(|i| format!("H{i}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for (row, &t) in cuts.iter().enumerate() {
            if row > 0 {
                let left: Vec<f64> =
                    paths.iter().map(|p| p.left_limit(t)).collect::<Result<_>>()?;
                let right: Vec<f64> = paths.iter().map(|p| p.value(t)).collect::<Result<_>>()?;
                if left != right {
                    let cells: Vec<String> = left.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{},{}", t, cells.join(","))?;
                }
            }
            let vals: Vec<f64> = paths.iter().map(|p| p.value(t)).collect::<Result<_>>()?;
            let cells: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", t, cells.join(","))?;
        }
        Ok(())
    }
}

/// Serializable arrival marks for replaying a PIT evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitMarks {
    pub b: f64,
    pub horizon: f64,
    pub arrivals: Vec<(f64, f64)>,
}

/// One family's distance between the stochastic path and its deterministic
/// counterpart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyDistance {
    /// Index into the trace's family list (0 = resident).
    pub family: usize,
    /// Index of the matched trajectory (0 = resident).
    pub pit_index: usize,
    pub bracket: crate::m1::M1Bracket,
}

/// Simulates the multi-type model, feeds the empirical contender marks into
/// the deterministic system, and returns the M1 bracket between each
/// contender's rescaled path and its trajectory (resident included).
pub fn pit_vs_moran_distance<R: Rng>(
    params: &ModelParams,
    lambda: f64,
    gamma: &IncrementDist,
    horizon: f64,
    tol: f64,
    opts: &MultiMoranOptions,
    rng: &mut R,
) -> Result<Vec<FamilyDistance>> {
    let trace = simulate_multi_moran(params, lambda, gamma, horizon, opts, rng)?;
    let marks = trace.contender_marks(params);
    let arrivals: Vec<(f64, f64)> = marks.iter().map(|&(t, a, _)| (t, a)).collect();
    let pit = pit_evolve(&arrivals, params.b(), horizon)?;
    let window = (-0.1, horizon);
    let mut out = Vec::with_capacity(marks.len() + 1);
    let resident = trace.rescaled_path(0, params, window)?;
    out.push(FamilyDistance {
        family: 0,
        pit_index: 0,
        bracket: crate::m1::m1_distance(&resident, &pit.trajectory_path(0, window)?, tol)?,
    });
    for (k, &(_, _, fam)) in marks.iter().enumerate() {
        let emp = trace.rescaled_path(fam, params, window)?;
        let det = pit.trajectory_path(k + 1, window)?;
        out.push(FamilyDistance {
            family: fam,
            pit_index: k + 1,
            bracket: crate::m1::m1_distance(&emp, &det, tol)?,
        });
    }
    Ok(out)
}
