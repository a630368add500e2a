//! Linear birth-death processes: exact jump-chain simulation, closed forms
//! for tails and moments, survival conditioning by h-transform, and the
//! passage-time statistics for the five stages of a sweep.
//!
//! The mutant count early in a sweep is approximated by a process with
//! per-head birth rate 1 + s and death rate 1 (s = a * phi); the resident
//! count late in the sweep by the mirror process with rates 1 and 1 + s.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::stats::Kahan;
use crate::walks::{ConditionedUpProbs, DEFAULT_EVENT_CAP};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// Per-individual birth and death rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GwParams {
    birth: f64,
    death: f64,
}

impl GwParams {
    pub fn new(birth: f64, death: f64) -> Result<Self> {
        if !(birth >= 0.0 && death >= 0.0) || !(birth + death > 0.0) {
            return Err(Error::invalid(format!(
                "rates (birth, death) = ({birth}, {death}) must be nonnegative and not both zero"
            )));
        }
        if !birth.is_finite() || !death.is_finite() {
            return Err(Error::invalid("rates must be finite"));
        }
        Ok(GwParams { birth, death })
    }

    /// Approximation of the mutant count at low frequency: rates (1+s, 1).
    pub fn mutant(params: &ModelParams) -> Result<Self> {
        params.require_selection()?;
        GwParams::new(1.0 + params.s(), 1.0)
    }

    /// Approximation of the resident count at low frequency: rates (1, 1+s).
    pub fn resident(params: &ModelParams) -> Result<Self> {
        params.require_selection()?;
        GwParams::new(1.0, 1.0 + params.s())
    }

    pub fn birth(&self) -> f64 {
        self.birth
    }

    pub fn death(&self) -> f64 {
        self.death
    }

    /// Malthusian rate birth - death.
    pub fn rate(&self) -> f64 {
        self.birth - self.death
    }

    pub fn is_supercritical(&self) -> bool {
        self.birth > self.death
    }
}

/// Terminal condition for a simulation run. Absorption at 0 always ends the
/// path no matter which rule is active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopKind {
    /// Stop when the population first equals this size.
    HitLevel(u64),
    /// Stop at this time; the state at the horizon is the last event's.
    Horizon(f64),
    /// Run until extinction.
    Absorption,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub kind: StopKind,
    pub event_cap: u64,
}

impl StopRule {
    pub fn hit_level(level: u64) -> Self {
        StopRule { kind: StopKind::HitLevel(level), event_cap: DEFAULT_EVENT_CAP }
    }

    pub fn horizon(t: f64) -> Self {
        StopRule { kind: StopKind::Horizon(t), event_cap: DEFAULT_EVENT_CAP }
    }

    pub fn absorption() -> Self {
        StopRule { kind: StopKind::Absorption, event_cap: DEFAULT_EVENT_CAP }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if let StopKind::Horizon(t) = self.kind {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("horizon {t} must be finite and >= 0")));
            }
        }
        if self.event_cap == 0 {
            return Err(Error::invalid("event cap must be positive"));
        }
        Ok(())
    }
}

/// Jump-chain sample path: sizes after each jump, plus terminal information.
#[derive(Clone, Debug)]
pub struct GwPath {
    start: u64,
    events: Vec<(f64, u64)>,
    end_time: f64,
    absorbed: bool,
}

impl GwPath {
    pub fn start(&self) -> u64 {
        self.start
    }

    /// (time, size) after each jump, in increasing time order.
    pub fn events(&self) -> &[(f64, u64)] {
        &self.events
    }

    /// Time at which the path's definition ends (last event, or the horizon
    /// for horizon-stopped runs).
    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn absorbed(&self) -> bool {
        self.absorbed
    }

    pub fn final_size(&self) -> u64 {
        self.events.last().map_or(self.start, |&(_, k)| k)
    }

    /// Size at time t in [0, end_time].
    pub fn size_at(&self, t: f64) -> u64 {
        let idx = self.events.partition_point(|&(u, _)| u <= t);
        if idx == 0 {
            self.start
        } else {
            self.events[idx - 1].1
        }
    }

    /// First time the path equals `level`, if it ever does.
    pub fn first_passage(&self, level: u64) -> Option<f64> {
        if self.start == level {
            return Some(0.0);
        }
        self.events.iter().find(|&&(_, k)| k == level).map(|&(t, _)| t)
    }

    pub fn extinction_time(&self) -> Option<f64> {
        self.absorbed.then_some(self.end_time)
    }
}

/// Terminal state of a visitor-driven run.
#[derive(Clone, Copy, Debug)]
pub struct GwEnd {
    pub time: f64,
    pub size: u64,
    pub absorbed: bool,
    pub events: u64,
}

/// Core jump-chain driver. Holding times are exponential with rate
/// (birth + death) * size; up-step probabilities come from the plain chain or
/// its survival h-transform. `visit` sees (time, size) after every jump.
pub fn simulate_gw_visit<R: Rng, F: FnMut(f64, u64)>(
    gw: &GwParams,
    start: u64,
    conditioned: bool,
    stop: &StopRule,
    rng: &mut R,
    mut visit: F,
) -> Result<GwEnd> {
    stop.validate()?;
    if conditioned {
        if !gw.is_supercritical() {
            return Err(Error::invalid(
                "conditioning on survival requires birth > death",
            ));
        }
        if start == 0 {
            return Err(Error::invalid("conditioned process cannot start at 0"));
        }
        if matches!(stop.kind, StopKind::Absorption) {
            return Err(Error::invalid(
                "a survival-conditioned process never absorbs; choose another stop rule",
            ));
        }
    }
    let total = gw.birth + gw.death;
    let plain_up = gw.birth / total;
    let cond_up = if conditioned {
        // p of the embedded walk is birth/(birth+death); its h-transform has
        // ratio r = death/birth < 1.
        Some(ConditionedUpProbs::new(plain_up)?)
    } else {
        None
    };

    let mut k = start;
    let mut clock = Kahan::new();
    let mut events: u64 = 0;
    loop {
        match stop.kind {
            StopKind::HitLevel(level) if k == level => {
                return Ok(GwEnd { time: clock.value(), size: k, absorbed: false, events });
            }
            _ => {}
        }
        if k == 0 {
            return Ok(GwEnd { time: clock.value(), size: 0, absorbed: true, events });
        }
        let hold = {
            let e: f64 = Exp1.sample(rng);
            e / (total * k as f64)
        };
        if let StopKind::Horizon(h) = stop.kind {
            if clock.value() + hold > h {
                return Ok(GwEnd { time: h, size: k, absorbed: false, events });
            }
        }
        events += 1;
        if events > stop.event_cap {
            return Err(Error::EventCapExceeded { cap: stop.event_cap });
        }
        clock.add(hold);
        let up = match &cond_up {
            Some(c) => rng.random::<f64>() < c.get(k),
            None => rng.random::<f64>() < plain_up,
        };
        if up {
            k += 1;
        } else {
            k -= 1;
        }
        visit(clock.value(), k);
    }
}

/// Exact sample path of the plain process from `start` under `stop`.
pub fn simulate_gw<R: Rng>(
    gw: &GwParams,
    start: u64,
    stop: &StopRule,
    rng: &mut R,
) -> Result<GwPath> {
    let mut events = Vec::new();
    let end = simulate_gw_visit(gw, start, false, stop, rng, |t, k| events.push((t, k)))?;
    Ok(GwPath { start, events, end_time: end.time, absorbed: end.absorbed })
}

/// Sample path started from one individual and conditioned to survive
/// forever: holding rates unchanged, jump probabilities h-transformed with
/// h(k) = 1 - (death/birth)^k. The path stopped at a level equals the plain
/// path conditioned to reach that level before 0.
pub fn simulate_gw_conditioned_survival<R: Rng>(
    gw: &GwParams,
    stop: &StopRule,
    rng: &mut R,
) -> Result<GwPath> {
    let mut events = Vec::new();
    let end = simulate_gw_visit(gw, 1, true, stop, rng, |t, k| events.push((t, k)))?;
    Ok(GwPath { start: 1, events, end_time: end.time, absorbed: false })
}

/// P(Z(t) >= j) for the process started from a single individual;
/// birth != death and both positive.
pub fn gw_tail_prob(gw: &GwParams, t: f64, j: u64) -> Result<f64> {
    if gw.birth == gw.death {
        return Err(Error::CriticalCase);
    }
    if gw.birth <= 0.0 || gw.death <= 0.0 {
        return Err(Error::invalid("tail formula requires positive birth and death rates"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} must be >= 0")));
    }
    if j == 0 {
        return Ok(1.0);
    }
    let (l, m) = (gw.birth, gw.death);
    let r = l - m;
    let head = r / (l - m * (-r * t).exp());
    let base = 1.0 - r / (l * (r * t).exp() - m);
    let p = head * base.powi((j - 1) as i32);
    Ok(p.clamp(0.0, 1.0))
}

/// Survival probability from one individual, with a flag marking the
/// degenerate (sub)critical case where it is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Survival {
    pub prob: f64,
    pub subcritical: bool,
}

pub fn gw_survival_prob(gw: &GwParams) -> Survival {
    if gw.is_supercritical() {
        Survival { prob: (gw.birth - gw.death) / gw.birth, subcritical: false }
    } else {
        Survival { prob: 0.0, subcritical: true }
    }
}

/// Mean and variance of Z(t) from `start` individuals; birth != death.
pub fn gw_mean_var(gw: &GwParams, start: u64, t: f64) -> Result<(f64, f64)> {
    if gw.birth == gw.death {
        return Err(Error::CriticalCase);
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time {t} must be >= 0")));
    }
    let r = gw.rate();
    let s = start as f64;
    let ert = (r * t).exp();
    let mean = s * ert;
    let var = s * ((gw.birth + gw.death) / r) * (ert * ert - ert);
    Ok((mean, var))
}

/// The five consecutive stages of a sweep whose passage times and shapes are
/// measured by `phase_statistic`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Conditioned mutant growth from 1 to ln(N)/phi: rescaled duration.
    One,
    /// Mutant growth from ln(N)/phi: sup deviation of the rescaled log path
    /// from the line b + a t.
    Two,
    /// Mutant growth from N/sqrt(ln N) to N(1 - 1/sqrt(ln N)): rescaled
    /// duration on the sqrt(ln N) scale.
    Three,
    /// Resident decay from N/sqrt(ln N): sup deviation of the rescaled log
    /// path from the line (start exponent) - a t.
    Four,
    /// Resident decay from ln(N)/phi to extinction: rescaled duration.
    Five,
}

impl Phase {
    pub fn index(&self) -> u8 {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
            Phase::Three => 3,
            Phase::Four => 4,
            Phase::Five => 5,
        }
    }

    pub fn from_index(i: u8) -> Result<Phase> {
        Ok(match i {
            1 => Phase::One,
            2 => Phase::Two,
            3 => Phase::Three,
            4 => Phase::Four,
            5 => Phase::Five,
            _ => return Err(Error::invalid(format!("phase {i} outside 1..=5"))),
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseOptions {
    /// Rescaled-time horizon for the sup-deviation phases. Defaults to
    /// (1-b)/a for phase two and (1 - b - eps)/a for phase four.
    pub horizon: Option<f64>,
    /// Margin eps_N for the phase-four window; defaults to 1/ln(ln N).
    pub eps_n: Option<f64>,
    pub event_cap: u64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions { horizon: None, eps_n: None, event_cap: DEFAULT_EVENT_CAP }
    }
}

/// Characteristic levels of the sweep stages.
pub fn stage_levels(params: &ModelParams) -> StageLevels {
    let n = params.n() as f64;
    let ln_n = params.log_n();
    StageLevels {
        low: (ln_n / params.phi()).floor() as u64,
        mid: (n / ln_n.sqrt()).floor() as u64,
        high: (n * (1.0 - 1.0 / ln_n.sqrt())).floor() as u64,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StageLevels {
    /// ln(N)/phi: where branching growth becomes deterministic.
    pub low: u64,
    /// N/sqrt(ln N): where the branching approximation starts to feel N.
    pub mid: u64,
    /// N(1 - 1/sqrt(ln N)): where the resident count takes over.
    pub high: u64,
}

/// One replicate of the passage-time or shape statistic of a sweep stage.
/// Every statistic converges to zero in probability as N grows, except the
/// phase-one delay whose distribution stabilizes.
pub fn phase_statistic<R: Rng>(
    phase: Phase,
    params: &ModelParams,
    opts: &PhaseOptions,
    rng: &mut R,
) -> Result<f64> {
    params.require_selection()?;
    let levels = stage_levels(params);
    let ln_n = params.log_n();
    let phi = params.phi();
    let b = params.b();
    let a = params.a();
    match phase {
        Phase::One => {
            if levels.low < 2 {
                return Err(Error::invalid("N too small: ln(N)/phi below 2"));
            }
            let stop = StopRule::hit_level(levels.low).with_cap(opts.event_cap);
            let end = simulate_gw_visit(
                &GwParams::mutant(params)?,
                1,
                true,
                &stop,
                rng,
                |_, _| {},
            )?;
            Ok(end.time * phi / ln_n)
        }
        Phase::Two => {
            if levels.low < 1 {
                return Err(Error::invalid("N too small: ln(N)/phi below 1"));
            }
            let horizon = opts.horizon.unwrap_or((1.0 - b) / a);
            sup_deviation_from_line(
                &GwParams::mutant(params)?,
                levels.low,
                false,
                params,
                horizon,
                b,
                opts.event_cap,
                rng,
            )
        }
        Phase::Three => {
            if levels.mid < 1 || levels.high <= levels.mid {
                return Err(Error::invalid("N too small for the crossing stage"));
            }
            let stop = StopRule::hit_level(levels.high).with_cap(opts.event_cap);
            let end = simulate_gw_visit(
                &GwParams::mutant(params)?,
                levels.mid,
                false,
                &stop,
                rng,
                |_, _| {},
            )?;
            if end.absorbed {
                return Err(Error::Undefined(
                    "mutant line went extinct before the crossing stage completed".into(),
                ));
            }
            Ok(end.time * phi / ln_n.sqrt())
        }
        Phase::Four => {
            if levels.mid < 1 {
                return Err(Error::invalid("N too small: N/sqrt(ln N) below 1"));
            }
            let eps = match opts.eps_n {
                Some(e) => e,
                None => {
                    if ln_n.ln() <= 0.0 {
                        return Err(Error::invalid("N too small for the default margin"));
                    }
                    1.0 / ln_n.ln()
                }
            };
            let horizon = opts.horizon.unwrap_or((1.0 - b - eps) / a);
            if horizon <= 0.0 {
                return Err(Error::invalid(
                    "empty phase-four window: 1 - b - eps must be positive",
                ));
            }
            let start_exponent = params.log_n_plus(levels.mid as f64);
            sup_deviation_from_line(
                &GwParams::resident(params)?,
                levels.mid,
                false,
                params,
                horizon,
                start_exponent,
                opts.event_cap,
                rng,
            )
        }
        Phase::Five => {
            if levels.low < 1 {
                return Err(Error::invalid("N too small: ln(N)/phi below 1"));
            }
            let stop = StopRule::absorption().with_cap(opts.event_cap);
            let end = simulate_gw_visit(
                &GwParams::resident(params)?,
                levels.low,
                false,
                &stop,
                rng,
                |_, _| {},
            )?;
            Ok(end.time * phi / ln_n)
        }
    }
}

/// Sup deviation of log_N^+ Z(t * ln(N)/phi) from the line
/// intercept + (rate/phi) t over the rescaled window [0, horizon].
/// With the mutant rates the slope is a; with the resident rates it is -a.
fn sup_deviation_from_line<R: Rng>(
    gw: &GwParams,
    start: u64,
    conditioned: bool,
    params: &ModelParams,
    horizon: f64,
    intercept: f64,
    event_cap: u64,
    rng: &mut R,
) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("deviation window must have positive length"));
    }
    let ln_n = params.log_n();
    let phi = params.phi();
    let slope = gw.rate() / phi;
    let natural_horizon = horizon * ln_n / phi;
    let stop = StopRule::horizon(natural_horizon).with_cap(event_cap);

    // The rescaled path is constant between jumps and the centering line is
    // linear, so the deviation on each interval is maximal at an endpoint.
    let line = |t: f64| intercept + slope * t;
    let mut prev_v = params.log_n_plus(start as f64);
    let mut sup = (prev_v - line(0.0)).abs();
    let end = simulate_gw_visit(gw, start, conditioned, &stop, rng, |u, k| {
        let t = u * phi / ln_n;
        let before = (prev_v - line(t)).abs();
        if before > sup {
            sup = before;
        }
        prev_v = params.log_n_plus(k as f64);
        let after = (prev_v - line(t)).abs();
        if after > sup {
            sup = after;
        }
    })?;
    // Close the final interval at the horizon (or at absorption, after which
    // the path is 0 and stays there).
    let t_end = (end.time * phi / ln_n).min(horizon);
    let tail = (prev_v - line(t_end)).abs();
    if tail > sup {
        sup = tail;
    }
    if end.absorbed {
        let t_abs = end.time * phi / ln_n;
        if t_abs < horizon {
            // Deviation of the flat zero tail is largest at one of the ends.
            for t in [t_abs, horizon] {
                let d = line(t).abs();
                if d > sup {
                    sup = d;
                }
            }
        }
    }
    Ok(sup)
}

/// Sup deviation of the rescaled log path from (log_N start) + (rate/phi) t:
/// the deterministic-growth statistic for free-running processes started at
/// polynomial size.
pub fn malthusian_deviation<R: Rng>(
    gw: &GwParams,
    start: u64,
    params: &ModelParams,
    horizon: f64,
    rng: &mut R,
) -> Result<f64> {
    if start < 1 {
        return Err(Error::invalid("start must be >= 1"));
    }
    let intercept = params.log_n_plus(start as f64);
    sup_deviation_from_line(
        gw,
        start,
        false,
        params,
        horizon,
        intercept,
        DEFAULT_EVENT_CAP,
        rng,
    )
}
