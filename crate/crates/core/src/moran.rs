//! Two-type Moran model with selection: exact simulation, fixation
//! probabilities, conditioning on fixation, and the time-change that turns a
//! pair of branching paths into a Moran pair.
//!
//! State is the mutant count m in [0, N]. The mutant count gains one head at
//! rate (1+s) m (N-m)/N and loses one at rate m (N-m)/N, where s = a * phi.

use crate::error::{Error, Result};
use crate::gw::{stage_levels, GwPath};
use crate::params::ModelParams;
use crate::stats::Kahan;
use crate::walks::DEFAULT_EVENT_CAP;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

/// Jump rates of the resident count at resident state k: the resident count
/// moves up at rate k(N-k)/N and down at rate (1+s) k(N-k)/N.
pub fn moran_rates(params: &ModelParams, resident: u64) -> Result<(f64, f64)> {
    let n = params.n();
    if resident > n {
        return Err(Error::invalid(format!("resident count {resident} exceeds N = {n}")));
    }
    let k = resident as f64;
    let base = k * (n - resident) as f64 / n as f64;
    Ok((base, (1.0 + params.s()) * base))
}

/// Exact fixation probability from m mutants:
/// (1 - r^m) / (1 - r^N) with r = 1/(1+s). Evaluated as a ratio of expm1
/// terms, stable for s close to 0 and for large N.
pub fn fixation_prob_exact(params: &ModelParams, m: u64) -> Result<f64> {
    params.require_selection()?;
    let n = params.n();
    if m > n {
        return Err(Error::invalid(format!("mutant count {m} exceeds N = {n}")));
    }
    let l = -params.s().ln_1p(); // ln r < 0
    Ok(f64::exp_m1(m as f64 * l) / f64::exp_m1(n as f64 * l))
}

/// How much of a path the simulator keeps. Levels always refer to mutant
/// counts. The initial state and the absorption event are recorded under
/// every policy.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordPolicy {
    /// Every jump.
    Full,
    /// First-passage times of the given levels only; the recorded path is the
    /// monotone skeleton of the sweep.
    FirstPassage(Vec<u64>),
    /// Every crossing (either direction) of the given levels, so downward
    /// excursions on the logarithmic scale survive recording.
    Crossings(Vec<u64>),
    /// State snapshots at integer multiples of dt.
    TimeGrid(f64),
}

impl RecordPolicy {
    /// Geometric level grid: the distinct values of round(N^(j/m)),
    /// j = 0..=m, giving resolution 1/m on the log_N scale.
    pub fn geometric_levels(n: u64, per_unit: u32) -> Vec<u64> {
        let m = per_unit.max(1);
        let mut levels: Vec<u64> = (0..=m)
            .map(|j| (n as f64).powf(j as f64 / m as f64).round() as u64)
            .collect();
        levels.push(n);
        levels.sort_unstable();
        levels.dedup();
        levels
    }

    /// Crossing recording on the geometric grid, its mirror image N - grid
    /// (so the resident count keeps the same log-resolution near fixation),
    /// plus caller-marked levels.
    pub fn log_crossings(n: u64, per_unit: u32, marks: &[u64]) -> RecordPolicy {
        let mut levels = Self::geometric_levels(n, per_unit);
        let mirrored: Vec<u64> = levels.iter().map(|&l| n - l).filter(|&l| l > 0).collect();
        levels.extend(mirrored);
        levels.extend_from_slice(marks);
        levels.sort_unstable();
        levels.dedup();
        RecordPolicy::Crossings(levels)
    }

    fn validate(&self) -> Result<()> {
        match self {
            RecordPolicy::TimeGrid(dt) if !(dt > &0.0) => {
                Err(Error::invalid(format!("time grid step {dt} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Fixation,
    Loss,
}

/// Recorded Moran path. Breakpoints hold (time, resident count) with the
/// initial state at time 0 first; the mutant count is N - resident.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPath {
    n: u64,
    breakpoints: Vec<(f64, u64)>,
    terminal: Terminal,
    end_time: f64,
}

impl SweepPath {
    pub fn n(&self) -> u64 {
        self.n
    }

    /// (time, resident count) in increasing time order, starting at time 0.
    pub fn breakpoints(&self) -> &[(f64, u64)] {
        &self.breakpoints
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    /// Absorption time.
    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn start_mutants(&self) -> u64 {
        self.n - self.breakpoints[0].1
    }

    pub fn mutants(&self, idx: usize) -> u64 {
        self.n - self.breakpoints[idx].1
    }

    /// Absorption time of a fixating path; loss paths have none.
    pub fn fixation_time(&self) -> Result<f64> {
        match self.terminal {
            Terminal::Fixation => Ok(self.end_time),
            Terminal::Loss => Err(Error::LossPath),
        }
    }

    /// First recorded time with mutant count >= eps * N. Exact when the
    /// threshold level is recorded (always under `Full`); otherwise the first
    /// recorded breakpoint at or above the threshold.
    pub fn hitting_time(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!("threshold fraction {eps} outside (0, 1]")));
        }
        let target = (eps * self.n as f64).ceil().max(1.0) as u64;
        self.breakpoints
            .iter()
            .find(|&&(_, res)| self.n - res >= target)
            .map(|&(t, _)| t)
            .ok_or_else(|| {
                Error::Undefined(format!("path never reaches mutant count {target}"))
            })
    }

    /// First recorded time with mutant count >= level.
    pub fn level_hit_time(&self, level: u64) -> Option<f64> {
        self.breakpoints
            .iter()
            .find(|&&(_, res)| self.n - res >= level)
            .map(|&(t, _)| t)
    }
}

/// Terminal summary of a visitor-driven run.
#[derive(Clone, Copy, Debug)]
pub struct MoranEnd {
    pub time: f64,
    pub terminal: Terminal,
    pub events: u64,
}

enum Recorder {
    Full,
    FirstPassage { levels: Vec<u64>, hit: Vec<bool> },
    Crossings { levels: Vec<u64> },
    TimeGrid { dt: f64, next: f64 },
}

impl Recorder {
    fn new(policy: &RecordPolicy) -> Result<Recorder> {
        policy.validate()?;
        Ok(match policy {
            RecordPolicy::Full => Recorder::Full,
            RecordPolicy::FirstPassage(levels) => {
                let mut l = levels.clone();
                l.sort_unstable();
                l.dedup();
                let hit = vec![false; l.len()];
                Recorder::FirstPassage { levels: l, hit }
            }
            RecordPolicy::Crossings(levels) => {
                let mut l = levels.clone();
                l.sort_unstable();
                l.dedup();
                Recorder::Crossings { levels: l }
            }
            RecordPolicy::TimeGrid(dt) => Recorder::TimeGrid { dt: *dt, next: *dt },
        })
    }

    /// Decide whether the jump to `mutants` at time `t` is kept. For the time
    /// grid, emit the snapshots due strictly before `t` at the previous state.
    fn on_event(
        &mut self,
        t: f64,
        mutants: u64,
        prev_mutants: u64,
        out: &mut Vec<(f64, u64)>,
        n: u64,
    ) {
        match self {
            Recorder::Full => out.push((t, n - mutants)),
            Recorder::FirstPassage { levels, hit } => {
                if let Ok(i) = levels.binary_search(&mutants) {
                    if !hit[i] {
                        hit[i] = true;
                        out.push((t, n - mutants));
                    }
                }
            }
            Recorder::Crossings { levels } => {
                if levels.binary_search(&mutants).is_ok() {
                    out.push((t, n - mutants));
                }
            }
            Recorder::TimeGrid { dt, next } => {
                while *next < t {
                    out.push((*next, n - prev_mutants));
                    *next += *dt;
                }
            }
        }
    }
}

fn conditioned_up_probs(params: &ModelParams) -> Vec<f64> {
    // up(m) = p * h(m+1)/h(m), h(m) = 1 - r^m; the 1 - r^N normalizer cancels.
    let n = params.n() as usize;
    let p = (1.0 + params.s()) / (2.0 + params.s());
    let l = -params.s().ln_1p();
    let mut probs = vec![0.0; n];
    for m in 1..n {
        probs[m] = p * f64::exp_m1((m + 1) as f64 * l) / f64::exp_m1(m as f64 * l);
    }
    probs
}

/// Core jump-chain driver on the mutant count. `visit` sees
/// (time, mutant count) after every jump, including the absorbing one.
pub fn simulate_moran_visit<R: Rng, F: FnMut(f64, u64)>(
    params: &ModelParams,
    start_mutants: u64,
    conditioned: bool,
    event_cap: u64,
    rng: &mut R,
    mut visit: F,
) -> Result<MoranEnd> {
    let n = params.n();
    if start_mutants > n {
        return Err(Error::invalid(format!(
            "start mutant count {start_mutants} exceeds N = {n}"
        )));
    }
    if conditioned {
        params.require_selection()?;
        if start_mutants == 0 || start_mutants == n {
            return Err(Error::invalid(
                "conditioning on fixation requires a start strictly inside (0, N)",
            ));
        }
    }
    let s = params.s();
    let total_factor = 2.0 + s;
    let plain_up = (1.0 + s) / total_factor;
    let cond_up = conditioned.then(|| conditioned_up_probs(params));

    let mut m = start_mutants;
    let mut clock = Kahan::new();
    let mut events: u64 = 0;
    let nf = n as f64;
    while m != 0 && m != n {
        events += 1;
        if events > event_cap {
            return Err(Error::EventCapExceeded { cap: event_cap });
        }
        let rate = total_factor * m as f64 * (n - m) as f64 / nf;
        let e: f64 = Exp1.sample(rng);
        clock.add(e / rate);
        let up_prob = match &cond_up {
            Some(table) => table[m as usize],
            None => plain_up,
        };
        if rng.random::<f64>() < up_prob {
            m += 1;
        } else {
            m -= 1;
        }
        visit(clock.value(), m);
    }
    let terminal = if m == n { Terminal::Fixation } else { Terminal::Loss };
    Ok(MoranEnd { time: clock.value(), terminal, events })
}

fn run_recorded<R: Rng>(
    params: &ModelParams,
    start_mutants: u64,
    conditioned: bool,
    record: &RecordPolicy,
    rng: &mut R,
) -> Result<SweepPath> {
    let n = params.n();
    let mut recorder = Recorder::new(record)?;
    let mut breakpoints = vec![(0.0, n - start_mutants)];
    let mut prev = start_mutants;
    let end = simulate_moran_visit(params, start_mutants, conditioned, DEFAULT_EVENT_CAP, rng, |t, m| {
        recorder.on_event(t, m, prev, &mut breakpoints, n);
        prev = m;
    })?;
    // The absorbing state is part of the contract under every policy.
    let final_resident = match end.terminal {
        Terminal::Fixation => 0,
        Terminal::Loss => n,
    };
    if breakpoints.last() != Some(&(end.time, final_resident)) {
        breakpoints.push((end.time, final_resident));
    }
    Ok(SweepPath { n, breakpoints, terminal: end.terminal, end_time: end.time })
}

/// Exact Moran path from `start_mutants` until absorption. This is the one
/// operation that admits s = 0 (neutral drift), as a test oracle with
/// fixation probability m/N.
pub fn simulate_moran<R: Rng>(
    params: &ModelParams,
    start_mutants: u64,
    record: &RecordPolicy,
    rng: &mut R,
) -> Result<SweepPath> {
    run_recorded(params, start_mutants, false, record, rng)
}

/// Moran path from a single mutant conditioned on fixation: holding rates
/// unchanged, jump probabilities h-transformed with the ruin probability
/// h(m) = (1 - r^m)/(1 - r^N). Always ends in fixation.
pub fn simulate_moran_conditioned_fixation<R: Rng>(
    params: &ModelParams,
    record: &RecordPolicy,
    rng: &mut R,
) -> Result<SweepPath> {
    run_recorded(params, 1, true, record, rng)
}

/// Glues a mutant-line path (conditioned to reach N(1 - 1/sqrt(ln N)) from a
/// single head) and an independent resident-line path (from the complement
/// level) into one Moran path, by dividing every holding time by
/// f = (N - z)/N where z is the branching state holding in that interval.
///
/// The output has the law of a Moran path given that the mutant count reaches
/// the junction level; conditioned on fixation it has exactly the law of a
/// fixating Moran path.
pub fn build_time_changed_pair(
    z1: &GwPath,
    z0: &GwPath,
    params: &ModelParams,
) -> Result<SweepPath> {
    params.require_selection()?;
    let n = params.n();
    let junction = stage_levels(params).high;
    if junction == 0 || junction >= n {
        return Err(Error::invalid("N too small for the junction level"));
    }
    let complement = n - junction;
    if z1.start() != 1 {
        return Err(Error::PathContract("mutant path must start from 1".into()));
    }
    if z1.absorbed() || z1.final_size() != junction {
        return Err(Error::PathContract(format!(
            "mutant path must end at the junction level {junction}"
        )));
    }
    if z0.start() != complement {
        return Err(Error::PathContract(format!(
            "resident path must start at the complement level {complement}"
        )));
    }
    let z0_final = z0.final_size();
    if !(z0.absorbed() || z0_final == n) {
        return Err(Error::PathContract(
            "resident path must end absorbed at 0 or at N".into(),
        ));
    }
    if z0.events().iter().any(|&(_, k)| k > n) {
        return Err(Error::PathContract("resident path exceeds N".into()));
    }

    let nf = n as f64;
    let mut clock = Kahan::new();
    let mut breakpoints = vec![(0.0, n - 1)];

    // First leg: the tracked state is the mutant count.
    let mut prev_t = 0.0;
    let mut prev_z = 1u64;
    for &(t, z) in z1.events() {
        let f = (n - prev_z) as f64 / nf;
        clock.add((t - prev_t) / f);
        breakpoints.push((clock.value(), n - z));
        prev_t = t;
        prev_z = z;
    }
    // Second leg: the tracked state is the resident count; the mutant count
    // is its complement and is continuous across the junction.
    let mut prev_t = 0.0;
    let mut prev_z = complement;
    for &(t, z) in z0.events() {
        let f = (n - prev_z) as f64 / nf;
        clock.add((t - prev_t) / f);
        breakpoints.push((clock.value(), z));
        prev_t = t;
        prev_z = z;
    }
    let terminal = if z0.absorbed() { Terminal::Fixation } else { Terminal::Loss };
    Ok(SweepPath { n, breakpoints, terminal, end_time: clock.value() })
}

// ---------------------------------------------------------------------------
// Serialization: a plain-text CSV and a compact binary breakpoint format,
// both carrying an explicit version.

pub const SWEEP_CSV_VERSION: u32 = 1;
pub const SWEEP_BIN_VERSION: u16 = 1;
const SWEEP_BIN_MAGIC: &[u8; 4] = b"SWPB";

impl SweepPath {
    /// CSV with two comment headers followed by (time, resident, mutant)
    /// rows. Floats print in shortest round-trip form, so a parse after a
    /// write reproduces the path bit for bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sweep-path-csv v{SWEEP_CSV_VERSION}")?;
        writeln!(
            w,
            "# n={} terminal={}",
            self.n,
            match self.terminal {
                Terminal::Fixation => "fixation",
                Terminal::Loss => "loss",
            }
        )?;
        writeln!(w, "time,resident,mutant")?;
        for &(t, res) in &self.breakpoints {
            writeln!(w, "{},{},{}", t, res, self.n - res)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SweepPath> {
        let mut lines = BufReader::new(r).lines();
        let version = lines
            .next()
            .ok_or_else(|| Error::Format("empty file".into()))??;
        if version.trim() != format!("# sweep-path-csv v{SWEEP_CSV_VERSION}") {
            return Err(Error::Format(format!("unsupported header: {version}")));
        }
        let meta = lines
            .next()
            .ok_or_else(|| Error::Format("missing metadata line".into()))??;
        let meta = meta.trim_start_matches('#').trim();
        let mut n: Option<u64> = None;
        let mut terminal: Option<Terminal> = None;
        for field in meta.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => {
                    n = Some(v.parse().map_err(|_| Error::Format(format!("bad n: {v}")))?)
                }
                Some(("terminal", "fixation")) => terminal = Some(Terminal::Fixation),
                Some(("terminal", "loss")) => terminal = Some(Terminal::Loss),
                _ => return Err(Error::Format(format!("bad metadata field: {field}"))),
            }
        }
        let n = n.ok_or_else(|| Error::Format("missing n".into()))?;
        let terminal = terminal.ok_or_else(|| Error::Format("missing terminal".into()))?;
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing column header".into()))??;
        if header.trim() != "time,resident,mutant" {
            return Err(Error::Format(format!("bad column header: {header}")));
        }
        let mut breakpoints = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad row: {line}")))?;
            let res: u64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad row: {line}")))?;
            let mut_count: u64 = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad row: {line}")))?;
            if res + mut_count != n {
                return Err(Error::Format(format!(
                    "resident {res} + mutant {mut_count} != n {n}"
                )));
            }
            breakpoints.push((t, res));
        }
        if breakpoints.is_empty() {
            return Err(Error::Format("path has no breakpoints".into()));
        }
        let end_time = breakpoints.last().unwrap().0;
        Ok(SweepPath { n, breakpoints, terminal, end_time })
    }

    /// Compact little-endian binary format: magic, version, terminal, N,
    /// breakpoint count, then (f64 time, u64 resident) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SWEEP_BIN_MAGIC)?;
        w.write_all(&SWEEP_BIN_VERSION.to_le_bytes())?;
        w.write_all(&[match self.terminal {
            Terminal::Fixation => 0u8,
            Terminal::Loss => 1u8,
        }])?;
        w.write_all(&self.n.to_le_bytes())?;
        w.write_all(&(self.breakpoints.len() as u64).to_le_bytes())?;
        for &(t, res) in &self.breakpoints {
            w.write_all(&t.to_le_bytes())?;
            w.write_all(&res.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<SweepPath> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SWEEP_BIN_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut v2 = [0u8; 2];
        r.read_exact(&mut v2)?;
        if u16::from_le_bytes(v2) != SWEEP_BIN_VERSION {
            return Err(Error::Format(format!(
                "unsupported binary version {}",
                u16::from_le_bytes(v2)
            )));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let terminal = match b1[0] {
            0 => Terminal::Fixation,
            1 => Terminal::Loss,
            x => return Err(Error::Format(format!("bad terminal tag {x}"))),
        };
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut breakpoints = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let t = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let res = u64::from_le_bytes(b8);
            breakpoints.push((t, res));
        }
        if breakpoints.is_empty() {
            return Err(Error::Format("path has no breakpoints".into()));
        }
        let end_time = breakpoints.last().unwrap().0;
        Ok(SweepPath { n, breakpoints, terminal, end_time })
    }
}
