//! Cadlag paths on a closed window, their extended graphs, and the Skorokhod
//! M1 distance computed as the Frechet distance between extended-graph
//! polylines, reported as a certified bracket.
//!
//! A path is a finite list of linear pieces; jumps happen where one piece's
//! left limit disagrees with the next piece's value. The extended graph fills
//! each jump with a vertical segment, and the M1 distance is approximated by
//! the discrete Frechet distance between constant-speed samplings of the two
//! polylines. Sampling at arc spacing h brackets the true distance within h.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximum number of dynamic-program cells one distance evaluation may use.
const DP_CELL_CAP: usize = 1 << 30;

/// Right-continuous path with left limits on a closed window, made of
/// finitely many linear pieces. Piece i covers [times[i], times[i+1]) with
/// values running linearly from v0[i] to v1[i]; the window's right endpoint
/// takes the last piece's closing value. An optional `pre_start` value
/// records the left limit at the window start, so a wall at the boundary is
/// part of the extended graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CadlagPath {
    times: Vec<f64>,
    v0: Vec<f64>,
    v1: Vec<f64>,
    pre_start: Option<f64>,
}

impl CadlagPath {
    pub fn from_pieces(times: Vec<f64>, v0: Vec<f64>, v1: Vec<f64>) -> Result<CadlagPath> {
        if times.len() < 2 || v0.len() != times.len() - 1 || v1.len() != times.len() - 1 {
            return Err(Error::invalid("piece arrays must align: k+1 times, k values"));
        }
        if !times.iter().all(|t| t.is_finite())
            || !v0.iter().chain(v1.iter()).all(|v| v.is_finite())
        {
            return Err(Error::invalid("path coordinates must be finite"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("piece times must be strictly increasing"));
        }
        Ok(CadlagPath { times, v0, v1, pre_start: None })
    }

    pub fn constant(window: (f64, f64), v: f64) -> Result<CadlagPath> {
        Self::from_pieces(vec![window.0, window.1], vec![v], vec![v])
    }

    /// Step function: starts at `initial`, jumps to each new value at its
    /// time. Jump times must be strictly increasing and strictly inside the
    /// window (a jump at the right endpoint has no room to be cadlag).
    pub fn step_fn(window: (f64, f64), initial: f64, jumps: &[(f64, f64)]) -> Result<CadlagPath> {
        let (a, b) = window;
        if !jumps.iter().all(|&(t, _)| t > a && t < b) {
            return Err(Error::invalid("jump times must lie strictly inside the window"));
        }
        let mut times = Vec::with_capacity(jumps.len() + 2);
        let mut vals = Vec::with_capacity(jumps.len() + 1);
        times.push(a);
        vals.push(initial);
        for &(t, v) in jumps {
            times.push(t);
            vals.push(v);
        }
        times.push(b);
        Self::from_pieces(times, vals.clone(), vals)
    }

    /// Continuous piecewise-linear path through the given points.
    pub fn from_points_linear(points: &[(f64, f64)]) -> Result<CadlagPath> {
        if points.len() < 2 {
            return Err(Error::invalid("need at least two points"));
        }
        let times: Vec<f64> = points.iter().map(|p| p.0).collect();
        let v0: Vec<f64> = points[..points.len() - 1].iter().map(|p| p.1).collect();
        let v1: Vec<f64> = points[1..].iter().map(|p| p.1).collect();
        Self::from_pieces(times, v0, v1)
    }

    /// Declares the left limit at the window start, placing a wall at the
    /// boundary into the extended graph.
    pub fn with_pre_start(mut self, v: f64) -> Result<CadlagPath> {
        if !v.is_finite() {
            return Err(Error::invalid("pre-start value must be finite"));
        }
        self.pre_start = Some(v);
        Ok(self)
    }

    pub fn window(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn pre_start(&self) -> Option<f64> {
        self.pre_start
    }

    fn lerp(&self, i: usize, t: f64) -> f64 {
        let (u, w) = (self.times[i], self.times[i + 1]);
        if t <= u {
            self.v0[i]
        } else if t >= w {
            self.v1[i]
        } else {
            self.v0[i] + (self.v1[i] - self.v0[i]) * ((t - u) / (w - u))
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (a, b) = self.window();
        if !(t >= a && t <= b) {
            return Err(Error::invalid(format!("t = {t} outside window [{a}, {b}]")));
        }
        if t == b {
            return Ok(*self.v1.last().unwrap());
        }
        let i = self.times.partition_point(|&u| u <= t) - 1;
        Ok(self.lerp(i, t))
    }

    /// Left limit at t, for t strictly inside or at the right edge. At the
    /// window start the declared pre-start value is returned if present.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        let (a, b) = self.window();
        if t == a {
            return self
                .pre_start
                .ok_or_else(|| Error::invalid("no left limit declared at the window start"));
        }
        if !(t > a && t <= b) {
            return Err(Error::invalid(format!("t = {t} outside window ({a}, {b}]")));
        }
        let i = self.times.partition_point(|&u| u < t) - 1;
        Ok(self.lerp(i, t.min(self.times[i + 1])))
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.monotone(|x, y| x <= y)
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.monotone(|x, y| x >= y)
    }

    fn monotone(&self, ok: impl Fn(f64, f64) -> bool) -> bool {
        let k = self.v0.len();
        if let Some(p) = self.pre_start {
            if !ok(p, self.v0[0]) {
                return false;
            }
        }
        (0..k).all(|i| ok(self.v0[i], self.v1[i]))
            && (1..k).all(|i| ok(self.v1[i - 1], self.v0[i]))
    }

    /// Restriction to [lo, hi], a subwindow. The restricted path remembers
    /// the left limit at lo as its pre-start value. If the original path
    /// jumps exactly at hi, the restriction closes with the left limit there.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<CadlagPath> {
        let (a, b) = self.window();
        if !(lo >= a && hi <= b && lo < hi) {
            return Err(Error::invalid(format!(
                "[{lo}, {hi}] is not a subwindow of [{a}, {b}]"
            )));
        }
        let mut times = Vec::new();
        let mut v0 = Vec::new();
        let mut v1 = Vec::new();
        for i in 0..self.v0.len() {
            let (u, w) = (self.times[i], self.times[i + 1]);
            let cu = u.max(lo);
            let cw = w.min(hi);
            if cu >= cw {
                continue;
            }
            times.push(cu);
            v0.push(self.lerp(i, cu));
            v1.push(self.lerp(i, cw));
        }
        times.push(hi);
        let mut out = CadlagPath { times, v0, v1, pre_start: None };
        out.pre_start = if lo > a { Some(self.left_limit(lo)?) } else { self.pre_start };
        Ok(out)
    }

    /// Time reversal: the path t -> f(a + b - t), re-expressed as a cadlag
    /// path (jump values switch sides, as the reversal of a right-continuous
    /// path is left-continuous).
    pub fn reversed(&self) -> CadlagPath {
        let (a, b) = self.window();
        let k = self.v0.len();
        let mut times = Vec::with_capacity(k + 1);
        let mut v0 = Vec::with_capacity(k);
        let mut v1 = Vec::with_capacity(k);
        for i in (0..k).rev() {
            times.push(a + b - self.times[i + 1]);
            v0.push(self.v1[i]);
            v1.push(self.v0[i]);
        }
        times.push(b);
        CadlagPath { times, v0, v1, pre_start: None }
    }

    /// Running maximum: t -> sup of the path over [start, t], including left
    /// limits. Always nondecreasing. Any declared pre-start value is dropped.
    pub fn running_max(&self) -> CadlagPath {
        let mut times = vec![self.times[0]];
        let mut v0 = Vec::new();
        let mut v1 = Vec::new();
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.v0.len() {
            let (u, w) = (self.times[i], self.times[i + 1]);
            m = m.max(self.v0[i]);
            if self.v1[i] <= m {
                // Piece never exceeds the record: flat at m.
                push_piece(&mut times, &mut v0, &mut v1, w, m, m);
            } else if self.v0[i] >= m {
                // Rising piece above the record: the max follows it.
                push_piece(&mut times, &mut v0, &mut v1, w, self.v0[i], self.v1[i]);
            } else {
                // Record is crossed mid-piece: flat, then ramp.
                let frac = (m - self.v0[i]) / (self.v1[i] - self.v0[i]);
                let cross = u + frac * (w - u);
                if cross > u {
                    push_piece(&mut times, &mut v0, &mut v1, cross, m, m);
                }
                push_piece(&mut times, &mut v0, &mut v1, w, m, self.v1[i]);
            }
            m = m.max(self.v1[i]);
        }
        CadlagPath { times, v0, v1, pre_start: None }
    }

    /// Running maximum of the time reversal: t -> sup of the path over
    /// [start + end - t, end]. Always nondecreasing.
    pub fn running_max_reversed(&self) -> CadlagPath {
        self.reversed().running_max()
    }

    /// Exact sup of |f - g| over the intersection of the windows, accounting
    /// for one-sided limits at jumps. Pre-start values are limit conventions
    /// outside the window and do not enter.
    pub fn sup_abs_diff(&self, other: &CadlagPath) -> Result<f64> {
        let (lo, hi) = intersect_windows(self, other)?;
        let mut cuts: Vec<f64> = self
            .times
            .iter()
            .chain(other.times.iter())
            .copied()
            .filter(|&t| t >= lo && t <= hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut sup = (self.value(lo)? - other.value(lo)?).abs();
        for &t in &cuts[1..] {
            let left = (self.left_limit(t)? - other.left_limit(t)?).abs();
            let right = (self.value(t)? - other.value(t)?).abs();
            sup = sup.max(left).max(right);
        }
        Ok(sup)
    }
}

fn push_piece(times: &mut Vec<f64>, v0: &mut Vec<f64>, v1: &mut Vec<f64>, end: f64, a: f64, b: f64) {
    // Merge with the previous piece when the junction is continuous and
    // collinear in slope zero (the common flat-flat case).
    if let (Some(&pv), Some(last_v0)) = (v1.last(), v0.last().copied()) {
        if pv == a && pv == last_v0 && a == b {
            *v1.last_mut().unwrap() = b;
            *times.last_mut().unwrap() = end;
            return;
        }
    }
    times.push(end);
    v0.push(a);
    v1.push(b);
}

fn intersect_windows(f: &CadlagPath, g: &CadlagPath) -> Result<(f64, f64)> {
    let (fa, fb) = f.window();
    let (ga, gb) = g.window();
    let lo = fa.max(ga);
    let hi = fb.min(gb);
    if lo > hi {
        return Err(Error::DomainMismatch);
    }
    Ok((lo, hi))
}

/// The completed graph of a cadlag path: its graph plus a vertical segment
/// across every jump, traced as a polyline ordered by time and, within a
/// jump, by distance from the left limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedGraph {
    vertices: Vec<(f64, f64)>,
}

impl ExtendedGraph {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn arc_length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }

    /// Constant-speed sampling with n grid points merged with every vertex,
    /// so the polyline's corners are always sample points. Returns the
    /// parametric representation and the realized maximum arc spacing.
    pub fn uniform_speed_param(&self, n: usize) -> Result<(ParamRep, f64)> {
        if n < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        let mut cum = Vec::with_capacity(self.vertices.len());
        let mut total = 0.0;
        cum.push(0.0);
        for w in self.vertices.windows(2) {
            total += ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            cum.push(total);
        }
        if total == 0.0 {
            return Ok((ParamRep { points: vec![self.vertices[0]] }, 0.0));
        }
        // Merge the uniform grid with the vertex arc positions.
        let mut arcs: Vec<f64> = (0..n).map(|j| total * j as f64 / (n - 1) as f64).collect();
        arcs.extend(cum.iter().copied());
        arcs.sort_by(f64::total_cmp);
        arcs.dedup();
        let mut points = Vec::with_capacity(arcs.len());
        let mut spacing = 0.0f64;
        let mut prev_arc = 0.0;
        let mut seg = 0usize;
        for &s in &arcs {
            while seg + 1 < cum.len() - 1 && cum[seg + 1] <= s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let p = if len == 0.0 {
                self.vertices[seg]
            } else {
                let f = ((s - cum[seg]) / len).clamp(0.0, 1.0);
                let (x0, y0) = self.vertices[seg];
                let (x1, y1) = self.vertices[seg + 1];
                (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
            };
            spacing = spacing.max(s - prev_arc);
            prev_arc = s;
            points.push(p);
        }
        Ok((ParamRep { points }, spacing))
    }
}

/// Discrete trace of a parametric representation: ordered points on the
/// extended graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRep {
    points: Vec<(f64, f64)>,
}

impl ParamRep {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Order check: time coordinates never decrease, and points sharing a
    /// time move monotonically in value (a vertical segment is traversed one
    /// way).
    pub fn is_ordered(&self) -> bool {
        let p = &self.points;
        if !p.windows(2).all(|w| w[1].0 >= w[0].0) {
            return false;
        }
        for i in 1..p.len().saturating_sub(1) {
            if p[i].0 == p[i - 1].0 && p[i].0 == p[i + 1].0 {
                let up = p[i].1 >= p[i - 1].1;
                let still_up = p[i + 1].1 >= p[i].1;
                if up != still_up && p[i + 1].1 != p[i].1 && p[i].1 != p[i - 1].1 {
                    return false;
                }
            }
        }
        true
    }
}

impl CadlagPath {
    pub fn extended_graph(&self) -> ExtendedGraph {
        let mut vertices: Vec<(f64, f64)> = Vec::with_capacity(self.v0.len() * 2 + 2);
        let push = |v: (f64, f64), out: &mut Vec<(f64, f64)>| {
            if out.last() != Some(&v) {
                out.push(v);
            }
        };
        if let Some(p) = self.pre_start {
            push((self.times[0], p), &mut vertices);
        }
        push((self.times[0], self.v0[0]), &mut vertices);
        for i in 0..self.v0.len() {
            push((self.times[i + 1], self.v1[i]), &mut vertices);
            if i + 1 < self.v0.len() {
                push((self.times[i + 1], self.v0[i + 1]), &mut vertices);
            }
        }
        ExtendedGraph { vertices }
    }
}

/// Certified bracket around an M1 distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct M1Bracket {
    pub lower: f64,
    pub upper: f64,
    /// Arc spacing of the final sampling; also the bracket's width budget.
    pub spacing: f64,
    /// Grid size of the final sampling (vertices come on top).
    pub samples: usize,
}

impl M1Bracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.lower && d <= self.upper
    }

    pub fn overlaps(&self, other: &M1Bracket) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// Discrete Frechet distance between two point sequences (Euclidean plane),
/// dynamic program over monotone matchings with rolling rows. Works on
/// squared distances; the square root is taken once at the end.
fn discrete_frechet(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    debug_assert!(na > 0 && nb > 0);
    let d2 = |p: (f64, f64), q: (f64, f64)| {
        let dx = p.0 - q.0;
        let dy = p.1 - q.1;
        dx * dx + dy * dy
    };
    let mut prev = vec![0.0f64; nb];
    let mut cur = vec![0.0f64; nb];
    prev[0] = d2(a[0], b[0]);
    for j in 1..nb {
        prev[j] = prev[j - 1].max(d2(a[0], b[j]));
    }
    for i in 1..na {
        cur[0] = prev[0].max(d2(a[i], b[0]));
        for j in 1..nb {
            let reach = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = reach.max(d2(a[i], b[j]));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[nb - 1].sqrt()
}

fn restricted_graphs(f: &CadlagPath, g: &CadlagPath) -> Result<(ExtendedGraph, ExtendedGraph)> {
    let (lo, hi) = intersect_windows(f, g)?;
    if lo == hi {
        return Err(Error::EmptyWindow);
    }
    let fg = if f.window() == (lo, hi) { f.extended_graph() } else { f.restrict(lo, hi)?.extended_graph() };
    let gg = if g.window() == (lo, hi) { g.extended_graph() } else { g.restrict(lo, hi)?.extended_graph() };
    Ok((fg, gg))
}

fn bracket_at(ga: &ExtendedGraph, gb: &ExtendedGraph, n: usize) -> Result<M1Bracket> {
    let (pa, ha) = ga.uniform_speed_param(n)?;
    let (pb, hb) = gb.uniform_speed_param(n)?;
    let cells = pa.points.len().saturating_mul(pb.points.len());
    if cells > DP_CELL_CAP {
        return Err(Error::ToleranceUnreachable { samples: n });
    }
    let d = discrete_frechet(&pa.points, &pb.points);
    let spacing = ha.max(hb);
    Ok(M1Bracket { lower: (d - spacing).max(0.0), upper: d, spacing, samples: n })
}

/// M1 distance between two cadlag paths on the intersection of their
/// windows, as a bracket of width at most `tol`.
///
/// The upper bound is the discrete Frechet distance between constant-speed
/// samplings of the extended graphs (vertices included, so it dominates the
/// continuous Frechet distance); subtracting the realized arc spacing gives
/// the lower bound, because any continuous matching can be snapped to sample
/// points while moving each point at most one spacing along its curve. The
/// grid doubles until the bracket closes.
pub fn m1_distance(f: &CadlagPath, g: &CadlagPath, tol: f64) -> Result<M1Bracket> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let (ga, gb) = restricted_graphs(f, g)?;
    let mut n = 64usize;
    loop {
        let bracket = bracket_at(&ga, &gb, n)?;
        if bracket.width() <= tol {
            return Ok(bracket);
        }
        n *= 2;
    }
}

/// Single bracket evaluation at a fixed sampling resolution, without the
/// doubling loop. Dense fixed grids serve as reference values for the
/// adaptive bracket.
pub fn m1_at_resolution(f: &CadlagPath, g: &CadlagPath, n: usize) -> Result<M1Bracket> {
    if n == 0 {
        return Err(Error::invalid("resolution must be positive"));
    }
    let (ga, gb) = restricted_graphs(f, g)?;
    bracket_at(&ga, &gb, n)
}

/// Upper bound on the M1 distance of two paths that are monotone in the same
/// direction: the synchronous parametrization achieves the sup distance, so
/// sup|f - g| bounds d_M1 from above.
pub fn m1_monotone_bound(f: &CadlagPath, g: &CadlagPath) -> Result<f64> {
    let both_up = f.is_nondecreasing() && g.is_nondecreasing();
    let both_down = f.is_nonincreasing() && g.is_nonincreasing();
    if !(both_up || both_down) {
        return Err(Error::NotMonotone);
    }
    f.sup_abs_diff(g)
}
