//! Logarithmic rescaling of sweep paths and the limiting "house" profile.
//!
//! On the time scale t -> t * ln(N) / phi and the value scale
//! x -> ln(max(x,1)) / ln(N), a selective sweep's two population sizes
//! converge to a pair of piecewise-linear profiles: the mutant line climbs a
//! wall of height b at time 0 and a roof of slope a up to 1, the resident
//! line descends the mirror image and drops its wall at 2(1-b)/a. This
//! module builds those profiles, rescales recorded Moran paths onto the same
//! axes, and measures sup distances away from the walls.

use crate::error::{Error, Result};
use crate::gw::stage_levels;
use crate::m1::CadlagPath;
use crate::moran::SweepPath;
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which population line a rescaled path tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Line {
    Resident,
    Mutant,
}

/// The limiting profile pair: slope a > 0 and wall height b in [0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct House {
    a: f64,
    b: f64,
}

impl House {
    pub fn new(a: f64, b: f64) -> Result<House> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("slope a = {a} must be positive")));
        }
        if !(0.0..1.0).contains(&b) {
            return Err(Error::invalid(format!("wall height b = {b} outside [0, 1)")));
        }
        Ok(House { a, b })
    }

    /// The profile matching a parameter set: slope a, wall height
    /// -ln(phi)/ln(N).
    pub fn from_params(params: &ModelParams) -> Result<House> {
        params.require_selection()?;
        House::new(params.a(), params.b())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Time at which the mutant line reaches 1 (the roof ridge).
    pub fn t_ridge(&self) -> f64 {
        (1.0 - self.b) / self.a
    }

    /// Time at which the resident line drops to 0 (the far wall); also the
    /// limit of rescaled fixation times.
    pub fn t_end(&self) -> f64 {
        2.0 * (1.0 - self.b) / self.a
    }

    /// Exact evaluation, right-continuous at the walls.
    pub fn eval(&self, which: Line, t: f64) -> f64 {
        match which {
            Line::Mutant => {
                if t < 0.0 {
                    0.0
                } else if t < self.t_ridge() {
                    self.b + self.a * t
                } else {
                    1.0
                }
            }
            Line::Resident => {
                if t < self.t_ridge() {
                    1.0
                } else if t < self.t_end() {
                    2.0 - self.b - self.a * t
                } else {
                    0.0
                }
            }
        }
    }

    /// Window that covers both walls with margin: [-0.1, t_end + 0.3].
    pub fn default_window(&self) -> (f64, f64) {
        (-0.1, self.t_end() + 0.3)
    }

    /// The profile as a cadlag path on the given window. A window starting
    /// exactly at a wall keeps the wall in the extended graph through the
    /// recorded pre-start value.
    pub fn to_cadlag(&self, which: Line, window: (f64, f64)) -> Result<CadlagPath> {
        let (w0, w1) = window;
        if !(w0.is_finite() && w1.is_finite() && w0 < w1) {
            return Err(Error::invalid(format!("bad window [{w0}, {w1}]")));
        }
        let lo = w0.min(-1.0);
        let hi = w1.max(self.t_end() + 1.0);
        let full = match which {
            Line::Mutant => CadlagPath::from_pieces(
                vec![lo, 0.0, self.t_ridge(), hi],
                vec![0.0, self.b, 1.0],
                vec![0.0, 1.0, 1.0],
            )?,
            Line::Resident => CadlagPath::from_pieces(
                vec![lo, self.t_ridge(), self.t_end(), hi],
                vec![1.0, 1.0, 0.0],
                vec![1.0, self.b, 0.0],
            )?,
        };
        full.restrict(w0, w1)
    }
}

/// Rescales a recorded Moran path onto house axes: the value at rescaled
/// time t is ln(max(count, 1))/ln(N) for the chosen line at natural time
/// t * ln(N)/phi, extended by (mutant 0, resident 1) before time 0 and by the
/// absorbed state after absorption. Exact at recorded breakpoints; between
/// them the path holds its last recorded state, so recordings on a level
/// grid are accurate to the grid's log-resolution.
pub fn rescale(
    path: &SweepPath,
    params: &ModelParams,
    which: Line,
    window: (f64, f64),
) -> Result<CadlagPath> {
    if path.n() != params.n() {
        return Err(Error::invalid(format!(
            "path has N = {}, parameters have N = {}",
            path.n(),
            params.n()
        )));
    }
    let (w0, w1) = window;
    if !(w0.is_finite() && w1.is_finite() && w0 < w1) {
        return Err(Error::invalid(format!("bad window [{w0}, {w1}]")));
    }
    let scale = params.time_rescale();
    let pre = match which {
        Line::Resident => 1.0,
        Line::Mutant => 0.0,
    };
    let value_of = |resident: u64| -> f64 {
        let count = match which {
            Line::Resident => resident,
            Line::Mutant => path.n() - resident,
        };
        params.log_n_plus(count as f64)
    };
    // Assemble jumps on a wide window, collapsing breakpoints whose rescaled
    // times collide in floating point (the latest state wins).
    let mut jumps: Vec<(f64, f64)> = Vec::with_capacity(path.breakpoints().len());
    for &(s, res) in path.breakpoints() {
        let t = s * scale;
        let v = value_of(res);
        match jumps.last_mut() {
            Some(last) if t <= last.0 => last.1 = v,
            _ => jumps.push((t, v)),
        }
    }
    let end = path.end_time() * scale;
    let lo = w0.min(-1.0);
    let hi = w1.max(end + 1.0);
    let full = CadlagPath::step_fn((lo, hi), pre, &jumps)?;
    full.restrict(w0, w1)
}

/// Fixation time on the rescaled clock: absorption time times phi/ln(N).
pub fn fixation_time_rescaled(path: &SweepPath, params: &ModelParams) -> Result<f64> {
    Ok(path.fixation_time()? * params.time_rescale())
}

/// Levels whose first passages mark the middle-stage boundaries:
/// floor(N/ln N) and floor(N(1 - 1/sqrt(ln N))).
pub fn transition_levels(params: &ModelParams) -> (u64, u64) {
    let n = params.n() as f64;
    let l23 = (n / n.ln()).floor().max(1.0) as u64;
    (l23, stage_levels(params).high)
}

/// Rescaled first-passage times of the two transition levels on a fixation
/// path. The recording policy must have kept those levels (always true under
/// full recording).
pub fn phase_boundaries(path: &SweepPath, params: &ModelParams) -> Result<(f64, f64)> {
    path.fixation_time()?;
    let (l23, l34) = transition_levels(params);
    let scale = params.time_rescale();
    let t23 = path
        .level_hit_time(l23)
        .ok_or_else(|| Error::PathContract(format!("level {l23} missing from recording")))?;
    let t34 = path
        .level_hit_time(l34)
        .ok_or_else(|| Error::PathContract(format!("level {l34} missing from recording")))?;
    Ok((t23 * scale, t34 * scale))
}

fn window_intersection(f: &CadlagPath, g: &CadlagPath) -> Result<(f64, f64)> {
    let (fa, fb) = f.window();
    let (ga, gb) = g.window();
    let lo = fa.max(ga);
    let hi = fb.min(gb);
    if lo > hi {
        return Err(Error::DomainMismatch);
    }
    Ok((lo, hi))
}

fn sup_on(f: &CadlagPath, g: &CadlagPath, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok((f.value(lo)? - g.value(lo)?).abs());
    }
    f.restrict(lo, hi)?.sup_abs_diff(&g.restrict(lo, hi)?)
}

/// Sup of |f - g| away from the relevant wall: for the mutant line the set
/// excludes [0, eps) (the wall at time 0 never converges uniformly); for the
/// resident line it excludes (t_end - eps, t_end + eps) around the far wall.
pub fn sup_distance_restricted(
    f: &CadlagPath,
    g: &CadlagPath,
    which: Line,
    eps: f64,
    house: &House,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps = {eps} must be positive")));
    }
    let (lo, hi) = window_intersection(f, g)?;
    let mut sup: Option<f64> = None;
    let mut take = |v: f64| sup = Some(sup.map_or(v, |s: f64| s.max(v)));
    match which {
        Line::Mutant => {
            // [lo, 0): the restriction closes with left limits, so the wall
            // value at 0 itself stays excluded.
            if lo < 0.0 && hi >= 0.0 {
                take(sup_on(f, g, lo, hi.min(0.0))?);
            } else if hi < 0.0 {
                take(sup_on(f, g, lo, hi)?);
            }
            let a = eps.max(lo);
            if a <= hi && eps >= lo {
                take(sup_on(f, g, a, hi)?);
            }
        }
        Line::Resident => {
            let t0 = house.t_end();
            let a = (t0 - eps).min(hi);
            if a >= lo {
                take(sup_on(f, g, lo, a)?);
            }
            let b = (t0 + eps).max(lo);
            if b <= hi {
                take(sup_on(f, g, b, hi)?);
            }
        }
    }
    sup.ok_or(Error::EmptyWindow)
}

pub const HOUSE_CSV_VERSION: u32 = 1;

/// Plot-ready CSV of both rescaled lines against the house profiles:
/// columns t, H0, H1, h0, h1, with a left-limit row inserted wherever any of
/// the four paths jumps.
pub fn write_house_csv<W: Write>(
    h0_n: &CadlagPath,
    h1_n: &CadlagPath,
    house: &House,
    mut w: W,
) -> Result<()> {
    let (lo, hi) = window_intersection(h0_n, h1_n)?;
    let g0 = house.to_cadlag(Line::Resident, (lo, hi))?;
    let g1 = house.to_cadlag(Line::Mutant, (lo, hi))?;
    let paths = [h0_n, h1_n, &g0, &g1];
    let mut cuts: Vec<f64> = paths
        .iter()
        .flat_map(|p| p.extended_graph().vertices().iter().map(|v| v.0).collect::<Vec<_>>())
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    writeln!(w, "# house-profile-csv v{HOUSE_CSV_VERSION}")?;
    writeln!(w, "t,H0,H1,h0,h1")?;
    for (i, &t) in cuts.iter().enumerate() {
        if i > 0 {
            let left: Vec<f64> = paths
                .iter()
                .map(|p| p.left_limit(t))
                .collect::<Result<_>>()?;
            let right: Vec<f64> = paths.iter().map(|p| p.value(t)).collect::<Result<_>>()?;
            if left != right {
                writeln!(w, "{},{},{},{},{}", t, left[0], left[1], left[2], left[3])?;
            }
        }
        let vals: Vec<f64> = paths.iter().map(|p| p.value(t)).collect::<Result<_>>()?;
        writeln!(w, "{},{},{},{},{}", t, vals[0], vals[1], vals[2], vals[3])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moran::{simulate_moran_conditioned_fixation, RecordPolicy};
    use crate::rng::seeded_rng;

    fn house() -> House {
        House::new(1.0, 0.2).unwrap()
    }

    #[test]
    fn geometry_of_the_standard_house() {
        let h = house();
        assert_eq!(h.t_ridge(), 0.8);
        assert_eq!(h.t_end(), 1.6);
        assert_eq!(h.eval(Line::Mutant, -0.5), 0.0);
        assert_eq!(h.eval(Line::Mutant, 0.0), 0.2);
        assert!((h.eval(Line::Mutant, 0.4) - 0.6).abs() < 1e-15);
        assert_eq!(h.eval(Line::Mutant, 0.8), 1.0);
        assert_eq!(h.eval(Line::Mutant, 5.0), 1.0);
        assert_eq!(h.eval(Line::Resident, 0.5), 1.0);
        assert!((h.eval(Line::Resident, 1.2) - 0.6).abs() < 1e-15);
        assert_eq!(h.eval(Line::Resident, 1.6), 0.0);
        assert!((h.eval(Line::Resident, 1.6 - 1e-9) - 0.2).abs() < 1e-8);
    }

    #[test]
    fn tent_case_has_no_walls() {
        let h = House::new(2.0, 0.0).unwrap();
        assert_eq!(h.eval(Line::Mutant, 0.0), 0.0);
        assert!((h.eval(Line::Mutant, 0.25) - 0.5).abs() < 1e-15);
        assert_eq!(h.eval(Line::Mutant, 0.5), 1.0);
        assert_eq!(h.eval(Line::Resident, 1.0), 0.0);
        let g = h.to_cadlag(Line::Mutant, h.default_window()).unwrap();
        // Continuous: the extended graph is just the graph.
        assert_eq!(g.extended_graph().vertices().len(), 4);
    }

    #[test]
    fn house_validation() {
        assert!(House::new(0.0, 0.2).is_err());
        assert!(House::new(1.0, 1.0).is_err());
        assert!(House::new(1.0, -0.1).is_err());
    }

    #[test]
    fn cadlag_profile_matches_eval() {
        let h = house();
        for which in [Line::Mutant, Line::Resident] {
            let p = h.to_cadlag(which, h.default_window()).unwrap();
            for t in [-0.1, -0.01, 0.0, 0.3, 0.8, 1.0, 1.59, 1.6, 1.8] {
                assert!(
                    (p.value(t).unwrap() - h.eval(which, t)).abs() < 1e-12,
                    "mismatch at {t} for {which:?}"
                );
            }
        }
        // One-sided limits at the walls.
        let m = h.to_cadlag(Line::Mutant, h.default_window()).unwrap();
        assert_eq!(m.left_limit(0.0).unwrap(), 0.0);
        assert_eq!(m.value(0.0).unwrap(), 0.2);
        let r = h.to_cadlag(Line::Resident, h.default_window()).unwrap();
        assert!((r.left_limit(1.6).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(r.value(1.6).unwrap(), 0.0);
    }

    #[test]
    fn window_starting_at_zero_keeps_the_wall() {
        let h = house();
        let p = h.to_cadlag(Line::Mutant, (0.0, 2.0)).unwrap();
        assert_eq!(p.pre_start(), Some(0.0));
        assert_eq!(p.extended_graph().vertices()[0], (0.0, 0.0));
    }

    fn hand_path() -> SweepPath {
        // N = 100: mutants 1 -> 2 at time 2, then fixation at time 5.
        let mut buf = Vec::new();
        buf.extend_from_slice(b"# sweep-path-csv v1\n# n=100 terminal=fixation\n");
        buf.extend_from_slice(b"time,resident,mutant\n0,99,1\n2,98,2\n5,0,100\n");
        SweepPath::read_csv(&buf[..]).unwrap()
    }

    fn hand_params() -> ModelParams {
        ModelParams::new(100, 1.0, 0.5).unwrap()
    }

    #[test]
    fn rescale_conventions_and_values() {
        let path = hand_path();
        let p = hand_params();
        let scale = p.time_rescale();
        let m = rescale(&path, &p, Line::Mutant, (-0.1, 6.0 * scale)).unwrap();
        assert_eq!(m.value(-0.05).unwrap(), 0.0);
        assert_eq!(m.value(0.0).unwrap(), 0.0); // ln(1) = 0
        let expect_two = 2.0f64.ln() / 100.0f64.ln();
        assert!((m.value(2.0 * scale).unwrap() - expect_two).abs() < 1e-15);
        assert!((m.value(2.0 * scale - 1e-12).unwrap() - 0.0).abs() < 1e-15);
        assert_eq!(m.value(5.0 * scale).unwrap(), 1.0);
        assert_eq!(m.value(5.5 * scale).unwrap(), 1.0);
        let r = rescale(&path, &p, Line::Resident, (-0.1, 6.0 * scale)).unwrap();
        assert_eq!(r.value(-0.05).unwrap(), 1.0);
        let expect_res = 99.0f64.ln() / 100.0f64.ln();
        assert!((r.value(0.0).unwrap() - expect_res).abs() < 1e-15);
        assert_eq!(r.value(5.0 * scale).unwrap(), 0.0);
    }

    #[test]
    fn rescale_hits_fractional_exponents() {
        let n: u64 = 100_000;
        // ceil(N^0.4) = 100 exactly; powf rounds a hair above 100, so don't
        // take ceil of the float.
        let count = 100u64;
        let mut buf = Vec::new();
        buf.extend_from_slice(b"# sweep-path-csv v1\n# n=100000 terminal=fixation\n");
        buf.extend_from_slice(b"time,resident,mutant\n");
        buf.extend_from_slice(format!("0,{},{}\n", n - count, count).as_bytes());
        buf.extend_from_slice(format!("3,0,{n}\n").as_bytes());
        let path = SweepPath::read_csv(&buf[..]).unwrap();
        let p = ModelParams::new(n, 1.0, 0.3).unwrap();
        let m = rescale(&path, &p, Line::Mutant, (-0.1, 1.0)).unwrap();
        assert!((m.value(0.0).unwrap() - 0.4).abs() < 1e-4);
    }

    #[test]
    fn rescaled_values_stay_in_unit_interval() {
        let p = ModelParams::new(200, 1.0, 0.4).unwrap();
        let (l23, l34) = transition_levels(&p);
        let mut rng = seeded_rng(31);
        let path = simulate_moran_conditioned_fixation(
            &p,
            &RecordPolicy::log_crossings(200, 40, &[l23, l34]),
            &mut rng,
        );
        let path = path.unwrap();
        let h = House::from_params(&p).unwrap();
        for which in [Line::Mutant, Line::Resident] {
            let r = rescale(&path, &p, which, h.default_window()).unwrap();
            let verts = r.extended_graph();
            for &(_, v) in verts.vertices() {
                assert!((0.0..=1.0).contains(&v), "value {v} outside [0,1]");
            }
        }
    }

    #[test]
    fn fixation_time_rescaled_matches_hand_value() {
        let path = hand_path();
        let p = hand_params();
        let got = fixation_time_rescaled(&path, &p).unwrap();
        assert!((got - 5.0 * p.time_rescale()).abs() < 1e-15);
    }

    #[test]
    fn phase_boundaries_are_ordered_on_simulated_paths() {
        let p = ModelParams::new(300, 1.0, 0.35).unwrap();
        let (l23, l34) = transition_levels(&p);
        let mut rng = seeded_rng(32);
        for _ in 0..5 {
            let path = simulate_moran_conditioned_fixation(
                &p,
                &RecordPolicy::Crossings(vec![l23, l34]),
                &mut rng,
            )
            .unwrap();
            let (t23, t34) = phase_boundaries(&path, &p).unwrap();
            let sigma = fixation_time_rescaled(&path, &p).unwrap();
            assert!(0.0 < t23 && t23 <= t34 && t34 < sigma);
        }
    }

    #[test]
    fn restricted_sup_ignores_the_walls() {
        let h = house();
        let win = h.default_window();
        let g1 = h.to_cadlag(Line::Mutant, win).unwrap();
        // A copy whose only mismatch is the wall interval [0, eps).
        let wall_only = CadlagPath::from_pieces(
            vec![win.0, 0.0, 0.05, h.t_ridge(), win.1],
            vec![0.0, 0.9, 0.2 + 0.05, 1.0],
            vec![0.0, 0.9, 1.0, 1.0],
        )
        .unwrap();
        let d = sup_distance_restricted(&wall_only, &g1, Line::Mutant, 0.05, &h).unwrap();
        assert!(d < 1e-12, "restricted sup {d}");
        let full = wall_only.sup_abs_diff(&g1).unwrap();
        assert!(full > 0.5);
    }

    #[test]
    fn restricted_sup_sees_offsets() {
        let h = house();
        let win = h.default_window();
        for which in [Line::Mutant, Line::Resident] {
            let f = h.to_cadlag(which, win).unwrap();
            let shifted = CadlagPath::constant(win, 0.25).unwrap();
            let d0 = sup_distance_restricted(&f, &f, which, 0.1, &h).unwrap();
            assert_eq!(d0, 0.0);
            let d = sup_distance_restricted(&f, &shifted, which, 0.1, &h).unwrap();
            assert!(d > 0.7, "offset sup {d}");
        }
    }

    #[test]
    fn house_csv_has_versioned_header_and_jump_rows() {
        let h = house();
        let p = hand_params();
        let path = hand_path();
        let win = h.default_window();
        let h0 = rescale(&path, &p, Line::Resident, win).unwrap();
        let h1 = rescale(&path, &p, Line::Mutant, win).unwrap();
        let mut buf = Vec::new();
        write_house_csv(&h0, &h1, &h, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# house-profile-csv v1");
        assert_eq!(lines.next().unwrap(), "t,H0,H1,h0,h1");
        // The mutant wall at t=0 produces a duplicated time row.
        let zeros: Vec<&str> = text.lines().filter(|l| l.starts_with("0,")).collect();
        assert_eq!(zeros.len(), 2, "expected left and right rows at 0: {zeros:?}");
    }
}
