//! Self-tests of the path-metric bracket: metric axioms, exact
//! constant-offset distances, agreement with a dense fixed-grid reference,
//! and the monotone upper bound.

use rand::Rng;
use sweephouse_core::m1::{m1_at_resolution, m1_distance, m1_monotone_bound, CadlagPath};
use sweephouse_core::rng::seeded_rng;

const TOL: f64 = 1e-3;
// Short window and small jump sizes keep extended-graph arc lengths near 4,
// so a width-1e-3 bracket needs only a few thousand samples per path.
const WINDOW: (f64, f64) = (0.0, 1.2);

fn random_times<R: Rng>(rng: &mut R) -> Vec<f64> {
    let k = rng.random_range(1..=5usize);
    let mut times: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.15)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|b, a| *b - *a < 1e-3);
    times
}

fn random_jumps<R: Rng>(rng: &mut R) -> (f64, Vec<(f64, f64)>) {
    let jumps = random_times(rng)
        .into_iter()
        .map(|t| (t, rng.random_range(-0.5..0.5)))
        .collect();
    (rng.random_range(-0.5..0.5), jumps)
}

fn random_step<R: Rng>(rng: &mut R) -> CadlagPath {
    let (initial, jumps) = random_jumps(rng);
    CadlagPath::step_fn(WINDOW, initial, &jumps).expect("valid step path")
}

fn monotone_step<R: Rng>(rng: &mut R) -> CadlagPath {
    let mut level = rng.random_range(-0.5..0.0);
    let initial = level;
    let jumps: Vec<(f64, f64)> = random_times(rng)
        .into_iter()
        .map(|t| {
            level += rng.random_range(0.0..0.3);
            (t, level)
        })
        .collect();
    CadlagPath::step_fn(WINDOW, initial, &jumps).expect("valid step path")
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn identity_check(rng: &mut impl Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = random_step(rng);
        let b = m1_distance(&f, &f, TOL).expect("bracket");
        worst = worst.max(b.upper);
    }
    check("identity d(f,f)=0", worst == 0.0, format!("max self-distance {worst:e}"))
}

fn symmetry_check(rng: &mut impl Rng) -> Check {
    let mut worst = 0.0f64;
    let mut overlaps = true;
    for _ in 0..8 {
        let f = random_step(rng);
        let g = random_step(rng);
        let fg = m1_distance(&f, &g, TOL).expect("bracket");
        let gf = m1_distance(&g, &f, TOL).expect("bracket");
        worst = worst.max((fg.upper - gf.upper).abs());
        overlaps &= fg.overlaps(&gf);
    }
    check(
        "symmetry",
        overlaps && worst <= 2.0 * TOL,
        format!("max |d(f,g)-d(g,f)| = {worst:.2e}, brackets overlap: {overlaps}"),
    )
}

fn triangle_check(rng: &mut impl Rng) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..12 {
        let f = random_step(rng);
        let g = random_step(rng);
        let h = random_step(rng);
        let fh = m1_distance(&f, &h, TOL).expect("bracket");
        let fg = m1_distance(&f, &g, TOL).expect("bracket");
        let gh = m1_distance(&g, &h, TOL).expect("bracket");
        // True distances sit inside the brackets, so this must stay <= 0 up
        // to bracket widths.
        worst = worst.max(fh.lower - (fg.upper + gh.upper));
    }
    check("triangle inequality", worst <= 2.0 * TOL, format!("max violation {worst:.2e}"))
}

fn offset_check(rng: &mut impl Rng) -> Check {
    let mut worst = 0.0f64;
    let mut contained = true;
    for _ in 0..12 {
        let (initial, jumps) = random_jumps(rng);
        let c: f64 = rng.random_range(-0.4..0.4);
        let shifted: Vec<(f64, f64)> = jumps.iter().map(|&(t, v)| (t, v + c)).collect();
        let f = CadlagPath::step_fn(WINDOW, initial, &jumps).expect("valid step path");
        let g = CadlagPath::step_fn(WINDOW, initial + c, &shifted).expect("shifted path");
        let b = m1_distance(&f, &g, TOL).expect("bracket");
        worst = worst.max((b.upper - c.abs()).abs());
        contained &= b.contains(c.abs());
    }
    check(
        "constant offset exact",
        contained && worst <= TOL,
        format!("max |upper - |c|| = {worst:.2e}, contained: {contained}"),
    )
}

fn dense_reference_check(rng: &mut impl Rng) -> Check {
    let mut all = true;
    for _ in 0..25 {
        let f = random_step(rng);
        let g = random_step(rng);
        let bracket = m1_distance(&f, &g, TOL).expect("bracket");
        let dense = m1_at_resolution(&f, &g, 4000).expect("dense bracket");
        // Both intervals certify the same true distance.
        all &= bracket.overlaps(&dense);
    }
    check("dense-grid reference contained", all, format!("25 random pairs, overlap: {all}"))
}

fn monotone_bound_check(rng: &mut impl Rng) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..12 {
        let f = monotone_step(rng);
        let g = monotone_step(rng);
        let bound = m1_monotone_bound(&f, &g).expect("both nondecreasing");
        let bracket = m1_distance(&f, &g, TOL).expect("bracket");
        worst = worst.max(bracket.lower - bound);
    }
    check(
        "monotone sup bound dominates",
        worst <= TOL,
        format!("max lower-bound excess {worst:.2e}"),
    )
}

/// Runs the metric self-tests; prints one line per check and returns overall
/// success.
pub fn run(seed: u64) -> bool {
    let mut rng = seeded_rng(seed);
    let checks = [
        identity_check(&mut rng),
        symmetry_check(&mut rng),
        triangle_check(&mut rng),
        offset_check(&mut rng),
        dense_reference_check(&mut rng),
        monotone_bound_check(&mut rng),
    ];
    let mut ok = true;
    for c in &checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.pass;
    }
    println!("overall: {}", if ok { "PASS" } else { "FAIL" });
    ok
}
