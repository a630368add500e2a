//! Shared fixtures for the criterion benches.

use rand::Rng;
use sweephouse_core::m1::CadlagPath;

/// Random step path on `window` with `k` jumps, values in (-0.5, 0.5).
pub fn random_step_path<R: Rng>(window: (f64, f64), k: usize, rng: &mut R) -> CadlagPath {
    let span = window.1 - window.0;
    let mut times: Vec<f64> = (0..k)
        .map(|_| window.0 + rng.random_range(0.04..0.96) * span)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|b, a| *b - *a < 1e-3);
    let jumps: Vec<(f64, f64)> =
        times.into_iter().map(|t| (t, rng.random_range(-0.5..0.5))).collect();
    CadlagPath::step_fn(window, rng.random_range(-0.5..0.5), &jumps).expect("valid step path")
}

/// Arrival marks (time, fitness increment) spread over (0, horizon).
pub fn arrival_marks(count: usize, horizon: f64) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| {
            let frac = (i + 1) as f64 / (count + 1) as f64;
            (frac * horizon, 1.0 + 0.5 * ((i % 3) as f64))
        })
        .collect()
}
