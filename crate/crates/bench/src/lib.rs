//! Seeded inputs shared by the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// AU12-like series: noise around 0.2 with a smile-sized bump every 10 s.
pub fn au12_series(frames: usize, fps: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = (10.0 * fps) as usize;
    let width = (1.5 * fps) as usize;
    (0..frames)
        .map(|i| {
            let bump = if i % period < width { 2.5 } else { 0.0 };
            bump + 0.2 + rng.gen_range(-0.15..0.15)
        })
        .collect()
}

/// Rater labels for `items` items, `raters` raters and `k` categories.
pub fn rating_labels(items: usize, raters: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..items)
        .map(|_| (0..raters).map(|_| rng.gen_range(0..k)).collect())
        .collect()
}

/// Paired samples with a small positive shift.
pub fn paired_samples(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.gen_range(-1.0..1.0) + 0.2, rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Logistic problem with labels drawn from a random linear model.
pub fn logistic_problem(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = x
        .rows()
        .into_iter()
        .map(|r| {
            let z: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            rng.gen::<f64>() < 1.0 / (1.0 + (-z).exp())
        })
        .collect();
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_seeded() {
        assert_eq!(au12_series(500, 30.0, 1), au12_series(500, 30.0, 1));
        let (x, y) = logistic_problem(50, 4, 2);
        assert_eq!(x.dim(), (50, 4));
        assert!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
    }
}
