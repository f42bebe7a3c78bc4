use dcam_core::am::{am_step, energy, AmConfig, Prototypes};
use dcam_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const DRAWS: usize = 1000;

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
}

/// Softmax of −β·distance over the prototypes, then the weighted mean.
fn weighted_mean(row: &[f64], rho: &Tensor, beta: f64) -> Vec<f64> {
    let d: Vec<f64> = rho.iter_rows().map(|r| r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum()).collect();
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d.iter().map(|x| (-beta * (x - dmin)).exp()).collect();
    let z: f64 = w.iter().sum();
    (0..rho.cols()).map(|c| rho.iter_rows().zip(&w).map(|(r, wi)| wi / z * r[c]).sum()).collect()
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4e7);
    let (mut max_rise, mut max_mean_gap) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..DRAWS {
        let (n, k, m) = (rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..5));
        let v = uniform(&mut rng, n, m);
        let rho = uniform(&mut rng, k, m);
        // log-uniform over [1e-3, 10]
        let beta = 10f64.powf(rng.random_range(-3.0..=1.0));
        let tau = [0.25, 0.5, 1.0][rng.random_range(0..3)];
        let p = Prototypes::new(rho.clone()).unwrap();

        let moved = am_step(&v, &p, &AmConfig::new(beta, tau, 1).unwrap()).unwrap();
        for (before, after) in v.iter_rows().zip(moved.iter_rows()) {
            let rise = energy(after, &p, beta).unwrap() - energy(before, &p, beta).unwrap();
            max_rise = max_rise.max(rise);
        }

        let full = am_step(&v, &p, &AmConfig::new(beta, 1.0, 1).unwrap()).unwrap();
        for (row, out) in v.iter_rows().zip(full.iter_rows()) {
            for (a, b) in out.iter().zip(weighted_mean(row, &rho, beta)) {
                max_mean_gap = max_mean_gap.max((a - b).abs());
            }
        }
    }
    Outcome::check(
        max_rise <= 1e-10 && max_mean_gap <= 1e-12,
        format!("{DRAWS} draws, largest energy change {max_rise:.2e} (<= 1e-10), tau=1 gap to weighted mean {max_mean_gap:.2e} (<= 1e-12)"),
    )
}
