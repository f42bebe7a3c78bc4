use dcam_core::am::{am_recurse, AmConfig, Prototypes};
use dcam_core::trainer::dcam_loss;
use dcam_core::{Autoencoder, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

const CONFIGS: usize = 1000;

fn sq_dist_rows(a: &Tensor, b: &Tensor) -> Vec<f64> {
    a.iter_rows().zip(b.iter_rows()).map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum()).collect()
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0d);
    let (mut violations, mut rows, mut unequal) = (0, 0, 0);
    let mut tightest = f64::INFINITY;
    for _ in 0..CONFIGS {
        let (n, d, m, k) = (rng.random_range(1..=8), rng.random_range(1..=10), rng.random_range(1..=4), rng.random_range(1..=4));
        let ae = Autoencoder::with_hidden(d, &[rng.random_range(2..=8)], m, rng.random()).unwrap();
        let x = uniform(&mut rng, n, d, 0.0, 1.0);
        let p = Prototypes::new(uniform(&mut rng, k, m, -2.0, 2.0)).unwrap();
        let beta = 10f64.powf(rng.random_range(-3.0..1.0));
        let tau = [0.25, 0.5, 1.0][rng.random_range(0..3)];
        let am = AmConfig::new(beta, tau, rng.random_range(0..6)).unwrap();

        let v = ae.encode(&x).unwrap();
        let plain = ae.decode(&v).unwrap();
        let moved = ae.decode(&am_recurse(&v, &p, &am).unwrap()).unwrap();
        let lhs = sq_dist_rows(&x, &moved);
        let recon = sq_dist_rows(&x, &plain);
        let shift = sq_dist_rows(&plain, &moved);
        for i in 0..n {
            let rhs = 2.0 * recon[i] + 2.0 * shift[i];
            rows += 1;
            if lhs[i] > rhs * (1.0 + 1e-12) + 1e-15 {
                violations += 1;
            }
            if rhs > 0.0 {
                tightest = tightest.min((rhs - lhs[i]) / rhs);
            }
        }

        // with no dynamics the displacement vanishes and the losses coincide
        let still = am.with_steps(0);
        if am_recurse(&v, &p, &still).unwrap() != v || dcam_loss(&ae, &p, &still, &x).unwrap() != ae.reconstruction_loss(&x).unwrap() {
            unequal += 1;
        }
    }
    Outcome::check(
        violations == 0 && unequal == 0,
        format!(
            "{CONFIGS} configurations ({rows} rows): {violations} bound violations, smallest relative slack {tightest:.2e}; T=0 mismatches {unequal}"
        ),
    )
}
