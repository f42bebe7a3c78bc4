//! Fixed-seed inputs shared by the benchmarks.

use dcam_core::am::Prototypes;
use dcam_core::{Autoencoder, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

/// A batch, a network of the given widths and `k` prototypes in its latent
/// space.
pub struct Fixture {
    pub batch: Tensor,
    pub ae: Autoencoder,
    pub prototypes: Prototypes,
}

pub fn fixture(batch: usize, input: usize, hidden: &[usize], k: usize) -> Fixture {
    let ae = Autoencoder::with_hidden(input, hidden, k, 1).unwrap();
    let rho = uniform(k, k, 2).map(|v| 2.0 * v - 1.0);
    Fixture {
        batch: uniform(batch, input, 3),
        ae,
        prototypes: Prototypes::new(rho).unwrap(),
    }
}
