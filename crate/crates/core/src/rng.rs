use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic streams derived from one user seed, so that
/// e.g. batch shuffling never perturbs prototype sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Stream {
    Shuffle = 1,
    Prototypes = 2,
    Subsample = 3,
    KMeans = 4,
    Blobs = 5,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
