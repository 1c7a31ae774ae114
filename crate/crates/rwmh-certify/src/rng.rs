//! Seeded random number generation with independent streams.
//!
//! Every randomized routine in the crate takes an explicit seed and derives
//! its generator as `(seed, stream)`, so chains, verifiers, and estimators
//! can run concurrently without sharing state and reproduce bit-identically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The crate-wide generator type.
pub type CrateRng = ChaCha12Rng;

/// Generator for the given `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> CrateRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform direction on the unit sphere in `R^p`.
///
/// For p = 1 this is +-1 with equal probability.
pub fn unit_sphere(rng: &mut CrateRng, p: usize) -> Vec<f64> {
    assert!(p >= 1);
    if p == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    use rand_distr::Distribution;
    loop {
        let v: Vec<f64> = (0..p)
            .map(|_| rand_distr::StandardNormal.sample(rng))
            .collect();
        let n = crate::numeric::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
