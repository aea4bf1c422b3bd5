//! Seeded random streams.
//!
//! A run derives every random draw from one 64-bit seed through ChaCha8,
//! which is counter-based: the seed fixes the key and each consumer gets its
//! own 64-bit stream id. Draws on one stream never shift another, so changing
//! `b'` leaves the branch-coin sequence and the `b`-batches untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream ids used by the estimator. Monte-Carlo checks use ids from
/// [`TRIAL_STREAM_BASE`] upward, one per trial.
pub const STREAM_COIN: u64 = 0;
pub const STREAM_BATCH: u64 = 1;
pub const STREAM_BATCH_PRIME: u64 = 2;
pub const STREAM_OUTPUT: u64 = 3;
pub const STREAM_PROBLEM: u64 = 4;
pub const TRIAL_STREAM_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The three generators the estimator consumes.
#[derive(Clone, Debug)]
pub struct Streams {
    pub coin: ChaCha8Rng,
    pub batch: ChaCha8Rng,
    pub batch_prime: ChaCha8Rng,
}

impl Streams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            coin: stream(seed, STREAM_COIN),
            batch: stream(seed, STREAM_BATCH),
            batch_prime: stream(seed, STREAM_BATCH_PRIME),
        }
    }

    /// Streams for one Monte-Carlo trial; disjoint from the run streams and
    /// from every other trial.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        let base = TRIAL_STREAM_BASE + 3 * trial;
        Self {
            coin: stream(seed, base),
            batch: stream(seed, base + 1),
            batch_prime: stream(seed, base + 2),
        }
    }
}

/// Bernoulli(p) draw. `p = 1` always succeeds since draws lie in `[0, 1)`.
#[inline]
pub fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Uniform index in `[0, n)`.
#[inline]
pub fn index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Uniform draw from the ball of radius `radius` around `center`.
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    loop {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = crate::linalg::norm(&dir);
        if len == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        return center
            .iter()
            .zip(&dir)
            .map(|(c, u)| c + r * u / len)
            .collect();
    }
}
