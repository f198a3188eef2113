//! Seeding conventions for every random draw in the crate.
//!
//! All Monte Carlo work uses ChaCha8 with a user seed and one stream per
//! independent work item (path, sample block). Results therefore do not
//! depend on how rayon schedules the work.

pub use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Generator for work item `stream` under the run seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
