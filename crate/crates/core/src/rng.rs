//! Seeded generator for trial data and sampling.
//!
//! SplitMix64: state `s += 0x9E3779B97F4A7C15`, output
//! `z = (s ^ (s >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`, with the
//! seed taken as the initial state. A unit draw is `(z >> 11) * 2^-53` and
//! `uniform(lo, hi) = lo + (hi - lo) * unit`, so the streams are easy to
//! reproduce outside Rust.

use rand::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64 as SeededRng;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub trait Draw {
    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64;

    /// Uniform in [lo, hi).
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

impl<R: RngCore> Draw for R {
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
