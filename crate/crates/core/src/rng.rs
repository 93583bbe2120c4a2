//! Deterministic random streams.
//!
//! Every randomized experiment in this crate derives its streams the same
//! way: a 64-bit sub-seed is produced by one splitmix64 step of
//! `master_seed XOR index`, and that sub-seed feeds a xoshiro256++ stream
//! (whose own 256-bit state is expanded from the sub-seed by splitmix64).
//! Uniform doubles come from the top 53 bits of each 64-bit output, so the
//! byte-level results are identical across platforms and thread counts.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

use crate::potential::TorusPoint;

/// One splitmix64 step of `master ^ index`: the sub-seed for stream `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    SplitMix64::seed_from_u64(master ^ index).next_u64()
}

/// A seeded xoshiro256++ stream.
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Stream for sub-experiment `index` under `master`.
    pub fn derived(master: u64, index: u64) -> Self {
        Stream::new(derive_seed(master, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate.
    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform point on the d-torus.
    pub fn torus_point(&mut self, d: usize) -> TorusPoint {
        TorusPoint::new((0..d).map(|_| self.uniform()).collect())
    }

    /// Fills `buf` with uniform [0,1) coordinates.
    pub fn fill_uniform(&mut self, buf: &mut [f64]) {
        for v in buf {
            *v = self.uniform();
        }
    }
}
