//! Seeded random streams.
//!
//! Every simulator draws from [`SimRng`], a xoshiro256++ generator: portable,
//! fast and with a documented `jump` for non-overlapping substreams. Replica
//! `r` of an experiment with base seed `b` uses seed `b + r`.

use rand::SeedableRng;
use rand_distr::{Distribution, Exp1};
pub use rand_xoshiro::Xoshiro256PlusPlus as SimRng;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn replica_seed(base: u64, replica: u64) -> u64 {
    base.wrapping_add(replica)
}

/// Exponential waiting time with the given total rate.
#[inline]
pub fn exp_wait(rng: &mut SimRng, rate: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / rate
}

/// Independent substreams derived from one seed by repeated jumps.
#[derive(Debug, Clone)]
pub struct StreamFactory {
    next: SimRng,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { next: seeded(seed) }
    }

    pub fn next_stream(&mut self) -> SimRng {
        let out = self.next.clone();
        self.next.jump();
        out
    }
}
