//! Counter-addressed Wiener increments.
//!
//! Every increment is a pure function of `(master_seed, trajectory_index,
//! step_index)`: the trajectory index selects a ChaCha stream and the step
//! index a fixed block of words inside it, so scheduling trajectories on
//! any number of threads cannot change what a trajectory sees.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;

/// 32-bit words consumed per step (four u64 draws feed two Box–Muller pairs).
const WORDS_PER_STEP: u128 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngLineage {
    pub master_seed: u64,
    pub trajectory_index: u64,
}

impl RngLineage {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        Self { master_seed, trajectory_index }
    }

    /// Sequential increment stream positioned at `first_step`.
    pub fn stream(&self, dt: f64, first_step: u64) -> IncrementStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trajectory_index);
        rng.set_word_pos(first_step as u128 * WORDS_PER_STEP);
        IncrementStream { rng, scale: dt.sqrt() }
    }
}

/// Three independent `N(0, dt)` components for step `step_index`.
pub fn wiener_increment(lineage: RngLineage, step_index: u64, dt: f64) -> Vec3 {
    lineage.stream(dt, step_index).next_increment()
}

#[derive(Debug, Clone)]
pub struct IncrementStream {
    rng: ChaCha8Rng,
    scale: f64,
}

impl IncrementStream {
    #[inline]
    fn open_unit(&mut self) -> f64 {
        // (0, 1]: never feeds ln(0).
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn next_increment(&mut self) -> Vec3 {
        let (r1, th1) = self.polar();
        let (r2, th2) = self.polar();
        let (s1, c1) = th1.sin_cos();
        Vec3::new(r1 * c1, r1 * s1, r2 * th2.cos()) * self.scale
    }

    #[inline]
    fn polar(&mut self) -> (f64, f64) {
        let u1 = self.open_unit();
        let u2 = self.open_unit();
        ((-2.0 * u1.ln()).sqrt(), std::f64::consts::TAU * u2)
    }
}
