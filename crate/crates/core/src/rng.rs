//! The single random stream a run draws from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Source of uniform draws in `[0, 1)`.
///
/// The engine only ever asks for uniforms, so tests can replace the seeded
/// stream with a scripted sequence.
pub trait DrawSource {
    fn uniform(&mut self) -> f64;

    /// Uniform integer in `0..n`.
    fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// ChaCha8-backed stream; identical output on every platform for a given seed.
#[derive(Debug, Clone)]
pub struct SeededStream(ChaCha8Rng);

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl DrawSource for SeededStream {
    fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    fn index(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }
}

/// Replays a fixed list of draws, then repeats the last one.
#[derive(Debug, Clone)]
pub struct ScriptedDraws {
    draws: Vec<f64>,
    next: usize,
}

impl ScriptedDraws {
    pub fn new(draws: Vec<f64>) -> Self {
        assert!(!draws.is_empty(), "scripted stream needs at least one draw");
        Self { draws, next: 0 }
    }

    /// Number of draws consumed so far.
    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl DrawSource for ScriptedDraws {
    fn uniform(&mut self) -> f64 {
        let v = self.draws[self.next.min(self.draws.len() - 1)];
        self.next += 1;
        v
    }
}

/// Fisher-Yates over `items` using the run's stream.
pub fn shuffle<T>(items: &mut [T], rng: &mut dyn DrawSource) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}
