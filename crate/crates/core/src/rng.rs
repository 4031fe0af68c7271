use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for restart `stream` under a run seed. Restart i
/// always sees the same numbers no matter how many restarts run, so adding
/// restarts can only improve a best-of result.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Search budget shared by the optimizers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { restarts: 16, iterations: 500, seed: 0 }
    }
}

impl Budget {
    pub fn new(restarts: usize, iterations: usize, seed: u64) -> Self {
        Self { restarts: restarts.max(1), iterations: iterations.max(1), seed }
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }
}
