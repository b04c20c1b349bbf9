use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based random stream for one `(seed, epoch, sample index)` triple.
///
/// The seed keys the ChaCha cipher and `(epoch, index)` select the stream,
/// so any stream can be reconstructed without replaying the others.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    epoch: u32,
    index: u32,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, epoch: u32, index: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((epoch as u64) << 32) | index as u64);
        Self {
            seed,
            epoch,
            index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    /// Uniform real in `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        p >= 1.0 || self.rng.random_bool(p.max(0.0))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut s = RngStream::new(7, 3, 11);
            (0..4).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = RngStream::new(7, 3, 11);
            (0..4).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        for (e, i) in [(3, 12), (4, 11), (0, 0)] {
            let mut s = RngStream::new(7, e, i);
            assert_ne!(a[0], s.next_u64());
        }
        let mut other_seed = RngStream::new(8, 3, 11);
        assert_ne!(a[0], other_seed.next_u64());
    }
}
