//! Counter-based random stream used for match sampling.
//!
//! Draw `i` of a stream with seed `s` is `mix(s + (i + 1)·γ)` where `mix` is
//! the SplitMix64 finalizer and `γ = 0x9E3779B97F4A7C15`. The sequence is a
//! pure function of `(seed, i)` so fixtures reproduce on any platform.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    counter: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this seed and a stream label.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(mix(self.seed ^ mix(stream.wrapping_add(GAMMA))))
    }

    /// Value of draw `index` without advancing.
    pub fn at(&self, index: u64) -> u64 {
        mix(self
            .seed
            .wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter += 1;
        v
    }

    /// Unbiased draw in `0..n` (multiply-shift with rejection). `n` must be
    /// nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below() needs a nonempty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Draws `k` distinct indices from `0..n` (partial Fisher-Yates).
    /// Returned in ascending order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> alloc::vec::Vec<usize> {
        let k = k.min(n);
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
