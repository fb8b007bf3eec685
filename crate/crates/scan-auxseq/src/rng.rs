//! Deterministic, dependency-free random number generation.
//!
//! Everything that needs randomness in this crate (dataset shuffles, subset
//! selection, parameter init, embedding noise, dropout) runs off
//! [`SplitMix64`] so that a run is fully determined by its seed. The shuffle
//! is the portability-critical piece: it is specified as Fisher–Yates with
//! indices drawn by 64-bit Lemire reduction, so any implementation in any
//! language can reproduce the same subsets from the same seed.

/// SplitMix64 (Vigna). Non-cryptographic, full 64-bit state, passes BigCrush.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Lemire multiply-shift reduction of one 64-bit draw onto `0..n`.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller. Two uniforms per draw, no caching,
    /// so the stream position stays easy to reason about.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Derive an independent stream for a named sub-purpose. Mixes the label
    /// through the generator itself so (seed, label) pairs do not collide in
    /// practice.
    pub fn fork(&mut self, label: u64) -> SplitMix64 {
        let base = self.next_u64();
        SplitMix64::new(base ^ label.wrapping_mul(0x9E3779B97F4A7C15))
    }
}

/// In-place Fisher–Yates shuffle, bit-exact across platforms.
///
/// Walks `i` from `len-1` down to `1`, drawing `j = lemire(next_u64(), i+1)`
/// and swapping `items[i]` with `items[j]`.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Convenience: the identity permutation of `n`, shuffled with `seed`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    shuffle(&mut idx, &mut rng);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_vectors() {
        // First three outputs for seed 0, as published with the reference
        // implementation (and reused by the xoshiro seeding procedure).
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(rng.next_u64(), 0x06C45D188009454F);
    }

    #[test]
    fn next_below_is_in_range() {
        let mut rng = SplitMix64::new(42);
        for n in [1u64, 2, 3, 7, 100, 20910] {
            for _ in 0..200 {
                assert!(rng.next_below(n) < n);
            }
        }
    }

    #[test]
    fn shuffle_is_a_permutation_and_deterministic() {
        let mut a: Vec<usize> = (0..257).collect();
        let mut b = a.clone();
        shuffle(&mut a, &mut SplitMix64::new(7));
        shuffle(&mut b, &mut SplitMix64::new(7));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..257).collect::<Vec<_>>());
        // A different seed gives a different order (overwhelmingly likely,
        // and frozen here since the generator is deterministic).
        let mut c: Vec<usize> = (0..257).collect();
        shuffle(&mut c, &mut SplitMix64::new(8));
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut rng = SplitMix64::new(123);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean={mean}");
        assert!((var - 1.0).abs() < 0.05, "var={var}");
    }
}
