//! Seeded, counter-based Gaussian stream.
//!
//! Element `i` of the stream for `seed` is a pure function of `(seed, i)`, so
//! any window of a long latent can be generated independently (and in any
//! order) with identical results:
//!
//! 1. `bits(j) = splitmix64(seed + (j + 1) * 0x9E3779B97F4A7C15)` where
//!    `splitmix64` is the standard finalizer
//!    `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`
//!    and all arithmetic wraps modulo 2^64.
//! 2. Pair `p = i / 2` takes `u1 = ((bits(2p) >> 11) + 1) * 2^-53` in (0, 1]
//!    and `u2 = (bits(2p + 1) >> 11) * 2^-53` in [0, 1).
//! 3. Box-Muller in `f64`: `r = sqrt(-2 ln u1)`; element `2p` is
//!    `r cos(2 pi u2)` and element `2p + 1` is `r sin(2 pi u2)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic standard-normal stream indexed by position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianStream {
    seed: u64,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// An independent stream derived from this one, e.g. one per tensor.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(GOLDEN))),
        }
    }

    #[inline]
    fn bits(&self, counter: u64) -> u64 {
        splitmix64(self.seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) at position `i`.
    pub fn uniform(&self, i: u64) -> f64 {
        (self.bits(i) >> 11) as f64 * INV_2_53
    }

    fn pair(&self, p: u64) -> (f64, f64) {
        let u1 = ((self.bits(2 * p) >> 11) + 1) as f64 * INV_2_53;
        let u2 = (self.bits(2 * p + 1) >> 11) as f64 * INV_2_53;
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Standard normal at position `i`.
    pub fn normal(&self, i: u64) -> f64 {
        let (a, b) = self.pair(i / 2);
        if i % 2 == 0 {
            a
        } else {
            b
        }
    }

    /// Fills `out` with `sigma * N(0, 1)` from positions `offset..offset + out.len()`.
    pub fn fill(&self, offset: u64, sigma: f64, out: &mut [f32]) {
        let mut i = 0usize;
        if offset % 2 == 1 && !out.is_empty() {
            out[0] = (sigma * self.normal(offset)) as f32;
            i = 1;
        }
        while i + 1 < out.len() {
            let (a, b) = self.pair((offset + i as u64) / 2);
            out[i] = (sigma * a) as f32;
            out[i + 1] = (sigma * b) as f32;
            i += 2;
        }
        if i < out.len() {
            out[i] = (sigma * self.normal(offset + i as u64)) as f32;
        }
    }

    pub fn vec(&self, offset: u64, len: usize, sigma: f64) -> Vec<f32> {
        let mut v = vec![0.0; len];
        self.fill(offset, sigma, &mut v);
        v
    }
}
