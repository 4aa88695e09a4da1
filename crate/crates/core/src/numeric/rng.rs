use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use super::C64;
use crate::{Error, Result};

/// One SplitMix64 output for `state`; used to derive independent sub-seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded xoshiro256** stream (SplitMix64 state expansion) with Box-Muller
/// normals. Identical seeds give identical streams on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: Xoshiro256StarStar::seed_from_u64(seed), spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Draw from `N(mean, variance)`.
    pub fn gaussian(&mut self, mean: f64, variance: f64) -> Result<f64> {
        if !(variance >= 0.0) {
            return Err(Error::InvalidArgument(format!("variance must be non-negative, got {variance}")));
        }
        if variance == 0.0 {
            return Ok(mean);
        }
        Ok(mean + variance.sqrt() * self.standard_normal())
    }

    /// Complex draw with real and imaginary parts independently `N(0, component_variance)`.
    pub fn complex_gaussian(&mut self, component_variance: f64) -> Result<C64> {
        let re = self.gaussian(0.0, component_variance)?;
        let im = self.gaussian(0.0, component_variance)?;
        Ok(C64::new(re, im))
    }
}
