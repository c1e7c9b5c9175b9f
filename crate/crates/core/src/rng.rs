//! Counter-based random streams.
//!
//! Every draw is addressed by `(master_seed, purpose, trial, word offset)`.
//! The ChaCha block function is a pure function of key, stream and counter,
//! so a trial's numbers do not depend on which thread produced them or in
//! which order trials were visited.
//!
//! Layout: the key is derived from `master_seed` and the [`Purpose`] tag, the
//! ChaCha stream id is the trial index, and coefficient `k` of a trial
//! occupies the 32-bit words `[4k, 4k + 4)` of that stream (two `u64` draws).

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::f64::consts::TAU;

/// Independent families of streams sharing one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Section coefficients `c_J`.
    Coefficients,
    /// Conditioned samples for the hole lower-bound witness.
    Witness,
    /// Synthetic streams used by estimator self-checks.
    Synthetic,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Coefficients => 0x636f_6566_6673_0001,
            Purpose::Witness => 0x7769_746e_6573_0002,
            Purpose::Synthetic => 0x7379_6e74_6865_0003,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for a single trial.
#[derive(Debug, Clone)]
pub struct TrialRng {
    inner: ChaCha8Rng,
}

impl TrialRng {
    pub fn new(master_seed: u64, purpose: Purpose, trial: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = master_seed ^ purpose.tag();
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial);
        Self { inner }
    }

    /// Position the stream at coefficient `index` (4 words per coefficient).
    pub fn seek_coefficient(&mut self, index: u64) {
        self.inner.set_word_pos(u128::from(index) * 4);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on `(0, 1]` with 53 bits of resolution.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard complex Gaussian (`E|c|^2 = 1`, real and imaginary parts of
    /// variance 1/2) via Box–Muller on two uniforms.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let radius = (-u1.ln()).sqrt();
        Complex64::from_polar(radius, TAU * u2)
    }

    /// Complex Gaussian conditioned on `|c| > 1`. Uses the memorylessness of
    /// `|c|^2 ~ Exp(1)`.
    pub fn complex_gaussian_outside_unit(&mut self) -> Complex64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        let radius = (1.0 - u1.ln()).sqrt();
        Complex64::from_polar(radius, TAU * u2)
    }

    /// Complex Gaussian conditioned on `|c| < t`.
    pub fn complex_gaussian_inside(&mut self, t: f64) -> Complex64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        // inverse CDF of Exp(1) truncated to [0, t^2)
        let mass = -(-t * t).exp_m1();
        let radius2 = -(-u1 * mass).ln_1p();
        Complex64::from_polar(radius2.sqrt().min(t * (1.0 - f64::EPSILON)), TAU * u2)
    }

    /// Bernoulli(p) draw.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = TrialRng::new(42, Purpose::Coefficients, 7);
        let mut b = TrialRng::new(42, Purpose::Coefficients, 7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn trials_and_purposes_differ() {
        let x = TrialRng::new(42, Purpose::Coefficients, 7).next_u64();
        let y = TrialRng::new(42, Purpose::Coefficients, 8).next_u64();
        let z = TrialRng::new(42, Purpose::Witness, 7).next_u64();
        let w = TrialRng::new(43, Purpose::Coefficients, 7).next_u64();
        assert!(x != y && x != z && x != w);
    }

    #[test]
    fn seek_matches_sequential_draws() {
        let mut seq = TrialRng::new(1, Purpose::Coefficients, 3);
        let draws: Vec<Complex64> = (0..10).map(|_| seq.complex_gaussian()).collect();
        let mut jump = TrialRng::new(1, Purpose::Coefficients, 3);
        jump.seek_coefficient(6);
        assert_eq!(jump.complex_gaussian(), draws[6]);
        jump.seek_coefficient(2);
        assert_eq!(jump.complex_gaussian(), draws[2]);
    }

    #[test]
    fn complex_gaussian_moments() {
        let mut rng = TrialRng::new(5, Purpose::Synthetic, 0);
        let n = 200_000;
        let (mut m2, mut re, mut re2, mut cross) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let c = rng.complex_gaussian();
            m2 += c.norm_sqr();
            re += c.re;
            re2 += c.re * c.re;
            cross += c.re * c.im;
        }
        let n = n as f64;
        assert!((m2 / n - 1.0).abs() < 0.01);
        assert!((re / n).abs() < 0.01);
        assert!((re2 / n - 0.5).abs() < 0.01);
        assert!((cross / n).abs() < 0.01);
    }

    #[test]
    fn conditioned_draws_respect_their_bounds() {
        let mut rng = TrialRng::new(9, Purpose::Witness, 1);
        for _ in 0..10_000 {
            assert!(rng.complex_gaussian_outside_unit().norm() > 1.0);
            assert!(rng.complex_gaussian_inside(1e-3).norm() < 1e-3);
            assert!(rng.complex_gaussian_inside(0.5).norm() < 0.5);
        }
    }
}
