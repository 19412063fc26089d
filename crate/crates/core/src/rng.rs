//! Counter-addressed Gaussian increments.
//!
//! Every increment is a pure function of `(master_seed, path_index, step,
//! coordinate)`. Each path index selects a ChaCha8 stream; each step owns a
//! disjoint block of `2^32` words inside that stream, so draws for a given
//! step never depend on how many words earlier steps consumed, how paths were
//! scheduled across threads, or how they were batched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const WORDS_PER_STEP_LOG2: u32 = 32;
/// Largest addressable step: the ChaCha word position is 68 bits wide.
pub const MAX_STEP: u64 = (1 << (68 - WORDS_PER_STEP_LOG2)) - 1;

/// Path indices at or above this offset are reserved for independently
/// coupled oracle runs, so they never collide with estimator paths.
pub const INDEPENDENT_PATH_OFFSET: u64 = 1 << 62;

#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    path_index: u64,
    step: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self::at(master_seed, path_index, 0)
    }

    /// A stream positioned at `step`.
    pub fn at(master_seed: u64, path_index: u64, step: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(path_index);
        Self {
            master_seed,
            path_index,
            step,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// The step whose increment the next call returns.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Writes `out.len()` independent `N(0, dt)` draws for the current step
    /// and advances the step counter by one.
    pub fn gaussian_increment<S: Scalar>(&mut self, dt: S, out: &mut [S]) -> Result<()> {
        if !(dt > S::zero()) || !dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig(
                "increment dimension must be at least 1".into(),
            ));
        }
        self.standard_normals(out)?;
        let scale = S::of(dt.to_f64_lossy().sqrt());
        for z in out.iter_mut() {
            *z = *z * scale;
        }
        Ok(())
    }

    /// Allocating form of [`RngStream::gaussian_increment`].
    pub fn increment<S: Scalar>(&mut self, dt: S, dim: usize) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); dim];
        self.gaussian_increment(dt, &mut out)?;
        Ok(out)
    }

    /// Writes standard normal draws for the current step and advances.
    pub fn standard_normals<S: Scalar>(&mut self, out: &mut [S]) -> Result<()> {
        if self.step > MAX_STEP {
            return Err(Error::InvalidConfig(format!(
                "step {} exceeds the addressable range",
                self.step
            )));
        }
        self.rng
            .set_word_pos(u128::from(self.step) << WORDS_PER_STEP_LOG2);
        for z in out.iter_mut() {
            let draw: f64 = StandardNormal.sample(&mut self.rng);
            *z = S::of(draw);
        }
        self.step += 1;
        Ok(())
    }

    /// Skips `steps` increments without drawing them.
    pub fn advance(&mut self, steps: u64) {
        self.step += steps;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_is_bit_identical() {
        let a: Vec<f64> = RngStream::at(7, 3, 11).increment(0.01, 5).unwrap();
        let mut s = RngStream::new(7, 3);
        s.advance(11);
        let b: Vec<f64> = s.increment(0.01, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sequential_matches_random_access() {
        let mut s = RngStream::new(42, 9);
        let seq: Vec<Vec<f64>> = (0..20).map(|_| s.increment(0.5, 3).unwrap()).collect();
        for (k, expected) in seq.iter().enumerate().rev() {
            let got: Vec<f64> = RngStream::at(42, 9, k as u64).increment(0.5, 3).unwrap();
            assert_eq!(&got, expected);
        }
    }

    #[test]
    fn step_draws_do_not_depend_on_previous_dimension() {
        // consuming a different number of words at step 0 leaves step 1 unchanged
        let mut a = RngStream::new(1, 0);
        a.increment::<f64>(0.1, 1).unwrap();
        let mut b = RngStream::new(1, 0);
        b.increment::<f64>(0.1, 64).unwrap();
        assert_eq!(
            a.increment::<f64>(0.1, 4).unwrap(),
            b.increment::<f64>(0.1, 4).unwrap()
        );
    }

    #[test]
    fn distinct_paths_differ() {
        let a: Vec<f64> = RngStream::at(5, 0, 2).increment(0.01, 4).unwrap();
        let b: Vec<f64> = RngStream::at(5, 1, 2).increment(0.01, 4).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn distinct_seeds_differ() {
        let a: Vec<f64> = RngStream::at(5, 0, 0).increment(0.01, 4).unwrap();
        let b: Vec<f64> = RngStream::at(6, 0, 0).increment(0.01, 4).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn advances_one_step_per_call() {
        let mut s = RngStream::new(0, 0);
        s.increment::<f64>(1.0, 2).unwrap();
        s.increment::<f64>(1.0, 2).unwrap();
        assert_eq!(s.step(), 2);
    }

    #[test]
    fn rejects_non_positive_dt() {
        let mut s = RngStream::new(0, 0);
        assert!(s.increment::<f64>(0.0, 2).is_err());
        assert!(s.increment::<f64>(-1.0, 2).is_err());
        assert!(s.increment::<f64>(f64::NAN, 2).is_err());
        assert!(s.increment::<f64>(0.1, 0).is_err());
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn f32_draws_are_rounded_f64_draws() {
        let a: Vec<f64> = RngStream::at(3, 3, 3).increment(0.25, 6).unwrap();
        let b: Vec<f32> = RngStream::at(3, 3, 3).increment(0.25f32, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((*x as f32 - y).abs() <= 1e-6);
        }
    }
}
