//! Sample summaries with compensated, fixed-order summation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<S> {
    sum: S,
    compensation: S,
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self {
            sum: S::zero(),
            compensation: S::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: S) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn total(&self) -> S {
        self.sum + self.compensation
    }
}

impl<S: Scalar> FromIterator<S> for CompensatedSum<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Mean, unbiased variance and standard error of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary<S> {
    pub mean: S,
    pub variance: S,
    pub std_error: S,
    pub n: usize,
}

/// Summarizes at least two samples. Sums run in slice order, so the result
/// depends only on the sample values.
pub fn summarize<S: Scalar>(samples: &[S]) -> Result<Summary<S>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let count = S::of(n as f64);
    let mean = samples
        .iter()
        .copied()
        .collect::<CompensatedSum<S>>()
        .total()
        / count;
    let ss = samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .collect::<CompensatedSum<S>>()
        .total();
    let variance = ss / S::of((n - 1) as f64);
    Ok(Summary {
        mean,
        variance,
        std_error: (variance / count).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        let s = summarize(&[1.0f64, 1.0, 1.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn two_points() {
        let s = summarize(&[0.0f64, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.std_error - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few() {
        assert_eq!(summarize::<f64>(&[]), Err(Error::TooFewSamples(0)));
        assert_eq!(summarize(&[3.0f64]), Err(Error::TooFewSamples(1)));
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16f64);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.total(), 1000.0);
    }
}
