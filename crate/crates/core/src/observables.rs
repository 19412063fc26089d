//! Built-in observables.

use crate::error::{Error, Result};
use crate::model::Observable;
use crate::scalar::Scalar;

/// `Φ(x) = (1/M) Σ x^i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoordinateMean;

impl<S: Scalar> Observable<S> for CoordinateMean {
    fn name(&self) -> &str {
        "mean"
    }

    fn value(&self, x: &[S]) -> S {
        x.iter().copied().sum::<S>() / S::of(x.len() as f64)
    }

    fn gradient(&self, x: &[S], out: &mut [S]) {
        out.fill(S::of(x.len() as f64).recip());
    }

    fn directional(&self, _x: &[S], v: &[S]) -> S {
        v.iter().copied().sum::<S>() / S::of(v.len() as f64)
    }
}

/// `Φ(x) = x^i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Coordinate(pub usize);

impl<S: Scalar> Observable<S> for Coordinate {
    fn name(&self) -> &str {
        "x"
    }

    fn value(&self, x: &[S]) -> S {
        x[self.0]
    }

    fn gradient(&self, _x: &[S], out: &mut [S]) {
        out.fill(S::zero());
        out[self.0] = S::one();
    }

    fn directional(&self, _x: &[S], v: &[S]) -> S {
        v[self.0]
    }
}

/// `Φ(x) = (x^i)²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SquaredCoordinate(pub usize);

impl<S: Scalar> Observable<S> for SquaredCoordinate {
    fn name(&self) -> &str {
        "x2"
    }

    fn value(&self, x: &[S]) -> S {
        x[self.0] * x[self.0]
    }

    fn gradient(&self, x: &[S], out: &mut [S]) {
        out.fill(S::zero());
        out[self.0] = x[self.0] + x[self.0];
    }

    fn directional(&self, x: &[S], v: &[S]) -> S {
        (x[self.0] + x[self.0]) * v[self.0]
    }
}

/// `Φ + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shifted<O, S> {
    pub inner: O,
    pub offset: S,
}

impl<S: Scalar, O: Observable<S>> Observable<S> for Shifted<O, S> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn value(&self, x: &[S]) -> S {
        self.inner.value(x) + self.offset
    }

    fn gradient(&self, x: &[S], out: &mut [S]) {
        self.inner.gradient(x, out)
    }

    fn directional(&self, x: &[S], v: &[S]) -> S {
        self.inner.directional(x, v)
    }
}

/// Looks up an observable by name: `mean`, `x` or `x2` (the latter two act
/// on the first coordinate).
pub fn observable_by_name<S: Scalar>(name: &str) -> Result<Box<dyn Observable<S>>> {
    match name.trim() {
        "mean" => Ok(Box::new(CoordinateMean)),
        "x" => Ok(Box::new(Coordinate(0))),
        "x2" => Ok(Box::new(SquaredCoordinate(0))),
        other => Err(Error::Unknown {
            kind: "observable",
            name: other.into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_values() {
        let ones = vec![1.0f64; 40];
        assert_eq!(CoordinateMean.value(&ones), 1.0);
        assert_eq!(CoordinateMean.value(&[0.0f64; 40]), 0.0);
        let mut g = vec![0.0f64; 40];
        CoordinateMean.gradient(&ones, &mut g);
        let s: f64 = g.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((CoordinateMean.directional(&ones, &ones) - 1.0f64).abs() < 1e-15);
    }

    #[test]
    fn square_gradient_matches_finite_difference() {
        let x = [1.3f64, -0.4];
        let mut g = [0.0; 2];
        SquaredCoordinate(0).gradient(&x, &mut g);
        let h = 1e-6;
        let fd = (SquaredCoordinate(0).value(&[x[0] + h, x[1]])
            - SquaredCoordinate(0).value(&[x[0] - h, x[1]]))
            / (2.0 * h);
        assert!((g[0] - fd).abs() < 1e-8);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn default_directional_agrees_with_override() {
        struct Plain;
        impl Observable<f64> for Plain {
            fn name(&self) -> &str {
                "plain"
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0] * x[0]
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                SquaredCoordinate(0).gradient(x, out)
            }
        }
        let (x, v) = ([0.7, 2.0], [1.5, -3.0]);
        assert_eq!(
            Plain.directional(&x, &v),
            SquaredCoordinate(0).directional(&x, &v)
        );
    }

    #[test]
    fn lookup() {
        assert!(observable_by_name::<f64>("mean").is_ok());
        assert!(observable_by_name::<f64>("x2").is_ok());
        assert!(observable_by_name::<f64>("cube").is_err());
    }
}
