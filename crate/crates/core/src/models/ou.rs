use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::scalar::Scalar;

use super::ParamFlavor;

/// Ornstein–Uhlenbeck process with independent coordinates, used as an
/// analytically solvable reference:
///
/// ```text
/// dX = (−a X + γ_drift) dt + (1 + γ_diffusion) σ dB,   X_0 = x_0 + γ_initial
/// ```
///
/// The stationary law is Gaussian with mean `γ_drift / a` and variance
/// `((1 + γ_diffusion) σ)² / (2a)` per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct OrnsteinUhlenbeck<S> {
    dim: usize,
    rate: S,
    sigma: S,
    x0: S,
    flavor: ParamFlavor,
}

impl<S: Scalar> OrnsteinUhlenbeck<S> {
    pub fn new(dim: usize, rate: S, sigma: S, flavor: ParamFlavor) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("ou needs dim >= 1".into()));
        }
        if !(rate > S::zero()) || !rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ou rate must be positive, got {rate}"
            )));
        }
        if !(sigma > S::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ou sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            dim,
            rate,
            sigma,
            x0: S::zero(),
            flavor,
        })
    }

    /// Scalar process with `a = 1`, `σ = 1`.
    pub fn unit(flavor: ParamFlavor) -> Self {
        Self::new(1, S::one(), S::one(), flavor).expect("valid defaults")
    }

    /// Starting point at `γ = 0`, in every coordinate.
    pub fn with_start(mut self, x0: S) -> Self {
        self.x0 = x0;
        self
    }

    pub fn rate(&self) -> S {
        self.rate
    }

    pub fn sigma(&self) -> S {
        self.sigma
    }

    pub fn flavor(&self) -> ParamFlavor {
        self.flavor
    }
}

impl<S: Scalar> SdeModel<S> for OrnsteinUhlenbeck<S> {
    fn name(&self) -> &str {
        "ou"
    }

    fn param_id(&self) -> &str {
        self.flavor.id()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &[S], gamma: S, out: &mut [S]) {
        let shift = if self.flavor == ParamFlavor::Drift {
            gamma
        } else {
            S::zero()
        };
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -self.rate * xi + shift;
        }
    }

    fn diffusion(&self, _x: &[S], gamma: S) -> S {
        match self.flavor {
            ParamFlavor::Diffusion => (S::one() + gamma) * self.sigma,
            _ => self.sigma,
        }
    }

    fn drift_jvp(&self, _x: &[S], _gamma: S, v: &[S], out: &mut [S]) {
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = -self.rate * vi;
        }
    }

    fn drift_dgamma(&self, _x: &[S], _gamma: S, out: &mut [S]) {
        out.fill(if self.flavor == ParamFlavor::Drift {
            S::one()
        } else {
            S::zero()
        });
    }

    fn diffusion_grad_dot(&self, _x: &[S], _gamma: S, _v: &[S]) -> S {
        S::zero()
    }

    fn diffusion_dgamma(&self, _x: &[S], _gamma: S) -> S {
        match self.flavor {
            ParamFlavor::Diffusion => self.sigma,
            _ => S::zero(),
        }
    }

    fn initial_state(&self, gamma: S, out: &mut [S]) {
        let shift = if self.flavor == ParamFlavor::Initial {
            gamma
        } else {
            S::zero()
        };
        out.fill(self.x0 + shift);
    }

    fn initial_tangent(&self, out: &mut [S]) {
        out.fill(if self.flavor == ParamFlavor::Initial {
            S::one()
        } else {
            S::zero()
        });
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("dim".into(), self.dim.to_string()),
            ("rate".into(), self.rate.to_string()),
            ("sigma".into(), self.sigma.to_string()),
            ("x0".into(), self.x0.to_string()),
        ]
    }
}
