use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::scalar::Scalar;

use super::ParamFlavor;

/// Drift-free model `dX = σ^γ dB`.
///
/// With the diffusion flavor `σ^γ = 1 + γ`, `X_0 = 0`, `v_0 = 0`, so that
/// `X_T = (1 + γ) B_T` exactly under Euler. The initial flavor keeps `σ = 1`
/// and starts from `X_0 = γ [1, …, 1]`. The drift flavor is `dX = γ dt + dB`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gauss {
    dim: usize,
    flavor: ParamFlavor,
}

impl Gauss {
    pub fn new(dim: usize, flavor: ParamFlavor) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("gauss needs dim >= 1".into()));
        }
        Ok(Self { dim, flavor })
    }

    /// One-dimensional, diffusion-scale parameter.
    pub fn scalar() -> Self {
        Self {
            dim: 1,
            flavor: ParamFlavor::Diffusion,
        }
    }

    pub fn flavor(&self) -> ParamFlavor {
        self.flavor
    }
}

impl<S: Scalar> SdeModel<S> for Gauss {
    fn name(&self) -> &str {
        "gauss"
    }

    fn param_id(&self) -> &str {
        self.flavor.id()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, _x: &[S], gamma: S, out: &mut [S]) {
        out.fill(if self.flavor == ParamFlavor::Drift {
            gamma
        } else {
            S::zero()
        });
    }

    fn diffusion(&self, _x: &[S], gamma: S) -> S {
        match self.flavor {
            ParamFlavor::Diffusion => S::one() + gamma,
            _ => S::one(),
        }
    }

    fn drift_jvp(&self, _x: &[S], _gamma: S, _v: &[S], out: &mut [S]) {
        out.fill(S::zero());
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
        if self.flavor == ParamFlavor::Diffusion {
            S::one()
        } else {
            S::zero()
        }
    }

    fn initial_state(&self, gamma: S, out: &mut [S]) {
        out.fill(if self.flavor == ParamFlavor::Initial {
            gamma
        } else {
            S::zero()
        });
    }

    fn initial_tangent(&self, out: &mut [S]) {
        out.fill(if self.flavor == ParamFlavor::Initial {
            S::one()
        } else {
            S::zero()
        });
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![("dim".into(), self.dim.to_string())]
    }
}
