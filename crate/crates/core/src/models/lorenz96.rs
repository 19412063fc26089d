use crate::error::{Error, Result};
use crate::model::SdeModel;
use crate::scalar::Scalar;

use super::ParamFlavor;

const FORCING: f64 = 8.0;
const CONFINEMENT: f64 = 0.01;

/// Lorenz 96 with additive isotropic noise and a weak quadratic confinement:
///
/// ```text
/// dX^i = ((X^{i+1} − X^{i−2}) X^{i−1} − X^i + 8 + γ⁰ − 0.01 (X^i)²) dt + (1 + γ¹) σ_0 dB^i
/// X_0  = γ² [1, …, 1]
/// ```
///
/// Indices are cyclic. Only the parameter selected by `flavor` is live; the
/// other two stay at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Lorenz96<S> {
    dim: usize,
    sigma0: S,
    flavor: ParamFlavor,
    label: String,
}

impl<S: Scalar> Lorenz96<S> {
    pub const DEFAULT_DIM: usize = 40;
    pub const DEFAULT_SIGMA0: f64 = 0.5;

    /// `sigma0 = 0` builds the deterministic system, which can be integrated
    /// but not differentiated.
    pub fn new(dim: usize, sigma0: S, flavor: ParamFlavor) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidConfig(format!(
                "lorenz96 needs dim >= 4, got {dim}"
            )));
        }
        if !(sigma0 >= S::zero()) || !sigma0.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sigma0 must be >= 0, got {sigma0}"
            )));
        }
        let label = match flavor {
            ParamFlavor::Drift => "gamma0",
            ParamFlavor::Diffusion => "gamma1",
            ParamFlavor::Initial => "gamma2",
        };
        Ok(Self {
            dim,
            sigma0,
            flavor,
            label: label.into(),
        })
    }

    /// The paper-default configuration: 40 coordinates, `σ_0 = 0.5`.
    pub fn standard(flavor: ParamFlavor) -> Self {
        Self::new(Self::DEFAULT_DIM, S::of(Self::DEFAULT_SIGMA0), flavor).expect("valid defaults")
    }

    pub fn sigma0(&self) -> S {
        self.sigma0
    }

    pub fn flavor(&self) -> ParamFlavor {
        self.flavor
    }

    #[inline]
    fn neighbours(&self, i: usize) -> (usize, usize, usize) {
        let m = self.dim;
        ((i + 1) % m, (i + m - 1) % m, (i + m - 2) % m)
    }
}

impl<S: Scalar> SdeModel<S> for Lorenz96<S> {
    fn name(&self) -> &str {
        "lorenz96"
    }

    fn param_id(&self) -> &str {
        &self.label
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
        let forcing = S::of(FORCING) + shift;
        let c = S::of(CONFINEMENT);
        for i in 0..self.dim {
            let (ip1, im1, im2) = self.neighbours(i);
            out[i] = (x[ip1] - x[im2]) * x[im1] - x[i] + forcing - c * x[i] * x[i];
        }
    }

    fn diffusion(&self, _x: &[S], gamma: S) -> S {
        match self.flavor {
            ParamFlavor::Diffusion => (S::one() + gamma) * self.sigma0,
            _ => self.sigma0,
        }
    }

    fn drift_jvp(&self, x: &[S], _gamma: S, v: &[S], out: &mut [S]) {
        let c2 = S::of(2.0 * CONFINEMENT);
        for i in 0..self.dim {
            let (ip1, im1, im2) = self.neighbours(i);
            out[i] =
                (v[ip1] - v[im2]) * x[im1] + (x[ip1] - x[im2]) * v[im1] - v[i] - c2 * x[i] * v[i];
        }
    }

    fn drift_dgamma(&self, _x: &[S], _gamma: S, out: &mut [S]) {
        let d = if self.flavor == ParamFlavor::Drift {
            S::one()
        } else {
            S::zero()
        };
        out.fill(d);
    }

    fn diffusion_grad_dot(&self, _x: &[S], _gamma: S, _v: &[S]) -> S {
        S::zero()
    }

    fn diffusion_dgamma(&self, _x: &[S], _gamma: S) -> S {
        match self.flavor {
            ParamFlavor::Diffusion => self.sigma0,
            _ => S::zero(),
        }
    }

    fn initial_state(&self, gamma: S, out: &mut [S]) {
        let x0 = if self.flavor == ParamFlavor::Initial {
            gamma
        } else {
            S::zero()
        };
        out.fill(x0);
    }

    fn initial_tangent(&self, out: &mut [S]) {
        let v0 = if self.flavor == ParamFlavor::Initial {
            S::one()
        } else {
            S::zero()
        };
        out.fill(v0);
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("dim".into(), self.dim.to_string()),
            ("sigma0".into(), self.sigma0.to_string()),
        ]
    }
}
