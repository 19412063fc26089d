//! Built-in models: noisy Lorenz 96, Ornstein–Uhlenbeck and the drift-free
//! Gaussian model.

mod gauss;
mod lorenz96;
mod ou;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use gauss::Gauss;
pub use lorenz96::Lorenz96;
pub use ou::OrnsteinUhlenbeck;

/// Which term the differentiated parameter enters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamFlavor {
    /// Additive shift of the drift (`γ⁰` for Lorenz 96).
    #[serde(alias = "gamma0")]
    Drift,
    /// Multiplicative scale `(1 + γ)` of the diffusion (`γ¹`).
    #[serde(alias = "gamma1")]
    Diffusion,
    /// Initial condition `x_0 + γ [1, …, 1]` (`γ²`).
    #[serde(alias = "gamma2")]
    Initial,
}

impl ParamFlavor {
    pub fn id(self) -> &'static str {
        match self {
            Self::Drift => "drift",
            Self::Diffusion => "diffusion",
            Self::Initial => "initial",
        }
    }
}

impl fmt::Display for ParamFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ParamFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "drift" | "gamma0" | "0" => Ok(Self::Drift),
            "diffusion" | "gamma1" | "1" => Ok(Self::Diffusion),
            "initial" | "gamma2" | "2" => Ok(Self::Initial),
            other => Err(Error::Unknown {
                kind: "parameter",
                name: other.into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flavor_aliases() {
        assert_eq!("gamma0".parse::<ParamFlavor>().unwrap(), ParamFlavor::Drift);
        assert_eq!(
            "gamma1".parse::<ParamFlavor>().unwrap(),
            ParamFlavor::Diffusion
        );
        assert_eq!(
            "initial".parse::<ParamFlavor>().unwrap(),
            ParamFlavor::Initial
        );
        assert!("gamma3".parse::<ParamFlavor>().is_err());
    }
}
