//! Name-based model construction for configuration files and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_affine_initial_condition, SdeModel};
use crate::models::{Gauss, Lorenz96, OrnsteinUhlenbeck, ParamFlavor};
use crate::scalar::Scalar;

/// Model name plus optional overrides; unset fields take model defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub param: ParamFlavor,
    pub dim: Option<usize>,
    /// Lorenz 96 base noise.
    pub sigma0: Option<f64>,
    /// OU mean-reversion rate.
    pub rate: Option<f64>,
    /// OU base noise.
    pub sigma: Option<f64>,
    /// OU starting point.
    pub x0: Option<f64>,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, param: ParamFlavor) -> Self {
        Self {
            name: name.into(),
            param,
            dim: None,
            sigma0: None,
            rate: None,
            sigma: None,
            x0: None,
        }
    }
}

type Constructor<S> = Box<dyn Fn(&ModelSpec) -> Result<Box<dyn SdeModel<S>>> + Send + Sync>;

pub struct ModelRegistry<S: Scalar> {
    constructors: BTreeMap<String, Constructor<S>>,
}

impl<S: Scalar> Default for ModelRegistry<S> {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl<S: Scalar> ModelRegistry<S> {
    pub fn empty() -> Self {
        Self {
            constructors: BTreeMap::new(),
        }
    }

    /// `lorenz96`, `ou` and `gauss`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("lorenz96", |spec| {
            let m = Lorenz96::<S>::new(
                spec.dim.unwrap_or(Lorenz96::<S>::DEFAULT_DIM),
                S::of(spec.sigma0.unwrap_or(Lorenz96::<S>::DEFAULT_SIGMA0)),
                spec.param,
            )?;
            Ok(Box::new(m))
        });
        r.register("ou", |spec| {
            let m = OrnsteinUhlenbeck::<S>::new(
                spec.dim.unwrap_or(1),
                S::of(spec.rate.unwrap_or(1.0)),
                S::of(spec.sigma.unwrap_or(1.0)),
                spec.param,
            )?
            .with_start(S::of(spec.x0.unwrap_or(0.0)));
            Ok(Box::new(m))
        });
        r.register("gauss", |spec| {
            Ok(Box::new(Gauss::new(spec.dim.unwrap_or(1), spec.param)?))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, constructor: F)
    where
        F: Fn(&ModelSpec) -> Result<Box<dyn SdeModel<S>>> + Send + Sync + 'static,
    {
        self.constructors
            .insert(name.to_string(), Box::new(constructor));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.constructors.keys().map(String::as_str)
    }

    /// Builds the model and rejects it unless its initial condition is
    /// affine in `γ`.
    pub fn build(&self, spec: &ModelSpec) -> Result<Box<dyn SdeModel<S>>> {
        let ctor = self
            .constructors
            .get(&spec.name)
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: spec.name.clone(),
            })?;
        let model = ctor(spec)?;
        check_affine_initial_condition(model.as_ref())?;
        Ok(model)
    }
}
