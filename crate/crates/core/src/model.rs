//! Model-facing types: states, tangents, parameters, the SDE and observable
//! interfaces, and finite-difference validation of user-supplied derivatives.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{norm, Scalar};

/// A point in state space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct State<S>(pub Vec<S>);

/// A tangent vector: the derivative of a state along the active parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentVector<S>(pub Vec<S>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl<S: Scalar> $name<S> {
            pub fn zeros(dim: usize) -> Self {
                Self(vec![S::zero(); dim])
            }

            pub fn filled(dim: usize, value: S) -> Self {
                Self(vec![value; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|c| c.is_finite())
            }

            pub fn into_inner(self) -> Vec<S> {
                self.0
            }
        }

        impl<S> From<Vec<S>> for $name<S> {
            fn from(v: Vec<S>) -> Self {
                Self(v)
            }
        }

        impl<S> Deref for $name<S> {
            type Target = [S];
            fn deref(&self) -> &[S] {
                &self.0
            }
        }

        impl<S> DerefMut for $name<S> {
            fn deref_mut(&mut self) -> &mut [S] {
                &mut self.0
            }
        }
    };
}

vector_newtype!(State);
vector_newtype!(TangentVector);

/// The base value of the single differentiated parameter and its identifier.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamPoint<S> {
    pub gamma: S,
    pub param_id: String,
}

impl<S: Scalar> ParamPoint<S> {
    pub fn new(gamma: S, param_id: impl Into<String>) -> Self {
        Self {
            gamma,
            param_id: param_id.into(),
        }
    }
}

/// An Ito SDE `dX = F^γ(X) dt + σ^γ(X) dB` with scalar diffusion and an
/// affine initial condition `X_0 = x_0 + γ v_0`, together with the
/// derivatives the tangent recursion needs.
///
/// Exactly one scalar parameter is differentiated; the model decides which
/// (see [`SdeModel::param_id`]). All derivative capabilities are evaluated at
/// the run's base `gamma`, which need not be zero.
///
/// Buffers passed as `out` have length [`SdeModel::dim`] and are overwritten.
pub trait SdeModel<S: Scalar>: Send + Sync {
    /// Registry name, e.g. `"lorenz96"`.
    fn name(&self) -> &str;

    /// Identifier of the active parameter.
    fn param_id(&self) -> &str;

    fn dim(&self) -> usize;

    fn drift(&self, x: &[S], gamma: S, out: &mut [S]);

    /// Scalar diffusion coefficient; must be strictly positive wherever a
    /// sensitivity run visits.
    fn diffusion(&self, x: &[S], gamma: S) -> S;

    /// Jacobian-vector product `∇_v F(x)`; linear in `v`.
    fn drift_jvp(&self, x: &[S], gamma: S, v: &[S], out: &mut [S]);

    /// `∂F^γ/∂γ (x)`.
    fn drift_dgamma(&self, x: &[S], gamma: S, out: &mut [S]);

    /// `dσ(x) · v`; linear in `v`.
    fn diffusion_grad_dot(&self, x: &[S], gamma: S, v: &[S]) -> S;

    /// `∂σ^γ/∂γ (x)`.
    fn diffusion_dgamma(&self, x: &[S], gamma: S) -> S;

    /// `x_0 + γ v_0`.
    fn initial_state(&self, gamma: S, out: &mut [S]);

    /// `v_0 = ∂x_0/∂γ`.
    fn initial_tangent(&self, out: &mut [S]);

    /// Key/value description echoed into run metadata.
    fn describe(&self) -> Vec<(String, String)> {
        Vec::new()
    }
}

/// A scalar observable `Φ` with its differential.
pub trait Observable<S: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, x: &[S]) -> S;

    fn gradient(&self, x: &[S], out: &mut [S]);

    /// `dΦ(x) · v`.
    fn directional(&self, x: &[S], v: &[S]) -> S {
        let mut g = vec![S::zero(); x.len()];
        self.gradient(x, &mut g);
        crate::scalar::dot(&g, v)
    }
}

impl<S: Scalar, M: SdeModel<S> + ?Sized> SdeModel<S> for &M {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn param_id(&self) -> &str {
        (**self).param_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift(&self, x: &[S], gamma: S, out: &mut [S]) {
        (**self).drift(x, gamma, out)
    }
    fn diffusion(&self, x: &[S], gamma: S) -> S {
        (**self).diffusion(x, gamma)
    }
    fn drift_jvp(&self, x: &[S], gamma: S, v: &[S], out: &mut [S]) {
        (**self).drift_jvp(x, gamma, v, out)
    }
    fn drift_dgamma(&self, x: &[S], gamma: S, out: &mut [S]) {
        (**self).drift_dgamma(x, gamma, out)
    }
    fn diffusion_grad_dot(&self, x: &[S], gamma: S, v: &[S]) -> S {
        (**self).diffusion_grad_dot(x, gamma, v)
    }
    fn diffusion_dgamma(&self, x: &[S], gamma: S) -> S {
        (**self).diffusion_dgamma(x, gamma)
    }
    fn initial_state(&self, gamma: S, out: &mut [S]) {
        (**self).initial_state(gamma, out)
    }
    fn initial_tangent(&self, out: &mut [S]) {
        (**self).initial_tangent(out)
    }
    fn describe(&self) -> Vec<(String, String)> {
        (**self).describe()
    }
}

impl<S: Scalar, M: SdeModel<S> + ?Sized> SdeModel<S> for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn param_id(&self) -> &str {
        (**self).param_id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift(&self, x: &[S], gamma: S, out: &mut [S]) {
        (**self).drift(x, gamma, out)
    }
    fn diffusion(&self, x: &[S], gamma: S) -> S {
        (**self).diffusion(x, gamma)
    }
    fn drift_jvp(&self, x: &[S], gamma: S, v: &[S], out: &mut [S]) {
        (**self).drift_jvp(x, gamma, v, out)
    }
    fn drift_dgamma(&self, x: &[S], gamma: S, out: &mut [S]) {
        (**self).drift_dgamma(x, gamma, out)
    }
    fn diffusion_grad_dot(&self, x: &[S], gamma: S, v: &[S]) -> S {
        (**self).diffusion_grad_dot(x, gamma, v)
    }
    fn diffusion_dgamma(&self, x: &[S], gamma: S) -> S {
        (**self).diffusion_dgamma(x, gamma)
    }
    fn initial_state(&self, gamma: S, out: &mut [S]) {
        (**self).initial_state(gamma, out)
    }
    fn initial_tangent(&self, out: &mut [S]) {
        (**self).initial_tangent(out)
    }
    fn describe(&self) -> Vec<(String, String)> {
        (**self).describe()
    }
}

impl<S: Scalar, O: Observable<S> + ?Sized> Observable<S> for &O {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, x: &[S]) -> S {
        (**self).value(x)
    }
    fn gradient(&self, x: &[S], out: &mut [S]) {
        (**self).gradient(x, out)
    }
    fn directional(&self, x: &[S], v: &[S]) -> S {
        (**self).directional(x, v)
    }
}

impl<S: Scalar, O: Observable<S> + ?Sized> Observable<S> for Box<O> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn value(&self, x: &[S]) -> S {
        (**self).value(x)
    }
    fn gradient(&self, x: &[S], out: &mut [S]) {
        (**self).gradient(x, out)
    }
    fn directional(&self, x: &[S], v: &[S]) -> S {
        (**self).directional(x, v)
    }
}

/// Evaluate the model's initial state at `gamma`.
pub fn initial_state<S: Scalar, M: SdeModel<S> + ?Sized>(model: &M, gamma: S) -> State<S> {
    let mut x = State::zeros(model.dim());
    model.initial_state(gamma, &mut x);
    x
}

/// Evaluate the model's initial tangent.
pub fn initial_tangent<S: Scalar, M: SdeModel<S> + ?Sized>(model: &M) -> TangentVector<S> {
    let mut v = TangentVector::zeros(model.dim());
    model.initial_tangent(&mut v);
    v
}

/// Rejects models whose initial state is not `x_0 + γ v_0`.
///
/// Probes a handful of `γ` values; the deviation is measured relative to
/// `max(|γ v_0|, 1)`.
pub fn check_affine_initial_condition<S: Scalar, M: SdeModel<S> + ?Sized>(model: &M) -> Result<()> {
    let base = initial_state(model, S::zero());
    let v0 = initial_tangent(model);
    let tol = S::epsilon().sqrt();
    let mut worst = S::zero();
    for g in [0.5, -1.25, 3.0] {
        let g = S::of(g);
        let xg = initial_state(model, g);
        let mut diff = S::zero();
        let mut scale = S::zero();
        for i in 0..model.dim() {
            let expected = g * v0[i];
            diff = diff + (xg[i] - base[i] - expected).powi(2);
            scale = scale + expected.powi(2);
        }
        let rel = diff.sqrt() / scale.sqrt().max(S::one());
        worst = worst.max(rel);
    }
    if worst > tol || !worst.is_finite() {
        return Err(Error::NonAffineInitialCondition {
            deviation: worst.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Which derivative capability a validation entry refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DerivativeCheck {
    DriftJvp,
    DiffusionGradDot,
    DriftDgamma,
    DiffusionDgamma,
}

impl fmt::Display for DerivativeCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::DriftJvp => "drift_jvp",
            Self::DiffusionGradDot => "diffusion_grad_dot",
            Self::DriftDgamma => "drift_dgamma",
            Self::DiffusionDgamma => "diffusion_dgamma",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub probe: usize,
    pub check: DerivativeCheck,
    /// `|supplied − fd| / max(|fd|, 1)`.
    pub rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub step: f64,
    pub tolerance: f64,
    pub entries: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    /// Largest relative error seen for `check` over all probes.
    pub fn max_error(&self, check: DerivativeCheck) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.check == check)
            .map(|e| e.rel_error)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-6,
        }
    }
}

/// Compares the model's closed-form derivatives against central finite
/// differences at every probe state, along the unit diagonal direction.
///
/// Mismatches are reported per probe and never abort the scan.
pub fn validate_model<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    probes: &[State<S>],
    gamma: S,
    opts: ValidationOptions,
) -> Result<ValidationReport> {
    if probes.is_empty() {
        return Err(Error::InvalidConfig("no probe states".into()));
    }
    let m = model.dim();
    let dir = TangentVector::filled(m, S::one() / S::of(m as f64).sqrt());
    let h = S::of(opts.step);
    let two_h = h + h;

    let mut entries = Vec::with_capacity(4 * probes.len());
    let mut plus = vec![S::zero(); m];
    let mut minus = vec![S::zero(); m];
    let mut supplied = vec![S::zero(); m];
    let mut xp = vec![S::zero(); m];
    let mut xm = vec![S::zero(); m];

    for (probe, x) in probes.iter().enumerate() {
        if x.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: x.dim(),
            });
        }
        if !x.is_finite() {
            return Err(Error::InvalidConfig(format!("probe {probe} is not finite")));
        }
        for i in 0..m {
            xp[i] = x[i] + h * dir[i];
            xm[i] = x[i] - h * dir[i];
        }

        let mut push = |check, supplied: &[S], fd: &[S]| {
            let rel = rel_error(supplied, fd);
            entries.push(CheckEntry {
                probe,
                check,
                rel_error: rel,
                passed: rel <= opts.tolerance,
            });
        };

        model.drift(&xp, gamma, &mut plus);
        model.drift(&xm, gamma, &mut minus);
        let fd: Vec<S> = plus
            .iter()
            .zip(&minus)
            .map(|(&a, &b)| (a - b) / two_h)
            .collect();
        model.drift_jvp(x, gamma, &dir, &mut supplied);
        push(DerivativeCheck::DriftJvp, &supplied, &fd);

        let fd = (model.diffusion(&xp, gamma) - model.diffusion(&xm, gamma)) / two_h;
        let s = model.diffusion_grad_dot(x, gamma, &dir);
        push(DerivativeCheck::DiffusionGradDot, &[s], &[fd]);

        model.drift(x, gamma + h, &mut plus);
        model.drift(x, gamma - h, &mut minus);
        let fd: Vec<S> = plus
            .iter()
            .zip(&minus)
            .map(|(&a, &b)| (a - b) / two_h)
            .collect();
        model.drift_dgamma(x, gamma, &mut supplied);
        push(DerivativeCheck::DriftDgamma, &supplied, &fd);

        let fd = (model.diffusion(x, gamma + h) - model.diffusion(x, gamma - h)) / two_h;
        let s = model.diffusion_dgamma(x, gamma);
        push(DerivativeCheck::DiffusionDgamma, &[s], &[fd]);
    }

    Ok(ValidationReport {
        step: opts.step,
        tolerance: opts.tolerance,
        entries,
    })
}

fn rel_error<S: Scalar>(supplied: &[S], reference: &[S]) -> f64 {
    let diff: Vec<S> = supplied
        .iter()
        .zip(reference)
        .map(|(&a, &b)| a - b)
        .collect();
    let scale = norm(reference).max(S::one());
    let e = (norm(&diff) / scale).to_f64_lossy();
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}
