//! Schedules `α_n`: how much of the path perturbation is moved into the
//! kernel weight at each step.
//!
//! `α ≡ 0` is pure path perturbation, `α ≡ 1/Δt` pure kernel
//! differentiation, `α_t = 1/(T − t)` the Bismut–Elworthy–Li weight, and a
//! constant `α` above the top Lyapunov exponent damps tangent growth
//! uniformly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Read-only information available to a schedule at step `n`.
///
/// The view exposes the step index, time, step size, the run horizon (when
/// finite) and the current state `x_n`. It carries no Brownian increment, so
/// a schedule cannot look at `ΔB_n` or anything later:
///
/// ```compile_fail
/// use pathkernel::schedule::HistoryView;
/// fn peek(view: &HistoryView<'_, f64>) -> f64 {
///     view.increment()[0]
/// }
/// ```
#[derive(Clone, Copy, Debug)]
pub struct HistoryView<'a, S> {
    step: usize,
    dt: S,
    horizon_steps: Option<usize>,
    state: &'a [S],
}

impl<'a, S: Scalar> HistoryView<'a, S> {
    pub fn new(step: usize, dt: S, horizon_steps: Option<usize>, state: &'a [S]) -> Self {
        Self {
            step,
            dt,
            horizon_steps,
            state,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    /// `n Δt`.
    pub fn time(&self) -> S {
        S::of(self.step as f64) * self.dt
    }

    /// Total step count `N` for finite-horizon runs; `None` for ergodic runs.
    pub fn horizon_steps(&self) -> Option<usize> {
        self.horizon_steps
    }

    /// The current state `x_n`.
    pub fn state(&self) -> &'a [S] {
        self.state
    }
}

/// An adapted scalar process `α_n`.
pub trait Schedule<S: Scalar>: Send + Sync {
    fn alpha(&self, view: &HistoryView<'_, S>) -> S;

    /// Selector-style description recorded in output metadata.
    fn label(&self) -> String;

    /// Called once before a run; `horizon` is `(N, Δt)` for finite-horizon
    /// runs and `None` for ergodic ones.
    fn check_run(&self, _horizon: Option<(usize, S)>) -> Result<()> {
        Ok(())
    }
}

impl<S: Scalar, T: Schedule<S> + ?Sized> Schedule<S> for &T {
    fn alpha(&self, view: &HistoryView<'_, S>) -> S {
        (**self).alpha(view)
    }
    fn label(&self) -> String {
        (**self).label()
    }
    fn check_run(&self, horizon: Option<(usize, S)>) -> Result<()> {
        (**self).check_run(horizon)
    }
}

impl<S: Scalar, T: Schedule<S> + ?Sized> Schedule<S> for Box<T> {
    fn alpha(&self, view: &HistoryView<'_, S>) -> S {
        (**self).alpha(view)
    }
    fn label(&self) -> String {
        (**self).label()
    }
    fn check_run(&self, horizon: Option<(usize, S)>) -> Result<()> {
        (**self).check_run(horizon)
    }
}

/// `α_n ≡ α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant<S> {
    alpha: S,
}

impl<S: Scalar> Constant<S> {
    pub fn new(alpha: S) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "constant schedule must be finite, got {alpha}"
            )));
        }
        if alpha < S::zero() {
            log::warn!("negative schedule alpha = {alpha}; tangent will be amplified");
        }
        Ok(Self { alpha })
    }

    pub fn value(&self) -> S {
        self.alpha
    }
}

impl<S: Scalar> Schedule<S> for Constant<S> {
    #[inline]
    fn alpha(&self, _view: &HistoryView<'_, S>) -> S {
        self.alpha
    }

    fn label(&self) -> String {
        if self.alpha == S::zero() {
            "zero".into()
        } else {
            format!("const:{}", self.alpha)
        }
    }
}

/// `α_n ≡ 1/Δt`, using the run's step size.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PureKernel;

impl<S: Scalar> Schedule<S> for PureKernel {
    #[inline]
    fn alpha(&self, view: &HistoryView<'_, S>) -> S {
        view.dt().recip()
    }

    fn label(&self) -> String {
        "kernel".into()
    }
}

/// `α_n = 1/(T − nΔt)` on steps `0..N`, evaluated as `1/((N − n) Δt)` so
/// that the last value is exactly `1/Δt` and `v_N` vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bel<S> {
    horizon: S,
}

impl<S: Scalar> Bel<S> {
    pub fn new(horizon: S) -> Result<Self> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { horizon })
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }
}

impl<S: Scalar> Schedule<S> for Bel<S> {
    #[inline]
    fn alpha(&self, view: &HistoryView<'_, S>) -> S {
        match view.horizon_steps() {
            Some(n_total) if view.step() < n_total => {
                let remaining = S::of((n_total - view.step()) as f64);
                (remaining * view.dt()).recip()
            }
            // outside the horizon the schedule is undefined
            _ => S::nan(),
        }
    }

    fn label(&self) -> String {
        "bel".into()
    }

    fn check_run(&self, horizon: Option<(usize, S)>) -> Result<()> {
        let Some((steps, dt)) = horizon else {
            return Err(Error::FiniteHorizonOnly(Schedule::<S>::label(self)));
        };
        let t = S::of(steps as f64) * dt;
        if (t - self.horizon).abs() > S::of(1e-6) * self.horizon.max(S::one()) {
            return Err(Error::InvalidConfig(format!(
                "bel schedule horizon {} does not match run horizon {}",
                self.horizon, t
            )));
        }
        Ok(())
    }
}

/// A user rule reading the history view, e.g. larger `α` where the dynamics
/// is locally unstable.
pub struct StateDependent<F> {
    rule: F,
    label: String,
}

impl<F> StateDependent<F> {
    pub fn new(label: impl Into<String>, rule: F) -> Self {
        Self {
            rule,
            label: label.into(),
        }
    }
}

impl<S: Scalar, F> Schedule<S> for StateDependent<F>
where
    F: Fn(&HistoryView<'_, S>) -> S + Send + Sync,
{
    #[inline]
    fn alpha(&self, view: &HistoryView<'_, S>) -> S {
        (self.rule)(view)
    }

    fn label(&self) -> String {
        format!("rule:{}", self.label)
    }
}

pub fn constant_schedule<S: Scalar>(alpha: S) -> Result<Constant<S>> {
    Constant::new(alpha)
}

pub fn pure_kernel_schedule() -> PureKernel {
    PureKernel
}

pub fn bel_schedule<S: Scalar>(horizon: S) -> Result<Bel<S>> {
    Bel::new(horizon)
}

pub fn state_dependent_schedule<S, F>(label: impl Into<String>, rule: F) -> StateDependent<F>
where
    S: Scalar,
    F: Fn(&HistoryView<'_, S>) -> S + Send + Sync,
{
    StateDependent::new(label, rule)
}

/// Parses a CLI selector: `const:<α>`, `zero`, `kernel` or `bel`.
///
/// `bel` needs the finite horizon `T`.
pub fn parse_schedule<S: Scalar>(
    selector: &str,
    horizon: Option<S>,
) -> Result<Box<dyn Schedule<S>>> {
    let selector = selector.trim();
    match selector {
        "zero" => Ok(Box::new(Constant::new(S::zero())?)),
        "kernel" => Ok(Box::new(PureKernel)),
        "bel" => match horizon {
            Some(t) => Ok(Box::new(Bel::new(t)?)),
            None => Err(Error::FiniteHorizonOnly("bel".into())),
        },
        _ => {
            let Some(value) = selector.strip_prefix("const:") else {
                return Err(Error::Unknown {
                    kind: "schedule",
                    name: selector.into(),
                });
            };
            let alpha: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("cannot parse schedule value `{value}`"))
            })?;
            Ok(Box::new(Constant::new(S::of(alpha))?))
        }
    }
}
