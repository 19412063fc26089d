//! Euler–Maruyama stepping of the state together with the damped tangent
//! recursion
//!
//! ```text
//! x_{n+1} = x_n + F(x_n) Δt + σ(x_n) ΔB_n
//! v_{n+1} = v_n − α_n v_n Δt + (∇_{v_n}F + ∂_γF)(x_n) Δt + (dσ·v_n + ∂_γσ)(x_n) ΔB_n
//! I_n     = (ΔB_n · α_n v_n) / σ(x_n)
//! ```
//!
//! Within a step the order is: draw `ΔB_n`, evaluate `α_n`, form `I_n`,
//! advance `x`, advance `v`. Both `I_n` and the tangent update read the
//! pre-update `x_n` and `v_n`, and both updates consume the same increment.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Observable, SdeModel, State, TangentVector};
use crate::rng::RngStream;
use crate::scalar::{dot, norm, Scalar};
use crate::schedule::{HistoryView, Schedule};

/// A path is flagged once `|v|` exceeds this, or any coordinate of `x` or `v`
/// stops being finite.
pub const TANGENT_OVERFLOW: f64 = 1e12;

/// Result of one combined state/tangent step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord<S> {
    pub x_next: State<S>,
    pub v_next: TangentVector<S>,
    /// `I_n`.
    pub kernel_increment: S,
    /// `Φ(x_n)` when an observable was supplied.
    pub phi: Option<S>,
    pub overflowed: bool,
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_dt<S: Scalar>(dt: S) -> Result<()> {
    if !(dt > S::zero()) || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(())
}

/// `x + F^γ(x) Δt + σ^γ(x) Δb`. A non-finite result is returned as is;
/// callers flag it with [`is_overflowed`].
pub fn euler_step<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    x: &State<S>,
    gamma: S,
    dt: S,
    db: &[S],
) -> Result<State<S>> {
    check_dt(dt)?;
    check_dim(model.dim(), x.dim())?;
    check_dim(model.dim(), db.len())?;
    let mut drift = vec![S::zero(); model.dim()];
    let mut out = x.clone();
    euler_in_place(model, &mut out, gamma, dt, db, &mut drift);
    Ok(out)
}

#[inline]
fn euler_in_place<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    x: &mut [S],
    gamma: S,
    dt: S,
    db: &[S],
    drift: &mut [S],
) {
    model.drift(x, gamma, drift);
    let sigma = model.diffusion(x, gamma);
    for ((xi, &fi), &bi) in x.iter_mut().zip(drift.iter()).zip(db) {
        *xi = *xi + fi * dt + sigma * bi;
    }
}

/// `v − α v Δt + (∇_v F + ∂_γF)(x) Δt + (dσ·v + ∂_γσ)(x) Δb`.
pub fn tangent_step<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    x: &State<S>,
    v: &TangentVector<S>,
    gamma: S,
    alpha: S,
    dt: S,
    db: &[S],
) -> Result<TangentVector<S>> {
    check_dt(dt)?;
    let m = model.dim();
    check_dim(m, x.dim())?;
    check_dim(m, v.dim())?;
    check_dim(m, db.len())?;
    let mut out = v.clone();
    let mut jvp = vec![S::zero(); m];
    let mut dgamma = vec![S::zero(); m];
    tangent_in_place(
        model,
        x,
        &mut out,
        gamma,
        alpha,
        dt,
        db,
        &mut jvp,
        &mut dgamma,
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn tangent_in_place<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    x: &[S],
    v: &mut [S],
    gamma: S,
    alpha: S,
    dt: S,
    db: &[S],
    jvp: &mut [S],
    dgamma: &mut [S],
) {
    model.drift_jvp(x, gamma, v, jvp);
    model.drift_dgamma(x, gamma, dgamma);
    let noise = model.diffusion_grad_dot(x, gamma, v) + model.diffusion_dgamma(x, gamma);
    let damp = alpha * dt;
    for i in 0..v.len() {
        v[i] = v[i] - damp * v[i] + (jvp[i] + dgamma[i]) * dt + noise * db[i];
    }
}

/// `I_n = (Δb · α v) / σ(x)`.
pub fn kernel_increment<S: Scalar, M: SdeModel<S> + ?Sized>(
    model: &M,
    x: &State<S>,
    v: &TangentVector<S>,
    gamma: S,
    alpha: S,
    db: &[S],
) -> Result<S> {
    let m = model.dim();
    check_dim(m, x.dim())?;
    check_dim(m, v.dim())?;
    check_dim(m, db.len())?;
    let sigma = model.diffusion(x, gamma);
    increment_from_sigma(sigma, v, alpha, db, 0)
}

#[inline]
fn increment_from_sigma<S: Scalar>(
    sigma: S,
    v: &[S],
    alpha: S,
    db: &[S],
    step: usize,
) -> Result<S> {
    if !(sigma > S::zero()) {
        return Err(Error::DegenerateDiffusion {
            step,
            value: sigma.to_f64_lossy(),
        });
    }
    if alpha == S::zero() {
        return Ok(S::zero());
    }
    Ok(dot(db, v) * alpha / sigma)
}

/// Overflow test applied after every step.
pub fn is_overflowed<S: Scalar>(x: &[S], v: &[S]) -> bool {
    let vn = norm(v);
    !vn.is_finite() || vn.to_f64_lossy() > TANGENT_OVERFLOW || x.iter().any(|c| !c.is_finite())
}

/// One full step on owned values, mirroring a single iteration of the
/// finite-horizon loop.
#[allow(clippy::too_many_arguments)]
pub fn step<S, M, O>(
    model: &M,
    observable: Option<&O>,
    x: &State<S>,
    v: &TangentVector<S>,
    gamma: S,
    alpha: S,
    dt: S,
    db: &[S],
) -> Result<StepRecord<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    let kernel = kernel_increment(model, x, v, gamma, alpha, db)?;
    let phi = observable.map(|o| o.value(x));
    let x_next = euler_step(model, x, gamma, dt, db)?;
    let v_next = tangent_step(model, x, v, gamma, alpha, dt, db)?;
    let overflowed = is_overflowed(&x_next, &v_next);
    Ok(StepRecord {
        x_next,
        v_next,
        kernel_increment: kernel,
        phi,
        overflowed,
    })
}

/// Outcome of [`PathState::advance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Advance<S> {
    pub kernel_increment: S,
    pub overflowed: bool,
}

/// Running `(x_n, v_n)` of a single path with preallocated scratch space.
///
/// Memory is `O(M)` regardless of the number of steps.
#[derive(Clone, Debug)]
pub struct PathState<S> {
    step: usize,
    x: Vec<S>,
    v: Vec<S>,
    db: Vec<S>,
    drift: Vec<S>,
    jvp: Vec<S>,
    dgamma: Vec<S>,
}

impl<S: Scalar> PathState<S> {
    /// Starts at the model's `x_0 + γ v_0` with tangent `v_0`.
    pub fn new<M: SdeModel<S> + ?Sized>(model: &M, gamma: S) -> Self {
        let m = model.dim();
        let mut x = vec![S::zero(); m];
        let mut v = vec![S::zero(); m];
        model.initial_state(gamma, &mut x);
        model.initial_tangent(&mut v);
        Self::from_parts(x, v)
    }

    pub fn from_parts(x: Vec<S>, v: Vec<S>) -> Self {
        let m = x.len();
        assert_eq!(m, v.len(), "state and tangent dimensions differ");
        Self {
            step: 0,
            x,
            v,
            db: vec![S::zero(); m],
            drift: vec![S::zero(); m],
            jvp: vec![S::zero(); m],
            dgamma: vec![S::zero(); m],
        }
    }

    /// Steps taken since the last [`PathState::reset_step`].
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn reset_step(&mut self) {
        self.step = 0;
    }

    pub fn x(&self) -> &[S] {
        &self.x
    }

    pub fn v(&self) -> &[S] {
        &self.v
    }

    pub fn v_mut(&mut self) -> &mut [S] {
        &mut self.v
    }

    /// The increment consumed by the most recent step.
    pub fn last_increment(&self) -> &[S] {
        &self.db
    }

    /// Advances the state only, ignoring the tangent. `σ = 0` is allowed.
    pub fn advance_state<M: SdeModel<S> + ?Sized>(
        &mut self,
        model: &M,
        gamma: S,
        dt: S,
        stream: &mut RngStream,
    ) -> Result<bool> {
        stream.gaussian_increment(dt, &mut self.db)?;
        euler_in_place(model, &mut self.x, gamma, dt, &self.db, &mut self.drift);
        self.step += 1;
        Ok(self.x.iter().any(|c| !c.is_finite()))
    }

    /// One step of the damped tangent scheme. Returns `I_n` and the overflow
    /// flag for `(x_{n+1}, v_{n+1})`.
    pub fn advance<M, Sch>(
        &mut self,
        model: &M,
        schedule: &Sch,
        gamma: S,
        dt: S,
        horizon_steps: Option<usize>,
        stream: &mut RngStream,
    ) -> Result<Advance<S>>
    where
        M: SdeModel<S> + ?Sized,
        Sch: Schedule<S> + ?Sized,
    {
        let n = self.step;
        stream.gaussian_increment(dt, &mut self.db)?;

        let alpha = schedule.alpha(&HistoryView::new(n, dt, horizon_steps, &self.x));
        if !alpha.is_finite() {
            return Err(Error::NonFiniteSchedule {
                schedule: schedule.label(),
                step: n,
                value: alpha.to_f64_lossy(),
            });
        }

        let sigma = model.diffusion(&self.x, gamma);
        let kernel = increment_from_sigma(sigma, &self.v, alpha, &self.db, n)?;

        // tangent first: it needs the pre-update x_n
        tangent_in_place(
            model,
            &self.x,
            &mut self.v,
            gamma,
            alpha,
            dt,
            &self.db,
            &mut self.jvp,
            &mut self.dgamma,
        );
        model.drift(&self.x, gamma, &mut self.drift);
        for ((xi, &fi), &bi) in self.x.iter_mut().zip(&self.drift).zip(&self.db) {
            *xi = *xi + fi * dt + sigma * bi;
        }

        self.step += 1;
        Ok(Advance {
            kernel_increment: kernel,
            overflowed: is_overflowed(&self.x, &self.v),
        })
    }
}

/// Per-path output of the finite-horizon loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathAccumulators<S> {
    /// `Φ(x_N)`.
    pub phi: S,
    /// `dΦ(x_N) · v_N`.
    pub s1: S,
    /// `Σ_{n<N} I_n`.
    pub s2: S,
    /// Step at which the path overflowed, if it did. The scalar fields are
    /// NaN in that case.
    pub overflow_step: Option<usize>,
}

impl<S: Scalar> PathAccumulators<S> {
    pub fn overflowed(&self) -> bool {
        self.overflow_step.is_some()
    }
}

/// Runs one path of the finite-horizon algorithm for `steps` steps.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    gamma: S,
    dt: S,
    steps: usize,
    stream: &mut RngStream,
) -> Result<PathAccumulators<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    check_dt(dt)?;
    if steps == 0 {
        return Err(Error::InvalidConfig("need at least one step".into()));
    }
    schedule.check_run(Some((steps, dt)))?;
    run_path(model, observable, schedule, gamma, dt, steps, stream)
}

/// [`simulate_path`] without the per-run argument checks.
pub(crate) fn run_path<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    gamma: S,
    dt: S,
    steps: usize,
    stream: &mut RngStream,
) -> Result<PathAccumulators<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    let mut path = PathState::new(model, gamma);
    let mut s2 = S::zero();
    for n in 0..steps {
        let adv = path.advance(model, schedule, gamma, dt, Some(steps), stream)?;
        s2 = s2 + adv.kernel_increment;
        if adv.overflowed {
            return Ok(PathAccumulators {
                phi: S::nan(),
                s1: S::nan(),
                s2: S::nan(),
                overflow_step: Some(n),
            });
        }
    }
    Ok(PathAccumulators {
        phi: observable.value(path.x()),
        s1: observable.directional(path.x(), path.v()),
        s2,
        overflow_step: None,
    })
}

/// `Φ(x_N)` of a state-only path, or `None` if it overflowed.
pub fn simulate_observable<S, M, O>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    steps: usize,
    stream: &mut RngStream,
) -> Result<Option<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    check_dt(dt)?;
    let mut path = PathState::new(model, gamma);
    for _ in 0..steps {
        if path.advance_state(model, gamma, dt, stream)? {
            return Ok(None);
        }
    }
    Ok(Some(observable.value(path.x())))
}

/// Records `(t, x_t)` every `every` steps of a state-only path, including
/// `t = 0`.
pub fn trace_path<S, M>(
    model: &M,
    gamma: S,
    dt: S,
    steps: usize,
    every: usize,
    stream: &mut RngStream,
) -> Result<Vec<(S, State<S>)>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
{
    check_dt(dt)?;
    let every = every.max(1);
    let mut path = PathState::new(model, gamma);
    let mut out = vec![(S::zero(), State(path.x().to_vec()))];
    for n in 1..=steps {
        if path.advance_state(model, gamma, dt, stream)? {
            break;
        }
        if n % every == 0 {
            out.push((S::of(n as f64) * dt, State(path.x().to_vec())));
        }
    }
    Ok(out)
}
