//! Independent references for the path-kernel estimators.
//!
//! Nothing here goes through the damped tangent recursion: the
//! finite-difference oracles only integrate states, the undamped reference
//! propagates `u` with its own loop, and the analytic values are closed forms.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{
    with_workers, ErrorMethod, EstimateKind, Horizon, RunEcho, SensitivityEstimate,
};
use crate::integrator::{simulate_observable, PathState};
use crate::model::{Observable, SdeModel};
use crate::models::ParamFlavor;
use crate::rng::{RngStream, INDEPENDENT_PATH_OFFSET};
use crate::scalar::{dot, norm, Scalar};
use crate::stats::{summarize, CompensatedSum, Summary};

/// How the noise at `γ + h` and `γ − h` is coupled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Same path addresses on both sides.
    CommonSeed,
    /// Disjoint path addresses.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdOracleConfig {
    /// Central-difference step in `γ`.
    pub h: f64,
    pub coupling: Coupling,
    /// Replicate orbits for the ergodic oracle. Finite-horizon runs use their
    /// path count instead.
    pub replications: usize,
}

impl FdOracleConfig {
    pub const DEFAULT_H: f64 = 0.05;

    /// Common-seed coupling, for finite horizons.
    pub fn finite_default() -> Self {
        Self {
            h: Self::DEFAULT_H,
            coupling: Coupling::CommonSeed,
            replications: 1,
        }
    }

    /// Independent coupling over 8 replicate orbits.
    pub fn ergodic_default() -> Self {
        Self {
            h: Self::DEFAULT_H,
            coupling: Coupling::Independent,
            replications: 8,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "oracle step h must be positive, got {}",
                self.h
            )));
        }
        Ok(())
    }

    fn minus_path(&self, index: u64) -> u64 {
        match self.coupling {
            Coupling::CommonSeed => index,
            Coupling::Independent => INDEPENDENT_PATH_OFFSET + index,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport<S> {
    pub derivative: SensitivityEstimate<S>,
    /// `Φ` averages at `γ + h` and `γ − h`.
    pub phi_plus: Summary<S>,
    pub phi_minus: Summary<S>,
    pub h: f64,
    pub coupling: Coupling,
}

/// Central finite difference of `E[Φ(X_T)]` over `paths` paths.
#[allow(clippy::too_many_arguments)]
pub fn fd_derivative_finite_time<S, M, O>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    steps: usize,
    paths: usize,
    seed: u64,
    cfg: &FdOracleConfig,
    workers: Option<usize>,
) -> Result<OracleReport<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    cfg.validate()?;
    if paths < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 paths, got {paths}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("need at least one step".into()));
    }
    let h = S::of(cfg.h);
    let pairs: Vec<Result<(Option<S>, Option<S>)>> = with_workers(workers, || {
        (0..paths as u64)
            .into_par_iter()
            .map(|l| {
                let mut plus = RngStream::new(seed, l);
                let mut minus = RngStream::new(seed, cfg.minus_path(l));
                Ok((
                    simulate_observable(model, observable, gamma + h, dt, steps, &mut plus)?,
                    simulate_observable(model, observable, gamma - h, dt, steps, &mut minus)?,
                ))
            })
            .collect()
    })?;

    let mut plus = Vec::with_capacity(paths);
    let mut minus = Vec::with_capacity(paths);
    for (l, pair) in pairs.into_iter().enumerate() {
        match pair? {
            (Some(p), Some(m)) => {
                plus.push(p);
                minus.push(m);
            }
            _ => {
                return Err(Error::Overflow {
                    schedule: "oracle".into(),
                    path: l as u64,
                    step: steps,
                })
            }
        }
    }
    let diffs: Vec<S> = plus
        .iter()
        .zip(&minus)
        .map(|(&p, &m)| (p - m) / (h + h))
        .collect();
    let d = summarize(&diffs)?;
    Ok(OracleReport {
        derivative: SensitivityEstimate {
            value: d.mean,
            std_error: d.std_error,
            n_samples: paths,
            kind: EstimateKind::Oracle,
            error_method: ErrorMethod::PerPath,
            config: oracle_echo(
                model,
                observable,
                gamma,
                dt,
                Horizon::Finite {
                    horizon: (S::of(steps as f64) * dt).to_f64_lossy(),
                    steps,
                },
                seed,
            ),
        },
        phi_plus: summarize(&plus)?,
        phi_minus: summarize(&minus)?,
        h: cfg.h,
        coupling: cfg.coupling,
    })
}

/// Time average of `Φ` over `steps` steps following `spinup` discarded
/// steps. Works for `σ = 0`. Returns `None` if the orbit overflowed.
pub fn observable_time_average<S, M, O>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    spinup: usize,
    steps: usize,
    stream: &mut RngStream,
) -> Result<Option<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "need at least one averaging step".into(),
        ));
    }
    let mut path = PathState::new(model, gamma);
    for _ in 0..spinup {
        if path.advance_state(model, gamma, dt, stream)? {
            return Ok(None);
        }
    }
    let mut acc = CompensatedSum::new();
    for n in 0..steps {
        acc.add(observable.value(path.x()));
        if n + 1 < steps && path.advance_state(model, gamma, dt, stream)? {
            return Ok(None);
        }
    }
    Ok(Some(acc.total() / S::of(steps as f64)))
}

/// Central finite difference of the long-time average of `Φ`, over
/// `cfg.replications` replicate orbit pairs.
#[allow(clippy::too_many_arguments)]
pub fn fd_derivative_ergodic<S, M, O>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    steps: usize,
    spinup: usize,
    seed: u64,
    cfg: &FdOracleConfig,
    workers: Option<usize>,
) -> Result<OracleReport<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    cfg.validate()?;
    if cfg.replications < 2 {
        return Err(Error::InvalidConfig(format!(
            "ergodic oracle needs at least 2 replications, got {}",
            cfg.replications
        )));
    }
    let h = S::of(cfg.h);
    // two orbits per replicate; flatten so both sides run concurrently
    let jobs: Vec<(u64, bool)> = (0..cfg.replications as u64)
        .flat_map(|r| [(r, true), (r, false)])
        .collect();
    let averages: Vec<Result<Option<S>>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(r, up)| {
                let (g, index) = if up {
                    (gamma + h, r)
                } else {
                    (gamma - h, cfg.minus_path(r))
                };
                let mut stream = RngStream::new(seed, index);
                observable_time_average(model, observable, g, dt, spinup, steps, &mut stream)
            })
            .collect()
    })?;
    let mut plus = Vec::with_capacity(cfg.replications);
    let mut minus = Vec::with_capacity(cfg.replications);
    for (k, avg) in averages.into_iter().enumerate() {
        let Some(a) = avg? else {
            return Err(Error::Overflow {
                schedule: "oracle".into(),
                path: jobs[k].0,
                step: spinup + steps,
            });
        };
        if jobs[k].1 {
            plus.push(a);
        } else {
            minus.push(a);
        }
    }
    let diffs: Vec<S> = plus
        .iter()
        .zip(&minus)
        .map(|(&p, &m)| (p - m) / (h + h))
        .collect();
    let d = summarize(&diffs)?;
    Ok(OracleReport {
        derivative: SensitivityEstimate {
            value: d.mean,
            std_error: d.std_error,
            n_samples: cfg.replications,
            kind: EstimateKind::Oracle,
            error_method: ErrorMethod::Replicates,
            config: oracle_echo(
                model,
                observable,
                gamma,
                dt,
                Horizon::Ergodic {
                    horizon: (S::of(steps as f64) * dt).to_f64_lossy(),
                    steps,
                    window: 0,
                    spinup,
                    batch_length: 0,
                },
                seed,
            ),
        },
        phi_plus: summarize(&plus)?,
        phi_minus: summarize(&minus)?,
        h: cfg.h,
        coupling: cfg.coupling,
    })
}

fn oracle_echo<S: Scalar, M: SdeModel<S> + ?Sized, O: Observable<S> + ?Sized>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    horizon: Horizon,
    seed: u64,
) -> RunEcho {
    RunEcho {
        model: model.name().into(),
        model_config: model.describe(),
        param_id: model.param_id().into(),
        observable: observable.name().into(),
        gamma: gamma.to_f64_lossy(),
        dt: dt.to_f64_lossy(),
        horizon,
        schedule: "oracle".into(),
        seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovConfig<S> {
    pub dt: S,
    /// Averaging length in steps, after spin-up.
    pub steps: usize,
    pub spinup: usize,
    /// Steps between renormalizations of the tangent.
    pub renorm_interval: usize,
    pub seed: u64,
    pub path_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovReport<S> {
    /// Time-averaged log growth rate of the homogeneous tangent.
    pub lambda: S,
    /// `(t, running estimate)` at each renormalization.
    pub trace: Vec<(S, S)>,
}

/// Top Lyapunov exponent of `du = ∇_u F dt + (dσ·u) dB` along an orbit,
/// via single-vector renormalization.
pub fn top_lyapunov<S, M>(model: &M, gamma: S, cfg: &LyapunovConfig<S>) -> Result<LyapunovReport<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
{
    if !(cfg.dt > S::zero()) || cfg.steps == 0 || cfg.renorm_interval == 0 {
        return Err(Error::InvalidConfig(
            "lyapunov needs dt > 0, steps > 0 and renorm_interval > 0".into(),
        ));
    }
    let m = model.dim();
    let mut stream = RngStream::new(cfg.seed, cfg.path_index);
    let mut u = vec![S::zero(); m];
    stream.standard_normals(&mut u)?;
    let r0 = norm(&u);
    u.iter_mut().for_each(|c| *c = *c / r0);

    let mut path = PathState::new(model, gamma);
    for _ in 0..cfg.spinup {
        path.advance_state(model, gamma, cfg.dt, &mut stream)?;
    }
    let mut x = path.x().to_vec();
    let mut db = vec![S::zero(); m];
    let mut drift = vec![S::zero(); m];
    let mut jvp = vec![S::zero(); m];
    let mut log_growth = CompensatedSum::new();
    let mut trace = Vec::with_capacity(cfg.steps / cfg.renorm_interval + 1);

    for n in 1..=cfg.steps {
        stream.gaussian_increment(cfg.dt, &mut db)?;
        model.drift(&x, gamma, &mut drift);
        model.drift_jvp(&x, gamma, &u, &mut jvp);
        let sigma = model.diffusion(&x, gamma);
        let dsig = model.diffusion_grad_dot(&x, gamma, &u);
        for i in 0..m {
            u[i] = u[i] + jvp[i] * cfg.dt + dsig * db[i];
            x[i] = x[i] + drift[i] * cfg.dt + sigma * db[i];
        }
        if n % cfg.renorm_interval == 0 || n == cfg.steps {
            let r = norm(&u);
            if !r.is_finite() || x.iter().any(|c| !c.is_finite()) {
                return Err(Error::Overflow {
                    schedule: "lyapunov".into(),
                    path: cfg.path_index,
                    step: n,
                });
            }
            if r <= S::min_positive_value() {
                return Err(Error::TangentCollapsed { step: n });
            }
            log_growth.add(r.ln());
            u.iter_mut().for_each(|c| *c = *c / r);
            let t = S::of(n as f64) * cfg.dt;
            trace.push((t, log_growth.total() / t));
        }
    }
    let lambda = log_growth.total() / (S::of(cfg.steps as f64) * cfg.dt);
    Ok(LyapunovReport { lambda, trace })
}

/// Per-path quantities along the undamped tangent `u`
/// (`α ≡ 0`, same increments as the estimator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UndampedPath<S> {
    /// `Φ(x_N)`.
    pub phi: S,
    /// `dΦ(x_N) · u_N`, the pure path-perturbation summand.
    pub pathwise: S,
    /// `(1/T) Σ_n (u_n · ΔB_n) / σ(x_n)`, the Bismut–Elworthy–Li weight.
    pub bel_weight: S,
}

/// Integrates `x` and the undamped tangent
/// `u_{n+1} = u_n + (∇_u F + ∂_γF) Δt + (dσ·u + ∂_γσ) ΔB_n`, `u_0 = v_0`,
/// for paths `0..paths` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn undamped_reference_paths<S, M, O>(
    model: &M,
    observable: &O,
    gamma: S,
    dt: S,
    steps: usize,
    paths: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<UndampedPath<S>>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
{
    if steps == 0 || !(dt > S::zero()) {
        return Err(Error::InvalidConfig("need steps > 0 and dt > 0".into()));
    }
    let m = model.dim();
    let horizon = S::of(steps as f64) * dt;
    let out: Vec<Result<UndampedPath<S>>> = with_workers(workers, || {
        (0..paths as u64)
            .into_par_iter()
            .map(|l| {
                let mut stream = RngStream::new(seed, l);
                let mut x = vec![S::zero(); m];
                let mut u = vec![S::zero(); m];
                model.initial_state(gamma, &mut x);
                model.initial_tangent(&mut u);
                let (mut db, mut f, mut ju, mut fg) = (
                    vec![S::zero(); m],
                    vec![S::zero(); m],
                    vec![S::zero(); m],
                    vec![S::zero(); m],
                );
                let mut weight = S::zero();
                for n in 0..steps {
                    stream.gaussian_increment(dt, &mut db)?;
                    let sigma = model.diffusion(&x, gamma);
                    if !(sigma > S::zero()) {
                        return Err(Error::DegenerateDiffusion {
                            step: n,
                            value: sigma.to_f64_lossy(),
                        });
                    }
                    weight = weight + dot(&u, &db) / sigma;
                    model.drift(&x, gamma, &mut f);
                    model.drift_jvp(&x, gamma, &u, &mut ju);
                    model.drift_dgamma(&x, gamma, &mut fg);
                    let noise =
                        model.diffusion_grad_dot(&x, gamma, &u) + model.diffusion_dgamma(&x, gamma);
                    for i in 0..m {
                        u[i] = u[i] + (ju[i] + fg[i]) * dt + noise * db[i];
                        x[i] = x[i] + f[i] * dt + sigma * db[i];
                    }
                }
                Ok(UndampedPath {
                    phi: observable.value(&x),
                    pathwise: observable.directional(&x, &u),
                    bel_weight: weight / horizon,
                })
            })
            .collect()
    })?;
    out.into_iter().collect()
}

/// Centralized Bismut–Elworthy–Li estimate `mean((Φ − Φ̄) W)` from
/// [`undamped_reference_paths`].
pub fn bel_estimate<S: Scalar>(paths: &[UndampedPath<S>]) -> Result<Summary<S>> {
    let phis: Vec<S> = paths.iter().map(|p| p.phi).collect();
    let avg = summarize(&phis)?.mean;
    let terms: Vec<S> = paths.iter().map(|p| (p.phi - avg) * p.bel_weight).collect();
    summarize(&terms)
}

/// A closed-form derivative request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticQuery<'a> {
    pub model: &'a str,
    /// `x` or `x2`, on the first coordinate.
    pub observable: &'a str,
    pub flavor: ParamFlavor,
    /// Finite horizon `T`, or `None` for the stationary average.
    pub horizon: Option<f64>,
    pub gamma: f64,
    /// OU mean-reversion rate.
    pub rate: f64,
    /// OU base noise.
    pub sigma: f64,
    /// OU starting point at `γ = 0`.
    pub x0: f64,
}

impl<'a> AnalyticQuery<'a> {
    pub fn new(
        model: &'a str,
        observable: &'a str,
        flavor: ParamFlavor,
        horizon: Option<f64>,
    ) -> Self {
        Self {
            model,
            observable,
            flavor,
            horizon,
            gamma: 0.0,
            rate: 1.0,
            sigma: 1.0,
            x0: 0.0,
        }
    }
}

/// Continuous-time closed-form `δE[Φ]`, or `None` when no closed form is
/// known for the combination.
pub fn analytic_reference(q: &AnalyticQuery<'_>) -> Option<f64> {
    use ParamFlavor::*;
    let g = q.gamma;
    match (q.model, q.observable, q.horizon) {
        // X_T = x_0 + drift T + (scale) B_T
        ("gauss", obs, Some(t)) => {
            let (mean, dmean, dvar) = match q.flavor {
                Diffusion => (0.0, 0.0, 2.0 * (1.0 + g) * t),
                Initial => (g, 1.0, 0.0),
                Drift => (g * t, t, 0.0),
            };
            moment_derivative(obs, mean, dmean, dvar)
        }
        ("ou", obs, Some(t)) => {
            let a = q.rate;
            let decay = (-a * t).exp();
            let shift = if q.flavor == Drift { g } else { 0.0 };
            let start = q.x0 + if q.flavor == Initial { g } else { 0.0 };
            let mean = start * decay + shift / a * (1.0 - decay);
            let (dmean, dvar) = match q.flavor {
                Drift => ((1.0 - decay) / a, 0.0),
                Initial => (decay, 0.0),
                Diffusion => (
                    0.0,
                    q.sigma * q.sigma * (1.0 + g) * (1.0 - decay * decay) / a,
                ),
            };
            moment_derivative(obs, mean, dmean, dvar)
        }
        ("ou", obs, None) => {
            let a = q.rate;
            let (mean, dmean, dvar) = match q.flavor {
                Drift => (g / a, 1.0 / a, 0.0),
                Initial => (0.0, 0.0, 0.0),
                Diffusion => (0.0, 0.0, q.sigma * q.sigma * (1.0 + g) / a),
            };
            moment_derivative(obs, mean, dmean, dvar)
        }
        _ => None,
    }
}

/// `δE[X]` or `δE[X²] = 2 m δm + δVar` for a Gaussian `X`.
fn moment_derivative(observable: &str, mean: f64, dmean: f64, dvar: f64) -> Option<f64> {
    match observable {
        "x" => Some(dmean),
        "x2" => Some(2.0 * mean * dmean + dvar),
        _ => None,
    }
}
