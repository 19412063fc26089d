//! Path-kernel estimators of `δE[Φ]`.
//!
//! The finite-horizon estimator averages, over independent paths,
//!
//! ```text
//! S¹_l + (Φ_l − Φ̄) S²_l,   S¹_l = dΦ(x_N)·v_N,   S²_l = Σ_n I_n
//! ```
//!
//! The ergodic estimator follows one long orbit and pairs `dΦ(x_n)·v_n` and
//! `Φ_n − Φ̄` with the kernel weight of the window `I_{n−N_W} … I_{n−1}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{run_path, PathAccumulators, PathState};
use crate::model::{Observable, SdeModel};
use crate::rng::RngStream;
use crate::scalar::{norm, Scalar};
use crate::schedule::Schedule;
use crate::stats::{summarize, CompensatedSum, Summary};

/// What to do with paths whose tangent or state blows up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum OverflowPolicy {
    /// Fail the run, naming the first overflowing path.
    #[default]
    Abort,
    /// Drop overflowed paths and report how many there were.
    Tolerate,
}

/// Which estimator produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    PathKernel,
    Oracle,
}

/// How the standard error was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMethod {
    /// Sample standard deviation over independent paths.
    PerPath,
    /// Non-overlapping batch means along one orbit.
    BatchMeans,
    /// Spread of independent replicate runs.
    Replicates,
}

/// Time discretization of a run, echoed into output.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Horizon {
    Finite {
        horizon: f64,
        steps: usize,
    },
    Ergodic {
        horizon: f64,
        steps: usize,
        window: usize,
        spinup: usize,
        batch_length: usize,
    },
}

/// Configuration echo attached to every estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEcho {
    pub model: String,
    pub model_config: Vec<(String, String)>,
    pub param_id: String,
    pub observable: String,
    pub gamma: f64,
    pub dt: f64,
    pub horizon: Horizon,
    pub schedule: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensitivityEstimate<S> {
    pub value: S,
    pub std_error: S,
    /// Paths, time steps or replicates behind `value`.
    pub n_samples: usize,
    pub kind: EstimateKind,
    pub error_method: ErrorMethod,
    pub config: RunEcho,
}

fn echo<S: Scalar, M: SdeModel<S> + ?Sized, O: Observable<S> + ?Sized>(
    model: &M,
    observable: &O,
    schedule: String,
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
        schedule,
        seed,
    }
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("worker count must be positive".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteTimeConfig<S> {
    pub gamma: S,
    pub dt: S,
    /// `N`; the horizon is `N Δt`.
    pub steps: usize,
    /// `L`.
    pub paths: usize,
    pub seed: u64,
    /// Path indices used are `first_path .. first_path + paths`.
    pub first_path: u64,
    pub overflow: OverflowPolicy,
    /// `None` uses the global rayon pool. Results do not depend on it.
    pub workers: Option<usize>,
}

impl<S: Scalar> FiniteTimeConfig<S> {
    pub fn new(gamma: S, dt: S, steps: usize, paths: usize, seed: u64) -> Self {
        Self {
            gamma,
            dt,
            steps,
            paths,
            seed,
            first_path: 0,
            overflow: OverflowPolicy::Abort,
            workers: None,
        }
    }

    /// Step count for horizon `t`, rounded to the nearest integer.
    pub fn steps_for(horizon: S, dt: S) -> usize {
        (horizon / dt).round().to_usize().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("need at least one step".into()));
        }
        if self.paths < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 paths, got {}",
                self.paths
            )));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidConfig("gamma must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteTimeReport<S> {
    /// `δE[Φ(X_T)]`.
    pub derivative: SensitivityEstimate<S>,
    /// `E[Φ(X_T)]` over the same paths.
    pub phi: Summary<S>,
    pub overflow_count: usize,
    pub first_overflow_step: Option<usize>,
}

/// Runs every path of a finite-horizon configuration, in path order.
pub fn finite_time_paths<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    cfg: &FiniteTimeConfig<S>,
) -> Result<Vec<PathAccumulators<S>>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    cfg.validate()?;
    schedule.check_run(Some((cfg.steps, cfg.dt)))?;
    let results: Vec<Result<PathAccumulators<S>>> = with_workers(cfg.workers, || {
        (0..cfg.paths as u64)
            .into_par_iter()
            .map(|l| {
                let mut stream = RngStream::new(cfg.seed, cfg.first_path + l);
                run_path(
                    model,
                    observable,
                    schedule,
                    cfg.gamma,
                    cfg.dt,
                    cfg.steps,
                    &mut stream,
                )
            })
            .collect()
    })?;
    results.into_iter().collect()
}

/// Finite-horizon path-kernel estimate with in-sample centralization.
pub fn estimate_finite_time<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    cfg: &FiniteTimeConfig<S>,
) -> Result<FiniteTimeReport<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    let paths = finite_time_paths(model, observable, schedule, cfg)?;

    let mut first_overflow: Option<(u64, usize)> = None;
    let mut overflow_count = 0;
    for (l, p) in paths.iter().enumerate() {
        if let Some(step) = p.overflow_step {
            overflow_count += 1;
            let earliest = first_overflow.is_none_or(|(_, s)| step < s);
            if earliest {
                first_overflow = Some((cfg.first_path + l as u64, step));
            }
        }
    }
    if let Some((path, step)) = first_overflow {
        if overflow_count == paths.len() {
            return Err(Error::AllPathsOverflowed {
                schedule: schedule.label(),
                paths: paths.len(),
                first_step: step,
            });
        }
        if cfg.overflow == OverflowPolicy::Abort {
            return Err(Error::Overflow {
                schedule: schedule.label(),
                path,
                step,
            });
        }
    }

    let usable: Vec<&PathAccumulators<S>> = paths.iter().filter(|p| !p.overflowed()).collect();
    let phis: Vec<S> = usable.iter().map(|p| p.phi).collect();
    let phi = summarize(&phis)?;
    let summands: Vec<S> = usable
        .iter()
        .map(|p| p.s1 + (p.phi - phi.mean) * p.s2)
        .collect();
    let d = summarize(&summands)?;

    let horizon = Horizon::Finite {
        horizon: (S::of(cfg.steps as f64) * cfg.dt).to_f64_lossy(),
        steps: cfg.steps,
    };
    Ok(FiniteTimeReport {
        derivative: SensitivityEstimate {
            value: d.mean,
            std_error: d.std_error,
            n_samples: d.n,
            kind: EstimateKind::PathKernel,
            error_method: ErrorMethod::PerPath,
            config: echo(
                model,
                observable,
                schedule.label(),
                cfg.gamma,
                cfg.dt,
                horizon,
                cfg.seed,
            ),
        },
        phi,
        overflow_count,
        first_overflow_step: first_overflow.map(|(_, s)| s),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicConfig<S> {
    pub gamma: S,
    pub dt: S,
    /// `N`: averaged orbit length in steps.
    pub steps: usize,
    /// `N_W`: decorrelation window in steps.
    pub window: usize,
    /// `M_pre`: discarded spin-up steps.
    pub spinup: usize,
    pub seed: u64,
    pub path_index: u64,
    /// Batch length for batch-means errors; defaults to `10 N_W`.
    pub batch_length: Option<usize>,
}

impl<S: Scalar> ErgodicConfig<S> {
    pub fn new(gamma: S, dt: S, steps: usize, window: usize, spinup: usize, seed: u64) -> Self {
        Self {
            gamma,
            dt,
            steps,
            window,
            spinup,
            seed,
            path_index: 0,
            batch_length: None,
        }
    }

    pub fn batch_length(&self) -> usize {
        self.batch_length.unwrap_or(10 * self.window)
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig(
                "decorrelation window must be at least one step".into(),
            ));
        }
        if self.steps < self.window {
            return Err(Error::InvalidConfig(format!(
                "orbit length {} is shorter than the window {}",
                self.steps, self.window
            )));
        }
        let b = self.batch_length();
        if b == 0 || !self.steps.is_multiple_of(b) {
            return Err(Error::InvalidConfig(format!(
                "batch length {b} must divide the orbit length {}",
                self.steps
            )));
        }
        if self.steps / b < 2 {
            return Err(Error::InvalidConfig(format!(
                "batch length {b} leaves fewer than 2 batches"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicReport<S> {
    /// `δΦ^avg`.
    pub derivative: SensitivityEstimate<S>,
    /// `Φ^avg` with its batch-means error.
    pub phi: Summary<S>,
    /// Largest `|v_n|` seen after spin-up.
    pub max_tangent_norm: S,
    pub batches: usize,
}

#[derive(Clone, Copy, Default)]
struct BatchSums<S> {
    phi: S,
    s1: S,
    s2: S,
    phi_s2: S,
}

/// Ergodic path-kernel estimate along a single orbit.
///
/// Accumulates in one pass using
/// `Σ(Φ_n − Φ̄) S²_n = Σ Φ_n S²_n − Φ̄ Σ S²_n`, storing only the `N_W`-long
/// ring of kernel increments and per-batch sums. Overflow aborts the run.
pub fn estimate_ergodic<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    cfg: &ErgodicConfig<S>,
) -> Result<ErgodicReport<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    cfg.validate()?;
    schedule.check_run(None)?;

    let mut stream = RngStream::new(cfg.seed, cfg.path_index);
    let mut path = PathState::new(model, cfg.gamma);
    for n in 0..cfg.spinup {
        if path.advance_state(model, cfg.gamma, cfg.dt, &mut stream)? {
            return Err(Error::Overflow {
                schedule: "spin-up".into(),
                path: cfg.path_index,
                step: n,
            });
        }
    }
    path.reset_step();

    let nw = cfg.window;
    let batch_len = cfg.batch_length();
    let total = nw + cfg.steps;
    let mut ring = vec![S::zero(); nw];
    let mut window_sum = S::zero();
    let mut batches: Vec<BatchSums<S>> = Vec::with_capacity(cfg.steps / batch_len);
    let mut current = BatchSums::<S>::default();
    let mut max_norm = S::zero();

    for n in 0..total {
        if n >= nw {
            let x = path.x();
            let phi = observable.value(x);
            let s1 = observable.directional(x, path.v());
            let s2 = window_sum;
            current.phi = current.phi + phi;
            current.s1 = current.s1 + s1;
            current.s2 = current.s2 + s2;
            current.phi_s2 = current.phi_s2 + phi * s2;
            max_norm = max_norm.max(norm(path.v()));
            if (n - nw + 1).is_multiple_of(batch_len) {
                batches.push(std::mem::take(&mut current));
            }
        }
        if n + 1 == total {
            break;
        }

        let adv = path.advance(model, schedule, cfg.gamma, cfg.dt, None, &mut stream)?;
        if adv.overflowed {
            return Err(Error::Overflow {
                schedule: schedule.label(),
                path: cfg.path_index,
                step: n,
            });
        }
        let slot = n % nw;
        window_sum = window_sum - ring[slot] + adv.kernel_increment;
        ring[slot] = adv.kernel_increment;
        if slot == nw - 1 {
            // resynchronize the running window sum to bound rounding drift
            window_sum = ring.iter().copied().collect::<CompensatedSum<S>>().total();
        }
    }

    let n_steps = S::of(cfg.steps as f64);
    let total_of =
        |f: fn(&BatchSums<S>) -> S| batches.iter().map(f).collect::<CompensatedSum<S>>().total();
    let phi_avg = total_of(|b| b.phi) / n_steps;
    let s1_sum = total_of(|b| b.s1);
    let s2_sum = total_of(|b| b.s2);
    let phi_s2_sum = total_of(|b| b.phi_s2);
    let value = (s1_sum + phi_s2_sum - phi_avg * s2_sum) / n_steps;

    let b_len = S::of(batch_len as f64);
    let batch_values: Vec<S> = batches
        .iter()
        .map(|b| (b.s1 + b.phi_s2 - phi_avg * b.s2) / b_len)
        .collect();
    let batch_phis: Vec<S> = batches.iter().map(|b| b.phi / b_len).collect();
    let d = summarize(&batch_values)?;
    let mut phi = summarize(&batch_phis)?;
    phi.mean = phi_avg;

    let horizon = Horizon::Ergodic {
        horizon: (n_steps * cfg.dt).to_f64_lossy(),
        steps: cfg.steps,
        window: nw,
        spinup: cfg.spinup,
        batch_length: batch_len,
    };
    Ok(ErgodicReport {
        derivative: SensitivityEstimate {
            value,
            std_error: d.std_error,
            n_samples: cfg.steps,
            kind: EstimateKind::PathKernel,
            error_method: ErrorMethod::BatchMeans,
            config: echo(
                model,
                observable,
                schedule.label(),
                cfg.gamma,
                cfg.dt,
                horizon,
                cfg.seed,
            ),
        },
        phi,
        max_tangent_norm: max_norm,
        batches: batches.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicatedErgodic<S> {
    /// Mean over replicates, with the replicate spread as error.
    pub derivative: SensitivityEstimate<S>,
    pub phi: Summary<S>,
    pub replicates: Vec<ErgodicReport<S>>,
}

/// Runs `replicates` independent orbits (path indices
/// `cfg.path_index ..`) concurrently and combines them.
pub fn estimate_ergodic_replicated<S, M, O, Sch>(
    model: &M,
    observable: &O,
    schedule: &Sch,
    cfg: &ErgodicConfig<S>,
    replicates: usize,
    workers: Option<usize>,
) -> Result<ReplicatedErgodic<S>>
where
    S: Scalar,
    M: SdeModel<S> + ?Sized,
    O: Observable<S> + ?Sized,
    Sch: Schedule<S> + ?Sized,
{
    if replicates < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    cfg.validate()?;
    let runs: Vec<Result<ErgodicReport<S>>> = with_workers(workers, || {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut c = cfg.clone();
                c.path_index = cfg.path_index + r;
                estimate_ergodic(model, observable, schedule, &c)
            })
            .collect()
    })?;
    let runs: Vec<ErgodicReport<S>> = runs.into_iter().collect::<Result<_>>()?;
    let values: Vec<S> = runs.iter().map(|r| r.derivative.value).collect();
    let phis: Vec<S> = runs.iter().map(|r| r.phi.mean).collect();
    let d = summarize(&values)?;
    let phi = summarize(&phis)?;
    let mut derivative = runs[0].derivative.clone();
    derivative.value = d.mean;
    derivative.std_error = d.std_error;
    derivative.n_samples = replicates;
    derivative.error_method = ErrorMethod::Replicates;
    Ok(ReplicatedErgodic {
        derivative,
        phi,
        replicates: runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Gauss, OrnsteinUhlenbeck, ParamFlavor};
    use crate::observables::{Coordinate, SquaredCoordinate};
    use crate::schedule::{Bel, Constant};

    #[test]
    fn rejects_bad_finite_configs() {
        let m = Gauss::scalar();
        let s = Constant::new(0.0).unwrap();
        let mut cfg = FiniteTimeConfig::new(0.0, 0.01, 10, 1, 0);
        assert!(estimate_finite_time(&m, &Coordinate(0), &s, &cfg).is_err());
        cfg.paths = 4;
        cfg.steps = 0;
        assert!(estimate_finite_time(&m, &Coordinate(0), &s, &cfg).is_err());
        cfg.steps = 10;
        cfg.dt = 0.0;
        assert!(estimate_finite_time(&m, &Coordinate(0), &s, &cfg).is_err());
    }

    #[test]
    fn rejects_bad_ergodic_configs() {
        let m = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
        let s = Constant::new(1.0).unwrap();
        let mut cfg = ErgodicConfig::new(0.0, 0.01, 1000, 0, 0, 1);
        assert!(estimate_ergodic(&m, &Coordinate(0), &s, &cfg).is_err());
        cfg.window = 10;
        cfg.batch_length = Some(300);
        assert!(estimate_ergodic(&m, &Coordinate(0), &s, &cfg).is_err());
        cfg.batch_length = Some(1000);
        assert!(estimate_ergodic(&m, &Coordinate(0), &s, &cfg).is_err());
        cfg.batch_length = Some(100);
        assert!(estimate_ergodic(&m, &Coordinate(0), &s, &cfg).is_ok());
    }

    #[test]
    fn bel_rejected_for_ergodic() {
        let m = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Initial);
        let s = Bel::new(1.0).unwrap();
        let cfg = ErgodicConfig::new(0.0, 0.01, 1000, 10, 0, 1);
        assert_eq!(
            estimate_ergodic(&m, &Coordinate(0), &s, &cfg).unwrap_err(),
            Error::FiniteHorizonOnly("bel".into())
        );
    }

    #[test]
    fn degenerate_diffusion_is_rejected() {
        let m = crate::models::Lorenz96::<f64>::new(8, 0.0, ParamFlavor::Drift).unwrap();
        let s = Constant::new(10.0).unwrap();
        let cfg = FiniteTimeConfig::new(0.0, 0.01, 10, 4, 0);
        let err =
            estimate_finite_time(&m, &crate::observables::CoordinateMean, &s, &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateDiffusion { step: 0, .. }));
    }

    #[test]
    fn ergodic_single_pass_matches_two_pass() {
        // recompute the ergodic estimate from stored per-step quantities
        let m = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Diffusion);
        let obs = SquaredCoordinate(0);
        let s = Constant::new(2.0).unwrap();
        let (nw, n, spin) = (7usize, 700usize, 13usize);
        let mut cfg = ErgodicConfig::new(0.0, 0.05, n, nw, spin, 99);
        cfg.batch_length = Some(70);
        let report = estimate_ergodic(&m, &obs, &s, &cfg).unwrap();

        let mut stream = RngStream::new(99, 0);
        let mut path = PathState::new(&m, 0.0);
        for _ in 0..spin {
            path.advance_state(&m, 0.0, 0.05, &mut stream).unwrap();
        }
        path.reset_step();
        let (mut phis, mut s1s, mut incs) = (vec![], vec![], vec![]);
        for _ in 0..nw + n {
            phis.push(obs.value(path.x()));
            s1s.push(obs.directional(path.x(), path.v()));
            incs.push(
                path.advance(&m, &s, 0.0, 0.05, None, &mut stream)
                    .unwrap()
                    .kernel_increment,
            );
        }
        let phi_avg: f64 = phis[nw..].iter().sum::<f64>() / n as f64;
        let mut value = 0.0;
        for k in nw..nw + n {
            let s2: f64 = (0..nw).map(|m| incs[k + m - nw]).sum();
            value += s1s[k] + (phis[k] - phi_avg) * s2;
        }
        value /= n as f64;
        assert!((report.derivative.value - value).abs() < 1e-12 * (1.0 + value.abs()));
        assert!((report.phi.mean - phi_avg).abs() < 1e-12);
        assert_eq!(report.batches, 10);
    }
}
