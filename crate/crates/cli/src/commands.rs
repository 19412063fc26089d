//! Subcommand implementations.

use anyhow::{ensure, Result};
use log::info;
use pathkernel::estimator::{estimate_ergodic, estimate_ergodic_replicated, estimate_finite_time};
use pathkernel::integrator::trace_path;
use pathkernel::observables::observable_by_name;
use pathkernel::oracle::{
    fd_derivative_ergodic, fd_derivative_finite_time, top_lyapunov, Coupling, FdOracleConfig,
    LyapunovConfig,
};
use pathkernel::registry::{ModelRegistry, ModelSpec};
use pathkernel::schedule::parse_schedule;
use pathkernel::stats::CompensatedSum;
use pathkernel::{
    ErgodicConfig, FiniteTimeConfig, Observable, OverflowPolicy, PathState, RngStream, Schedule,
    SdeModel,
};
use serde_json::{json, Value};

use crate::config::{Command, Mode, Overflow, RunConfig};
use crate::output::{write_lyapunov, write_meta, write_trace, Row, TableWriter};

/// Everything resolved by name, built before any compute so that unknown
/// names fail early.
struct Setup {
    model: Box<dyn SdeModel<f64>>,
    observable: Box<dyn Observable<f64>>,
    schedule: Box<dyn Schedule<f64>>,
    noiseless: Option<Box<dyn SdeModel<f64>>>,
}

impl Setup {
    fn build(cfg: &RunConfig) -> Result<Self> {
        let registry = ModelRegistry::<f64>::with_builtins();
        let model = registry.build(&cfg.model)?;
        let observable = observable_by_name(&cfg.observable)?;
        let schedule = parse_schedule(&cfg.schedule, cfg.finite_horizon())?;
        let noiseless = if cfg.deterministic {
            ensure!(
                cfg.spinup >= 1,
                "the deterministic column needs a spin-up --mpre"
            );
            let spec = ModelSpec {
                sigma0: Some(0.0),
                ..cfg.model.clone()
            };
            Some(registry.build(&spec)?)
        } else {
            None
        };
        Ok(Self {
            model,
            observable,
            schedule,
            noiseless,
        })
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<()> {
    let setup = Setup::build(cfg)?;
    let kind = if cmd == Command::Oracle {
        "oracle"
    } else {
        "path-kernel"
    };
    let mut results = Vec::new();
    let outcome = match cmd {
        Command::Run => run(cfg, &setup, &mut results),
        Command::Sweep => sweep(cfg, &setup, &mut results),
        Command::Oracle => oracle(cfg, &setup, &mut results),
        Command::Lyapunov => lyapunov(cfg, &setup, &mut results),
    };
    let kind = if cmd == Command::Lyapunov {
        "lyapunov"
    } else {
        kind
    };
    let error = outcome.as_ref().err().map(|e| format!("{e:#}"));
    write_meta(&cfg.out, kind, cfg, Value::Array(results), error)?;
    outcome
}

fn run(cfg: &RunConfig, setup: &Setup, results: &mut Vec<Value>) -> Result<()> {
    let mut table = TableWriter::create(&cfg.out, false)?;
    let (row, est) = estimate_row(cfg, setup, cfg.gamma)?;
    table.write(&row)?;
    results.push(est);
    if let Some(path) = &cfg.trace {
        let mut stream = RngStream::new(cfg.seed, 0);
        let trace = trace_path(
            setup.model.as_ref(),
            cfg.gamma,
            cfg.dt,
            cfg.steps,
            cfg.trace_every,
            &mut stream,
        )?;
        write_trace(path, &trace)?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, setup: &Setup, results: &mut Vec<Value>) -> Result<()> {
    let mut table = TableWriter::create(&cfg.out, cfg.deterministic)?;
    for &gamma in &cfg.grid {
        info!("sweep point gamma = {gamma}");
        let (mut row, est) = estimate_row(cfg, setup, gamma)?;
        if let Some(noiseless) = &setup.noiseless {
            row.deterministic = Some(deterministic_average(
                cfg,
                setup.model.as_ref(),
                noiseless.as_ref(),
                setup.observable.as_ref(),
                gamma,
            )?);
        }
        table.write(&row)?;
        results.push(est);
    }
    Ok(())
}

fn estimate_row(cfg: &RunConfig, setup: &Setup, gamma: f64) -> Result<(Row, Value)> {
    let (model, obs, sched) = (
        setup.model.as_ref(),
        setup.observable.as_ref(),
        setup.schedule.as_ref(),
    );
    match cfg.mode {
        Mode::Finite => {
            let mut fc = FiniteTimeConfig::new(gamma, cfg.dt, cfg.steps, cfg.paths, cfg.seed);
            fc.workers = cfg.workers;
            fc.overflow = match cfg.overflow {
                Overflow::Abort => OverflowPolicy::Abort,
                Overflow::Tolerate => OverflowPolicy::Tolerate,
            };
            let r = estimate_finite_time(model, obs, sched, &fc)?;
            let row = Row {
                gamma,
                phi_avg: r.phi.mean,
                se_phi: r.phi.std_error,
                dphi: r.derivative.value,
                se_dphi: r.derivative.std_error,
                n_samples: r.derivative.n_samples,
                overflow_count: r.overflow_count,
                deterministic: None,
            };
            Ok((
                row,
                json!({ "estimate": r.derivative, "phi": r.phi, "first_overflow_step": r.first_overflow_step }),
            ))
        }
        Mode::Ergodic => {
            let ec = ergodic_config(cfg, gamma);
            if cfg.replicates > 1 {
                let r = estimate_ergodic_replicated(
                    model,
                    obs,
                    sched,
                    &ec,
                    cfg.replicates,
                    cfg.workers,
                )?;
                let row = Row {
                    gamma,
                    phi_avg: r.phi.mean,
                    se_phi: r.phi.std_error,
                    dphi: r.derivative.value,
                    se_dphi: r.derivative.std_error,
                    n_samples: r.derivative.n_samples,
                    overflow_count: 0,
                    deterministic: None,
                };
                Ok((row, json!({ "estimate": r.derivative, "phi": r.phi })))
            } else {
                let r = estimate_ergodic(model, obs, sched, &ec)?;
                let row = Row {
                    gamma,
                    phi_avg: r.phi.mean,
                    se_phi: r.phi.std_error,
                    dphi: r.derivative.value,
                    se_dphi: r.derivative.std_error,
                    n_samples: r.derivative.n_samples,
                    overflow_count: 0,
                    deterministic: None,
                };
                Ok((
                    row,
                    json!({ "estimate": r.derivative, "phi": r.phi, "batches": r.batches, "max_tangent_norm": r.max_tangent_norm }),
                ))
            }
        }
    }
}

fn ergodic_config(cfg: &RunConfig, gamma: f64) -> ErgodicConfig<f64> {
    let window = cfg.window.unwrap_or(1);
    let mut ec = ErgodicConfig::new(gamma, cfg.dt, cfg.steps, window, cfg.spinup, cfg.seed);
    ec.batch_length = cfg.batch;
    ec
}

/// Time average of the observable without noise. The noiseless orbit starts
/// from the state reached by the noisy orbit after spin-up, since the
/// symmetric initial state is invariant under the noiseless flow.
fn deterministic_average(
    cfg: &RunConfig,
    noisy: &dyn SdeModel<f64>,
    noiseless: &dyn SdeModel<f64>,
    obs: &dyn Observable<f64>,
    gamma: f64,
) -> Result<f64> {
    let mut stream = RngStream::new(cfg.seed, 0);
    let mut path = PathState::new(noisy, gamma);
    for _ in 0..cfg.spinup {
        path.advance_state(noisy, gamma, cfg.dt, &mut stream)?;
    }
    let mut path = PathState::from_parts(path.x().to_vec(), vec![0.0; noisy.dim()]);
    for _ in 0..cfg.spinup {
        path.advance_state(noiseless, gamma, cfg.dt, &mut stream)?;
    }
    let mut acc = CompensatedSum::new();
    for n in 0..cfg.steps {
        acc.add(obs.value(path.x()));
        if n + 1 < cfg.steps && path.advance_state(noiseless, gamma, cfg.dt, &mut stream)? {
            anyhow::bail!("noiseless orbit overflowed at step {n}");
        }
    }
    Ok(acc.total() / cfg.steps as f64)
}

fn oracle(cfg: &RunConfig, setup: &Setup, results: &mut Vec<Value>) -> Result<()> {
    let mut table = TableWriter::create(&cfg.out, false)?;
    let (model, obs) = (setup.model.as_ref(), setup.observable.as_ref());
    let r = match cfg.mode {
        Mode::Finite => {
            let fd = FdOracleConfig {
                h: cfg.h,
                coupling: Coupling::CommonSeed,
                replications: 1,
            };
            fd_derivative_finite_time(
                model,
                obs,
                cfg.gamma,
                cfg.dt,
                cfg.steps,
                cfg.paths,
                cfg.seed,
                &fd,
                cfg.workers,
            )?
        }
        Mode::Ergodic => {
            let fd = FdOracleConfig {
                h: cfg.h,
                coupling: Coupling::Independent,
                replications: cfg.replicates,
            };
            fd_derivative_ergodic(
                model,
                obs,
                cfg.gamma,
                cfg.dt,
                cfg.steps,
                cfg.spinup,
                cfg.seed,
                &fd,
                cfg.workers,
            )?
        }
    };
    // the oracle never evaluates at gamma itself; report the midpoint
    let phi_avg = 0.5 * (r.phi_plus.mean + r.phi_minus.mean);
    let se_phi = 0.5 * (r.phi_plus.std_error.powi(2) + r.phi_minus.std_error.powi(2)).sqrt();
    table.write(&Row {
        gamma: cfg.gamma,
        phi_avg,
        se_phi,
        dphi: r.derivative.value,
        se_dphi: r.derivative.std_error,
        n_samples: r.derivative.n_samples,
        overflow_count: 0,
        deterministic: None,
    })?;
    results.push(serde_json::to_value(&r)?);
    Ok(())
}

fn lyapunov(cfg: &RunConfig, setup: &Setup, results: &mut Vec<Value>) -> Result<()> {
    let lc = LyapunovConfig {
        dt: cfg.dt,
        steps: cfg.steps,
        spinup: cfg.spinup,
        renorm_interval: cfg.renorm,
        seed: cfg.seed,
        path_index: 0,
    };
    let r = top_lyapunov(setup.model.as_ref(), cfg.gamma, &lc)?;
    write_lyapunov(&cfg.out, &r.trace)?;
    results.push(json!({ "lambda": r.lambda, "renormalizations": r.trace.len() }));
    Ok(())
}
