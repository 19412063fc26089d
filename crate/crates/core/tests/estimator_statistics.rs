use pathkernel::model::{validate_model, DerivativeCheck, ValidationOptions};
use pathkernel::observables::Shifted;
use pathkernel::oracle::{
    analytic_reference, fd_derivative_finite_time, top_lyapunov, undamped_reference_paths,
    AnalyticQuery, FdOracleConfig, LyapunovConfig,
};
use pathkernel::schedule::StateDependent;
use pathkernel::{
    estimate_finite_time, Constant, Coordinate, CoordinateMean, FiniteTimeConfig, Gauss,
    HistoryView, Lorenz96, OrnsteinUhlenbeck, ParamFlavor, PureKernel, SdeModel, SquaredCoordinate,
    State,
};

fn gauss_cfg(paths: usize, seed: u64) -> FiniteTimeConfig<f64> {
    FiniteTimeConfig::new(0.0, 0.01, 100, paths, seed)
}

#[test]
fn gauss_mean_is_insensitive_to_noise_scale() {
    let r = estimate_finite_time(
        &Gauss::scalar(),
        &Coordinate(0),
        &Constant::new(1.0).unwrap(),
        &gauss_cfg(20_000, 1),
    )
    .unwrap();
    let d = &r.derivative;
    assert!(
        d.value.abs() < 4.0 * d.std_error,
        "{} ± {}",
        d.value,
        d.std_error
    );
}

#[test]
fn gauss_second_moment_slope() {
    let r = estimate_finite_time(
        &Gauss::scalar(),
        &SquaredCoordinate(0),
        &Constant::new(1.0).unwrap(),
        &gauss_cfg(20_000, 2),
    )
    .unwrap();
    let d = &r.derivative;
    assert!(
        (d.value - 2.0).abs() < 4.0 * d.std_error,
        "{} ± {}",
        d.value,
        d.std_error
    );
}

#[test]
fn ou_drift_shift_finite_horizon() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
    let r = estimate_finite_time(
        &ou,
        &Coordinate(0),
        &Constant::new(1.0).unwrap(),
        &gauss_cfg(20_000, 3),
    )
    .unwrap();
    let exact = analytic_reference(&AnalyticQuery::new(
        "ou",
        "x",
        ParamFlavor::Drift,
        Some(1.0),
    ))
    .unwrap();
    let d = &r.derivative;
    // Euler bias at dt = 0.01 is about 2e-3
    assert!(
        (d.value - exact).abs() < 4.0 * d.std_error + 0.01,
        "{} vs {exact}",
        d.value
    );
}

#[test]
fn state_dependent_rule_on_ou() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Diffusion);
    let rule = StateDependent::new("1+|x|", |v: &HistoryView<'_, f64>| 1.0 + v.state()[0].abs());
    let r = estimate_finite_time(&ou, &SquaredCoordinate(0), &rule, &gauss_cfg(20_000, 4)).unwrap();
    let exact = analytic_reference(&AnalyticQuery::new(
        "ou",
        "x2",
        ParamFlavor::Diffusion,
        Some(1.0),
    ))
    .unwrap();
    let d = &r.derivative;
    assert!(
        (d.value - exact).abs() < 4.0 * d.std_error + 0.02,
        "{} ± {} vs {exact}",
        d.value,
        d.std_error
    );
}

#[test]
fn centralization_makes_estimate_shift_invariant() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Diffusion);
    let s = Constant::new(2.0).unwrap();
    let cfg = gauss_cfg(2_000, 5);
    let a = estimate_finite_time(&ou, &SquaredCoordinate(0), &s, &cfg).unwrap();
    let shifted = Shifted {
        inner: SquaredCoordinate(0),
        offset: 100.0,
    };
    let b = estimate_finite_time(&ou, &shifted, &s, &cfg).unwrap();
    assert!((a.derivative.value - b.derivative.value).abs() < 1e-9);
    assert!((a.derivative.std_error - b.derivative.std_error).abs() < 1e-9);
}

#[test]
fn zero_schedule_reproduces_pathwise_derivative() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let cfg = FiniteTimeConfig::new(0.0, 0.002, 200, 64, 6);
    let r =
        estimate_finite_time(&l96, &CoordinateMean, &Constant::new(0.0).unwrap(), &cfg).unwrap();
    let reference =
        undamped_reference_paths(&l96, &CoordinateMean, 0.0, 0.002, 200, 64, 6, None).unwrap();
    let mean = reference.iter().map(|p| p.pathwise).sum::<f64>() / 64.0;
    assert!((r.derivative.value - mean).abs() < 1e-10 * (1.0 + mean.abs()));
}

#[test]
fn schedules_agree_on_gauss() {
    let g = Gauss::scalar();
    let cfg = gauss_cfg(20_000, 7);
    let a = estimate_finite_time(
        &g,
        &SquaredCoordinate(0),
        &Constant::new(0.0).unwrap(),
        &cfg,
    )
    .unwrap();
    let b = estimate_finite_time(&g, &SquaredCoordinate(0), &PureKernel, &cfg).unwrap();
    let (a, b) = (a.derivative, b.derivative);
    let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() < 4.0 * combined);
    assert!(b.std_error > a.std_error);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Diffusion);
    let s = Constant::new(10.0).unwrap();
    let mut cfg = FiniteTimeConfig::new(0.0, 0.002, 100, 48, 8);
    cfg.workers = Some(1);
    let a = estimate_finite_time(&l96, &CoordinateMean, &s, &cfg).unwrap();
    cfg.workers = Some(3);
    let b = estimate_finite_time(&l96, &CoordinateMean, &s, &cfg).unwrap();
    assert_eq!(a.derivative.value.to_bits(), b.derivative.value.to_bits());
    assert_eq!(
        a.derivative.std_error.to_bits(),
        b.derivative.std_error.to_bits()
    );
    assert_eq!(a, b);
}

#[test]
fn fd_oracle_converges_in_h() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Diffusion);
    let run = |h: f64| {
        let cfg = FdOracleConfig {
            h,
            ..FdOracleConfig::finite_default()
        };
        fd_derivative_finite_time(
            &ou,
            &SquaredCoordinate(0),
            0.0,
            0.01,
            100,
            5_000,
            9,
            &cfg,
            None,
        )
        .unwrap()
        .derivative
        .value
    };
    let (coarse, fine) = (run(0.1), run(0.05));
    // common-seed coupling: the difference is O(h^2) with tiny noise
    assert!((coarse - fine).abs() < 0.01, "{coarse} vs {fine}");
}

struct Linear(f64);

impl SdeModel<f64> for Linear {
    fn name(&self) -> &str {
        "linear"
    }
    fn param_id(&self) -> &str {
        "drift"
    }
    fn dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], _g: f64, out: &mut [f64]) {
        out.iter_mut().zip(x).for_each(|(o, &xi)| *o = self.0 * xi);
    }
    fn diffusion(&self, _x: &[f64], _g: f64) -> f64 {
        1.0
    }
    fn drift_jvp(&self, _x: &[f64], _g: f64, v: &[f64], out: &mut [f64]) {
        out.iter_mut().zip(v).for_each(|(o, &vi)| *o = self.0 * vi);
    }
    fn drift_dgamma(&self, _x: &[f64], _g: f64, out: &mut [f64]) {
        out.fill(0.0)
    }
    fn diffusion_grad_dot(&self, _x: &[f64], _g: f64, _v: &[f64]) -> f64 {
        0.0
    }
    fn diffusion_dgamma(&self, _x: &[f64], _g: f64) -> f64 {
        0.0
    }
    fn initial_state(&self, _g: f64, out: &mut [f64]) {
        out.fill(0.0)
    }
    fn initial_tangent(&self, out: &mut [f64]) {
        out.fill(0.0)
    }
}

fn lyap_cfg(renorm_interval: usize) -> LyapunovConfig<f64> {
    LyapunovConfig {
        dt: 0.01,
        steps: 2_000,
        spinup: 100,
        renorm_interval,
        seed: 10,
        path_index: 0,
    }
}

#[test]
fn lyapunov_of_linear_models() {
    let dt = 0.01f64;
    let grow = top_lyapunov(&Linear(0.5), 0.0, &lyap_cfg(1)).unwrap();
    assert!((grow.lambda - (1.0 + 0.5 * dt).ln() / dt).abs() < 1e-9);

    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
    let decay = top_lyapunov(&ou, 0.0, &lyap_cfg(1)).unwrap();
    assert!((decay.lambda - (1.0 - dt).ln() / dt).abs() < 1e-9);
    assert!((decay.lambda + 1.0).abs() < 0.01);
}

#[test]
fn lyapunov_is_independent_of_renormalization_interval() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
    let a = top_lyapunov(&ou, 0.0, &lyap_cfg(1)).unwrap();
    let b = top_lyapunov(&ou, 0.0, &lyap_cfg(10)).unwrap();
    assert!((a.lambda - b.lambda).abs() < 1e-9);

    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let cfg = |k| LyapunovConfig {
        dt: 0.002,
        steps: 5_000,
        spinup: 1_000,
        renorm_interval: k,
        seed: 11,
        path_index: 0,
    };
    let a = top_lyapunov(&l96, 0.0, &cfg(1)).unwrap();
    let b = top_lyapunov(&l96, 0.0, &cfg(5)).unwrap();
    assert!((a.lambda - b.lambda).abs() < 1e-6 * (1.0 + a.lambda.abs()));
}

struct BrokenJacobian(Lorenz96<f64>);

impl SdeModel<f64> for BrokenJacobian {
    fn name(&self) -> &str {
        "broken"
    }
    fn param_id(&self) -> &str {
        self.0.param_id()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn drift(&self, x: &[f64], g: f64, out: &mut [f64]) {
        self.0.drift(x, g, out)
    }
    fn diffusion(&self, x: &[f64], g: f64) -> f64 {
        self.0.diffusion(x, g)
    }
    fn drift_jvp(&self, _x: &[f64], _g: f64, _v: &[f64], out: &mut [f64]) {
        out.fill(0.0)
    }
    fn drift_dgamma(&self, x: &[f64], g: f64, out: &mut [f64]) {
        self.0.drift_dgamma(x, g, out)
    }
    fn diffusion_grad_dot(&self, x: &[f64], g: f64, v: &[f64]) -> f64 {
        self.0.diffusion_grad_dot(x, g, v)
    }
    fn diffusion_dgamma(&self, x: &[f64], g: f64) -> f64 {
        self.0.diffusion_dgamma(x, g)
    }
    fn initial_state(&self, g: f64, out: &mut [f64]) {
        self.0.initial_state(g, out)
    }
    fn initial_tangent(&self, out: &mut [f64]) {
        self.0.initial_tangent(out)
    }
}

#[test]
fn validation_catches_wrong_jacobian() {
    let probes: Vec<State<f64>> = (0..3)
        .map(|k| {
            State(
                (0..40)
                    .map(|i| ((i + 7 * k) as f64 * 0.41).sin() * 4.0)
                    .collect(),
            )
        })
        .collect();
    let good = Lorenz96::<f64>::standard(ParamFlavor::Diffusion);
    assert!(
        validate_model(&good, &probes, 0.0, ValidationOptions::default())
            .unwrap()
            .passed()
    );

    let report = validate_model(
        &BrokenJacobian(good),
        &probes,
        0.0,
        ValidationOptions::default(),
    )
    .unwrap();
    assert!(!report.passed());
    assert!(report
        .failures()
        .all(|e| e.check == DerivativeCheck::DriftJvp));
    assert_eq!(report.failures().count(), 3);
}

#[test]
fn single_precision_smoke() {
    let l96 = Lorenz96::<f32>::standard(ParamFlavor::Drift);
    let cfg = FiniteTimeConfig::new(0.0f32, 0.002, 200, 200, 12);
    let r = estimate_finite_time(
        &l96,
        &CoordinateMean,
        &Constant::new(10.0f32).unwrap(),
        &cfg,
    )
    .unwrap();
    assert!(r.derivative.value.is_finite() && r.derivative.std_error.is_finite());
    assert!(r.derivative.value > 0.0);
}
