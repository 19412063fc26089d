use pathkernel::integrator::{
    euler_step, kernel_increment, simulate_path, tangent_step, PathState, TANGENT_OVERFLOW,
};
use pathkernel::model::{initial_tangent, SdeModel};
use pathkernel::schedule::{Constant, PureKernel};
use pathkernel::{
    Coordinate, CoordinateMean, Gauss, Lorenz96, OrnsteinUhlenbeck, ParamFlavor, RngStream, State,
    TangentVector,
};

#[test]
fn euler_step_examples() {
    let g = Gauss::scalar();
    let x = euler_step::<f64, _>(&g, &State(vec![0.0]), 0.0, 0.01, &[0.3]).unwrap();
    assert_eq!(x.0, vec![0.3]);

    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let x = euler_step(&l96, &State::zeros(40), 0.0, 0.002, &[0.0; 40]).unwrap();
    assert!(x.iter().all(|&c| c == 0.016));

    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
    let x = euler_step(&ou, &State(vec![1.0]), 0.0, 0.1, &[0.0]).unwrap();
    assert!((x[0] - 0.9).abs() < 1e-15);
}

#[test]
fn euler_step_rejects_bad_input() {
    let g = Gauss::scalar();
    assert!(euler_step::<f64, _>(&g, &State(vec![0.0]), 0.0, 0.0, &[0.3]).is_err());
    assert!(euler_step::<f64, _>(&g, &State(vec![0.0]), 0.0, 0.1, &[0.3, 0.1]).is_err());
}

#[test]
fn tangent_step_examples() {
    // all derivative terms zero, alpha = 0
    let g = Gauss::new(2, ParamFlavor::Initial).unwrap();
    let v = TangentVector(vec![0.7, -1.2]);
    let out = tangent_step::<f64, _>(&g, &State(vec![0.4, 0.1]), &v, 0.0, 0.0, 0.01, &[0.2, 0.3])
        .unwrap();
    assert_eq!(out, v);

    // constant sigma independent of gamma, alpha = 1/dt: v' = (jvp + dF/dgamma) dt exactly
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let dt = 0.002;
    let x = State((0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect());
    let v = TangentVector((0..40).map(|i| (i as f64 * 1.3).cos()).collect());
    let db: Vec<f64> = (0..40).map(|i| 0.01 * (i as f64 - 20.0)).collect();
    let out = tangent_step(&l96, &x, &v, 0.0, 1.0 / dt, dt, &db).unwrap();
    let mut jvp = vec![0.0; 40];
    l96.drift_jvp(&x, 0.0, &v, &mut jvp);
    for i in 0..40 {
        assert_eq!(out[i], (jvp[i] + 1.0) * dt);
    }
}

#[test]
fn gauss_pure_path_tangent_is_brownian_motion() {
    let g = Gauss::scalar();
    let mut stream = RngStream::new(3, 0);
    let zero = Constant::new(0.0).unwrap();
    let mut path = PathState::new(&g, 0.0);
    let mut b = 0.0f64;
    for _ in 0..200 {
        path.advance(&g, &zero, 0.0, 0.01, Some(200), &mut stream)
            .unwrap();
        b += path.last_increment()[0];
    }
    assert!((path.v()[0] - b).abs() < 1e-12);
    // X_N = (1 + gamma) B_N
    assert!((path.x()[0] - b).abs() < 1e-12);

    let mut stream = RngStream::new(3, 0);
    let mut path = PathState::new(&g, 0.25);
    for _ in 0..200 {
        path.advance_state(&g, 0.25, 0.01, &mut stream).unwrap();
    }
    assert!((path.x()[0] - 1.25 * b).abs() < 1e-12);
}

#[test]
fn gauss_pure_kernel_tangent_is_last_increment() {
    let g = Gauss::scalar();
    let mut stream = RngStream::new(8, 2);
    let mut path = PathState::new(&g, 0.0);
    for _ in 0..50 {
        path.advance(&g, &PureKernel, 0.0, 0.01, Some(50), &mut stream)
            .unwrap();
        assert_eq!(path.v()[0], path.last_increment()[0]);
    }
}

#[test]
fn kernel_increment_examples() {
    struct Scaled(f64);
    impl SdeModel<f64> for Scaled {
        fn name(&self) -> &str {
            "scaled"
        }
        fn param_id(&self) -> &str {
            "none"
        }
        fn dim(&self) -> usize {
            1
        }
        fn drift(&self, _x: &[f64], _g: f64, out: &mut [f64]) {
            out.fill(0.0)
        }
        fn diffusion(&self, _x: &[f64], _g: f64) -> f64 {
            self.0
        }
        fn drift_jvp(&self, _x: &[f64], _g: f64, _v: &[f64], out: &mut [f64]) {
            out.fill(0.0)
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
    let x = State(vec![0.0]);
    let i = kernel_increment(
        &Scaled(0.5),
        &x,
        &TangentVector(vec![0.2]),
        0.0,
        10.0,
        &[0.1],
    )
    .unwrap();
    assert!((i - 0.4).abs() < 1e-15);
    let i = kernel_increment(
        &Scaled(0.5),
        &x,
        &TangentVector(vec![0.0]),
        0.0,
        10.0,
        &[0.1],
    )
    .unwrap();
    assert_eq!(i, 0.0);
    assert!(kernel_increment(
        &Scaled(0.0),
        &x,
        &TangentVector(vec![0.2]),
        0.0,
        10.0,
        &[0.1]
    )
    .is_err());

    let g = Gauss::new(2, ParamFlavor::Initial).unwrap();
    let i = kernel_increment::<f64, _>(
        &g,
        &State(vec![0.0, 0.0]),
        &TangentVector(vec![1.0, 1.0]),
        0.0,
        2.0,
        &[0.1, -0.1],
    )
    .unwrap();
    assert_eq!(i, 0.0);
}

#[test]
fn one_step_gauss_path() {
    let g = Gauss::scalar();
    let zero = Constant::new(0.0).unwrap();
    let mut stream = RngStream::new(11, 4);
    let acc = simulate_path(&g, &Coordinate(0), &zero, 0.0, 0.01, 1, &mut stream).unwrap();
    let db: Vec<f64> = RngStream::at(11, 4, 0).increment(0.01, 1).unwrap();
    assert_eq!(acc.s1, db[0]);
    assert_eq!(acc.s2, 0.0);
    assert_eq!(acc.phi, db[0]);
}

#[test]
fn zero_schedule_has_zero_kernel_weight() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Diffusion);
    let zero = Constant::new(0.0).unwrap();
    for p in 0..5 {
        let mut stream = RngStream::new(1, p);
        let acc =
            simulate_path(&l96, &CoordinateMean, &zero, 0.0, 0.002, 200, &mut stream).unwrap();
        assert_eq!(acc.s2, 0.0);
    }
}

#[test]
fn lorenz96_damped_path_is_finite() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let ten = Constant::new(10.0).unwrap();
    let mut stream = RngStream::new(2026, 0);
    let acc = simulate_path(&l96, &CoordinateMean, &ten, 0.0, 0.002, 500, &mut stream).unwrap();
    assert!(!acc.overflowed());
    assert!(acc.phi.is_finite() && acc.s1.is_finite() && acc.s2.is_finite());
}

#[test]
fn damping_law() {
    // homogeneous recursion with constant sigma: v_n = v_0 prod(1 - alpha dt)
    let g = Gauss::new(3, ParamFlavor::Initial).unwrap();
    let alpha = 3.0f64;
    let dt = 0.01;
    let s = Constant::new(alpha).unwrap();
    let mut stream = RngStream::new(5, 0);
    let mut path = PathState::new(&g, 0.0);
    let v0 = initial_tangent::<f64, _>(&g);
    for n in 1..=100 {
        path.advance(&g, &s, 0.0, dt, None, &mut stream).unwrap();
        let expected = (1.0 - alpha * dt).powi(n);
        for i in 0..3 {
            assert!((path.v()[i] - v0[i] * expected).abs() < 1e-13);
        }
    }
}

#[test]
fn tangent_scales_linearly_in_initial_value() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Initial);
    let s = Constant::new(10.0).unwrap();
    let mut a = PathState::from_parts(vec![0.0; 40], vec![1.0; 40]);
    let mut b = PathState::from_parts(vec![0.0; 40], vec![3.0; 40]);
    let (mut sa, mut sb) = (RngStream::new(0, 0), RngStream::new(0, 0));
    // use the drift flavor's homogeneous part only: Initial flavor has no inhomogeneous terms
    for _ in 0..300 {
        a.advance(&l96, &s, 0.0, 0.002, None, &mut sa).unwrap();
        b.advance(&l96, &s, 0.0, 0.002, None, &mut sb).unwrap();
    }
    for i in 0..40 {
        assert!((b.v()[i] - 3.0 * a.v()[i]).abs() <= 1e-10 * (1.0 + a.v()[i].abs()));
    }
}

#[test]
fn pathwise_derivative_matches_finite_difference() {
    // OU with drift shift: d x_n / d gamma equals the undamped tangent
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift).with_start(0.5);
    let zero = Constant::new(0.0).unwrap();
    let h = 1e-3;
    let mut base = PathState::new(&ou, 0.0);
    let mut plus = PathState::new(&ou, h);
    let mut minus = PathState::new(&ou, -h);
    let (mut s0, mut s1, mut s2) = (
        RngStream::new(9, 0),
        RngStream::new(9, 0),
        RngStream::new(9, 0),
    );
    for _ in 0..500 {
        base.advance(&ou, &zero, 0.0, 0.01, None, &mut s0).unwrap();
        plus.advance_state(&ou, h, 0.01, &mut s1).unwrap();
        minus.advance_state(&ou, -h, 0.01, &mut s2).unwrap();
        let fd = (plus.x()[0] - minus.x()[0]) / (2.0 * h);
        assert!((fd - base.v()[0]).abs() < 1e-8);
    }
}

#[test]
fn overflow_is_flagged_not_fatal() {
    let l96 = Lorenz96::<f64>::standard(ParamFlavor::Drift);
    let zero = Constant::new(0.0).unwrap();
    let mut stream = RngStream::new(4, 0);
    let acc = simulate_path(
        &l96,
        &CoordinateMean,
        &zero,
        0.0,
        0.002,
        100_000,
        &mut stream,
    )
    .unwrap();
    assert!(acc.overflowed());
    assert!(acc.phi.is_nan());
    assert_eq!(TANGENT_OVERFLOW, 1e12);
}

#[test]
fn non_finite_rule_is_an_error() {
    let ou = OrnsteinUhlenbeck::<f64>::unit(ParamFlavor::Drift);
    let rule =
        pathkernel::schedule::StateDependent::new("nan", |v: &pathkernel::HistoryView<'_, f64>| {
            if v.step() == 7 {
                f64::NAN
            } else {
                1.0
            }
        });
    let mut stream = RngStream::new(4, 0);
    let err = simulate_path(&ou, &Coordinate(0), &rule, 0.0, 0.01, 20, &mut stream).unwrap_err();
    assert!(matches!(
        err,
        pathkernel::Error::NonFiniteSchedule { step: 7, .. }
    ));
}
