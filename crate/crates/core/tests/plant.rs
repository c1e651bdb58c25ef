use backstep_etc::diagnostics::{fit_decay_rate, FitWindow};
use backstep_etc::plant::*;
use backstep_etc::profile::ReactionProfile;
use backstep_etc::provider::{provide_kernel, KernelSource};
use backstep_etc::trigger::{run_closed_loop, ControlMode, MUpdate, RunOptions, TriggerConfig};
use proptest::prelude::*;

/// Smallest positive root of μ tan μ = q, by bisection on (0, π/2).
fn robin_mode(q: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12, std::f64::consts::FRAC_PI_2 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.tan() < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn error_at(nx: usize, q: f64, eps: f64, t_end: f64) -> f64 {
    let dx = 1.0 / (nx - 1) as f64;
    let dt = 0.25 * dx * dx / eps;
    let steps = (t_end / dt).round() as usize;
    let cfg = PlantConfig::new(eps, q, ReactionProfile::constant(0.0, nx).unwrap(), nx, dt).unwrap();
    let mu = robin_mode(q);
    let mut s = PlantState::from_fn(nx, |x| (mu * x).cos());
    for _ in 0..steps {
        s = step_plant(&s, &cfg, 0.0).unwrap();
    }
    let decay = (-eps * mu * mu * s.t).exp();
    s.u.iter()
        .enumerate()
        .map(|(i, v)| (v - (mu * i as f64 * dx).cos() * decay).abs())
        .fold(0.0, f64::max)
}

#[test]
fn scheme_is_second_order_against_eigenmode() {
    let e = [11, 21, 41].map(|nx| error_at(nx, 1.0, 1.0, 0.1));
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() <= 0.3 * 4.0, "errors {e:?}");
    }
}

#[test]
fn open_loop_sec6_plant_grows() {
    let nx = 51;
    let cfg = PlantConfig::new(1.0, 10.0, ReactionProfile::chebyshev(50.0, 8.0, nx).unwrap(), nx, 1e-4).unwrap();
    let mut s = PlantState::from_fn(nx, |x| (std::f64::consts::PI * x).cos());
    let start = s.l2_norm();
    for _ in 0..5000 {
        s = step_plant(&s, &cfg, 0.0).unwrap();
    }
    assert!(s.l2_norm() > 10.0 * start);
}

#[test]
fn continuous_exact_control_decays() {
    let (nx, n) = (41, 81);
    let p = ReactionProfile::constant(15.0, n).unwrap();
    let kernels = provide_kernel(&KernelSource::Exact, &p, 1.0, 10.0, n).unwrap();
    let cfg = PlantConfig::new(1.0, 10.0, p, nx, 1e-4).unwrap();
    let trig = TriggerConfig {
        xi: 1.0,
        eta: 1.0,
        kappa1: 0.0,
        kappa2: 0.0,
        kappa3: 0.0,
        lambda_d: 1.0,
        m0: -1.0,
    };
    let opts = RunOptions {
        horizon: 1.0,
        mode: ControlMode::Continuous,
        stride: 50,
        r0: 1.0,
        m_update: MUpdate::Exponential,
        source_label: "exact".into(),
    };
    let u0 = PlantState::from_fn(nx, |x| (std::f64::consts::PI * x).cos());
    let trace = run_closed_loop(&cfg, &kernels, &trig, &u0, &opts).unwrap();
    let rate = fit_decay_rate(&trace.series(|r| r.u_norm), FitWindow::after_transient(1.0, 0.1)).unwrap();
    assert!(rate > 0.0, "{rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn step_is_linear_without_input(
        alpha in -5.0f64..5.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        amplitude in -20.0f64..20.0,
    ) {
        let nx = 21;
        let cfg = PlantConfig::new(1.0, 3.0, ReactionProfile::chebyshev(amplitude, 3.0, nx).unwrap(), nx, 5e-4).unwrap();
        let u = PlantState::from_fn(nx, |x| {
            coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * std::f64::consts::PI * x).cos()).sum()
        });
        let scaled = PlantState::new(u.u.iter().map(|v| alpha * v).collect());
        let a = step_plant(&scaled, &cfg, 0.0).unwrap();
        let b = step_plant(&u, &cfg, 0.0).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            prop_assert!((x - alpha * y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}
