use std::path::Path;

use backstep_etc::diagnostics::event_stats_from;
use backstep_etc::kernel::{gain_from_kernel, solve_kernel, GainTable};
use backstep_etc::plant::{continuous_control, step_plant, PlantConfig, PlantState};
use backstep_etc::profile::ReactionProfile;
use backstep_etc::scenario::parse_scenario;
use backstep_etc::trigger::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sec6_gain(n: usize) -> (GainTable, ReactionProfile) {
    let p = ReactionProfile::chebyshev(50.0, 8.0, n).unwrap();
    let k = solve_kernel(&p, 1.0, n).unwrap();
    (gain_from_kernel(&k, 10.0, 1.0, &p).unwrap(), p)
}

fn sec6_scenario() -> backstep_etc::scenario::Scenario {
    parse_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/paper_sec6.toml")).unwrap()
}

fn sec6_epsilons() -> (EpsilonConsts, EpsilonConsts) {
    let (g1, p1) = sec6_gain(101);
    let (g2, p2) = sec6_gain(201);
    (epsilon_constants(&g1, &p1, 1.0, 10.0), epsilon_constants(&g2, &p2, 1.0, 10.0))
}

#[test]
fn sec6_epsilons_stable_under_refinement() {
    let (a, b) = sec6_epsilons();
    for (x, y) in [(a.eps1, b.eps1), (a.eps2, b.eps2), (a.eps3, b.eps3)] {
        assert!(x.is_finite() && y.is_finite());
        assert!((x - y).abs() <= 0.01 * y.abs(), "{a:?} vs {b:?}");
    }
}

// K̂'(0) vanishes for the exact kernel (k_y(x, 0) = 0), so ε₄ is a
// finite-difference estimate of zero and shrinks with h instead of settling.
#[test]
fn sec6_eps4_stable_under_refinement() {
    let (a, b) = sec6_epsilons();
    assert!((a.eps4 - b.eps4).abs() <= 0.01 * b.eps4.abs(), "{} vs {}", a.eps4, b.eps4);
}

#[test]
fn sec6_eps4_is_negligible() {
    let (a, b) = sec6_epsilons();
    assert!(b.eps4 < a.eps4);
    assert!(a.eps4 <= 1e-9 * a.eps2 && b.eps4 <= 1e-9 * b.eps2);
}

#[test]
fn d_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = 31;
        let h = 1.0 / (n - 1) as f64;
        let gain = GainTable::from_samples((0..n).map(|_| rng.gen_range(-50.0..50.0)).collect(), 3.0).unwrap();
        let snap = PlantState::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let now = PlantState::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let trig = TriggerState::start(&gain, &snap, -1.0);
        let oracle: f64 = (0..n)
            .map(|j| {
                let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
                w * gain.samples()[j] * (now.u[j] - snap.u[j])
            })
            .sum();
        let d = compute_d(&gain, &now, &trig);
        assert!((d - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()), "{d} vs {oracle}");
    }
}

#[test]
fn sec6_dwell_bound_below_observed_dwell_and_m_negative() {
    let prepared = sec6_scenario().prepare().unwrap();
    let tau = prepared.design.dwell.tau;
    let out = prepared.run(2.0, ControlMode::Event, 1).unwrap();
    let stats = event_stats_from(&out.trace.event_times(), out.trace.steps).unwrap();
    let min_dwell = stats.min_dwell.unwrap();
    assert!(tau > 0.0);
    assert!(tau <= min_dwell, "tau {tau} vs {min_dwell}");
    assert!(out.trace.rows.iter().all(|r| r.m < 0.0));
}

#[test]
fn sec6_paper_kappas_checked_against_minima() {
    let d = sec6_scenario().prepare().unwrap().design;
    assert_eq!(d.kappas, [5.5e4, 758.0, 1240.0]);
    for (k, (min, ok)) in d.kappas.iter().zip(d.kappa_min.iter().zip(d.kappa_admissible)) {
        assert!(min.is_finite() && *min >= 0.0);
        assert_eq!(ok, k >= min);
    }
}

#[test]
fn zero_reaction_never_fires_after_start() {
    let text = r#"
        [plant]
        eps = 1.0
        q = 2.0
        lambda = { family = "constant", value = 0.0 }
        nx = 21
        dt = 1e-4
        [kernel]
        n = 41
        [trigger]
        xi = 1.0
        eta = 1.0
        kappa1 = 1.0
        kappa2 = 1.0
        kappa3 = 1.0
        lambda_d = 1.0
        m0 = -1.0
        [initial]
        u = "cos_pi_x"
        [run]
        horizon = 0.5
    "#;
    let s = backstep_etc::scenario::Scenario::from_toml(text, Path::new("inline.toml"), ".".into()).unwrap();
    let out = s.prepare().unwrap().run(0.5, ControlMode::Event, 1).unwrap();
    assert_eq!(out.trace.events.len(), 1);
    assert!(out.trace.rows.iter().all(|r| r.u_d == 0.0 && r.d == 0.0));
    assert!(out.trace.final_row().u_norm < out.trace.rows[0].u_norm);
}

/// Event count of the trigger replayed on a fixed trajectory.
fn replay(states: &[PlantState], gain: &GainTable, cfg: &TriggerConfig, dt: f64) -> usize {
    let mut trig = TriggerState::start(gain, &states[0], cfg.m0);
    let mut d = 0.0;
    for pair in states.windows(2) {
        trig.m = step_m_exponential(&trig, d, &pair[0], cfg, dt).unwrap();
        d = compute_d(gain, &pair[1], &trig);
        if check_trigger(d, trig.m, cfg.xi) {
            trig.snapshot.clone_from(&pair[1].u);
            trig.event_times.push(pair[1].t);
            d = 0.0;
        }
    }
    trig.event_times.len()
}

fn replay_trajectory() -> (Vec<PlantState>, GainTable, EpsilonConsts, f64) {
    let (nx, dt) = (41, 1e-4);
    let p = ReactionProfile::chebyshev(20.0, 3.0, nx).unwrap();
    let k = solve_kernel(&p, 1.0, nx).unwrap();
    let gain = gain_from_kernel(&k, 5.0, 1.0, &p).unwrap();
    let plant = PlantConfig::new(1.0, 5.0, p.clone(), nx, dt).unwrap();
    let mut states = vec![PlantState::from_fn(nx, |x| (std::f64::consts::PI * x).cos())];
    for _ in 0..5000 {
        let s = states.last().unwrap();
        let next = step_plant(s, &plant, continuous_control(&gain, s)).unwrap();
        states.push(next);
    }
    let epsc = epsilon_constants(&gain, &p, 1.0, 5.0);
    (states, gain, epsc, dt)
}

const XIS: [f64; 6] = [1.0, 5.0, 20.0, 55.0, 200.0, 1000.0];

// Re-selecting κ = 2ε/ξ cancels ξ from the forcing of −ξm while the λ_d d²
// drain grows with ξ, so counts climb here (1, 2, 2, 2, 3, 5).
#[test]
fn larger_xi_never_adds_events_on_a_replay() {
    let (states, gain, epsc, dt) = replay_trajectory();
    let counts: Vec<usize> = XIS
        .iter()
        .map(|&xi| {
            let [kappa1, kappa2, kappa3] = select_trigger_params(&epsc, xi).unwrap();
            let cfg = TriggerConfig { xi, eta: 9.775, kappa1, kappa2, kappa3, lambda_d: 770.0, m0: -5.0 };
            replay(&states, &gain, &cfg, dt)
        })
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}


#[test]
fn larger_xi_with_fixed_kappas_never_adds_events() {
    let (states, gain, epsc, dt) = replay_trajectory();
    let [kappa1, kappa2, kappa3] = select_trigger_params(&epsc, XIS[0]).unwrap();
    for lambda_d in [770.0, 1e5] {
        let counts: Vec<usize> = XIS
            .iter()
            .map(|&xi| {
                let cfg = TriggerConfig { xi, eta: 9.775, kappa1, kappa2, kappa3, lambda_d, m0: -5.0 };
                replay(&states, &gain, &cfg, dt)
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    }
}
