//! Dynamic event-triggering mechanism and the closed-loop driver.
//!
//! Between events the boundary input is held at `U_d = U_NO(t_j)`. With
//! `d = U_NO(t) − U_d`, the next event is the first time `d² ≥ −ξ m`, where
//!
//! ```text
//! ṁ = −η m + λ_d d² − κ₁‖u‖² − κ₂ u(1)² − κ₃ u(0)²,   m(0) < 0.
//! ```

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    backstepping_transform, lyapunov_value, EventRecord, SimTrace, TraceMetadata, TraceRow,
};
use crate::error::{Error, Result};
use crate::kernel::{GainTable, KernelGrid};
use crate::plant::{self, check_divergence, continuous_control, weighted_integral, PlantConfig, PlantState};
use crate::profile::ReactionProfile;
use crate::provider::ProvidedKernels;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub xi: f64,
    pub eta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub lambda_d: f64,
    pub m0: f64,
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("xi", self.xi), ("eta", self.eta), ("lambda_d", self.lambda_d)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        let nonneg = [("kappa1", self.kappa1), ("kappa2", self.kappa2), ("kappa3", self.kappa3)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.m0.is_finite() && self.m0 < 0.0) {
            return Err(Error::validation("m0", format!("must be negative, got {}", self.m0)));
        }
        Ok(())
    }

    pub fn kappas(&self) -> [f64; 3] {
        [self.kappa1, self.kappa2, self.kappa3]
    }
}

/// Live state of the trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    pub m: f64,
    /// Plant state at the last event.
    pub snapshot: Vec<f64>,
    pub u_d: f64,
    pub event_times: Vec<f64>,
}

impl TriggerState {
    /// State right after the initial event at `state.t`.
    pub fn start(gain: &GainTable, state: &PlantState, m0: f64) -> Self {
        TriggerState {
            m: m0,
            snapshot: state.u.clone(),
            u_d: continuous_control(gain, state),
            event_times: vec![state.t],
        }
    }

    fn record_event(&mut self, state: &PlantState, u_no: f64) {
        self.snapshot.clone_from(&state.u);
        self.u_d = u_no;
        self.event_times.push(state.t);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonConsts {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
}

/// Constants bounding ḋ² by d², ‖u‖², u(1)² and u(0)².
pub fn epsilon_constants(gain: &GainTable, profile: &ReactionProfile, eps: f64, q: f64) -> EpsilonConsts {
    let k1 = gain.k_at_1();
    let h = gain.step();
    let integrand: Vec<f64> = gain
        .samples()
        .iter()
        .zip(gain.d2k())
        .enumerate()
        .map(|(j, (k, k2))| {
            let y = j as f64 * h;
            (eps * k2 + eps * k1 * k + profile.eval(y) * k).powi(2)
        })
        .collect();
    EpsilonConsts {
        eps1: 4.0 * eps * eps * k1 * k1,
        eps2: 4.0 * quad::trapezoid(&integrand, h),
        eps3: 4.0 * (eps * q * k1 + eps * gain.dk_at_1()).powi(2),
        eps4: 4.0 * eps * eps * gain.dk_at_0().powi(2),
    }
}

/// Minimal admissible (κ₁, κ₂, κ₃) = (2ε₂/ξ, 2ε₃/ξ, 2ε₄/ξ).
pub fn select_trigger_params(epsc: &EpsilonConsts, xi: f64) -> Result<[f64; 3]> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::validation("xi", "must be positive"));
    }
    Ok([2.0 * epsc.eps2 / xi, 2.0 * epsc.eps3 / xi, 2.0 * epsc.eps4 / xi])
}

/// Whether given κ's satisfy κ₁ ≥ 2ε₂/ξ, κ₂ ≥ 2ε₃/ξ, κ₃ ≥ 2ε₄/ξ.
pub fn kappas_admissible(kappas: [f64; 3], epsc: &EpsilonConsts, xi: f64) -> Result<[bool; 3]> {
    let min = select_trigger_params(epsc, xi)?;
    Ok([kappas[0] >= min[0], kappas[1] >= min[1], kappas[2] >= min[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainParams {
    pub r0: f64,
    /// δ₀ must lie strictly below this.
    pub delta0_bound: f64,
    /// Half of `delta0_bound`.
    pub delta0: f64,
    pub lambda_d_min: f64,
}

/// r₀ = 16(κ₁q₁ + κ₂ + κ₃q₀)/ε.
pub fn lyapunov_weight(kappas: [f64; 3], q0: f64, q1: f64, eps: f64) -> f64 {
    16.0 * (kappas[0] * q1 + kappas[1] + kappas[2] * q0) / eps
}

pub fn select_gain_params(kappas: [f64; 3], q0: f64, q1: f64, wp: f64, eps: f64, iota: f64) -> Result<GainParams> {
    let r0 = lyapunov_weight(kappas, q0, q1, eps);
    if !(r0 > 0.0) {
        return Err(Error::Infeasible(format!("r0 = {r0} must be positive (all kappas zero?)")));
    }
    let re = r0 * eps;
    let delta0_bound = (re * wp - kappas[1] - 2.0 * kappas[2] - 0.25 * re - 2.5 * re * iota) / re;
    if !(delta0_bound > 0.0) {
        return Err(Error::Infeasible(format!(
            "delta0 upper bound is {delta0_bound} (needs > 0); wp = {wp}, r0 = {r0}"
        )));
    }
    let delta0 = 0.5 * delta0_bound;
    Ok(GainParams {
        r0,
        delta0_bound,
        delta0,
        lambda_d_min: re / (4.0 * delta0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellBound {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    /// ∫₀¹ ds / (n̄₃ + n̄₂ s + n̄₁ s²)
    pub tau: f64,
}

/// Absolute tolerance of the dwell-time quadrature.
pub const DWELL_TOLERANCE: f64 = 1e-12;

impl DwellBound {
    pub fn from_coefficients(n1: f64, n2: f64, n3: f64) -> Self {
        let tau = quad::adaptive_simpson(|s| 1.0 / (n3 + n2 * s + n1 * s * s), 0.0, 1.0, DWELL_TOLERANCE);
        DwellBound { n1, n2, n3, tau }
    }
}

pub fn dwell_time_bound(eps1: f64, xi: f64, lambda_d: f64, eta: f64) -> DwellBound {
    DwellBound::from_coefficients(
        0.5 * lambda_d * xi,
        1.0 + eps1 + xi * lambda_d + eta,
        1.0 + eta + eps1 + 0.5 * xi * lambda_d,
    )
}

/// d = U_NO(t) − U_d, both by trapezoid quadrature of K̂ against the state.
pub fn compute_d(gain: &GainTable, state: &PlantState, trig: &TriggerState) -> f64 {
    let snapshot = PlantState::new(trig.snapshot.clone());
    continuous_control(gain, state) - continuous_control(gain, &snapshot)
}

/// Sum κ₁‖u‖² + κ₂u(1)² + κ₃u(0)².
fn state_forcing(state: &PlantState, config: &TriggerConfig) -> f64 {
    config.kappa1 * state.l2_norm().powi(2)
        + config.kappa2 * state.at_right().powi(2)
        + config.kappa3 * state.at_left().powi(2)
}

/// Explicit Euler step of the dynamic variable m.
pub fn step_m(trig: &TriggerState, d: f64, state: &PlantState, config: &TriggerConfig, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::validation("dt", "must be positive"));
    }
    let rate = -config.eta * trig.m + config.lambda_d * d * d - state_forcing(state, config);
    let next = trig.m + dt * rate;
    if !(next < 0.0) {
        return Err(Error::Invariant(format!(
            "dynamic variable m = {next} is not negative at t = {}",
            state.t + dt
        )));
    }
    Ok(next)
}

/// Sign-preserving step of m. With m < 0 the equation reads
/// `ṁ = −r m − S` with `r = η + λ_d d²/|m|` and `S` the state forcing; `r`
/// and `S` are frozen over the step and the linear equation solved exactly.
/// Agrees with [`step_m`] to first order in `dt`.
pub fn step_m_exponential(
    trig: &TriggerState,
    d: f64,
    state: &PlantState,
    config: &TriggerConfig,
    dt: f64,
) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::validation("dt", "must be positive"));
    }
    if !(trig.m < 0.0) {
        return Err(Error::Invariant(format!("dynamic variable m = {} is not negative", trig.m)));
    }
    let s = state_forcing(state, config);
    let r = config.eta + config.lambda_d * d * d / -trig.m;
    let decay = (-r * dt).exp();
    let next = trig.m * decay + s * (-r * dt).exp_m1() / r;
    if !(next < 0.0) {
        return Err(Error::Invariant(format!(
            "dynamic variable m = {next} is not negative at t = {}",
            state.t + dt
        )));
    }
    Ok(next)
}

/// Time integrator for m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MUpdate {
    /// [`step_m`]
    Euler,
    /// [`step_m_exponential`]
    #[default]
    Exponential,
}

/// True iff d² ≥ −ξ m.
pub fn check_trigger(d: f64, m: f64, xi: f64) -> bool {
    d * d >= -xi * m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Event-triggered updates.
    Event,
    /// Input refreshed at every step.
    Continuous,
    /// U ≡ 0.
    OpenLoop,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::Event => "event",
            ControlMode::Continuous => "continuous",
            ControlMode::OpenLoop => "open-loop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    pub mode: ControlMode,
    /// Record every `stride`-th step (event steps are always recorded).
    pub stride: usize,
    /// Weight in V = (r₀/2)‖ŵ‖² − m.
    pub r0: f64,
    pub m_update: MUpdate,
    pub source_label: String,
}

/// Runs the plant under the chosen control mode.
///
/// Each step advances the plant with the held input, advances m with the
/// values at the start of the step, then evaluates d at the new state and
/// fires an event if `d² ≥ −ξ m`. An event refreshes `U_d` and resets `d` to 0.
pub fn run_closed_loop(
    plant_cfg: &PlantConfig,
    kernels: &ProvidedKernels,
    trigger: &TriggerConfig,
    u0: &PlantState,
    options: &RunOptions,
) -> Result<SimTrace> {
    trigger.validate()?;
    if !(options.horizon.is_finite() && options.horizon > 0.0) {
        return Err(Error::validation("horizon", "must be positive"));
    }
    if options.stride == 0 {
        return Err(Error::validation("stride", "must be at least 1"));
    }
    let nx = plant_cfg.nx();
    if u0.u.len() != nx {
        return Err(Error::Config(format!(
            "initial state has {} points, plant grid has {nx}",
            u0.u.len()
        )));
    }
    let kernel = kernels.direct.subsample(nx)?;
    let gain = kernels.gain.resample(nx)?;
    let dt = plant_cfg.dt();
    let steps = (options.horizon / dt).round() as usize;
    let closed = options.mode != ControlMode::OpenLoop;

    let recorder = Recorder {
        kernel: &kernel,
        gain: gain.samples(),
        r0: options.r0,
    };

    let mut state = PlantState { t: 0.0, u: u0.u.clone() };
    check_divergence(&state.u, 0.0)?;
    let mut u_no = weighted_integral(gain.samples(), &state.u);
    let mut trig = TriggerState {
        m: trigger.m0,
        snapshot: state.u.clone(),
        u_d: if closed { u_no } else { 0.0 },
        event_times: if closed { vec![0.0] } else { Vec::new() },
    };
    let mut d = 0.0;

    let mut rows = Vec::with_capacity(steps / options.stride + 2);
    let mut events = Vec::new();
    if closed {
        events.push(EventRecord { index: 0, t: 0.0, u_d: trig.u_d });
    }
    rows.push(recorder.row(&state, &trig, u_no, d, closed)?);

    let mut next = vec![0.0; nx];
    for k in 0..steps {
        plant::advance(&state.u, &mut next, plant_cfg, trig.u_d);
        let t = (k + 1) as f64 * dt;
        check_divergence(&next, t)?;

        let m_next = if closed {
            match options.m_update {
                MUpdate::Euler => step_m(&trig, d, &state, trigger, dt)?,
                MUpdate::Exponential => step_m_exponential(&trig, d, &state, trigger, dt)?,
            }
        } else {
            trig.m
        };

        std::mem::swap(&mut state.u, &mut next);
        state.t = t;
        trig.m = m_next;
        u_no = weighted_integral(gain.samples(), &state.u);

        let mut fired = false;
        if closed {
            d = u_no - trig.u_d;
            let fire = match options.mode {
                ControlMode::Continuous => true,
                _ => check_trigger(d, trig.m, trigger.xi),
            };
            if fire {
                trig.record_event(&state, u_no);
                d = 0.0;
                fired = true;
                events.push(EventRecord {
                    index: events.len(),
                    t,
                    u_d: trig.u_d,
                });
            }
        }

        if fired || (k + 1) % options.stride == 0 || k + 1 == steps {
            rows.push(recorder.row(&state, &trig, u_no, d, fired)?);
        }
    }

    Ok(SimTrace {
        rows,
        events,
        steps,
        metadata: TraceMetadata {
            mode: options.mode.as_str().to_string(),
            source: options.source_label.clone(),
            iota_estimate: kernels.iota_estimate(),
            dt,
            nx,
            horizon: options.horizon,
            r0: options.r0,
        },
    })
}

struct Recorder<'a> {
    kernel: &'a KernelGrid,
    gain: &'a [f64],
    r0: f64,
}

impl Recorder<'_> {
    fn row(&self, state: &PlantState, trig: &TriggerState, u_no: f64, d: f64, event: bool) -> Result<TraceRow> {
        debug_assert_eq!(self.gain.len(), state.u.len());
        let w = backstepping_transform(state, self.kernel)?;
        let norm = state.l2_norm();
        Ok(TraceRow {
            t: state.t,
            u_norm: norm,
            u_left: state.at_left(),
            u_right: state.at_right(),
            u_d: trig.u_d,
            u_no,
            d,
            m: trig.m,
            v: lyapunov_value(&w, trig.m, self.r0),
            omega: norm * norm + trig.m.abs(),
            event,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TriggerConfig {
        TriggerConfig {
            xi: 1.0,
            eta: 1.0,
            kappa1: 0.0,
            kappa2: 0.0,
            kappa3: 0.0,
            lambda_d: 1.0,
            m0: -1.0,
        }
    }

    #[test]
    fn trigger_inequality_is_inclusive() {
        assert!(!check_trigger(0.0, -1.0, 2.0));
        assert!(check_trigger(2.0, -2.0, 2.0));
        assert!(check_trigger(3.0, -0.1, 55.0));
    }

    #[test]
    fn m_step_arithmetic() {
        let state = PlantState::from_fn(11, |_| 0.0);
        let trig = TriggerState {
            m: -1.0,
            snapshot: state.u.clone(),
            u_d: 0.0,
            event_times: vec![0.0],
        };
        // pure decay
        let m = step_m(&trig, 0.0, &state, &cfg(), 0.1).unwrap();
        assert!((m + 0.9).abs() < 1e-15);
        // λ_d d² = 0.05
        let c = TriggerConfig { lambda_d: 0.05, ..cfg() };
        let m = step_m(&trig, 1.0, &state, &c, 0.1).unwrap();
        assert!((m - (-1.0 + 0.1 * (1.0 + 0.05))).abs() < 1e-15);
        // pushed past zero
        let c = TriggerConfig { lambda_d: 100.0, ..cfg() };
        assert!(matches!(step_m(&trig, 1.0, &state, &c, 0.1), Err(Error::Invariant(_))));
    }

    #[test]
    fn exponential_m_step() {
        let state = PlantState::from_fn(11, |_| 0.0);
        let trig = TriggerState {
            m: -1.0,
            snapshot: state.u.clone(),
            u_d: 0.0,
            event_times: vec![0.0],
        };
        let m = step_m_exponential(&trig, 0.0, &state, &cfg(), 0.1).unwrap();
        assert!((m + (-0.1f64).exp()).abs() < 1e-15);
        // stays negative where the Euler step crosses zero
        let c = TriggerConfig { lambda_d: 100.0, ..cfg() };
        let m = step_m_exponential(&trig, 1.0, &state, &c, 0.1).unwrap();
        assert!(m < 0.0);
        assert!((m + (-10.1f64).exp()).abs() < 1e-15);
        // first-order agreement with Euler
        let c = TriggerConfig { lambda_d: 0.05, ..cfg() };
        let u1 = PlantState::from_fn(11, |_| 1.0);
        let c = TriggerConfig { kappa1: 0.3, kappa2: 0.2, kappa3: 0.1, ..c };
        for dt in [1e-3, 1e-4] {
            let e = step_m(&trig, 1.0, &u1, &c, dt).unwrap();
            let x = step_m_exponential(&trig, 1.0, &u1, &c, dt).unwrap();
            assert!((e - x).abs() < 2.0 * dt * dt, "dt={dt}");
        }
    }

    #[test]
    fn trigger_params_from_constants() {
        let zero = EpsilonConsts { eps1: 0.0, eps2: 0.0, eps3: 0.0, eps4: 0.0 };
        assert_eq!(select_trigger_params(&zero, 1.0).unwrap(), [0.0; 3]);
        let e = EpsilonConsts { eps1: 4.0, eps2: 4.0, eps3: 4.0, eps4: 0.0 };
        assert_eq!(select_trigger_params(&e, 2.0).unwrap(), [4.0, 4.0, 0.0]);
        assert!(select_trigger_params(&e, 0.0).is_err());
    }

    #[test]
    fn gain_param_formulas() {
        let g = select_gain_params([1.0, 1.0, 1.0], 1.0, 1.0, 10.0, 1.0, 0.0).unwrap();
        assert_eq!(g.r0, 48.0);
        let bound = (48.0 * 10.0 - 1.0 - 2.0 - 12.0) / 48.0;
        assert!((g.delta0_bound - bound).abs() < 1e-14);
        assert!((g.delta0 - 0.5 * bound).abs() < 1e-14);
        assert!((g.lambda_d_min - 48.0 / (4.0 * g.delta0)).abs() < 1e-12);

        let err = select_gain_params([1.0, 1e6, 1e6], 1.0, 1.0, 0.25 + 1e-9, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn dwell_integral_seams() {
        let b = DwellBound::from_coefficients(1.0, 1.0, 1.0);
        let exact = std::f64::consts::PI / (3.0 * 3f64.sqrt());
        assert!((b.tau - exact).abs() < 1e-9);
        assert!((b.tau - 0.60460).abs() < 1e-5);
        assert!((DwellBound::from_coefficients(0.0, 0.0, 1.0).tau - 1.0).abs() < 1e-14);
    }

    #[test]
    fn epsilon_constants_for_unit_gain() {
        let g = GainTable::from_samples(vec![1.0; 21], 0.0).unwrap();
        let p = ReactionProfile::constant(0.0, 21).unwrap();
        let e = epsilon_constants(&g, &p, 1.0, 1.0);
        assert!((e.eps1 - 4.0).abs() < 1e-12);
        assert!((e.eps2 - 4.0).abs() < 1e-9);
        assert!((e.eps3 - 4.0).abs() < 1e-9);
        assert!(e.eps4.abs() < 1e-12);

        let zero = GainTable::from_samples(vec![0.0; 21], 0.0).unwrap();
        let e = epsilon_constants(&zero, &p, 1.0, 1.0);
        assert_eq!((e.eps1, e.eps2, e.eps3, e.eps4), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn d_vanishes_at_snapshot() {
        let g = GainTable::from_samples(vec![1.0; 11], 0.0).unwrap();
        let s = PlantState::from_fn(11, |x| x.sin());
        let trig = TriggerState::start(&g, &s, -1.0);
        assert_eq!(compute_d(&g, &s, &trig), 0.0);
        let shifted = PlantState::from_fn(11, |x| x.sin() + 0.3);
        assert!((compute_d(&g, &shifted, &trig) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = TriggerConfig { m0: 1.0, ..cfg() };
        assert!(matches!(bad.validate(), Err(Error::Validation { ref field, .. }) if field == "m0"));
        let bad = TriggerConfig { xi: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
    }
}
