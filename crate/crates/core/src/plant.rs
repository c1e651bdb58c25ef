//! Explicit finite-difference model of the plant
//!
//! ```text
//! u_t = ε u_xx + λ(x) u,   u_x(0, t) = 0,   u_x(1, t) + q u(1, t) = U(t)
//! ```
//!
//! Both boundary conditions are imposed through second-order ghost nodes and
//! the input is held constant across each step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GainTable;
use crate::profile::ReactionProfile;
use crate::quad;

/// Any |u| above this is treated as blow-up.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    eps: f64,
    q: f64,
    profile: ReactionProfile,
    lambda: Vec<f64>,
    nx: usize,
    dt: f64,
}

impl PlantConfig {
    pub fn new(eps: f64, q: f64, profile: ReactionProfile, nx: usize, dt: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::validation("eps", "must be positive"));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::validation("q", "must be positive"));
        }
        if nx < 3 {
            return Err(Error::validation("nx", "need at least 3 spatial points"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("dt", "must be positive"));
        }
        let dx = 1.0 / (nx - 1) as f64;
        let cfl = eps * dt / (dx * dx);
        if cfl > 0.5 {
            return Err(Error::validation(
                "dt",
                format!("CFL number eps*dt/dx^2 = {cfl} exceeds 1/2"),
            ));
        }
        let lambda = (0..nx).map(|i| profile.eval(i as f64 * dx)).collect();
        Ok(PlantConfig {
            eps,
            q,
            profile,
            lambda,
            nx,
            dt,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn profile(&self) -> &ReactionProfile {
        &self.profile
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.nx - 1) as f64
    }

    pub fn cfl_number(&self) -> f64 {
        self.eps * self.dt / (self.dx() * self.dx())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub u: Vec<f64>,
}

impl PlantState {
    pub fn new(u: Vec<f64>) -> Self {
        PlantState { t: 0.0, u }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(nx: usize, f: F) -> Self {
        let dx = 1.0 / (nx - 1) as f64;
        Self::new((0..nx).map(|i| f(i as f64 * dx)).collect())
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.u.len() - 1) as f64
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }

    pub fn at_left(&self) -> f64 {
        self.u[0]
    }

    pub fn at_right(&self) -> f64 {
        self.u[self.u.len() - 1]
    }
}

/// Initial profile given by name or by explicit samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCondition {
    Named(NamedInitial),
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedInitial {
    /// u(x, 0) = cos(πx)
    CosPiX,
}

impl InitialCondition {
    pub fn to_state(&self, nx: usize) -> Result<PlantState> {
        match self {
            InitialCondition::Named(NamedInitial::CosPiX) => {
                Ok(PlantState::from_fn(nx, |x| (std::f64::consts::PI * x).cos()))
            }
            InitialCondition::Samples(s) => {
                if s.len() != nx {
                    return Err(Error::validation(
                        "initial",
                        format!("{} samples given for a {nx}-point grid", s.len()),
                    ));
                }
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("initial", "samples must be finite"));
                }
                Ok(PlantState::new(s.clone()))
            }
        }
    }
}

/// One explicit Euler step with boundary input `input` held over the step.
pub fn step_plant(state: &PlantState, config: &PlantConfig, input: f64) -> Result<PlantState> {
    if state.u.len() != config.nx {
        return Err(Error::Config(format!(
            "state has {} points, plant grid has {}",
            state.u.len(),
            config.nx
        )));
    }
    if !input.is_finite() {
        return Err(Error::validation("U", "boundary input must be finite"));
    }
    let mut next = vec![0.0; config.nx];
    advance(&state.u, &mut next, config, input);
    let t = state.t + config.dt;
    check_divergence(&next, t)?;
    Ok(PlantState { t, u: next })
}

/// Writes one step of `u` into `out`.
pub(crate) fn advance(u: &[f64], out: &mut [f64], config: &PlantConfig, input: f64) {
    let n = u.len();
    let dx = config.dx();
    let r = config.eps * config.dt / (dx * dx);
    let dt = config.dt;
    let lam = &config.lambda;

    // ghost u_{-1} = u_1
    out[0] = u[0] + r * 2.0 * (u[1] - u[0]) + dt * lam[0] * u[0];
    for i in 1..n - 1 {
        out[i] = u[i] + r * (u[i + 1] - 2.0 * u[i] + u[i - 1]) + dt * lam[i] * u[i];
    }
    // ghost u_{n} = u_{n-2} + 2 dx (U − q u_{n-1})
    let last = n - 1;
    let ghost = u[last - 1] + 2.0 * dx * (input - config.q * u[last]);
    out[last] = u[last] + r * (ghost - 2.0 * u[last] + u[last - 1]) + dt * lam[last] * u[last];
}

pub(crate) fn check_divergence(u: &[f64], t: f64) -> Result<()> {
    let peak = u.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
    if !(peak <= DIVERGENCE_THRESHOLD) {
        return Err(Error::Divergence { t, magnitude: peak });
    }
    Ok(())
}

/// Trapezoid L² norm over [0, 1].
pub fn l2_norm(state: &PlantState) -> f64 {
    let sq: Vec<f64> = state.u.iter().map(|v| v * v).collect();
    quad::trapezoid(&sq, state.dx()).sqrt()
}

/// U_NO = ∫₀¹ K(y) u(y) dy by trapezoid. The gain is interpolated onto the
/// state grid when the two differ.
pub fn continuous_control(gain: &GainTable, state: &PlantState) -> f64 {
    if gain.len() == state.u.len() {
        weighted_integral(gain.samples(), &state.u)
    } else {
        let dx = state.dx();
        let resampled: Vec<f64> = (0..state.u.len()).map(|i| gain.eval(i as f64 * dx)).collect();
        weighted_integral(&resampled, &state.u)
    }
}

pub(crate) fn weighted_integral(gain: &[f64], u: &[f64]) -> f64 {
    let n = u.len();
    let h = 1.0 / (n - 1) as f64;
    let inner: f64 = (1..n - 1).map(|i| gain[i] * u[i]).sum();
    h * (inner + 0.5 * (gain[0] * u[0] + gain[n - 1] * u[n - 1]))
}
