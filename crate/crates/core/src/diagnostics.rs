//! Backstepping transforms, Lyapunov and Ω functionals, decay fitting, event
//! statistics, and trace export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelGrid, KernelKind};
use crate::plant::PlantState;
use crate::quad;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedState {
    pub t: f64,
    pub w_hat: Vec<f64>,
}

impl TransformedState {
    pub fn l2_norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.w_hat.iter().map(|v| v * v).collect();
        quad::trapezoid(&sq, 1.0 / (self.w_hat.len() - 1) as f64)
    }
}

fn on_grid(kernel: &KernelGrid, nx: usize) -> Result<std::borrow::Cow<'_, KernelGrid>> {
    if kernel.n() == nx {
        Ok(std::borrow::Cow::Borrowed(kernel))
    } else {
        Ok(std::borrow::Cow::Owned(kernel.subsample(nx)?))
    }
}

/// Σ_j w_ij k(x_i, y_j) v_j, the trapezoid Volterra integral ∫₀^{x_i} k(x_i, y) v(y) dy.
fn volterra(kernel: &KernelGrid, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let h = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|j| quad::trapezoid_weight(j, 0, i, h) * kernel.get(i, j) * v[j])
                .sum()
        })
        .collect()
}

/// ŵ(x) = u(x) − ∫₀ˣ k̂(x, y) u(y) dy.
pub fn backstepping_transform(state: &PlantState, kernel: &KernelGrid) -> Result<TransformedState> {
    if kernel.kind() != KernelKind::Direct {
        return Err(Error::validation("kernel.kind", "forward transform needs the direct kernel"));
    }
    let k = on_grid(kernel, state.u.len())?;
    let integral = volterra(&k, &state.u);
    Ok(TransformedState {
        t: state.t,
        w_hat: state.u.iter().zip(integral).map(|(u, i)| u - i).collect(),
    })
}

/// u(x) = ŵ(x) + ∫₀ˣ l̂(x, y) ŵ(y) dy.
pub fn inverse_transform(w: &TransformedState, kernel: &KernelGrid) -> Result<PlantState> {
    if kernel.kind() != KernelKind::Inverse {
        return Err(Error::validation("kernel.kind", "inverse transform needs the inverse kernel"));
    }
    let l = on_grid(kernel, w.w_hat.len())?;
    let integral = volterra(&l, &w.w_hat);
    Ok(PlantState {
        t: w.t,
        u: w.w_hat.iter().zip(integral).map(|(w, i)| w + i).collect(),
    })
}

/// V = (r₀/2)‖ŵ‖² − m.
pub fn lyapunov_value(w: &TransformedState, m: f64, r0: f64) -> f64 {
    0.5 * r0 * w.l2_norm_sq() - m
}

/// Ω = ‖u‖² + |m|.
pub fn omega(state: &PlantState, m: f64) -> f64 {
    state.l2_norm().powi(2) + m.abs()
}

/// Time interval used by [`fit_decay_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
}

impl FitWindow {
    /// Skips the first `fraction` of `[0, horizon]`.
    pub fn after_transient(horizon: f64, fraction: f64) -> Self {
        FitWindow {
            start: fraction * horizon,
            end: horizon,
        }
    }

    pub fn all() -> Self {
        FitWindow {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        }
    }
}

/// Default transient skipped before fitting decay rates.
pub const TRANSIENT_FRACTION: f64 = 0.1;

/// Negated least-squares slope of ln(value) against t over the window.
pub fn fit_decay_rate(series: &[(f64, f64)], window: FitWindow) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.start && *t <= window.end)
        .collect();
    if pts.len() < 2 {
        return Err(Error::validation("series", "need at least two points in the fit window"));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::validation(
            "series",
            format!("value {v} at t = {t} is not positive; cannot take its logarithm"),
        ));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in &pts {
        let dt = t - mean_t;
        sxy += dt * (v.ln() - mean_y);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(Error::validation("series", "all sample times coincide"));
    }
    Ok(-sxy / sxx)
}

/// One recorded step of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub u_norm: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub u_d: f64,
    pub u_no: f64,
    pub d: f64,
    pub m: f64,
    pub v: f64,
    pub omega: f64,
    pub event: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub index: usize,
    pub t: f64,
    pub u_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub mode: String,
    pub source: String,
    pub iota_estimate: f64,
    pub dt: f64,
    pub nx: usize,
    pub horizon: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub events: Vec<EventRecord>,
    /// Plant steps taken.
    pub steps: usize,
    pub metadata: TraceMetadata,
}

impl SimTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("traces always hold the initial row")
    }

    /// Rows recorded at event instants.
    pub fn event_rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| r.event)
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    /// Inter-event gaps t_{j+1} − t_j.
    pub fn gaps(&self) -> Vec<f64> {
        self.events.windows(2).map(|w| w[1].t - w[0].t).collect()
    }

    pub fn series<F: Fn(&TraceRow) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, f(r))).collect()
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("t,u_norm,u_left,u_right,u_d,u_no,d,m,v,omega,event\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.u_norm,
                r.u_left,
                r.u_right,
                r.u_d,
                r.u_no,
                r.d,
                r.m,
                r.v,
                r.omega,
                u8::from(r.event)
            );
        }
        out
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("j,t_j,u_d\n");
        for e in &self.events {
            let _ = writeln!(out, "{},{},{}", e.index, e.t, e.u_d);
        }
        out
    }

    /// Writes `<stem>_trace.csv` and `<stem>_events.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let trace = dir.join(format!("{stem}_trace.csv"));
        fs::write(&trace, self.trace_csv()).map_err(|e| Error::io(&trace, e))?;
        let events = dir.join(format!("{stem}_events.csv"));
        fs::write(&events, self.events_csv()).map_err(|e| Error::io(&events, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventStats {
    pub count: usize,
    /// `None` with fewer than two events.
    pub min_dwell: Option<f64>,
    pub mean_dwell: Option<f64>,
    /// events / steps
    pub update_fraction: f64,
}

pub fn event_stats(trace: &SimTrace) -> Result<EventStats> {
    event_stats_from(&trace.event_times(), trace.steps)
}

pub fn event_stats_from(times: &[f64], steps: usize) -> Result<EventStats> {
    if times.is_empty() {
        return Err(Error::validation("trace", "no events recorded"));
    }
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let min_dwell = gaps.iter().copied().reduce(f64::min);
    let mean_dwell = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    Ok(EventStats {
        count: times.len(),
        min_dwell,
        mean_dwell,
        update_fraction: if steps == 0 { 0.0 } else { times.len() as f64 / steps as f64 },
    })
}
