//! Scenario files and their execution.
//!
//! A scenario is a TOML document with `[plant]`, `[kernel]`, `[trigger]`,
//! `[initial]`, `[run]` and optional `[output]` / `[sweep]` tables. The
//! trigger gains `kappa1..3` and `lambda_d` accept either a number or
//! `"auto"`; auto values are the minimal admissible gains computed from the
//! kernel.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{event_stats, fit_decay_rate, EventStats, FitWindow, SimTrace, TRANSIENT_FRACTION};
use crate::error::{Error, Result};
use crate::kernel::{check_assumption1, AssumptionReport};
use crate::plant::{InitialCondition, PlantConfig, PlantState};
use crate::profile::{ProfileFamily, ReactionProfile};
use crate::provider::{inverse_kernel_norms, provide_kernel, theoretical_constants, KernelSource, ProvidedKernels, TheoryConstants};
use crate::trigger::{
    dwell_time_bound, epsilon_constants, kappas_admissible, lyapunov_weight, run_closed_loop, select_gain_params,
    select_trigger_params, ControlMode, DwellBound, EpsilonConsts, GainParams, MUpdate, RunOptions, TriggerConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub plant: PlantSection,
    pub kernel: KernelSection,
    pub trigger: TriggerSection,
    pub initial: InitialSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    /// Directory relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "scenario".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub eps: f64,
    pub q: f64,
    pub lambda: LambdaSpec,
    pub nx: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Family(ProfileFamily),
    /// Samples on a uniform grid over [0, 1].
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub n: usize,
    #[serde(default = "exact_source")]
    pub source: KernelSource,
}

fn exact_source() -> KernelSource {
    KernelSource::Exact
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl Setting {
    pub const AUTO: Setting = Setting::Auto(AutoTag::Auto);

    fn resolve(self, auto: f64) -> f64 {
        match self {
            Setting::Value(v) => v,
            Setting::Auto(_) => auto,
        }
    }

    fn is_auto(self) -> bool {
        matches!(self, Setting::Auto(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    pub xi: f64,
    pub eta: f64,
    pub kappa1: Setting,
    pub kappa2: Setting,
    pub kappa3: Setting,
    pub lambda_d: Setting,
    pub m0: f64,
    #[serde(default)]
    pub m_update: MUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub u: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "event_mode")]
    pub mode: ControlMode,
}

fn one() -> usize {
    1
}

fn event_mode() -> ControlMode {
    ControlMode::Event
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// File name prefix; defaults to the scenario name.
    #[serde(default)]
    pub stem: Option<String>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out(),
            stem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Perturbation amplitudes added to the exact kernel.
    pub iota: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Scenario::from_toml(&text, path, base)
}

impl Scenario {
    /// Parses and validates; `origin` is only used in messages.
    pub fn from_toml(text: &str, origin: &Path, base_dir: PathBuf) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            reason: e.message().to_string(),
        })?;
        s.base_dir = base_dir;
        s.validate()?;
        Ok(s)
    }

    pub fn stem(&self) -> &str {
        self.output.stem.as_deref().unwrap_or(&self.name)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.plant;
        positive("plant.eps", p.eps)?;
        positive("plant.q", p.q)?;
        positive("plant.dt", p.dt)?;
        if p.nx < 5 {
            return Err(Error::validation("plant.nx", "need at least 5 spatial points"));
        }
        let dx = 1.0 / (p.nx - 1) as f64;
        let cfl = p.eps * p.dt / (dx * dx);
        if cfl > 0.5 {
            return Err(Error::validation(
                "plant.dt",
                format!("CFL number eps*dt/dx^2 = {cfl} exceeds 1/2"),
            ));
        }
        match &p.lambda {
            LambdaSpec::Samples(s) => {
                if s.len() < 3 || s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("plant.lambda", "need at least 3 finite samples"));
                }
            }
            LambdaSpec::Family(f) => {
                let ok = match *f {
                    ProfileFamily::Constant { value } => value.is_finite(),
                    ProfileFamily::Chebyshev { amplitude, order } => amplitude.is_finite() && order.is_finite(),
                };
                if !ok {
                    return Err(Error::validation("plant.lambda", "parameters must be finite"));
                }
            }
        }

        let n = self.kernel.n;
        if n < 9 {
            return Err(Error::validation("kernel.n", "need at least 9 kernel grid points"));
        }
        if !(n - 1).is_multiple_of(p.nx - 1) {
            return Err(Error::validation(
                "kernel.n",
                format!("kernel grid ({n}) is not commensurate with plant grid ({}): n-1 must be a multiple of nx-1", p.nx),
            ));
        }
        match &self.kernel.source {
            KernelSource::Exact => {}
            KernelSource::Perturbed { iota, .. } => nonnegative("kernel.source.iota", *iota)?,
            KernelSource::File { path } => {
                let full = self.resolve(path);
                if !full.is_file() {
                    return Err(Error::validation(
                        "kernel.source.path",
                        format!("{} does not exist", full.display()),
                    ));
                }
            }
        }

        let t = &self.trigger;
        positive("trigger.xi", t.xi)?;
        positive("trigger.eta", t.eta)?;
        for (name, s) in [("trigger.kappa1", t.kappa1), ("trigger.kappa2", t.kappa2), ("trigger.kappa3", t.kappa3)] {
            if let Setting::Value(v) = s {
                nonnegative(name, v)?;
            }
        }
        if let Setting::Value(v) = t.lambda_d {
            positive("trigger.lambda_d", v)?;
        }
        if !(t.m0.is_finite() && t.m0 < 0.0) {
            return Err(Error::validation("trigger.m0", format!("must be negative, got {}", t.m0)));
        }

        if let InitialCondition::Samples(s) = &self.initial.u {
            if s.len() != p.nx {
                return Err(Error::validation(
                    "initial.u",
                    format!("{} samples given for a {}-point grid", s.len(), p.nx),
                ));
            }
        }

        positive("run.horizon", self.run.horizon)?;
        if self.run.stride == 0 {
            return Err(Error::validation("run.stride", "must be at least 1"));
        }

        if let Some(sweep) = &self.sweep {
            if sweep.iota.is_empty() {
                return Err(Error::validation("sweep.iota", "empty sweep"));
            }
            for v in &sweep.iota {
                nonnegative("sweep.iota", *v)?;
            }
            if matches!(self.kernel.source, KernelSource::File { .. }) {
                return Err(Error::validation("sweep", "an iota sweep perturbs the exact kernel; use an exact source"));
            }
        }
        Ok(())
    }

    fn source(&self) -> KernelSource {
        match &self.kernel.source {
            KernelSource::File { path } => KernelSource::File { path: self.resolve(path) },
            other => other.clone(),
        }
    }

    /// Reaction profile sampled on the kernel grid.
    pub fn profile(&self) -> Result<ReactionProfile> {
        let n = self.kernel.n;
        match &self.plant.lambda {
            LambdaSpec::Family(f) => ReactionProfile::from_family(*f, n),
            LambdaSpec::Samples(s) => ReactionProfile::from_samples(s.clone())?.resample(n),
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.prepare_with(&self.source())
    }

    /// Builds kernels, resolves `"auto"` gains and collects the design report.
    pub fn prepare_with(&self, source: &KernelSource) -> Result<Prepared> {
        let p = &self.plant;
        let profile = self.profile()?;
        let kernels = provide_kernel(source, &profile, p.eps, p.q, self.kernel.n)?;
        let plant = PlantConfig::new(p.eps, p.q, profile.clone(), p.nx, p.dt)?;
        let u0 = self.initial.u.to_state(p.nx)?;
        let design = design(self, &profile, &kernels)?;
        let t = &self.trigger;
        let trigger = TriggerConfig {
            xi: t.xi,
            eta: t.eta,
            kappa1: design.kappas[0],
            kappa2: design.kappas[1],
            kappa3: design.kappas[2],
            lambda_d: design.lambda_d,
            m0: t.m0,
        };
        trigger.validate()?;
        Ok(Prepared {
            name: self.name.clone(),
            source_label: source.label(),
            profile,
            plant,
            kernels,
            trigger,
            design,
            u0,
            m_update: t.m_update,
        })
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be >= 0, got {v}")))
    }
}

/// Design quantities derived from the kernel and the trigger settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    pub epsilons: EpsilonConsts,
    pub kappa_min: [f64; 3],
    pub kappas: [f64; 3],
    pub kappa_admissible: [bool; 3],
    pub lambda_d: f64,
    /// `None` when the δ₀ bound is not positive.
    pub gain_params: Option<GainParams>,
    pub gain_params_error: Option<String>,
    pub lambda_d_admissible: Option<bool>,
    /// Weight of ‖ŵ‖² in V, from the κ's in use.
    pub r0: f64,
    pub wp: f64,
    pub iota: f64,
    pub dwell: DwellBound,
    pub assumption: AssumptionReport,
    pub theory: TheoryConstants,
}

fn design(s: &Scenario, profile: &ReactionProfile, kernels: &ProvidedKernels) -> Result<Design> {
    let p = &s.plant;
    let t = &s.trigger;
    let epsilons = epsilon_constants(&kernels.gain, profile, p.eps, p.q);
    let kappa_min = select_trigger_params(&epsilons, t.xi)?;
    let kappas = [
        t.kappa1.resolve(kappa_min[0]),
        t.kappa2.resolve(kappa_min[1]),
        t.kappa3.resolve(kappa_min[2]),
    ];
    let kappa_admissible = kappas_admissible(kappas, &epsilons, t.xi)?;
    let (q0, q1) = inverse_kernel_norms(&kernels.inverse);
    let wp = kernels.gain.wp();
    let iota = kernels.iota_estimate();
    let selected = select_gain_params(kappas, q0, q1, wp, p.eps, iota);
    let lambda_d = match (t.lambda_d, &selected) {
        (Setting::Value(v), _) => v,
        (Setting::Auto(_), Ok(g)) => g.lambda_d_min,
        (Setting::Auto(_), Err(e)) => {
            return Err(Error::Infeasible(format!("lambda_d = \"auto\" needs feasible gains: {e}")));
        }
    };
    debug_assert!(!t.lambda_d.is_auto() || selected.is_ok());
    let (gain_params, gain_params_error) = match selected {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Design {
        epsilons,
        kappa_min,
        kappas,
        kappa_admissible,
        lambda_d,
        lambda_d_admissible: gain_params.map(|g| lambda_d >= g.lambda_d_min),
        gain_params,
        gain_params_error,
        r0: lyapunov_weight(kappas, q0, q1, p.eps),
        wp,
        iota,
        dwell: dwell_time_bound(epsilons.eps1, t.xi, lambda_d, t.eta),
        assumption: check_assumption1(profile, p.q, p.eps),
        theory: theoretical_constants(iota, profile.lambda_bar(), p.eps, &kernels.inverse, t.eta),
    })
}

/// A scenario with kernels solved and gains resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub source_label: String,
    pub profile: ReactionProfile,
    pub plant: PlantConfig,
    pub kernels: ProvidedKernels,
    pub trigger: TriggerConfig,
    pub design: Design,
    pub u0: PlantState,
    pub m_update: MUpdate,
}

impl Prepared {
    pub fn run(&self, horizon: f64, mode: ControlMode, stride: usize) -> Result<Outcome> {
        let options = RunOptions {
            horizon,
            mode,
            stride,
            r0: self.design.r0,
            m_update: self.m_update,
            source_label: self.source_label.clone(),
        };
        let trace = run_closed_loop(&self.plant, &self.kernels, &self.trigger, &self.u0, &options)?;
        let summary = summarize(&self.name, &trace, &self.design)?;
        Ok(Outcome { trace, summary })
    }
}

pub struct Outcome {
    pub trace: SimTrace,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub source: String,
    pub iota_estimate: f64,
    pub horizon: f64,
    pub steps: usize,
    pub events: Option<EventStats>,
    pub tau: f64,
    pub min_dwell_over_tau: Option<f64>,
    pub gaps_below_tau: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Fitted after the first 10% of the horizon.
    pub norm_rate: Option<f64>,
    pub omega_rate: Option<f64>,
    pub m_max: f64,
    /// Number of consecutive event pairs with V(t_{j+1}) > V(t_j).
    pub v_increases_at_events: usize,
    pub design: Design,
}

pub fn summarize(name: &str, trace: &SimTrace, design: &Design) -> Result<Summary> {
    let horizon = trace.metadata.horizon;
    let window = FitWindow::after_transient(horizon, TRANSIENT_FRACTION);
    let events = if trace.events.is_empty() {
        None
    } else {
        Some(event_stats(trace)?)
    };
    let tau = design.dwell.tau;
    let gaps = trace.gaps();
    let event_v: Vec<f64> = trace.event_rows().map(|r| r.v).collect();
    Ok(Summary {
        name: name.to_string(),
        mode: trace.metadata.mode.clone(),
        source: trace.metadata.source.clone(),
        iota_estimate: trace.metadata.iota_estimate,
        horizon,
        steps: trace.steps,
        events,
        tau,
        min_dwell_over_tau: events.and_then(|e| e.min_dwell).map(|d| d / tau),
        gaps_below_tau: gaps.iter().filter(|g| **g < tau).count(),
        initial_norm: trace.rows[0].u_norm,
        final_norm: trace.final_row().u_norm,
        norm_rate: fit_decay_rate(&trace.series(|r| r.u_norm), window).ok(),
        omega_rate: fit_decay_rate(&trace.series(|r| r.omega), window).ok(),
        m_max: trace.rows.iter().map(|r| r.m).fold(f64::NEG_INFINITY, f64::max),
        v_increases_at_events: event_v.windows(2).filter(|w| w[1] > w[0]).count(),
        design: design.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

impl Summary {
    pub fn render(&self) -> String {
        let d = &self.design;
        let mut s = String::new();
        let _ = writeln!(s, "scenario        {} ({} mode, kernel {})", self.name, self.mode, self.source);
        let _ = writeln!(s, "iota_estimate   {:.6e}", self.iota_estimate);
        let _ = writeln!(
            s,
            "norm            {:.6e} -> {:.6e} (ratio {:.3e})",
            self.initial_norm,
            self.final_norm,
            self.final_norm / self.initial_norm
        );
        let _ = writeln!(s, "fitted rates    |u|: {}  omega: {}", opt(self.norm_rate), opt(self.omega_rate));
        match &self.events {
            Some(e) => {
                let _ = writeln!(
                    s,
                    "events          {} (update fraction {:.4e}), min dwell {}, mean dwell {}",
                    e.count,
                    e.update_fraction,
                    opt(e.min_dwell),
                    opt(e.mean_dwell)
                );
            }
            None => {
                let _ = writeln!(s, "events          none");
            }
        }
        let _ = writeln!(
            s,
            "dwell bound     tau = {:.6e}; min dwell / tau = {}; gaps below tau: {}",
            self.tau,
            opt(self.min_dwell_over_tau),
            self.gaps_below_tau
        );
        let _ = writeln!(s, "max m           {:.6e}", self.m_max);
        let _ = writeln!(s, "V rises at      {} event pairs", self.v_increases_at_events);
        let _ = writeln!(
            s,
            "assumption      q > lambda_max/(2 eps) + 1/2: {} (margin {:.4})",
            if d.assumption.pass { "holds" } else { "VIOLATED" },
            d.assumption.margin
        );
        s.push_str(&render_design(d));
        s
    }
}

pub fn render_design(d: &Design) -> String {
    let mut s = String::new();
    let e = &d.epsilons;
    let _ = writeln!(
        s,
        "epsilons        {:.6e} {:.6e} {:.6e} {:.6e}",
        e.eps1, e.eps2, e.eps3, e.eps4
    );
    let _ = writeln!(
        s,
        "kappa min       {:.6e} {:.6e} {:.6e}",
        d.kappa_min[0], d.kappa_min[1], d.kappa_min[2]
    );
    let _ = writeln!(
        s,
        "kappa used      {:.6e} {:.6e} {:.6e} (admissible: {:?})",
        d.kappas[0], d.kappas[1], d.kappas[2], d.kappa_admissible
    );
    match (&d.gain_params, &d.gain_params_error) {
        (Some(g), _) => {
            let _ = writeln!(
                s,
                "gains           r0 = {:.6e}, delta0 < {:.6e} (using {:.6e}), lambda_d >= {:.6e}",
                g.r0, g.delta0_bound, g.delta0, g.lambda_d_min
            );
        }
        (None, Some(err)) => {
            let _ = writeln!(s, "gains           {err}");
        }
        (None, None) => {}
    }
    let _ = writeln!(
        s,
        "lambda_d        {:.6e} (admissible: {})",
        d.lambda_d,
        d.lambda_d_admissible.map_or("unknown".to_string(), |b| b.to_string())
    );
    let t = &d.theory;
    let _ = writeln!(
        s,
        "theory          ln M = {:.4e}, ln Upsilon = {:.4e}, sigma* = {:.6e}, sigma = {:.6e}{}",
        t.m.ln,
        t.upsilon.ln,
        t.sigma_star,
        t.sigma,
        if t.vacuous { " (vacuous)" } else { "" }
    );
    let _ = writeln!(s, "inverse norms   q0 = {:.6e}, q1 = {:.6e}", t.q0, t.q1);
    s
}

/// One point of an ι sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub iota: f64,
    pub iota_estimate: f64,
    /// `ok`, or the error that ended the run.
    pub status: String,
    pub events: usize,
    pub min_dwell: Option<f64>,
    pub tau: f64,
    pub gaps_below_tau: usize,
    pub final_norm_ratio: f64,
    pub norm_rate: Option<f64>,
    pub omega_rate: Option<f64>,
    pub m_max: f64,
    pub v_increases_at_events: usize,
}

impl SweepRow {
    /// Ran to the horizon with a positive fitted Ω decay rate.
    pub fn stable(&self) -> bool {
        self.status == "ok" && self.omega_rate.is_some_and(|r| r > 0.0)
    }
}

/// Runs the scenario once per sweep amplitude on `workers` threads. Rows come
/// back in sweep order whatever the thread count.
pub fn run_sweep(s: &Scenario, mode: ControlMode, stride: usize, workers: usize) -> Result<Vec<SweepRow>> {
    let sweep = s
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep", "scenario has no [sweep] table"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        sweep
            .iota
            .par_iter()
            .enumerate()
            .map(|(index, &iota)| sweep_point(s, index, iota, sweep.seed, mode, stride))
            .collect()
    })
}

fn sweep_point(s: &Scenario, index: usize, iota: f64, seed: u64, mode: ControlMode, stride: usize) -> Result<SweepRow> {
    let prepared = s.prepare_with(&KernelSource::Perturbed { iota, seed })?;
    let base = SweepRow {
        index,
        iota,
        iota_estimate: prepared.kernels.iota_estimate(),
        status: "ok".to_string(),
        events: 0,
        min_dwell: None,
        tau: prepared.design.dwell.tau,
        gaps_below_tau: 0,
        final_norm_ratio: f64::NAN,
        norm_rate: None,
        omega_rate: None,
        m_max: f64::NAN,
        v_increases_at_events: 0,
    };
    match prepared.run(s.run.horizon, mode, stride) {
        Ok(out) => {
            let m = &out.summary;
            Ok(SweepRow {
                events: m.events.map_or(0, |e| e.count),
                min_dwell: m.events.and_then(|e| e.min_dwell),
                gaps_below_tau: m.gaps_below_tau,
                final_norm_ratio: m.final_norm / m.initial_norm,
                norm_rate: m.norm_rate,
                omega_rate: m.omega_rate,
                m_max: m.m_max,
                v_increases_at_events: m.v_increases_at_events,
                ..base
            })
        }
        Err(e) if e.is_numerical() => Ok(SweepRow {
            status: e.to_string(),
            ..base
        }),
        Err(e) => Err(e),
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "index,iota,iota_estimate,status,events,min_dwell,tau,gaps_below_tau,final_norm_ratio,norm_rate,omega_rate,m_max,v_increases_at_events\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},\"{}\",{},{},{},{},{},{},{},{},{}",
            r.index,
            r.iota,
            r.iota_estimate,
            r.status.replace('"', "'"),
            r.events,
            csv_opt(r.min_dwell),
            r.tau,
            r.gaps_below_tau,
            r.final_norm_ratio,
            csv_opt(r.norm_rate),
            csv_opt(r.omega_rate),
            r.m_max,
            r.v_increases_at_events
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
[plant]
eps = 1.0
q = 10.0
lambda = { family = "chebyshev", amplitude = 50.0, order = 8.0 }
nx = 51
dt = 1e-4
[kernel]
n = 101
[trigger]
xi = 55.0
eta = 9.775
kappa1 = 5.5e4
kappa2 = 758.0
kappa3 = 1240.0
lambda_d = 770.0
m0 = -5.0
[initial]
u = "cos_pi_x"
[run]
horizon = 2.0
"#;

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::from_toml(text, Path::new("test.toml"), PathBuf::new())
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Validation { field, .. } => field,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn parses_with_defaults() {
        let s = parse(BASE).unwrap();
        assert_eq!(s.kernel.source, KernelSource::Exact);
        assert_eq!(s.run.stride, 1);
        assert_eq!(s.run.mode, ControlMode::Event);
        assert_eq!(s.trigger.m_update, MUpdate::Exponential);
        assert_eq!(s.trigger.kappa2, Setting::Value(758.0));
        assert_eq!(s.stem(), "t");
        assert!(s.sweep.is_none());
    }

    #[test]
    fn auto_and_sources() {
        let text = BASE
            .replace("kappa1 = 5.5e4", "kappa1 = \"auto\"")
            .replace("n = 101", "n = 101\nsource = { type = \"perturbed\", iota = 0.01, seed = 3 }");
        let s = parse(&text).unwrap();
        assert_eq!(s.trigger.kappa1, Setting::AUTO);
        assert_eq!(s.kernel.source, KernelSource::Perturbed { iota: 0.01, seed: 3 });
        assert!(parse(&BASE.replace("kappa1 = 5.5e4", "kappa1 = \"manual\"")).is_err());
    }

    #[test]
    fn field_named_errors() {
        let e = parse(&BASE.replace("m0 = -5.0", "m0 = 1.0")).unwrap_err();
        assert_eq!(field_of(e), "trigger.m0");
        let e = parse(&BASE.replace("dt = 1e-4", "dt = 1e-3")).unwrap_err();
        assert_eq!(field_of(e), "plant.dt");
        let e = parse(&BASE.replace("n = 101", "n = 100")).unwrap_err();
        assert_eq!(field_of(e), "kernel.n");
        let e = parse(&BASE.replace("xi = 55.0", "xi = -1.0")).unwrap_err();
        assert_eq!(field_of(e), "trigger.xi");
        let e = parse(&BASE.replace("horizon = 2.0", "horizon = 0.0")).unwrap_err();
        assert_eq!(field_of(e), "run.horizon");
    }

    #[test]
    fn missing_and_unknown_keys() {
        let e = parse(&BASE.replace("xi = 55.0\n", "")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        assert!(e.to_string().contains("xi"), "{e}");
        let e = parse(&BASE.replace("eta = 9.775", "eta = 9.775\nzeta = 1.0")).unwrap_err();
        assert!(e.to_string().contains("zeta"), "{e}");
    }

    #[test]
    fn missing_kernel_file() {
        let text = BASE.replace("n = 101", "n = 101\nsource = { type = \"file\", path = \"nope.kgrid\" }");
        let e = parse(&text).unwrap_err();
        assert_eq!(field_of(e), "kernel.source.path");
    }

    #[test]
    fn sweep_table() {
        let text = format!("{BASE}\n[sweep]\niota = [0.0, 0.01]\n");
        let s = parse(&text).unwrap();
        assert_eq!(s.sweep.unwrap().iota, vec![0.0, 0.01]);
        let text = format!("{BASE}\n[sweep]\niota = [-0.1]\n");
        assert_eq!(field_of(parse(&text).unwrap_err()), "sweep.iota");
    }

    #[test]
    fn sampled_lambda_is_resampled() {
        let samples: Vec<String> = (0..11).map(|_| "2.0".to_string()).collect();
        let text = BASE.replace(
            "lambda = { family = \"chebyshev\", amplitude = 50.0, order = 8.0 }",
            &format!("lambda = [{}]", samples.join(", ")),
        );
        let s = parse(&text).unwrap();
        let p = s.profile().unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.samples().iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn zero_reaction_scenario_runs_quietly() {
        let text = BASE
            .replace("amplitude = 50.0", "amplitude = 0.0")
            .replace("horizon = 2.0", "horizon = 0.05");
        let prepared = parse(&text).unwrap().prepare().unwrap();
        assert!(prepared.kernels.gain.samples().iter().all(|v| v.abs() < 1e-12));
        let out = prepared.run(0.05, ControlMode::Event, 10).unwrap();
        assert_eq!(out.trace.events.len(), 1);
        assert!(out.summary.final_norm < out.summary.initial_norm);
    }
}
