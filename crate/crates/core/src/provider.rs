//! Interchangeable sources of gain kernels, approximation metrics between an
//! approximate kernel and the exact one, and the closed-form constants of the
//! stability estimates.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::kgrid::KgridFile;
use crate::kernel::{
    gain_from_kernel, kernel_sup_bound, solve_inverse_kernel, solve_kernel, GainTable, KernelGrid, KernelKind,
    LogBound,
};
use crate::profile::ReactionProfile;
use crate::{fd, quad};

/// Tolerance for matching `.kgrid` metadata against a scenario.
pub const METADATA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSource {
    /// The numerical Goursat solution.
    Exact,
    /// A direct kernel read from a `.kgrid` file.
    File { path: PathBuf },
    /// The exact kernel plus `iota · φ`; see [`perturbation`].
    Perturbed { iota: f64, seed: u64 },
}

impl KernelSource {
    pub fn label(&self) -> String {
        match self {
            KernelSource::Exact => "exact".to_string(),
            KernelSource::File { path } => format!("file:{}", path.display()),
            KernelSource::Perturbed { iota, seed } => format!("perturbed(iota={iota},seed={seed})"),
        }
    }
}

/// Kernels ready for the controller.
#[derive(Debug, Clone)]
pub struct ProvidedKernels {
    pub direct: KernelGrid,
    pub inverse: KernelGrid,
    pub gain: GainTable,
    /// Metrics against the exact kernel; `None` for the exact source.
    pub approximation: Option<ApproxReport>,
}

impl ProvidedKernels {
    /// ι used by the parameter formulas: 0 for the exact source.
    pub fn iota_estimate(&self) -> f64 {
        self.approximation.map_or(0.0, |a| a.iota_estimate)
    }
}

pub fn provide_kernel(
    source: &KernelSource,
    profile: &ReactionProfile,
    eps: f64,
    q: f64,
    n: usize,
) -> Result<ProvidedKernels> {
    let profile = profile.resample(n)?;
    let (direct, approximation) = match source {
        KernelSource::Exact => (solve_kernel(&profile, eps, n)?, None),
        KernelSource::Perturbed { iota, .. } => {
            if !(iota.is_finite() && *iota >= 0.0) {
                return Err(Error::validation("iota", "must be finite and >= 0"));
            }
            let exact = solve_kernel(&profile, eps, n)?;
            let hat = perturb(&exact, *iota);
            let report = approximation_metrics(&exact, &hat, &profile, eps)?;
            (hat, Some(report))
        }
        KernelSource::File { path } => {
            let hat = load_checked(path, &profile, eps, n)?;
            let exact = solve_kernel(&profile, eps, n)?;
            let report = approximation_metrics(&exact, &hat, &profile, eps)?;
            (hat, Some(report))
        }
    };
    let inverse = solve_inverse_kernel(&direct)?;
    let gain = gain_from_kernel(&direct, q, eps, &profile)?;
    Ok(ProvidedKernels {
        direct,
        inverse,
        gain,
        approximation,
    })
}

fn load_checked(path: &Path, profile: &ReactionProfile, eps: f64, n: usize) -> Result<KernelGrid> {
    let file = KgridFile::read(path)?;
    if file.kind != KernelKind::Direct {
        return Err(Error::Config(format!("{}: expected a direct kernel", path.display())));
    }
    if file.n != n {
        return Err(Error::Config(format!(
            "{}: grid has n = {}, scenario expects {n}",
            path.display(),
            file.n
        )));
    }
    if (file.eps - eps).abs() > METADATA_TOLERANCE {
        return Err(Error::Config(format!(
            "{}: eps = {} does not match scenario eps = {eps}",
            path.display(),
            file.eps
        )));
    }
    let worst = file
        .lambda_samples
        .iter()
        .zip(profile.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(worst <= METADATA_TOLERANCE) {
        return Err(Error::Config(format!(
            "{}: lambda samples differ from the scenario profile by {worst:e}",
            path.display()
        )));
    }
    file.to_grid()
}

/// Writes `kernel` as a `.kgrid` file with the scenario metadata.
pub fn export_kernel(path: &Path, kernel: &KernelGrid, profile: &ReactionProfile, eps: f64, q: f64) -> Result<()> {
    let lambda = profile.resample(kernel.n())?.samples().to_vec();
    KgridFile::new(kernel, eps, q, lambda).write(path)
}

/// The fixed perturbation shape φ(x, y) = sin(2πx)·cos(πy) on the grid,
/// scaled to grid sup 1.
pub fn perturbation(n: usize) -> KernelGrid {
    let raw = KernelGrid::from_fn(n, KernelKind::Direct, |x, y| (2.0 * PI * x).sin() * (PI * y).cos());
    let sup = raw.sup_norm();
    if sup > 0.0 {
        raw.scaled(1.0 / sup)
    } else {
        raw
    }
}

/// `k + iota · φ`.
pub fn perturb(kernel: &KernelGrid, iota: f64) -> KernelGrid {
    let phi = perturbation(kernel.n());
    let values = kernel
        .values()
        .iter()
        .zip(phi.values())
        .map(|(k, p)| k + iota * p)
        .collect();
    KernelGrid::from_values(kernel.n(), KernelKind::Direct, values).expect("same shape")
}

/// Distances between an approximate kernel k̂ and the exact kernel k.
///
/// Derivatives are grid finite differences, so every field is a lower bound
/// on the corresponding sup over the continuous triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxReport {
    /// sup |k − k̂|
    pub sup_err: f64,
    /// sup |δ_k0|, δ_k0(x) = −2ε d/dx k̃(x, x)
    pub sup_delta_k0: f64,
    /// sup |δ_k1|, δ_k1 = −ε k̃_xx + ε k̃_yy + λ(y) k̃
    pub sup_delta_k1: f64,
    /// sup over nodes of |k̃| + |δ_k0|/ε + |δ_k1|/ε
    pub lemma1_composite: f64,
    pub iota_estimate: f64,
}

pub fn approximation_metrics(
    k_exact: &KernelGrid,
    k_hat: &KernelGrid,
    profile: &ReactionProfile,
    eps: f64,
) -> Result<ApproxReport> {
    if k_exact.n() != k_hat.n() {
        return Err(Error::validation(
            "k_hat",
            format!("grid sizes differ ({} vs {})", k_exact.n(), k_hat.n()),
        ));
    }
    if k_exact.kind() != k_hat.kind() {
        return Err(Error::validation("k_hat", "kernel kinds differ"));
    }
    if k_exact.n() < fd::WINDOW {
        return Err(Error::validation("n", "need at least 5 points per axis"));
    }
    if !(eps > 0.0) {
        return Err(Error::validation("eps", "must be positive"));
    }
    let diff = k_exact.difference(k_hat)?;
    let n = diff.n();
    let h = diff.step();

    let mut sup_err: f64 = 0.0;
    let mut sup_delta_k0: f64 = 0.0;
    let mut sup_delta_k1: f64 = 0.0;
    let mut composite: f64 = 0.0;

    for i in 0..n {
        for j in 0..=i {
            let y = j as f64 * h;
            let kt = diff.get(i, j);
            let mut summand = kt.abs();
            sup_err = sup_err.max(kt.abs());

            if i == j {
                if let Some(dtrace) = diff.diagonal_trace_derivative(i) {
                    let d0 = -2.0 * eps * dtrace;
                    sup_delta_k0 = sup_delta_k0.max(d0.abs());
                    summand += d0.abs() / eps;
                }
            }
            if let (Some(kxx), Some(kyy)) = (diff.dx_along_column(i, j, 2), diff.dy(i, j, 2)) {
                let d1 = -eps * kxx + eps * kyy + profile.eval(y) * kt;
                sup_delta_k1 = sup_delta_k1.max(d1.abs());
                summand += d1.abs() / eps;
            }
            composite = composite.max(summand);
        }
    }

    Ok(ApproxReport {
        sup_err,
        sup_delta_k0,
        sup_delta_k1,
        lemma1_composite: composite,
        iota_estimate: composite,
    })
}

/// Constants of the continuous-time and event-triggered stability estimates.
///
/// The exponentially large ones are carried in log domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    /// (2λ̄/ε)e^{4λ̄/ε}
    pub kernel_bound: LogBound,
    /// (B + ι) e^{B + ι} with B the kernel bound
    pub inverse_bound: LogBound,
    /// Overshoot coefficient of the continuous-time norm estimate.
    pub m: LogBound,
    /// Overshoot coefficient of the event-triggered Ω estimate.
    pub upsilon: LogBound,
    pub delta_star: f64,
    pub sigma_star: f64,
    /// min(η, σ*)
    pub sigma: f64,
    /// σ* ≤ 0: the decay estimate says nothing.
    pub vacuous: bool,
    /// 2 ∫₀¹ l̂(1, y)² dy
    pub q0: f64,
    /// (1 + (∫∫ l̂²)^{1/2})²
    pub q1: f64,
}

/// ln(1 + eˣ) without overflow.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn theoretical_constants(
    iota: f64,
    lambda_bar: f64,
    eps: f64,
    inverse_kernel: &KernelGrid,
    eta: f64,
) -> TheoryConstants {
    let (q0, q1) = inverse_kernel_norms(inverse_kernel);

    let kernel_bound = kernel_sup_bound(lambda_bar, eps);
    let b = kernel_bound.ln.exp();
    let shifted = b + iota;
    // ln[(B + ι) e^{B + ι}]
    let ln_inverse = shifted.ln() + shifted;
    let inverse_bound = LogBound::from_ln(ln_inverse);
    let l = inverse_bound.ln.exp();

    let m = LogBound::from_ln((iota + b).ln_1p() + ln_1p_exp(ln_inverse));
    let upsilon = LogBound::from_ln((shifted * shifted).ln_1p() + ln_1p_exp(2.0 * ln_inverse));

    let (delta_star, sigma_star) = if iota == 0.0 {
        (0.0, eps / 8.0)
    } else {
        (
            2.0 * iota * (1.0 + l) + eps * iota * (0.5 * q0 + 1.25),
            eps / 8.0 - 4.0 * iota * (1.0 + l) - eps * iota * (2.0 * l * l + 2.5),
        )
    };

    TheoryConstants {
        kernel_bound,
        inverse_bound,
        m,
        upsilon,
        delta_star,
        sigma_star,
        sigma: eta.min(sigma_star),
        vacuous: !(sigma_star > 0.0),
        q0,
        q1,
    }
}

/// (q₀, q₁) of an inverse kernel by trapezoid quadrature.
pub fn inverse_kernel_norms(inverse: &KernelGrid) -> (f64, f64) {
    let n = inverse.n();
    let h = inverse.step();
    let last_row: Vec<f64> = (0..n).map(|j| inverse.get(n - 1, j).powi(2)).collect();
    let q0 = 2.0 * quad::trapezoid(&last_row, h);
    let inner: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..=i).map(|j| inverse.get(i, j).powi(2)).collect();
            quad::trapezoid(&row, h)
        })
        .collect();
    let q1 = (1.0 + quad::trapezoid(&inner, h).sqrt()).powi(2);
    (q0, q1)
}
