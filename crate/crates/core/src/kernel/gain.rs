//! Boundary feedback gain K(y) = ℘ k(1, y) + k_x(1, y).

use crate::error::{Error, Result};
use crate::fd;
use crate::profile::{cubic_interpolate, ReactionProfile};

use super::{KernelGrid, KernelKind};

/// Gain samples on a uniform y-grid, with the derivative data the trigger
/// constants need.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    samples: Vec<f64>,
    k_at_1: f64,
    dk_at_0: f64,
    dk_at_1: f64,
    d2k: Vec<f64>,
    wp: f64,
}

impl GainTable {
    /// Builds a table from gain samples, differentiating them numerically.
    pub fn from_samples(samples: Vec<f64>, wp: f64) -> Result<Self> {
        if samples.len() < fd::WINDOW {
            return Err(Error::validation(
                "gain.samples",
                format!("need at least {} samples", fd::WINDOW),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("gain.samples", "gain samples must be finite"));
        }
        let h = 1.0 / (samples.len() - 1) as f64;
        let last = samples.len() - 1;
        Ok(GainTable {
            k_at_1: samples[last],
            dk_at_0: fd::derivative(&samples, h, 0, 1),
            dk_at_1: fd::derivative(&samples, h, last, 1),
            d2k: fd::derivative_all(&samples, h, 2),
            samples,
            wp,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.samples.len() - 1) as f64
    }

    /// K(1)
    pub fn k_at_1(&self) -> f64 {
        self.k_at_1
    }

    /// K′(0)
    pub fn dk_at_0(&self) -> f64 {
        self.dk_at_0
    }

    /// K′(1)
    pub fn dk_at_1(&self) -> f64 {
        self.dk_at_1
    }

    /// K″ at every sample.
    pub fn d2k(&self) -> &[f64] {
        &self.d2k
    }

    /// ℘ = q − 1/(2ε) ∫₀¹ λ
    pub fn wp(&self) -> f64 {
        self.wp
    }

    pub fn eval(&self, y: f64) -> f64 {
        cubic_interpolate(&self.samples, y)
    }

    /// The same gain on an `m`-point grid. Endpoint derivative data is kept
    /// from the finer source; `K″` is interpolated.
    pub fn resample(&self, m: usize) -> Result<Self> {
        if m == self.len() {
            return Ok(self.clone());
        }
        if m < 2 {
            return Err(Error::validation("n", "need at least 2 points"));
        }
        let h = 1.0 / (m - 1) as f64;
        let samples = (0..m).map(|i| self.eval(i as f64 * h)).collect();
        let d2k = (0..m).map(|i| cubic_interpolate(&self.d2k, i as f64 * h)).collect();
        Ok(GainTable {
            samples,
            k_at_1: self.k_at_1,
            dk_at_0: self.dk_at_0,
            dk_at_1: self.dk_at_1,
            d2k,
            wp: self.wp,
        })
    }
}

pub fn gain_from_kernel(kernel: &KernelGrid, q: f64, eps: f64, profile: &ReactionProfile) -> Result<GainTable> {
    if kernel.kind() != KernelKind::Direct {
        return Err(Error::validation("kernel.kind", "expected a direct kernel"));
    }
    if !(eps > 0.0) {
        return Err(Error::validation("eps", "must be positive"));
    }
    let n = kernel.n();
    if n < 9 {
        return Err(Error::validation("n", "gain derivatives need at least 9 points per axis"));
    }
    let wp = q - profile.integral(1.0) / (2.0 * eps);
    let last = n - 1;
    let samples = (0..n)
        .map(|j| {
            let kx = kernel.dx(last, j).expect("stencil fits for n >= 9");
            wp * kernel.get(last, j) + kx
        })
        .collect();
    GainTable::from_samples(samples, wp)
}
