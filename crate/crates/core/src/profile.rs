//! Spatially varying reaction coefficient λ(x) on [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form families that can be re-evaluated at any x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProfileFamily {
    /// λ(x) = value
    Constant { value: f64 },
    /// λ(x) = amplitude · cos(order · arccos x), a Chebyshev polynomial for
    /// integer orders.
    Chebyshev { amplitude: f64, order: f64 },
}

impl ProfileFamily {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ProfileFamily::Constant { value } => value,
            ProfileFamily::Chebyshev { amplitude, order } => amplitude * cheb(order, x),
        }
    }

    /// ∫₀ˣ λ(s) ds in closed form.
    pub fn integral(&self, x: f64) -> f64 {
        match *self {
            ProfileFamily::Constant { value } => value * x,
            ProfileFamily::Chebyshev { amplitude, order } => {
                amplitude * (cheb_antiderivative(order, x) - cheb_antiderivative(order, 0.0))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ProfileFamily::Constant { value } if !value.is_finite() => {
                Err(Error::validation("lambda.value", "must be finite"))
            }
            ProfileFamily::Chebyshev { amplitude, order } => {
                if !amplitude.is_finite() {
                    return Err(Error::validation("lambda.amplitude", "must be finite"));
                }
                if !(order.is_finite() && order >= 0.0) {
                    return Err(Error::validation("lambda.order", "must be finite and >= 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn cheb(order: f64, x: f64) -> f64 {
    (order * x.clamp(-1.0, 1.0).acos()).cos()
}

fn cheb_antiderivative(order: f64, x: f64) -> f64 {
    if (order - 1.0).abs() < 1e-14 {
        0.5 * x * x
    } else {
        cheb(order + 1.0, x) / (2.0 * (order + 1.0)) - cheb(order - 1.0, x) / (2.0 * (order - 1.0))
    }
}

/// λ sampled on a uniform grid over [0, 1], optionally backed by a closed form.
///
/// Off-grid evaluation uses the closed form when present and piecewise cubic
/// Lagrange interpolation of the samples otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionProfile {
    samples: Vec<f64>,
    family: Option<ProfileFamily>,
    /// ∫₀^{x_k} of the interpolant, per node.
    cumulative: Vec<f64>,
}

impl ReactionProfile {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::validation("lambda.samples", "need at least 3 samples"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation("lambda.samples", format!("sample {i} is not finite")));
        }
        let cumulative = spline_cumulative(&samples);
        Ok(ReactionProfile {
            samples,
            family: None,
            cumulative,
        })
    }

    pub fn from_family(family: ProfileFamily, n: usize) -> Result<Self> {
        family.validate()?;
        if n < 3 {
            return Err(Error::validation("n", "need at least 3 samples"));
        }
        let h = 1.0 / (n - 1) as f64;
        let samples: Vec<f64> = (0..n).map(|i| family.eval(i as f64 * h)).collect();
        let cumulative = (0..n).map(|i| family.integral(i as f64 * h)).collect();
        Ok(ReactionProfile {
            samples,
            family: Some(family),
            cumulative,
        })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::from_family(ProfileFamily::Constant { value }, n)
    }

    pub fn chebyshev(amplitude: f64, order: f64, n: usize) -> Result<Self> {
        Self::from_family(ProfileFamily::Chebyshev { amplitude, order }, n)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn family(&self) -> Option<ProfileFamily> {
        self.family
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

    /// max λ over the samples.
    pub fn lambda_max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// max |λ| over the samples.
    pub fn lambda_bar(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.family {
            Some(f) => f.eval(x),
            None => cubic_interpolate(&self.samples, x),
        }
    }

    /// ∫₀ˣ λ(s) ds.
    pub fn integral(&self, x: f64) -> f64 {
        if let Some(f) = self.family {
            return f.integral(x);
        }
        let n = self.len();
        let h = self.step();
        let x = x.clamp(0.0, 1.0);
        let k = ((x / h).floor() as usize).min(n - 2);
        let left = k as f64 * h;
        self.cumulative[k] + spline_segment_integral(&self.samples, k, 0.0, (x - left) / h) * h
    }

    /// Same profile on an `n`-point grid.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n == self.len() {
            return Ok(self.clone());
        }
        match self.family {
            Some(f) => Self::from_family(f, n),
            None => {
                if n < 3 {
                    return Err(Error::validation("n", "need at least 3 samples"));
                }
                let h = 1.0 / (n - 1) as f64;
                Self::from_samples((0..n).map(|i| self.eval(i as f64 * h)).collect())
            }
        }
    }
}

/// Piecewise cubic Lagrange interpolation of uniform samples over [0, 1].
pub(crate) fn cubic_interpolate(samples: &[f64], x: f64) -> f64 {
    let n = samples.len();
    let t = x.clamp(0.0, 1.0) * (n - 1) as f64;
    let k = (t.floor() as usize).min(n - 2);
    let start = window_for_interval(k, n);
    lagrange_eval(&samples[start..start + stencil_len(n)], t - start as f64)
}

fn stencil_len(n: usize) -> usize {
    n.min(4)
}

/// First node of the interpolation window used on interval `[k, k+1]`.
fn window_for_interval(k: usize, n: usize) -> usize {
    let w = stencil_len(n);
    k.saturating_sub(1).min(n - w)
}

/// Lagrange polynomial through `ys` at nodes 0, 1, ..., evaluated at `t`.
fn lagrange_eval(ys: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for (i, yi) in ys.iter().enumerate() {
        let mut basis = 1.0;
        for j in 0..ys.len() {
            if i != j {
                basis *= (t - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += yi * basis;
    }
    acc
}

/// ∫ of the interval-`k` interpolant over local coordinates `[a, b]` ⊂ [0, 1],
/// in units of the grid step. Two-point Gauss is exact for cubics.
fn spline_segment_integral(samples: &[f64], k: usize, a: f64, b: f64) -> f64 {
    let n = samples.len();
    let start = window_for_interval(k, n);
    let ys = &samples[start..start + stencil_len(n)];
    let offset = (k - start) as f64;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let g = half / 3f64.sqrt();
    half * (lagrange_eval(ys, offset + mid - g) + lagrange_eval(ys, offset + mid + g))
}

fn spline_cumulative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    for k in 0..n - 1 {
        let prev = out[k];
        out.push(prev + h * spline_segment_integral(samples, k, 0.0, 1.0));
    }
    out
}
