//! Discrete residuals of the kernel equations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd;
use crate::profile::ReactionProfile;

/// Centred seven-point (sixth-order) second derivatives for the PDE residual.
const PDE_STENCIL: usize = 7;

use super::{KernelGrid, KernelKind};

/// A sup value together with the node where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Located {
    pub value: f64,
    pub x: f64,
    pub y: f64,
}

impl Located {
    fn zero() -> Self {
        Located {
            value: 0.0,
            x: 0.0,
            y: 0.0,
        }
    }

    fn offer(&mut self, value: f64, x: f64, y: f64) {
        if value.abs() > self.value || value.is_nan() {
            *self = Located {
                value: value.abs(),
                x,
                y,
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `k_xx − k_yy − λ(y)/ε k` (direct) or `l_xx − l_yy + λ(x)/ε l` (inverse)
    /// at nodes where centred seven-point stencils fit.
    pub pde: Located,
    /// `k(x, x) + 1/(2ε) ∫₀ˣ λ`.
    pub diagonal: Located,
    /// `k_y(x, 0)`, one-sided stencil.
    pub y0_derivative: Located,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.pde.value.max(self.diagonal.value).max(self.y0_derivative.value)
    }
}

pub fn kernel_residual(kernel: &KernelGrid, profile: &ReactionProfile, eps: f64) -> Result<ResidualReport> {
    let n = kernel.n();
    if n < fd::WINDOW {
        return Err(Error::validation("n", "insufficient stencil: need at least 5 points per axis"));
    }
    if !(eps > 0.0) {
        return Err(Error::validation("eps", "must be positive"));
    }
    let h = kernel.step();
    let lambda: Vec<f64> = (0..n).map(|i| profile.eval(i as f64 * h)).collect();

    let mut pde = Located::zero();
    let half = PDE_STENCIL / 2;
    for i in 2 * half..n.saturating_sub(half) {
        for j in half..=i - half {
            let along_x = |r: usize| kernel.get(r, j);
            let along_y = |c: usize| kernel.get(i, c);
            let kxx = fd::derivative_in_sized(along_x, i, j, n - 1, h, 2, PDE_STENCIL).expect("interior window");
            let kyy = fd::derivative_in_sized(along_y, j, 0, i, h, 2, PDE_STENCIL).expect("interior window");
            let reaction = match kernel.kind() {
                KernelKind::Direct => -lambda[j],
                KernelKind::Inverse => lambda[i],
            };
            let r = kxx - kyy + reaction / eps * kernel.get(i, j);
            pde.offer(r, i as f64 * h, j as f64 * h);
        }
    }

    let mut diagonal = Located::zero();
    for i in 0..n {
        let x = i as f64 * h;
        let r = kernel.get(i, i) + profile.integral(x) / (2.0 * eps);
        diagonal.offer(r, x, x);
    }

    let mut y0_derivative = Located::zero();
    for i in 4..n {
        let r = kernel.dy(i, 0, 1).expect("row window");
        y0_derivative.offer(r, i as f64 * h, 0.0);
    }

    Ok(ResidualReport {
        pde,
        diagonal,
        y0_derivative,
    })
}
