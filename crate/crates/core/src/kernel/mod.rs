//! Backstepping kernels on the triangle 0 ≤ y ≤ x ≤ 1.
//!
//! The direct kernel `k` solves the Goursat problem
//!
//! ```text
//! k_xx − k_yy = λ(y)/ε · k,   k_y(x, 0) = 0,   k(x, x) = −1/(2ε) ∫₀ˣ λ
//! ```
//!
//! and the inverse kernel `l` is recovered from it through the Volterra
//! identity `l(x,y) = k(x,y) + ∫_y^x k(x,ξ) l(ξ,y) dξ`.

mod bounds;
mod gain;
mod inverse;
pub mod kgrid;
mod residual;
mod solver;

pub use bounds::{check_assumption1, kernel_sup_bound, AssumptionReport, LogBound, Severity};
pub use gain::{gain_from_kernel, GainTable};
pub use inverse::solve_inverse_kernel;
pub use residual::{kernel_residual, Located, ResidualReport};
pub use solver::{solve_kernel, solve_kernel_with, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Direct,
    Inverse,
}

/// A kernel sampled on a uniform `n × n` grid, lower triangle only.
///
/// Entry `(i, j)` holds the kernel at `(x_i, y_j)` with `x_i = i/(n−1)`;
/// entries with `j > i` are kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    n: usize,
    values: Vec<f64>,
    kind: KernelKind,
}

impl KernelGrid {
    pub fn zeros(n: usize, kind: KernelKind) -> Self {
        KernelGrid {
            n,
            values: vec![0.0; n * n],
            kind,
        }
    }

    /// Samples `f(x, y)` on the triangle.
    pub fn from_fn<F>(n: usize, kind: KernelKind, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut grid = Self::zeros(n, kind);
        let h = grid.step();
        for i in 0..n {
            for j in 0..=i {
                grid.values[i * n + j] = f(i as f64 * h, j as f64 * h);
            }
        }
        grid
    }

    /// Builds a grid from a row-major `n × n` array; the strict upper
    /// triangle is cleared.
    pub fn from_values(n: usize, kind: KernelKind, mut values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("n", "kernel grids need at least 2 points per axis"));
        }
        if values.len() != n * n {
            return Err(Error::validation(
                "values",
                format!("expected {} entries, found {}", n * n, values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("values", "kernel values must be finite"));
        }
        for i in 0..n {
            for j in i + 1..n {
                values[i * n + j] = 0.0;
            }
        }
        Ok(KernelGrid { n, values, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i < self.n);
        self.values[i * self.n + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i < self.n);
        self.values[i * self.n + j] = v;
    }

    /// Grid sup norm. A lower bound on the sup of the underlying function.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        KernelGrid {
            n: self.n,
            values: self.values.iter().map(|v| alpha * v).collect(),
            kind: self.kind,
        }
    }

    /// Entrywise `self − other`.
    pub fn difference(&self, other: &KernelGrid) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Config(format!(
                "kernel grids differ in size ({} vs {})",
                self.n, other.n
            )));
        }
        Ok(KernelGrid {
            n: self.n,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            kind: self.kind,
        })
    }

    /// Every `stride`-th node, for transferring to a coarser commensurate grid.
    pub fn subsample(&self, m: usize) -> Result<Self> {
        if m < 2 || !(self.n - 1).is_multiple_of(m - 1) {
            return Err(Error::Config(format!(
                "kernel grid with {} points is not commensurate with {} points",
                self.n, m
            )));
        }
        let stride = (self.n - 1) / (m - 1);
        let mut out = KernelGrid::zeros(m, self.kind);
        for i in 0..m {
            for j in 0..=i {
                out.set(i, j, self.get(i * stride, j * stride));
            }
        }
        Ok(out)
    }

    /// `order`-th derivative along x at fixed column `j`.
    pub fn dx_along_column(&self, i: usize, j: usize, order: usize) -> Option<f64> {
        fd::derivative_in(|r| self.get(r, j), i, j, self.n - 1, self.step(), order)
    }

    /// `order`-th derivative along y within row `i`.
    pub fn dy(&self, i: usize, j: usize, order: usize) -> Option<f64> {
        fd::derivative_in(|c| self.get(i, c), j, 0, i, self.step(), order)
    }

    /// Derivative along the direction (1, 1), i.e. `k_x + k_y`, through node `(i, j)`.
    pub fn d_diagonal(&self, i: usize, j: usize) -> Option<f64> {
        let offset = i - j;
        fd::derivative_in(|p| self.get(offset + p, p), j, 0, self.n - 1 - offset, self.step(), 1)
    }

    /// First x-derivative at `(i, j)`. Falls back to `(k_x + k_y) − k_y` near
    /// the diagonal where a column window does not fit.
    pub fn dx(&self, i: usize, j: usize) -> Option<f64> {
        self.dx_along_column(i, j, 1)
            .or_else(|| Some(self.d_diagonal(i, j)? - self.dy(i, j, 1)?))
    }

    /// d/dx of the trace `k(x, x)` at node `i`.
    pub fn diagonal_trace_derivative(&self, i: usize) -> Option<f64> {
        self.d_diagonal(i, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_access_on_polynomial() {
        let f = |x: f64, y: f64| x * x * y + 0.5 * y * y - x.powi(3);
        let g = KernelGrid::from_fn(21, KernelKind::Direct, f);
        let h = g.step();
        for i in [20, 15, 10] {
            for j in [0, 3, i - 2, i] {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let kx = 2.0 * x * y - 3.0 * x * x;
                assert!((g.dx(i, j).unwrap() - kx).abs() < 1e-10, "dx at ({i},{j})");
                let ky = x * x + y;
                assert!((g.dy(i, j, 1).unwrap() - ky).abs() < 1e-10, "dy at ({i},{j})");
            }
            let trace = 3.0 * (i as f64 * h).powi(2) + (i as f64 * h) - 3.0 * (i as f64 * h).powi(2);
            assert!((g.diagonal_trace_derivative(i).unwrap() - trace).abs() < 1e-10);
        }
    }

    #[test]
    fn from_values_clears_upper_triangle() {
        let g = KernelGrid::from_values(2, KernelKind::Direct, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.values(), &[1.0, 0.0, 3.0, 4.0]);
        assert!(KernelGrid::from_values(2, KernelKind::Direct, vec![1.0]).is_err());
    }

    #[test]
    fn subsample_requires_commensurate_grids() {
        let g = KernelGrid::from_fn(11, KernelKind::Direct, |x, y| x + y);
        let s = g.subsample(6).unwrap();
        assert_eq!(s.get(5, 5), 2.0);
        assert!(g.subsample(4).is_err());
    }
}
