//! Goursat solver for the direct backstepping kernel.
//!
//! With ξ = x + y, η = x − y and G(ξ, η) = k(x, y), evenly extended to
//! −x ≤ y ≤ x, the kernel problem becomes
//!
//! ```text
//! G(ξ, η) = f(ξ/2) + f(η/2) + 1/(4ε) ∫₀^ξ ∫₀^η λ(|s − t|/2) G(s, t) dt ds
//! ```
//!
//! with f(x) = −1/(2ε) ∫₀ˣ λ. The even extension makes `k_y(x, 0) = 0`
//! automatic. The integral equation is discretised on a characteristic
//! lattice with the product trapezoid rule and solved by Picard iteration;
//! two lattice spacings are combined by Richardson extrapolation.

use crate::error::{Error, Result};
use crate::profile::ReactionProfile;

use super::{KernelGrid, KernelKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Picard stops once the sup change is below `tolerance · max(1, sup|G|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Combine the h and h/2 lattices to cancel the O(h²) error term.
    pub richardson: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-12,
            max_iterations: 200,
            richardson: true,
        }
    }
}

pub fn solve_kernel(profile: &ReactionProfile, eps: f64, n: usize) -> Result<KernelGrid> {
    solve_kernel_with(profile, eps, n, SolverOptions::default())
}

pub fn solve_kernel_with(
    profile: &ReactionProfile,
    eps: f64,
    n: usize,
    options: SolverOptions,
) -> Result<KernelGrid> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::validation("eps", "must be positive and finite"));
    }
    if n < 3 {
        return Err(Error::validation("n", "need at least 3 grid points"));
    }

    let coarse = Lattice::solve(profile, eps, n, 1, options)?;
    if !options.richardson {
        return Ok(coarse.to_grid(n));
    }
    let fine = Lattice::solve(profile, eps, n, 2, options)?;

    let mut grid = KernelGrid::zeros(n, KernelKind::Direct);
    for i in 0..n {
        for j in 0..=i {
            let c = coarse.at_node(i, j);
            let f = fine.at_node(i, j);
            grid.set(i, j, (4.0 * f - c) / 3.0);
        }
    }
    Ok(grid)
}

/// G on the square lattice `(a, b)`, `a + b ≤ cells`, spacing `s`.
struct Lattice {
    cells: usize,
    refine: usize,
    g: Vec<f64>,
}

impl Lattice {
    fn solve(
        profile: &ReactionProfile,
        eps: f64,
        n: usize,
        refine: usize,
        options: SolverOptions,
    ) -> Result<Self> {
        let cells = 2 * refine * (n - 1);
        let s = 1.0 / (refine * (n - 1)) as f64;
        let side = cells + 1;
        let idx = |a: usize, b: usize| a * side + b;

        // Goursat data along both characteristics, f(ξ/2) for ξ = a·s.
        let trace: Vec<f64> = (0..=cells)
            .map(|a| -profile.integral(0.5 * a as f64 * s) / (2.0 * eps))
            .collect();
        // λ at the distance |a − b|·s/2 from the y = 0 axis.
        let reaction: Vec<f64> = (0..=cells)
            .map(|d| profile.eval(0.5 * d as f64 * s) / (4.0 * eps))
            .collect();

        let mut base = vec![0.0; side * side];
        for a in 0..=cells {
            for b in 0..=cells - a {
                base[idx(a, b)] = trace[a] + trace[b];
            }
        }

        let quarter = 0.25 * s * s;
        let mut g = base.clone();
        let mut forcing = vec![0.0; side * side];
        let mut integral = vec![0.0; side * side];
        let mut change = f64::INFINITY;

        for _ in 0..options.max_iterations {
            for a in 0..=cells {
                for b in 0..=cells - a {
                    forcing[idx(a, b)] = reaction[a.abs_diff(b)] * g[idx(a, b)];
                }
            }
            for a in 1..=cells {
                for b in 1..=cells - a {
                    integral[idx(a, b)] = integral[idx(a - 1, b)] + integral[idx(a, b - 1)]
                        - integral[idx(a - 1, b - 1)]
                        + quarter
                            * (forcing[idx(a, b)]
                                + forcing[idx(a - 1, b)]
                                + forcing[idx(a, b - 1)]
                                + forcing[idx(a - 1, b - 1)]);
                }
            }

            change = 0.0;
            let mut scale: f64 = 1.0;
            for a in 0..=cells {
                for b in 0..=cells - a {
                    let k = idx(a, b);
                    let next = base[k] + integral[k];
                    change = change.max((next - g[k]).abs());
                    scale = scale.max(next.abs());
                    g[k] = next;
                }
            }
            if !change.is_finite() {
                break;
            }
            if change <= options.tolerance * scale {
                return Ok(Lattice { cells, refine, g });
            }
        }

        Err(Error::NonConvergence {
            what: "kernel Picard iteration",
            iterations: options.max_iterations,
            residual: change,
        })
    }

    fn at_node(&self, i: usize, j: usize) -> f64 {
        let a = self.refine * (i + j);
        let b = self.refine * (i - j);
        self.g[a * (self.cells + 1) + b]
    }

    fn to_grid(&self, n: usize) -> KernelGrid {
        let mut grid = KernelGrid::zeros(n, KernelKind::Direct);
        for i in 0..n {
            for j in 0..=i {
                grid.set(i, j, self.at_node(i, j));
            }
        }
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reaction_gives_zero_kernel() {
        let p = ReactionProfile::constant(0.0, 11).unwrap();
        let k = solve_kernel(&p, 0.7, 11).unwrap();
        assert!(k.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn diagonal_carries_goursat_data() {
        let p = ReactionProfile::constant(2.0, 21).unwrap();
        let k = solve_kernel(&p, 1.0, 21).unwrap();
        for i in 0..21 {
            let x = i as f64 / 20.0;
            assert!((k.get(i, i) + x).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ReactionProfile::constant(1.0, 11).unwrap();
        assert!(matches!(solve_kernel(&p, 0.0, 11), Err(Error::Validation { .. })));
        assert!(matches!(solve_kernel(&p, 1.0, 2), Err(Error::Validation { .. })));
    }

    #[test]
    fn reports_non_convergence() {
        let p = ReactionProfile::constant(50.0, 11).unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            ..SolverOptions::default()
        };
        let err = solve_kernel_with(&p, 1.0, 11, opts).unwrap_err();
        match err {
            Error::NonConvergence { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let p = ReactionProfile::chebyshev(5.0, 3.0, 21).unwrap();
        let a = solve_kernel(&p, 1.0, 21).unwrap();
        let b = solve_kernel(&p, 1.0, 21).unwrap();
        assert_eq!(a, b);
    }
}
