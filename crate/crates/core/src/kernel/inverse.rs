//! Inverse kernel from the Volterra identity
//! `l(x,y) = k(x,y) + ∫_y^x k(x,ξ) l(ξ,y) dξ`.

use crate::error::{Error, Result};

use super::{KernelGrid, KernelKind};

/// Solves the trapezoid-discretised Volterra identity column by column.
///
/// For each `y_j` the discrete system is lower triangular in `x`, so forward
/// substitution yields the limit of its Neumann series directly. Only the
/// endpoint term `h/2 · k(x_i, x_i) · l(x_i, y_j)` is implicit.
pub fn solve_inverse_kernel(kernel: &KernelGrid) -> Result<KernelGrid> {
    if kernel.kind() != KernelKind::Direct {
        return Err(Error::validation("kernel.kind", "expected a direct kernel"));
    }
    let n = kernel.n();
    let h = kernel.step();
    let mut inv = KernelGrid::zeros(n, KernelKind::Inverse);

    for j in 0..n {
        inv.set(j, j, kernel.get(j, j));
        for i in j + 1..n {
            let pivot = 1.0 - 0.5 * h * kernel.get(i, i);
            if pivot.abs() < 1e-12 {
                return Err(Error::NonConvergence {
                    what: "inverse kernel substitution",
                    iterations: i,
                    residual: pivot,
                });
            }
            let mut acc = 0.5 * h * kernel.get(i, j) * inv.get(j, j);
            for m in j + 1..i {
                acc += h * kernel.get(i, m) * inv.get(m, j);
            }
            let value = (kernel.get(i, j) + acc) / pivot;
            if !value.is_finite() {
                return Err(Error::NonConvergence {
                    what: "inverse kernel substitution",
                    iterations: i,
                    residual: value,
                });
            }
            inv.set(i, j, value);
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kernel_inverts_to_zero() {
        let k = KernelGrid::zeros(9, KernelKind::Direct);
        let l = solve_inverse_kernel(&k).unwrap();
        assert_eq!(l.kind(), KernelKind::Inverse);
        assert!(l.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_inverse_input() {
        let k = KernelGrid::zeros(5, KernelKind::Inverse);
        assert!(solve_inverse_kernel(&k).is_err());
    }

    #[test]
    fn constant_kernel_matches_exponential() {
        // k ≡ c gives l(x, y) = c·e^{c(x−y)}
        let c = 0.8;
        let n = 401;
        let k = KernelGrid::from_fn(n, KernelKind::Direct, |_, _| c);
        let l = solve_inverse_kernel(&k).unwrap();
        let h = k.step();
        for (i, j) in [(400, 0), (200, 100), (300, 299)] {
            let exact = c * (c * (i - j) as f64 * h).exp();
            assert!((l.get(i, j) - exact).abs() < 1e-5, "({i},{j})");
        }
    }
}
