//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

/// Σ_k (±w/4)^k / (k! (k+1)!) / 2, i.e. I₁(z)/z (sign +) or J₁(z)/z (sign −)
/// with w = z².
fn bessel_ratio(w: f64, sign: f64) -> f64 {
    let mut term = 0.5;
    let mut sum = term;
    for k in 0..200 {
        let kf = k as f64;
        term *= sign * (w / 4.0) / ((kf + 1.0) * (kf + 2.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// d/dw of `bessel_ratio`.
fn bessel_ratio_dw(w: f64, sign: f64) -> f64 {
    // Σ_{k≥1} k (±1/4)^k w^{k−1} / (2 k!(k+1)!)
    let mut sum = 0.0;
    let mut coeff = 0.5; // (±1/4)^k / (2 k!(k+1)!) at k = 0
    let mut wpow = 1.0; // w^{k-1}
    for k in 1..200 {
        let kf = k as f64;
        coeff *= sign / 4.0 / (kf * (kf + 1.0));
        let term = kf * coeff * wpow;
        sum += term;
        wpow *= w;
        if k > 3 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Direct kernel for constant λ₀: −(λ₀x/ε) I₁(z)/z, z² = (λ₀/ε)(x² − y²).
pub fn bessel_k(l0: f64, eps: f64, x: f64, y: f64) -> f64 {
    let c = l0 / eps;
    -c * x * bessel_ratio(c * (x * x - y * y), 1.0)
}

/// ∂k/∂x of `bessel_k`.
pub fn bessel_kx(l0: f64, eps: f64, x: f64, y: f64) -> f64 {
    let c = l0 / eps;
    let w = c * (x * x - y * y);
    -c * (bessel_ratio(w, 1.0) + 2.0 * c * x * x * bessel_ratio_dw(w, 1.0))
}

/// Inverse kernel for constant λ₀: −(λ₀x/ε) J₁(z)/z.
pub fn bessel_l(l0: f64, eps: f64, x: f64, y: f64) -> f64 {
    let c = l0 / eps;
    -c * x * bessel_ratio(c * (x * x - y * y), -1.0)
}

/// Plain trapezoid rule of `f` over `[a, b]` with `m` panels.
pub fn trapz<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    if m == 0 || a == b {
        return 0.0;
    }
    let h = (b - a) / m as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..m {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    assert!(m.is_multiple_of(2));
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
