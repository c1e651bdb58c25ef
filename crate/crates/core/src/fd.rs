//! Finite-difference stencils on uniform grids.
//!
//! All derivatives use a five-point window: centred where it fits (fourth
//! order for first and second derivatives), shifted toward the interior near
//! an edge (fourth order for first derivatives, third order for second).

/// Points in every stencil window.
pub const WINDOW: usize = 5;

/// Fornberg's recursion: weights for the `order`-th derivative at 0 from
/// samples at `offsets` (in units of the grid step).
pub fn weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    assert!(n > order, "stencil too short for derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Start of the five-point window for `index` within `[lo, hi]` (inclusive).
/// Returns `None` when fewer than five points are available.
pub fn window_start(index: usize, lo: usize, hi: usize) -> Option<usize> {
    window_start_sized(index, lo, hi, WINDOW)
}

fn window_start_sized(index: usize, lo: usize, hi: usize, width: usize) -> Option<usize> {
    if hi < lo || hi - lo + 1 < width || index < lo || index > hi {
        return None;
    }
    let start = index.saturating_sub(width / 2).max(lo);
    Some(start.min(hi + 1 - width))
}

/// Derivative of the sampled function `f` at `index`, using nodes
/// `lo..=hi` only. `f(k)` returns the sample at node `k`.
pub fn derivative_in<F>(f: F, index: usize, lo: usize, hi: usize, h: f64, order: usize) -> Option<f64>
where
    F: Fn(usize) -> f64,
{
    derivative_in_sized(f, index, lo, hi, h, order, WINDOW)
}

/// As [`derivative_in`] with a window of `width` points.
pub fn derivative_in_sized<F>(
    f: F,
    index: usize,
    lo: usize,
    hi: usize,
    h: f64,
    order: usize,
    width: usize,
) -> Option<f64>
where
    F: Fn(usize) -> f64,
{
    let start = window_start_sized(index, lo, hi, width)?;
    let offsets: Vec<f64> = (0..width)
        .map(|k| (start + k) as f64 - index as f64)
        .collect();
    let w = weights(&offsets, order);
    let sum: f64 = w.iter().enumerate().map(|(k, wk)| wk * f(start + k)).sum();
    Some(sum / h.powi(order as i32))
}

/// Derivative of a uniformly sampled series at `index`.
pub fn derivative(values: &[f64], h: f64, index: usize, order: usize) -> f64 {
    assert!(values.len() >= WINDOW, "need at least {WINDOW} samples");
    derivative_in(|k| values[k], index, 0, values.len() - 1, h, order)
        .expect("window always fits")
}

/// Derivative of a uniformly sampled series at every node.
pub fn derivative_all(values: &[f64], h: f64, order: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| derivative(values, h, i, order))
        .collect()
}
