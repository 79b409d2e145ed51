//! Exact linear-time proximal solvers for chain total variation.
//!
//! Both solvers use the scaling
//!
//! ```text
//! tv1:  argmin_z  1/2 |z - y|^2 + sum_i w_i |z_{i+1} - z_i|
//! tv2:  argmin_z  1/2 |z - y|^2 + sum_i (w_i / 2) (z_{i+1} - z_i)^2
//! ```
//!
//! so the l2 prox is the solution of `(I + L_w) z = y` with `L_w` the
//! weighted chain Laplacian.

use std::collections::VecDeque;

/// Penalty weights along a chain: one shared value or one per edge.
#[derive(Debug, Clone, Copy)]
pub enum EdgeWeights<'a> {
    Uniform(f64),
    PerEdge(&'a [f64]),
}

impl EdgeWeights<'_> {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        match self {
            EdgeWeights::Uniform(w) => *w,
            EdgeWeights::PerEdge(ws) => ws[i],
        }
    }

    fn check(&self, n: usize) {
        if let EdgeWeights::PerEdge(ws) = self {
            assert_eq!(
                ws.len(),
                n.saturating_sub(1),
                "need one weight per chain edge"
            );
        }
    }
}

/// A knot of the piecewise-linear derivative: crossing `x` from the left
/// adds `slope` and `offset` to the derivative's linear coefficients.
#[derive(Debug, Clone, Copy)]
struct Knot {
    x: f64,
    slope: f64,
    offset: f64,
}

/// Scratch space for [`tv1_prox_into`], reusable across calls.
#[derive(Debug, Clone, Default)]
pub struct Tv1Workspace {
    knots: VecDeque<Knot>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Fused-lasso prox on a chain with a uniform weight.
pub fn tv1_prox(y: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    tv1_prox_into(
        y,
        EdgeWeights::Uniform(lambda),
        &mut out,
        &mut Tv1Workspace::default(),
    );
    out
}

/// Fused-lasso prox with one weight per edge.
pub fn tv1_prox_weighted(y: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    tv1_prox_into(
        y,
        EdgeWeights::PerEdge(weights),
        &mut out,
        &mut Tv1Workspace::default(),
    );
    out
}

/// Dynamic-programming fused-lasso solver.
///
/// The forward pass keeps the derivative of the partial objective
/// `F_i(b) = min_{b_0..b_{i-1}} ...` as a piecewise-linear function stored
/// as knots in a deque. Minimizing over `b_i` against the edge penalty clamps
/// that derivative to `[-w_i, w_i]`, which adds one knot at each end; the
/// clamp points are the back-pointers used by the backward pass. Each step
/// pushes two knots and every scanned knot is popped, so the total work is
/// linear.
pub fn tv1_prox_into(y: &[f64], weights: EdgeWeights<'_>, out: &mut [f64], ws: &mut Tv1Workspace) {
    let n = y.len();
    assert_eq!(out.len(), n);
    weights.check(n);
    if n == 0 {
        return;
    }
    if n == 1 {
        out[0] = y[0];
        return;
    }
    let knots = &mut ws.knots;
    knots.clear();
    ws.lower.clear();
    ws.upper.clear();
    ws.lower.resize(n - 1, 0.0);
    ws.upper.resize(n - 1, 0.0);

    // derivative of F_0 is b - y_0 on the whole line
    let (mut left_a, mut left_b) = (1.0, -y[0]);
    let (mut right_a, mut right_b) = (1.0, -y[0]);

    for i in 0..n - 1 {
        let w = weights.get(i).max(0.0);

        // lower clamp point: derivative == -w, scanning from the left
        let (mut a, mut b) = (left_a, left_b);
        while let Some(k) = knots.front() {
            if a * k.x + b > -w {
                break;
            }
            a += k.slope;
            b += k.offset;
            knots.pop_front();
        }
        let lo = (-w - b) / a;
        let (lo_a, lo_b) = (a, b);

        // upper clamp point: derivative == w, scanning from the right
        let (mut a, mut b) = (right_a, right_b);
        while let Some(k) = knots.back() {
            if a * k.x + b < w {
                break;
            }
            a -= k.slope;
            b -= k.offset;
            knots.pop_back();
        }
        let hi = (w - b) / a;
        let (hi_a, hi_b) = (a, b);

        ws.lower[i] = lo;
        ws.upper[i] = hi;

        // clamped derivative: -w left of lo, +w right of hi
        knots.push_front(Knot {
            x: lo,
            slope: lo_a,
            offset: lo_b + w,
        });
        knots.push_back(Knot {
            x: hi,
            slope: -hi_a,
            offset: w - hi_b,
        });
        // add the next data term b - y_{i+1}
        left_a = 1.0;
        left_b = -w - y[i + 1];
        right_a = 1.0;
        right_b = w - y[i + 1];
    }

    // root of the final derivative
    let (mut a, mut b) = (left_a, left_b);
    while let Some(k) = knots.front() {
        if a * k.x + b > 0.0 {
            break;
        }
        a += k.slope;
        b += k.offset;
        knots.pop_front();
    }
    out[n - 1] = -b / a;
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1].clamp(ws.lower[i], ws.upper[i].max(ws.lower[i]));
    }
}

/// Laplacian-smoothing prox on a chain with a uniform weight.
pub fn tv2_prox(y: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    tv2_prox_into(y, EdgeWeights::Uniform(lambda), &mut out, &mut Vec::new());
    out
}

pub fn tv2_prox_weighted(y: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    tv2_prox_into(y, EdgeWeights::PerEdge(weights), &mut out, &mut Vec::new());
    out
}

/// Solve `(I + L_w) z = y` by tridiagonal elimination.
///
/// `scratch` holds the modified super-diagonal and is resized as needed.
pub fn tv2_prox_into(y: &[f64], weights: EdgeWeights<'_>, out: &mut [f64], scratch: &mut Vec<f64>) {
    let n = y.len();
    assert_eq!(out.len(), n);
    weights.check(n);
    if n == 0 {
        return;
    }
    if n == 1 {
        out[0] = y[0];
        return;
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    // row i: -w_{i-1} z_{i-1} + (1 + w_{i-1} + w_i) z_i - w_i z_{i+1} = y_i
    let w0 = weights.get(0).max(0.0);
    let mut denom = 1.0 + w0;
    scratch[0] = -w0 / denom;
    out[0] = y[0] / denom;
    for i in 1..n {
        let w_prev = weights.get(i - 1).max(0.0);
        let w_next = if i + 1 < n {
            weights.get(i).max(0.0)
        } else {
            0.0
        };
        let diag = 1.0 + w_prev + w_next;
        denom = diag + w_prev * scratch[i - 1];
        scratch[i] = -w_next / denom;
        out[i] = (y[i] + w_prev * out[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        let next = out[i + 1];
        out[i] -= scratch[i] * next;
    }
}

/// `sum |z_{i+1} - z_i|^p` along a chain.
pub fn total_variation(z: &[f64], p: u8) -> f64 {
    z.windows(2)
        .map(|w| {
            let d = (w[1] - w[0]).abs();
            if p == 1 {
                d
            } else {
                d * d
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_input_is_fixed() {
        let y = vec![2.5; 7];
        for lam in [0.0, 0.3, 10.0] {
            assert_eq!(tv1_prox(&y, lam), y);
            for (a, b) in tv2_prox(&y, lam).iter().zip(&y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn two_point_l1() {
        let z = tv1_prox(&[0.0, 4.0], 1.0);
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 3.0, epsilon = 1e-12);
        for lam in [2.0, 3.0, 50.0] {
            let z = tv1_prox(&[0.0, 4.0], lam);
            assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(z[1], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_point_l2() {
        let z = tv2_prox(&[0.0, 4.0], 1.0);
        assert_abs_diff_eq!(z[0], 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn l2_large_weight_goes_to_mean() {
        let y = [1.0, -2.0, 5.0, 0.5];
        let mean = y.iter().sum::<f64>() / 4.0;
        for v in tv2_prox(&y, 1e9) {
            assert_abs_diff_eq!(v, mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_weight_is_identity() {
        let y = [1.0, -2.0, 5.0, 0.5];
        assert_eq!(tv1_prox(&y, 0.0), y.to_vec());
        assert_eq!(tv2_prox(&y, 0.0), y.to_vec());
    }

    #[test]
    fn empty_and_single() {
        assert!(tv1_prox(&[], 1.0).is_empty());
        assert_eq!(tv1_prox(&[3.0], 1.0), vec![3.0]);
        assert_eq!(tv2_prox(&[3.0], 1.0), vec![3.0]);
    }
}
