//! Block kernels `h(x, y) = sum_n (a_n / b_n) I_n(x) I_n(y)` on `[0, 1]`.
//!
//! `I_n` is `+1` on the left half and `-1` on the right half of an interval
//! of length `b_n`; intervals are packed left to right starting at 0, so
//! supports are disjoint, `∫ I_n = 0` and `∫ I_n^2 = b_n`.

use crate::error::{Error, Result};

/// Blocks with `b_n` below this are dropped from the layout.
pub const MIN_BLOCK_WIDTH: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockKernelSpec {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `edges[n]..edges[n + 1]` is the support of block `n`.
    edges: Vec<f64>,
    /// First (1-based) block index dropped because its width underflowed.
    truncated_at: Option<usize>,
}

impl BlockKernelSpec {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::build(a, b, None)
    }

    /// `a_n = a`, `b_n = exp(-exp(a^2 n / b))`, truncated at the first `n`
    /// with `b_n < 1e-300`.
    pub fn iterated_log(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a != 0.0) || !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "iterated-log block kernel needs a != 0 and b > 0, got a={a}, b={b}"
            )));
        }
        let mut widths = Vec::new();
        let mut total = 0.0;
        let mut n = 1usize;
        loop {
            let w = (-(a * a * n as f64 / b).exp()).exp();
            if w < MIN_BLOCK_WIDTH {
                break;
            }
            total += w;
            if total > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "block widths exceed [0,1] after {n} blocks (a={a}, b={b})"
                )));
            }
            widths.push(w);
            n += 1;
        }
        let len = widths.len();
        Self::build(vec![a; len], widths, Some(len + 1))
    }

    fn build(a: Vec<f64>, b: Vec<f64>, truncated_at: Option<usize>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                what: "block widths b",
                got: b.len(),
                expected: a.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("block amplitudes must be finite".into()));
        }
        if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("block widths must be positive".into()));
        }
        let mut edges = Vec::with_capacity(b.len() + 1);
        edges.push(0.0);
        let mut acc = 0.0;
        for w in &b {
            acc += w;
            edges.push(acc);
        }
        if acc > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "sum of block widths is {acc} > 1; supports cannot be packed into [0,1]"
            )));
        }
        Ok(Self { a, b, edges, truncated_at })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    /// Support interval `[lo, hi)` of block `n` (0-based).
    pub fn support(&self, n: usize) -> (f64, f64) {
        (self.edges[n], self.edges[n + 1])
    }

    /// Midpoint separating the `+1` and `-1` halves of block `n`.
    pub fn midpoint(&self, n: usize) -> f64 {
        self.edges[n] + 0.5 * self.b[n]
    }

    /// Block containing `x` and the value of its indicator there.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if self.is_empty() || !(x >= 0.0 && x < self.edges[self.len()]) {
            return None;
        }
        let n = self.edges.partition_point(|&e| e <= x) - 1;
        let sign = if x < self.midpoint(n) { 1.0 } else { -1.0 };
        Some((n, sign))
    }

    /// `I_n(x)` for 0-based `n`.
    pub fn indicator(&self, n: usize, x: f64) -> f64 {
        match self.locate(x) {
            Some((m, s)) if m == n => s,
            _ => 0.0,
        }
    }

    pub fn max_abs_amplitude(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `(a_n / b_n) I_n(x) I_n(y)` when `x` and `y` share block `n`, else 0.
pub fn block_kernel_eval(spec: &BlockKernelSpec, x: f64, y: f64) -> f64 {
    match (spec.locate(x), spec.locate(y)) {
        (Some((n, sx)), Some((m, sy))) if n == m => (spec.a[n] / spec.b[n]) * (sx * sy),
        _ => 0.0,
    }
}

/// `ln b_n = -exp(a^2 n / b)` for `n = 1..=count`, without underflow.
pub fn iterated_log_ln_widths(a: f64, b: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|n| -(a * a * n as f64 / b).exp()).collect()
}
