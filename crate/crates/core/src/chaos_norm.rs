//! The chaos norm
//!
//! ```text
//! |||A|||_t = sup { sum_ij a_ij b_i c_j : |b|_2^2 <= t, |c|_2^2 <= t, |b|_inf <= 1, |c|_inf <= 1 }
//! ```
//!
//! For fixed `c` the problem in `b` is linear over the box/ball intersection
//! and is solved exactly by water-filling ([`box_ball_linear_max`]). The
//! bilinear problem is non-convex; [`chaos_norm`] alternates the two exact
//! half-steps from several starting points and returns the best feasible
//! pair, so its value is a certified lower bound on the supremum.
//! [`chaos_norm_oracle`] is an independent brute-force search for small
//! matrices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{sample_stream, Distribution};
use crate::linalg::{DenseMatrix, PowerIteration};

/// Dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosMatrix(DenseMatrix);

impl ChaosMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if m.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("chaos matrix entries must be finite".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn identity(k: usize) -> Self {
        Self(DenseMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 }))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `b^T A c`.
    pub fn bilinear(&self, b: &[f64], c: &[f64]) -> f64 {
        crate::linalg::dot(b, &self.0.matvec(c))
    }

    /// Parses comma-separated rows, one per non-empty line (`#` starts a comment).
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(parse_row)
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Config("matrix has no rows".into()));
        }
        Self::from_rows(&rows)
    }

    /// Inline form: rows separated by `;`, entries by `,`.
    pub fn from_inline(text: &str) -> Result<Self> {
        let rows = text
            .split(';')
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(parse_row)
            .collect::<Result<Vec<_>>>()?;
        if rows.is_empty() {
            return Err(Error::Config("matrix has no rows".into()));
        }
        Self::from_rows(&rows)
    }
}

fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("matrix entry `{}` is not a number", v.trim())))
        })
        .collect()
}

/// `argmax <v, b>` over `{ |b|_2^2 <= t, |b|_inf <= 1 }`.
///
/// `b_i = sign(v_i) min(1, |v_i| / lambda)` for the smallest multiplier
/// `lambda` meeting the ball constraint. With `|v|` sorted decreasingly the
/// top `s` entries are clipped and the rest lie on the sphere of radius
/// `sqrt(t - s)`; the first `s` whose largest unclipped entry fits in the
/// box is optimal. Zero entries of `v` get `b_i = 0`.
pub fn box_ball_linear_max(v: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    Ok(water_fill(v, t))
}

fn water_fill(v: &[f64], t: f64) -> (Vec<f64>, f64) {
    let nonzero = v.iter().filter(|x| **x != 0.0).count();
    if nonzero == 0 {
        return (vec![0.0; v.len()], 0.0);
    }
    if nonzero as f64 <= t {
        let b: Vec<f64> = v.iter().map(|x| sign(*x)).collect();
        let value = v.iter().map(|x| x.abs()).sum();
        return (b, value);
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
    // tail[s] = sum of squares of the sorted |v| from position s on.
    let mut tail = vec![0.0; v.len() + 1];
    for s in (0..v.len()).rev() {
        let a = v[order[s]].abs();
        tail[s] = tail[s + 1] + a * a;
    }
    let mut clipped = 0;
    let mut scale = 0.0;
    for s in 0..nonzero {
        let radius2 = t - s as f64;
        if radius2 <= 0.0 {
            break;
        }
        let a = v[order[s]].abs();
        // a * sqrt(radius2 / tail) <= 1, squared.
        if a * a * radius2 <= tail[s] {
            clipped = s;
            scale = (radius2 / tail[s]).sqrt();
            break;
        }
    }
    let mut b = vec![0.0; v.len()];
    for (rank, &i) in order.iter().enumerate() {
        b[i] = if rank < clipped { sign(v[i]) } else { v[i] * scale };
    }
    let value = b.iter().zip(v).map(|(b, x)| b * x).sum();
    (b, value)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChaosNormResult {
    pub value: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub restarts_used: usize,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ChaosNormOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative change of the objective that ends one alternating run.
    pub tol: f64,
    /// Seed of the random restarts.
    pub seed: u64,
}

impl Default for ChaosNormOptions {
    fn default() -> Self {
        Self { restarts: 16, max_iter: 1000, tol: 1e-10, seed: 0x00C4_A05E }
    }
}

pub fn chaos_norm(a: &ChaosMatrix, t: f64, restarts: usize) -> Result<ChaosNormResult> {
    chaos_norm_with(a, t, ChaosNormOptions { restarts, ..Default::default() })
}

pub fn chaos_norm_with(a: &ChaosMatrix, t: f64, opts: ChaosNormOptions) -> Result<ChaosNormResult> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let (k, l) = (a.rows(), a.cols());
    let mut best = ChaosNormResult {
        value: 0.0,
        b: vec![0.0; k],
        c: vec![0.0; l],
        restarts_used: 0,
        converged: true,
        iterations: 0,
    };
    if k == 0 || l == 0 {
        return Ok(best);
    }
    let m = a.matrix();
    let starts = starting_points(a, t, opts);
    best.restarts_used = starts.len();
    let mut first = true;
    for c0 in starts {
        let mut c = c0;
        let mut b = vec![0.0; k];
        let mut prev = f64::NEG_INFINITY;
        let mut converged = false;
        let mut iterations = 0;
        let mut value = 0.0;
        for it in 1..=opts.max_iter {
            iterations = it;
            b = water_fill(&m.matvec(&c), t).0;
            let (c_new, v) = water_fill(&m.tmatvec(&b), t);
            c = c_new;
            value = v;
            if (value - prev).abs() <= opts.tol * value.abs() || value == prev {
                converged = true;
                break;
            }
            prev = value;
        }
        if first || value > best.value {
            best.value = value;
            best.b = b;
            best.c = c;
            best.converged = converged;
            best.iterations = iterations;
            first = false;
        }
    }
    // Recompute from the returned pair so `value == b^T A c` to rounding.
    best.value = a.bilinear(&best.b, &best.c).max(0.0);
    Ok(best)
}

/// Initial `c` vectors: leading right singular vector, sign pattern of the
/// dominant row, image of the dominant column's sign pattern, the all-ones
/// vector, then Gaussian random directions, plus the sign-pattern starts.
fn starting_points(a: &ChaosMatrix, t: f64, opts: ChaosNormOptions) -> Vec<Vec<f64>> {
    let m = a.matrix();
    let (k, l) = (a.rows(), a.cols());
    let gauss = |stream: u64, n: usize| sample_stream(&Distribution::Gaussian01, opts.seed, stream, n);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts);
    let svd_start = gauss(0, l);
    let power = PowerIteration { tol: 1e-12, max_iter: 2000 };
    if let Ok(t) = power.top_singular(m, &svd_start) {
        if t.sigma > 0.0 {
            out.push(t.right);
        }
    }
    let row = (0..k)
        .max_by(|&i, &j| abs_sum(m.row(i)).total_cmp(&abs_sum(m.row(j))))
        .unwrap();
    out.push(m.row(row).iter().map(|x| sign(*x)).collect());
    let col = (0..l)
        .max_by(|&i, &j| {
            let ci: f64 = (0..k).map(|r| m.get(r, i).abs()).sum();
            let cj: f64 = (0..k).map(|r| m.get(r, j).abs()).sum();
            ci.total_cmp(&cj)
        })
        .unwrap();
    let col_signs: Vec<f64> = (0..k).map(|r| sign(m.get(r, col))).collect();
    out.push(m.tmatvec(&col_signs));
    out.push(vec![1.0; l]);
    let mut stream = 1;
    while out.len() < opts.restarts {
        out.push(gauss(stream, l));
        stream += 1;
    }
    out.truncate(opts.restarts);
    out.extend(sign_pattern_starts(a, t));
    out
}

/// Largest shorter side whose sign patterns are all used as extra starts.
pub const SIGN_PATTERN_MAX_SIDE: usize = 8;

/// One start per sign pattern of the shorter side, up to global sign. A
/// pattern `s` on the row side enters as `c = W(A^T W(s))`, with `W` the
/// box-ball maximiser, so both orientations of `A` see the same vertices.
fn sign_pattern_starts(a: &ChaosMatrix, t: f64) -> Vec<Vec<f64>> {
    let m = a.matrix();
    let (k, l) = (a.rows(), a.cols());
    let side = k.min(l);
    if side > SIGN_PATTERN_MAX_SIDE {
        return Vec::new();
    }
    (0..1u32 << (side - 1))
        .map(|mask| {
            let s: Vec<f64> = (0..side).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            if k <= l {
                water_fill(&m.tmatvec(&water_fill(&s, t).0), t).0
            } else {
                water_fill(&s, t).0
            }
        })
        .collect()
}

fn abs_sum(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Brute-force validator for small matrices (`k * l <= 16`).
///
/// Enumerates directions `d` on a grid of spacing `grid_step` over the
/// surface of the cube `[-1, 1]^k`, scales each to the boundary of the
/// feasible set, and solves the inner problem in `c` exactly by
/// enumerating how many coordinates sit on the box. The best directions
/// are then refined by per-axis moves of shrinking step. The result is a
/// feasible value, hence a lower bound, within `O(grid_step)` of the
/// supremum before refinement.
pub fn chaos_norm_oracle(a: &ChaosMatrix, t: f64, grid_step: f64) -> Result<f64> {
    if a.rows() * a.cols() > 16 {
        return Err(Error::TooLarge(format!(
            "oracle supports k*l <= 16, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !(grid_step > 0.0 && grid_step <= 0.1) {
        return Err(Error::InvalidParameter(format!("grid_step must be in (0, 0.1], got {grid_step}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    // The norm is invariant under transposition; grid over the shorter side.
    let a = if a.rows() > a.cols() { a.transpose() } else { a.clone() };
    let m = a.matrix();
    let k = a.rows();
    let levels = (2.0 / grid_step).round() as usize + 1;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / (levels - 1) as f64;

    let eval = |d: &[f64]| -> f64 {
        let inf = d.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if inf == 0.0 {
            return 0.0;
        }
        let l2 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = (1.0 / inf).min(t.sqrt() / l2);
        let b: Vec<f64> = d.iter().map(|x| x * s).collect();
        box_ball_support(&m.tmatvec(&b), t)
    };

    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    const KEEP: usize = 8;
    let mut idx = vec![0usize; k];
    let mut d = vec![0.0; k];
    loop {
        for (x, i) in d.iter_mut().zip(&idx) {
            *x = coord(*i);
        }
        let on_surface = idx.iter().any(|i| *i == 0 || *i == levels - 1);
        // d and -d give the same value; keep the copy whose first nonzero entry is positive.
        let canonical = d.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x > 0.0);
        if on_surface && canonical {
            let v = eval(&d);
            if top.len() < KEEP || v > top.last().unwrap().0 {
                top.push((v, d.clone()));
                top.sort_by(|p, q| q.0.total_cmp(&p.0));
                top.truncate(KEEP);
            }
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == k {
                let best = top.iter().map(|(v, d)| refine(&eval, d.clone(), *v, grid_step));
                return Ok(best.fold(0.0, f64::max));
            }
            idx[pos] += 1;
            if idx[pos] < levels {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn refine(eval: &dyn Fn(&[f64]) -> f64, mut d: Vec<f64>, mut value: f64, grid_step: f64) -> f64 {
    let mut step = grid_step / 2.0;
    while step > 1e-7 {
        let mut improved = false;
        for i in 0..d.len() {
            for dir in [-1.0, 1.0] {
                let mut cand = d.clone();
                cand[i] = (cand[i] + dir * step).clamp(-1.0, 1.0);
                let v = eval(&cand);
                if v > value {
                    value = v;
                    d = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    value
}

/// Exact `sup <w, c>` over `{ |c|_2^2 <= t, |c|_inf <= 1 }` by enumerating the
/// number `s` of clipped coordinates: the top `s` entries of `|w|` sit at 1
/// and the rest lie on the sphere of radius `sqrt(t - s)`.
fn box_ball_support(w: &[f64], t: f64) -> f64 {
    let mut a: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    let n = a.len();
    let mut best = 0.0f64;
    let mut head = 0.0;
    for s in 0..=n {
        if s as f64 > t {
            break;
        }
        if s > 0 {
            head += a[s - 1];
        }
        let rest = a[s..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if rest == 0.0 {
            best = best.max(head);
            continue;
        }
        let radius = (t - s as f64).sqrt();
        if radius * a.get(s).copied().unwrap_or(0.0) / rest <= 1.0 + 1e-12 {
            best = best.max(head + radius * rest);
        }
    }
    best
}
