//! Dense row-major matrices, power iteration and a small symmetric
//! eigensolver.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Entries below which `matvec` stays on the calling thread.
const PARALLEL_MATVEC_MIN: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major construction; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch { what: "matrix row", got: bad.len(), expected: cols });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `M[row_perm[i], col_perm[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(row_perm[i], col_perm[j]))
    }

    pub fn abs_sum(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        if self.cols == 0 {
            return vec![0.0; self.rows];
        }
        if self.data.len() < PARALLEL_MATVEC_MIN {
            return self.data.chunks(self.cols).map(|row| dot(row, v)).collect();
        }
        self.data
            .par_chunks(self.cols)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn tmatvec(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += wi * a;
            }
        }
        out
    }

    /// Largest absolute eigenvalue of a small symmetric matrix.
    pub fn spectral_norm_small(&self) -> f64 {
        symmetric_eigenvalues(self)
            .into_iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    /// Stop when the relative change of the squared singular value drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SingularTriplet {
    pub sigma: f64,
    /// Unit right singular vector.
    pub right: Vec<f64>,
    pub iterations: usize,
}

impl PowerIteration {
    /// Largest singular value of `M` by power iteration on `M^T M`.
    pub fn top_singular(&self, m: &DenseMatrix, start: &[f64]) -> Result<SingularTriplet> {
        self.run(m, start, None)
    }

    /// Largest singular value of `D_r^{1/2} M D_c^{1/2}` for nonnegative
    /// row weights `D_r` and column weights `D_c`.
    pub fn top_singular_weighted(
        &self,
        m: &DenseMatrix,
        start: &[f64],
        row_w: &[f64],
        col_w: &[f64],
    ) -> Result<SingularTriplet> {
        let rs: Vec<f64> = row_w.iter().map(|w| w.sqrt()).collect();
        let cs: Vec<f64> = col_w.iter().map(|w| w.sqrt()).collect();
        self.run(m, start, Some((&rs, &cs)))
    }

    fn run(&self, m: &DenseMatrix, start: &[f64], scales: Option<(&[f64], &[f64])>) -> Result<SingularTriplet> {
        if start.len() != m.cols() {
            return Err(Error::LengthMismatch { what: "power iteration start", got: start.len(), expected: m.cols() });
        }
        let apply = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let (rs, cs) = match scales {
                Some((r, c)) => (Some(r), Some(c)),
                None => (None, None),
            };
            let vin: Vec<f64> = match cs {
                Some(c) => v.iter().zip(c).map(|(a, b)| a * b).collect(),
                None => v.to_vec(),
            };
            let mut w = m.matvec(&vin);
            if let Some(r) = rs {
                w.iter_mut().zip(r).for_each(|(a, b)| *a *= b);
            }
            let wr: Vec<f64> = match rs {
                Some(r) => w.iter().zip(r).map(|(a, b)| a * b).collect(),
                None => w.clone(),
            };
            let mut z = m.tmatvec(&wr);
            if let Some(c) = cs {
                z.iter_mut().zip(c).for_each(|(a, b)| *a *= b);
            }
            (w, z)
        };

        let n0 = norm2(start);
        if n0 == 0.0 || !n0.is_finite() {
            return Err(Error::InvalidParameter("power iteration start must be nonzero".into()));
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / n0).collect();
        let mut prev = f64::NAN;
        for it in 1..=self.max_iter {
            let (w, z) = apply(&v);
            // Rayleigh quotient of M^T M at unit v.
            let s2 = dot(&w, &w);
            if !s2.is_finite() {
                return Err(Error::Numerical("non-finite value in power iteration".into()));
            }
            let zn = norm2(&z);
            if s2 == 0.0 || zn == 0.0 {
                return Ok(SingularTriplet { sigma: 0.0, right: v, iterations: it });
            }
            if (s2 - prev).abs() <= self.tol * s2 {
                return Ok(SingularTriplet { sigma: s2.sqrt(), right: v, iterations: it });
            }
            prev = s2;
            v = z.iter().map(|x| x / zn).collect();
        }
        Err(Error::NotConverged { what: "power iteration", iterations: self.max_iter })
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "symmetric_eigenvalues needs a square matrix");
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        let diag: f64 = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
