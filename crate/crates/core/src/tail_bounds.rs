//! Concentration-bound calculators and an empirical check of the lower tail
//! bound for Rademacher chaos
//!
//! ```text
//! Pr{ |sum_ij a_ij eps_i eps2_j| >= c |||A|||_t } >= min(c, e^-t).
//! ```
//!
//! Bound formulas:
//!
//! ```text
//! talagrand  K exp(-(t / (K U)) ln(1 + t U / V)),   V = sigma^2 + 8 U E|Z| in the split form
//! prohorov   2 exp(-(t / (2U)) asinh(t U / (2 sigma^2)))
//! bernstein  2 exp(-t^2 / (2 sigma^2 + 2 U t / 3))
//! ```
//!
//! The Prohorov and Bernstein forms are the classical textbook statements.

use rayon::prelude::*;
use serde::Serialize;

use crate::chaos_norm::{chaos_norm, ChaosMatrix};
use crate::error::{Error, Result};
use crate::kernel::{Distribution, SampleStream};

/// Stream ids of the two Rademacher sequences in Monte Carlo mode.
pub const EPS_STREAM: u64 = 2;
pub const EPS2_STREAM: u64 = 3;

/// Largest `k + l` accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_DIM: usize = 24;

/// Restarts used for the chaos norm inside [`latala_lower_check`].
pub const CHECK_RESTARTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TalagrandVariance {
    /// `V` given directly.
    Direct { v: f64 },
    /// `V = sigma2 + 8 U ez_abs`.
    Split { sigma2: f64, ez_abs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandQuery {
    pub t: f64,
    pub u: f64,
    pub variance: TalagrandVariance,
    pub k: f64,
}

impl TalagrandQuery {
    pub fn new(t: f64, u: f64, v: f64) -> Self {
        Self { t, u, variance: TalagrandVariance::Direct { v }, k: 1.0 }
    }

    pub fn split(t: f64, u: f64, sigma2: f64, ez_abs: f64) -> Self {
        Self { t, u, variance: TalagrandVariance::Split { sigma2, ez_abs }, k: 1.0 }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// Effective `V`.
    pub fn v(&self) -> f64 {
        match self.variance {
            TalagrandVariance::Direct { v } => v,
            TalagrandVariance::Split { sigma2, ez_abs } => sigma2 + 8.0 * self.u * ez_abs,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn talagrand_bound(q: &TalagrandQuery) -> Result<f64> {
    positive("t", q.t)?;
    positive("U", q.u)?;
    positive("K", q.k)?;
    match q.variance {
        TalagrandVariance::Direct { v } => positive("V", v)?,
        TalagrandVariance::Split { sigma2, ez_abs } => {
            positive("sigma2", sigma2)?;
            if !(ez_abs >= 0.0 && ez_abs.is_finite()) {
                return Err(Error::InvalidParameter(format!("E|Z| must be nonnegative, got {ez_abs}")));
            }
        }
    }
    let v = q.v();
    Ok(q.k * (-(q.t / (q.k * q.u)) * (q.t * q.u / v).ln_1p()).exp())
}

pub fn prohorov_bound(t: f64, u: f64, sigma2: f64) -> Result<f64> {
    positive("t", t)?;
    positive("U", u)?;
    positive("sigma2", sigma2)?;
    Ok(2.0 * (-(t / (2.0 * u)) * (t * u / (2.0 * sigma2)).asinh()).exp())
}

pub fn bernstein_bound(t: f64, u: f64, sigma2: f64) -> Result<f64> {
    positive("t", t)?;
    positive("U", u)?;
    positive("sigma2", sigma2)?;
    Ok(2.0 * (-t * t / (2.0 * sigma2 + 2.0 * u * t / 3.0)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LatalaMode {
    Exhaustive,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LatalaCheck {
    /// `Pr{ |chaos| >= threshold }`.
    pub probability: f64,
    /// Standard error in Monte Carlo mode, 0 when exhaustive.
    pub se: f64,
    /// `c * |||A|||_t`.
    pub threshold: f64,
    pub chaos_norm: f64,
    /// `min(c, e^-t)`.
    pub target: f64,
    pub holds: bool,
}

/// `|x| >= thr` up to rounding in the last bits of `thr`.
#[inline]
fn exceeds(x: f64, thr: f64) -> bool {
    x.abs() >= thr * (1.0 - 1e-12)
}

pub fn latala_lower_check(a: &ChaosMatrix, t: f64, c: f64, mode: LatalaMode) -> Result<LatalaCheck> {
    positive("t", t)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, 1], got {c}")));
    }
    let norm = chaos_norm(a, t, CHECK_RESTARTS)?.value;
    let threshold = c * norm;
    let (probability, se) = match mode {
        LatalaMode::Exhaustive => (exhaustive_tail(a, threshold)?, 0.0),
        LatalaMode::MonteCarlo { samples, seed } => monte_carlo_tail(a, threshold, samples, seed)?,
    };
    let target = c.min((-t).exp());
    Ok(LatalaCheck { probability, se, threshold, chaos_norm: norm, target, holds: probability >= target })
}

fn check_exhaustive(a: &ChaosMatrix) -> Result<()> {
    if a.rows() + a.cols() > MAX_EXHAUSTIVE_DIM {
        return Err(Error::TooLarge(format!(
            "exhaustive mode needs k + l <= {MAX_EXHAUSTIVE_DIM}, got {} + {}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

#[inline]
fn signs(mask: u64, len: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 })
}

/// Calls `visit` with the chaos value of every sign pair. The first sign of
/// `eps` is fixed to `+1`: flipping all of `eps` negates the chaos, so each
/// reported value stands for two equally likely patterns with values `±v`.
fn enumerate_half(a: &ChaosMatrix, mut visit: impl FnMut(&[f64])) -> Result<()> {
    check_exhaustive(a)?;
    let (k, l) = (a.rows(), a.cols());
    let m = a.matrix();
    let half = if k == 0 { 1 } else { 1u64 << (k - 1) };
    let mut w = vec![0.0; l];
    let mut vals = vec![0.0; 1usize << l];
    for mask in 0..half {
        let eps: Vec<f64> = signs(mask << 1, k).collect();
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = (0..k).map(|i| eps[i] * m.get(i, j)).sum();
        }
        for (mask2, v) in vals.iter_mut().enumerate() {
            *v = signs(mask2 as u64, l).zip(&w).map(|(s, w)| s * w).sum();
        }
        visit(&vals);
    }
    Ok(())
}

fn exhaustive_tail(a: &ChaosMatrix, threshold: f64) -> Result<f64> {
    check_exhaustive(a)?;
    let (k, l) = (a.rows(), a.cols());
    let m = a.matrix();
    let half = if k == 0 { 1 } else { 1u64 << (k - 1) };
    // Shard by the sign prefix of eps; each shard enumerates all of eps2.
    let hits: u64 = (0..half)
        .into_par_iter()
        .map_init(
            || vec![0.0; l],
            |w, mask| {
                let eps: Vec<f64> = signs(mask << 1, k).collect();
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj = (0..k).map(|i| eps[i] * m.get(i, j)).sum();
                }
                (0..1u64 << l)
                    .filter(|mask2| exceeds(signs(*mask2, l).zip(w.iter()).map(|(s, w)| s * w).sum(), threshold))
                    .count() as u64
            },
        )
        .sum();
    Ok(hits as f64 / (half as f64 * (1u64 << l) as f64))
}

fn monte_carlo_tail(a: &ChaosMatrix, threshold: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidParameter("Monte Carlo mode needs samples >= 1".into()));
    }
    let (k, l) = (a.rows(), a.cols());
    let m = a.matrix();
    let mut e1 = SampleStream::new(Distribution::Rademacher, seed, EPS_STREAM, 0);
    let mut e2 = SampleStream::new(Distribution::Rademacher, seed, EPS2_STREAM, 0);
    let mut eps = vec![0.0; k];
    let mut eps2 = vec![0.0; l];
    let mut hits = 0u64;
    for _ in 0..samples {
        eps.iter_mut().for_each(|e| *e = e1.next_sample());
        eps2.iter_mut().for_each(|e| *e = e2.next_sample());
        let mut s = 0.0;
        for (i, e) in eps.iter().enumerate() {
            s += e * m.row(i).iter().zip(&eps2).map(|(a, e)| a * e).sum::<f64>();
        }
        if exceeds(s, threshold) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

/// Exact law of `sum_ij a_ij eps_i eps2_j` as sorted `(value, probability)` atoms.
pub fn chaos_distribution(a: &ChaosMatrix) -> Result<Vec<(f64, f64)>> {
    let (k, l) = (a.rows(), a.cols());
    let total = (1u64 << (k + l)) as f64;
    let mut all: Vec<f64> = Vec::new();
    enumerate_half(a, |vals| {
        for v in vals {
            all.push(*v);
            all.push(-*v);
        }
    })?;
    if k == 0 {
        // No eps sign was fixed, so every pattern was counted twice.
        all.truncate(all.len() / 2);
    }
    all.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for v in all {
        // Merge values that differ only by summation order.
        match out.last_mut() {
            Some((last, p)) if (v - *last).abs() <= 1e-12 * (1.0 + v.abs()) => *p += 1.0 / total,
            _ => out.push((v, 1.0 / total)),
        }
    }
    Ok(out)
}
