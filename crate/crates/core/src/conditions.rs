//! Estimators and certifiers for the LIL conditions of a canonical kernel:
//!
//! ```text
//! (a) E_X h(X, y) = 0                                  canonicality
//! (b) limsup_u E(h^2 ∧ u) / L2(u) < ∞                  truncated second moment
//! (c) sup { E h(X,Y) f(X) g(Y) : E f^2, E g^2 <= 1 }   L2 -> L2 operator norm
//! ```
//!
//! plus the truncation statistics
//!
//! ```text
//! f_n(x) = E_Y min(h^2(x, Y), 2^{4n})
//! g_n(x) = E_Y h(x, Y) 1{|h| >= 2^n n^2}
//! c_n    = E h^2 1{2^n n^-2 < |h| <= 2^n n^2}
//! ```
//!
//! Closed forms are used whenever the kernel carries them; otherwise the
//! quantity is estimated by Monte Carlo and labelled as an estimate.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hoeffding::CanonicalityProbe;
use crate::kernel::{sample_stream, Distribution, Kernel};
use crate::linalg::{DenseMatrix, PowerIteration};
use crate::numeric::{geometric_grid, iter_log, iter_log2, mean_and_se, sorted, sorted_quantile, Compensated};

/// Stream ids used by the estimators in this module.
pub mod streams {
    pub const X: u64 = 0;
    pub const Y: u64 = 1;
    pub const CANONICAL: u64 = 11;
    pub const POWER_START: u64 = 12;
    /// Bootstrap resample `r` uses `BOOTSTRAP + r`.
    pub const BOOTSTRAP: u64 = 100;
}

pub const BOOTSTRAP_RESAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Exact closed form.
    Certified,
    /// Monte Carlo or finite-grid estimate.
    Estimated,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncatedMomentCurve {
    pub u_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point standard errors; `None` in analytic mode.
    pub se: Option<Vec<f64>>,
    /// `values / L2(u)`.
    pub ratio: Vec<f64>,
    /// Max of `ratio` over the top third of the grid.
    pub limsup_estimate: f64,
    pub evidence: Evidence,
}

/// Default geometric grid: up to `1e300` with closed forms, `1e12` for Monte Carlo.
pub fn default_u_grid(analytic: bool) -> Vec<f64> {
    if analytic {
        geometric_grid(10.0, 1e300, 600)
    } else {
        geometric_grid(10.0, 1e12, 45)
    }
}

fn check_u_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.is_empty() {
        return Err(Error::InvalidParameter("u grid is empty".into()));
    }
    if !(u_grid[0] >= 10.0) {
        return Err(Error::InvalidParameter(format!("u grid must start at >= 10, got {}", u_grid[0])));
    }
    if u_grid.windows(2).any(|w| !(w[1] > w[0])) || !u_grid.last().unwrap().is_finite() {
        return Err(Error::InvalidParameter("u grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Max of `ratio` over indices `>= 2 len / 3`.
fn tail_third_max(ratio: &[f64]) -> f64 {
    let start = 2 * ratio.len() / 3;
    ratio[start.min(ratio.len() - 1)..].iter().copied().fold(0.0, f64::max)
}

pub fn truncated_moment_curve(
    kernel: &Kernel,
    dist: &Distribution,
    u_grid: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<TruncatedMomentCurve> {
    check_u_grid(u_grid)?;
    let (values, se, evidence) = match kernel.analytic().and_then(|a| a.second_moment.as_ref()) {
        Some(curve) => (u_grid.iter().map(|u| curve.at(*u)).collect(), None, Evidence::Certified),
        None => {
            if mc_samples < 1000 {
                return Err(Error::InvalidParameter(format!(
                    "Monte Carlo truncated moments need >= 1000 samples, got {mc_samples}"
                )));
            }
            let h2 = squared_pairs(kernel, dist, mc_samples, seed)?;
            let mut values = Vec::with_capacity(u_grid.len());
            let mut ses = Vec::with_capacity(u_grid.len());
            let mut buf = vec![0.0; h2.len()];
            for &u in u_grid {
                for (b, v) in buf.iter_mut().zip(&h2) {
                    *b = v.min(u);
                }
                let (m, s) = mean_and_se(&buf);
                values.push(m);
                ses.push(s);
            }
            (values, Some(ses), Evidence::Estimated)
        }
    };
    let ratio: Vec<f64> = values.iter().zip(u_grid).map(|(v, u)| v / iter_log2(*u)).collect();
    Ok(TruncatedMomentCurve {
        u_grid: u_grid.to_vec(),
        limsup_estimate: tail_third_max(&ratio),
        values,
        se,
        ratio,
        evidence,
    })
}

/// `h(X_i, Y_i)^2` for independent pairs.
fn squared_pairs(kernel: &Kernel, dist: &Distribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    let xs = sample_stream(dist, seed, streams::X, n);
    let ys = sample_stream(dist, seed, streams::Y, n);
    xs.iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let v = kernel.eval(x, y);
            if v.is_finite() {
                Ok(v * v)
            } else {
                Err(Error::NonFiniteKernel { x, y, value: v })
            }
        })
        .collect()
}

/// `E(h^2 ∧ u) / L2(u)` for the block kernel `a_n = a`, `b_n = exp(-exp(a^2 n / b))`
/// at `u = exp(ln_u)`, evaluated in log space so that blocks far below the
/// double-precision range still contribute.
pub fn iterated_log_block_ratio(a: f64, b: f64, ln_u: f64) -> f64 {
    let a2 = a * a;
    let ln_a2 = a2.ln();
    let mut acc = Compensated::new();
    let mut n = 1usize;
    loop {
        let ln_b = -(a2 * n as f64 / b).exp();
        // min(a^2, u b_n^2) in log space.
        let ln_term = ln_a2.min(ln_u + 2.0 * ln_b);
        if ln_term < ln_a2 - 745.0 {
            break;
        }
        acc.add(ln_term.exp());
        n += 1;
    }
    // L2(u) = L(L(u)) with L(u) = max(ln u, 1).
    acc.value() / iter_log(ln_u.max(1.0))
}

/// Max of [`iterated_log_block_ratio`] over a `ln u` grid on the top third
/// of `[ln 10, max_ln_u]` (log-spaced in `ln u`).
pub fn iterated_log_block_limsup(a: f64, b: f64, max_ln_u: f64, points: usize) -> f64 {
    let grid = geometric_grid(10f64.ln(), max_ln_u, points);
    let ratio: Vec<f64> = grid.iter().map(|s| iterated_log_block_ratio(a, b, *s)).collect();
    tail_third_max(&ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Analytic,
    SvdEmpirical,
    SchurBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorNormEstimate {
    pub value: f64,
    pub method: NormMethod,
    pub sample_m: usize,
    pub bootstrap_ci: Option<(f64, f64)>,
    pub bootstrap_se: Option<f64>,
}

/// Closed form when the kernel carries one, otherwise [`operator_norm_empirical`].
pub fn operator_norm(kernel: &Kernel, dist: &Distribution, m: usize, seed: u64) -> Result<OperatorNormEstimate> {
    if let Some(v) = kernel.analytic().and_then(|a| a.operator_norm) {
        return Ok(OperatorNormEstimate {
            value: v,
            method: NormMethod::Analytic,
            sample_m: 0,
            bootstrap_ci: None,
            bootstrap_se: None,
        });
    }
    operator_norm_empirical(kernel, dist, m, seed)
}

/// Empirical kernel matrix `M_ij = h(X_i, Y_j)`, `i, j < m`.
pub fn kernel_matrix(kernel: &Kernel, dist: &Distribution, m: usize, seed: u64) -> Result<DenseMatrix> {
    let xs = sample_stream(dist, seed, streams::X, m);
    let ys = sample_stream(dist, seed, streams::Y, m);
    let rows: Vec<Result<Vec<f64>>> = xs
        .par_iter()
        .map(|&x| {
            ys.iter()
                .map(|&y| {
                    let v = kernel.eval(x, y);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFiniteKernel { x, y, value: v })
                    }
                })
                .collect()
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    DenseMatrix::from_rows(&rows)
}

/// `sigma_max(M) / m` with a 32-resample bootstrap interval.
///
/// Resample `r` draws row and column indices with replacement; the
/// resampled matrix equals `D_r^{1/2} M D_c^{1/2}` up to row duplication,
/// where `D` holds multiplicities, so no copy of `M` is made.
pub fn operator_norm_empirical(
    kernel: &Kernel,
    dist: &Distribution,
    m: usize,
    seed: u64,
) -> Result<OperatorNormEstimate> {
    if m < 50 {
        return Err(Error::InvalidParameter(format!("operator norm needs m >= 50, got {m}")));
    }
    let mat = kernel_matrix(kernel, dist, m, seed)?;
    let power = PowerIteration { tol: 1e-8, max_iter: 10_000 };
    let start = sample_stream(&Distribution::Gaussian01, seed, streams::POWER_START, m);
    let full = power.top_singular(&mat, &start)?;
    let scale = 1.0 / m as f64;
    let value = full.sigma * scale;

    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(streams::BOOTSTRAP + r as u64);
            let mut rows = vec![0.0; m];
            let mut cols = vec![0.0; m];
            for _ in 0..m {
                rows[bounded_index(&mut rng, m)] += 1.0;
            }
            for _ in 0..m {
                cols[bounded_index(&mut rng, m)] += 1.0;
            }
            let warm = if full.sigma > 0.0 { full.right.clone() } else { start.clone() };
            power.top_singular_weighted(&mat, &warm, &rows, &cols).map(|t| t.sigma * scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = sorted(&boot);
    let (_, se) = mean_and_se(&boot);
    let lo = sorted_quantile(&s, 0.025).min(value);
    let hi = sorted_quantile(&s, 0.975).max(value);
    Ok(OperatorNormEstimate {
        value,
        method: NormMethod::SvdEmpirical,
        sample_m: m,
        bootstrap_ci: Some((lo, hi)),
        bootstrap_se: Some(se * (BOOTSTRAP_RESAMPLES as f64).sqrt()),
    })
}

/// Uniform index in `0..m` by multiply-shift.
fn bounded_index(rng: &mut ChaCha8Rng, m: usize) -> usize {
    ((rng.next_u64() as u128 * m as u128) >> 64) as usize
}

#[derive(Debug, Clone, Serialize)]
pub struct SchurBound {
    /// `sqrt(s1 s2)`; infinite when either row bound is.
    pub value: f64,
    /// Max over probes of `E_Y |h(x, Y)|`.
    pub s1: f64,
    /// Max over probes of `E_X |h(X, y)|`.
    pub s2: f64,
    pub bounded: bool,
    pub evidence: Evidence,
    pub method: NormMethod,
}

/// Schur-test upper bound `sqrt(s1 s2)` on the operator norm.
///
/// Exact when the kernel carries its conditional law (discrete inputs and
/// block kernels); otherwise the expectations use `probe_m` draws and the
/// suprema run over a quantile grid, so the result is an estimate only.
pub fn schur_bound(kernel: &Kernel, dist: &Distribution, probe_m: usize, seed: u64) -> Result<SchurBound> {
    if probe_m < 100 {
        return Err(Error::InvalidParameter(format!("Schur bound needs probe_m >= 100, got {probe_m}")));
    }
    let (s1, s2, evidence) = if let Some(law) = kernel.analytic().and_then(|a| a.cond_law.clone()) {
        let probes = exact_probes(kernel, dist);
        let abs_mean = |x: f64| -> f64 { law(x).iter().map(|(v, p)| p * v.abs()).sum() };
        let s = probes.iter().map(|x| abs_mean(*x)).fold(0.0, f64::max);
        // Kernels are symmetric, so the row and column bounds coincide.
        (s, s, Evidence::Certified)
    } else {
        let probes = dist.probe_grid(50);
        let ys = sample_stream(dist, seed, streams::Y, probe_m);
        let xs = sample_stream(dist, seed, streams::X, probe_m);
        let row = |x: f64, other: &[f64], flip: bool| -> f64 {
            let mut acc = Compensated::new();
            for &y in other {
                acc.add(if flip { kernel.eval(y, x) } else { kernel.eval(x, y) }.abs());
            }
            acc.value() / other.len() as f64
        };
        let s1 = probes.iter().map(|x| row(*x, &ys, false)).fold(0.0, max_nan);
        let s2 = probes.iter().map(|y| row(*y, &xs, true)).fold(0.0, max_nan);
        (s1, s2, Evidence::Estimated)
    };
    let value = (s1 * s2).sqrt();
    Ok(SchurBound {
        value: if value.is_finite() { value } else { f64::INFINITY },
        s1,
        s2,
        bounded: value.is_finite(),
        evidence,
        method: NormMethod::SchurBound,
    })
}

fn max_nan(a: f64, b: f64) -> f64 {
    if b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

/// Points covering every distinct conditional law: the support of a
/// discrete law, or one interior point per block half.
fn exact_probes(kernel: &Kernel, dist: &Distribution) -> Vec<f64> {
    if let Some(spec) = kernel.block_spec() {
        let mut out = Vec::with_capacity(2 * spec.len() + 1);
        for n in 0..spec.len() {
            let (lo, hi) = spec.support(n);
            out.push(lo + 0.25 * (hi - lo));
            out.push(lo + 0.75 * (hi - lo));
        }
        // A point outside every block, when one exists.
        let end = if spec.is_empty() { 0.0 } else { spec.support(spec.len() - 1).1 };
        if end < 1.0 {
            out.push(0.5 * (end + 1.0));
        }
        return out;
    }
    match dist.support() {
        Some(atoms) => atoms.into_iter().map(|(v, _)| v).collect(),
        None => dist.probe_grid(50),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationProfile {
    pub n_range: (u32, u32),
    pub probes: Vec<f64>,
    /// `f[k][p]` is `f_n` at `probes[p]` for `n = n_range.0 + k`.
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    /// Set if some `2^{4n}` threshold exceeded the double range and was clamped.
    pub clamped: bool,
    pub evidence: Evidence,
}

pub fn truncation_profile(
    kernel: &Kernel,
    dist: &Distribution,
    n_range: (u32, u32),
    probes: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<TruncationProfile> {
    let (lo, hi) = n_range;
    if lo < 1 || hi > 64 || lo > hi {
        return Err(Error::InvalidParameter(format!("n range must lie in [1, 64], got [{lo}, {hi}]")));
    }
    let mut clamped = false;
    let thresholds: Vec<(f64, f64, f64)> = (lo..=hi)
        .map(|n| {
            let nf = n as f64;
            let mut cap = 2f64.powi(4 * n as i32);
            if !cap.is_finite() {
                cap = f64::MAX;
                clamped = true;
            }
            let two_n = 2f64.powi(n as i32);
            (cap, two_n / (nf * nf), two_n * nf * nf)
        })
        .collect();

    let analytic = kernel.analytic();
    let law = analytic.and_then(|a| a.cond_law.clone());
    let curve = analytic.and_then(|a| a.second_moment.clone());
    if let (Some(law), Some(curve)) = (law, curve) {
        let laws: Vec<Vec<(f64, f64)>> = probes.iter().map(|x| law(*x)).collect();
        let mut f = Vec::new();
        let mut g = Vec::new();
        let mut c = Vec::new();
        for &(cap, band_lo, band_hi) in &thresholds {
            f.push(laws.iter().map(|l| l.iter().map(|(v, p)| p * (v * v).min(cap)).sum()).collect());
            g.push(
                laws.iter()
                    .map(|l| l.iter().filter(|(v, _)| v.abs() >= band_hi).map(|(v, p)| p * v).sum())
                    .collect(),
            );
            c.push(curve.band_second_moment(band_lo, band_hi));
        }
        return Ok(TruncationProfile {
            n_range,
            probes: probes.to_vec(),
            f,
            g,
            c,
            clamped,
            evidence: Evidence::Certified,
        });
    }

    if mc_samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo truncation profile needs >= 1000 samples, got {mc_samples}"
        )));
    }
    let ys = sample_stream(dist, seed, streams::Y, mc_samples);
    let rows: Vec<Vec<f64>> = probes
        .iter()
        .map(|&x| {
            ys.iter()
                .map(|&y| {
                    let v = kernel.eval(x, y);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFiniteKernel { x, y, value: v })
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let xs = sample_stream(dist, seed, streams::X, mc_samples);
    let pairs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| kernel.eval(*x, *y)).collect();
    let inv = 1.0 / mc_samples as f64;
    let mut f = Vec::new();
    let mut g = Vec::new();
    let mut c = Vec::new();
    for &(cap, band_lo, band_hi) in &thresholds {
        f.push(
            rows.iter()
                .map(|r| r.iter().map(|v| (v * v).min(cap)).collect::<Compensated>().value() * inv)
                .collect(),
        );
        g.push(
            rows.iter()
                .map(|r| r.iter().filter(|v| v.abs() >= band_hi).copied().collect::<Compensated>().value() * inv)
                .collect(),
        );
        c.push(
            pairs
                .iter()
                .filter(|v| v.abs() > band_lo && v.abs() <= band_hi)
                .map(|v| v * v)
                .collect::<Compensated>()
                .value()
                * inv,
        );
    }
    Ok(TruncationProfile {
        n_range,
        probes: probes.to_vec(),
        f,
        g,
        c,
        clamped,
        evidence: Evidence::Estimated,
    })
}

#[derive(Debug, Clone)]
pub struct CertifyConfig {
    /// `None` selects [`default_u_grid`].
    pub u_grid: Option<Vec<f64>>,
    pub mc_samples: usize,
    /// Sample size of the empirical operator norm.
    pub norm_m: usize,
    /// Sample size of the Monte Carlo canonicality check.
    pub canonical_m: usize,
    pub probes: usize,
    /// Canonicality threshold in standard errors.
    pub z: f64,
    pub schur_m: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            u_grid: None,
            mc_samples: 100_000,
            norm_m: 2000,
            canonical_m: 10_000,
            probes: 20,
            z: 4.0,
            schur_m: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalCheck {
    pub tag: &'static str,
    pub pass: bool,
    pub evidence: Evidence,
    /// Largest `|E_X h(X, y)|` over the probes.
    pub max_abs_mean: f64,
    pub probes: Vec<CanonicalityProbe>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCondition {
    pub tag: &'static str,
    pub pass: bool,
    pub evidence: Evidence,
    pub limsup: f64,
    pub u_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormCondition {
    pub tag: &'static str,
    pub pass: bool,
    pub evidence: Evidence,
    pub estimate: OperatorNormEstimate,
    pub schur: SchurBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub kernel: String,
    pub dist: String,
    pub canonical: CanonicalCheck,
    pub cond_b: MomentCondition,
    pub cond_c: NormCondition,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.canonical.pass && self.cond_b.pass && self.cond_c.pass
    }

    pub fn summary(&self) -> String {
        let mark = |p: bool| if p { "pass" } else { "FAIL" };
        let ev = |e: Evidence| match e {
            Evidence::Certified => "certified",
            Evidence::Estimated => "estimated",
        };
        let ci = match self.cond_c.estimate.bootstrap_ci {
            Some((lo, hi)) => format!(" [{lo:.4}, {hi:.4}]"),
            None => String::new(),
        };
        format!(
            "kernel {} under {}\n  canonical  {}  ({}, max |E_X h(X,y)| = {:.3e})\n  \
             cond_b     {}  ({}, limsup E(h^2 ∧ u)/L2u ≈ {:.6} up to u = {:.1e})\n  \
             cond_c     {}  ({}, operator norm = {:.6}{ci}, Schur bound = {:.6})\n",
            self.kernel,
            self.dist,
            mark(self.canonical.pass),
            ev(self.canonical.evidence),
            self.canonical.max_abs_mean,
            mark(self.cond_b.pass),
            ev(self.cond_b.evidence),
            self.cond_b.limsup,
            self.cond_b.u_max,
            mark(self.cond_c.pass),
            ev(self.cond_c.evidence),
            self.cond_c.estimate.value,
            self.cond_c.schur.value,
        )
    }
}

/// Canonicality of `h` itself (not of its projection): `E_X h(X, y) = 0`
/// on a quantile probe grid.
pub fn canonicality_check(kernel: &Kernel, dist: &Distribution, cfg: &CertifyConfig) -> CanonicalCheck {
    const TAG: &str = "canonical: E_X h(X,y) = 0";
    let probes = match kernel.block_spec() {
        Some(_) => exact_probes(kernel, dist),
        None => dist.probe_grid(cfg.probes),
    };
    if let Some(cond) = kernel.analytic().and_then(|a| a.cond_mean.clone()) {
        let rows: Vec<CanonicalityProbe> = probes
            .iter()
            .map(|&y| CanonicalityProbe { y, mean: cond(y), sd: 0.0, se: 0.0 })
            .collect();
        let max_abs_mean = rows.iter().map(|p| p.mean.abs()).fold(0.0, f64::max);
        return CanonicalCheck {
            tag: TAG,
            pass: rows.iter().all(|p| p.passes(cfg.z)),
            evidence: Evidence::Certified,
            max_abs_mean,
            probes: rows,
        };
    }
    let xs = sample_stream(dist, cfg.seed, streams::CANONICAL, cfg.canonical_m);
    let rows: Vec<CanonicalityProbe> = probes
        .iter()
        .map(|&y| {
            let col: Vec<f64> = xs.iter().map(|x| kernel.eval(*x, y)).collect();
            let (mean, se) = mean_and_se(&col);
            CanonicalityProbe { y, mean, sd: se * (col.len() as f64).sqrt(), se }
        })
        .collect();
    let max_abs_mean = rows.iter().map(|p| p.mean.abs()).fold(0.0, max_nan);
    CanonicalCheck {
        tag: TAG,
        pass: rows.iter().all(|p| p.passes(cfg.z)),
        evidence: Evidence::Estimated,
        max_abs_mean,
        probes: rows,
    }
}

pub fn certify(kernel: &Kernel, dist: &Distribution, cfg: &CertifyConfig) -> Result<ConditionReport> {
    let canonical = canonicality_check(kernel, dist, cfg);

    let analytic_curve = kernel.analytic().is_some_and(|a| a.second_moment.is_some());
    let grid = cfg.u_grid.clone().unwrap_or_else(|| default_u_grid(analytic_curve));
    let curve = truncated_moment_curve(kernel, dist, &grid, cfg.mc_samples, cfg.seed)?;
    let cond_b = MomentCondition {
        tag: "cond_b: limsup_u E(h^2 ∧ u) / L2(u) < inf",
        pass: curve.limsup_estimate.is_finite(),
        evidence: curve.evidence,
        limsup: curve.limsup_estimate,
        u_max: *grid.last().unwrap(),
    };

    let estimate = operator_norm(kernel, dist, cfg.norm_m, cfg.seed)?;
    let schur = schur_bound(kernel, dist, cfg.schur_m, cfg.seed)?;
    let cond_c = NormCondition {
        tag: "cond_c: sup E h(X,Y) f(X) g(Y) over unit L2 f, g",
        pass: estimate.value.is_finite(),
        evidence: if estimate.method == NormMethod::Analytic { Evidence::Certified } else { Evidence::Estimated },
        estimate,
        schur,
    };

    Ok(ConditionReport {
        kernel: kernel.name().to_string(),
        dist: dist.to_string(),
        canonical,
        cond_b,
        cond_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{catalog, KernelSpec};

    fn kernel(s: &str, d: &Distribution) -> Kernel {
        catalog(&s.parse::<KernelSpec>().unwrap(), d).unwrap()
    }

    #[test]
    fn product_rademacher_curve() {
        let d = Distribution::Rademacher;
        let grid = default_u_grid(true);
        let c = truncated_moment_curve(&kernel("product", &d), &d, &grid, 0, 1).unwrap();
        assert_eq!(c.evidence, Evidence::Certified);
        for (r, u) in c.ratio.iter().zip(&grid) {
            assert_eq!(*r, 1.0 / iter_log2(*u));
        }
        assert!(c.limsup_estimate < 0.17);
    }

    #[test]
    fn zero_kernel_curve() {
        let d = Distribution::Uniform01;
        let c = truncated_moment_curve(&kernel("zero", &d), &d, &default_u_grid(true), 0, 1).unwrap();
        assert!(c.values.iter().all(|v| *v == 0.0));
        assert_eq!(c.limsup_estimate, 0.0);
    }

    #[test]
    fn curve_validation() {
        let d = Distribution::Gaussian01;
        let k = kernel("product", &d);
        assert!(truncated_moment_curve(&k, &d, &[5.0, 50.0], 5000, 1).is_err());
        assert!(truncated_moment_curve(&k, &d, &[50.0, 20.0], 5000, 1).is_err());
        assert!(truncated_moment_curve(&k, &d, &[20.0, 50.0], 999, 1).is_err());
    }

    #[test]
    fn mc_curve_monotone_and_matches_atoms() {
        let d = Distribution::discrete(vec![-2.0, 0.5], vec![0.2, 0.8]).unwrap();
        let k = kernel("product", &d);
        let grid = [10.0, 12.0, 15.0, 20.0, 100.0];
        let exact = truncated_moment_curve(&k, &d, &grid, 0, 1).unwrap();
        let mc = truncated_moment_curve(&k.without_analytic(), &d, &grid, 50_000, 3).unwrap();
        let se = mc.se.as_ref().unwrap();
        for i in 0..grid.len() {
            assert!((mc.values[i] - exact.values[i]).abs() <= 4.0 * se[i] + 1e-12);
            if i > 0 {
                assert!(mc.values[i] >= mc.values[i - 1]);
            }
        }
    }

    #[test]
    fn log_space_ratio_matches_direct_curve() {
        let d = Distribution::Uniform01;
        let k = kernel("lil_block:a=1;b=2", &d);
        let curve = k.analytic().unwrap().second_moment.clone().unwrap();
        for u in [1e3, 1e40, 1e200] {
            let direct = curve.at(u) / iter_log2(u);
            let logspace = iterated_log_block_ratio(1.0, 2.0, u.ln());
            assert!((direct - logspace).abs() <= 1e-12 * direct.max(1.0), "u={u}");
        }
    }

    #[test]
    fn analytic_norms() {
        let d = Distribution::Uniform01;
        let k = kernel("block:a=0.5,0.2,0.9;b=0.1,0.1,0.1", &d);
        let e = operator_norm(&k, &d, 100, 0).unwrap();
        assert_eq!(e.value, 0.9);
        assert_eq!(e.method, NormMethod::Analytic);
        let z = kernel("zero", &d);
        assert_eq!(operator_norm(&z, &d, 100, 0).unwrap().value, 0.0);
        assert_eq!(operator_norm_empirical(&z, &d, 100, 0).unwrap().value, 0.0);
    }

    #[test]
    fn empirical_product_rademacher() {
        // Oracle: M = x y^T with |x| = |y| = sqrt(m), so sigma / m = 1 exactly.
        let d = Distribution::Rademacher;
        let k = kernel("product", &d).without_analytic();
        let e = operator_norm_empirical(&k, &d, 200, 5).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        let (lo, hi) = e.bootstrap_ci.unwrap();
        assert!(lo <= e.value && e.value <= hi);
    }

    #[test]
    fn empirical_norm_rejects_small_m() {
        let d = Distribution::Uniform01;
        assert!(operator_norm_empirical(&kernel("min", &d), &d, 49, 0).is_err());
    }

    #[test]
    fn schur_examples() {
        let r = Distribution::Rademacher;
        assert!((schur_bound(&kernel("product", &r), &r, 100, 0).unwrap().value - 1.0).abs() < 1e-15);
        assert!((schur_bound(&kernel("product:scale=2", &r), &r, 100, 0).unwrap().value - 2.0).abs() < 1e-15);
        let u = Distribution::Uniform01;
        let one = schur_bound(&kernel("constant:c=1", &u), &u, 100, 0).unwrap();
        assert_eq!(one.value, 1.0);
        let b = schur_bound(&kernel("block:a=0.5,0.2,0.9;b=0.1,0.1,0.1", &u), &u, 100, 0).unwrap();
        assert!((b.value - 0.9).abs() < 1e-12);
        assert!(schur_bound(&kernel("min", &u), &u, 99, 0).is_err());
    }

    #[test]
    fn truncation_product_rademacher() {
        let d = Distribution::Rademacher;
        let p = truncation_profile(&kernel("product", &d), &d, (1, 10), &[-1.0, 1.0], 0, 0).unwrap();
        for row in &p.f {
            assert_eq!(row, &vec![1.0, 1.0]);
        }
        assert!(p.g.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn truncation_bounded_kernel_g_vanishes() {
        let d = Distribution::Uniform01;
        let k = kernel("min", &d).without_analytic();
        let p = truncation_profile(&k, &d, (1, 8), &d.probe_grid(5), 2000, 0).unwrap();
        // |h| <= 1 < 2^n n^2 for every n >= 1.
        assert!(p.g.iter().flatten().all(|v| *v == 0.0));
        for k in 1..p.f.len() {
            for (a, b) in p.f[k].iter().zip(&p.f[k - 1]) {
                assert!(a >= b);
            }
        }
        assert!(truncation_profile(&k, &d, (0, 8), &[0.5], 2000, 0).is_err());
        assert!(truncation_profile(&k, &d, (1, 65), &[0.5], 2000, 0).is_err());
    }

    #[test]
    fn certify_sum_kernel_fails_canonicality() {
        let d = Distribution::Gaussian01;
        let report = certify(&kernel("sum", &d), &d, &CertifyConfig::default()).unwrap();
        assert!(!report.canonical.pass);
    }

    #[test]
    fn certify_product_rademacher() {
        let d = Distribution::Rademacher;
        let report = certify(&kernel("product", &d), &d, &CertifyConfig::default()).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.cond_c.estimate.value, 1.0);
        assert!(report.cond_b.limsup < 0.17);
    }
}
