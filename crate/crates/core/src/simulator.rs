//! Monte Carlo trajectories of degenerate U-statistics at dyadic checkpoints.
//!
//! Every checkpoint `n = 2^k` reports two normalizations of the raw sum `S_n`:
//!
//! ```text
//! normalized_lil        S_n / (n L2 n)     limsup target of the LIL
//! normalized_limit_set  S_n / (2 n L2 n)   sequence whose limit set is the numerical range
//! ```
//!
//! with `L(x) = max(ln x, 1)` and `L2 = L ∘ L`. Both are always emitted so
//! the factor of two never has to be inferred downstream.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::ConditionReport;
use crate::error::{Error, Result};
use crate::hoeffding::{Draw, SeparableAccumulator, SumVariant};
use crate::kernel::{sample_stream, Distribution, Kernel, SampleStream};
use crate::numeric::{iter_log2, mean_and_se, sorted, sorted_quantile, Compensated};

pub const GENERIC_MAX_EXPONENT: u32 = 14;
pub const SEPARABLE_MAX_EXPONENT: u32 = 26;

/// Stream ids of the trajectory inputs.
pub mod streams {
    pub const X: u64 = 0;
    pub const Y: u64 = 1;
    pub const EPS: u64 = 2;
    pub const EPS2: u64 = 3;
    pub const GRAM: u64 = 20;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Incremental row sums, O(n) kernel evaluations per appended sample.
    Generic,
    /// Per-rank partial sums, O(rank) per appended sample.
    Separable,
}

impl Engine {
    pub fn max_exponent(self) -> u32 {
        match self {
            Engine::Generic => GENERIC_MAX_EXPONENT,
            Engine::Separable => SEPARABLE_MAX_EXPONENT,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Generic => "generic",
            Engine::Separable => "separable",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Engine::Generic),
            "separable" => Ok(Engine::Separable),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub variant: SumVariant,
    /// Last checkpoint is `n = 2^max_exponent`.
    pub max_exponent: u32,
    /// First checkpoint is `n = 2^min_exponent` (default 1).
    pub min_exponent: u32,
    pub seeds: Vec<u64>,
    pub engine: Engine,
}

impl TrajectoryConfig {
    pub fn new(variant: SumVariant, max_exponent: u32, seeds: Vec<u64>, engine: Engine) -> Self {
        Self { variant, max_exponent, min_exponent: 1, seeds, engine }
    }

    pub fn validate(&self, kernel: &Kernel) -> Result<()> {
        let cap = self.engine.max_exponent();
        if self.max_exponent > cap {
            return Err(Error::InvalidParameter(format!(
                "{} engine supports max_exponent <= {cap}, got {}",
                self.engine, self.max_exponent
            )));
        }
        if self.min_exponent > self.max_exponent {
            return Err(Error::InvalidParameter(format!(
                "min_exponent {} exceeds max_exponent {}",
                self.min_exponent, self.max_exponent
            )));
        }
        if self.engine == Engine::Separable && kernel.separable().is_none() {
            return Err(Error::MissingSeparable);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub k: u32,
    pub n: u64,
    pub raw_sum: f64,
    pub normalized_lil: f64,
    pub normalized_limit_set: f64,
    pub abs_normalized: f64,
    /// `max |S_m| / (n L2 n)` over `2^(k-1) < m <= 2^k`; separable engine only.
    pub block_max_abs_normalized: Option<f64>,
}

impl Checkpoint {
    fn new(k: u32, n: u64, raw_sum: f64, block_max: Option<f64>) -> Self {
        let denom = n as f64 * iter_log2(n as f64);
        let lil = raw_sum / denom;
        Self {
            k,
            n,
            raw_sum,
            normalized_lil: lil,
            normalized_limit_set: raw_sum / (2.0 * denom),
            abs_normalized: lil.abs(),
            block_max_abs_normalized: block_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryResult {
    pub seed: u64,
    pub variant: SumVariant,
    pub engine: Engine,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrajectoryResult {
    /// `sup { abs_normalized at 2^k : k >= from_k }`; 0 on an empty tail.
    pub fn running_sup_from(&self, from_k: u32) -> f64 {
        self.checkpoints
            .iter()
            .filter(|c| c.k >= from_k)
            .map(|c| c.abs_normalized)
            .fold(0.0, f64::max)
    }
}

/// Runs every seed of `config` in parallel; results follow the seed order.
pub fn run_trajectories(
    kernel: &Kernel,
    dist: &Distribution,
    config: &TrajectoryConfig,
) -> Result<Vec<TrajectoryResult>> {
    config.validate(kernel)?;
    config
        .seeds
        .par_iter()
        .map(|&seed| run_trajectory(kernel, dist, config, seed))
        .collect()
}

/// One seed of `config`.
pub fn run_trajectory(
    kernel: &Kernel,
    dist: &Distribution,
    config: &TrajectoryConfig,
    seed: u64,
) -> Result<TrajectoryResult> {
    config.validate(kernel)?;
    let checkpoints = match config.engine {
        Engine::Generic => generic(kernel, dist, config, seed)?,
        Engine::Separable => separable(kernel, dist, config, seed)?,
    };
    Ok(TrajectoryResult { seed, variant: config.variant, engine: config.engine, checkpoints })
}

struct Inputs {
    x: SampleStream,
    y: SampleStream,
    eps: SampleStream,
    eps2: SampleStream,
}

impl Inputs {
    fn new(dist: &Distribution, seed: u64) -> Self {
        Self {
            x: SampleStream::new(dist.clone(), seed, streams::X, 0),
            y: SampleStream::new(dist.clone(), seed, streams::Y, 0),
            eps: SampleStream::new(Distribution::Rademacher, seed, streams::EPS, 0),
            eps2: SampleStream::new(Distribution::Rademacher, seed, streams::EPS2, 0),
        }
    }

    /// Streams a variant does not use are not advanced.
    fn next(&mut self, variant: SumVariant) -> Draw {
        Draw {
            x: self.x.next_sample(),
            y: if variant.is_decoupled() { self.y.next_sample() } else { 0.0 },
            eps: if variant.is_randomized() { self.eps.next_sample() } else { 1.0 },
            eps2: if variant == SumVariant::DecoupledRandomized { self.eps2.next_sample() } else { 1.0 },
        }
    }
}

fn finite(raw: f64, n: u64) -> Result<f64> {
    if raw.is_finite() {
        Ok(raw)
    } else {
        Err(Error::Numerical(format!("raw sum is not finite at n = {n}")))
    }
}

fn generic(kernel: &Kernel, dist: &Distribution, config: &TrajectoryConfig, seed: u64) -> Result<Vec<Checkpoint>> {
    let variant = config.variant;
    let total = 1usize << config.max_exponent;
    let mut inputs = Inputs::new(dist, seed);
    let mut xs = Vec::with_capacity(total);
    let mut ys = Vec::with_capacity(if variant.is_decoupled() { total } else { 0 });
    // Weights w_i = eps_i (or 1) and w2_j = eps2_j (or 1).
    let mut ws = Vec::with_capacity(total);
    let mut w2s = Vec::with_capacity(if variant.is_decoupled() { total } else { 0 });
    let mut sum = Compensated::new();
    let mut out = Vec::new();
    let mut next_k = config.min_exponent;
    for idx in 0..total {
        let d = inputs.next(variant);
        let n = idx + 1;
        let mut row = Compensated::new();
        if variant.is_decoupled() {
            // New row i = n and new column j = n of the n x n square.
            for j in 0..idx {
                row.add(d.eps * w2s[j] * kernel.eval(d.x, ys[j]));
            }
            for i in 0..idx {
                row.add(ws[i] * d.eps2 * kernel.eval(xs[i], d.y));
            }
            row.add(d.eps * d.eps2 * kernel.eval(d.x, d.y));
            sum.add(row.value());
            xs.push(d.x);
            ys.push(d.y);
            ws.push(d.eps);
            w2s.push(d.eps2);
        } else {
            for i in 0..idx {
                row.add(ws[i] * kernel.eval(xs[i], d.x));
            }
            // Both (i, n) and (n, i) enter the off-diagonal sum.
            sum.add(2.0 * d.eps * row.value());
            xs.push(d.x);
            ws.push(d.eps);
        }
        if n == 1usize << next_k {
            let raw = finite(sum.value(), n as u64)?;
            out.push(Checkpoint::new(next_k, n as u64, raw, None));
            next_k += 1;
        }
    }
    Ok(out)
}

fn separable(kernel: &Kernel, dist: &Distribution, config: &TrajectoryConfig, seed: u64) -> Result<Vec<Checkpoint>> {
    let sep = kernel.separable().ok_or(Error::MissingSeparable)?;
    let variant = config.variant;
    let total = 1u64 << config.max_exponent;
    let mut inputs = Inputs::new(dist, seed);
    let mut acc = SeparableAccumulator::new(sep, variant);
    let mut out = Vec::new();
    let mut next_k = config.min_exponent;
    let mut block_max = 0.0f64;
    for n in 1..=total {
        acc.push(inputs.next(variant));
        if n <= 1u64 << next_k.saturating_sub(1) && next_k > 0 {
            continue;
        }
        let v = acc.value();
        block_max = block_max.max(v.abs());
        if n == 1u64 << next_k {
            let raw = finite(v, n)?;
            let denom = n as f64 * iter_log2(n as f64);
            out.push(Checkpoint::new(next_k, n, raw, Some(block_max / denom)));
            block_max = 0.0;
            next_k += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `|S_n| / (n L2 n)`.
    Lil,
    /// `|S_n| / (2 n L2 n)`.
    LimitSet,
}

impl Normalization {
    fn abs_value(self, c: &Checkpoint) -> f64 {
        match self {
            Normalization::Lil => c.abs_normalized,
            Normalization::LimitSet => c.normalized_limit_set.abs(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimsupStats {
    pub normalization: Normalization,
    pub burn_in_exponent: u32,
    /// `(seed, sup over k >= burn_in of the normalized |S_{2^k}|)`.
    pub per_seed_tail_sup: Vec<(u64, f64)>,
    pub median: f64,
    /// `(q25, q75)`.
    pub iqr: (f64, f64),
}

/// Per-seed tail suprema over checkpoints `k >= burn_in_exponent`.
pub fn limsup_estimate(
    results: &[TrajectoryResult],
    burn_in_exponent: u32,
    normalization: Normalization,
) -> Result<LimsupStats> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("no trajectories".into()));
    }
    let mut per_seed = Vec::with_capacity(results.len());
    for r in results {
        let max_k = r.checkpoints.last().map_or(0, |c| c.k);
        if burn_in_exponent >= max_k {
            return Err(Error::InvalidParameter(format!(
                "burn-in exponent {burn_in_exponent} must be below max exponent {max_k}"
            )));
        }
        let tail: Vec<f64> = r
            .checkpoints
            .iter()
            .filter(|c| c.k >= burn_in_exponent)
            .map(|c| normalization.abs_value(c))
            .collect();
        if tail.is_empty() {
            return Err(Error::InvalidParameter(format!("seed {}: empty tail", r.seed)));
        }
        per_seed.push((r.seed, tail.into_iter().fold(0.0, f64::max)));
    }
    let s = sorted(&per_seed.iter().map(|(_, v)| *v).collect::<Vec<_>>());
    Ok(LimsupStats {
        normalization,
        burn_in_exponent,
        median: sorted_quantile(&s, 0.5),
        iqr: (sorted_quantile(&s, 0.25), sorted_quantile(&s, 0.75)),
        per_seed_tail_sup: per_seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSetEstimate {
    /// Signed `S_n / (2 n L2 n)` beyond burn-in, all seeds.
    pub points: Vec<f64>,
    pub hull: (f64, f64),
    /// `(lo, hi, count)` bins over the hull.
    pub histogram: Vec<(f64, f64, usize)>,
    /// Numerical range of the kernel's operator, when known.
    pub predicted: Option<(f64, f64)>,
    /// `|hull ∩ predicted| / |predicted|`; 1 when the predicted interval is a point.
    pub coverage: Option<f64>,
}

pub const HISTOGRAM_BINS: usize = 40;

pub fn limit_set_estimate(
    results: &[TrajectoryResult],
    burn_in_exponent: u32,
    predicted: Option<(f64, f64)>,
) -> Result<LimitSetEstimate> {
    if results.is_empty() {
        return Err(Error::InvalidParameter("no trajectories".into()));
    }
    let mut points = Vec::new();
    for r in results {
        if r.variant != SumVariant::PlainOffdiag {
            return Err(Error::InvalidParameter(format!(
                "limit set needs the plain_offdiag variant, got {}",
                r.variant
            )));
        }
        let max_k = r.checkpoints.last().map_or(0, |c| c.k);
        if burn_in_exponent >= max_k {
            return Err(Error::InvalidParameter(format!(
                "burn-in exponent {burn_in_exponent} must be below max exponent {max_k}"
            )));
        }
        points.extend(r.checkpoints.iter().filter(|c| c.k >= burn_in_exponent).map(|c| c.normalized_limit_set));
    }
    let lo = points.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut histogram: Vec<(f64, f64, usize)> = (0..HISTOGRAM_BINS)
        .map(|i| (lo + i as f64 * width, lo + (i + 1) as f64 * width, 0))
        .collect();
    histogram.last_mut().unwrap().1 = hi;
    for p in &points {
        let i = if width > 0.0 { (((p - lo) / width) as usize).min(HISTOGRAM_BINS - 1) } else { 0 };
        histogram[i].2 += 1;
    }
    let coverage = predicted.map(|(plo, phi)| {
        if phi <= plo {
            1.0
        } else {
            ((hi.min(phi) - lo.max(plo)).max(0.0)) / (phi - plo)
        }
    });
    Ok(LimitSetEstimate { points, hull: (lo, hi), histogram, predicted, coverage })
}

/// `(min(lambda_min, 0), max(lambda_max, 0))` after checking that the
/// expansion's basis is orthonormal under `dist`: every Gram entry
/// `E phi_a(X) phi_b(X)` must be within 3 standard errors of `delta_ab`
/// on `gram_samples` draws.
pub fn numerical_range(kernel: &Kernel, dist: &Distribution, gram_samples: usize, seed: u64) -> Result<(f64, f64)> {
    let sep = kernel.separable().ok_or(Error::MissingSeparable)?;
    if gram_samples < 100 {
        return Err(Error::InvalidParameter(format!("Gram check needs >= 100 samples, got {gram_samples}")));
    }
    let xs = sample_stream(dist, seed, streams::GRAM, gram_samples);
    let phis: Vec<Vec<f64>> = sep.terms.iter().map(|(_, p)| xs.iter().map(|x| p.eval(*x)).collect()).collect();
    for a in 0..phis.len() {
        for b in a..phis.len() {
            let prod: Vec<f64> = phis[a].iter().zip(&phis[b]).map(|(u, v)| u * v).collect();
            let (mean, se) = mean_and_se(&prod);
            let target = if a == b { 1.0 } else { 0.0 };
            if (mean - target).abs() > 3.0 * se + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "basis is not orthonormal under {dist}: Gram entry ({a}, {b}) = {mean:.6} ± {se:.2e}, expected {target}"
                )));
            }
        }
    }
    let eig = sep.eigenvalues();
    let lo = eig.iter().copied().fold(0.0, f64::min);
    let hi = eig.iter().copied().fold(0.0, f64::max);
    Ok((lo, hi))
}

pub const DEFAULT_PLAUSIBILITY_BAND: (f64, f64) = (1.0 / 50.0, 50.0);

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub tag: &'static str,
    /// `K = ||h|| + sqrt(limsup E(h^2 ∧ u) / L2 u)`.
    pub k_value: f64,
    pub operator_norm: f64,
    pub moment_limsup: f64,
    /// Median empirical tail sup.
    pub empirical: f64,
    /// `empirical / K`; 1 when both vanish.
    pub ratio: f64,
    pub band: (f64, f64),
    pub in_band: bool,
}

/// Compares the certified scale `K` with the empirical limsup. The constant
/// relating the two is universal but unknown, so this is a diagnostic.
pub fn sandwich_report(report: &ConditionReport, limsup: &LimsupStats, band: (f64, f64)) -> SandwichReport {
    let operator_norm = report.cond_c.estimate.value;
    let moment_limsup = report.cond_b.limsup;
    let k_value = operator_norm + moment_limsup.max(0.0).sqrt();
    let empirical = limsup.median;
    let ratio = if k_value == 0.0 && empirical == 0.0 {
        1.0
    } else if k_value == 0.0 {
        f64::INFINITY
    } else {
        empirical / k_value
    };
    SandwichReport {
        tag: "sandwich: limsup |S_n| / (n L2 n) vs ||h|| + sqrt(limsup E(h^2 ∧ u) / L2 u)",
        k_value,
        operator_norm,
        moment_limsup,
        empirical,
        ratio,
        band,
        in_band: ratio >= band.0 && ratio <= band.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{catalog, KernelSpec};

    fn kernel(s: &str, d: &Distribution) -> Kernel {
        catalog(&s.parse::<KernelSpec>().unwrap(), d).unwrap()
    }

    fn cfg(variant: SumVariant, max_k: u32, engine: Engine) -> TrajectoryConfig {
        TrajectoryConfig::new(variant, max_k, vec![1], engine)
    }

    #[test]
    fn product_identity_generic() {
        let d = Distribution::Rademacher;
        let k = kernel("product", &d);
        let r = run_trajectory(&k, &d, &cfg(SumVariant::PlainOffdiag, 10, Engine::Generic), 7).unwrap();
        let xs = sample_stream(&d, 7, streams::X, 1 << 10);
        for c in &r.checkpoints {
            let s: f64 = xs[..c.n as usize].iter().sum();
            assert_eq!(c.raw_sum, s * s - c.n as f64);
        }
        assert_eq!(r.checkpoints.len(), 10);
    }

    #[test]
    fn n_equals_one_is_zero() {
        let d = Distribution::Uniform01;
        let k = kernel("min", &d);
        let mut c = cfg(SumVariant::PlainOffdiag, 2, Engine::Generic);
        c.min_exponent = 0;
        let r = run_trajectory(&k, &d, &c, 3).unwrap();
        assert_eq!(r.checkpoints[0].n, 1);
        assert_eq!(r.checkpoints[0].raw_sum, 0.0);
    }

    #[test]
    fn engine_caps() {
        let d = Distribution::Gaussian01;
        let k = kernel("product", &d);
        assert!(cfg(SumVariant::PlainOffdiag, 15, Engine::Generic).validate(&k).is_err());
        assert!(cfg(SumVariant::PlainOffdiag, 26, Engine::Separable).validate(&k).is_ok());
        assert!(cfg(SumVariant::PlainOffdiag, 27, Engine::Separable).validate(&k).is_err());
        let m = kernel("min", &Distribution::Uniform01);
        assert!(matches!(cfg(SumVariant::PlainOffdiag, 4, Engine::Separable).validate(&m), Err(Error::MissingSeparable)));
    }

    #[test]
    fn engines_agree_all_variants() {
        let d = Distribution::Gaussian01;
        let k = kernel("finite_rank:lambda=2,-1;basis=hermite", &d);
        for v in SumVariant::ALL {
            let a = run_trajectory(&k, &d, &cfg(v, 8, Engine::Generic), 11).unwrap();
            let b = run_trajectory(&k, &d, &cfg(v, 8, Engine::Separable), 11).unwrap();
            for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
                let scale = x.raw_sum.abs().max(y.raw_sum.abs());
                assert!((x.raw_sum - y.raw_sum).abs() <= 1e-10 * scale, "{v} n={}", x.n);
            }
        }
    }

    #[test]
    fn block_max_dominates_checkpoint() {
        let d = Distribution::Rademacher;
        let k = kernel("product", &d);
        let r = run_trajectory(&k, &d, &cfg(SumVariant::Randomized, 12, Engine::Separable), 2).unwrap();
        for c in &r.checkpoints {
            assert!(c.block_max_abs_normalized.unwrap() >= c.abs_normalized);
        }
    }

    #[test]
    fn running_sup_nonincreasing() {
        let d = Distribution::Rademacher;
        let k = kernel("product", &d);
        let r = run_trajectory(&k, &d, &cfg(SumVariant::PlainOffdiag, 16, Engine::Separable), 5).unwrap();
        let sups: Vec<f64> = (1..=16).map(|k| r.running_sup_from(k)).collect();
        assert!(sups.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_kernel_limsup_and_limit_set() {
        let d = Distribution::Uniform01;
        let k = kernel("zero", &d);
        let c = TrajectoryConfig::new(SumVariant::PlainOffdiag, 10, vec![1, 2, 3], Engine::Separable);
        let rs = run_trajectories(&k, &d, &c).unwrap();
        let s = limsup_estimate(&rs, 5, Normalization::Lil).unwrap();
        assert_eq!(s.median, 0.0);
        let range = numerical_range(&k, &d, 1000, 0).unwrap();
        assert_eq!(range, (0.0, 0.0));
        let ls = limit_set_estimate(&rs, 5, Some(range)).unwrap();
        assert_eq!(ls.hull, (0.0, 0.0));
    }

    #[test]
    fn limsup_rejects_bad_burn_in() {
        let d = Distribution::Rademacher;
        let k = kernel("product", &d);
        let r = run_trajectory(&k, &d, &cfg(SumVariant::PlainOffdiag, 6, Engine::Separable), 1).unwrap();
        assert!(limsup_estimate(std::slice::from_ref(&r), 6, Normalization::Lil).is_err());
        assert!(limsup_estimate(&[], 1, Normalization::Lil).is_err());
        let rd = run_trajectory(&k, &d, &cfg(SumVariant::Decoupled, 6, Engine::Separable), 1).unwrap();
        assert!(limit_set_estimate(&[rd], 2, None).is_err());
    }

    #[test]
    fn scaling_is_exact_for_powers_of_two() {
        let d = Distribution::Rademacher;
        let k = kernel("product", &d);
        let k2 = kernel("product:scale=-2", &d);
        let a = run_trajectory(&k, &d, &cfg(SumVariant::PlainOffdiag, 10, Engine::Generic), 4).unwrap();
        let b = run_trajectory(&k2, &d, &cfg(SumVariant::PlainOffdiag, 10, Engine::Generic), 4).unwrap();
        for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
            assert_eq!(-2.0 * x.normalized_lil, y.normalized_lil);
        }
    }

    #[test]
    fn numerical_range_examples() {
        let g = Distribution::Gaussian01;
        assert_eq!(numerical_range(&kernel("finite_rank:lambda=2,-1", &g), &g, 5000, 0).unwrap(), (-1.0, 2.0));
        assert_eq!(numerical_range(&kernel("finite_rank:lambda=3", &g), &g, 5000, 0).unwrap(), (0.0, 3.0));
        let r = Distribution::Rademacher;
        assert_eq!(numerical_range(&kernel("product", &r), &r, 1000, 0).unwrap(), (0.0, 1.0));
        // Identity basis is not normalized under uniform01 (E X^2 = 1/3).
        let u = Distribution::Uniform01;
        assert!(numerical_range(&kernel("product", &u), &u, 5000, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let d = Distribution::Gaussian01;
        let k = kernel("finite_rank:lambda=2,-1", &d);
        let c = TrajectoryConfig::new(SumVariant::DecoupledRandomized, 12, vec![1, 9], Engine::Separable);
        assert_eq!(run_trajectories(&k, &d, &c).unwrap(), run_trajectories(&k, &d, &c).unwrap());
    }
}
