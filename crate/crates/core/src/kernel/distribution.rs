//! Input laws and counter-based sample streams.
//!
//! Every sample is a pure function of `(seed, stream, index)`: the ChaCha8
//! keystream for `seed` is split into 2^64 streams, and sample `index` of a
//! stream always consumes the two 64-bit words at word position `4 * index`.
//! Streams can therefore be read sequentially or at random offsets, from any
//! number of threads, with identical results.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Finite discrete law with precomputed CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("discrete law needs at least one value".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "discrete weights",
                got: weights.len(),
                expected: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("discrete values must be finite".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter("discrete weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter(format!(
                "discrete weights sum to {total}, expected 1"
            )));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { values, weights, cdf })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn index_for(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.values.len() - 1)
    }
}

/// Law of the i.i.d. inputs `X_i`, `Y_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    /// Fair ±1 signs.
    Rademacher,
    Uniform01,
    /// Standard normal.
    Gaussian01,
    Discrete(DiscreteLaw),
}

impl Distribution {
    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        DiscreteLaw::new(values, weights).map(Distribution::Discrete)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Rademacher | Distribution::Gaussian01 => 0.0,
            Distribution::Uniform01 => 0.5,
            Distribution::Discrete(d) => d.values.iter().zip(&d.weights).map(|(v, w)| v * w).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Distribution::Rademacher | Distribution::Gaussian01 => 1.0,
            Distribution::Uniform01 => 1.0 / 3.0,
            Distribution::Discrete(d) => {
                d.values.iter().zip(&d.weights).map(|(v, w)| v * v * w).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Atoms `(value, probability)` for laws with finite support.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Distribution::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Distribution::Discrete(d) => Some(
                d.values
                    .iter()
                    .copied()
                    .zip(d.weights.iter().copied())
                    .filter(|(_, w)| *w > 0.0)
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn has_bounded_support(&self) -> bool {
        !matches!(self, Distribution::Gaussian01)
    }

    /// Left-continuous quantile function, `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Distribution::Rademacher => {
                if p <= 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            Distribution::Uniform01 => p.clamp(0.0, 1.0),
            Distribution::Gaussian01 => Normal::standard().inverse_cdf(p),
            Distribution::Discrete(d) => {
                let i = d.cdf.partition_point(|&c| c < p).min(d.values.len() - 1);
                d.values[i]
            }
        }
    }

    /// `points` quantile probes at levels `(i + 1/2) / points`, deduplicated.
    pub fn probe_grid(&self, points: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(points);
        for i in 0..points {
            let q = self.quantile((i as f64 + 0.5) / points as f64);
            if !out.contains(&q) {
                out.push(q);
            }
        }
        out
    }

    /// Maps two uniform 64-bit words to one sample.
    #[inline]
    pub fn sample_from_words(&self, w1: u64, w2: u64) -> f64 {
        match self {
            Distribution::Rademacher => {
                if w1 >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Uniform01 => unit_open_right(w1),
            Distribution::Gaussian01 => {
                // Box-Muller, cosine branch only so each index maps to one sample.
                let u1 = ((w1 >> 11) + 1) as f64 * TWO_POW_M53;
                let u2 = unit_open_right(w2);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            }
            Distribution::Discrete(d) => d.values[d.index_for(unit_open_right(w1))],
        }
    }

    /// Sample `index` of `(seed, stream)`.
    pub fn sample_at(&self, seed: u64, stream: u64, index: u64) -> f64 {
        SampleStream::new(self.clone(), seed, stream, index).next_sample()
    }
}

#[inline]
fn unit_open_right(w: u64) -> f64 {
    (w >> 11) as f64 * TWO_POW_M53
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Rademacher => f.write_str("rademacher"),
            Distribution::Uniform01 => f.write_str("uniform01"),
            Distribution::Gaussian01 => f.write_str("gaussian01"),
            Distribution::Discrete(d) => {
                write!(f, "discrete:values={};weights={}", join(&d.values), join(&d.weights))
            }
        }
    }
}

pub(crate) fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "rademacher" => Ok(Distribution::Rademacher),
            "uniform01" | "uniform" => Ok(Distribution::Uniform01),
            "gaussian01" | "gaussian" | "normal" => Ok(Distribution::Gaussian01),
            "discrete" => {
                let params = super::catalog::parse_params(rest)?;
                let values = params
                    .numeric("values")?
                    .ok_or(Error::MissingInput("discrete values"))?;
                let weights = params
                    .numeric("weights")?
                    .ok_or(Error::MissingInput("discrete weights"))?;
                Distribution::discrete(values, weights)
            }
            other => Err(Error::UnknownDistribution(other.to_string())),
        }
    }
}

/// Sequential reader over one `(seed, stream)` pair.
pub struct SampleStream {
    dist: Distribution,
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(dist: Distribution, seed: u64, stream: u64, start_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(start_index as u128 * 4);
        Self { dist, rng }
    }

    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        let w1 = self.rng.next_u64();
        let w2 = self.rng.next_u64();
        self.dist.sample_from_words(w1, w2)
    }
}

impl Iterator for SampleStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_sample())
    }
}

/// Deterministic length-`n` sample vector for `(seed, stream)`.
pub fn sample_stream(dist: &Distribution, seed: u64, stream: u64, n: usize) -> Vec<f64> {
    SampleStream::new(dist.clone(), seed, stream, 0).take(n).collect()
}
