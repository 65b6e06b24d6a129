//! Kernels, input distributions and the analytic catalog.

mod block;
mod catalog;
mod distribution;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use block::{block_kernel_eval, iterated_log_ln_widths, BlockKernelSpec, MIN_BLOCK_WIDTH};
pub use catalog::{catalog, catalog_listing, parse_params, KernelFamily, KernelSpec, Params};
pub use distribution::{sample_stream, DiscreteLaw, Distribution, SampleStream};

use crate::numeric::compensated_sum;

pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type UnaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Law of `h(x, Y)` for fixed `x`, as `(value, probability)` atoms.
pub type ConditionalLawFn = Arc<dyn Fn(f64) -> Vec<(f64, f64)> + Send + Sync>;

/// Orthonormal polynomial families used by finite-rank kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `phi(x) = x`; rank one only.
    Identity,
    /// Probabilists' Hermite polynomials `He_k / sqrt(k!)`, orthonormal under N(0,1).
    Hermite,
    /// Shifted Legendre polynomials `sqrt(2k+1) P_k(2x-1)`, orthonormal under U(0,1).
    Legendre,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::Identity => "identity",
            Basis::Hermite => "hermite",
            Basis::Legendre => "legendre",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Basis::Identity),
            "hermite" => Some(Basis::Hermite),
            "legendre" => Some(Basis::Legendre),
            _ => None,
        }
    }

    /// Whether degree >= 1 members are centered and orthonormal under `dist`.
    pub fn orthonormal_under(self, dist: &Distribution) -> bool {
        match self {
            Basis::Identity => dist.mean() == 0.0 && dist.second_moment() == 1.0,
            Basis::Hermite => *dist == Distribution::Gaussian01,
            Basis::Legendre => *dist == Distribution::Uniform01,
        }
    }
}

/// One basis function of a separable expansion.
#[derive(Clone)]
pub enum BasisFn {
    Identity,
    Hermite(usize),
    Legendre(usize),
    Custom(UnaryFn),
}

impl BasisFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BasisFn::Identity => x,
            BasisFn::Hermite(k) => hermite_normalized(*k, x),
            BasisFn::Legendre(k) => legendre_shifted_normalized(*k, x),
            BasisFn::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for BasisFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFn::Identity => f.write_str("Identity"),
            BasisFn::Hermite(k) => write!(f, "Hermite({k})"),
            BasisFn::Legendre(k) => write!(f, "Legendre({k})"),
            BasisFn::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn hermite_normalized(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    let mut norm = 1.0f64;
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
        norm *= (j + 1) as f64;
    }
    cur / norm.sqrt()
}

fn legendre_shifted_normalized(k: usize, x: f64) -> f64 {
    let z = 2.0 * x - 1.0;
    let (mut prev, mut cur) = (1.0, z);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0) * z * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur * ((2 * k + 1) as f64).sqrt()
}

/// `h(x, y) = sum_m lambda_m phi_m(x) phi_m(y)`.
#[derive(Debug, Clone)]
pub struct Separable {
    pub terms: Vec<(f64, BasisFn)>,
}

impl Separable {
    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        compensated_sum(self.terms.iter().map(|(l, phi)| l * (phi.eval(x) * phi.eval(y))))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.terms.iter().map(|(l, _)| *l).collect()
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(l, phi)| (l * s, phi.clone())).collect(),
        }
    }
}

/// Closed form for `u -> E(h^2 ∧ u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondMomentCurve {
    /// Law of `h^2` as `(h^2 value, probability)` atoms.
    Atoms(Vec<(f64, f64)>),
    /// Block kernel: each block contributes `min(a_n^2, u b_n^2)`.
    Blocks { a: Vec<f64>, b: Vec<f64> },
}

impl SecondMomentCurve {
    pub fn at(&self, u: f64) -> f64 {
        match self {
            SecondMomentCurve::Atoms(atoms) => {
                compensated_sum(atoms.iter().map(|(h2, p)| p * h2.min(u)))
            }
            SecondMomentCurve::Blocks { a, b } => {
                let su = u.sqrt();
                compensated_sum(a.iter().zip(b).map(|(a, b)| {
                    let partial = su * b;
                    (a * a).min(partial * partial)
                }))
            }
        }
    }

    /// Law of `|h|` as `(|h|, probability)` atoms; probabilities may underflow.
    pub fn abs_atoms(&self) -> Vec<(f64, f64)> {
        match self {
            SecondMomentCurve::Atoms(atoms) => atoms.iter().map(|(h2, p)| (h2.sqrt(), *p)).collect(),
            SecondMomentCurve::Blocks { a, b } => {
                a.iter().zip(b).map(|(a, b)| ((a / b).abs(), b * b)).collect()
            }
        }
    }

    /// `E h^2 1{lo < |h| <= hi}`, computed without forming `h^2 p` products
    /// that could overflow.
    pub fn band_second_moment(&self, lo: f64, hi: f64) -> f64 {
        match self {
            SecondMomentCurve::Atoms(atoms) => compensated_sum(atoms.iter().filter_map(|(h2, p)| {
                let v = h2.sqrt();
                (v > lo && v <= hi).then_some(p * h2)
            })),
            SecondMomentCurve::Blocks { a, b } => {
                compensated_sum(a.iter().zip(b).filter_map(|(a, b)| {
                    let v = (a / b).abs();
                    (v > lo && v <= hi).then_some(a * a)
                }))
            }
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            SecondMomentCurve::Atoms(atoms) => {
                SecondMomentCurve::Atoms(atoms.iter().map(|(h2, p)| (h2 * s * s, *p)).collect())
            }
            SecondMomentCurve::Blocks { a, b } => SecondMomentCurve::Blocks {
                a: a.iter().map(|v| v * s).collect(),
                b: b.clone(),
            },
        }
    }
}

/// Closed-form information about a kernel under a fixed input law.
#[derive(Clone, Default)]
pub struct Analytic {
    pub mean_h: f64,
    /// `x -> E_Y h(x, Y)`.
    pub cond_mean: Option<UnaryFn>,
    pub second_moment: Option<SecondMomentCurve>,
    pub operator_norm: Option<f64>,
    pub cond_law: Option<ConditionalLawFn>,
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analytic")
            .field("mean_h", &self.mean_h)
            .field("cond_mean", &self.cond_mean.is_some())
            .field("second_moment", &self.second_moment)
            .field("operator_norm", &self.operator_norm)
            .field("cond_law", &self.cond_law.is_some())
            .finish()
    }
}

impl Analytic {
    fn scaled(&self, s: f64) -> Self {
        Self {
            mean_h: self.mean_h * s,
            cond_mean: self.cond_mean.clone().map(|f| -> UnaryFn { Arc::new(move |x| s * f(x)) }),
            second_moment: self.second_moment.as_ref().map(|c| c.scaled(s)),
            operator_norm: self.operator_norm.map(|v| v * s.abs()),
            cond_law: self.cond_law.clone().map(|f| -> ConditionalLawFn {
                Arc::new(move |x| f(x).into_iter().map(|(v, p)| (s * v, p)).collect())
            }),
        }
    }
}

/// Symmetric two-argument kernel with optional separable and analytic metadata.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    eval: KernelFn,
    separable: Option<Separable>,
    analytic: Option<Analytic>,
    block: Option<Arc<BlockKernelSpec>>,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("separable", &self.separable)
            .field("analytic", &self.analytic)
            .finish()
    }
}

impl Kernel {
    /// Kernel from an arbitrary closure, without metadata. The closure is
    /// trusted to be symmetric; see [`crate::hoeffding::symmetrize`].
    pub fn custom(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(f),
            separable: None,
            analytic: None,
            block: None,
        }
    }

    /// Finite-rank kernel evaluated through its expansion.
    pub fn from_separable(name: impl Into<String>, separable: Separable) -> Self {
        let s = separable.clone();
        Self {
            name: name.into(),
            eval: Arc::new(move |x, y| s.eval(x, y)),
            separable: Some(separable),
            analytic: None,
            block: None,
        }
    }

    pub(crate) fn with_separable(mut self, separable: Separable) -> Self {
        self.separable = Some(separable);
        self
    }

    pub fn with_analytic(mut self, analytic: Analytic) -> Self {
        self.analytic = Some(analytic);
        self
    }

    pub(crate) fn with_block(mut self, spec: Arc<BlockKernelSpec>) -> Self {
        self.block = Some(spec);
        self
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn separable(&self) -> Option<&Separable> {
        self.separable.as_ref()
    }

    pub fn analytic(&self) -> Option<&Analytic> {
        self.analytic.as_ref()
    }

    pub fn block_spec(&self) -> Option<&BlockKernelSpec> {
        self.block.as_deref()
    }

    /// Same kernel with every closed form removed, forcing estimators onto
    /// their Monte Carlo paths.
    pub fn without_analytic(&self) -> Self {
        Self {
            analytic: None,
            ..self.clone()
        }
    }

    /// `s * h`, with metadata rescaled.
    pub fn scaled(&self, s: f64) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("{}*{s:?}", self.name),
            eval: Arc::new(move |x, y| s * f(x, y)),
            separable: self.separable.as_ref().map(|sep| sep.scaled(s)),
            analytic: self.analytic.as_ref().map(|a| a.scaled(s)),
            block: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        let x = 1.7;
        assert!((hermite_normalized(1, x) - x).abs() < 1e-15);
        assert!((hermite_normalized(2, x) - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-14);
        assert!((hermite_normalized(3, x) - (x * x * x - 3.0 * x) / 6f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn legendre_values() {
        let x = 0.3;
        assert!((legendre_shifted_normalized(1, x) - 3f64.sqrt() * (2.0 * x - 1.0)).abs() < 1e-15);
        let p2 = 5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0);
        assert!((legendre_shifted_normalized(2, x) - p2).abs() < 1e-14);
    }

    #[test]
    fn block_curve_matches_atoms() {
        let a = vec![0.5, 0.2, 0.9];
        let b = vec![0.1, 0.2, 0.05];
        let blocks = SecondMomentCurve::Blocks { a: a.clone(), b: b.clone() };
        let atoms = SecondMomentCurve::Atoms(
            a.iter().zip(&b).map(|(a, b)| ((a / b) * (a / b), b * b)).collect(),
        );
        for u in [10.0, 50.0, 100.0, 500.0, 1e4] {
            assert!((blocks.at(u) - atoms.at(u)).abs() < 1e-12);
        }
    }
}
