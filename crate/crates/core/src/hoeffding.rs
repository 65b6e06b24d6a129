//! Hoeffding projections and exact evaluation of the U-statistic sum
//! variants.
//!
//! ```text
//! h(x,y) - E h = pi2(x,y) + pi1(x) + pi1(y)
//! pi1(x)       = E_Y h(x,Y) - E h
//! pi2(x,y)     = h(x,y) - E_Y h(x,Y) - E_X h(X,y) + E h
//! ```
//!
//! Sum variants, for samples `x`, `y` and signs `eps`, `eps2`:
//!
//! ```text
//! plain_offdiag         sum_{i != j} h(x_i, x_j)
//! randomized            sum_{i != j} eps_i eps_j h(x_i, x_j)
//! decoupled             sum_{i, j}   h(x_i, y_j)
//! decoupled_randomized  sum_{i, j}   eps_i eps2_j h(x_i, y_j)
//! ```
//!
//! The diagonal convention is fixed per variant and not configurable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sample_stream, BasisFn, Distribution, Kernel, Separable, UnaryFn};
use crate::numeric::{compensated_sum, Compensated};

/// Stream id of the background sample used by empirical projections.
pub const BACKGROUND_STREAM: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumVariant {
    PlainOffdiag,
    Randomized,
    Decoupled,
    DecoupledRandomized,
}

impl SumVariant {
    pub const ALL: [SumVariant; 4] = [
        SumVariant::PlainOffdiag,
        SumVariant::Randomized,
        SumVariant::Decoupled,
        SumVariant::DecoupledRandomized,
    ];

    pub fn is_decoupled(self) -> bool {
        matches!(self, SumVariant::Decoupled | SumVariant::DecoupledRandomized)
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, SumVariant::Randomized | SumVariant::DecoupledRandomized)
    }

    pub fn name(self) -> &'static str {
        match self {
            SumVariant::PlainOffdiag => "plain_offdiag",
            SumVariant::Randomized => "randomized",
            SumVariant::Decoupled => "decoupled",
            SumVariant::DecoupledRandomized => "decoupled_randomized",
        }
    }
}

impl fmt::Display for SumVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SumVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" | "plain_offdiag" => Ok(SumVariant::PlainOffdiag),
            "randomized" => Ok(SumVariant::Randomized),
            "decoupled" => Ok(SumVariant::Decoupled),
            "decoupled_randomized" => Ok(SumVariant::DecoupledRandomized),
            other => Err(Error::Config(format!("unknown sum variant `{other}`"))),
        }
    }
}

/// Inputs of one sum evaluation. Unused fields are ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct SumInput<'a> {
    pub x: &'a [f64],
    pub y: Option<&'a [f64]>,
    pub eps: Option<&'a [f64]>,
    pub eps2: Option<&'a [f64]>,
}

impl<'a> SumInput<'a> {
    pub fn plain(x: &'a [f64]) -> Self {
        Self { x, ..Default::default() }
    }

    fn check(&self, variant: SumVariant) -> Result<()> {
        let n = self.x.len();
        let need = |v: Option<&[f64]>, what: &'static str| -> Result<()> {
            let v = v.ok_or(Error::MissingInput(what))?;
            if v.len() != n {
                return Err(Error::LengthMismatch { what, got: v.len(), expected: n });
            }
            Ok(())
        };
        if variant.is_decoupled() {
            need(self.y, "y sample")?;
        }
        if variant.is_randomized() {
            need(self.eps, "eps signs")?;
        }
        if variant == SumVariant::DecoupledRandomized {
            need(self.eps2, "eps2 signs")?;
        }
        Ok(())
    }
}

/// Direct O(n^2) evaluation of a sum variant.
pub fn sum_exact(kernel: &Kernel, variant: SumVariant, input: SumInput<'_>) -> Result<f64> {
    input.check(variant)?;
    let x = input.x;
    let n = x.len();
    let mut acc = Compensated::new();
    match variant {
        SumVariant::PlainOffdiag | SumVariant::Randomized => {
            let eps = if variant.is_randomized() { input.eps } else { None };
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = eps.map_or(1.0, |e| e[i] * e[j]);
                    acc.add(w * kernel.eval(x[i], x[j]));
                }
            }
        }
        SumVariant::Decoupled | SumVariant::DecoupledRandomized => {
            let y = input.y.expect("checked");
            let (e1, e2) = (input.eps, input.eps2);
            for i in 0..n {
                for j in 0..n {
                    let w = match (e1, e2) {
                        (Some(a), Some(b)) if variant.is_randomized() => a[i] * b[j],
                        _ => 1.0,
                    };
                    acc.add(w * kernel.eval(x[i], y[j]));
                }
            }
        }
    }
    Ok(acc.value())
}

/// O(rank * n) evaluation through the separable expansion.
pub fn sum_separable(kernel: &Kernel, variant: SumVariant, input: SumInput<'_>) -> Result<f64> {
    let sep = kernel.separable().ok_or(Error::MissingSeparable)?;
    input.check(variant)?;
    let mut acc = SeparableAccumulator::new(sep, variant);
    for i in 0..input.x.len() {
        acc.push(Draw {
            x: input.x[i],
            y: input.y.map_or(0.0, |v| v[i]),
            eps: input.eps.map_or(1.0, |v| v[i]),
            eps2: input.eps2.map_or(1.0, |v| v[i]),
        });
    }
    Ok(acc.value())
}

/// One new index of every input stream.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub x: f64,
    pub y: f64,
    pub eps: f64,
    pub eps2: f64,
}

/// Incremental sum of a separable kernel; each push costs O(rank).
#[derive(Debug, Clone)]
pub struct SeparableAccumulator {
    lambdas: Vec<f64>,
    phis: Vec<BasisFn>,
    variant: SumVariant,
    /// `sum_i w_i phi_m(x_i)`, with `w = eps` for randomized variants.
    left: Vec<Compensated>,
    /// `sum_i phi_m(x_i)^2` (diagonal of the plain variants).
    diag: Vec<Compensated>,
    /// `sum_j w_j phi_m(y_j)` for decoupled variants.
    right: Vec<Compensated>,
    len: usize,
}

impl SeparableAccumulator {
    pub fn new(sep: &Separable, variant: SumVariant) -> Self {
        let r = sep.rank();
        Self {
            lambdas: sep.terms.iter().map(|(l, _)| *l).collect(),
            phis: sep.terms.iter().map(|(_, p)| p.clone()).collect(),
            variant,
            left: vec![Compensated::new(); r],
            diag: vec![Compensated::new(); r],
            right: vec![Compensated::new(); r],
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn push(&mut self, d: Draw) {
        let w = if self.variant.is_randomized() { d.eps } else { 1.0 };
        let decoupled = self.variant.is_decoupled();
        let w2 = if self.variant == SumVariant::DecoupledRandomized { d.eps2 } else { 1.0 };
        for m in 0..self.phis.len() {
            let px = self.phis[m].eval(d.x);
            self.left[m].add(w * px);
            if decoupled {
                self.right[m].add(w2 * self.phis[m].eval(d.y));
            } else {
                self.diag[m].add(px * px);
            }
        }
        self.len += 1;
    }

    pub fn value(&self) -> f64 {
        let decoupled = self.variant.is_decoupled();
        compensated_sum((0..self.lambdas.len()).map(|m| {
            let p = self.left[m].value();
            if decoupled {
                self.lambdas[m] * p * self.right[m].value()
            } else {
                self.lambdas[m] * (p * p - self.diag[m].value())
            }
        }))
    }
}

/// `(h(x,y) + h(y,x)) / 2` for an arbitrary two-argument function.
pub fn symmetrize(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Kernel {
    Kernel::custom(name, move |x, y| 0.5 * (f(x, y) + f(y, x)))
}

#[derive(Clone)]
enum Projection {
    Analytic(UnaryFn),
    Empirical { background: Vec<f64> },
}

/// Hoeffding projections of a kernel under a fixed law.
#[derive(Clone)]
pub struct ProjectionEstimate {
    kernel: Kernel,
    mean_h: f64,
    projection: Projection,
    background_m: usize,
    se_scale: f64,
}

impl fmt::Debug for ProjectionEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProjectionEstimate")
            .field("kernel", &self.kernel.name())
            .field("mean_h", &self.mean_h)
            .field("analytic", &self.is_analytic())
            .field("background_m", &self.background_m)
            .finish()
    }
}

impl ProjectionEstimate {
    pub fn mean_h(&self) -> f64 {
        self.mean_h
    }

    pub fn background_m(&self) -> usize {
        self.background_m
    }

    /// `1 / sqrt(m)` for empirical projections, 0 for analytic ones.
    pub fn se_scale(&self) -> f64 {
        self.se_scale
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.projection, Projection::Analytic(_))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn pi1(&self, x: f64) -> f64 {
        match &self.projection {
            Projection::Analytic(cond) => cond(x) - self.mean_h,
            Projection::Empirical { background } => {
                compensated_sum(background.iter().map(|y| self.kernel.eval(x, *y))) / background.len() as f64
                    - self.mean_h
            }
        }
    }

    pub fn pi2(&self, x: f64, y: f64) -> f64 {
        self.kernel.eval(x, y) - self.pi1(x) - self.pi1(y) - self.mean_h
    }

    /// `pi2(x_i, y)` for all `i`, reusing `pi1(x_i)`.
    fn pi2_column(&self, xs: &[f64], pi1_xs: &[f64], y: f64) -> Vec<f64> {
        let p1y = self.pi1(y);
        xs.iter()
            .zip(pi1_xs)
            .map(|(x, p1x)| self.kernel.eval(*x, y) - p1x - p1y - self.mean_h)
            .collect()
    }
}

/// Hoeffding projections: analytic when the kernel carries `E_Y h(x, Y)`,
/// otherwise empirical against a fixed background sample of size `m`.
pub fn project(kernel: &Kernel, dist: &Distribution, m: usize, seed: u64) -> Result<ProjectionEstimate> {
    if let Some(cond) = kernel.analytic().and_then(|a| a.cond_mean.clone()) {
        return Ok(ProjectionEstimate {
            kernel: kernel.clone(),
            mean_h: kernel.analytic().map_or(0.0, |a| a.mean_h),
            projection: Projection::Analytic(cond),
            background_m: 0,
            se_scale: 0.0,
        });
    }
    project_empirical(kernel, dist, m, seed)
}

/// Empirical projections regardless of available closed forms.
pub fn project_empirical(kernel: &Kernel, dist: &Distribution, m: usize, seed: u64) -> Result<ProjectionEstimate> {
    if m < 100 {
        return Err(Error::InvalidParameter(format!("empirical projection needs m >= 100, got {m}")));
    }
    let background = sample_stream(dist, seed, BACKGROUND_STREAM, m);
    let mut total = Compensated::new();
    for &a in &background {
        let mut row = Compensated::new();
        for &b in &background {
            let v = kernel.eval(a, b);
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel { x: a, y: b, value: v });
            }
            row.add(v);
        }
        total.add(row.value());
    }
    let mean_h = total.value() / (m as f64 * m as f64);
    Ok(ProjectionEstimate {
        kernel: kernel.clone(),
        mean_h,
        projection: Projection::Empirical { background },
        background_m: m,
        se_scale: 1.0 / (m as f64).sqrt(),
    })
}

/// `(1/m) sum_i pi2(X_i, y)` for one probe `y`, with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CanonicalityProbe {
    pub y: f64,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl CanonicalityProbe {
    /// `|mean| <= z * se`, with an absolute floor for degenerate (zero-variance) columns.
    pub fn passes(&self, z: f64) -> bool {
        self.mean.abs() <= z * self.se + 1e-12 * (1.0 + self.sd)
    }
}

/// Checks `E_X pi2(X, y) = 0` on `probes` with a fresh sample of size `m`
/// drawn from `(seed, stream)`.
///
/// With empirical projections the background sample contributes its own
/// noise: to first order the estimate is a fresh mean minus a background
/// mean of `psi_y(x) = h(x, y) - E_Y h(x, Y)`, so `se = sd(psi_y) *
/// sqrt(1/m + 1/m_background)`.
pub fn empirical_canonicality(
    proj: &ProjectionEstimate,
    dist: &Distribution,
    probes: &[f64],
    m: usize,
    seed: u64,
    stream: u64,
) -> Vec<CanonicalityProbe> {
    let xs = sample_stream(dist, seed, stream, m);
    let pi1_xs: Vec<f64> = xs.iter().map(|x| proj.pi1(*x)).collect();
    probes
        .iter()
        .map(|&y| {
            let col = proj.pi2_column(&xs, &pi1_xs, y);
            let (mean, se_fresh) = crate::numeric::mean_and_se(&col);
            let sd = se_fresh * (m as f64).sqrt();
            let se = sd * (1.0 / m as f64 + proj.se_scale * proj.se_scale).sqrt();
            CanonicalityProbe { y, mean, sd, se }
        })
        .collect()
}
