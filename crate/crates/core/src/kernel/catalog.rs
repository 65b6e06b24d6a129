//! Kernel spec strings and the analytic catalog.
//!
//! Specs have two interchangeable text forms:
//!
//! ```text
//! compact:  block:a=0.5,0.2,0.9;b=0.1,0.1,0.1;scale=2
//! table:    name = "block"
//!           a = [0.5, 0.2, 0.9]
//!           b = [0.1, 0.1, 0.1]
//!           scale = 2.0
//! ```
//!
//! Families and their fields:
//!
//! | name          | fields                       | kernel                                  |
//! |---------------|------------------------------|-----------------------------------------|
//! | `zero`        |                              | `0`                                     |
//! | `constant`    | `c`                          | `c`                                     |
//! | `product`     |                              | `x y`                                   |
//! | `sum`         |                              | `x + y` (not canonical)                 |
//! | `min`         |                              | `min(x, y)`                             |
//! | `block`       | `a`, `b` (arrays)            | `sum_n (a_n / b_n) I_n(x) I_n(y)`       |
//! | `lil_block`   | `a`, `b` (scalars)           | block kernel, `b_n = exp(-exp(a^2 n/b))` |
//! | `finite_rank` | `lambda` (array), `basis`    | `sum_m lambda_m phi_m(x) phi_m(y)`      |
//!
//! Every family accepts an optional `scale` multiplier.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::block::{block_kernel_eval, BlockKernelSpec};
use super::distribution::join;
use super::{Analytic, Basis, BasisFn, ConditionalLawFn, Distribution, Kernel, SecondMomentCurve, Separable};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    Zero,
    Constant { c: f64 },
    Product,
    Sum,
    Min,
    Block { a: Vec<f64>, b: Vec<f64> },
    LilBlock { a: f64, b: f64 },
    FiniteRank { lambda: Vec<f64>, basis: Basis },
}

fn unit() -> f64 {
    1.0
}

fn is_unit(v: &f64) -> bool {
    *v == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    #[serde(default = "unit", skip_serializing_if = "is_unit")]
    pub scale: f64,
}

impl From<KernelFamily> for KernelSpec {
    fn from(family: KernelFamily) -> Self {
        Self { family, scale: 1.0 }
    }
}

impl KernelSpec {
    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("kernel spec serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("kernel spec: {e}")))
    }
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Zero => "zero",
            KernelFamily::Constant { .. } => "constant",
            KernelFamily::Product => "product",
            KernelFamily::Sum => "sum",
            KernelFamily::Min => "min",
            KernelFamily::Block { .. } => "block",
            KernelFamily::LilBlock { .. } => "lil_block",
            KernelFamily::FiniteRank { .. } => "finite_rank",
        }
    }
}

/// Raw `key=value` parameters of the compact form.
#[derive(Debug, Default)]
pub struct Params(BTreeMap<String, String>);

pub fn parse_params(s: &str) -> Result<Params> {
    let mut map = BTreeMap::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{part}`")))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate parameter `{}`", k.trim())));
        }
    }
    Ok(Params(map))
}

impl Params {
    pub fn numeric(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(raw) = self.0.get(key) else {
            return Ok(None);
        };
        if raw.is_empty() {
            return Ok(Some(Vec::new()));
        }
        raw.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("parameter `{key}`: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn scalar(&self, key: &str) -> Result<Option<f64>> {
        match self.numeric(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(v[0])),
            Some(_) => Err(Error::Config(format!("parameter `{key}` must be a single number"))),
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn require_scalar(&self, key: &str) -> Result<f64> {
        self.scalar(key)?
            .ok_or_else(|| Error::Config(format!("missing parameter `{key}`")))
    }

    fn require_numeric(&self, key: &str) -> Result<Vec<f64>> {
        self.numeric(key)?
            .ok_or_else(|| Error::Config(format!("missing parameter `{key}`")))
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for k in self.0.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown parameter `{k}`")));
            }
        }
        Ok(())
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let params = parse_params(rest)?;
        let scale = params.scalar("scale")?.unwrap_or(1.0);
        let family = match name {
            "zero" => {
                params.reject_unknown(&["scale"])?;
                KernelFamily::Zero
            }
            "constant" => {
                params.reject_unknown(&["c", "scale"])?;
                KernelFamily::Constant { c: params.require_scalar("c")? }
            }
            "product" => {
                params.reject_unknown(&["scale"])?;
                KernelFamily::Product
            }
            "sum" => {
                params.reject_unknown(&["scale"])?;
                KernelFamily::Sum
            }
            "min" => {
                params.reject_unknown(&["scale"])?;
                KernelFamily::Min
            }
            "block" => {
                params.reject_unknown(&["a", "b", "scale"])?;
                KernelFamily::Block {
                    a: params.require_numeric("a")?,
                    b: params.require_numeric("b")?,
                }
            }
            "lil_block" => {
                params.reject_unknown(&["a", "b", "scale"])?;
                KernelFamily::LilBlock {
                    a: params.require_scalar("a")?,
                    b: params.require_scalar("b")?,
                }
            }
            "finite_rank" => {
                params.reject_unknown(&["lambda", "basis", "scale"])?;
                let basis = params.text("basis").unwrap_or("hermite");
                KernelFamily::FiniteRank {
                    lambda: params.require_numeric("lambda")?,
                    basis: Basis::parse(basis)
                        .ok_or_else(|| Error::Config(format!("unknown basis `{basis}`")))?,
                }
            }
            other => return Err(Error::UnknownKernel(other.to_string())),
        };
        if !scale.is_finite() {
            return Err(Error::InvalidParameter("scale must be finite".into()));
        }
        Ok(KernelSpec { family, scale })
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match &self.family {
            KernelFamily::Constant { c } => parts.push(format!("c={c:?}")),
            KernelFamily::Block { a, b } => {
                parts.push(format!("a={}", join(a)));
                parts.push(format!("b={}", join(b)));
            }
            KernelFamily::LilBlock { a, b } => {
                parts.push(format!("a={a:?}"));
                parts.push(format!("b={b:?}"));
            }
            KernelFamily::FiniteRank { lambda, basis } => {
                parts.push(format!("lambda={}", join(lambda)));
                parts.push(format!("basis={}", basis.name()));
            }
            _ => {}
        }
        if self.scale != 1.0 {
            parts.push(format!("scale={:?}", self.scale));
        }
        f.write_str(self.family.name())?;
        if !parts.is_empty() {
            write!(f, ":{}", parts.join(";"))?;
        }
        Ok(())
    }
}

/// Builds the kernel named by `spec`, with analytic metadata for `dist`
/// wherever a closed form exists.
pub fn catalog(spec: &KernelSpec, dist: &Distribution) -> Result<Kernel> {
    let name = spec.to_string();
    let s = spec.scale;
    let kernel = match &spec.family {
        KernelFamily::Block { a, b } => {
            let a = a.iter().map(|v| v * s).collect();
            return block_kernel(name, BlockKernelSpec::new(a, b.clone())?, dist);
        }
        KernelFamily::LilBlock { a, b } => {
            let base = BlockKernelSpec::iterated_log(*a, *b)?;
            let scaled = BlockKernelSpec::new(base.a().iter().map(|v| v * s).collect(), base.b().to_vec())?;
            return block_kernel(name, scaled, dist);
        }
        KernelFamily::FiniteRank { lambda, basis } => {
            if *basis == Basis::Identity && lambda.len() > 1 {
                return Err(Error::InvalidParameter("identity basis supports rank one only".into()));
            }
            if lambda.iter().any(|l| !l.is_finite()) {
                return Err(Error::InvalidParameter("eigenvalues must be finite".into()));
            }
            let terms = lambda
                .iter()
                .enumerate()
                .map(|(m, l)| {
                    let phi = match basis {
                        Basis::Identity => BasisFn::Identity,
                        Basis::Hermite => BasisFn::Hermite(m + 1),
                        Basis::Legendre => BasisFn::Legendre(m + 1),
                    };
                    (l * s, phi)
                })
                .collect();
            let kernel = Kernel::from_separable(name, Separable { terms });
            let analytic = if let Some(support) = dist.support() {
                Some(discrete_analytic(&kernel, &support))
            } else if basis.orthonormal_under(dist) {
                let norm = lambda.iter().fold(0.0f64, |m, l| m.max((l * s).abs()));
                Some(Analytic {
                    mean_h: 0.0,
                    cond_mean: Some(Arc::new(|_| 0.0)),
                    second_moment: None,
                    operator_norm: Some(norm),
                    cond_law: None,
                })
            } else {
                None
            };
            return Ok(match analytic {
                Some(a) => kernel.with_analytic(a),
                None => kernel,
            });
        }
        KernelFamily::Zero => Kernel::custom("zero", |_, _| 0.0)
            .with_separable(Separable { terms: Vec::new() })
            .with_analytic(Analytic {
                mean_h: 0.0,
                cond_mean: Some(Arc::new(|_| 0.0)),
                second_moment: Some(SecondMomentCurve::Atoms(vec![(0.0, 1.0)])),
                operator_norm: Some(0.0),
                cond_law: Some(Arc::new(|_| vec![(0.0, 1.0)])),
            }),
        KernelFamily::Constant { c } => {
            let c = *c;
            Kernel::custom("constant", move |_, _| c)
                .with_separable(Separable {
                    terms: vec![(c, BasisFn::Custom(Arc::new(|_| 1.0)))],
                })
                .with_analytic(Analytic {
                    mean_h: c,
                    cond_mean: Some(Arc::new(move |_| c)),
                    second_moment: Some(SecondMomentCurve::Atoms(vec![(c * c, 1.0)])),
                    operator_norm: Some(c.abs()),
                    cond_law: Some(Arc::new(move |_| vec![(c, 1.0)])),
                })
        }
        KernelFamily::Product => {
            let mu = dist.mean();
            let base = Kernel::custom("product", |x, y| x * y)
                .with_separable(Separable { terms: vec![(1.0, BasisFn::Identity)] });
            let mut analytic = match dist.support() {
                Some(support) => discrete_analytic(&base, &support),
                None => Analytic::default(),
            };
            analytic.mean_h = mu * mu;
            analytic.cond_mean = Some(Arc::new(move |x| x * mu));
            analytic.operator_norm = Some(dist.second_moment());
            base.with_analytic(analytic)
        }
        KernelFamily::Sum => {
            let (mu, var) = (dist.mean(), dist.variance());
            let base = Kernel::custom("sum", |x, y| x + y);
            let mut analytic = match dist.support() {
                Some(support) => discrete_analytic(&base, &support),
                None => Analytic::default(),
            };
            analytic.mean_h = 2.0 * mu;
            analytic.cond_mean = Some(Arc::new(move |x| x + mu));
            // Matrix [[2 mu, sigma], [sigma, 0]] in the basis {1, (x - mu)/sigma}.
            analytic.operator_norm = Some(mu.abs() + (mu * mu + var).sqrt());
            base.with_analytic(analytic)
        }
        KernelFamily::Min => {
            let base = Kernel::custom("min", f64::min);
            if let Some(support) = dist.support() {
                let a = discrete_analytic(&base, &support);
                base.with_analytic(a)
            } else if *dist == Distribution::Uniform01 {
                base.with_analytic(Analytic {
                    mean_h: 1.0 / 3.0,
                    cond_mean: Some(Arc::new(|x| x - 0.5 * x * x)),
                    second_moment: None,
                    // Top eigenvalue of the Brownian covariance operator.
                    operator_norm: Some(4.0 / (std::f64::consts::PI * std::f64::consts::PI)),
                    cond_law: None,
                })
            } else {
                base
            }
        }
    };
    let kernel = if s == 1.0 { kernel } else { kernel.scaled(s) };
    Ok(rename(kernel, name))
}

fn rename(mut kernel: Kernel, name: String) -> Kernel {
    kernel.name = name;
    kernel
}

fn block_kernel(name: String, spec: BlockKernelSpec, dist: &Distribution) -> Result<Kernel> {
    if *dist != Distribution::Uniform01 {
        return Err(Error::InvalidParameter(format!(
            "block kernels are defined for uniform01 inputs, got {dist}"
        )));
    }
    let spec = Arc::new(spec);
    let eval_spec = spec.clone();
    let law_spec = spec.clone();
    let cond_law: ConditionalLawFn = Arc::new(move |x| match law_spec.locate(x) {
        Some((n, sx)) => {
            let v = law_spec.a()[n] / law_spec.b()[n] * sx;
            let w = law_spec.b()[n];
            vec![(v, 0.5 * w), (-v, 0.5 * w), (0.0, 1.0 - w)]
        }
        None => vec![(0.0, 1.0)],
    });
    let analytic = Analytic {
        mean_h: 0.0,
        cond_mean: Some(Arc::new(|_| 0.0)),
        second_moment: Some(SecondMomentCurve::Blocks {
            a: spec.a().to_vec(),
            b: spec.b().to_vec(),
        }),
        operator_norm: Some(spec.max_abs_amplitude()),
        cond_law: Some(cond_law),
    };
    Ok(Kernel::custom(name, move |x, y| block_kernel_eval(&eval_spec, x, y))
        .with_analytic(analytic)
        .with_block(spec))
}

/// Exact metadata for any kernel under a finitely supported law.
fn discrete_analytic(kernel: &Kernel, support: &[(f64, f64)]) -> Analytic {
    let k = support.len();
    let mut atoms = Vec::with_capacity(k * k);
    let mut weighted = DenseMatrix::zeros(k, k);
    let mut mean = crate::numeric::Compensated::new();
    for (i, (x, wx)) in support.iter().enumerate() {
        for (j, (y, wy)) in support.iter().enumerate() {
            let h = kernel.eval(*x, *y);
            atoms.push((h * h, wx * wy));
            mean.add(wx * wy * h);
            weighted.set(i, j, (wx * wy).sqrt() * h);
        }
    }
    let mean_h = mean.value();
    // W^{1/2} H W^{1/2} is symmetric; its spectral norm is the L2 operator norm.
    let operator_norm = weighted.spectral_norm_small();
    let sup_mean: Vec<(f64, f64)> = support.to_vec();
    let k_mean = kernel.clone();
    let sup_law = support.to_vec();
    let k_law = kernel.clone();
    Analytic {
        mean_h,
        cond_mean: Some(Arc::new(move |x| {
            compensated_sum(sup_mean.iter().map(|(y, w)| w * k_mean.eval(x, *y)))
        })),
        second_moment: Some(SecondMomentCurve::Atoms(atoms)),
        operator_norm: Some(operator_norm),
        cond_law: Some(Arc::new(move |x| {
            sup_law.iter().map(|(y, w)| (k_law.eval(x, *y), *w)).collect()
        })),
    }
}

/// Human-readable listing of the catalog.
pub fn catalog_listing() -> String {
    let rows = [
        ("zero", "", "h = 0; trivially canonical"),
        ("constant", "c", "h = c; canonical only for c = 0"),
        ("product", "", "h = x y; canonical for centered X, LIL limsup Var X"),
        ("sum", "", "h = x + y; not canonical (linear Hoeffding part)"),
        ("min", "", "h = min(x, y); not canonical, closed forms under uniform01"),
        (
            "block",
            "a=..;b=..",
            "h = sum (a_n/b_n) I_n(x) I_n(y) on uniform01; operator norm sup |a_n|",
        ),
        (
            "lil_block",
            "a=..;b=..",
            "block kernel with a_n = a, b_n = exp(-exp(a^2 n / b)); truncated-moment limsup b",
        ),
        (
            "finite_rank",
            "lambda=..;basis=hermite|legendre|identity",
            "h = sum lambda_m phi_m(x) phi_m(y); numerical range [min(lambda,0), max(lambda,0)]",
        ),
    ];
    let mut out = String::from("name         params                                    description\n");
    for (name, params, desc) in rows {
        out.push_str(&format!("{name:<12} {params:<41} {desc}\n"));
    }
    out.push_str("all families accept scale=<s>\n");
    out
}
