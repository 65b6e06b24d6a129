use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::{format_seeds, parse_seeds, RunConfig};
use crate::chaos_norm::{chaos_norm, ChaosMatrix};
use crate::conditions::{certify, CertifyConfig};
use crate::error::{Error, Result};
use crate::hoeffding::SumVariant;
use crate::kernel::{catalog, Distribution, Kernel, KernelFamily, KernelSpec};
use crate::simulator::{
    limit_set_estimate, limsup_estimate, numerical_range, run_trajectories, sandwich_report, Engine,
    Normalization, TrajectoryConfig, TrajectoryResult, DEFAULT_PLAUSIBILITY_BAND,
};
use crate::tail_bounds::{
    bernstein_bound, chaos_distribution, latala_lower_check, prohorov_bound, talagrand_bound, LatalaMode,
    TalagrandQuery,
};

pub const TAG_LIL: &str = "S_n/(n L2 n)";
pub const TAG_LIMIT_SET: &str = "S_n/(2 n L2 n)";

/// Files (name, bytes) and a human-readable summary of one run.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: String,
}

impl Output {
    fn file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }
}

/// Resolves defaults for `cfg.command` and runs it. The returned config is
/// the manifest: replaying it yields the same files.
pub fn execute(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    match cfg.command.as_deref() {
        Some("conditions") => conditions(cfg),
        Some("simulate") => simulate(cfg),
        Some("chaos-norm") => chaos(cfg),
        Some("bounds") => bounds(cfg),
        Some("limit-set") => limit_set(cfg),
        Some(other) => Err(Error::Config(format!("unknown command `{other}`"))),
        None => Err(Error::Config("no command given".into())),
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("records serialize");
    s.push('\n');
    s
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("records serialize");
    s.push('\n');
    s
}

/// Kernel and law with defaults: block families need `uniform01`,
/// everything else defaults to `gaussian01`.
fn resolve_kernel(cfg: &RunConfig, out: &mut RunConfig) -> Result<(Kernel, Distribution)> {
    let text = cfg.kernel.as_deref().ok_or_else(|| Error::Config("--kernel is required".into()))?;
    let spec: KernelSpec = text.parse()?;
    let dist: Distribution = match &cfg.dist {
        Some(d) => d.parse()?,
        None => match spec.family {
            KernelFamily::Block { .. } | KernelFamily::LilBlock { .. } => Distribution::Uniform01,
            _ => Distribution::Gaussian01,
        },
    };
    let kernel = catalog(&spec, &dist)?;
    out.kernel = Some(spec.to_string());
    out.dist = Some(dist.to_string());
    Ok((kernel, dist))
}

fn base(cfg: &RunConfig) -> RunConfig {
    RunConfig { command: cfg.command.clone(), workers: cfg.workers, ..Default::default() }
}

/// Matrix from a CSV path or inline rows; the resolved form is always inline.
fn resolve_matrix(text: &str) -> Result<(ChaosMatrix, String)> {
    let path = Path::new(text);
    let m = if !text.contains(';') && path.is_file() {
        ChaosMatrix::from_csv(&std::fs::read_to_string(path)?)?
    } else {
        ChaosMatrix::from_inline(text)?
    };
    let inline = (0..m.rows())
        .map(|i| m.matrix().row(i).iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";");
    Ok((m, inline))
}

fn conditions(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    let mut r = base(cfg);
    let (kernel, dist) = resolve_kernel(cfg, &mut r)?;
    let defaults = CertifyConfig::default();
    let cc = CertifyConfig {
        seed: cfg.seed.unwrap_or(0),
        norm_m: cfg.m.unwrap_or(defaults.norm_m),
        mc_samples: cfg.mc_samples.unwrap_or(defaults.mc_samples),
        ..defaults
    };
    r.seed = Some(cc.seed);
    r.m = Some(cc.norm_m);
    r.mc_samples = Some(cc.mc_samples);
    let report = certify(&kernel, &dist, &cc)?;
    let mut out = Output::default();
    out.file("conditions.json", json_pretty(&report));
    out.stdout = report.summary();
    Ok((r, out))
}

fn trajectory_config(
    cfg: &RunConfig,
    kernel: &Kernel,
    r: &mut RunConfig,
    variant: SumVariant,
) -> Result<(TrajectoryConfig, u32)> {
    let engine: Engine = match &cfg.engine {
        Some(e) => e.parse()?,
        None if kernel.separable().is_some() => Engine::Separable,
        None => Engine::Generic,
    };
    let max_exponent = cfg.max_exponent.unwrap_or(10);
    let burn_in = cfg.burn_in.unwrap_or(max_exponent / 2);
    let seeds = parse_seeds(cfg.seeds.as_deref().unwrap_or("1"))?;
    r.variant = Some(variant.to_string());
    r.engine = Some(engine.to_string());
    r.max_exponent = Some(max_exponent);
    r.burn_in = Some(burn_in);
    r.seeds = Some(format_seeds(&seeds));
    let tc = TrajectoryConfig::new(variant, max_exponent, seeds, engine);
    tc.validate(kernel)?;
    Ok((tc, burn_in))
}

fn trajectory_files(results: &[TrajectoryResult], out: &mut Output) {
    let mut jsonl = String::new();
    let mut csv = String::from(
        "seed,variant,engine,k,n,raw_sum,normalized_lil,normalized_limit_set,block_max_abs_normalized\n",
    );
    for r in results {
        for c in &r.checkpoints {
            jsonl.push_str(&json_line(&json!({
                "seed": r.seed,
                "variant": r.variant,
                "engine": r.engine,
                "k": c.k,
                "n": c.n,
                "raw_sum": c.raw_sum,
                "normalized_lil": c.normalized_lil,
                "normalized_limit_set": c.normalized_limit_set,
                "block_max_abs_normalized": c.block_max_abs_normalized,
                "tag": { "normalized_lil": TAG_LIL, "normalized_limit_set": TAG_LIMIT_SET },
            })));
            let bm = c.block_max_abs_normalized.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.seed, r.variant, r.engine, c.k, c.n, c.raw_sum, c.normalized_lil, c.normalized_limit_set, bm
            );
        }
    }
    out.file("trajectories.jsonl", jsonl);
    out.file("trajectories.csv", csv);
}

fn simulate(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    let mut r = base(cfg);
    let (kernel, dist) = resolve_kernel(cfg, &mut r)?;
    let variant: SumVariant = cfg.variant.as_deref().unwrap_or("plain_offdiag").parse()?;
    let (tc, burn_in) = trajectory_config(cfg, &kernel, &mut r, variant)?;
    let band = (
        cfg.band_lo.unwrap_or(DEFAULT_PLAUSIBILITY_BAND.0),
        cfg.band_hi.unwrap_or(DEFAULT_PLAUSIBILITY_BAND.1),
    );
    r.band_lo = Some(band.0);
    r.band_hi = Some(band.1);

    let results = run_trajectories(&kernel, &dist, &tc)?;
    let lil = limsup_estimate(&results, burn_in, Normalization::Lil)?;
    let limit = limsup_estimate(&results, burn_in, Normalization::LimitSet)?;
    let cc = CertifyConfig { seed: tc.seeds[0], ..Default::default() };
    let report = certify(&kernel, &dist, &cc)?;
    let sandwich = sandwich_report(&report, &lil, band);

    let mut out = Output::default();
    trajectory_files(&results, &mut out);
    let summary = json!({
        "kernel": kernel.name(),
        "dist": dist.to_string(),
        "variant": variant,
        "engine": tc.engine,
        "max_exponent": tc.max_exponent,
        "burn_in": burn_in,
        "seeds": tc.seeds,
        "tail_sup_lil": { "tag": TAG_LIL, "stats": lil },
        "tail_sup_limit_set": { "tag": TAG_LIMIT_SET, "stats": limit },
        "sandwich": sandwich,
    });
    out.file("summary.json", json_pretty(&summary));
    out.stdout = format!(
        "{} under {}, {} ({} engine), {} seed(s), n <= 2^{}\n  median tail sup {}: {:.6} (IQR {:.6} .. {:.6})\n  \
         median tail sup {}: {:.6}\n  certified scale K = {:.6}, ratio {:.4}{}\n",
        kernel.name(),
        dist,
        variant,
        tc.engine,
        tc.seeds.len(),
        tc.max_exponent,
        TAG_LIL,
        lil.median,
        lil.iqr.0,
        lil.iqr.1,
        TAG_LIMIT_SET,
        limit.median,
        sandwich.k_value,
        sandwich.ratio,
        if sandwich.in_band { "" } else { " (outside plausibility band)" },
    );
    Ok((r, out))
}

fn chaos(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    let mut r = base(cfg);
    let text = cfg.matrix.as_deref().ok_or_else(|| Error::Config("--matrix is required".into()))?;
    let (m, inline) = resolve_matrix(text)?;
    let t = cfg.t.unwrap_or(1.0);
    let restarts = cfg.restarts.unwrap_or(16);
    r.matrix = Some(inline);
    r.t = Some(t);
    r.restarts = Some(restarts);
    let res = chaos_norm(&m, t, restarts)?;
    let mut out = Output::default();
    out.file(
        "chaos_norm.json",
        json_line(&json!({
            "tag": "|||A|||_t = sup b^T A c, |b|_2^2 <= t, |c|_2^2 <= t, |b|_inf, |c|_inf <= 1",
            "k": m.rows(),
            "l": m.cols(),
            "t": t,
            "value": res.value,
            "b": res.b,
            "c": res.c,
            "restarts_used": res.restarts_used,
            "converged": res.converged,
            "iterations": res.iterations,
        })),
    );
    out.stdout = format!("chaos norm |||A|||_{t} = {}\n", res.value);
    Ok((r, out))
}

fn bounds(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    let mut r = base(cfg);
    let mut out = Output::default();
    let mut records = String::new();
    let t = cfg.t.unwrap_or(1.0);
    r.t = Some(t);

    let have_bounds = cfg.u.is_some() || cfg.v.is_some() || cfg.sigma2.is_some();
    if have_bounds {
        let u = cfg.u.ok_or_else(|| Error::Config("--u is required for the bound formulas".into()))?;
        let k = cfg.k_const.unwrap_or(1.0);
        r.u = Some(u);
        r.k_const = Some(k);
        let q = match (cfg.v, cfg.sigma2) {
            (Some(v), _) => {
                r.v = Some(v);
                TalagrandQuery::new(t, u, v)
            }
            (None, Some(s2)) => {
                let ez = cfg.ez_abs.unwrap_or(0.0);
                r.ez_abs = Some(ez);
                TalagrandQuery::split(t, u, s2, ez)
            }
            (None, None) => return Err(Error::Config("Talagrand bound needs --v or --sigma2".into())),
        }
        .with_k(k);
        let tb = talagrand_bound(&q)?;
        records.push_str(&json_line(&json!({
            "tag": "talagrand: K exp(-(t/(K U)) ln(1 + t U / V))",
            "t": t, "u": u, "v": q.v(), "k": k, "value": tb,
        })));
        let _ = writeln!(out.stdout, "talagrand  {tb}");
        if let Some(s2) = cfg.sigma2 {
            r.sigma2 = Some(s2);
            let p = prohorov_bound(t, u, s2)?;
            let b = bernstein_bound(t, u, s2)?;
            records.push_str(&json_line(&json!({
                "tag": "prohorov: 2 exp(-(t/(2U)) asinh(t U/(2 sigma^2)))",
                "t": t, "u": u, "sigma2": s2, "value": p,
            })));
            records.push_str(&json_line(&json!({
                "tag": "bernstein: 2 exp(-t^2/(2 sigma^2 + 2 U t/3))",
                "t": t, "u": u, "sigma2": s2, "value": b,
            })));
            let _ = writeln!(out.stdout, "prohorov   {p}\nbernstein  {b}");
        }
    }

    if let Some(text) = &cfg.matrix {
        let (m, inline) = resolve_matrix(text)?;
        let c = cfg.c.unwrap_or(0.05);
        let mode_name = cfg.mode.as_deref().unwrap_or("exhaustive");
        let mode = match mode_name {
            "exhaustive" => LatalaMode::Exhaustive,
            "monte_carlo" | "mc" => {
                let samples = cfg.samples.unwrap_or(100_000);
                let seed = cfg.seed.unwrap_or(0);
                r.samples = Some(samples);
                r.seed = Some(seed);
                LatalaMode::MonteCarlo { samples, seed }
            }
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        };
        r.matrix = Some(inline);
        r.c = Some(c);
        r.mode = Some(if matches!(mode, LatalaMode::Exhaustive) { "exhaustive" } else { "monte_carlo" }.into());
        let check = latala_lower_check(&m, t, c, mode)?;
        records.push_str(&json_line(&json!({
            "tag": "chaos lower tail: Pr{|sum a_ij eps_i eps2_j| >= c |||A|||_t} >= min(c, e^-t)",
            "t": t, "c": c, "mode": mode, "check": check,
        })));
        let _ = writeln!(
            out.stdout,
            "chaos lower tail: probability {} vs min(c, e^-t) = {} -> {}",
            check.probability,
            check.target,
            if check.holds { "holds" } else { "FAILS" }
        );
        if matches!(mode, LatalaMode::Exhaustive) {
            let mut csv = String::from("value,probability\n");
            for (v, p) in chaos_distribution(&m)? {
                let _ = writeln!(csv, "{v},{p}");
            }
            out.file("chaos_distribution.csv", csv);
        }
    }

    if records.is_empty() {
        return Err(Error::Config("bounds needs --u with --v/--sigma2, or --matrix".into()));
    }
    out.files.insert(0, ("bounds.jsonl".into(), records.into_bytes()));
    Ok((r, out))
}

fn limit_set(cfg: &RunConfig) -> Result<(RunConfig, Output)> {
    let mut r = base(cfg);
    let (kernel, dist) = resolve_kernel(cfg, &mut r)?;
    let (tc, burn_in) = trajectory_config(cfg, &kernel, &mut r, SumVariant::PlainOffdiag)?;
    r.variant = None;
    let results = run_trajectories(&kernel, &dist, &tc)?;
    let (predicted, predicted_error) = match kernel.separable() {
        Some(_) => match numerical_range(&kernel, &dist, 100_000, tc.seeds[0]) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("kernel has no separable expansion".to_string())),
    };
    let est = limit_set_estimate(&results, burn_in, predicted)?;

    let mut out = Output::default();
    out.file(
        "limit_set.json",
        json_pretty(&json!({
            "tag": TAG_LIMIT_SET,
            "kernel": kernel.name(),
            "dist": dist.to_string(),
            "burn_in": burn_in,
            "seeds": tc.seeds,
            "hull": est.hull,
            "predicted": est.predicted,
            "predicted_error": predicted_error,
            "coverage": est.coverage,
            "points": est.points,
        })),
    );
    let mut csv = String::from("lo,hi,count\n");
    for (lo, hi, c) in &est.histogram {
        let _ = writeln!(csv, "{lo},{hi},{c}");
    }
    out.file("limit_set_histogram.csv", csv);
    out.stdout = format!(
        "hull of {} beyond 2^{}: [{:.6}, {:.6}]\n",
        TAG_LIMIT_SET, burn_in, est.hull.0, est.hull.1
    );
    match est.predicted {
        Some((lo, hi)) => {
            let _ = writeln!(
                out.stdout,
                "numerical range: [{lo}, {hi}], hull covers {:.1}% of it",
                100.0 * est.coverage.unwrap_or(0.0)
            );
        }
        None => {
            let _ = writeln!(out.stdout, "numerical range unavailable: {}", predicted_error.unwrap_or_default());
        }
    }
    Ok((r, out))
}
