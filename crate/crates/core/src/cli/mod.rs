//! The `ulil` command-line front end.
//!
//! Every command except `catalog` writes its outputs plus a `manifest.toml`
//! into the output directory (`--out`, else `$ULIL_OUT_DIR`, else
//! `./ulil-out`). The manifest is the fully resolved configuration;
//! `ulil replay <manifest>` re-runs it and reproduces the data files
//! byte for byte, independent of the worker count.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{execute, Output};
pub use config::{format_seeds, parse_seeds, RunConfig};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const DEFAULT_OUT_DIR: &str = "ulil-out";

#[derive(Debug, Parser)]
#[command(name = "ulil", version, about = "LIL laboratory for canonical U-statistics of order 2")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "ULIL_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat TOML file whose keys mirror the flags; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List catalog kernels and their parameters.
    Catalog,
    /// Certify or estimate the LIL conditions for a kernel.
    Conditions(ConditionsArgs),
    /// Simulate trajectories at dyadic checkpoints.
    Simulate(SimulateArgs),
    /// Compute the t-parameterised chaos norm of a matrix.
    ChaosNorm(ChaosNormArgs),
    /// Evaluate tail-bound formulas and, with --matrix, the chaos lower-tail check.
    Bounds(BoundsArgs),
    /// Estimate the limit set of the normalized plain U-statistic.
    LimitSet(LimitSetArgs),
    /// Re-run a manifest written by an earlier run.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelArgs {
    /// Kernel spec, e.g. `product`, `block:a=0.5,0.9;b=0.1,0.1`, `finite_rank:lambda=2,-1`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Input law: rademacher, uniform01, gaussian01, discrete:values=..;weights=..
    #[arg(long)]
    pub dist: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConditionsArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample size of the empirical operator norm.
    #[arg(long)]
    pub m: Option<usize>,
    /// Monte Carlo sample size for truncated moments.
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// plain_offdiag, randomized, decoupled or decoupled_randomized.
    #[arg(long)]
    pub variant: Option<String>,
    /// generic or separable (default: separable when the kernel has an expansion).
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub max_exponent: Option<u32>,
    /// First exponent of the limsup tail (default: max_exponent / 2).
    #[arg(long)]
    pub burn_in: Option<u32>,
    /// Seed list, e.g. `1..=20` or `1,5,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub band_lo: Option<f64>,
    #[arg(long)]
    pub band_hi: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ChaosNormArgs {
    /// CSV file, or inline rows such as `1,0;0,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub ez_abs: Option<f64>,
    /// Constant K of the Talagrand bound.
    #[arg(long)]
    pub k_const: Option<f64>,
    /// Matrix for the chaos lower-tail check (CSV file or inline rows).
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    #[arg(long)]
    pub c: Option<f64>,
    /// exhaustive or monte_carlo.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LimitSetArgs {
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub max_exponent: Option<u32>,
    #[arg(long)]
    pub burn_in: Option<u32>,
    #[arg(long)]
    pub seeds: Option<String>,
}

impl Command {
    fn to_config(&self) -> RunConfig {
        let with_kernel = |k: &KernelArgs, cmd: &str| RunConfig {
            command: Some(cmd.into()),
            kernel: k.kernel.clone(),
            dist: k.dist.clone(),
            ..Default::default()
        };
        match self {
            Command::Catalog => RunConfig { command: Some("catalog".into()), ..Default::default() },
            Command::Conditions(a) => RunConfig {
                seed: a.seed,
                m: a.m,
                mc_samples: a.mc_samples,
                ..with_kernel(&a.kernel, "conditions")
            },
            Command::Simulate(a) => RunConfig {
                variant: a.variant.clone(),
                engine: a.engine.clone(),
                max_exponent: a.max_exponent,
                burn_in: a.burn_in,
                seeds: a.seeds.clone(),
                band_lo: a.band_lo,
                band_hi: a.band_hi,
                ..with_kernel(&a.kernel, "simulate")
            },
            Command::ChaosNorm(a) => RunConfig {
                command: Some("chaos-norm".into()),
                matrix: a.matrix.clone(),
                t: a.t,
                restarts: a.restarts,
                ..Default::default()
            },
            Command::Bounds(a) => RunConfig {
                command: Some("bounds".into()),
                t: a.t,
                u: a.u,
                v: a.v,
                sigma2: a.sigma2,
                ez_abs: a.ez_abs,
                k_const: a.k_const,
                matrix: a.matrix.clone(),
                c: a.c,
                mode: a.mode.clone(),
                samples: a.samples,
                seed: a.seed,
                ..Default::default()
            },
            Command::LimitSet(a) => RunConfig {
                engine: a.engine.clone(),
                max_exponent: a.max_exponent,
                burn_in: a.burn_in,
                seeds: a.seeds.clone(),
                ..with_kernel(&a.kernel, "limit-set")
            },
            Command::Replay { .. } => RunConfig::default(),
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let Some(command) = cli.command else {
        use clap::CommandFactory;
        let mut cmd = Cli::command();
        println!("{}", cmd.render_help());
        return Ok(());
    };
    if let Command::Catalog = command {
        print!("{}", crate::kernel::catalog_listing());
        return Ok(());
    }

    let mut cfg = match &command {
        Command::Replay { manifest } => RunConfig::load(manifest)?,
        _ => match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        },
    };
    if !matches!(command, Command::Replay { .. }) {
        let flags = command.to_config();
        if cfg.command.as_ref().is_some_and(|c| Some(c) != flags.command.as_ref()) {
            return Err(Error::Config(format!(
                "config file is for command `{}`",
                cfg.command.as_deref().unwrap_or_default()
            )));
        }
        cfg.overlay(&flags);
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    let workers = match cfg.workers {
        Some(0) => return Err(Error::Config("workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    cfg.workers = Some(workers);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let (resolved, output) = pool.install(|| execute(&cfg))?;

    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    write_outputs(&out_dir, &resolved, &output)?;
    print!("{}", output.stdout);
    println!("wrote {} file(s) to {}", output.files.len() + 1, out_dir.display());
    Ok(())
}

/// Single collector: writes every output file and the manifest.
fn write_outputs(dir: &Path, resolved: &RunConfig, output: &Output) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &output.files {
        std::fs::File::create(dir.join(name))?.write_all(bytes)?;
    }
    std::fs::write(dir.join(MANIFEST_FILE), resolved.to_toml())?;
    Ok(())
}
