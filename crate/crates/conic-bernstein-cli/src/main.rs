//! `conic-bernstein`: compute and verify Bernstein inequalities on conic
//! domains from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric failure,
//! 4 tolerance failure.  `CONIC_BERNSTEIN_THREADS` caps the worker pool.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod ops;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{load_file, ConfigError, KEYS};

/// Version string: crate version plus `git describe` of the build tree.
pub const VERSION: &str = env!("CONIC_BERNSTEIN_DESCRIBE");

/// Failures, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum AppError {
    /// Invalid configuration.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Library error.
    #[error(transparent)]
    Lib(#[from] conic_bernstein::Error),
    /// Output could not be written.
    #[error("cannot write output: {0}")]
    Io(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        use conic_bernstein::Error as E;
        match self {
            AppError::Config(_) | AppError::Io(_) => 2,
            AppError::Lib(E::Domain(_) | E::Index(_) | E::Unsupported(_)) => 2,
            AppError::Lib(E::Numeric(_) | E::Divergent(_) | E::Resource(_)) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "conic-bernstein", version = VERSION, about = "Bernstein inequalities on conic domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sharp constants over a degree ladder with a growth-exponent verdict.
    Constants(Params),
    /// Run a verification suite.
    Verify {
        /// Suite to run.
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        params: Params,
    },
    /// Construct a separated point set and certify it.
    Pointset(Params),
    /// Kernel localization table.
    Decay(Params),
}

/// Verification suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Differential-operator eigen-identities.
    Eigen,
    /// Self-adjointness of the spectral operators.
    Selfadjoint,
    /// Reproducing-kernel identities.
    Kernels,
    /// Marcinkiewicz–Zygmund inequalities on separated sets.
    Mz,
    /// Remez-type inequalities.
    Remez,
    /// Maximal-function comparison.
    Maximal,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Eigen => "eigen",
            Suite::Selfadjoint => "selfadjoint",
            Suite::Kernels => "kernels",
            Suite::Mz => "mz",
            Suite::Remez => "remez",
            Suite::Maximal => "maximal",
        }
    }
}

/// Flags shared by all commands; each maps to a dotted config key.
#[derive(Args, Debug, Default)]
struct Params {
    /// JSON file of dotted keys (flags override its values).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain: surface, cone, triangle, interval (constants/verify);
    /// interval, circle, sphere, ball, surface, cone (pointset).
    #[arg(long)]
    domain: Option<String>,
    /// Spatial dimension `d`.
    #[arg(long)]
    d: Option<u64>,
    /// Interval weight exponent at 0.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Exponent of `t` (surface) or of `1 − t` (interval).
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Exponent of `1 − t`.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Lateral cone exponent.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Triangle exponents `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    abc: Option<String>,
    /// Operator, e.g. dt, phi-dt, dij, tinvsqrt-dij, dx, Phi-dx, tri1.
    #[arg(long)]
    op: Option<String>,
    /// Operator power `ℓ`.
    #[arg(long)]
    l: Option<u64>,
    /// First operator index.
    #[arg(long)]
    i: Option<u64>,
    /// Second operator index.
    #[arg(long)]
    j: Option<u64>,
    /// Degrees: `n`, `a,b,c`, or `a:b` (ladder entries in `[a, b]`).
    #[arg(long)]
    n: Option<String>,
    /// Largest degree for the eigen suite.
    #[arg(long)]
    nmax: Option<u64>,
    /// Norm exponent: 2 or inf (constants); a real `p ≥ 1` (mz, remez, maximal).
    #[arg(long)]
    p: Option<String>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random polynomials.
    #[arg(long)]
    samples: Option<u64>,
    /// Number of random points.
    #[arg(long)]
    points: Option<u64>,
    /// Number of random point pairs.
    #[arg(long)]
    pairs: Option<u64>,
    /// Kernel identity: dual, reproduction, lift, lift-integral, all.
    #[arg(long)]
    identity: Option<String>,
    /// Separation parameter `ε`.
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    /// Separation multiplier `β̂` (MZ sets are `β̂/n`-separated).
    #[arg(long = "beta-hat", allow_hyphen_values = true)]
    beta_hat: Option<f64>,
    /// Remez strip parameter `δ`.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Maximal-function exponent `β`.
    #[arg(long = "maximal-beta", allow_hyphen_values = true)]
    maximal_beta: Option<f64>,
    /// Decay exponent `κ`.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Decay table: kernel, dt or dij.
    #[arg(long = "decay-op")]
    decay_op: Option<String>,
    /// Multiplier applied to residual tolerances.
    #[arg(long = "tol-scale", allow_hyphen_values = true)]
    tol_scale: Option<f64>,
    /// Output directory.
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    /// Output file prefix.
    #[arg(long)]
    prefix: Option<String>,
}

impl Params {
    /// The flags that were given, as dotted keys.
    fn flags(&self) -> BTreeMap<String, Value> {
        let given: Vec<(&str, Option<Value>)> = vec![
            ("--domain", self.domain.clone().map(Value::from)),
            ("--d", self.d.map(Value::from)),
            ("--alpha", self.alpha.map(Value::from)),
            ("--beta", self.beta.map(Value::from)),
            ("--gamma", self.gamma.map(Value::from)),
            ("--mu", self.mu.map(Value::from)),
            ("--abc", self.abc.clone().map(Value::from)),
            ("--op", self.op.clone().map(Value::from)),
            ("--l", self.l.map(Value::from)),
            ("--i", self.i.map(Value::from)),
            ("--j", self.j.map(Value::from)),
            ("--n", self.n.clone().map(Value::from)),
            ("--nmax", self.nmax.map(Value::from)),
            ("--p", self.p.clone().map(Value::from)),
            ("--seed", self.seed.map(Value::from)),
            ("--samples", self.samples.map(Value::from)),
            ("--points", self.points.map(Value::from)),
            ("--pairs", self.pairs.map(Value::from)),
            ("--identity", self.identity.clone().map(Value::from)),
            ("--eps", self.eps.map(Value::from)),
            ("--beta-hat", self.beta_hat.map(Value::from)),
            ("--delta", self.delta.map(Value::from)),
            ("--maximal-beta", self.maximal_beta.map(Value::from)),
            ("--kappa", self.kappa.map(Value::from)),
            ("--decay-op", self.decay_op.clone().map(Value::from)),
            ("--tol-scale", self.tol_scale.map(Value::from)),
            ("--out-dir", self.out_dir.clone().map(Value::from)),
            ("--prefix", self.prefix.clone().map(Value::from)),
        ];
        given
            .into_iter()
            .filter_map(|(flag, v)| {
                let key = KEYS
                    .iter()
                    .find(|(_, f, _)| *f == flag)
                    .map(|(k, _, _)| *k)?;
                // A float flag given as NaN is still recorded so that
                // validation can reject it.
                v.map(|v| (key.to_string(), if v.is_null() { json!("NaN") } else { v }))
            })
            .collect()
    }

    fn file(&self) -> Result<BTreeMap<String, Value>, ConfigError> {
        match &self.config {
            Some(p) => load_file(p),
            None => Ok(BTreeMap::new()),
        }
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("CONIC_BERNSTEIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        ConfigError::Invalid(format!(
            "CONIC_BERNSTEIN_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<bool, AppError> {
    configure_threads()?;
    match cli.command {
        Command::Constants(p) => commands::constants(p.file()?, p.flags()),
        Command::Verify { suite, params: p } => commands::verify(suite, p.file()?, p.flags()),
        Command::Pointset(p) => commands::pointset(p.file()?, p.flags()),
        Command::Decay(p) => commands::decay(p.file()?, p.flags()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
