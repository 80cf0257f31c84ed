//! The `polarity` command-line tool.
//!
//! Exit codes: 0 success, 2 malformed input, 3 numerical failure, 4 a
//! computed check exceeded its tolerance.

mod commands;
mod demo;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::divergences::Variant;
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "polarity",
    version,
    about = "Convex conjugates, quadratic polarities and polar divergences"
)]
pub struct Cli {
    /// Tolerance for the command's self-check (exit 4 when exceeded).
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Halve every tolerance.
    #[arg(long, global = true)]
    pub strict: bool,

    /// JSON file with defaults for tol, strict, eta_grid, variant and fast.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Legendre-Fenchel conjugate of a sampled function.
    Conjugate(ConjugateArgs),
    /// Boundary of the polar of a convex body under a cost matrix.
    Polar(PolarArgs),
    /// Factorizations of a cost matrix through the Legendre polarity.
    Decompose(DecomposeArgs),
    /// Fenchel-Young, Bregman and polar divergences.
    Divergence(DivergenceArgs),
    /// c-transform under a quadratic cost.
    Ctransform(CtransformArgs),
    /// Built-in scenarios with a pass/fail check.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct ConjugateArgs {
    /// Sampled function CSV (theta_1..theta_n, value[, grad_*][, infinite]).
    #[arg(long)]
    pub input: PathBuf,
    /// Conjugate CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `auto` or `min:max:count` (the same range on every axis).
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub eta_grid: Option<String>,
    /// Linear-time hull walk for one-dimensional input.
    #[arg(long)]
    pub fast: bool,
    /// Also write the biconjugate on the input grid.
    #[arg(long, value_name = "PATH")]
    pub biconjugate: Option<PathBuf>,
    /// Also write the Fenchel-Young gap of every sample pair.
    #[arg(long, value_name = "PATH")]
    pub fy_gap: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolarArgs {
    /// Convex body JSON, or a sampled function CSV whose epigraph is used.
    #[arg(long)]
    pub input: PathBuf,
    /// Cost matrix JSON `{"n": .., "C": [...]}`; the Legendre matrix when absent.
    #[arg(long, value_name = "PATH")]
    pub cost_matrix: Option<PathBuf>,
    /// Envelope CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary JSON with residual, counts and the involution round trip.
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, value_name = "PATH")]
    pub cost_matrix: PathBuf,
    /// Optional convex body (JSON or sampled function CSV) on which both
    /// factorizations are also checked pointwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    /// Sampled function CSV with gradients.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma-separated first argument of the Bregman divergence.
    #[arg(long, allow_hyphen_values = true)]
    pub theta1: Option<String>,
    /// Comma-separated second argument; its gradient gives the dual point.
    #[arg(long, allow_hyphen_values = true)]
    pub theta2: Option<String>,
    /// JSON `{"a": [...], "b": [...]}` with homogeneous points.
    #[arg(long, value_name = "PATH")]
    pub points: Option<PathBuf>,
    /// Dual samples (eta_* columns); with --input, writes all pairwise
    /// polar divergences as CSV.
    #[arg(long, value_name = "PATH")]
    pub dual: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CtransformArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Quadratic cost JSON (Cn, d, e, f_coef, g_coef, h).
    #[arg(long, value_name = "PATH")]
    pub cost: PathBuf,
    /// `min:max:count`; the input grid's bounding box when absent.
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub eta_grid: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the block cost matrix of the cost.
    #[arg(long, value_name = "PATH")]
    pub polarity_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Scenario name.
    #[arg(value_enum)]
    pub name: Option<DemoName>,
    #[arg(long = "demo", value_enum, conflicts_with = "name")]
    pub demo_flag: Option<DemoName>,
    /// Number of boundary samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Directory for the CSV and JSON outputs.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    SelfDualParabola,
    ParabolaToCircle,
    Fig2Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Sqrt,
    Paper,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Sqrt => Variant::Sqrt,
            VariantArg::Paper => Variant::Paper,
        }
    }
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub tol: Option<f64>,
    pub strict: Option<bool>,
    pub eta_grid: Option<String>,
    pub variant: Option<VariantArg>,
    pub fast: Option<bool>,
}

/// Settings after merging flags, the config file and defaults.
#[derive(Debug, Clone)]
pub(crate) struct Settings {
    tol: Option<f64>,
    strict: bool,
    pub eta_grid: Option<String>,
    pub variant: Variant,
    pub fast: bool,
}

impl Settings {
    /// The effective tolerance for a check whose default is `default`.
    pub fn tol(&self, default: f64) -> f64 {
        let t = self.tol.unwrap_or(default);
        if self.strict {
            t / 2.0
        } else {
            t
        }
    }
}

/// Why a command did not succeed.
#[derive(Debug)]
pub(crate) enum Failure {
    Error(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

pub(crate) type Outcome = std::result::Result<(), Failure>;

fn settings(cli: &Cli) -> Result<Settings, Error> {
    let file = match &cli.config {
        Some(path) => crate::io::read_json::<FileConfig>(path)?,
        None => FileConfig::default(),
    };
    let tol = cli.tol.or(file.tol);
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {t}"
            )));
        }
    }
    let (eta_grid, variant, fast) = match &cli.command {
        Command::Conjugate(a) => (a.eta_grid.clone(), None, a.fast),
        Command::Ctransform(a) => (a.eta_grid.clone(), None, false),
        Command::Divergence(a) => (None, a.variant, false),
        _ => (None, None, false),
    };
    Ok(Settings {
        tol,
        strict: cli.strict || file.strict.unwrap_or(false),
        eta_grid: eta_grid.or(file.eta_grid),
        variant: variant
            .or(file.variant)
            .map(Variant::from)
            .unwrap_or_default(),
        fast: fast || file.fast.unwrap_or(false),
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = settings(&cli)
        .map_err(Failure::from)
        .and_then(|s| dispatch(&cli.command, &s));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Assertion(msg)) => {
            eprintln!("polarity: check failed: {msg}");
            EXIT_ASSERTION
        }
        Err(Failure::Error(e)) => {
            eprintln!("polarity: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

fn dispatch(command: &Command, s: &Settings) -> Outcome {
    match command {
        Command::Conjugate(a) => commands::conjugate(a, s),
        Command::Polar(a) => commands::polar(a, s),
        Command::Decompose(a) => commands::decompose(a, s),
        Command::Divergence(a) => commands::divergence(a, s),
        Command::Ctransform(a) => commands::ctransform(a, s),
        Command::Demo(a) => demo::run(a, s),
    }
}

/// Writes to `path`, or to standard output when there is none.
pub(crate) fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => crate::io::write_atomic(p, text.as_bytes()),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
