//! `thinlab`: command-line driver for the Schottky group experiments.

mod artifacts;
mod commands;
mod error;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use thinlab_core::thermo::DEFAULT_A0_PRIME;

#[derive(Debug, Parser)]
#[command(name = "thinlab", version, about = "Transfer operators, congruence towers and expander checks for Schottky groups")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Generator file `{"generators": [[[a, b], [c, d]], ...]}`; the built-in
    /// example group when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Chebyshev degree per interval.
    #[arg(long, global = true, default_value_t = 16)]
    pub degree: usize,
    /// Cylinder depth for congruence functions.
    #[arg(long, global = true, default_value_t = 6)]
    pub depth: usize,
    /// Metric parameter, at least the measured contraction.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Half-width of the admissible range of `a`.
    #[arg(long, global = true, default_value_t = DEFAULT_A0_PRIME)]
    pub a0: f64,
    /// Skip writing artifacts and only print the result.
    #[arg(long, global = true)]
    pub no_write: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the Schottky conditions of the generators.
    Validate,
    /// Critical exponent from the pressure root.
    Delta,
    /// Leading eigendata of the transfer operator.
    Rpf(RpfArgs),
    /// Cayley graph gaps of the return sets modulo q.
    Cayley(CayleyArgs),
    /// Flattening estimates for the measures on SL2(Z/q).
    Flatten(FlattenArgs),
    /// Decay of the congruence transfer operator on new vectors.
    Decay(DecayArgs),
    /// Spectral radius of the twisted base operator.
    Twist(TwistArgs),
    /// Merge the artifacts of a sweep into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RpfArgs {
    /// Exponent `s` in `L_{-s tau}`; the critical exponent when omitted.
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CayleyArgs {
    /// Return-set level.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [5u64, 7, 11, 13])]
    pub q: Vec<u64>,
    /// Start symbol, 1-based.
    #[arg(long, default_value_t = 1)]
    pub y: usize,
    /// End symbol, 1-based.
    #[arg(long, default_value_t = 1)]
    pub z: usize,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    #[arg(long)]
    pub q: u64,
    /// Number of prefix steps, a multiple of `l`.
    #[arg(long, default_value_t = 8)]
    pub r: usize,
    #[arg(long, default_value_t = 4)]
    pub l: usize,
    /// Return-set level, below `l`.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// Tail `(alpha_s, ..., alpha_{r+1})`, 1-based and comma separated.
    #[arg(long, default_value = "1,1")]
    pub tail: String,
    /// Period of the base point, 1-based.
    #[arg(long, default_value = "1")]
    pub x: String,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Largest group order for the dense singular value check.
    #[arg(long, default_value_t = 400)]
    pub dense_limit: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputArg {
    Smooth,
    Cylinderwise,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [5u64, 7, 11])]
    pub q: Vec<u64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of blocks of `s_q` steps.
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = thinlab_core::spectral::DEFAULT_KAPPA)]
    pub kappa: f64,
    /// Return-set level used to certify generation.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    #[arg(long, value_enum, default_value_t = InputArg::Smooth)]
    pub input: InputArg,
}

#[derive(Debug, Args)]
pub struct TwistArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 20.0, 80.0], allow_hyphen_values = true)]
    pub b: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    /// Chebyshev degree of the twisted operator.
    #[arg(long, default_value_t = 64)]
    pub twist_degree: usize,
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory to scan; the output directory when omitted.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("THINLAB_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                // only fails if a pool already exists
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: THINLAB_THREADS must be a positive integer, got {n:?}");
                return ExitCode::from(2);
            }
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
