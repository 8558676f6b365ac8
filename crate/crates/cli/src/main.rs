//! `starwalk`: sampling, volume, diagnostics and constructions for
//! star-shaped bodies from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::CliError;

#[derive(Parser, Debug)]
#[command(name = "starwalk", version, about = "Ball-walk sampling and volume estimation for star-shaped bodies")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "STAR_SAMPLER_THREADS")]
    threads: Option<usize>,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Metadata sidecar path (defaults to `<out>.meta.json` when `--out` is given).
    #[arg(long, global = true)]
    meta: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw approximately uniform points with the ball walk.
    Sample(SampleArgs),
    /// Estimate the volume as kernel volume over kernel fraction.
    Volume(VolumeArgs),
    /// Run an empirical inequality check on a body.
    Diagnose(DiagnoseArgs),
    /// Emit a body spec for a built-in construction.
    Construct(ConstructArgs),
    /// Thin decomposition of a star polygon against two cell sets.
    Decompose(DecomposeArgs),
    /// Whiten the kernel and emit the affinely transformed body.
    Round(RoundArgs),
    /// Build the star-shaped body of a CLIQUE(k) instance.
    ReduceClique(ReduceCliqueArgs),
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub body: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Kernel fraction used in the theoretical plan; estimated when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Use the theorem's step radius and step count instead of the practical schedule.
    #[arg(long)]
    pub theoretical_m: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VolumeArgs {
    #[arg(long)]
    pub body: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Iso1,
    Iso2,
    Localcond,
    Coupling,
    Conductance,
    Varmix,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub body: PathBuf,
    #[arg(long, value_enum)]
    pub check: Check,
    /// Uniform samples drawn with the ball walk.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    /// Random slab partitions (iso1, iso2, conductance, varmix) or point pairs (coupling).
    #[arg(long, default_value_t = 20)]
    pub slabs: usize,
    /// Ball radius for the local conductance check.
    #[arg(long, default_value_t = 0.01)]
    pub r: f64,
    /// Monte Carlo trials per point for the local conductance check.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    GluedCones,
    Ball,
    Cube,
    OneOfTwoSquares,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long = "type", value_enum)]
    pub kind: Construction,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long)]
    pub axis_scale: Option<f64>,
    /// Ball radius or cube half-width.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// CSV of the cross-section densities (glued cones only).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    /// JSON array of `[x, y]` vertices.
    #[arg(long)]
    pub region: PathBuf,
    /// JSON array of cells `{"rect": [x0, y0, x1, y1], "weight": w}`.
    #[arg(long)]
    pub s1: PathBuf,
    #[arg(long)]
    pub s2: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RoundArgs {
    #[arg(long)]
    pub body: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Moments report path (defaults to `<out>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReduceCliqueArgs {
    /// Edge list: header `n m`, then one `u v` line per edge.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Upper box bound; defaults to the vertex count.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return CliError::usage(e.to_string()).report();
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            return CliError::usage("--threads must be at least 1".into()).report();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return CliError::runtime("thread_pool", e.to_string()).report();
        }
    }
    let ctx = commands::Context { seed: cli.seed, meta: cli.meta };
    match commands::run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
