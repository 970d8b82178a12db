//! `dynmeans` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or flag error, 2 malformed or unreadable
//! input, 3 some timestep hit the iteration cap (results are still written).

mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynmeans::pipeline::{ParamSpec, ReparamConfig};
use dynmeans::DynMeansParams;

#[derive(Debug, Parser)]
#[command(
    name = "dynmeans",
    version,
    about = "Clustering of batch-sequential data with Dynamic Means"
)]
pub struct Cli {
    /// Write all wall times as 0 so repeated runs produce identical files
    #[arg(long, global = true)]
    no_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a moving-Gaussian benchmark sequence with ground truth
    Generate(GenerateArgs),
    /// Cluster a batch-sequence file
    Cluster(ClusterArgs),
    /// Score result files against ground truth
    Eval(EvalArgs),
    /// Evaluate a parameter grid over several seeded trials
    Sweep(sweep::SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthFlags {
    /// Number of clusters alive at every timestep
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    #[arg(long, default_value_t = 15)]
    points_per_cluster: usize,
    /// Standard deviation of points around their cluster center
    #[arg(long, default_value_t = 0.05)]
    point_std: f64,
    /// Standard deviation of the per-step center displacement
    #[arg(long, default_value_t = 0.05)]
    motion_std: f64,
    /// Per-step probability that a cluster dies and is replaced
    #[arg(long, default_value_t = 0.05)]
    death_prob: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    synth: SynthFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Batch-sequence output file
    #[arg(long, short)]
    output: PathBuf,
    /// Ground-truth label file
    #[arg(long)]
    truth: PathBuf,
}

/// Either `--n-q/--k-tau` (recommended) or `--q/--tau`, always with `--lambda`.
#[derive(Debug, Clone, Args)]
pub struct ParamFlags {
    /// Cost of opening a new cluster (squared-distance threshold)
    #[arg(long)]
    lambda: f64,
    /// Steps a cluster may go unobserved and still be revived
    #[arg(long, conflicts_with_all = ["q", "tau"])]
    n_q: Option<f64>,
    /// Revival radius multiplier after one unobserved step
    #[arg(long, conflicts_with_all = ["q", "tau"])]
    k_tau: Option<f64>,
    /// Revival penalty per unobserved step
    #[arg(long)]
    q: Option<f64>,
    /// Per-step growth of dormant-cluster uncertainty
    #[arg(long)]
    tau: Option<f64>,
}

impl ParamFlags {
    fn spec(&self) -> Result<ParamSpec, CliError> {
        let spec = match (self.n_q, self.k_tau, self.q, self.tau) {
            (Some(n_q), Some(k_tau), None, None) => ParamSpec::Reparam(
                ReparamConfig::new(self.lambda, n_q, k_tau)
                    .map_err(|e| CliError::usage(format!("--n-q/--k-tau: {e}")))?,
            ),
            (None, None, Some(q), Some(tau)) => ParamSpec::Direct(
                DynMeansParams::new(self.lambda, q, tau)
                    .map_err(|e| CliError::usage(format!("--lambda/--q/--tau: {e}")))?,
            ),
            _ => {
                return Err(CliError::usage(
                    "supply either --n-q and --k-tau, or --q and --tau (not a mixture)",
                ))
            }
        };
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Batch-sequence input file
    #[arg(long, short)]
    input: PathBuf,
    /// Result file (line-delimited JSON)
    #[arg(long, short)]
    output: PathBuf,
    /// Optional per-point label table
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Optional per-timestep summary table
    #[arg(long)]
    steps_csv: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
    /// Random scan orders tried per timestep; the lowest-cost one is kept
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = dynmeans::cluster::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth label file
    #[arg(long)]
    truth: PathBuf,
    /// Result file(s); one summary row each
    #[arg(long, required = true, num_args = 1..)]
    result: Vec<PathBuf>,
    /// Write the summary table as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also print per-timestep accuracy and time
    #[arg(long)]
    per_step: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) => f.write_str(m),
        }
    }
}

/// What a successful command reports back for the exit status.
pub enum Outcome {
    Done,
    Unconverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let timing = !cli.no_timing;
    let result = match cli.command {
        Command::Generate(args) => commands::generate(args),
        Command::Cluster(args) => commands::cluster(args, timing),
        Command::Eval(args) => commands::eval(args),
        Command::Sweep(args) => sweep::run(args, timing),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Unconverged) => {
            eprintln!("warning: at least one timestep reached --max-iters without converging");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
