use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// V-fold cross-validation and penalties for histogram density estimation.
#[derive(Parser, Debug)]
#[command(name = "vfold", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads for replicate loops (default: all cores).
    #[arg(long, global = true, env = "VFOLD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo comparison of procedures by their ratio to the oracle loss.
    Simulate(SimulateArgs),
    /// Increment variances against the best model, optionally with Monte Carlo checks.
    Variance(VarianceArgs),
    /// Selection frequencies next to the Gaussian proxy.
    Heuristic(HeuristicArgs),
    /// Timings of the fast, sparse and naive V-fold kernels.
    Bench(BenchArgs),
    /// Pick a histogram for an observed sample.
    Select(SelectArgs),
}

#[derive(Args, Debug)]
pub struct Problem {
    /// True density: L, S, uniform or file:PATH (JSON).
    #[arg(long)]
    pub setting: String,
    /// Model collection: regu, dya2 or file:PATH (JSON breakpoint arrays).
    #[arg(long)]
    pub collection: String,
    /// Sample size.
    #[arg(long)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// True density: L, S, uniform or file:PATH (JSON).
    #[arg(long, required_unless_present = "config")]
    pub setting: Option<String>,
    /// Model collection: regu, dya2 or file:PATH (JSON breakpoint arrays).
    #[arg(long, required_unless_present = "config")]
    pub collection: Option<String>,
    /// Sample size.
    #[arg(long, required_unless_present = "config")]
    pub n: Option<usize>,
    /// Number of simulated samples.
    #[arg(long, required_unless_present = "config")]
    pub reps: Option<usize>,
    /// Master seed; replicate streams derive from it.
    #[arg(long, required_unless_present = "config")]
    pub seed: Option<u64>,
    /// Procedures separated by ';', e.g. "penvf:V=5,C=1;vfcv:V=10". Defaults to the full menu.
    #[arg(long)]
    pub procedures: Option<String>,
    /// JSON file with setting, collection, n, reps, seed and procedures.
    #[arg(long, conflicts_with_all = ["setting", "collection", "n", "reps", "seed", "procedures"])]
    pub config: Option<PathBuf>,
    /// Output CSV ('-' for standard output).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write long-format plotting data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Block counts separated by ','.
    #[arg(long = "V", value_name = "LIST")]
    pub v_list: String,
    /// Penalty constant.
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    /// Monte Carlo replicates per model; 0 skips the simulation columns.
    #[arg(long, default_value_t = 0)]
    pub mc: usize,
    /// Seed for the Monte Carlo columns; required when --mc is positive.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the K1..K4 fit as JSON on standard output.
    #[arg(long)]
    pub kfit: bool,
    /// Output CSV ('-' for standard output).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write long-format plotting data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HeuristicArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Criterion, e.g. "penvf:V=5,C=1".
    #[arg(long)]
    pub criterion: String,
    /// Number of simulated samples.
    #[arg(long)]
    pub reps: usize,
    /// Master seed.
    #[arg(long)]
    pub seed: u64,
    /// Rescale the proxy probabilities to sum to one.
    #[arg(long)]
    pub renormalize: bool,
    /// Output CSV ('-' for standard output).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write long-format plotting data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Sample sizes separated by ','.
    #[arg(long, value_name = "LIST")]
    pub n_list: String,
    /// Block counts separated by ','; pairs where V does not divide n are skipped.
    #[arg(long, value_name = "LIST")]
    pub v_list: String,
    /// Histogram dimensions separated by ','.
    #[arg(long, value_name = "LIST")]
    pub d_list: String,
    /// Timed runs per grid point.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Seed of the uniform benchmark samples.
    #[arg(long)]
    pub seed: u64,
    /// Kernels separated by ',': fast, sparse, naive.
    #[arg(long, default_value = "fast,naive")]
    pub kernels: String,
    /// Output CSV ('-' for standard output).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write long-format plotting data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// One observation in [0, 1] per line; blank lines and '#' comments are skipped.
    #[arg(long)]
    pub data: PathBuf,
    /// Model collection: regu, dya2 or file:PATH.
    #[arg(long, default_value = "regu")]
    pub collection: String,
    /// Criterion, e.g. "vfcv:V=5" or "lpo:p=10".
    #[arg(long)]
    pub criterion: String,
    /// True density, needed by the ideal criterion only.
    #[arg(long)]
    pub setting: Option<String>,
}
