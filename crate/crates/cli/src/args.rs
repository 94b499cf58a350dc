use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "dps",
    version,
    about = "Learned sub-sampling for partial Fourier sparse recovery"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a hold-out test set.
    GenTest(GenTestArgs),
    /// Train a sampler and LISTA decoder.
    Train(TrainArgs),
    /// Score a trained run on a test set.
    Eval(EvalArgs),
    /// Time LISTA against ISTA on a trained run's pattern.
    Bench(BenchArgs),
    /// Export sampling patterns of one or more runs.
    Pattern(PatternArgs),
    /// Export learned distributions and summary plots.
    Export(ExportArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct GenTestArgs {
    /// Signal length. With --factor, the nearest multiple of the factor is used.
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Full,
    Desk,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Dps,
    Uniform,
    Random,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReconArg {
    Lista,
    Ista,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
    /// File of `key = value` lines; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `desk` shortens the run to 20000 iterations.
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    #[arg(long, value_enum)]
    pub recon: Option<ReconArg>,
    #[arg(long, value_parser = parse_factor)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Nominal signal length before rounding to a multiple of the factor.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lr_theta: Option<f64>,
    #[arg(long)]
    pub lr_phi: Option<f64>,
    #[arg(long)]
    pub l2_lambda: Option<f64>,
    #[arg(long)]
    pub entropy_mu: Option<f64>,
    #[arg(long)]
    pub tau_init: Option<f64>,
    #[arg(long)]
    pub tau_end: Option<f64>,
    /// Print the loss every this many iterations.
    #[arg(long, default_value_t = 1000)]
    pub log_every: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PatternModeArg {
    Map,
    Sample,
    Fixed,
}

#[derive(Args, Debug)]
pub struct IstaArgs {
    #[arg(long, default_value_t = 300)]
    pub ista_iters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub ista_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ista_step: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run directory or checkpoint file.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReconArg::Lista)]
    pub recon: ReconArg,
    #[command(flatten)]
    pub ista: IstaArgs,
    #[arg(long, value_enum, default_value_t = PatternModeArg::Map)]
    pub pattern_mode: PatternModeArg,
    #[arg(long, default_value_t = 0)]
    pub pattern_seed: u64,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub ista: IstaArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
}

#[derive(Args, Debug)]
pub struct PatternArgs {
    /// Run directories or checkpoint files, one strip each.
    #[arg(long, required = true, num_args = 1..)]
    pub run: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PatternModeArg::Map)]
    pub pattern_mode: PatternModeArg,
    #[arg(long, default_value_t = 0)]
    pub pattern_seed: u64,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Summary CSVs written by `eval`, combined into an MSE-vs-factor plot.
    #[arg(long, num_args = 1..)]
    pub summaries: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Negates the analytic entropy gradient, to confirm the check can fail.
    #[arg(long, hide = true)]
    pub flip_entropy_sign: bool,
}

pub const FACTORS: [usize; 5] = [2, 3, 4, 6, 8];

fn parse_factor(s: &str) -> Result<usize, String> {
    let f: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if FACTORS.contains(&f) {
        Ok(f)
    } else {
        Err(format!("factor must be one of {FACTORS:?}"))
    }
}
