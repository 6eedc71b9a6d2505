//! `spectrum`: multitaper spectral estimation from the command line.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 input or I/O error,
//! 4 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multitaper::Error;

#[derive(Parser)]
#[command(name = "spectrum", version, about = "Multitaper power spectral density estimation")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, env = "SPECTRUM_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Slepian tapers and list their eigenvalues.
    Dpss(DpssArgs),
    /// Estimate the spectrum of a sample file.
    Estimate(EstimateArgs),
    /// Tabulate the multitaper spectral window.
    Window(WindowArgs),
    /// Evaluate bias, variance, covariance and tail bounds for a known spectrum.
    Bounds(BoundsArgs),
    /// Monte Carlo comparison of estimators on a simulated Gaussian process.
    Simulate(SimulateArgs),
    /// Time the exact and approximate multitaper paths.
    Bench(BenchArgs),
}

/// Taper selection: a fixed count or an eigenvalue threshold.
#[derive(Args, Clone, Copy)]
#[group(multiple = false)]
struct TaperArgs {
    /// Number of tapers.
    #[arg(long)]
    k: Option<usize>,
    /// Use all tapers with eigenvalue at least 1 - delta.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct DpssArgs {
    #[arg(long)]
    n: usize,
    /// Half-bandwidth in cycles per sample.
    #[arg(long)]
    w: f64,
    #[command(flatten)]
    tapers: TaperArgs,
    /// Eigenvalue CSV (k, lambda, 1 - lambda); stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the taper bank in binary form.
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum InputFormat {
    Csv,
    Bin,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
    Bin,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum MethodName {
    Periodogram,
    Single,
    Mt,
    MtFast,
    Adaptive,
}

#[derive(Args)]
struct EstimateArgs {
    /// Samples: CSV with one `re,im` per line, or interleaved little-endian f64.
    #[arg(long, short)]
    input: PathBuf,
    /// Input format; guessed from the extension when absent (`.bin` means binary).
    #[arg(long)]
    input_format: Option<InputFormat>,
    /// Expected number of samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "mt")]
    method: MethodName,
    #[arg(long)]
    w: Option<f64>,
    #[command(flatten)]
    tapers: TaperArgs,
    /// Tolerance of the approximate estimator.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Grid size; defaults to the next power of two at least 2n.
    #[arg(long)]
    l: Option<usize>,
    /// Precomputed taper bank from `spectrum dpss --bank`.
    #[arg(long)]
    bank: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    /// JSON run summary (written by default next to the output for mt-fast).
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    w: f64,
    #[command(flatten)]
    tapers: TaperArgs,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    w: f64,
    #[command(flatten)]
    tapers: TaperArgs,
    /// Piecewise-constant spectrum: `multiband`, a JSON file, or inline JSON.
    #[arg(long, default_value = "multiband")]
    psd: String,
    /// Frequencies to report (repeatable).
    #[arg(long = "f", required = true, num_args = 1..)]
    frequencies: Vec<f64>,
    /// Also bound the covariance between the first two frequencies.
    #[arg(long)]
    covariance: bool,
    /// Tail bound ratios (repeatable).
    #[arg(long = "beta", num_args = 1..)]
    betas: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Spectrum: `multiband`, a JSON file, or inline JSON.
    #[arg(long, default_value = "multiband")]
    psd: String,
    #[arg(long)]
    n: usize,
    /// Grid size; defaults to 2n.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimators as `name[:w=..][:k=..|:delta=..|:k=floor-1][:eps=..]` (repeatable).
    #[arg(long = "method", required = true, num_args = 1..)]
    methods: Vec<String>,
    /// Bandwidth for methods without their own `w`.
    #[arg(long)]
    w: Option<f64>,
    /// Bands `start:end` over which deviations are also averaged (repeatable).
    #[arg(long = "band", num_args = 1..)]
    bands: Vec<String>,
    /// JSON report; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Plot data: frequency, truth, mean and deviation per method.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the first `--export-count` draws as interleaved little-endian f64.
    #[arg(long)]
    export_samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    export_count: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Sample lengths (repeatable); defaults to 2^10 .. 2^18.
    #[arg(long = "n", num_args = 1..)]
    ns: Vec<usize>,
    /// Approximation tolerances (repeatable).
    #[arg(long = "eps", num_args = 1.., default_values_t = [1e-4, 1e-8, 1e-12])]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Skip the exact path above this length.
    #[arg(long, default_value_t = 1 << 17)]
    exact_max_n: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::Configuration(_) | Error::Inapplicable(_) => 2,
        Error::Input(_) | Error::Io(_) | Error::Json(_) => 3,
        Error::Numerical { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // a second initialization can only happen in tests; ignoring it is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Dpss(a) => commands::dpss(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Window(a) => commands::window(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
