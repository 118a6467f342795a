//! Command-line front-end: tensor ingestion, pipeline runs, fixture
//! generation, sketch benchmarking and the PCFG demo.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input/output error.
//! Log level comes from the `CYCLERANK_LOG` environment variable.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::{CliError, CliResult};
use cyclerank_core::PipelineConfig;
use manifest::{GenSpec, PlantKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cyclerank", version, about = "Sketched low cycle-rank tensor approximation")]
struct Cli {
    /// Cap the worker thread pool (default: one thread per core)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cycle-rank-k approximation of a sparse tensor
    ApproxCycle(ApproxArgs),
    /// Classical CP-rank-k approximation of a sparse tensor
    ApproxCp(ApproxArgs),
    /// Generate planted test tensors with a known-OPT sidecar
    Gen(GenArgs),
    /// Count and time the sparse sketch kernels across nnz scales
    SketchBench(BenchArgs),
    /// Inside/outside/marginal tables for a CNF grammar and sentence
    Pcfg(PcfgArgs),
    /// Replay a recorded run manifest
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlantKindArg {
    Cycle,
    Cp,
}

impl From<PlantKindArg> for PlantKind {
    fn from(k: PlantKindArg) -> Self {
        match k {
            PlantKindArg::Cycle => PlantKind::Cycle,
            PlantKindArg::Cp => PlantKind::Cp,
        }
    }
}

#[derive(Args)]
struct ApproxArgs {
    /// Tensor file (text COO; `.bin` for the binary format)
    #[arg(long)]
    input: PathBuf,
    /// Target rank
    #[arg(long)]
    k: usize,
    /// Accuracy parameter in (0, 1)
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whole-pipeline repetitions; the best residual wins
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Random initializations per core solve
    #[arg(long, default_value_t = 10)]
    starts: usize,
    /// Sketch-size constant (s_i = ceil(cs * k^2 / eps))
    #[arg(long = "cs", default_value_t = 10.0)]
    cs: f64,
    /// Reduction-size constant (t_i = ceil(ct * k^4 / eps^2), capped at n)
    #[arg(long = "ct", default_value_t = 10.0)]
    ct: f64,
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol_rel: f64,
    /// Cross-check the Gram residual against the dense path (small n only)
    #[arg(long)]
    dense_check: bool,
    /// Use plain Gaussian sketches instead of composed ones (A/B hook)
    #[arg(long)]
    plain_gaussian: bool,
    #[arg(long, default_value = "cyclerank-out")]
    output_dir: PathBuf,
}

impl ApproxArgs {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(self.k, self.eps, self.seed);
        cfg.restarts = self.restarts;
        cfg.starts = self.starts;
        cfg.c_s = self.cs;
        cfg.c_t = self.ct;
        cfg.max_sweeps = self.max_sweeps;
        cfg.tol_rel = self.tol_rel;
        cfg.dense_check = self.dense_check;
        cfg.plain_gaussian = self.plain_gaussian;
        cfg
    }
}

#[derive(Args)]
struct GenArgs {
    /// Planted structure
    #[arg(long, value_enum, default_value_t = PlantKindArg::Cycle)]
    kind: PlantKindArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative Gaussian noise level eta (noise norm = eta * |A0|)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Tensor file to write (`.bin` selects the binary format)
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Tensor dimension
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Comma-separated nnz scales, e.g. 1000,2000,4000
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PcfgArgs {
    /// Grammar file (`BIN a b c p`, `LEX a word p`, `ROOT a` lines)
    #[arg(long)]
    grammar: PathBuf,
    /// Sentence as one whitespace-separated string
    #[arg(long)]
    sentence: Option<String>,
    /// Read the sentence from a file instead (stdin when neither is given)
    #[arg(long, conflicts_with = "sentence")]
    sentence_file: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RerunArgs {
    /// A manifest.json written by an earlier run
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the replayed outputs (default: next to the manifest)
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::ApproxCycle(args) => {
            commands::cmd_approx(PlantKind::Cycle, &args.input, args.config(), &args.output_dir)
        }
        Command::ApproxCp(args) => {
            commands::cmd_approx(PlantKind::Cp, &args.input, args.config(), &args.output_dir)
        }
        Command::Gen(args) => commands::cmd_gen(
            GenSpec {
                kind: args.kind.into(),
                n: args.n,
                k: args.k,
                seed: args.seed,
                noise: args.noise,
            },
            &args.output,
        ),
        Command::SketchBench(args) => {
            commands::cmd_sketch_bench(args.n, &args.sizes, args.seed, args.output_dir.as_deref())
        }
        Command::Pcfg(args) => {
            let sentence_text = match (&args.sentence, &args.sentence_file) {
                (Some(s), _) => s.clone(),
                (None, Some(path)) => std::fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))?,
                (None, None) => {
                    let mut buf = String::new();
                    use std::io::Read;
                    std::io::stdin()
                        .read_to_string(&mut buf)
                        .map_err(|e| CliError::Io(format!("stdin: {}", e)))?;
                    buf
                }
            };
            let words: Vec<String> =
                sentence_text.split_whitespace().map(|w| w.to_string()).collect();
            commands::cmd_pcfg(&args.grammar, &words, args.output_dir.as_deref())
        }
        Command::Rerun(args) => commands::cmd_rerun(&args.manifest, args.output_dir.as_deref()),
    }
}

fn dispatch_with_threads(cli: Cli) -> CliResult {
    match cli.threads {
        Some(threads) => {
            if threads == 0 {
                return Err(CliError::Config("--threads must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {}", e)))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CYCLERANK_LOG")).init();
    let cli = Cli::parse();
    match dispatch_with_threads(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
