//! `tellipsoid` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure,
//! 3 covariance check outside tolerance.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tellipsoid::evaluation::Generator;
use tellipsoid::simulation::{standardize_generate, Observation};
use tellipsoid::{
    comparison_table, empirical_fdr, gaussian_generate, load_expression_matrix, load_labels,
    rank_raw_t, run_study, run_tellipsoid, two_sample_t, verify_observation, BlockCovSpec, Error,
    GroundTruth, Method, RankedGeneList, SolverChoice, SpikeSpec, StudyConfig, TellipsoidConfig,
    DEFAULT_JITTER, DEFAULT_PERCENT,
};

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_TOLERANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "tellipsoid", version, about = "Correlation-aware differential expression ranking")]
struct Cli {
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank genes of a labelled expression matrix.
    Rank(RankArgs),
    /// Generate a dataset with known differential genes.
    Simulate(SimulateArgs),
    /// Score ranked lists against truth, or run a multi-replicate study.
    Evaluate(EvaluateArgs),
    /// Monte Carlo check of the t-statistic covariance approximations.
    Covlab(CovlabArgs),
}

#[derive(Args)]
struct RankArgs {
    /// Expression TSV (genes in rows, samples in columns).
    #[arg(long)]
    input: PathBuf,
    /// Labels TSV: sample_id<TAB>group with groups 1 and 2.
    #[arg(long)]
    labels: PathBuf,
    /// Length of the reported list.
    #[arg(long = "R")]
    r: usize,
    /// Percentage of genes declared null.
    #[arg(long = "P", default_value_t = DEFAULT_PERCENT)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    delta: f64,
    /// auto (low-rank when samples < null genes), dense or lowrank.
    #[arg(long, default_value = "auto")]
    solver: String,
    /// tellipsoid or raw_t.
    #[arg(long, default_value = "tellipsoid")]
    method: String,
    /// Apply log10 to the input values first.
    #[arg(long)]
    log10: bool,
    /// Recorded in the output metadata.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    /// standardize (row-standardized input matrix) or gaussian.
    #[arg(long, default_value = "gaussian")]
    mode: String,
    /// Source matrix for standardize mode.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    log10: bool,
    /// Gene count for gaussian mode.
    #[arg(long, default_value_t = 3226)]
    m: usize,
    #[arg(long, default_value_t = 20)]
    blocksize: usize,
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    #[arg(long)]
    mu: Option<usize>,
    #[arg(long)]
    md: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    xu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    xd: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving data.tsv, labels.tsv and truth.tsv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ranked list TSV; repeat for several lists.
    #[arg(long = "list")]
    lists: Vec<PathBuf>,
    /// Truth TSV for list scoring.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// With exactly two lists (Tellipsoid first, raw t second), also write the
    /// side-by-side table here.
    #[arg(long)]
    table: Option<PathBuf>,

    /// Run a study with this many replicates instead of scoring lists.
    #[arg(long)]
    replicates: Option<usize>,
    #[command(flatten)]
    study: GeneratorArgs,
    /// Comma-separated list sizes for the study.
    #[arg(long = "R", value_delimiter = ',')]
    r_values: Vec<usize>,
    #[arg(long = "P", default_value_t = DEFAULT_PERCENT)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    delta: f64,
    #[arg(long, default_value = "auto")]
    solver: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Summary TSV path for study mode.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Report path; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CovlabArgs {
    /// Observation 1, 2 or 3.
    #[arg(long)]
    obs: String,
    /// Correlation used in both groups (sets rho1 and rho2).
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho2: Option<f64>,
    #[arg(long, default_value_t = 25)]
    n1: usize,
    #[arg(long, default_value_t = 25)]
    n2: usize,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0.03)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_io() { EXIT_IO } else { EXIT_INVALID },
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn require_seed(seed: Option<u64>) -> Result<u64, Failure> {
    seed.ok_or_else(|| invalid("--seed is required; runs are never seeded from the clock"))
}

fn emit(output: Option<&Path>, text: &str) -> CmdResult {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure {
                    code: EXIT_IO,
                    message: format!("standard output: {e}"),
                })?;
        }
    }
    Ok(())
}

fn cmd_rank(a: &RankArgs) -> CmdResult {
    let solver: SolverChoice = a.solver.parse()?;
    let method: Method = a.method.parse()?;
    let x = load_expression_matrix(&a.input, a.log10)?;
    let labels = load_labels(&a.labels, x.sample_ids())?;
    let list = match method {
        Method::Tellipsoid => {
            let cfg = TellipsoidConfig {
                r: a.r,
                percent: a.p,
                jitter: a.delta,
                solver,
                seed: a.seed,
            };
            run_tellipsoid(&x, &labels, &cfg)?.list
        }
        Method::RawT => {
            let mut list = rank_raw_t(&two_sample_t(&x, &labels)?, x.gene_ids(), a.r)?;
            list.metadata.seed = a.seed;
            list
        }
    };
    emit(a.output.as_deref(), &list.to_tsv())
}

fn required<T: Copy>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| invalid(format!("--{flag} is required")))
}

fn spike_spec(g: &GeneratorArgs, seed: u64) -> Result<SpikeSpec, Failure> {
    Ok(SpikeSpec {
        up: required(g.mu, "mu")?,
        down: required(g.md, "md")?,
        up_offset: required(g.xu, "xu")?,
        down_offset: required(g.xd, "xd")?,
        n1: required(g.n1, "n1")?,
        n2: required(g.n2, "n2")?,
        seed,
    })
}

fn generator(g: &GeneratorArgs, seed: u64) -> Result<Generator, Failure> {
    let spike = spike_spec(g, seed)?;
    match g.mode.as_str() {
        "gaussian" => {
            if g.input.is_some() {
                return Err(invalid("--input is only used in standardize mode"));
            }
            Ok(Generator::Gaussian {
                cov: BlockCovSpec {
                    m: g.m,
                    block_size: g.blocksize,
                    rho: g.rho,
                },
                spike,
            })
        }
        "standardize" => {
            let path = g
                .input
                .as_ref()
                .ok_or_else(|| invalid("standardize mode needs --input"))?;
            Ok(Generator::Standardize {
                base: load_expression_matrix(path, g.log10)?,
                spike,
            })
        }
        other => Err(invalid(format!(
            "unknown mode '{other}' (expected standardize or gaussian)"
        ))),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let seed = require_seed(a.seed)?;
    let (x, truth, labels) = match generator(&a.generator, seed)? {
        Generator::Gaussian { cov, spike } => gaussian_generate(&cov, &spike)?,
        Generator::Standardize { base, spike } => standardize_generate(&base, &spike)?,
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    x.save(a.out_dir.join("data.tsv"))?;
    labels.save(x.sample_ids(), a.out_dir.join("labels.tsv"))?;
    truth.save(a.out_dir.join("truth.tsv"))?;
    eprintln!(
        "wrote {} genes x {} samples, {} differential, to {}",
        x.n_genes(),
        x.n_samples(),
        truth.differential_flags().iter().filter(|f| **f).count(),
        a.out_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult {
    match a.replicates {
        Some(replicates) => evaluate_study(a, replicates),
        None => evaluate_lists(a),
    }
}

fn evaluate_lists(a: &EvaluateArgs) -> CmdResult {
    if a.lists.is_empty() {
        return Err(invalid("give at least one --list, or --replicates for a study"));
    }
    let truth_path = a.truth.as_ref().ok_or_else(|| invalid("--truth is required with --list"))?;
    let truth = GroundTruth::load(truth_path)?;
    let lists: Vec<RankedGeneList> = a
        .lists
        .iter()
        .map(RankedGeneList::load)
        .collect::<Result<_, _>>()?;
    let mut report = String::from("list\tmethod\tR\tNoFP\tFDR\n");
    for (path, list) in a.lists.iter().zip(&lists) {
        let score = empirical_fdr(list, &truth)?;
        let method = if list.metadata.method.is_empty() {
            "unknown"
        } else {
            &list.metadata.method
        };
        let _ = writeln!(
            report,
            "{}\t{method}\t{}\t{}\t{}",
            path.display(),
            score.r,
            score.nofp,
            score.fdr
        );
    }
    if let Some(table_path) = &a.table {
        if lists.len() != 2 {
            return Err(invalid("--table needs exactly two lists"));
        }
        let table = comparison_table(&lists[0], &lists[1], &truth)?;
        emit(Some(table_path), &format!("{table}\n"))?;
    }
    emit(a.output.as_deref(), &report)
}

fn evaluate_study(a: &EvaluateArgs, replicates: usize) -> CmdResult {
    let seed = require_seed(a.seed)?;
    let g = &a.study;
    if a.r_values.is_empty() {
        return Err(invalid("study mode needs --R"));
    }
    let mut cfg = StudyConfig::new(generator(g, seed)?, a.r_values.clone(), replicates, seed);
    cfg.percent = a.p;
    cfg.jitter = a.delta;
    cfg.solver = a.solver.parse()?;
    let report = run_study(&cfg)?;
    if report.za_violations > 0 {
        return Err(invalid(format!(
            "{} listed genes came from the null partition",
            report.za_violations
        )));
    }
    if let Some(path) = &a.summary {
        emit(Some(path), &report.summary_tsv())?;
    } else {
        eprint!("{}", report.summary_tsv());
    }
    emit(a.output.as_deref(), &report.rows_tsv())
}

fn cmd_covlab(a: &CovlabArgs) -> CmdResult {
    let seed = require_seed(a.seed)?;
    let obs: Observation = a.obs.parse()?;
    let (rho1, rho2) = match (a.rho, a.rho1, a.rho2) {
        (Some(r), None, None) => (r, r),
        (None, Some(r1), Some(r2)) => (r1, r2),
        _ => return Err(invalid("give either --rho, or both --rho1 and --rho2")),
    };
    if !(a.tol >= 0.0) {
        return Err(invalid(format!("tolerance must be non-negative, got {}", a.tol)));
    }
    let r = verify_observation(obs, rho1, rho2, a.n1, a.n2, a.reps, seed)?;
    println!("empirical_cov\ttheoretical_cov\tabs_error");
    println!("{:.6}\t{:.6}\t{:.6}", r.empirical, r.theoretical, r.abs_error);
    if r.abs_error > a.tol {
        return Err(Failure {
            code: EXIT_TOLERANCE,
            message: format!("absolute error {:.6} exceeds tolerance {}", r.abs_error, a.tol),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    }
    let result = match &cli.command {
        Command::Rank(a) => cmd_rank(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Covlab(a) => cmd_covlab(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
