//! Command-line entry point: build-sitfl, truncate, sweep, compare.
//!
//! Every flag can also come from a `key = value` config file (`--config`);
//! command-line flags override file values, which override the documented
//! defaults. All randomness flows from `--seed`. Exit codes: 0 success,
//! 1 runtime/pipeline error, 2 usage or validation error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use textguide::boost::BoostParams;
use textguide::corpus::{load_corpus, tokenize, write_atomic, write_corpus, CorpusFormat};
use textguide::evaluation::{compare_strategies, sweep, CVResult, EvalConfig, SweepGrid};
use textguide::importance::{build_sitfl_with_backend, read_sitfl, write_sitfl};
use textguide::truncation::{apply_strategy, Strategy, TruncationConfig};
use textguide::Error;

#[derive(Parser)]
#[command(name = "textguide", version, about = "Importance-guided truncation of long labeled texts, with baselines and an evaluation harness")]
struct Cli {
    /// Config file with `key = value` lines; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the sorted important token feature list from a labeled corpus.
    BuildSitfl(CommonOpts),
    /// Truncate a corpus with one of the strategies.
    Truncate(TruncateOpts),
    /// Cross-validated part1 x part2 x tn grid sweep of the guided strategy.
    Sweep(SweepOpts),
    /// Paired cross-validated comparison of strategies.
    Compare(CompareOpts),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Input corpus path.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Corpus format: jsonl or csv [default: jsonl]
    #[arg(long)]
    format: Option<String>,
    /// Token budget [default: 510]
    #[arg(long)]
    nta: Option<usize>,
    /// Head fraction of the budget [default: 0.2]
    #[arg(long)]
    part1: Option<f64>,
    /// Tail fraction of the budget [default: 0.1]
    #[arg(long)]
    part2: Option<f64>,
    /// Token neighbors kept on each side of an important token [default: 2]
    #[arg(long)]
    tn: Option<usize>,
    /// Hybrid head-only threshold as a multiple of nta [default: 1.5]
    #[arg(long)]
    hybrid_factor: Option<f64>,
    /// Number of features selected by mutual information [default: 2000]
    #[arg(long)]
    n_features: Option<usize>,
    /// Minimum document frequency for vocabulary tokens [default: 2]
    #[arg(long)]
    min_df: Option<usize>,
    /// Boosting rounds [default: 100]
    #[arg(long)]
    rounds: Option<usize>,
    /// Boosting learning rate [default: 0.1]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Maximum tree depth [default: 3]
    #[arg(long)]
    max_depth: Option<usize>,
    /// Minimum training rows per leaf [default: 5]
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Cross-validation folds [default: 5]
    #[arg(long)]
    folds: Option<usize>,
    /// Base seed for all randomness [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Phase-1 scope: fold_safe or corpus_level [default: fold_safe]
    #[arg(long)]
    leakage: Option<String>,
    /// Importance backend: boost or mi-rank [default: boost]
    #[arg(long)]
    importance: Option<String>,
    /// Worker threads for parallel sections [default: all cores]
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct TruncateOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Truncation strategy: head, tail, head_tail, text_guide, hybrid.
    #[arg(long)]
    strategy: Option<String>,
    /// sITFL file (required for text_guide and hybrid).
    #[arg(long)]
    sitfl: Option<PathBuf>,
    /// Optional provenance sidecar JSONL path.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SweepOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated part1 grid [default: 0.1,0.2,0.3,0.4,0.5]
    #[arg(long)]
    part1_grid: Option<String>,
    /// Comma-separated part2 grid [default: 0,0.05,0.1,0.15]
    #[arg(long)]
    part2_grid: Option<String>,
    /// Comma-separated tn grid [default: 1..10]
    #[arg(long)]
    tn_grid: Option<String>,
}

#[derive(Args, Clone)]
struct CompareOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Comma-separated strategy list [default: head,head_tail,text_guide]
    #[arg(long)]
    strategies: Option<String>,
}

/// A usage/validation problem (exit 2) as opposed to a pipeline failure
/// (exit 1).
struct UsageError(String);

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::MissingSitfl(_)
            | Error::InvalidSplit { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

/// `key = value` lines; `#` starts a comment; keys may use `-` or `_`.
fn load_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let body = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (line_no, line) in body.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{} line {}: expected key = value",
                path.display(),
                line_no + 1
            )));
        };
        map.insert(key.trim().replace('-', "_"), value.trim().to_string());
    }
    Ok(map)
}

struct Resolver {
    file: HashMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(&key.replace('-', "_")) {
            Some(raw) => raw.parse().map_err(|_| {
                CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))
            }),
            None => Ok(default),
        }
    }

    fn get_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match self.file.get(&key.replace('-', "_")) {
                Some(raw) => raw
                    .parse()
                    .map(Some)
                    .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
                None => Ok(None),
            },
        }
    }
}

/// Fully resolved run configuration shared by all commands.
struct RunConfig {
    input: PathBuf,
    output: PathBuf,
    format: CorpusFormat,
    trunc: TruncationConfig,
    eval: EvalConfig,
    jobs: Option<usize>,
}

fn resolve_common(opts: &CommonOpts, resolver: &Resolver) -> Result<RunConfig, CliError> {
    let input = resolver
        .get_opt(opts.input.clone(), "input")?
        .ok_or_else(|| UsageError("--input is required".into()))?;
    let output = resolver
        .get_opt(opts.output.clone(), "output")?
        .ok_or_else(|| UsageError("--output is required".into()))?;
    let format: CorpusFormat = resolver
        .get(opts.format.clone(), "format", "jsonl".to_string())?
        .parse()?;
    let trunc = TruncationConfig::new(
        resolver.get(opts.nta, "nta", 510)?,
        resolver.get(opts.part1, "part1", 0.2)?,
        resolver.get(opts.part2, "part2", 0.1)?,
        resolver.get(opts.tn, "tn", 2)?,
        Some(resolver.get(opts.hybrid_factor, "hybrid-factor", 1.5)?),
    )?;
    let boost = BoostParams {
        rounds: resolver.get(opts.rounds, "rounds", 100)?,
        learning_rate: resolver.get(opts.learning_rate, "learning-rate", 0.1)?,
        max_depth: resolver.get(opts.max_depth, "max-depth", 3)?,
        min_samples_leaf: resolver.get(opts.min_samples_leaf, "min-samples-leaf", 5)?,
        seed: resolver.get(opts.seed, "seed", 42)?,
    };
    boost.validate()?;
    let eval = EvalConfig {
        k: resolver.get(opts.folds, "folds", 5)?,
        seed: boost.seed,
        n_features: resolver.get(opts.n_features, "n-features", 2000)?,
        min_df: resolver.get(opts.min_df, "min-df", 2)?,
        boost,
        leakage: resolver
            .get(opts.leakage.clone(), "leakage", "fold_safe".to_string())?
            .parse()?,
        backend: resolver
            .get(opts.importance.clone(), "importance", "boost".to_string())?
            .parse()?,
    };
    Ok(RunConfig {
        input,
        output,
        format,
        trunc,
        eval,
        jobs: resolver.get_opt(opts.jobs, "jobs")?,
    })
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        // Ignore failure: the pool can only be configured once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_jobs: Option<usize>) {}

fn cmd_build_sitfl(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&cfg.input, cfg.format)?;
    let sitfl = build_sitfl_with_backend(
        &corpus,
        cfg.eval.n_features,
        cfg.eval.min_df,
        &cfg.eval.boost,
        cfg.eval.backend,
    )?;
    write_sitfl(&sitfl, &cfg.output)?;
    println!("n = {}", sitfl.n);
    println!("classes = {}", corpus.labels.len());
    println!("entries = {}", sitfl.entries.len());
    println!("top tokens:");
    for (token, importance) in sitfl.entries.iter().take(10) {
        println!("  {token}\t{importance}");
    }
    Ok(())
}

fn cmd_truncate(cfg: &RunConfig, opts: &TruncateOpts, resolver: &Resolver) -> Result<(), CliError> {
    let strategy: Strategy = resolver
        .get_opt(opts.strategy.clone(), "strategy")?
        .ok_or_else(|| UsageError(format!(
            "--strategy is required; valid strategies: {}",
            Strategy::NAMES.join(", ")
        )))?
        .parse()?;
    let sitfl_path = resolver.get_opt(opts.sitfl.clone(), "sitfl")?;
    if strategy.needs_sitfl() && sitfl_path.is_none() {
        return Err(UsageError(format!(
            "strategy {strategy} requires --sitfl"
        ))
        .into());
    }
    // The head+tail baseline defaults to the 0.2/0.8 split when the guided
    // defaults (which do not sum to 1) were left untouched.
    let trunc = if strategy == Strategy::HeadTail && opts.common.part1.is_none()
        && opts.common.part2.is_none()
        && !resolver.file.contains_key("part1")
        && !resolver.file.contains_key("part2")
    {
        TruncationConfig::new(cfg.trunc.nta, 0.2, 0.8, cfg.trunc.tn, cfg.trunc.hybrid_factor)?
    } else {
        cfg.trunc.clone()
    };

    let corpus = load_corpus(&cfg.input, cfg.format)?;
    let sitfl = sitfl_path.map(|p| read_sitfl(&p)).transpose()?;
    let output = apply_strategy(&corpus, strategy, sitfl.as_ref(), &trunc)?;
    write_corpus(&output.corpus, &cfg.output, cfg.format)?;
    if let Some(path) = resolver.get_opt(opts.provenance.clone(), "provenance")? {
        let mut body = String::new();
        for record in &output.provenance {
            body.push_str(&serde_json::to_string(record).expect("provenance serializes"));
            body.push('\n');
        }
        write_atomic(&path, body.as_bytes())?;
    }

    let lengths: Vec<usize> = output
        .corpus
        .instances
        .iter()
        .map(|i| tokenize(&i.text).len())
        .collect();
    println!("instances = {}", lengths.len());
    if !lengths.is_empty() {
        let min = lengths.iter().min().unwrap();
        let max = lengths.iter().max().unwrap();
        let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
        let at_budget = lengths.iter().filter(|&&l| l == trunc.nta).count();
        println!("token lengths: min {min}, mean {mean:.1}, max {max}");
        println!("at budget ({}) : {at_budget}", trunc.nta);
    }
    Ok(())
}

fn parse_grid<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<Vec<T>, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse {what} grid {raw:?}")))
}

fn cmd_sweep(cfg: &RunConfig, opts: &SweepOpts, resolver: &Resolver) -> Result<(), CliError> {
    let defaults = SweepGrid::standard();
    let grid = SweepGrid {
        part1: match resolver.get_opt(opts.part1_grid.clone(), "part1-grid")? {
            Some(raw) => parse_grid(&raw, "part1")?,
            None => defaults.part1,
        },
        part2: match resolver.get_opt(opts.part2_grid.clone(), "part2-grid")? {
            Some(raw) => parse_grid(&raw, "part2")?,
            None => defaults.part2,
        },
        tn: match resolver.get_opt(opts.tn_grid.clone(), "tn-grid")? {
            Some(raw) => parse_grid(&raw, "tn")?,
            None => defaults.tn,
        },
    };
    let corpus = load_corpus(&cfg.input, cfg.format)?;
    let result = sweep(&corpus, &grid, cfg.trunc.nta, &cfg.eval)?;
    write_atomic(&cfg.output, result.to_csv().as_bytes())?;
    match result.best() {
        Some(best) => println!(
            "best: part1={} part2={} tn={} mean_mcc={}",
            best.part1,
            best.part2,
            best.tn,
            best.mean_mcc.unwrap()
        ),
        None => println!("no grid point succeeded"),
    }
    Ok(())
}

fn cmd_compare(cfg: &RunConfig, opts: &CompareOpts, resolver: &Resolver) -> Result<(), CliError> {
    let raw = resolver.get(
        opts.strategies.clone(),
        "strategies",
        "head,head_tail,text_guide".to_string(),
    )?;
    let mut strategies = Vec::new();
    for name in raw.split(',') {
        let strategy: Strategy = name.trim().parse()?;
        // The head+tail baseline keeps the conventional 0.75/0.25 split; the
        // part1/part2 flags configure the guided strategies.
        let trunc = if strategy == Strategy::HeadTail {
            TruncationConfig::new(cfg.trunc.nta, 0.75, 0.25, cfg.trunc.tn, None)?
        } else {
            cfg.trunc.clone()
        };
        strategies.push((strategy, trunc));
    }
    let corpus = load_corpus(&cfg.input, cfg.format)?;
    let results = compare_strategies(&corpus, &strategies, &cfg.eval)?;
    let json = serde_json::to_string_pretty(&results).expect("results serialize");
    write_atomic(&cfg.output, json.as_bytes())?;

    let mut ranking: Vec<&CVResult> = results.iter().collect();
    ranking.sort_by(|a, b| b.mean_mcc.partial_cmp(&a.mean_mcc).unwrap());
    println!("strategy ranking (mean MCC over {} folds):", cfg.eval.k);
    for r in ranking {
        println!("  {}\t{:.4}", r.strategy, r.mean_mcc);
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => HashMap::new(),
    };
    let resolver = Resolver { file };
    match &cli.command {
        Command::BuildSitfl(opts) => {
            let cfg = resolve_common(opts, &resolver)?;
            configure_jobs(cfg.jobs);
            cmd_build_sitfl(&cfg)
        }
        Command::Truncate(opts) => {
            let cfg = resolve_common(&opts.common, &resolver)?;
            configure_jobs(cfg.jobs);
            cmd_truncate(&cfg, opts, &resolver)
        }
        Command::Sweep(opts) => {
            let cfg = resolve_common(&opts.common, &resolver)?;
            configure_jobs(cfg.jobs);
            cmd_sweep(&cfg, opts, &resolver)
        }
        Command::Compare(opts) => {
            let cfg = resolve_common(&opts.common, &resolver)?;
            configure_jobs(cfg.jobs);
            cmd_compare(&cfg, opts, &resolver)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
