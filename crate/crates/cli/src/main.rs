use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proto_harness::config::{DatasetConfig, DatasetKind, MatcherChoice, RunConfig, ScoringSection};
use proto_harness::{cmd_report, cmd_run, cmd_score, fetch, CliError};
use proto_harness_core::decoding::DEFAULT_ANSWER_CAP;
use proto_harness_core::gateway::CompletionCache;
use proto_harness_core::scorer::{DEFAULT_ANSWERS_K, DEFAULT_INCORRECT_K, DEFAULT_WORDNET_THRESHOLD};

#[derive(Parser)]
#[command(name = "proto-harness", version, about = "Prompt experiments on prototypical commonsense QA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one prompt variant over a dataset and score it.
    Run {
        /// TOML run configuration.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Override a configuration key, e.g. --set sampling.temperature=0.7
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score a predictions file against a dataset.
    Score(ScoreArgs),
    /// Build a comparison table from run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write report.json and report.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect or clear a completion cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Download WordNet 3.0 and install data.noun / index.noun.
    FetchWordnet {
        #[arg(long, default_value = fetch::WORDNET_URL)]
        url: String,
        /// Use a local archive instead of downloading.
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long, default_value = "data/wordnet")]
        dest: PathBuf,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "clustered")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "exact")]
    matcher: MatcherArg,
    #[arg(long, default_value_t = DEFAULT_WORDNET_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    wordnet_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ANSWERS_K)]
    answers_k: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_INCORRECT_K)]
    incorrect_k: Vec<u32>,
    #[arg(long, default_value_t = DEFAULT_ANSWER_CAP)]
    answer_cap: usize,
    /// Directory for scores.jsonl and score_report.{json,txt}.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Clustered,
    Binary,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MatcherArg {
    Exact,
    Wordnet,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Print entry count and any corrupt lines.
    Inspect { path: PathBuf },
    /// Remove every entry.
    Clear { path: PathBuf },
}

async fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Run { config, overrides } => {
            let config = RunConfig::load(config.as_deref(), &overrides)?;
            let fail_on_error = config.run.fail_on_error;
            let summary = cmd_run(config).await?;
            print!("{}", summary.report_text);
            println!(
                "\nrun directory: {}\nbackend calls: {}  failures: {}  empty extractions: {}",
                summary.run_dir.display(),
                summary.backend_calls,
                summary.failures,
                summary.empty_extractions
            );
            if fail_on_error && !summary.is_clean() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Score(args) => {
            let dataset = DatasetConfig {
                path: args.dataset,
                kind: match args.kind {
                    KindArg::Clustered => DatasetKind::Clustered,
                    KindArg::Binary => DatasetKind::Binary,
                },
            };
            let scoring = ScoringSection {
                matcher: match args.matcher {
                    MatcherArg::Exact => MatcherChoice::Exact,
                    MatcherArg::Wordnet => MatcherChoice::Wordnet,
                },
                threshold: args.threshold,
                wordnet_dir: args.wordnet_dir,
                answers_k: args.answers_k,
                incorrect_k: args.incorrect_k,
            };
            let outcome = cmd_score(&args.predictions, &dataset, &scoring, args.answer_cap, &args.out)?;
            print!("{}", std::fs::read_to_string(args.out.join("score_report.txt")).unwrap_or_default());
            if !outcome.missing_predictions.is_empty() {
                log::warn!("{} questions had no prediction", outcome.missing_predictions.len());
            }
        }
        Command::Report { runs, out } => {
            print!("{}", cmd_report(&runs, out.as_deref())?);
        }
        Command::Cache { action } => match action {
            CacheAction::Inspect { path } => {
                let cache = CompletionCache::open(&path).map_err(|e| CliError::Config(e.to_string()))?;
                println!("{}: {} entries", path.display(), cache.len());
                for problem in cache.corrupt_lines() {
                    println!("  {problem}");
                }
                if !cache.corrupt_lines().is_empty() {
                    return Ok(ExitCode::from(1));
                }
            }
            CacheAction::Clear { path } => {
                let cache = CompletionCache::open(&path).map_err(|e| CliError::Config(e.to_string()))?;
                let n = cache.len();
                cache.clear().map_err(|e| CliError::Config(e.to_string()))?;
                println!("cleared {n} entries from {}", path.display());
            }
        },
        Command::FetchWordnet { url, archive, dest } => {
            let bytes = match archive {
                Some(path) => std::fs::read(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
                None => fetch::download(&url).await?,
            };
            fetch::install(&bytes, &dest)?;
            println!("installed data.noun and index.noun into {}", dest.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
