//! Subcommand-driven pipeline over resumable JSONL files.
//!
//! Exit codes: 0 success, 2 schema error, 3 backend error, 4 precondition
//! violation. Errors print a one-line JSON record on standard error.

use clap::{Args, Parser, Subcommand};
use pragrank::backend::DecodingSpec;
use pragrank::dataset::TruncationUnit;
use pragrank::experiments::default_grid;
use pragrank::metrics::MetricOptions;
use pragrank::model::{SelectorConfig, SelectorRule};
use pragrank::pipeline::{self, BackendChoice, Objective, TableKind};
use pragrank::{Error, Result};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "pragrank",
    version,
    about = "Pragmatic re-ranking of candidate query-focused summaries",
    long_about = "Generate candidate summaries, score them under reader-reconstruction \
objectives, select winners across a lambda/alpha grid, and aggregate the results. \
Every stage reads and writes plain JSONL/JSON/CSV files plus a .meta.json sidecar, \
so pipelines are resumable from any intermediate file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Pin sidecar/report timestamps to a unix time (for byte-identical reruns)
    #[arg(long, global = true)]
    run_timestamp: Option<u64>,

    /// Worker threads for backend calls and metric computation
    #[arg(long, global = true, env = pipeline::MAX_CONCURRENCY_ENV, default_value_t = 4)]
    max_concurrency: usize,
}

#[derive(Args, Clone)]
struct BackendFlags {
    /// Backend kind: toy | http
    #[arg(long, default_value = "toy")]
    backend: String,

    /// Base URL of the wire backend (http kind)
    #[arg(long, env = pragrank::backend::BACKEND_URL_ENV)]
    backend_url: Option<String>,

    /// Corpus file for the toy backend (defaults to the embedded corpus)
    #[arg(long)]
    toy_corpus: Option<PathBuf>,
}

impl BackendFlags {
    fn resolve(&self) -> Result<BackendChoice> {
        BackendChoice::from_flags(
            &self.backend,
            self.backend_url.clone(),
            self.toy_corpus.clone(),
        )
    }
}

#[derive(Args, Clone)]
struct TruncationFlags {
    /// Truncate each source from the right to this many units before prompting
    #[arg(long)]
    max_source_units: Option<usize>,

    /// Truncation unit: whitespace_token | byte
    #[arg(long, default_value = "whitespace_token", value_parser = parse_unit)]
    truncation_unit: TruncationUnit,
}

fn parse_unit(s: &str) -> std::result::Result<TruncationUnit, String> {
    TruncationUnit::from_str(s)
}

fn parse_grid_flag(raw: Option<&str>) -> Result<Vec<f64>> {
    match raw {
        None => Ok(default_grid()),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::invalid("grid", format!("bad grid value {t:?}")))
            })
            .collect(),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Summarize an instances file: sizes and average field lengths
    Stats {
        /// Instances JSONL
        input: PathBuf,
        /// Output JSON file
        #[arg(long, short)]
        out: PathBuf,
    },

    /// Write a deterministic synthetic instances file
    Fixture {
        /// Output instances JSONL
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of instances
        #[arg(long, default_value_t = 20)]
        count: usize,
    },

    /// Sample candidate summaries for every instance
    Generate {
        /// Instances JSONL
        input: PathBuf,
        /// Output pools JSONL
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendFlags,
        /// Candidates per instance
        #[arg(long, default_value_t = pipeline::DEFAULT_POOL_SIZE)]
        n: usize,
        /// Decoding shorthand: method[,key=value...], e.g. nucleus,p=0.95,temp=1.5
        #[arg(long, default_value = "nucleus,p=0.95,temp=1.5")]
        decoding: String,
        /// Generated summary length in backend tokens
        #[arg(long, default_value_t = 24)]
        max_new_tokens: usize,
        /// Base sampling seed (streams derive per instance and candidate)
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory overriding the built-in prompt templates
        #[arg(long)]
        prompt_dir: Option<PathBuf>,
        #[command(flatten)]
        truncation: TruncationFlags,
    },

    /// Generate (or copy) the answer each reader should reconstruct
    Answer {
        /// Instances JSONL
        input: PathBuf,
        /// Pools JSONL from generate
        #[arg(long)]
        pools: PathBuf,
        /// Output pools JSONL with answers
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendFlags,
        /// Beam width for answer generation
        #[arg(long, default_value_t = pipeline::DEFAULT_QA_BEAM)]
        beam_size: usize,
        /// Answer length in backend tokens
        #[arg(long, default_value_t = 8)]
        max_new_tokens: usize,
        /// Copy gold answers from the instances file when present
        #[arg(long)]
        use_gold_answers: bool,
        #[arg(long)]
        prompt_dir: Option<PathBuf>,
        #[command(flatten)]
        truncation: TruncationFlags,
    },

    /// Fill per-candidate conditional log-likelihoods
    Score {
        /// Instances JSONL
        input: PathBuf,
        /// Pools JSONL (answers required for the answer objective)
        #[arg(long)]
        pools: PathBuf,
        /// Output pools JSONL with scores
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendFlags,
        /// Objectives to score: s0, answer, source, latent (comma-separated)
        #[arg(long, default_value = "s0,answer,source", value_delimiter = ',')]
        objectives: Vec<String>,
        #[arg(long)]
        prompt_dir: Option<PathBuf>,
        #[command(flatten)]
        truncation: TruncationFlags,
    },

    /// Apply one selector to every pool
    Rank {
        /// Instances JSONL
        input: PathBuf,
        /// Scored pools JSONL
        #[arg(long)]
        pools: PathBuf,
        /// Output selections JSONL
        #[arg(long, short)]
        out: PathBuf,
        /// Selection rule: answer-rec | source-rec | ans-src-rec | latent-rec | random | oracle
        #[arg(long)]
        rule: String,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Answer/source mix for ans-src-rec
        #[arg(long)]
        alpha: Option<f64>,
        /// Seed for the random rule
        #[arg(long)]
        seed: Option<u64>,
        /// Metric id for the oracle rule (rouge1, rouge2, rougeL, meteor_lite, ext:<name>)
        #[arg(long)]
        oracle_metric: Option<String>,
        /// Endpoint for ext:<name> metrics
        #[arg(long)]
        ext_metric_url: Option<String>,
        /// Stem tokens before metric matching
        #[arg(long)]
        stemming: bool,
    },

    /// Evaluate every selector over the lambda/alpha grid
    Sweep {
        /// Instances JSONL
        input: PathBuf,
        /// Scored pools JSONL
        #[arg(long)]
        pools: PathBuf,
        /// Output report JSON
        #[arg(long, short)]
        out: PathBuf,
        /// Rules to sweep (comma-separated)
        #[arg(
            long,
            default_value = "random,oracle,answer-rec,source-rec,ans-src-rec",
            value_delimiter = ','
        )]
        rules: Vec<String>,
        /// Lambda grid, comma-separated values in [0,1] (default 0,0.1,...,1)
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Alpha grid, comma-separated values in [0,1] (default 0,0.1,...,1)
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Metrics to evaluate (comma-separated ids)
        #[arg(
            long,
            default_value = "rouge1,rouge2,rougeL,meteor_lite",
            value_delimiter = ','
        )]
        metrics: Vec<String>,
        /// Seed for the random selector
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep per-instance detail records in the report
        #[arg(long)]
        per_instance: bool,
        /// File of instance ids (one per line) used to pick lambda*/alpha*;
        /// optimum means are then reported on the remaining instances
        #[arg(long)]
        select_split: Option<PathBuf>,
        /// Label for this (model, decoding) combination in aggregate tables
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        ext_metric_url: Option<String>,
        #[arg(long)]
        stemming: bool,
    },

    /// Score the chosen candidates of a selections file against references
    Evaluate {
        /// Instances JSONL
        input: PathBuf,
        /// Pools JSONL the selections point into
        #[arg(long)]
        pools: PathBuf,
        /// Selections JSONL from rank
        #[arg(long)]
        selections: PathBuf,
        /// Output evaluations JSONL
        #[arg(long, short)]
        out: PathBuf,
        #[arg(
            long,
            default_value = "rouge1,rouge2,rougeL,meteor_lite",
            value_delimiter = ','
        )]
        metrics: Vec<String>,
        #[arg(long)]
        ext_metric_url: Option<String>,
        #[arg(long)]
        stemming: bool,
    },

    /// Derive comparison tables and curves from sweep reports
    Aggregate {
        /// Report JSON files (one per model/decoding combination)
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Table to emit: frequency | relative | curves | summary
        #[arg(long)]
        table: String,
        /// Output CSV file
        #[arg(long, short)]
        out: PathBuf,
        /// Metric columns (default: the first report's metrics)
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// Summarization-quality metric family for curves
        #[arg(long, value_delimiter = ',')]
        quality_metrics: Option<Vec<String>>,
        /// Text-quality metric family for curves
        #[arg(long, value_delimiter = ',')]
        text_metrics: Option<Vec<String>>,
    },
}

fn parse_rules(raw: &[String]) -> Result<Vec<SelectorRule>> {
    raw.iter()
        .map(|r| SelectorRule::from_str(r).map_err(|e| Error::invalid("rule", e)))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let timestamp = cli.run_timestamp;
    let workers = cli.max_concurrency.max(1);
    match cli.command {
        Command::Stats { input, out } => pipeline::run_stats(&pipeline::StatsArgs {
            input,
            out,
            timestamp,
        }),
        Command::Fixture { out, seed, count } => pipeline::run_fixture(&pipeline::FixtureArgs {
            out,
            seed,
            count,
            timestamp,
        }),
        Command::Generate {
            input,
            out,
            backend,
            n,
            decoding,
            max_new_tokens,
            seed,
            prompt_dir,
            truncation,
        } => {
            let decoding = DecodingSpec::parse_cli(&decoding, max_new_tokens, seed)?;
            pipeline::run_generate(&pipeline::GenerateArgs {
                instances: input,
                out,
                backend: backend.resolve()?,
                n,
                decoding,
                prompt_dir,
                max_source_units: truncation.max_source_units,
                truncation_unit: truncation.truncation_unit,
                max_workers: workers,
                timestamp,
            })
        }
        Command::Answer {
            input,
            pools,
            out,
            backend,
            beam_size,
            max_new_tokens,
            use_gold_answers,
            prompt_dir,
            truncation,
        } => pipeline::run_answer(&pipeline::AnswerArgs {
            instances: input,
            pools,
            out,
            backend: backend.resolve()?,
            beam_size,
            max_new_tokens,
            use_gold_answers,
            prompt_dir,
            max_source_units: truncation.max_source_units,
            truncation_unit: truncation.truncation_unit,
            max_workers: workers,
            timestamp,
        }),
        Command::Score {
            input,
            pools,
            out,
            backend,
            objectives,
            prompt_dir,
            truncation,
        } => {
            let objectives = objectives
                .iter()
                .map(|o| Objective::from_str(o).map_err(|e| Error::invalid("objective", e)))
                .collect::<Result<Vec<_>>>()?;
            pipeline::run_score(&pipeline::ScoreArgs {
                instances: input,
                pools,
                out,
                backend: backend.resolve()?,
                objectives,
                prompt_dir,
                max_source_units: truncation.max_source_units,
                truncation_unit: truncation.truncation_unit,
                max_workers: workers,
                timestamp,
            })
        }
        Command::Rank {
            input,
            pools,
            out,
            rule,
            lambda,
            alpha,
            seed,
            oracle_metric,
            ext_metric_url,
            stemming,
        } => {
            let rule = SelectorRule::from_str(&rule).map_err(|e| Error::invalid("rule", e))?;
            let config = SelectorConfig {
                rule,
                lambda,
                alpha,
                seed,
                oracle_metric,
            };
            pipeline::run_rank(&pipeline::RankArgs {
                instances: input,
                pools,
                out,
                config,
                ext_metric_url,
                metric_opts: MetricOptions { stemming },
                timestamp,
            })
        }
        Command::Sweep {
            input,
            pools,
            out,
            rules,
            lambda_grid,
            alpha_grid,
            metrics,
            seed,
            per_instance,
            select_split,
            label,
            ext_metric_url,
            stemming,
        } => pipeline::run_sweep_stage(&pipeline::SweepStageArgs {
            instances: input,
            pools,
            out,
            rules: parse_rules(&rules)?,
            lambda_grid: parse_grid_flag(lambda_grid.as_deref())?,
            alpha_grid: parse_grid_flag(alpha_grid.as_deref())?,
            metrics,
            random_seed: seed,
            per_instance,
            select_split,
            label,
            ext_metric_url,
            metric_opts: MetricOptions { stemming },
            max_workers: workers,
            timestamp,
        }),
        Command::Evaluate {
            input,
            pools,
            selections,
            out,
            metrics,
            ext_metric_url,
            stemming,
        } => pipeline::run_evaluate(&pipeline::EvaluateArgs {
            instances: input,
            pools,
            selections,
            out,
            metrics,
            ext_metric_url,
            metric_opts: MetricOptions { stemming },
            timestamp,
        }),
        Command::Aggregate {
            reports,
            table,
            out,
            metrics,
            quality_metrics,
            text_metrics,
        } => {
            let table = TableKind::from_str(&table).map_err(|e| Error::invalid("table", e))?;
            pipeline::run_aggregate(&pipeline::AggregateArgs {
                reports,
                table,
                out,
                metrics,
                quality_metrics: quality_metrics.unwrap_or_default(),
                text_metrics: text_metrics.unwrap_or_default(),
                timestamp,
            })
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("{}", err.stderr_record());
        std::process::exit(err.exit_code());
    }
}
