//! File-to-file pipeline stages behind the CLI.
//!
//! Every stage reads JSON/JSONL inputs, writes exactly one output file,
//! and drops a `<output>.meta.json` sidecar echoing its configuration,
//! tool version, and seeds. Stages are pure functions of their input
//! files and flags, so any stage can be re-run in isolation and a chain
//! of stages is resumable from any intermediate file. JSONL outputs are
//! flushed record by record; an interrupted run leaves a valid prefix and
//! no sidecar (the sidecar doubles as a completion marker).

use crate::backend::{self, Backend, DecodingSpec, HttpBackend, Prompt, ToyLm};
use crate::concurrent::try_parallel_map;
use crate::dataset::{self, TruncationUnit};
use crate::error::{Error, Result};
use crate::experiments::{
    self, curves_to_csv, relative_change_table, summary_table, top_frequency_table, SweepOptions,
    SweepReport,
};
use crate::metrics::{multi_ref, BuiltinMetric, MetricEval, MetricId, MetricOptions};
use crate::model::{CandidatePool, Instance, LogProb, SelectorConfig, SelectorRule};
use crate::prompts::{PromptTemplate, TemplateName};
use crate::rng::{self, PRNG_ID};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const MAX_CONCURRENCY_ENV: &str = "PRAGRANK_MAX_CONCURRENCY";
pub const DEFAULT_POOL_SIZE: usize = 10;
pub const DEFAULT_QA_BEAM: usize = 5;

// ---------------------------------------------------------------------------
// Timestamps and sidecars
// ---------------------------------------------------------------------------

/// RFC 3339 UTC string for a unix timestamp (days-from-civil algorithm).
pub fn unix_to_rfc3339(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

/// Pinned timestamp (for reproducible runs) or the current wall clock.
pub fn timestamp_string(pinned: Option<u64>) -> String {
    let secs = pinned.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    unix_to_rfc3339(secs)
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", output.display()))
}

fn write_sidecar(
    output: &Path,
    subcommand: &str,
    timestamp: &str,
    config: serde_json::Value,
) -> Result<()> {
    let sidecar = serde_json::json!({
        "tool": "pragrank",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "timestamp": timestamp,
        "prng": PRNG_ID,
        "config": config,
    });
    let path = sidecar_path(output);
    let mut body = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::invalid("sidecar", e.to_string()))?;
    body.push('\n');
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

fn read_sidecar_config(input: &Path) -> Option<serde_json::Value> {
    let body = std::fs::read_to_string(sidecar_path(input)).ok()?;
    let v: serde_json::Value = serde_json::from_str(&body).ok()?;
    v.get("config").cloned()
}

/// Carry the generation decoding spec forward through pools-to-pools
/// stages so sweep reports can record it.
fn propagate_decoding(input_pools: &Path, config: &mut serde_json::Value) {
    if config.get("decoding").is_some() {
        return;
    }
    if let Some(upstream) = read_sidecar_config(input_pools) {
        if let Some(decoding) = upstream.get("decoding") {
            config["decoding"] = decoding.clone();
        }
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn to_config_value(args: &impl Serialize) -> Result<serde_json::Value> {
    serde_json::to_value(args).map_err(|e| Error::invalid("config echo", e.to_string()))
}

// ---------------------------------------------------------------------------
// Backend and metric resolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendChoice {
    Toy { corpus: Option<PathBuf> },
    Http { url: String },
}

impl BackendChoice {
    /// Resolve CLI flags (and `PRAGRANK_BACKEND_URL`) into a choice.
    pub fn from_flags(
        kind: &str,
        url: Option<String>,
        corpus: Option<PathBuf>,
    ) -> Result<BackendChoice> {
        match kind {
            "toy" => Ok(BackendChoice::Toy { corpus }),
            "http" => {
                let url = url
                    .or_else(|| std::env::var(backend::BACKEND_URL_ENV).ok())
                    .filter(|u| !u.trim().is_empty())
                    .ok_or_else(|| {
                        Error::invalid(
                            "backend",
                            format!(
                                "http backend requires --backend-url or {}",
                                backend::BACKEND_URL_ENV
                            ),
                        )
                    })?;
                Ok(BackendChoice::Http { url })
            }
            other => Err(Error::invalid(
                "backend",
                format!("unknown backend {other:?} (expected toy or http)"),
            )),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Backend>> {
        Ok(match self {
            BackendChoice::Toy { corpus: None } => Box::new(ToyLm::default_model()),
            BackendChoice::Toy { corpus: Some(path) } => Box::new(ToyLm::from_corpus_file(path)?),
            BackendChoice::Http { url } => Box::new(HttpBackend::new(url)),
        })
    }
}

/// Build evaluators for a list of metric ids; `ext:` metrics need the
/// external endpoint URL.
pub fn resolve_metrics(
    ids: &[MetricId],
    ext_url: Option<&str>,
    opts: MetricOptions,
) -> Result<Vec<Box<dyn MetricEval>>> {
    ids.iter()
        .map(|id| -> Result<Box<dyn MetricEval>> {
            match id {
                MetricId::Ext(name) => {
                    let url = ext_url.ok_or_else(|| {
                        Error::invalid("metric", format!("ext:{name} requires --ext-metric-url"))
                    })?;
                    Ok(Box::new(backend::ExtMetricClient::new(url, name.clone())))
                }
                builtin => Ok(Box::new(BuiltinMetric::new(builtin.clone(), opts)?)),
            }
        })
        .collect()
}

pub fn parse_metric_ids(raw: &[String]) -> Result<Vec<MetricId>> {
    raw.iter()
        .map(|s| MetricId::from_str(s).map_err(|e| Error::invalid("metric", e)))
        .collect()
}

fn maybe_truncate(instance: &Instance, max_units: Option<usize>, unit: TruncationUnit) -> Instance {
    match max_units {
        Some(budget) => dataset::truncate(instance, budget, unit),
        None => instance.clone(),
    }
}

fn join_pools<'a>(
    pools: &'a [CandidatePool],
    instances: &'a [Instance],
) -> Result<Vec<(&'a CandidatePool, &'a Instance)>> {
    let by_id: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    pools
        .iter()
        .map(|pool| {
            by_id
                .get(pool.instance_id.as_str())
                .map(|inst| (pool, *inst))
                .ok_or_else(|| Error::UnknownInstance(pool.instance_id.clone()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// fixture
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FixtureArgs {
    pub out: PathBuf,
    pub seed: u64,
    pub count: usize,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_fixture(args: &FixtureArgs) -> Result<()> {
    let instances = dataset::make_fixture(args.seed, args.count)?;
    dataset::save(&args.out, &instances)?;
    write_sidecar(
        &args.out,
        "fixture",
        &timestamp_string(args.timestamp),
        to_config_value(args)?,
    )
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct StatsArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_stats(args: &StatsArgs) -> Result<()> {
    let instances = dataset::load(&args.input)?;
    let stats = dataset::stats(&instances)?;
    let mut body = serde_json::to_string_pretty(&stats)
        .map_err(|e| Error::invalid("stats serialization", e.to_string()))?;
    body.push('\n');
    write_text(&args.out, &body)?;
    write_sidecar(
        &args.out,
        "stats",
        &timestamp_string(args.timestamp),
        to_config_value(args)?,
    )
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GenerateArgs {
    pub instances: PathBuf,
    pub out: PathBuf,
    pub backend: BackendChoice,
    pub n: usize,
    pub decoding: DecodingSpec,
    pub prompt_dir: Option<PathBuf>,
    pub max_source_units: Option<usize>,
    pub truncation_unit: TruncationUnit,
    pub max_workers: usize,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_generate(args: &GenerateArgs) -> Result<()> {
    if args.n == 0 {
        return Err(Error::invalid("pool size", "n must be >= 1"));
    }
    args.decoding.validate()?;
    let instances = dataset::load(&args.instances)?;
    let backend = args.backend.build()?;
    let template = PromptTemplate::resolve(args.prompt_dir.as_deref(), TemplateName::Summarize)?;

    let pools: Vec<CandidatePool> =
        try_parallel_map(&instances, args.max_workers, |_, instance| {
            let instance = maybe_truncate(instance, args.max_source_units, args.truncation_unit);
            let rendered = template.render(&[
                ("q", instance.query.as_str()),
                ("s", instance.source.as_str()),
            ])?;
            // Seeding by instance id keeps generation independent of
            // record order and worker scheduling.
            let spec = args
                .decoding
                .clone()
                .with_seed(rng::mix(args.decoding.seed, rng::hash_str(&instance.id)));
            let texts = backend.generate(&Prompt::from(rendered), args.n, &spec)?;
            let candidates = texts
                .into_iter()
                .map(|t| {
                    let logp = LogProb::new(t.total_logprob).map_err(Error::BackendUnavailable)?;
                    let mut c = crate::model::Candidate::new(t.text);
                    c.logp_s0 = Some(logp);
                    Ok(c)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CandidatePool::new(instance.id.clone(), candidates))
        })?;

    dataset::save_pools(&args.out, &pools)?;
    let mut config = to_config_value(args)?;
    config["backend_id"] = serde_json::json!(backend.id());
    write_sidecar(
        &args.out,
        "generate",
        &timestamp_string(args.timestamp),
        config,
    )
}

// ---------------------------------------------------------------------------
// answer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct AnswerArgs {
    pub instances: PathBuf,
    pub pools: PathBuf,
    pub out: PathBuf,
    pub backend: BackendChoice,
    pub beam_size: usize,
    pub max_new_tokens: usize,
    pub use_gold_answers: bool,
    pub prompt_dir: Option<PathBuf>,
    pub max_source_units: Option<usize>,
    pub truncation_unit: TruncationUnit,
    pub max_workers: usize,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_answer(args: &AnswerArgs) -> Result<()> {
    let instances = dataset::load(&args.instances)?;
    let pools = dataset::load_pools(&args.pools)?;
    let joined = join_pools(&pools, &instances)?;
    let backend = args.backend.build()?;
    let template =
        PromptTemplate::resolve(args.prompt_dir.as_deref(), TemplateName::QuestionAnswer)?;

    let answered: Vec<CandidatePool> =
        try_parallel_map(&joined, args.max_workers, |_, (pool, instance)| {
            let answer = match (&instance.gold_answer, args.use_gold_answers) {
                // Gold answers bypass the QA system entirely.
                (Some(gold), true) => gold.clone(),
                _ => {
                    let instance =
                        maybe_truncate(instance, args.max_source_units, args.truncation_unit);
                    let scored = backend::answer(
                        backend.as_ref(),
                        &template,
                        &instance.source,
                        &instance.query,
                        args.beam_size,
                        args.max_new_tokens,
                    )?;
                    if scored.text.is_empty() {
                        return Err(Error::BackendUnavailable(
                            "backend returned an empty answer".to_string(),
                        ));
                    }
                    scored.text
                }
            };
            let mut pool = (*pool).clone();
            pool.answer = Some(answer);
            Ok(pool)
        })?;

    dataset::save_pools(&args.out, &answered)?;
    let mut config = to_config_value(args)?;
    config["backend_id"] = serde_json::json!(backend.id());
    propagate_decoding(&args.pools, &mut config);
    write_sidecar(
        &args.out,
        "answer",
        &timestamp_string(args.timestamp),
        config,
    )
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    S0,
    Answer,
    Source,
    Latent,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "s0" => Ok(Objective::S0),
            "answer" => Ok(Objective::Answer),
            "source" => Ok(Objective::Source),
            "latent" => Ok(Objective::Latent),
            other => Err(format!(
                "unknown objective {other:?} (expected s0, answer, source, latent)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreArgs {
    pub instances: PathBuf,
    pub pools: PathBuf,
    pub out: PathBuf,
    pub backend: BackendChoice,
    pub objectives: Vec<Objective>,
    pub prompt_dir: Option<PathBuf>,
    pub max_source_units: Option<usize>,
    pub truncation_unit: TruncationUnit,
    pub max_workers: usize,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_score(args: &ScoreArgs) -> Result<()> {
    if args.objectives.is_empty() {
        return Err(Error::invalid(
            "objectives",
            "at least one of s0, answer, source, latent",
        ));
    }
    let instances = dataset::load(&args.instances)?;
    let pools = dataset::load_pools(&args.pools)?;
    let joined = join_pools(&pools, &instances)?;
    let backend = args.backend.build()?;
    let summarize = PromptTemplate::resolve(args.prompt_dir.as_deref(), TemplateName::Summarize)?;
    let qa = PromptTemplate::resolve(args.prompt_dir.as_deref(), TemplateName::QuestionAnswer)?;
    let reconstruct =
        PromptTemplate::resolve(args.prompt_dir.as_deref(), TemplateName::SourceReconstruct)?;

    let as_logprob = |value: f64| LogProb::new(value).map_err(Error::BackendUnavailable);

    let scored: Vec<CandidatePool> = try_parallel_map(
        &joined,
        args.max_workers,
        |_, (pool, instance)| {
            let instance = maybe_truncate(instance, args.max_source_units, args.truncation_unit);
            let mut pool = (*pool).clone();
            for candidate in &mut pool.candidates {
                for objective in &args.objectives {
                    match objective {
                        Objective::S0 => {
                            let rendered = summarize.render(&[
                                ("q", instance.query.as_str()),
                                ("s", instance.source.as_str()),
                            ])?;
                            let lp = backend.score(&Prompt::from(rendered), &candidate.text)?;
                            candidate.logp_s0 = Some(as_logprob(lp)?);
                        }
                        Objective::Answer => {
                            let answer = pool.answer.as_deref().ok_or_else(|| {
                                Error::invalid(
                                    "pools",
                                    format!(
                                        "instance {:?} has no answer; run the answer stage first",
                                        pool.instance_id
                                    ),
                                )
                            })?;
                            let rendered = qa.render(&[
                                ("d", candidate.text.as_str()),
                                ("q", instance.query.as_str()),
                            ])?;
                            let lp = backend.score(&Prompt::from(rendered), answer)?;
                            candidate.logp_answer_rec = Some(as_logprob(lp)?);
                        }
                        Objective::Source => {
                            let rendered = reconstruct.render(&[("s", candidate.text.as_str())])?;
                            let lp = backend.score(&Prompt::from(rendered), &instance.source)?;
                            candidate.logp_source_rec = Some(as_logprob(lp)?);
                        }
                        Objective::Latent => {
                            let latent = instance.latent.as_deref().ok_or_else(|| {
                                Error::invalid(
                                    "instances",
                                    format!(
                                        "instance {:?} has no latent field required by the latent objective",
                                        instance.id
                                    ),
                                )
                            })?;
                            // Latent reconstruction conditions on the bare
                            // candidate text; there is no template for it.
                            let lp =
                                backend.score(&Prompt::plain(candidate.text.clone()), latent)?;
                            candidate.logp_latent_rec = Some(as_logprob(lp)?);
                        }
                    }
                }
            }
            Ok(pool)
        },
    )?;

    dataset::save_pools(&args.out, &scored)?;
    let mut config = to_config_value(args)?;
    config["backend_id"] = serde_json::json!(backend.id());
    propagate_decoding(&args.pools, &mut config);
    write_sidecar(
        &args.out,
        "score",
        &timestamp_string(args.timestamp),
        config,
    )
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RankArgs {
    pub instances: PathBuf,
    pub pools: PathBuf,
    pub out: PathBuf,
    pub config: SelectorConfig,
    pub ext_metric_url: Option<String>,
    pub metric_opts: MetricOptions,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_rank(args: &RankArgs) -> Result<()> {
    args.config.validate()?;
    let instances = dataset::load(&args.instances)?;
    let pools = dataset::load_pools(&args.pools)?;
    let joined = join_pools(&pools, &instances)?;

    let oracle_eval: Option<Box<dyn MetricEval>> =
        match (&args.config.rule, &args.config.oracle_metric) {
            (SelectorRule::Oracle, Some(metric)) => {
                let id = MetricId::from_str(metric).map_err(|e| Error::invalid("metric", e))?;
                Some(
                    resolve_metrics(&[id], args.ext_metric_url.as_deref(), args.metric_opts)?
                        .remove(0),
                )
            }
            _ => None,
        };
    let oracle_fn = oracle_eval
        .as_ref()
        .map(|m| move |cand: &str, refs: &[String]| multi_ref(m.as_ref(), cand, refs));

    let selections = joined
        .iter()
        .map(|(pool, instance)| {
            crate::scoring::select(
                pool,
                &args.config,
                instance,
                oracle_fn
                    .as_ref()
                    .map(|f| f as &dyn Fn(&str, &[String]) -> Result<f64>),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    dataset::write_jsonl(&args.out, &selections)?;
    write_sidecar(
        &args.out,
        "rank",
        &timestamp_string(args.timestamp),
        to_config_value(args)?,
    )
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepStageArgs {
    pub instances: PathBuf,
    pub pools: PathBuf,
    pub out: PathBuf,
    pub rules: Vec<SelectorRule>,
    pub lambda_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub metrics: Vec<String>,
    pub random_seed: u64,
    pub per_instance: bool,
    pub select_split: Option<PathBuf>,
    pub label: Option<String>,
    pub ext_metric_url: Option<String>,
    pub metric_opts: MetricOptions,
    pub max_workers: usize,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

fn load_split_ids(path: &Path) -> Result<HashSet<String>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(body
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn run_sweep_stage(args: &SweepStageArgs) -> Result<()> {
    let instances = dataset::load(&args.instances)?;
    let pools = dataset::load_pools(&args.pools)?;
    let metric_ids = parse_metric_ids(&args.metrics)?;
    let evals = resolve_metrics(
        &metric_ids,
        args.ext_metric_url.as_deref(),
        args.metric_opts,
    )?;

    let timestamp = timestamp_string(args.timestamp);
    let mut opts = SweepOptions::new(timestamp.clone());
    opts.rules = args.rules.clone();
    opts.lambda_grid = args.lambda_grid.clone();
    opts.alpha_grid = args.alpha_grid.clone();
    opts.random_seed = args.random_seed;
    opts.keep_per_instance = args.per_instance;
    opts.label = args.label.clone();
    opts.max_workers = args.max_workers;
    if let Some(path) = &args.select_split {
        opts.select_split = Some(load_split_ids(path)?);
    }
    // Inherit provenance from the pools sidecar when the pools were made
    // by the generate stage.
    if let Some(config) = read_sidecar_config(&args.pools) {
        if let Some(backend_id) = config.get("backend_id").and_then(|v| v.as_str()) {
            opts.backend_id = backend_id.to_string();
        }
        if let Some(decoding) = config.get("decoding") {
            opts.decoding = serde_json::from_value(decoding.clone()).ok();
        }
    }

    let report = experiments::run_sweep(&instances, &pools, &evals, &opts)?;
    report.save(&args.out)?;
    write_sidecar(&args.out, "sweep", &timestamp, to_config_value(args)?)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateArgs {
    pub instances: PathBuf,
    pub pools: PathBuf,
    pub selections: PathBuf,
    pub out: PathBuf,
    pub metrics: Vec<String>,
    pub ext_metric_url: Option<String>,
    pub metric_opts: MetricOptions,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct EvaluationRecord {
    pub instance_id: String,
    pub chosen_index: usize,
    pub scores: BTreeMap<String, f64>,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let instances = dataset::load(&args.instances)?;
    let pools = dataset::load_pools(&args.pools)?;
    let selections = dataset::load_selections(&args.selections)?;
    let metric_ids = parse_metric_ids(&args.metrics)?;
    let evals = resolve_metrics(
        &metric_ids,
        args.ext_metric_url.as_deref(),
        args.metric_opts,
    )?;

    let instances_by_id: HashMap<&str, &Instance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let pools_by_id: HashMap<&str, &CandidatePool> =
        pools.iter().map(|p| (p.instance_id.as_str(), p)).collect();

    let mut records = Vec::with_capacity(selections.len());
    for (line, selection) in &selections {
        let pool = pools_by_id
            .get(selection.instance_id.as_str())
            .ok_or_else(|| Error::UnknownInstance(selection.instance_id.clone()))?;
        let instance = instances_by_id
            .get(selection.instance_id.as_str())
            .ok_or_else(|| Error::UnknownInstance(selection.instance_id.clone()))?;
        if selection.chosen_index >= pool.candidates.len() {
            return Err(Error::Schema {
                file: args.selections.display().to_string(),
                line: *line,
                field: "chosen_index".to_string(),
            });
        }
        let text = &pool.candidates[selection.chosen_index].text;
        let mut scores = BTreeMap::new();
        for eval in &evals {
            scores.insert(
                eval.id(),
                multi_ref(eval.as_ref(), text, &instance.references)?,
            );
        }
        records.push(EvaluationRecord {
            instance_id: selection.instance_id.clone(),
            chosen_index: selection.chosen_index,
            scores,
        });
    }

    dataset::write_jsonl(&args.out, &records)?;

    // Per-metric means ride along in the sidecar.
    let mut means = BTreeMap::new();
    for eval in &evals {
        let id = eval.id();
        let values: Vec<f64> = records.iter().map(|r| r.scores[&id]).collect();
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        means.insert(id, mean);
    }
    let mut config = to_config_value(args)?;
    config["summary"] =
        serde_json::to_value(&means).map_err(|e| Error::invalid("summary", e.to_string()))?;
    write_sidecar(
        &args.out,
        "evaluate",
        &timestamp_string(args.timestamp),
        config,
    )
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Frequency,
    Relative,
    Curves,
    Summary,
}

impl FromStr for TableKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "frequency" => Ok(TableKind::Frequency),
            "relative" => Ok(TableKind::Relative),
            "curves" => Ok(TableKind::Curves),
            "summary" => Ok(TableKind::Summary),
            other => Err(format!(
                "unknown table {other:?} (expected frequency, relative, curves, summary)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateArgs {
    pub reports: Vec<PathBuf>,
    pub table: TableKind,
    pub out: PathBuf,
    pub metrics: Option<Vec<String>>,
    pub quality_metrics: Vec<String>,
    pub text_metrics: Vec<String>,
    #[serde(skip)]
    pub timestamp: Option<u64>,
}

pub fn run_aggregate(args: &AggregateArgs) -> Result<()> {
    if args.reports.is_empty() {
        return Err(Error::invalid("reports", "at least one report required"));
    }
    let reports = args
        .reports
        .iter()
        .map(|p| SweepReport::load(p))
        .collect::<Result<Vec<_>>>()?;
    let metrics = args
        .metrics
        .clone()
        .unwrap_or_else(|| reports[0].metadata.metrics.clone());

    let single = |what: &str| -> Result<&SweepReport> {
        if reports.len() == 1 {
            Ok(&reports[0])
        } else {
            Err(Error::invalid(
                "reports",
                format!("{what} takes exactly one report"),
            ))
        }
    };

    let body = match args.table {
        TableKind::Frequency => top_frequency_table(&reports, &metrics)?.to_csv(),
        TableKind::Relative => relative_change_table(&reports, &metrics)?.to_csv(),
        TableKind::Summary => summary_table(single("summary")?, &metrics).to_csv(),
        TableKind::Curves => {
            let report = single("curves")?;
            let quality = if args.quality_metrics.is_empty() {
                report.metadata.metrics.clone()
            } else {
                args.quality_metrics.clone()
            };
            let (rows, warnings) =
                experiments::tradeoff_curves(report, &quality, &args.text_metrics);
            curves_to_csv(&rows, &warnings)
        }
    };
    write_text(&args.out, &body)?;
    write_sidecar(
        &args.out,
        "aggregate",
        &timestamp_string(args.timestamp),
        to_config_value(args)?,
    )
}
