//! Sweep orchestration and aggregate tables.
//!
//! [`run_sweep`] evaluates every requested selector over the λ×α grid and
//! every metric, producing a [`SweepReport`] with one mean per grid cell,
//! per-(rule, metric) optima, and optional per-instance detail. The table
//! builders then reproduce the aggregate views: top-score frequency
//! counts, relative change against the random baseline, per-λ tradeoff
//! curves, and a per-report summary table.
//!
//! Reports are deterministic: cells are emitted in a canonical order,
//! means use compensated summation over the pools-file order, and all
//! randomness is keyed by (seed, instance id).

use crate::backend::DecodingSpec;
use crate::concurrent::try_parallel_map;
use crate::error::{Error, Result};
use crate::metrics::{multi_ref, MetricEval};
use crate::model::{CandidatePool, Instance, SelectorConfig, SelectorRule};
use crate::rng::PRNG_ID;
use crate::scoring::{argmax_lowest, combined_scores, random_index};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// λ and α values 0.0, 0.1, …, 1.0.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// One (rule, λ, α, metric) cell; λ and α are absent where the rule has
/// no such parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub rule: SelectorRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub metric: String,
    pub mean: f64,
}

/// Grid argmax for one (rule, metric); ties break to the smallest λ,
/// then the smallest α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub rule: SelectorRule,
    pub metric: String,
    pub lambda_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_star: Option<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerInstance {
    pub instance_id: String,
    pub rule: SelectorRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub metric: String,
    pub chosen_index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub backend_id: String,
    pub prng: String,
    pub random_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoding: Option<DecodingSpec>,
    pub lambda_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub metrics: Vec<String>,
    pub rules: Vec<SelectorRule>,
    pub instances: usize,
    pub pool_size: usize,
    pub timestamp: String,
    /// Names the (model, decoding) combination when aggregating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: ReportMeta,
    pub cells: Vec<Cell>,
    pub optima: Vec<Optimum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_instance: Option<Vec<PerInstance>>,
}

fn opt_f64_cmp(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

impl SweepReport {
    pub fn cell(
        &self,
        rule: SelectorRule,
        lambda: Option<f64>,
        alpha: Option<f64>,
        metric: &str,
    ) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.rule == rule && c.lambda == lambda && c.alpha == alpha && c.metric == metric
            })
            .map(|c| c.mean)
    }

    pub fn optimum(&self, rule: SelectorRule, metric: &str) -> Option<&Optimum> {
        self.optima
            .iter()
            .find(|o| o.rule == rule && o.metric == metric)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid("report serialization", e.to_string()))?;
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&body).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: e.line(),
            field: e.to_string(),
        })
    }
}

/// Compensated (Neumaier) mean over the given values in order.
fn compensated_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

pub struct SweepOptions {
    pub rules: Vec<SelectorRule>,
    pub lambda_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub random_seed: u64,
    pub keep_per_instance: bool,
    /// When set, λ*/α* are chosen on these instance ids and the reported
    /// optimum mean comes from the remaining instances.
    pub select_split: Option<HashSet<String>>,
    pub label: Option<String>,
    pub timestamp: String,
    pub backend_id: String,
    pub decoding: Option<DecodingSpec>,
    pub max_workers: usize,
}

impl SweepOptions {
    pub fn new(timestamp: impl Into<String>) -> Self {
        Self {
            rules: vec![
                SelectorRule::Random,
                SelectorRule::Oracle,
                SelectorRule::AnswerRec,
                SelectorRule::SourceRec,
                SelectorRule::AnsSrcRec,
            ],
            lambda_grid: default_grid(),
            alpha_grid: default_grid(),
            random_seed: 0,
            keep_per_instance: false,
            select_split: None,
            label: None,
            timestamp: timestamp.into(),
            backend_id: "unspecified".to_string(),
            decoding: None,
            max_workers: 1,
        }
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridEmpty);
    }
    for v in grid {
        if !(0.0..=1.0).contains(v) || v.is_nan() {
            return match what {
                "alpha" => Err(Error::AlphaOutOfRange(*v)),
                _ => Err(Error::LambdaOutOfRange(*v)),
            };
        }
    }
    Ok(())
}

/// Per-pool selections and means for every grid cell of every rule.
pub fn run_sweep(
    instances: &[Instance],
    pools: &[CandidatePool],
    evals: &[Box<dyn MetricEval>],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if pools.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if evals.is_empty() {
        return Err(Error::invalid("metrics", "at least one metric required"));
    }
    check_grid(&opts.lambda_grid, "lambda")?;
    check_grid(&opts.alpha_grid, "alpha")?;

    let by_id: HashMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let joined: Vec<(&CandidatePool, &Instance)> = pools
        .iter()
        .map(|pool| {
            if !seen.insert(pool.instance_id.as_str()) {
                return Err(Error::DuplicateId(pool.instance_id.clone()));
            }
            let inst = by_id
                .get(pool.instance_id.as_str())
                .ok_or_else(|| Error::UnknownInstance(pool.instance_id.clone()))?;
            Ok((pool, *inst))
        })
        .collect::<Result<_>>()?;

    // scores[pool][candidate][metric]
    let scores: Vec<Vec<Vec<f64>>> =
        try_parallel_map(&joined, opts.max_workers, |_, (pool, inst)| {
            pool.candidates
                .iter()
                .map(|c| {
                    evals
                        .iter()
                        .map(|m| multi_ref(m.as_ref(), &c.text, &inst.references))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })?;

    let metric_ids: Vec<String> = evals.iter().map(|m| m.id()).collect();
    let split_mask: Option<Vec<bool>> = opts.select_split.as_ref().map(|ids| {
        joined
            .iter()
            .map(|(pool, _)| ids.contains(&pool.instance_id))
            .collect()
    });
    if let Some(mask) = &split_mask {
        let in_split = mask.iter().filter(|b| **b).count();
        if in_split == 0 || in_split == mask.len() {
            return Err(Error::invalid(
                "select split",
                "split must contain some but not all swept instances",
            ));
        }
    }

    let mut cells = Vec::new();
    let mut optima = Vec::new();
    let mut detail = Vec::new();

    // One grid point of one rule: selections per pool, then per-metric means.
    let emit = |rule: SelectorRule,
                lambda: Option<f64>,
                alpha: Option<f64>,
                chosen: &[usize],
                cells: &mut Vec<Cell>,
                detail: &mut Vec<PerInstance>|
     -> Vec<f64> {
        let mut means = Vec::with_capacity(metric_ids.len());
        for (mi, metric) in metric_ids.iter().enumerate() {
            let values: Vec<f64> = chosen
                .iter()
                .enumerate()
                .map(|(pi, ci)| scores[pi][*ci][mi])
                .collect();
            let mean = compensated_mean(&values);
            cells.push(Cell {
                rule,
                lambda,
                alpha,
                metric: metric.clone(),
                mean,
            });
            for ((pool, _), (ci, v)) in joined.iter().zip(chosen.iter().zip(values.iter())) {
                detail.push(PerInstance {
                    instance_id: pool.instance_id.clone(),
                    rule,
                    lambda,
                    alpha,
                    metric: metric.clone(),
                    chosen_index: *ci,
                    score: *v,
                });
            }
            means.push(mean);
        }
        means
    };

    // Mean over a subset of pools for optimum selection/reporting.
    let subset_mean = |chosen: &[usize], mi: usize, want_in_split: bool| -> f64 {
        let mask = split_mask.as_ref().expect("only called with a split");
        let values: Vec<f64> = chosen
            .iter()
            .enumerate()
            .filter(|(pi, _)| mask[*pi] == want_in_split)
            .map(|(pi, ci)| scores[pi][*ci][mi])
            .collect();
        compensated_mean(&values)
    };

    for rule in &opts.rules {
        match rule {
            SelectorRule::Random => {
                let chosen: Vec<usize> = joined
                    .iter()
                    .map(|(pool, _)| {
                        random_index(opts.random_seed, &pool.instance_id, pool.candidates.len())
                    })
                    .collect();
                emit(*rule, None, None, &chosen, &mut cells, &mut detail);
            }
            SelectorRule::Oracle => {
                // The oracle is metric-specific: argmax of the same
                // multi-reference scores the evaluation uses.
                for (mi, metric) in metric_ids.iter().enumerate() {
                    let chosen: Vec<usize> = scores
                        .iter()
                        .map(|pool_scores| {
                            let per_cand: Vec<f64> =
                                pool_scores.iter().map(|cand| cand[mi]).collect();
                            argmax_lowest(&per_cand)
                        })
                        .collect();
                    let values: Vec<f64> = chosen
                        .iter()
                        .enumerate()
                        .map(|(pi, ci)| scores[pi][*ci][mi])
                        .collect();
                    cells.push(Cell {
                        rule: *rule,
                        lambda: None,
                        alpha: None,
                        metric: metric.clone(),
                        mean: compensated_mean(&values),
                    });
                    for ((pool, _), (ci, v)) in joined.iter().zip(chosen.iter().zip(values.iter()))
                    {
                        detail.push(PerInstance {
                            instance_id: pool.instance_id.clone(),
                            rule: *rule,
                            lambda: None,
                            alpha: None,
                            metric: metric.clone(),
                            chosen_index: *ci,
                            score: *v,
                        });
                    }
                }
            }
            SelectorRule::AnsSrcRec => {
                // best[metric] -> (selection_mean, report_mean, λ*, α*)
                let mut best: Vec<Option<(f64, f64, f64, f64)>> = vec![None; metric_ids.len()];
                for lambda in &opts.lambda_grid {
                    for alpha in &opts.alpha_grid {
                        let config = SelectorConfig::ans_src_rec(*lambda, *alpha);
                        let chosen = select_all(&joined, &config)?;
                        let means = emit(
                            *rule,
                            Some(*lambda),
                            Some(*alpha),
                            &chosen,
                            &mut cells,
                            &mut detail,
                        );
                        for (mi, mean) in means.iter().enumerate() {
                            let (sel_mean, rep_mean) = match &split_mask {
                                None => (*mean, *mean),
                                Some(_) => (
                                    subset_mean(&chosen, mi, true),
                                    subset_mean(&chosen, mi, false),
                                ),
                            };
                            if best[mi].is_none_or(|(s, _, _, _)| sel_mean > s) {
                                best[mi] = Some((sel_mean, rep_mean, *lambda, *alpha));
                            }
                        }
                    }
                }
                for (mi, metric) in metric_ids.iter().enumerate() {
                    let (_, mean, lambda_star, alpha_star) = best[mi].expect("grid non-empty");
                    optima.push(Optimum {
                        rule: *rule,
                        metric: metric.clone(),
                        lambda_star,
                        alpha_star: Some(alpha_star),
                        mean,
                    });
                }
            }
            SelectorRule::AnswerRec | SelectorRule::SourceRec | SelectorRule::LatentRec => {
                let mut best: Vec<Option<(f64, f64, f64)>> = vec![None; metric_ids.len()];
                for lambda in &opts.lambda_grid {
                    let config = match rule {
                        SelectorRule::AnswerRec => SelectorConfig::answer_rec(*lambda),
                        SelectorRule::SourceRec => SelectorConfig::source_rec(*lambda),
                        _ => SelectorConfig::latent_rec(*lambda),
                    };
                    let chosen = select_all(&joined, &config)?;
                    let means = emit(*rule, Some(*lambda), None, &chosen, &mut cells, &mut detail);
                    for (mi, mean) in means.iter().enumerate() {
                        let (sel_mean, rep_mean) = match &split_mask {
                            None => (*mean, *mean),
                            Some(_) => (
                                subset_mean(&chosen, mi, true),
                                subset_mean(&chosen, mi, false),
                            ),
                        };
                        if best[mi].is_none_or(|(s, _, _)| sel_mean > s) {
                            best[mi] = Some((sel_mean, rep_mean, *lambda));
                        }
                    }
                }
                for (mi, metric) in metric_ids.iter().enumerate() {
                    let (_, mean, lambda_star) = best[mi].expect("grid non-empty");
                    optima.push(Optimum {
                        rule: *rule,
                        metric: metric.clone(),
                        lambda_star,
                        alpha_star: None,
                        mean,
                    });
                }
            }
        }
    }

    cells.sort_by(|a, b| {
        a.rule
            .cmp(&b.rule)
            .then(opt_f64_cmp(a.lambda, b.lambda))
            .then(opt_f64_cmp(a.alpha, b.alpha))
            .then(a.metric.cmp(&b.metric))
    });
    optima.sort_by(|a, b| a.rule.cmp(&b.rule).then(a.metric.cmp(&b.metric)));

    Ok(SweepReport {
        metadata: ReportMeta {
            backend_id: opts.backend_id.clone(),
            prng: PRNG_ID.to_string(),
            random_seed: opts.random_seed,
            decoding: opts.decoding.clone(),
            lambda_grid: opts.lambda_grid.clone(),
            alpha_grid: opts.alpha_grid.clone(),
            metrics: metric_ids,
            rules: opts.rules.clone(),
            instances: joined.len(),
            pool_size: joined[0].0.candidates.len(),
            timestamp: opts.timestamp.clone(),
            label: opts.label.clone(),
        },
        cells,
        optima,
        per_instance: opts.keep_per_instance.then_some(detail),
    })
}

fn select_all(
    joined: &[(&CandidatePool, &Instance)],
    config: &SelectorConfig,
) -> Result<Vec<usize>> {
    joined
        .iter()
        .map(|(pool, _)| Ok(argmax_lowest(&combined_scores(pool, config)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregate tables
// ---------------------------------------------------------------------------

/// The selector variants compared in aggregate tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorVariant {
    Random,
    AnswerRecLambda0,
    AnswerRecLambda1,
    SourceRecLambda1,
    AnswerRecStar,
    SourceRecStar,
    AnsSrcRecStar,
    Oracle,
}

impl SelectorVariant {
    /// Variants competing for "best score" counts. The oracle is excluded
    /// because it maximizes the metric by construction.
    pub const COMPETING: [SelectorVariant; 7] = [
        SelectorVariant::Random,
        SelectorVariant::AnswerRecLambda0,
        SelectorVariant::AnswerRecLambda1,
        SelectorVariant::SourceRecLambda1,
        SelectorVariant::AnswerRecStar,
        SelectorVariant::SourceRecStar,
        SelectorVariant::AnsSrcRecStar,
    ];

    /// Variants compared against the random baseline.
    pub const VERSUS_RANDOM: [SelectorVariant; 6] = [
        SelectorVariant::AnswerRecLambda0,
        SelectorVariant::AnswerRecLambda1,
        SelectorVariant::SourceRecLambda1,
        SelectorVariant::AnswerRecStar,
        SelectorVariant::SourceRecStar,
        SelectorVariant::AnsSrcRecStar,
    ];

    /// Rows of the per-report summary table.
    pub const SUMMARY: [SelectorVariant; 8] = [
        SelectorVariant::Random,
        SelectorVariant::AnswerRecLambda0,
        SelectorVariant::AnswerRecLambda1,
        SelectorVariant::SourceRecLambda1,
        SelectorVariant::AnswerRecStar,
        SelectorVariant::SourceRecStar,
        SelectorVariant::AnsSrcRecStar,
        SelectorVariant::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SelectorVariant::Random => "random",
            SelectorVariant::AnswerRecLambda0 => "answer_rec_lambda0",
            SelectorVariant::AnswerRecLambda1 => "answer_rec_lambda1",
            SelectorVariant::SourceRecLambda1 => "source_rec_lambda1",
            SelectorVariant::AnswerRecStar => "answer_rec_lambda_star",
            SelectorVariant::SourceRecStar => "source_rec_lambda_star",
            SelectorVariant::AnsSrcRecStar => "ans_src_rec_star",
            SelectorVariant::Oracle => "oracle",
        }
    }

    pub fn value(self, report: &SweepReport, metric: &str) -> Option<f64> {
        match self {
            SelectorVariant::Random => report.cell(SelectorRule::Random, None, None, metric),
            SelectorVariant::Oracle => report.cell(SelectorRule::Oracle, None, None, metric),
            SelectorVariant::AnswerRecLambda0 => {
                report.cell(SelectorRule::AnswerRec, Some(0.0), None, metric)
            }
            SelectorVariant::AnswerRecLambda1 => {
                report.cell(SelectorRule::AnswerRec, Some(1.0), None, metric)
            }
            SelectorVariant::SourceRecLambda1 => {
                report.cell(SelectorRule::SourceRec, Some(1.0), None, metric)
            }
            SelectorVariant::AnswerRecStar => report
                .optimum(SelectorRule::AnswerRec, metric)
                .map(|o| o.mean),
            SelectorVariant::SourceRecStar => report
                .optimum(SelectorRule::SourceRec, metric)
                .map(|o| o.mean),
            SelectorVariant::AnsSrcRecStar => report
                .optimum(SelectorRule::AnsSrcRec, metric)
                .map(|o| o.mean),
        }
    }
}

/// A labeled-rows table with one column per metric. `None` cells render
/// as `NA` in CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("selector");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.label);
            for v in &row.values {
                out.push(',');
                match v {
                    Some(x) => out.push_str(&x.to_string()),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn require_reports(reports: &[SweepReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::invalid("reports", "at least one report required"));
    }
    Ok(())
}

/// For each metric, how many reports each competing variant tops. Exact
/// ties award a count to every tied variant.
pub fn top_frequency_table(reports: &[SweepReport], metrics: &[String]) -> Result<Table> {
    require_reports(reports)?;
    let mut rows: Vec<TableRow> = SelectorVariant::COMPETING
        .iter()
        .map(|v| TableRow {
            label: v.label().to_string(),
            values: vec![Some(0.0); metrics.len()],
        })
        .collect();
    for report in reports {
        for (mi, metric) in metrics.iter().enumerate() {
            let values: Vec<Option<f64>> = SelectorVariant::COMPETING
                .iter()
                .map(|v| v.value(report, metric))
                .collect();
            let best = values
                .iter()
                .flatten()
                .fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
            if best == f64::NEG_INFINITY {
                continue;
            }
            for (vi, value) in values.iter().enumerate() {
                if *value == Some(best) {
                    let slot = rows[vi].values[mi].as_mut().expect("initialized");
                    *slot += 1.0;
                }
            }
        }
    }
    Ok(Table {
        columns: metrics.to_vec(),
        rows,
    })
}

/// Mean over reports of the per-report relative change against random,
/// in percent. A random mean of zero (or a variant missing from any
/// report) leaves the cell undefined.
pub fn relative_change_table(reports: &[SweepReport], metrics: &[String]) -> Result<Table> {
    require_reports(reports)?;
    for report in reports {
        for metric in metrics {
            if report
                .cell(SelectorRule::Random, None, None, metric)
                .is_none()
            {
                return Err(Error::invalid(
                    "reports",
                    format!("random baseline cell missing for metric {metric}"),
                ));
            }
        }
    }
    let mut rows = Vec::new();
    for variant in SelectorVariant::VERSUS_RANDOM {
        let mut values = Vec::with_capacity(metrics.len());
        for metric in metrics {
            let mut changes = Vec::with_capacity(reports.len());
            let mut defined = true;
            for report in reports {
                let random = report
                    .cell(SelectorRule::Random, None, None, metric)
                    .expect("checked above");
                match variant.value(report, metric) {
                    Some(v) if random != 0.0 => changes.push(100.0 * (v - random) / random),
                    _ => {
                        defined = false;
                        break;
                    }
                }
            }
            values.push(if defined {
                Some(compensated_mean(&changes))
            } else {
                None
            });
        }
        rows.push(TableRow {
            label: variant.label().to_string(),
            values,
        });
    }
    Ok(Table {
        columns: metrics.to_vec(),
        rows,
    })
}

/// Per-report summary: every variant row (random, endpoints, optima,
/// oracle) against every metric.
pub fn summary_table(report: &SweepReport, metrics: &[String]) -> Table {
    let rows = SelectorVariant::SUMMARY
        .iter()
        .map(|v| TableRow {
            label: v.label().to_string(),
            values: metrics.iter().map(|m| v.value(report, m)).collect(),
        })
        .collect();
    Table {
        columns: metrics.to_vec(),
        rows,
    }
}

/// One plotted point of a tradeoff curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub rule: SelectorRule,
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
}

/// Per-λ curves for the single-parameter rules, covering summarization-
/// quality metrics and (when present) text-quality metrics. Returns the
/// rows plus human-readable warnings for degenerate inputs.
pub fn tradeoff_curves(
    report: &SweepReport,
    quality_metrics: &[String],
    text_metrics: &[String],
) -> (Vec<CurveRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    if text_metrics.is_empty() {
        warnings.push(
            "no text-quality metrics provided; curves cover summarization quality only".to_string(),
        );
    }
    let curve_rules = [
        SelectorRule::AnswerRec,
        SelectorRule::SourceRec,
        SelectorRule::LatentRec,
    ];
    for metric in quality_metrics.iter().chain(text_metrics.iter()) {
        let mut found = false;
        for rule in curve_rules {
            for lambda in &report.metadata.lambda_grid {
                if let Some(mean) = report.cell(rule, Some(*lambda), None, metric) {
                    rows.push(CurveRow {
                        rule,
                        lambda: *lambda,
                        metric: metric.clone(),
                        value: mean,
                    });
                    found = true;
                }
            }
        }
        if !found {
            warnings.push(format!(
                "metric {metric} has no per-lambda cells in the report"
            ));
        }
    }
    (rows, warnings)
}

/// CSV for tradeoff curves; warnings become leading `#` comment lines.
pub fn curves_to_csv(rows: &[CurveRow], warnings: &[String]) -> String {
    let mut out = String::new();
    for w in warnings {
        out.push_str("# warning: ");
        out.push_str(w);
        out.push('\n');
    }
    out.push_str("rule,lambda,metric,value\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.rule, r.lambda, r.metric, r.value
        ));
    }
    out
}
