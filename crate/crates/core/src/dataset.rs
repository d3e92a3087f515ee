//! JSONL ingestion, validation, truncation, statistics, and synthetic
//! fixture generation.
//!
//! Instances file: one JSON object per line,
//! `{"id", "source", "query", "references", "gold_answer"?, "latent"?}`.
//! Pools file: `{"instance_id", "answer"?, "candidates": [{"text",
//! "logp_s0"?, "logp_answer_rec"?, "logp_source_rec"?,
//! "logp_latent_rec"?}]}`. Files are UTF-8, one record per line; unknown
//! fields survive a load/save round-trip. Log-scores are JSON numbers
//! (exact round-trip) or the string `"-inf"`.
//!
//! There are no downloaders here: users convert the original datasets to
//! this schema themselves (see the README for field mapping).

use crate::error::{Error, Result};
use crate::model::{CandidatePool, Instance, Selection};
use crate::rng::{self, SplitMix64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

/// Pull the offending field out of a serde_json message when it names one.
fn schema_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    msg
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            line: idx + 1,
            field: schema_field(&e),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

/// Serialize one record per line. Records are flushed as they are
/// written, so an interrupted run leaves a valid prefix on disk.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::invalid("serialization", e.to_string()))?;
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Load and validate an instances file. Duplicate ids are rejected.
pub fn load(path: &Path) -> Result<Vec<Instance>> {
    let rows: Vec<(usize, Instance)> = read_lines(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, instance) in rows {
        instance.validate().map_err(|field| Error::Schema {
            file: path.display().to_string(),
            line,
            field,
        })?;
        if !seen.insert(instance.id.clone()) {
            return Err(Error::DuplicateId(instance.id));
        }
        out.push(instance);
    }
    Ok(out)
}

pub fn save(path: &Path, instances: &[Instance]) -> Result<()> {
    write_jsonl(path, instances)
}

/// Load and validate a pools file.
pub fn load_pools(path: &Path) -> Result<Vec<CandidatePool>> {
    let rows: Vec<(usize, CandidatePool)> = read_lines(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, pool) in rows {
        pool.validate().map_err(|field| Error::Schema {
            file: path.display().to_string(),
            line,
            field,
        })?;
        out.push(pool);
    }
    Ok(out)
}

pub fn save_pools(path: &Path, pools: &[CandidatePool]) -> Result<()> {
    write_jsonl(path, pools)
}

/// Load a selections file, keeping line numbers for error context.
pub fn load_selections(path: &Path) -> Result<Vec<(usize, Selection)>> {
    read_lines(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationUnit {
    WhitespaceToken,
    Byte,
}

impl FromStr for TruncationUnit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "whitespace_token" | "token" => Ok(TruncationUnit::WhitespaceToken),
            "byte" => Ok(TruncationUnit::Byte),
            other => Err(format!("unknown truncation unit {other:?}")),
        }
    }
}

/// Shorten the source from the right until it fits the budget; query and
/// references are untouched. Idempotent: a source already within budget
/// comes back unchanged.
pub fn truncate(instance: &Instance, max_units: usize, unit: TruncationUnit) -> Instance {
    let source = match unit {
        TruncationUnit::WhitespaceToken => {
            let tokens: Vec<&str> = instance.source.split_whitespace().collect();
            if tokens.len() <= max_units {
                instance.source.clone()
            } else {
                tokens[..max_units].join(" ")
            }
        }
        TruncationUnit::Byte => {
            if instance.source.len() <= max_units {
                instance.source.clone()
            } else {
                let mut end = max_units;
                while !instance.source.is_char_boundary(end) {
                    end -= 1;
                }
                instance.source[..end].to_string()
            }
        }
    };
    Instance {
        source,
        ..instance.clone()
    }
}

/// Corpus-level statistics; lengths are whitespace-separated token
/// counts. `test_size` counts unique (source, query) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub test_size: usize,
    pub avg_source_len: f64,
    pub avg_query_len: f64,
    pub avg_reference_len: f64,
}

fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn stats(instances: &[Instance]) -> Result<DatasetStats> {
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = instances.len() as f64;
    let source_total: u64 = instances
        .iter()
        .map(|i| token_count(&i.source) as u64)
        .sum();
    let query_total: u64 = instances.iter().map(|i| token_count(&i.query) as u64).sum();
    // Each instance contributes the mean of its reference lengths. The
    // per-instance means are summed in sorted order so the result is
    // exactly permutation-invariant.
    let mut ref_means: Vec<f64> = instances
        .iter()
        .map(|i| {
            let total: u64 = i.references.iter().map(|r| token_count(r) as u64).sum();
            total as f64 / i.references.len() as f64
        })
        .collect();
    ref_means.sort_by(f64::total_cmp);
    let ref_total: f64 = ref_means.iter().sum();

    let unique: HashSet<(&str, &str)> = instances
        .iter()
        .map(|i| (i.source.as_str(), i.query.as_str()))
        .collect();

    Ok(DatasetStats {
        test_size: unique.len(),
        avg_source_len: source_total as f64 / n,
        avg_query_len: query_total as f64 / n,
        avg_reference_len: ref_total / n,
    })
}

/// Word stock for synthetic fixtures, spelled entirely in the default toy
/// model's alphabet (`a`..`h` plus space).
const FIXTURE_VOCAB: [&str; 24] = [
    "a", "bad", "cab", "dad", "had", "fad", "bag", "gab", "face", "fade", "bead", "head", "dead",
    "deaf", "beef", "feed", "cafe", "gage", "edge", "hedge", "badge", "added", "egg", "cage",
];

fn sample_words(rng: &mut SplitMix64, count: usize) -> Vec<&'static str> {
    (0..count)
        .map(|_| FIXTURE_VOCAB[rng.next_below(FIXTURE_VOCAB.len() as u64) as usize])
        .collect()
}

/// Deterministic synthetic instances for desk-scale runs.
///
/// Every instance embeds its gold answer verbatim inside the source, and
/// references overlap both the source and the answer, so reconstruction
/// objectives and metric comparisons have signal. Instance `i` is derived
/// from an independent stream keyed by (seed, i): prefixes of a larger
/// fixture equal smaller fixtures with the same seed.
pub fn make_fixture(seed: u64, count: usize) -> Result<Vec<Instance>> {
    if count == 0 {
        return Err(Error::invalid("fixture count", "must be >= 1"));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = SplitMix64::new(rng::mix(seed, i as u64));
        let answer_len = 1 + rng.next_below(2) as usize;
        let answer_words = sample_words(&mut rng, answer_len);
        let source_len = 18 + rng.next_below(12) as usize;
        let mut source_words = sample_words(&mut rng, source_len);
        let insert_at = rng.next_below(source_words.len() as u64 + 1) as usize;
        for (offset, w) in answer_words.iter().enumerate() {
            source_words.insert(insert_at + offset, w);
        }
        let query_len = 2 + rng.next_below(3) as usize;
        let query_words = sample_words(&mut rng, query_len);

        let reference_count = 1 + rng.next_below(3) as usize;
        let references = (0..reference_count)
            .map(|_| {
                let span = 5 + rng.next_below(6) as usize;
                let start = rng.next_below((source_words.len() - span) as u64 + 1) as usize;
                let mut words: Vec<&str> = source_words[start..start + span].to_vec();
                words.extend(answer_words.iter());
                words.join(" ")
            })
            .collect();

        let latent = if rng.next_below(2) == 0 {
            let latent_len = 1 + rng.next_below(2) as usize;
            Some(sample_words(&mut rng, latent_len).join(" "))
        } else {
            None
        };

        out.push(Instance {
            id: format!("fx-{:04}", i + 1),
            source: source_words.join(" "),
            query: query_words.join(" "),
            references,
            gold_answer: Some(answer_words.join(" ")),
            latent,
            extra: serde_json::Map::new(),
        });
    }
    Ok(out)
}
