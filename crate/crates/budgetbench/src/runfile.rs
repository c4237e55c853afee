//! Append-only line-delimited JSON persistence for evaluation runs.
//!
//! A run file starts with one header line describing the run, followed by
//! one line per completed (query, target_length) cell. Appending is the
//! only write operation, which makes interrupted runs resumable: on
//! restart the existing keys are scanned and skipped.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Category;
use crate::error::{Error, Result};
use crate::metrics::{BinaryScore, ScoreSource};

/// Per-record anomaly markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// Judge replied outside the verdict grammar; record carries no score.
    JudgeError,
    /// Request failed after all retries.
    TransportError,
    /// Generation hit the max_tokens cap (finish_reason = length).
    Truncated,
}

/// One model response with its scores and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub query_id: String,
    pub config_id: String,
    pub target_length: u32,
    pub prompt_sent: String,
    pub response_text: String,
    pub completion_tokens: u32,
    pub latency: f64,
    pub scores: Vec<BinaryScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RunFlag>,
    /// Extra metadata inherited from the query record.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub extra: std::collections::BTreeMap<String, serde_json::Value>,
}

impl RunRecord {
    /// A record that failed transport or judging and must be excluded
    /// from score and throughput aggregation.
    pub fn is_errored(&self) -> bool {
        self.flags
            .iter()
            .any(|f| matches!(f, RunFlag::TransportError | RunFlag::JudgeError))
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            query_id: self.query_id.clone(),
            config_id: self.config_id.clone(),
            target_length: self.target_length,
        }
    }

    /// Minimal record for tests and fixtures.
    pub fn synthetic(query_id: &str, config_id: &str, target_length: u32, tokens: u32, latency: f64) -> Self {
        RunRecord {
            run_id: "test".into(),
            query_id: query_id.into(),
            config_id: config_id.into(),
            target_length,
            prompt_sent: String::new(),
            response_text: String::new(),
            completion_tokens: tokens,
            latency,
            scores: vec![],
            flags: vec![],
            extra: Default::default(),
        }
    }
}

/// Uniqueness key of a record within a run file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecordKey {
    pub query_id: String,
    pub config_id: String,
    pub target_length: u32,
}

/// Run-level metadata, written as the first line of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub benchmark_name: String,
    pub category: Category,
    pub model_name: String,
    pub precision: String,
    pub evaluator: ScoreSource,
    pub target_lengths: Vec<u32>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RunLine {
    Header(RunHeader),
    Record(RunRecord),
}

/// Creates a run file and writes its header, or validates the header of an
/// existing file when resuming.
pub fn open_run_file(path: &Path, header: &RunHeader) -> Result<()> {
    if path.exists() {
        let (existing, _) = read_run_file(path)?;
        if &existing != header {
            return Err(Error::Config(format!(
                "run file {} belongs to a different run configuration",
                path.display()
            )));
        }
        return Ok(());
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(&RunLine::Header(header.clone()))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Appends one record (single line, flushed).
pub fn append_record(path: &Path, record: &RunRecord) -> Result<()> {
    let mut f = OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(&RunLine::Record(record.clone()))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a whole run file. Records keep file order; a trailing partially
/// written line (crash artifact) is an error the caller sees immediately.
pub fn read_run_file(path: &Path) -> Result<(RunHeader, Vec<RunRecord>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(f);
    let mut header: Option<RunHeader> = None;
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RunLine = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            source: e,
        })?;
        match parsed {
            RunLine::Header(h) => {
                if header.is_some() {
                    return Err(Error::InvalidRecord {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        msg: "duplicate run header".into(),
                    });
                }
                header = Some(h);
            }
            RunLine::Record(r) => records.push(r),
        }
    }
    let header = header.ok_or_else(|| Error::Config(format!(
        "run file {} has no header line",
        path.display()
    )))?;
    Ok((header, records))
}

/// Keys already persisted in a run file (for resumption).
pub fn existing_keys(path: &Path) -> Result<HashSet<RecordKey>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let (_, records) = read_run_file(path)?;
    Ok(records.iter().map(RunRecord::key).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{BinaryScore, ScoreSource};

    fn header() -> RunHeader {
        RunHeader {
            run_id: "r1".into(),
            benchmark_name: "toy".into(),
            category: Category::Safety,
            model_name: "mock".into(),
            precision: "bf16".into(),
            evaluator: ScoreSource::RefusalMatch,
            target_lengths: vec![512, 1024],
            seed: 0,
        }
    }

    fn record(q: &str, len: u32) -> RunRecord {
        RunRecord {
            run_id: "r1".into(),
            query_id: q.into(),
            config_id: "mock:bf16".into(),
            target_length: len,
            prompt_sent: format!("{q} Think for {len} tokens."),
            response_text: "I cannot help with that.".into(),
            completion_tokens: 7,
            latency: 0.07,
            scores: vec![BinaryScore::new(1, ScoreSource::RefusalMatch).unwrap()],
            flags: vec![],
            extra: Default::default(),
        }
    }

    #[test]
    fn round_trip_preserves_all_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        open_run_file(&path, &header()).unwrap();
        let r1 = record("q1", 512);
        let mut r2 = record("q2", 1024);
        r2.flags = vec![RunFlag::Truncated];
        r2.extra.insert("difficulty".into(), serde_json::json!("hard"));
        append_record(&path, &r1).unwrap();
        append_record(&path, &r2).unwrap();

        let (h, recs) = read_run_file(&path).unwrap();
        assert_eq!(h, header());
        assert_eq!(recs, vec![r1, r2]);
    }

    #[test]
    fn resume_skips_existing_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        open_run_file(&path, &header()).unwrap();
        append_record(&path, &record("q1", 512)).unwrap();

        // reopening with the same header is fine and keys are visible
        open_run_file(&path, &header()).unwrap();
        let keys = existing_keys(&path).unwrap();
        assert!(keys.contains(&record("q1", 512).key()));
        assert!(!keys.contains(&record("q1", 1024).key()));
    }

    #[test]
    fn reopening_with_different_header_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        open_run_file(&path, &header()).unwrap();
        let mut other = header();
        other.model_name = "different".into();
        assert!(open_run_file(&path, &other).is_err());
    }

    #[test]
    fn missing_header_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_run_file(&path).is_err());
    }
}
