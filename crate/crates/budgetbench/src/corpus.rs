//! Benchmark corpus loading and validation.
//!
//! Benchmarks are line-delimited JSON files, one query per line:
//!
//! ```text
//! {"id": "q1", "prompt": "What is 2+2?", "gold_answer": "4"}
//! ```
//!
//! Skill benchmarks require a `gold_answer` per record; safety benchmarks
//! must not carry one. Unknown fields are kept in an `extra` map and travel
//! with the record through the pipeline.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a benchmark measures skill (answer correctness) or safety
/// (refusal of harmful queries).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Skill,
    Safety,
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Category::Skill => write!(f, "skill"),
            Category::Safety => write!(f, "safety"),
        }
    }
}

impl std::str::FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skill" => Ok(Category::Skill),
            "safety" => Ok(Category::Safety),
            other => Err(Error::InvalidArgument(format!(
                "unknown category {other:?} (expected skill|safety)"
            ))),
        }
    }
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    pub category: Category,
    /// Unknown input fields, preserved verbatim.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// An ordered, validated collection of queries sharing one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub name: String,
    pub category: Category,
    pub records: Vec<QueryRecord>,
}

#[derive(Deserialize)]
struct RawLine {
    id: String,
    prompt: String,
    #[serde(default)]
    gold_answer: Option<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Loads a benchmark from a line-delimited JSON file.
///
/// Record order equals file order. Errors carry the 1-based line number.
pub fn load_benchmark(path: &Path, name: &str, category: Category) -> Result<Benchmark> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        let raw: RawLine = serde_json::from_str(trimmed).map_err(|e| Error::MalformedLine {
            path: path.to_path_buf(),
            line: line_no,
            source: e,
        })?;

        if raw.prompt.trim().is_empty() {
            return Err(Error::InvalidRecord {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("record {:?} has an empty prompt", raw.id),
            });
        }
        if seen.insert(raw.id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: raw.id,
            });
        }
        match category {
            Category::Skill if raw.gold_answer.is_none() => {
                return Err(Error::InvalidRecord {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("skill record {:?} is missing gold_answer", raw.id),
                });
            }
            Category::Safety if raw.gold_answer.is_some() => {
                return Err(Error::InvalidRecord {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("safety record {:?} must not carry gold_answer", raw.id),
                });
            }
            _ => {}
        }

        records.push(QueryRecord {
            id: raw.id,
            prompt: raw.prompt,
            gold_answer: raw.gold_answer,
            category,
            extra: raw.extra,
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyBenchmark);
    }

    Ok(Benchmark {
        name: name.to_string(),
        category,
        records,
    })
}

/// Writes a benchmark back to line-delimited JSON (inverse of [`load_benchmark`]).
pub fn save_benchmark(b: &Benchmark, path: &Path) -> Result<()> {
    let mut out = File::create(path).map_err(|e| Error::io(path, e))?;
    for rec in &b.records {
        let mut obj = serde_json::Map::new();
        obj.insert("id".into(), rec.id.clone().into());
        obj.insert("prompt".into(), rec.prompt.clone().into());
        if let Some(g) = &rec.gold_answer {
            obj.insert("gold_answer".into(), g.clone().into());
        }
        for (k, v) in &rec.extra {
            obj.insert(k.clone(), v.clone());
        }
        let line = serde_json::to_string(&serde_json::Value::Object(obj))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// True iff the benchmark holds exactly `expected` records.
pub fn validate_counts(b: &Benchmark, expected: usize) -> bool {
    b.records.len() == expected
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_skill_file_in_order() {
        let f = write_lines(&[
            r#"{"id":"q1","prompt":"a?","gold_answer":"1"}"#,
            r#"{"id":"q2","prompt":"b?","gold_answer":"2"}"#,
            r#"{"id":"q3","prompt":"c?","gold_answer":"3"}"#,
        ]);
        let b = load_benchmark(f.path(), "toy", Category::Skill).unwrap();
        assert_eq!(b.records.len(), 3);
        let ids: Vec<_> = b.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2", "q3"]);
        assert!(validate_counts(&b, 3));
        assert!(!validate_counts(&b, 30));
    }

    #[test]
    fn duplicate_id_reports_line() {
        let f = write_lines(&[
            r#"{"id":"q1","prompt":"a?","gold_answer":"1"}"#,
            r#"{"id":"q2","prompt":"b?","gold_answer":"2"}"#,
            r#"{"id":"q3","prompt":"c?","gold_answer":"3"}"#,
            r#"{"id":"q1","prompt":"d?","gold_answer":"4"}"#,
        ]);
        let err = load_benchmark(f.path(), "toy", Category::Skill).unwrap_err();
        match err {
            Error::DuplicateId { line, id, .. } => {
                assert_eq!(line, 4);
                assert_eq!(id, "q1");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn skill_requires_gold_answer() {
        let f = write_lines(&[r#"{"id":"q1","prompt":"a?"}"#]);
        let err = load_benchmark(f.path(), "toy", Category::Skill).unwrap_err();
        assert!(err.to_string().contains("gold_answer"));
    }

    #[test]
    fn safety_rejects_gold_answer() {
        let f = write_lines(&[r#"{"id":"q1","prompt":"a?","gold_answer":"x"}"#]);
        assert!(load_benchmark(f.path(), "toy", Category::Safety).is_err());
    }

    #[test]
    fn empty_prompt_is_hard_error() {
        let f = write_lines(&[r#"{"id":"q1","prompt":"  ","gold_answer":"1"}"#]);
        assert!(load_benchmark(f.path(), "toy", Category::Skill).is_err());
    }

    #[test]
    fn malformed_line_reports_number() {
        let f = write_lines(&[
            r#"{"id":"q1","prompt":"a?","gold_answer":"1"}"#,
            r#"{not json"#,
        ]);
        let err = load_benchmark(f.path(), "toy", Category::Skill).unwrap_err();
        assert!(err.to_string().contains(":2:"), "got: {err}");
    }

    #[test]
    fn sixty_line_safety_file() {
        let lines: Vec<String> = (0..60)
            .map(|i| format!(r#"{{"id":"sr{i}","prompt":"harmful query {i}"}}"#))
            .collect();
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let b = load_benchmark(f.path(), "strongreject", Category::Safety).unwrap();
        assert!(validate_counts(&b, 60));
    }

    #[test]
    fn crlf_tolerated_and_extra_preserved() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(
            f,
            "{}\r\n{}\r\n",
            r#"{"id":"q1","prompt":"a?","gold_answer":"1","difficulty":"hard"}"#,
            r#"{"id":"q2","prompt":"b?","gold_answer":"2"}"#
        )
        .unwrap();
        let b = load_benchmark(f.path(), "toy", Category::Skill).unwrap();
        assert_eq!(
            b.records[0].extra.get("difficulty"),
            Some(&serde_json::Value::String("hard".into()))
        );
    }

    #[test]
    fn round_trip_is_identity() {
        let f = write_lines(&[
            r#"{"id":"q1","prompt":"a?","gold_answer":"1","tag":7}"#,
            r#"{"id":"q2","prompt":"b?","gold_answer":"2"}"#,
        ]);
        let b = load_benchmark(f.path(), "toy", Category::Skill).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_benchmark(&b, out.path()).unwrap();
        let b2 = load_benchmark(out.path(), "toy", Category::Skill).unwrap();
        assert_eq!(b, b2);
    }
}
