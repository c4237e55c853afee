//! Reasoning-time budget arithmetic and trade-off analysis.
//!
//! Throughput (tokens/s, batch size 1) converts a reasoning token count
//! into seconds of compute. Configurations become `(reasoning_time, score)`
//! points; the Pareto frontier and the best-score-under-budget selection
//! formalize the iso-budget comparison between precision and length.
//!
//! ```
//! use budgetbench::budget::{reasoning_time, ThroughputRecord};
//!
//! let t = ThroughputRecord::new("SL-1.5B", "AIME", 42.11).unwrap();
//! let secs = reasoning_time(512, &t).unwrap();
//! assert!((secs - 12.159).abs() < 1e-3);
//! ```
//!
//! The frontier drops points that are both slower and no better:
//!
//! ```
//! use budgetbench::budget::{pareto_frontier, ScoreKind, TradeoffPoint};
//!
//! let pt = |id: &str, t, s| TradeoffPoint::new(id, 512, t, s, ScoreKind::PassAt1).unwrap();
//! let points = vec![
//!     pt("a", 5.0, 0.40),
//!     pt("b", 8.0, 0.70),
//!     pt("c", 9.0, 0.60), // slower and worse than b: dominated
//! ];
//! let front = pareto_frontier(&points);
//! let ids: Vec<&str> = front.iter().map(|p| p.config_id.as_str()).collect();
//! assert_eq!(ids, ["a", "b"]);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runfile::RunRecord;

/// Measured serving speed of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub tokens_per_second: f64,
}

impl ThroughputRecord {
    pub fn new(model_id: &str, dataset_id: &str, tokens_per_second: f64) -> Result<Self> {
        if !(tokens_per_second > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tokens_per_second must be positive, got {tokens_per_second}"
            )));
        }
        Ok(ThroughputRecord {
            model_id: model_id.to_string(),
            dataset_id: dataset_id.to_string(),
            tokens_per_second,
        })
    }
}

/// Which aggregate a trade-off point's score is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    PassAt1,
    SafeAt1,
}

/// One configuration on the compute/quality plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    /// Canonical `{model}:{precision}:{target_length}`.
    pub config_id: String,
    pub target_length: u32,
    pub reasoning_time: f64,
    pub score: f64,
    pub score_kind: ScoreKind,
}

impl TradeoffPoint {
    pub fn new(
        config_id: &str,
        target_length: u32,
        reasoning_time: f64,
        score: f64,
        score_kind: ScoreKind,
    ) -> Result<Self> {
        if !(reasoning_time > 0.0) {
            return Err(Error::InvalidArgument("reasoning_time must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "score must lie in [0, 1], got {score}"
            )));
        }
        Ok(TradeoffPoint {
            config_id: config_id.to_string(),
            target_length,
            reasoning_time,
            score,
            score_kind,
        })
    }
}

/// Token-weighted throughput over one (model, dataset) group of run
/// records: total completion tokens over total latency.
pub fn measure_throughput(
    records: &[RunRecord],
    model_id: &str,
    dataset_id: &str,
) -> Result<ThroughputRecord> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to measure".into()));
    }
    let ok = records.iter().filter(|r| !r.is_errored());
    let mut tokens = 0u64;
    let mut secs = 0.0f64;
    for r in ok {
        tokens += u64::from(r.completion_tokens);
        secs += r.latency;
    }
    if secs <= 0.0 {
        return Err(Error::InvalidArgument("zero total latency".into()));
    }
    ThroughputRecord::new(model_id, dataset_id, tokens as f64 / secs)
}

/// Seconds to generate `n_tokens` at the measured throughput.
pub fn reasoning_time(n_tokens: u32, t: &ThroughputRecord) -> Result<f64> {
    if n_tokens == 0 {
        return Err(Error::InvalidArgument("n_tokens must be >= 1".into()));
    }
    Ok(f64::from(n_tokens) / t.tokens_per_second)
}

/// Percent reduction of `a` relative to `b`: `100·(b − a)/b`.
pub fn relative_saving(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument("baseline must be > 0".into()));
    }
    Ok(100.0 * (b - a) / b)
}

fn dominates(a: &TradeoffPoint, b: &TradeoffPoint) -> bool {
    a.reasoning_time <= b.reasoning_time
        && a.score >= b.score
        && (a.reasoning_time < b.reasoning_time || a.score > b.score)
}

/// The non-dominated subset, sorted by reasoning time ascending. A point
/// is dominated when some other point is at least as fast and at least as
/// good, strictly better in one coordinate. Exact ties are all kept.
pub fn pareto_frontier(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut frontier: Vec<TradeoffPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .cloned()
        .collect();
    frontier.sort_by(|a, b| {
        a.reasoning_time
            .total_cmp(&b.reasoning_time)
            .then_with(|| a.config_id.cmp(&b.config_id))
    });
    frontier
}

/// Highest-scoring point whose reasoning time fits within `budget`
/// seconds. Ties go to the faster point, then the lexicographically
/// smaller config id. `None` when nothing fits.
pub fn best_under_budget(points: &[TradeoffPoint], budget: f64) -> Result<Option<TradeoffPoint>> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument("budget must be > 0".into()));
    }
    Ok(points
        .iter()
        .filter(|p| p.reasoning_time <= budget)
        .max_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then_with(|| b.reasoning_time.total_cmp(&a.reasoning_time))
                .then_with(|| b.config_id.cmp(&a.config_id))
        })
        .cloned())
}

/// Loads a `throughput.json` fixture: a JSON array of
/// `{model_id, dataset_id, tokens_per_second}`.
pub fn load_throughput_fixture(json: &str) -> Result<Vec<ThroughputRecord>> {
    let recs: Vec<ThroughputRecord> = serde_json::from_str(json)?;
    for r in &recs {
        if !(r.tokens_per_second > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "non-positive throughput for {}/{}",
                r.model_id, r.dataset_id
            )));
        }
    }
    Ok(recs)
}

/// Finds the fixture entry for a (model, dataset) pair.
pub fn lookup_throughput<'a>(
    fixture: &'a [ThroughputRecord],
    model_id: &str,
    dataset_id: &str,
) -> Result<&'a ThroughputRecord> {
    fixture
        .iter()
        .find(|t| t.model_id == model_id && t.dataset_id == dataset_id)
        .ok_or_else(|| Error::MissingThroughput {
            model: model_id.to_string(),
            dataset: dataset_id.to_string(),
        })
}

/// Bundled fixture mirroring the measured batch-1 throughputs of the four
/// evaluated model variants on AIME and StrongReject.
pub const THROUGHPUT_FIXTURE: &str = include_str!("../data/throughput.json");

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(id: &str, time: f64, score: f64) -> TradeoffPoint {
        TradeoffPoint::new(id, 512, time, score, ScoreKind::PassAt1).unwrap()
    }

    /// O(n^2) all-pairs domination oracle.
    pub(crate) fn frontier_oracle(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
        let mut out: Vec<TradeoffPoint> = Vec::new();
        for p in points {
            let dominated = points.iter().any(|q| {
                q.reasoning_time <= p.reasoning_time
                    && q.score >= p.score
                    && (q.reasoning_time < p.reasoning_time || q.score > p.score)
            });
            if !dominated {
                out.push(p.clone());
            }
        }
        out.sort_by(|a, b| {
            a.reasoning_time
                .total_cmp(&b.reasoning_time)
                .then_with(|| a.config_id.cmp(&b.config_id))
        });
        out
    }

    #[test]
    fn fixture_has_table_values() {
        let fixture = load_throughput_fixture(THROUGHPUT_FIXTURE).unwrap();
        assert_eq!(fixture.len(), 8);
        assert_eq!(
            lookup_throughput(&fixture, "SL-1.5B", "AIME").unwrap().tokens_per_second,
            42.11
        );
        assert_eq!(
            lookup_throughput(&fixture, "Q8-SL-1.5B", "StrongReject")
                .unwrap()
                .tokens_per_second,
            107.33
        );
        assert!(lookup_throughput(&fixture, "nope", "AIME").is_err());
    }

    #[test]
    fn reasoning_time_examples() {
        let bf16 = ThroughputRecord::new("SL-1.5B", "AIME", 42.11).unwrap();
        let q8 = ThroughputRecord::new("Q8-SL-1.5B", "AIME", 69.19).unwrap();
        assert!((reasoning_time(512, &bf16).unwrap() - 12.159).abs() < 1e-3);
        assert!((reasoning_time(512, &q8).unwrap() - 7.400).abs() < 1e-3);
        let fast = ThroughputRecord::new("m", "d", 512.0).unwrap();
        assert_eq!(reasoning_time(1024, &fast).unwrap(), 2.0);
    }

    #[test]
    fn reasoning_time_is_linear() {
        let t = ThroughputRecord::new("m", "d", 37.5).unwrap();
        for n in [1u32, 10, 511, 1800] {
            assert_eq!(
                reasoning_time(2 * n, &t).unwrap(),
                2.0 * reasoning_time(n, &t).unwrap()
            );
        }
    }

    #[test]
    fn relative_saving_examples() {
        assert!((relative_saving(7.400, 12.159).unwrap() - 39.14).abs() < 0.01);
        assert_eq!(relative_saving(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(relative_saving(0.5, 1.0).unwrap(), 50.0);
    }

    #[test]
    fn frontier_drops_dominated_point() {
        let pts = vec![pt("a", 1.0, 0.2), pt("b", 2.0, 0.5), pt("c", 3.0, 0.4)];
        let f = pareto_frontier(&pts);
        let ids: Vec<_> = f.iter().map(|p| p.config_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn frontier_degenerate_cases() {
        let single = vec![pt("only", 2.0, 0.3)];
        assert_eq!(pareto_frontier(&single), single);

        let equal = vec![pt("a", 1.0, 0.5), pt("b", 1.0, 0.5), pt("c", 1.0, 0.5)];
        assert_eq!(pareto_frontier(&equal).len(), 3);
    }

    #[test]
    fn frontier_matches_oracle_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..100 {
            let n = rng.random_range(1..=60);
            let pts: Vec<TradeoffPoint> = (0..n)
                .map(|i| {
                    pt(
                        &format!("cfg{i}"),
                        rng.random_range(0.1..50.0),
                        // coarse grid encourages exact ties
                        f64::from(rng.random_range(0..=10u32)) / 10.0,
                    )
                })
                .collect();
            assert_eq!(pareto_frontier(&pts), frontier_oracle(&pts));
        }
    }

    #[test]
    fn frontier_scores_strictly_increase_after_time_dedup() {
        let mut rng = ChaCha8Rng::seed_from_u64(5678);
        let pts: Vec<TradeoffPoint> = (0..50)
            .map(|i| pt(&format!("c{i}"), rng.random_range(0.1..50.0), rng.random_range(0.0..1.0)))
            .collect();
        let f = pareto_frontier(&pts);
        for w in f.windows(2) {
            if w[0].reasoning_time < w[1].reasoning_time {
                assert!(w[0].score < w[1].score);
            }
        }
    }

    #[test]
    fn best_under_budget_rules() {
        let pts = vec![pt("bf16", 24.3, 0.6), pt("q8", 14.8, 0.55)];
        // budget 20: only q8 fits
        let best = best_under_budget(&pts, 20.0).unwrap().unwrap();
        assert_eq!(best.config_id, "q8");
        // tiny budget: nothing fits
        assert!(best_under_budget(&pts, 1.0).unwrap().is_none());
        // identical except id: lexicographically smaller wins
        let twins = vec![pt("bbb", 5.0, 0.5), pt("aaa", 5.0, 0.5)];
        assert_eq!(best_under_budget(&twins, 10.0).unwrap().unwrap().config_id, "aaa");
        // tie on score: faster point wins
        let tied = vec![pt("slow", 9.0, 0.5), pt("fast", 3.0, 0.5)];
        assert_eq!(best_under_budget(&tied, 10.0).unwrap().unwrap().config_id, "fast");
    }

    #[test]
    fn best_under_budget_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<TradeoffPoint> = (0..40)
            .map(|i| pt(&format!("c{i}"), rng.random_range(0.1..30.0), rng.random_range(0.0..1.0)))
            .collect();
        let mut last = -1.0f64;
        for b in 1..=35 {
            if let Some(best) = best_under_budget(&pts, f64::from(b)).unwrap() {
                assert!(best.score >= last);
                last = best.score;
            }
        }
    }

    #[test]
    fn measure_throughput_examples() {
        use crate::runfile::RunRecord;
        let rec = |tokens: u32, secs: f64| RunRecord::synthetic("q", "m:bf16", 512, tokens, secs);
        let ten: Vec<RunRecord> = (0..10).map(|_| rec(100, 2.0)).collect();
        let t = measure_throughput(&ten, "m", "d").unwrap();
        assert_eq!(t.tokens_per_second, 50.0);

        let two = vec![rec(100, 1.0), rec(300, 3.0)];
        assert_eq!(measure_throughput(&two, "m", "d").unwrap().tokens_per_second, 100.0);

        // order invariance
        let swapped = vec![rec(300, 3.0), rec(100, 1.0)];
        assert_eq!(
            measure_throughput(&two, "m", "d").unwrap(),
            measure_throughput(&swapped, "m", "d").unwrap()
        );

        assert!(measure_throughput(&[], "m", "d").is_err());
    }
}
