//! Command implementations behind the `budgetbench` binary:
//! `run`, `quantize`, `score`, `budget`, `report`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::budget::{
    best_under_budget, load_throughput_fixture, lookup_throughput, pareto_frontier,
    reasoning_time, ScoreKind, ThroughputRecord, TradeoffPoint, THROUGHPUT_FIXTURE,
};
use crate::corpus::{load_benchmark, Category};
use crate::error::{Error, Result};
use crate::lengthctl::{augment_prompt, LengthDirective};
use crate::metrics::{
    match_answer, pass_at_1, refusal_match, safe_at_1, RefusalLexicon, ScoreSource,
};
use crate::modelio::{EndpointConfig, FinishReason, ModelClient, DEFAULT_JUDGE_TEMPLATE};
use crate::quant::{
    build_hessian, dequantize, fit_grid, gptq_quantize, proxy_loss, rtn_quantize, HessianProxy,
    QuantizedLayer, WeightMatrix,
};
use crate::quantfile::{write_quantized, QuantSidecar};
use crate::runfile::{
    append_record, existing_keys, open_run_file, read_run_file, RecordKey, RunFlag, RunHeader,
    RunRecord,
};
use crate::tensorio::load_safetensors;

// ---------------------------------------------------------------------------
// run configuration file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub benchmark: BenchmarkSection,
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub judge: Option<JudgeSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub lcpo: LcpoSection,
    #[serde(default)]
    pub lengthctl: LengthctlSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BenchmarkSection {
    pub path: PathBuf,
    pub name: String,
    pub category: Category,
}

#[derive(Debug, Clone, Deserialize)]
pub struct JudgeSection {
    #[serde(flatten)]
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub template: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub precision: String,
    pub target_lengths: Vec<u32>,
    pub evaluator: Option<ScoreSource>,
    pub seed: u64,
    /// Replace measured wall time with a synthetic tokens/100 latency so
    /// repeated runs produce byte-identical files. For mocks and tests.
    pub deterministic_timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            precision: "bf16".into(),
            target_lengths: vec![512, 1024, 2048, 3600],
            evaluator: None,
            seed: 0,
            deterministic_timing: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct LcpoSection {
    pub alpha: f64,
}

impl Default for LcpoSection {
    fn default() -> Self {
        LcpoSection { alpha: 0.0003 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct LengthctlSection {
    pub max_target: u32,
}

impl Default for LengthctlSection {
    fn default() -> Self {
        LengthctlSection { max_target: 4000 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    pub refusal_lexicon: Option<PathBuf>,
}

/// Reads a TOML or JSON config, dispatching on the file extension.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: RunConfig = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    };
    validate_config(&cfg)?;
    Ok(cfg)
}

fn validate_config(cfg: &RunConfig) -> Result<()> {
    cfg.endpoint.validate()?;
    let lens = &cfg.run.target_lengths;
    if lens.is_empty() {
        return Err(Error::Config("target_lengths must be non-empty".into()));
    }
    if lens.iter().any(|&l| l < 1) {
        return Err(Error::Config("target_lengths must all be >= 1".into()));
    }
    if lens.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("target_lengths must be strictly increasing".into()));
    }
    let evaluator = effective_evaluator(cfg);
    match (cfg.benchmark.category, evaluator) {
        (Category::Skill, ScoreSource::AnswerMatch) => {}
        (Category::Safety, ScoreSource::RefusalMatch | ScoreSource::ExternalJudge) => {}
        (cat, ev) => {
            return Err(Error::Config(format!(
                "evaluator {ev:?} does not apply to a {cat} benchmark"
            )));
        }
    }
    if evaluator == ScoreSource::ExternalJudge && cfg.judge.is_none() {
        return Err(Error::Config("external_judge requires a [judge] section".into()));
    }
    Ok(())
}

fn effective_evaluator(cfg: &RunConfig) -> ScoreSource {
    cfg.run.evaluator.unwrap_or(match cfg.benchmark.category {
        Category::Skill => ScoreSource::AnswerMatch,
        Category::Safety => ScoreSource::RefusalMatch,
    })
}

fn load_lexicon(section: &MetricsSection) -> Result<RefusalLexicon> {
    match &section.refusal_lexicon {
        None => Ok(RefusalLexicon::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            RefusalLexicon::from_json(&text)
        }
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Evaluates every (query, target_length) cell against the endpoint and
/// appends one record per cell to `out`. Already-persisted cells are
/// skipped, so interrupted runs resume where they stopped.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    validate_config(cfg)?;
    let benchmark = load_benchmark(&cfg.benchmark.path, &cfg.benchmark.name, cfg.benchmark.category)?;
    let evaluator = effective_evaluator(cfg);
    let lexicon = load_lexicon(&cfg.metrics)?;

    let client = ModelClient::new(cfg.endpoint.clone())?;
    client.probe()?;
    let judge = match (&cfg.judge, evaluator) {
        (Some(j), ScoreSource::ExternalJudge) => Some((
            ModelClient::new(j.endpoint.clone())?,
            j.template.clone().unwrap_or_else(|| DEFAULT_JUDGE_TEMPLATE.to_string()),
        )),
        _ => None,
    };

    let run_id = format!(
        "{}-{}-{}-s{}",
        cfg.benchmark.name, cfg.endpoint.model_name, cfg.run.precision, cfg.run.seed
    );
    let config_id = format!("{}:{}", cfg.endpoint.model_name, cfg.run.precision);
    let header = RunHeader {
        run_id: run_id.clone(),
        benchmark_name: cfg.benchmark.name.clone(),
        category: cfg.benchmark.category,
        model_name: cfg.endpoint.model_name.clone(),
        precision: cfg.run.precision.clone(),
        evaluator,
        target_lengths: cfg.run.target_lengths.clone(),
        seed: cfg.run.seed,
    };
    open_run_file(out, &header)?;
    let done: HashSet<RecordKey> = existing_keys(out)?;

    let jobs: Vec<(&crate::corpus::QueryRecord, u32)> = benchmark
        .records
        .iter()
        .flat_map(|q| cfg.run.target_lengths.iter().map(move |&l| (q, l)))
        .filter(|(q, l)| {
            !done.contains(&RecordKey {
                query_id: q.id.clone(),
                config_id: config_id.clone(),
                target_length: *l,
            })
        })
        .collect();

    let records = crate::modelio::run_parallel(&jobs, cfg.endpoint.max_parallel, |(q, len)| {
        execute_job(
            q,
            *len,
            &run_id,
            &config_id,
            &client,
            judge.as_ref(),
            evaluator,
            &lexicon,
            cfg.run.deterministic_timing,
        )
    });

    // single writer, deterministic (query, length) order
    for rec in records {
        append_record(out, &rec)?;
    }
    Ok(out.to_path_buf())
}

#[allow(clippy::too_many_arguments)]
fn execute_job(
    q: &crate::corpus::QueryRecord,
    len: u32,
    run_id: &str,
    config_id: &str,
    client: &ModelClient,
    judge: Option<&(ModelClient, String)>,
    evaluator: ScoreSource,
    lexicon: &RefusalLexicon,
    deterministic_timing: bool,
) -> RunRecord {
    let prompt = augment_prompt(&q.prompt, LengthDirective::new(len).expect("len >= 1"))
        .expect("benchmark prompts are non-empty");
    let mut rec = RunRecord {
        run_id: run_id.to_string(),
        query_id: q.id.clone(),
        config_id: config_id.to_string(),
        target_length: len,
        prompt_sent: prompt.clone(),
        response_text: String::new(),
        completion_tokens: 0,
        latency: 0.0,
        scores: vec![],
        flags: vec![],
        extra: q.extra.clone(),
    };

    // evaluation runs are always greedy, regardless of config
    match client.complete(&prompt, len, 0.0) {
        Err(_) => rec.flags.push(RunFlag::TransportError),
        Ok(res) => {
            rec.response_text = res.text.clone();
            rec.completion_tokens = res.completion_tokens;
            rec.latency = if deterministic_timing {
                f64::from(res.completion_tokens) / 100.0
            } else {
                res.latency
            };
            if res.finish_reason == FinishReason::Length {
                rec.flags.push(RunFlag::Truncated);
            }
            match evaluator {
                ScoreSource::AnswerMatch => {
                    let gold = q.gold_answer.as_deref().unwrap_or_default();
                    if let Ok(score) = match_answer(&res.text, gold) {
                        rec.scores.push(score);
                    }
                }
                ScoreSource::RefusalMatch => {
                    rec.scores.push(refusal_match(&res.text, lexicon));
                }
                ScoreSource::ExternalJudge => {
                    let (judge_client, template) = judge.expect("judge configured");
                    match judge_client.judge_safety(template, &q.prompt, &res.text) {
                        Ok(score) => rec.scores.push(score),
                        Err(Error::JudgeError(_)) => rec.flags.push(RunFlag::JudgeError),
                        Err(_) => rec.flags.push(RunFlag::TransportError),
                    }
                }
            }
        }
    }
    rec
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub judge_error: usize,
    pub transport_error: usize,
    pub truncated: usize,
}

impl FlagCounts {
    fn add(&mut self, flags: &[RunFlag]) {
        for f in flags {
            match f {
                RunFlag::JudgeError => self.judge_error += 1,
                RunFlag::TransportError => self.transport_error += 1,
                RunFlag::Truncated => self.truncated += 1,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub target_length: u32,
    pub k: usize,
    pub score: f64,
    pub flags: FlagCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub metric: String,
    pub benchmark: String,
    pub config_id: String,
    pub per_length: Vec<LengthSummary>,
}

fn summarize(header: &RunHeader, records: &[RunRecord]) -> Result<ScoreSummary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("run file has no records".into()));
    }
    let metric = match header.category {
        Category::Skill => "pass_at_1",
        Category::Safety => "safe_at_1",
    };
    let mut by_length: BTreeMap<u32, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_length.entry(r.target_length).or_default().push(r);
    }
    let mut per_length = Vec::new();
    for (len, recs) in by_length {
        let mut flags = FlagCounts::default();
        let mut scores = Vec::new();
        for r in &recs {
            flags.add(&r.flags);
            if !r.is_errored() {
                scores.extend(r.scores.iter().copied());
            }
        }
        if scores.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no scorable records at target length {len}"
            )));
        }
        let score = match header.category {
            Category::Skill => pass_at_1(&scores, scores.len())?,
            Category::Safety => safe_at_1(&scores, scores.len())?,
        };
        per_length.push(LengthSummary {
            target_length: len,
            k: scores.len(),
            score,
            flags,
        });
    }
    Ok(ScoreSummary {
        metric: metric.to_string(),
        benchmark: header.benchmark_name.clone(),
        config_id: format!("{}:{}", header.model_name, header.precision),
        per_length,
    })
}

/// Aggregates a run file into per-target-length pass@1 or safe@1. With
/// `lexicon_override`, safety responses are re-scored from their stored
/// text before aggregation.
pub fn cmd_score(
    run_file: &Path,
    lexicon_override: Option<&Path>,
    out: Option<&Path>,
) -> Result<ScoreSummary> {
    let (header, mut records) = read_run_file(run_file)?;
    if let Some(lex_path) = lexicon_override {
        if header.category != Category::Safety {
            return Err(Error::InvalidArgument(
                "--lexicon only applies to safety runs".into(),
            ));
        }
        let text = std::fs::read_to_string(lex_path).map_err(|e| Error::io(lex_path, e))?;
        let lexicon = RefusalLexicon::from_json(&text)?;
        for r in &mut records {
            if !r.is_errored() {
                r.scores = vec![refusal_match(&r.response_text, &lexicon)];
            }
        }
    }
    let summary = summarize(&header, &records)?;
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&summary)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(summary)
}

pub fn print_summary(s: &ScoreSummary) {
    println!("benchmark={} config={} metric={}", s.benchmark, s.config_id, s.metric);
    for l in &s.per_length {
        println!(
            "  length={} K={} {}={} flags(judge={},transport={},truncated={})",
            l.target_length,
            l.k,
            s.metric,
            l.score,
            l.flags.judge_error,
            l.flags.transport_error,
            l.flags.truncated
        );
    }
}

// ---------------------------------------------------------------------------
// budget
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub points: Vec<TradeoffPoint>,
    pub frontier: Vec<TradeoffPoint>,
    pub best: Option<TradeoffPoint>,
}

/// Builds trade-off points from run files and a throughput fixture, then
/// extracts the Pareto frontier and (optionally) the best point within a
/// budget. Writes `{prefix}_points.csv` and `{prefix}_frontier.csv`.
pub fn cmd_budget(
    run_files: &[PathBuf],
    throughput_path: Option<&Path>,
    budget: Option<f64>,
    out_prefix: &Path,
) -> Result<BudgetReport> {
    let fixture: Vec<ThroughputRecord> = match throughput_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            load_throughput_fixture(&text)?
        }
        None => load_throughput_fixture(THROUGHPUT_FIXTURE)?,
    };

    let mut points = Vec::new();
    for path in run_files {
        let (header, records) = read_run_file(path)?;
        let tput = lookup_throughput(&fixture, &header.model_name, &header.benchmark_name)?;
        let summary = summarize(&header, &records)?;
        let kind = match header.category {
            Category::Skill => ScoreKind::PassAt1,
            Category::Safety => ScoreKind::SafeAt1,
        };
        for l in &summary.per_length {
            points.push(TradeoffPoint::new(
                &format!("{}:{}:{}", header.model_name, header.precision, l.target_length),
                l.target_length,
                reasoning_time(l.target_length, tput)?,
                l.score,
                kind,
            )?);
        }
    }
    points.sort_by(|a, b| a.config_id.cmp(&b.config_id));

    let frontier = pareto_frontier(&points);
    let best = match budget {
        Some(b) => best_under_budget(&points, b)?,
        None => None,
    };

    write_points_csv(&with_suffix(out_prefix, "_points.csv"), &points)?;
    write_points_csv(&with_suffix(out_prefix, "_frontier.csv"), &frontier)?;
    Ok(BudgetReport {
        points,
        frontier,
        best,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_points_csv(path: &Path, points: &[TradeoffPoint]) -> Result<()> {
    let mut out = String::from("config_id,target_length,reasoning_time_s,score\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.config_id, p.target_length, p.reasoning_time, p.score
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn print_budget_report(r: &BudgetReport, budget: Option<f64>) {
    println!("points: {}", r.points.len());
    println!("pareto frontier ({} points):", r.frontier.len());
    for p in &r.frontier {
        println!("  {} time={}s score={}", p.config_id, p.reasoning_time, p.score);
    }
    if let Some(b) = budget {
        match &r.best {
            Some(p) => println!(
                "best under budget {b}s: {} time={}s score={}",
                p.config_id, p.reasoning_time, p.score
            ),
            None => println!("best under budget {b}s: none fits"),
        }
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Emits one CSV per metric (rows = target_length, columns = config_id in
/// lexicographic order) plus `_flags.csv` when any record was flagged.
pub fn cmd_report(run_files: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // metric -> config -> length -> score
    let mut tables: BTreeMap<String, BTreeMap<String, BTreeMap<u32, f64>>> = BTreeMap::new();
    let mut flags: BTreeMap<String, FlagCounts> = BTreeMap::new();
    let mut any_flagged = false;

    for path in run_files {
        let (header, records) = read_run_file(path)?;
        let summary = summarize(&header, &records)?;
        let table = tables.entry(summary.metric.clone()).or_default();
        let col = table.entry(summary.config_id.clone()).or_default();
        let fc = flags.entry(summary.config_id.clone()).or_default();
        for l in &summary.per_length {
            col.insert(l.target_length, l.score);
            fc.judge_error += l.flags.judge_error;
            fc.transport_error += l.flags.transport_error;
            fc.truncated += l.flags.truncated;
            if l.flags != FlagCounts::default() {
                any_flagged = true;
            }
        }
    }

    let mut written = Vec::new();
    for (metric, table) in &tables {
        let configs: Vec<&String> = table.keys().collect();
        let lengths: BTreeSet<u32> = table.values().flat_map(|c| c.keys().copied()).collect();
        let mut csv = String::from("target_length");
        for c in &configs {
            csv.push(',');
            csv.push_str(c);
        }
        csv.push('\n');
        for len in lengths {
            csv.push_str(&len.to_string());
            for c in &configs {
                csv.push(',');
                if let Some(v) = table[*c].get(&len) {
                    csv.push_str(&v.to_string());
                }
            }
            csv.push('\n');
        }
        let path = out_dir.join(format!("{metric}.csv"));
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    if any_flagged {
        let mut csv = String::from("config_id,judge_error,transport_error,truncated\n");
        for (config, fc) in &flags {
            csv.push_str(&format!(
                "{config},{},{},{}\n",
                fc.judge_error, fc.transport_error, fc.truncated
            ));
        }
        let path = out_dir.join("_flags.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// quantize
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub rtn_loss: f64,
    pub gptq_loss: f64,
    pub calibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizeReport {
    pub bits: u8,
    pub symmetric: bool,
    pub method: String,
    pub layers: Vec<LayerReport>,
}

pub struct QuantizeArgs<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub bits: u8,
    pub calib: Option<&'a Path>,
    pub block_size: usize,
    /// None picks the default: symmetric for 8-bit, asymmetric for 4-bit.
    pub symmetric: Option<bool>,
    pub damping_frac: f64,
    /// "gptq" or "rtn".
    pub method: String,
    /// Restrict to these tensor names; default is every 2-D tensor.
    pub tensors: Option<Vec<String>>,
}

/// Quantizes every selected 2-D tensor of a safetensors file and writes
/// codes/scales/zero_points plus a JSON sidecar.
pub fn cmd_quantize(args: &QuantizeArgs) -> Result<QuantizeReport> {
    if args.bits != 4 && args.bits != 8 {
        return Err(Error::InvalidArgument(format!(
            "bits must be 4 or 8, got {}",
            args.bits
        )));
    }
    if args.method != "gptq" && args.method != "rtn" {
        return Err(Error::InvalidArgument(format!(
            "method must be gptq or rtn, got {:?}",
            args.method
        )));
    }
    let symmetric = args.symmetric.unwrap_or(args.bits == 8);
    let input = load_safetensors(args.input)?;
    let calib = match args.calib {
        Some(p) => Some(load_safetensors(p)?),
        None => None,
    };

    let selected: Vec<String> = match &args.tensors {
        Some(names) => {
            for n in names {
                match input.get(n) {
                    None => {
                        return Err(Error::InvalidArgument(format!("no tensor named {n:?}")))
                    }
                    Some(t) if !t.is_matrix() => {
                        return Err(Error::InvalidArgument(format!("tensor {n:?} is not 2-D")))
                    }
                    _ => {}
                }
            }
            names.clone()
        }
        None => input
            .iter()
            .filter(|(_, t)| t.is_matrix())
            .map(|(n, _)| n.clone())
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::InvalidArgument("no 2-D tensors to quantize".into()));
    }

    let mut layers = BTreeMap::new();
    let mut reports = Vec::new();
    for name in &selected {
        let t = &input[name];
        let (rows, cols) = (t.shape[0], t.shape[1]);
        let w = WeightMatrix::new(rows, cols, t.to_f64())?;
        let grid = fit_grid(&w, args.bits, symmetric)?;

        let (hessian, calibrated) = match calib.as_ref().and_then(|c| c.get(name)) {
            Some(x) => {
                if x.shape.len() != 2 || x.shape[0] != cols {
                    return Err(Error::ShapeMismatch(format!(
                        "calibration tensor {name:?} must be {cols} x n_samples"
                    )));
                }
                let m = nalgebra::DMatrix::from_row_slice(x.shape[0], x.shape[1], &x.to_f64());
                (build_hessian(&m, args.damping_frac)?, true)
            }
            None => {
                if args.method == "gptq" {
                    eprintln!(
                        "warning: no calibration for {name:?}; identity hessian makes gptq equal rtn"
                    );
                }
                (HessianProxy::identity(cols), false)
            }
        };

        let rtn = rtn_quantize(&w, &grid)?;
        let chosen: QuantizedLayer = if args.method == "gptq" {
            gptq_quantize(&w, &hessian, &grid, args.block_size)?
        } else {
            rtn.clone()
        };
        let rtn_loss = proxy_loss(&w, &dequantize(&rtn), &hessian)?;
        let gptq_loss = proxy_loss(&w, &dequantize(&chosen), &hessian)?;
        reports.push(LayerReport {
            name: name.clone(),
            rows,
            cols,
            rtn_loss,
            gptq_loss,
            calibrated,
        });
        layers.insert(name.clone(), chosen);
    }

    let sidecar = QuantSidecar {
        bits: args.bits,
        symmetric,
        block_size: args.block_size,
        damping_frac: args.damping_frac,
        method: args.method.clone(),
        layers: selected.clone(),
    };
    write_quantized(args.output, &layers, &sidecar)?;

    Ok(QuantizeReport {
        bits: args.bits,
        symmetric,
        method: args.method.clone(),
        layers: reports,
    })
}

pub fn print_quantize_report(r: &QuantizeReport) {
    println!("bits={} symmetric={} method={}", r.bits, r.symmetric, r.method);
    for l in &r.layers {
        println!(
            "  {} [{}x{}] rtn_loss={} {}_loss={}{}",
            l.name,
            l.rows,
            l.cols,
            l.rtn_loss,
            r.method,
            l.gptq_loss,
            if l.calibrated { "" } else { " (identity hessian)" }
        );
    }
}
