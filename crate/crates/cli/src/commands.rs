use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use planhint::candidate_search::{arms_by_ids, default_arm_subset, generate_by_llm, search_by_arms, BaoArm, CandidateSet};
use planhint::catalog_stats::QueryStats;
use planhint::dataset_builder::{
    build_generative_record, build_selective_record, dataset_schema_document, split_queries, synthesize_queries,
    QueryRef, SplitPolicy,
};
use planhint::dbms_client::{parse_explain_json, RecordingClient};
use planhint::hint_codec::render_hints_comment;
use planhint::label_harness::{collect_labels, LabelError, LabelMode, LabelPolicy, LabelStore, LabeledQuery};
use planhint::plan_space::{count_plans, count_plans_unordered, enumerate_plans_with_cap, ShapePolicy, SpaceSpec};
use planhint::selector::{
    label_cost, llmopt_g, llmopt_gs, llmopt_s, select_by_cost, select_by_model, select_listwise_llm, select_majority,
    select_oracle, selection_accuracy, Clock, E2eBreakdown, FrozenClock, PipelineContext, PipelineReport,
    PlannerEstimate, SystemClock, TrueLatency,
};
use planhint::sim::SEED_QUERIES;
use planhint::schema::Schema;
use planhint::sql::parse_select;
use planhint::{obtain_statistics, simplify, transform_plan, CatalogSnapshot, DbmsClient, HintSet, JoinType, ScanType};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::client::{AnyBackend, AnyClient, SNAPSHOT_FILE, STORE_FILE};
use crate::config::{Mode, RunConfig};
use crate::error::{CliError, CliResult};

/// Random streams of the mock model, one per use.
const STREAM_EXTEND: u64 = 1;
const STREAM_GENERATE: u64 = 2;
const STREAM_SELECT: u64 = 3;

/// Values sampled per synthesized template.
const FILL_VALUES: usize = 4;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Workload {
    /// File of `;`-separated SQL queries.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// A query given inline; repeatable.
    #[arg(long = "query")]
    pub query: Vec<String>,
    /// Synthesize this many queries from the built-in seed queries
    /// (needs the simulated database).
    #[arg(long)]
    pub synthesize: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Source {
    Arms,
    Llm,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum HintFormat {
    Lines,
    Single,
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectStrategy {
    Oracle,
    LabelCost,
    Majority,
    Planner,
    TrueLatency,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Pipeline {
    /// The planner's own plan, no hints.
    Default,
    G,
    S,
    Gs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CostModelKind {
    Planner,
    TrueLatency,
}

pub fn split_sql(text: &str) -> Vec<String> {
    text.split(';').map(str::trim).filter(|q| !q.is_empty()).map(str::to_owned).collect()
}

impl Workload {
    /// Queries from the file, the inline list and synthesis, in that order.
    pub fn resolve<C: DbmsClient + ?Sized>(&self, cfg: &RunConfig, schema: Option<&Schema>, client: &mut C) -> CliResult<Vec<String>> {
        let mut out = Vec::new();
        if let Some(path) = &self.queries {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            out.extend(split_sql(&text));
        }
        out.extend(self.query.iter().map(|q| q.trim().trim_end_matches(';').to_owned()));
        if let Some(n) = self.synthesize {
            let schema =
                schema.ok_or_else(|| CliError::Usage("--synthesize needs the simulated database (fixture source `toy`)".into()))?;
            let seeds: Vec<String> = SEED_QUERIES.iter().map(|s| s.to_string()).collect();
            let mut backend = AnyBackend::open(cfg, Some(schema), STREAM_EXTEND)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            out.extend(synthesize_queries(&seeds, schema, &mut backend, client, n, FILL_VALUES, &mut rng)?);
            backend.finish()?;
        }
        if out.is_empty() {
            return Err(CliError::Usage("no queries: pass --queries FILE, --query SQL or --synthesize N".into()));
        }
        for q in &out {
            parse_select(q).map_err(|e| CliError::Data(format!("{e} in `{q}`")))?;
        }
        Ok(out)
    }
}

fn value_name(v: impl clap::ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_owned()).unwrap_or_default()
}

fn query_id(i: usize) -> String {
    format!("q{i:04}")
}

fn arms(cfg: &RunConfig) -> CliResult<Vec<BaoArm>> {
    match &cfg.arms {
        Some(ids) => arms_by_ids(ids).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(default_arm_subset()),
    }
}

fn label_policy(cfg: &RunConfig, evaluation: bool) -> LabelPolicy<f64> {
    LabelPolicy {
        global_timeout_ms: cfg.timeout_ms,
        warmups: cfg.warmups,
        mode: if evaluation { LabelMode::Evaluation } else { LabelMode::Collection },
        share_duplicates: !evaluation,
        keep_plans: false,
    }
}

/// Output sink: a file, or stdout for `-` or no path.
fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        _ => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_jsonl<T: Serialize>(w: &mut dyn Write, items: &[T]) -> CliResult<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn write_json_file(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = sink(Some(path))?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn print_json(value: &serde_json::Value) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Statistics and default hints of one query.
struct Prepared {
    stats: QueryStats,
    default_hint: HintSet,
}

fn prepare<C: DbmsClient + ?Sized>(sql: &str, client: &mut C, snapshot: &CatalogSnapshot) -> CliResult<Prepared> {
    let plan = client.explain(sql, None, None)?;
    let stats = obtain_statistics(sql, snapshot, &plan)?;
    let default_hint = transform_plan(&simplify(&plan)?);
    Ok(Prepared { stats, default_hint })
}

fn candidates_for<C: DbmsClient<Scalar = f64> + ?Sized>(
    sql: &str,
    source: Source,
    cfg: &RunConfig,
    client: &mut C,
    snapshot: &CatalogSnapshot,
    backend: &mut AnyBackend,
) -> CliResult<CandidateSet> {
    let from_llm = |client: &mut C, backend: &mut AnyBackend| -> CliResult<CandidateSet> {
        let prep = prepare(sql, client, snapshot)?;
        Ok(generate_by_llm(sql, &prep.stats, backend, &cfg.sampling, &prep.default_hint)?)
    };
    Ok(match source {
        Source::Arms => search_by_arms(sql, &arms(cfg)?, client)?,
        Source::Llm => from_llm(client, backend)?,
        Source::Both => {
            let mut set = search_by_arms(sql, &arms(cfg)?, client)?;
            let generated = from_llm(client, backend)?;
            set.entries.extend(generated.entries);
            set.report.requested += generated.report.requested;
            set.report.invalid += generated.report.invalid;
            set
        }
    })
}

// --------------------------------------------------------------------------

pub fn snapshot(cfg: &RunConfig, out: Option<&Path>) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let snap = client.snapshot(cfg)?;
    let mut w = sink(out)?;
    w.write_all(snap.to_json().as_bytes())?;
    if !snap.to_json().ends_with('\n') {
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Operator list: a prefix length or comma-separated hint names.
pub fn parse_ops<T: Copy>(spec: &str, all: &[T], by_name: impl Fn(&str) -> Option<T>) -> CliResult<Vec<T>> {
    if let Ok(k) = spec.parse::<usize>() {
        if k == 0 || k > all.len() {
            return Err(CliError::Usage(format!("operator count must be within 1..={}", all.len())));
        }
        return Ok(all[..k].to_vec());
    }
    spec.split(',')
        .map(|name| by_name(name.trim()).ok_or_else(|| CliError::Usage(format!("unknown operator `{name}`"))))
        .collect()
}

pub struct EnumerateArgs {
    pub tables: usize,
    pub scans: String,
    pub joins: String,
    pub left_deep: bool,
    pub count: bool,
    pub unordered: bool,
    pub aliases: Option<String>,
    pub cap: usize,
}

pub fn enumerate(a: &EnumerateArgs) -> CliResult<()> {
    let scans = parse_ops(&a.scans, &ScanType::ALL, ScanType::from_hint_name)?;
    let joins = parse_ops(&a.joins, &JoinType::ALL, JoinType::from_hint_name)?;
    let policy = if a.left_deep { ShapePolicy::LeftDeepOnly } else { ShapePolicy::AllShapes };
    let spec = SpaceSpec::new(a.tables, scans, joins, policy);
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    if a.count || a.unordered {
        let n: BigUint = if a.unordered { count_plans_unordered(&spec)? } else { count_plans(&spec)? };
        writeln!(out, "{n}")?;
        return Ok(());
    }
    let tables: Vec<String> = match &a.aliases {
        Some(s) => s.split(',').map(|t| t.trim().to_owned()).collect(),
        None => (1..=a.tables).map(|i| format!("t{i}")).collect(),
    };
    let plans = enumerate_plans_with_cap(&spec, &tables, a.cap).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut w = BufWriter::new(out);
    for p in plans {
        if let Err(e) = writeln!(w, "{}", transform_plan(&p).to_single_line()) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Ok(());
            }
            return Err(e.into());
        }
    }
    match w.flush() {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn transform(explain: &Path, format: HintFormat) -> CliResult<()> {
    let mut text = String::new();
    if explain == Path::new("-") {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(explain).map_err(|e| CliError::Data(format!("cannot read {}: {e}", explain.display())))?;
    }
    let (tree, _) = parse_explain_json(&text)?;
    let hints = transform_plan(&simplify(&tree)?);
    let rendered = match format {
        HintFormat::Lines => hints.to_string(),
        HintFormat::Single => hints.to_single_line(),
        HintFormat::Comment => render_hints_comment(&hints),
    };
    println!("{rendered}");
    Ok(())
}

pub fn candidates(cfg: &RunConfig, workload: &Workload, source: Source, out: Option<&Path>) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let queries = workload.resolve(cfg, client.schema().cloned().as_ref(), &mut client)?;
    let snapshot = client.snapshot(cfg)?;
    let mut backend = AnyBackend::open(cfg, client.schema(), STREAM_GENERATE)?;
    let mut sets = Vec::with_capacity(queries.len());
    for q in &queries {
        sets.push(candidates_for(q, source, cfg, &mut client, &snapshot, &mut backend)?);
    }
    backend.finish()?;
    let mut w = sink(out)?;
    write_jsonl(&mut *w, &sets)?;
    w.flush()?;
    Ok(())
}

/// Labels every query; discarded queries are kept with `discarded = true`.
fn label_workload<C: DbmsClient<Scalar = f64> + ?Sized>(
    cfg: &RunConfig,
    queries: &[String],
    source: Source,
    evaluation: bool,
    client: &mut C,
    snapshot: &CatalogSnapshot,
    backend: &mut AnyBackend,
) -> CliResult<Vec<LabeledQuery<f64>>> {
    let policy = label_policy(cfg, evaluation);
    let mut labels = Vec::with_capacity(queries.len());
    for q in queries {
        let set = candidates_for(q, source, cfg, client, snapshot, backend)?;
        match collect_labels(q, &set, client, &policy) {
            Ok(l) => labels.push(l),
            Err(LabelError::AllCandidatesTimedOut(l)) => {
                log::warn!("every candidate timed out; discarding `{q}`");
                labels.push(*l);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(labels)
}

pub fn collect(cfg: &RunConfig, workload: &Workload, source: Source, evaluation: bool, out: Option<&Path>) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let queries = workload.resolve(cfg, client.schema().cloned().as_ref(), &mut client)?;
    let snapshot = client.snapshot(cfg)?;
    let mut backend = AnyBackend::open(cfg, client.schema(), STREAM_GENERATE)?;
    let labels = label_workload(cfg, &queries, source, evaluation, &mut client, &snapshot, &mut backend)?;
    backend.finish()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join("labels.jsonl"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    LabelStore::append(&path, &labels)?;
    print_json(&json!({
        "queries": labels.len(),
        "discarded": labels.iter().filter(|l| l.discarded).count(),
        "entries": labels.iter().map(|l| l.results.len()).sum::<usize>(),
        "timed_out": labels.iter().map(LabeledQuery::timed_out_count).sum::<usize>(),
        "labels": path,
    }))
}

pub struct DatasetArgs {
    pub source: Source,
    pub benchmark: String,
    pub test_fraction: f64,
    pub validation_count: usize,
    pub out_dir: Option<PathBuf>,
}

pub fn dataset(cfg: &RunConfig, workload: &Workload, a: &DatasetArgs) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let queries = workload.resolve(cfg, client.schema().cloned().as_ref(), &mut client)?;
    let snapshot = client.snapshot(cfg)?;
    let mut backend = AnyBackend::open(cfg, client.schema(), STREAM_GENERATE)?;
    let labels = label_workload(cfg, &queries, a.source, false, &mut client, &snapshot, &mut backend)?;
    backend.finish()?;

    let mut records = Vec::new();
    let mut ids = Vec::new();
    for (i, l) in labels.iter().enumerate().filter(|(_, l)| !l.discarded) {
        let qref = QueryRef { query_id: query_id(i), benchmark: a.benchmark.clone() };
        let prep = prepare(&l.query, &mut client, &snapshot)?;
        records.push(build_generative_record(&qref, &prep.stats, l)?);
        records.push(build_selective_record(&qref, &prep.stats, l)?);
        ids.push(qref.query_id);
    }
    let policy = SplitPolicy { test_fraction: a.test_fraction, validation_count: a.validation_count };
    let split = split_queries(&ids, &policy, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;

    let dir = a.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir)?;
    let mut w = sink(Some(&dir.join("dataset.jsonl")))?;
    write_jsonl(&mut *w, &records)?;
    w.flush()?;
    let mut w = sink(Some(&dir.join("labels.jsonl")))?;
    write_jsonl(&mut *w, &labels)?;
    w.flush()?;
    write_json_file(&dir.join("split.json"), &split)?;
    write_json_file(&dir.join("dataset_schema.json"), &dataset_schema_document())?;
    let mut w = sink(Some(&dir.join("queries.sql")))?;
    for q in &queries {
        writeln!(w, "{};", q.trim_end_matches(';'))?;
    }
    w.flush()?;
    print_json(&json!({
        "queries": queries.len(),
        "discarded": labels.len() - ids.len(),
        "records": records.len(),
        "train": split.train.len(),
        "validation": split.validation.len(),
        "test": split.test.len(),
        "out_dir": dir,
    }))
}

pub fn select(cfg: &RunConfig, labels_path: &Path, strategy: SelectStrategy, out: Option<&Path>) -> CliResult<()> {
    let labels: Vec<LabeledQuery<f64>> =
        LabelStore::read_all(labels_path)?.into_iter().filter(|l: &LabeledQuery<f64>| !l.discarded).collect();
    let needs_db = matches!(strategy, SelectStrategy::Planner | SelectStrategy::TrueLatency | SelectStrategy::Llm);
    let mut client = if needs_db { Some(AnyClient::open(cfg)?) } else { None };
    let snapshot = match (&mut client, strategy) {
        (Some(c), SelectStrategy::Llm) => Some(c.snapshot(cfg)?),
        _ => None,
    };
    let mut backend = match strategy {
        SelectStrategy::Llm => Some(AnyBackend::open(cfg, client.as_ref().and_then(AnyClient::schema), STREAM_SELECT)?),
        _ => None,
    };
    let mut outcomes = Vec::with_capacity(labels.len());
    for l in &labels {
        let c = &l.candidates;
        let o = match strategy {
            SelectStrategy::Oracle => select_oracle(l)?,
            SelectStrategy::LabelCost => select_by_cost(c, |i, _| label_cost(l, i))?,
            SelectStrategy::Majority => select_majority(c)?,
            SelectStrategy::Planner => select_by_model(client.as_mut().expect("opened"), &l.query, c, &mut PlannerEstimate)?,
            SelectStrategy::TrueLatency => {
                let mut model = TrueLatency { timeout_ms: cfg.timeout_ms };
                select_by_model(client.as_mut().expect("opened"), &l.query, c, &mut model)?
            }
            SelectStrategy::Llm => {
                let client = client.as_mut().expect("opened");
                let prep = prepare(&l.query, client, snapshot.as_ref().expect("loaded"))?;
                select_listwise_llm(&l.query, &prep.stats, c, backend.as_mut().expect("opened"))?
            }
        };
        outcomes.push(o);
    }
    if let Some(b) = &backend {
        b.finish()?;
    }
    if let Some(path) = out {
        let mut w = sink(Some(path))?;
        write_jsonl(&mut *w, &outcomes)?;
        w.flush()?;
    }
    let accuracy = selection_accuracy(&outcomes, &labels)?;
    print_json(&json!({
        "strategy": value_name(strategy),
        "queries": labels.len(),
        "accuracy_pct": accuracy,
        "fallbacks": outcomes.iter().filter(|o| o.fallback_used).count(),
    }))
}

pub struct BenchArgs {
    pub pipeline: Pipeline,
    pub cost_model: CostModelKind,
}

fn run_pipeline<K: Clock>(
    cfg: &RunConfig,
    queries: &[String],
    a: &BenchArgs,
    client: &mut AnyClient,
    snapshot: &CatalogSnapshot,
    clock: &mut K,
) -> CliResult<Vec<PipelineReport<f64>>> {
    let schema = client.schema().cloned();
    let mut generator = AnyBackend::open(cfg, schema.as_ref(), STREAM_GENERATE)?;
    let mut selector = AnyBackend::open(cfg, schema.as_ref(), STREAM_SELECT)?;
    let arms = arms(cfg)?;
    let mut reports = Vec::with_capacity(queries.len());
    for q in queries {
        let mut ctx = PipelineContext { snapshot, timeout_ms: cfg.timeout_ms, clock: &mut *clock };
        let report = match (a.pipeline, a.cost_model) {
            (Pipeline::Default, _) => default_report(q, client, &mut ctx)?,
            (Pipeline::G, CostModelKind::Planner) => {
                llmopt_g(q, client, &mut generator, &cfg.sampling, &mut PlannerEstimate, &mut ctx)?
            }
            (Pipeline::G, CostModelKind::TrueLatency) => {
                let mut model = TrueLatency { timeout_ms: cfg.timeout_ms };
                llmopt_g(q, client, &mut generator, &cfg.sampling, &mut model, &mut ctx)?
            }
            (Pipeline::S, _) => llmopt_s(q, client, &mut selector, &arms, &mut ctx)?,
            (Pipeline::Gs, _) => llmopt_gs(q, client, &mut generator, &mut selector, &cfg.sampling, &mut ctx)?,
        };
        reports.push(report);
    }
    generator.finish()?;
    selector.finish()?;
    Ok(reports)
}

/// Runs the planner's default plan.
fn default_report<K: Clock>(
    sql: &str,
    client: &mut AnyClient,
    ctx: &mut PipelineContext<'_, f64, K>,
) -> CliResult<PipelineReport<f64>> {
    let t0 = ctx.clock.now_ms();
    let plan = client.explain(sql, None, None)?;
    let hint = transform_plan(&simplify(&plan)?);
    let stats_ms = ctx.clock.now_ms() - t0;
    let candidates = CandidateSet {
        query: sql.to_owned(),
        entries: vec![planhint::CandidateEntry { hint: hint.clone(), provenance: planhint::Provenance::Default }],
        report: Default::default(),
    };
    let outcome = select_majority(&candidates)?;
    let execution = client.execute(sql, Some(&hint), ctx.timeout_ms, 0)?;
    let e2e = E2eBreakdown {
        stats_ms,
        inference_ms: 0.0,
        planning_ms: execution.plan_used.as_ref().and_then(|p| p.planning_ms).unwrap_or(0.0),
        execution_ms: execution.latency_ms,
    };
    Ok(PipelineReport { query: sql.to_owned(), candidates, outcome, execution, e2e })
}

pub fn bench(cfg: &RunConfig, workload: &Workload, a: &BenchArgs, out: Option<&Path>) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let queries = workload.resolve(cfg, client.schema().cloned().as_ref(), &mut client)?;
    let snapshot = client.snapshot(cfg)?;
    let reports = match cfg.mode {
        Mode::Fixture => run_pipeline(cfg, &queries, a, &mut client, &snapshot, &mut FrozenClock)?,
        Mode::Live => run_pipeline(cfg, &queries, a, &mut client, &snapshot, &mut SystemClock::default())?,
    };
    if let Some(path) = out {
        let mut w = sink(Some(path))?;
        write_jsonl(&mut *w, &reports)?;
        w.flush()?;
    }
    let sum = |f: fn(&E2eBreakdown) -> f64| reports.iter().map(|r| f(&r.e2e)).sum::<f64>();
    print_json(&json!({
        "pipeline": value_name(a.pipeline),
        "queries": reports.len(),
        "timeouts": reports.iter().filter(|r| r.execution.timed_out).count(),
        "exec_ms": sum(|e| e.execution_ms),
        "e2e_ms": sum(E2eBreakdown::total_ms),
        "stats_ms": sum(|e| e.stats_ms),
        "inference_ms": sum(|e| e.inference_ms),
        "planning_ms": sum(|e| e.planning_ms),
    }))
}

/// Records every answer the other commands need for `workload` into a
/// fixture directory.
pub fn fixtures_generate(cfg: &RunConfig, workload: &Workload, out_dir: &Path) -> CliResult<()> {
    let mut client = AnyClient::open(cfg)?;
    let snapshot = client.snapshot(cfg)?;
    let schema = client.schema().cloned();
    let mut recorder = RecordingClient::new(&mut client);
    let queries = workload.resolve(cfg, schema.as_ref(), &mut recorder)?;
    let mut backend = AnyBackend::open(cfg, schema.as_ref(), STREAM_GENERATE)?;
    let arms = arms(cfg)?;
    for q in &queries {
        let mut hints: Vec<HintSet> = Vec::new();
        hints.extend(search_by_arms(q, &arms, &mut recorder)?.hints());
        let prep = prepare(q, &mut recorder, &snapshot)?;
        hints.extend(generate_by_llm(q, &prep.stats, &mut backend, &cfg.sampling, &prep.default_hint)?.hints());
        hints.push(prep.default_hint);
        let mut seen = BTreeSet::new();
        for h in hints {
            if seen.insert(h.to_single_line()) {
                recorder.explain(q, None, Some(&h))?;
                recorder.execute(q, Some(&h), cfg.timeout_ms, 0)?;
            }
        }
    }
    backend.finish()?;
    let store = recorder.into_store();
    std::fs::create_dir_all(out_dir)?;
    store.save(&out_dir.join(STORE_FILE))?;
    snapshot.save(&out_dir.join(SNAPSHOT_FILE))?;
    let mut w = sink(Some(&out_dir.join("queries.sql")))?;
    for q in &queries {
        writeln!(w, "{};", q.trim_end_matches(';'))?;
    }
    w.flush()?;
    print_json(&json!({ "queries": queries.len(), "records": store.len(), "out_dir": out_dir }))
}
