//! Candidate selection strategies and the end-to-end optimization pipelines.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, GenerationBackend, GenerationRequest};
use crate::candidate_search::{
    generate_by_llm, search_by_arms, BaoArm, CandidateEntry, CandidateError, CandidateSet, Provenance, SamplingPolicy,
};
use crate::catalog_stats::{obtain_statistics, render_stats, CatalogSnapshot, QueryStats, StatsError};
use crate::dbms_client::{DbmsClient, DbmsError, ExecutionResult};
use crate::hint_codec::{transform_plan, HintSet};
use crate::label_harness::LabeledQuery;
use crate::plan_model::simplify;
use crate::prompts::{parse_index, selective_prompt, SELECTIVE_SYSTEM};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("no candidates to select from")]
    EmptyCandidates,
    #[error("{outcomes} outcomes but {labels} labels")]
    LengthMismatch { outcomes: usize, labels: usize },
    #[error("label has no entry {0}")]
    MissingLabel(usize),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Dbms(#[from] DbmsError),
    #[error(transparent)]
    Candidate(#[from] CandidateError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ListwiseLlm,
    CostEstimate,
    MajorityVote,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen_index: usize,
    pub chosen_hint: HintSet,
    pub strategy: Strategy,
    pub fallback_used: bool,
}

impl SelectionOutcome {
    fn pick(candidates: &CandidateSet, index: usize, strategy: Strategy, fallback_used: bool) -> Self {
        SelectionOutcome {
            chosen_index: index,
            chosen_hint: candidates.entries[index].hint.clone(),
            strategy,
            fallback_used,
        }
    }
}

fn non_empty(candidates: &CandidateSet) -> Result<(), SelectorError> {
    if candidates.is_empty() {
        Err(SelectorError::EmptyCandidates)
    } else {
        Ok(())
    }
}

/// Asks the selective model for an index with one greedy completion.
/// Unparseable or out-of-range answers fall back to the default candidate.
pub fn select_listwise_llm<B: GenerationBackend + ?Sized>(
    sql: &str,
    stats: &QueryStats,
    candidates: &CandidateSet,
    backend: &mut B,
) -> Result<SelectionOutcome, SelectorError> {
    non_empty(candidates)?;
    if candidates.len() == 1 {
        return Ok(SelectionOutcome::pick(candidates, 0, Strategy::ListwiseLlm, false));
    }
    let req = GenerationRequest {
        system: Some(SELECTIVE_SYSTEM.to_owned()),
        prompt: selective_prompt(sql, &render_stats(stats), &candidates.hints()),
        temperature: 0.0,
        n: 1,
        max_tokens: Some(8),
    };
    let out = backend.generate(&req)?;
    match out.first().and_then(|o| parse_index(o)).filter(|&i| i < candidates.len()) {
        Some(i) => Ok(SelectionOutcome::pick(candidates, i, Strategy::ListwiseLlm, false)),
        None => {
            log::warn!("selective model answered {:?}; using the default candidate", out.first());
            let i = candidates.default_index().unwrap_or(0);
            Ok(SelectionOutcome::pick(candidates, i, Strategy::ListwiseLlm, true))
        }
    }
}

/// Argmin of `cost_fn` over the candidates; NaN counts as infinite and ties
/// keep the first index.
pub fn select_by_cost<F>(candidates: &CandidateSet, mut cost_fn: F) -> Result<SelectionOutcome, SelectorError>
where
    F: FnMut(usize, &HintSet) -> Result<f64, SelectorError>,
{
    non_empty(candidates)?;
    let mut best = (0, f64::INFINITY);
    for (i, e) in candidates.entries.iter().enumerate() {
        let c = cost_fn(i, &e.hint)?;
        let c = if c.is_nan() { f64::INFINITY } else { c };
        if c < best.1 {
            best = (i, c);
        }
    }
    Ok(SelectionOutcome::pick(candidates, best.0, Strategy::CostEstimate, false))
}

/// Latency predictor for a candidate plan.
pub trait CostModel<C: DbmsClient + ?Sized> {
    fn name(&self) -> &'static str;
    fn cost(&mut self, client: &mut C, sql: &str, index: usize, hint: &HintSet) -> Result<f64, SelectorError>;
}

/// The planner's total estimated cost of the hinted plan.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlannerEstimate;

impl<C: DbmsClient + ?Sized> CostModel<C> for PlannerEstimate {
    fn name(&self) -> &'static str {
        "planner_estimate"
    }

    fn cost(&mut self, client: &mut C, sql: &str, _index: usize, hint: &HintSet) -> Result<f64, SelectorError> {
        Ok(client.explain(sql, None, Some(hint))?.total_cost())
    }
}

/// Measured latency of the hinted plan; timeouts cost infinity.
#[derive(Debug, Clone, Copy)]
pub struct TrueLatency<S> {
    pub timeout_ms: S,
}

impl<C: DbmsClient + ?Sized> CostModel<C> for TrueLatency<C::Scalar> {
    fn name(&self) -> &'static str {
        "true_latency"
    }

    fn cost(&mut self, client: &mut C, sql: &str, _index: usize, hint: &HintSet) -> Result<f64, SelectorError> {
        let r = client.execute(sql, Some(hint), self.timeout_ms, 0)?;
        Ok(if r.timed_out { f64::INFINITY } else { r.latency_ms.to_f64_lossy() })
    }
}

/// Cost of candidate `i` read from a labeled query.
pub fn label_cost<S: Scalar>(labeled: &LabeledQuery<S>, index: usize) -> Result<f64, SelectorError> {
    let r = labeled.results.get(index).ok_or(SelectorError::MissingLabel(index))?;
    Ok(if r.timed_out { f64::INFINITY } else { r.latency_ms.to_f64_lossy() })
}

/// Runs `model` over every candidate and picks the cheapest.
pub fn select_by_model<C, M>(client: &mut C, sql: &str, candidates: &CandidateSet, model: &mut M)
    -> Result<SelectionOutcome, SelectorError>
where
    C: DbmsClient + ?Sized,
    M: CostModel<C> + ?Sized,
{
    select_by_cost(candidates, |i, h| model.cost(client, sql, i, h))
}

/// Most frequent hint set by rendered text; ties go to the earliest first
/// occurrence.
pub fn select_majority(candidates: &CandidateSet) -> Result<SelectionOutcome, SelectorError> {
    non_empty(candidates)?;
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, e) in candidates.entries.iter().enumerate() {
        counts.entry(e.hint.to_single_line()).or_insert((0, i)).0 += 1;
    }
    let (_, first) = counts
        .values()
        .copied()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("non-empty");
    Ok(SelectionOutcome::pick(candidates, first, Strategy::MajorityVote, false))
}

/// The labeled optimum.
pub fn select_oracle<S: Scalar>(labeled: &LabeledQuery<S>) -> Result<SelectionOutcome, SelectorError> {
    non_empty(&labeled.candidates)?;
    let i = labeled.optimal_index.ok_or(SelectorError::MissingLabel(0))?;
    Ok(SelectionOutcome::pick(&labeled.candidates, i, Strategy::Oracle, false))
}

/// Whether the chosen entry finished with the optimal latency.
pub fn is_correct<S: Scalar>(outcome: &SelectionOutcome, label: &LabeledQuery<S>) -> bool {
    match (label.results.get(outcome.chosen_index), label.optimal_latency()) {
        (Some(r), Some(best)) => !r.timed_out && r.latency_ms == best,
        _ => false,
    }
}

/// Percentage of queries whose chosen candidate matches the optimal
/// latency. Timed-out entries never count, even when their limit equals the
/// optimum.
pub fn selection_accuracy<S: Scalar>(outcomes: &[SelectionOutcome], labels: &[LabeledQuery<S>]) -> Result<f64, SelectorError> {
    if outcomes.len() != labels.len() {
        return Err(SelectorError::LengthMismatch { outcomes: outcomes.len(), labels: labels.len() });
    }
    if outcomes.is_empty() {
        return Ok(0.0);
    }
    let hits = outcomes.iter().zip(labels).filter(|(o, l)| is_correct(o, l)).count();
    Ok(100.0 * hits as f64 / outcomes.len() as f64)
}

/// Time source for end-to-end accounting.
pub trait Clock {
    fn now_ms(&mut self) -> f64;
}

/// Wall-clock time since construction.
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now_ms(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1000.0
    }
}

/// A clock that never advances, for reproducible reports.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now_ms(&mut self) -> f64 {
        0.0
    }
}

/// End-to-end latency split into its parts, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct E2eBreakdown {
    pub stats_ms: f64,
    pub inference_ms: f64,
    pub planning_ms: f64,
    pub execution_ms: f64,
}

impl E2eBreakdown {
    pub fn total_ms(&self) -> f64 {
        self.stats_ms + self.inference_ms + self.planning_ms + self.execution_ms
    }
}

/// Per-query result of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct PipelineReport<S: Scalar> {
    pub query: String,
    pub candidates: CandidateSet,
    pub outcome: SelectionOutcome,
    pub execution: ExecutionResult<S>,
    pub e2e: E2eBreakdown,
}

/// Shared settings of the pipelines.
pub struct PipelineContext<'a, S, K: Clock + ?Sized> {
    pub snapshot: &'a CatalogSnapshot,
    pub timeout_ms: S,
    pub clock: &'a mut K,
}

struct Prepared {
    stats: QueryStats,
    default_hint: HintSet,
}

fn prepare<C, K>(sql: &str, client: &mut C, ctx: &mut PipelineContext<'_, C::Scalar, K>, e2e: &mut E2eBreakdown)
    -> Result<Prepared, SelectorError>
where
    C: DbmsClient + ?Sized,
    K: Clock + ?Sized,
{
    let t0 = ctx.clock.now_ms();
    let plan = client.explain(sql, None, None)?;
    let stats = obtain_statistics(sql, ctx.snapshot, &plan)?;
    let default_hint = transform_plan(&simplify(&plan).map_err(|e| SelectorError::Dbms(DbmsError::Plan(e)))?);
    e2e.stats_ms = ctx.clock.now_ms() - t0;
    Ok(Prepared { stats, default_hint })
}

fn finish<C, K>(
    sql: &str,
    client: &mut C,
    ctx: &mut PipelineContext<'_, C::Scalar, K>,
    candidates: CandidateSet,
    outcome: SelectionOutcome,
    mut e2e: E2eBreakdown,
) -> Result<PipelineReport<C::Scalar>, SelectorError>
where
    C: DbmsClient + ?Sized,
    K: Clock + ?Sized,
{
    let execution = client.execute(sql, Some(&outcome.chosen_hint), ctx.timeout_ms, 0)?;
    e2e.planning_ms = execution.plan_used.as_ref().and_then(|p| p.planning_ms).unwrap_or(0.0);
    e2e.execution_ms = execution.latency_ms.to_f64_lossy();
    Ok(PipelineReport { query: sql.to_owned(), candidates, outcome, execution, e2e })
}

/// Generate candidates with the generative model, keep the one the cost
/// model ranks cheapest, execute it.
pub fn llmopt_g<C, B, M, K>(
    sql: &str,
    client: &mut C,
    backend: &mut B,
    policy: &SamplingPolicy,
    model: &mut M,
    ctx: &mut PipelineContext<'_, C::Scalar, K>,
) -> Result<PipelineReport<C::Scalar>, SelectorError>
where
    C: DbmsClient + ?Sized,
    B: GenerationBackend + ?Sized,
    M: CostModel<C> + ?Sized,
    K: Clock + ?Sized,
{
    let mut e2e = E2eBreakdown::default();
    let prep = prepare(sql, client, ctx, &mut e2e)?;
    let t0 = ctx.clock.now_ms();
    let candidates = generate_by_llm(sql, &prep.stats, backend, policy, &prep.default_hint)?;
    let outcome = select_by_model(client, sql, &candidates, model)?;
    e2e.inference_ms = ctx.clock.now_ms() - t0;
    finish(sql, client, ctx, candidates, outcome, e2e)
}

/// Plan under each arm, let the selective model pick, execute the pick.
pub fn llmopt_s<C, B, K>(
    sql: &str,
    client: &mut C,
    backend: &mut B,
    arms: &[BaoArm],
    ctx: &mut PipelineContext<'_, C::Scalar, K>,
) -> Result<PipelineReport<C::Scalar>, SelectorError>
where
    C: DbmsClient + ?Sized,
    B: GenerationBackend + ?Sized,
    K: Clock + ?Sized,
{
    let mut e2e = E2eBreakdown::default();
    let prep = prepare(sql, client, ctx, &mut e2e)?;
    let t0 = ctx.clock.now_ms();
    let candidates = search_by_arms(sql, arms, client)?;
    let outcome = select_listwise_llm(sql, &prep.stats, &candidates, backend)?;
    e2e.inference_ms = ctx.clock.now_ms() - t0;
    finish(sql, client, ctx, candidates, outcome, e2e)
}

/// Generated candidates ranked by the selective model.
pub fn llmopt_gs<C, G, S, K>(
    sql: &str,
    client: &mut C,
    generator: &mut G,
    selector: &mut S,
    policy: &SamplingPolicy,
    ctx: &mut PipelineContext<'_, C::Scalar, K>,
) -> Result<PipelineReport<C::Scalar>, SelectorError>
where
    C: DbmsClient + ?Sized,
    G: GenerationBackend + ?Sized,
    S: GenerationBackend + ?Sized,
    K: Clock + ?Sized,
{
    let mut e2e = E2eBreakdown::default();
    let prep = prepare(sql, client, ctx, &mut e2e)?;
    let t0 = ctx.clock.now_ms();
    let mut candidates = generate_by_llm(sql, &prep.stats, generator, policy, &prep.default_hint)?;
    if candidates.default_index().is_none() {
        candidates.entries.push(CandidateEntry { hint: prep.default_hint.clone(), provenance: Provenance::Default });
    }
    let outcome = select_listwise_llm(sql, &prep.stats, &candidates, selector)?;
    e2e.inference_ms = ctx.clock.now_ms() - t0;
    finish(sql, client, ctx, candidates, outcome, e2e)
}
