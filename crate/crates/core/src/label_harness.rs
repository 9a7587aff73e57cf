//! Executing candidates to find the fastest one.
//!
//! In collection mode every candidate after the first finished one runs
//! under a limit equal to the best latency seen so far, so slow candidates
//! are cut off early. Evaluation mode uses the global limit throughout.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use num_traits::{Float, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate_search::CandidateSet;
use crate::dbms_client::{DbmsClient, DbmsError, ExecutionResult, DEFAULT_TIMEOUT_MS, DEFAULT_WARMUPS};
use crate::hint_codec::HintSet;
use crate::scalar::Scalar;

pub const LABEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LabelError<S: Scalar> {
    #[error("candidate set is empty")]
    NoCandidates,
    #[error("every candidate hit its time limit; query discarded")]
    AllCandidatesTimedOut(Box<LabeledQuery<S>>),
    #[error(transparent)]
    Dbms(#[from] DbmsError),
    #[error("global timeout must be positive")]
    InvalidTimeout,
    #[error("empty batch")]
    EmptyBatch,
}

#[derive(Debug, Error)]
pub enum LabelStoreError {
    #[error("label store I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("label store line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Per-entry limit shrinks to the best latency so far.
    Collection,
    /// Every entry runs under the global limit.
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabelPolicy<S: Scalar> {
    pub global_timeout_ms: S,
    pub warmups: u32,
    pub mode: LabelMode,
    /// Run repeated hint sets once and copy the result.
    pub share_duplicates: bool,
    /// Keep executed plans in the results.
    pub keep_plans: bool,
}

impl<S: Scalar> Default for LabelPolicy<S> {
    fn default() -> Self {
        LabelPolicy {
            global_timeout_ms: S::from_f64_lossy(DEFAULT_TIMEOUT_MS),
            warmups: DEFAULT_WARMUPS,
            mode: LabelMode::Collection,
            share_duplicates: true,
            keep_plans: false,
        }
    }
}

impl<S: Scalar> LabelPolicy<S> {
    pub fn evaluation() -> Self {
        LabelPolicy { mode: LabelMode::Evaluation, share_duplicates: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabeledQuery<S: Scalar> {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub query: String,
    pub candidates: CandidateSet,
    /// One result per candidate entry.
    pub results: Vec<ExecutionResult<S>>,
    /// Limit each entry ran under.
    pub timeouts_ms: Vec<S>,
    pub optimal_index: Option<usize>,
    pub optimal_hint: Option<HintSet>,
    pub discarded: bool,
    pub mode: LabelMode,
    /// Entries copied from an earlier identical hint set.
    #[serde(default)]
    pub shared_from: Vec<Option<usize>>,
}

fn schema_version() -> u32 {
    LABEL_SCHEMA_VERSION
}

impl<S: Scalar> LabeledQuery<S> {
    pub fn latencies(&self) -> Vec<S> {
        self.results.iter().map(|r| r.latency_ms).collect()
    }

    pub fn optimal_latency(&self) -> Option<S> {
        self.optimal_index.map(|i| self.results[i].latency_ms)
    }

    pub fn timed_out_count(&self) -> usize {
        self.results.iter().filter(|r| r.timed_out).count()
    }
}

/// Index of the smallest finished latency, first index on ties.
pub fn argmin_completed<S: Scalar>(results: &[ExecutionResult<S>]) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (i, r) in results.iter().enumerate() {
        if r.timed_out || r.latency_ms.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| r.latency_ms < b) {
            best = Some((i, r.latency_ms));
        }
    }
    best.map(|(i, _)| i)
}

/// Executes every candidate in order and labels the fastest.
pub fn collect_labels<C>(
    sql: &str,
    candidates: &CandidateSet,
    client: &mut C,
    policy: &LabelPolicy<C::Scalar>,
) -> Result<LabeledQuery<C::Scalar>, LabelError<C::Scalar>>
where
    C: DbmsClient + ?Sized,
{
    let global = policy.global_timeout_ms;
    if !(global > C::Scalar::zero()) || !global.is_finite() {
        return Err(LabelError::InvalidTimeout);
    }
    if candidates.is_empty() {
        return Err(LabelError::NoCandidates);
    }
    let first = candidates.first_occurrence();
    let mut results: Vec<ExecutionResult<C::Scalar>> = Vec::with_capacity(candidates.len());
    let mut timeouts = Vec::with_capacity(candidates.len());
    let mut shared_from = Vec::with_capacity(candidates.len());
    let mut best: Option<C::Scalar> = None;
    for (i, entry) in candidates.entries.iter().enumerate() {
        if policy.share_duplicates && first[i] != i {
            results.push(results[first[i]].clone());
            timeouts.push(timeouts[first[i]]);
            shared_from.push(Some(first[i]));
            continue;
        }
        let limit = match (policy.mode, best) {
            (LabelMode::Collection, Some(b)) if b < global => b,
            _ => global,
        };
        let mut r = if limit > C::Scalar::zero() {
            client.execute(sql, Some(&entry.hint), limit, policy.warmups)?
        } else {
            ExecutionResult::timeout(limit)
        };
        if !policy.keep_plans {
            r.plan_used = None;
        }
        if !r.timed_out && best.map_or(true, |b| r.latency_ms < b) {
            best = Some(r.latency_ms);
        }
        log::debug!("entry {i}: limit {limit} -> {} (timed out: {})", r.latency_ms, r.timed_out);
        results.push(r);
        timeouts.push(limit);
        shared_from.push(None);
    }
    let optimal_index = argmin_completed(&results);
    let labeled = LabeledQuery {
        schema_version: LABEL_SCHEMA_VERSION,
        query: sql.to_owned(),
        candidates: candidates.clone(),
        results,
        timeouts_ms: timeouts,
        optimal_index,
        optimal_hint: optimal_index.map(|i| candidates.entries[i].hint.clone()),
        discarded: optimal_index.is_none(),
        mode: policy.mode,
        shared_from,
    };
    if labeled.discarded {
        return Err(LabelError::AllCandidatesTimedOut(Box::new(labeled)));
    }
    Ok(labeled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CandidateSummary<S: Scalar> {
    pub min_sum: S,
    pub avg_sum: S,
    pub std_sum: S,
}

/// Per-query min, mean and population standard deviation of candidate
/// latencies, each summed over the batch.
pub fn summarize_candidates<S: Scalar>(batch: &[LabeledQuery<S>]) -> Result<CandidateSummary<S>, LabelError<S>> {
    if batch.is_empty() {
        return Err(LabelError::EmptyBatch);
    }
    let mut out = CandidateSummary { min_sum: S::zero(), avg_sum: S::zero(), std_sum: S::zero() };
    for q in batch {
        let l = q.latencies();
        if l.is_empty() {
            return Err(LabelError::NoCandidates);
        }
        let n = S::from_count(l.len());
        let mean = l.iter().copied().sum::<S>() / n;
        let var = l.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / n;
        out.min_sum = out.min_sum + l.iter().copied().fold(S::infinity(), S::min);
        out.avg_sum = out.avg_sum + mean;
        out.std_sum = out.std_sum + var.sqrt();
    }
    Ok(out)
}

/// Append-only JSON-lines file of labeled queries.
pub struct LabelStore;

impl LabelStore {
    pub fn append<S: Scalar>(path: &Path, records: &[LabeledQuery<S>]) -> Result<(), LabelStoreError> {
        let f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = BufWriter::new(f);
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_all<S: Scalar>(path: &Path) -> Result<Vec<LabeledQuery<S>>, LabelStoreError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut out = Vec::new();
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LabeledQuery<S> =
                serde_json::from_str(&line).map_err(|e| LabelStoreError::Parse { line: i + 1, message: e.to_string() })?;
            if rec.schema_version != LABEL_SCHEMA_VERSION {
                return Err(LabelStoreError::Parse { line: i + 1, message: format!("schema version {}", rec.schema_version) });
            }
            out.push(rec);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate_search::{CandidateEntry, GenerationReport, Provenance};
    use crate::catalog_stats::StatValue;
    use crate::dbms_client::KnobVector;
    use crate::hint_codec::parse_hints;
    use crate::plan_model::PlanTree;

    /// Latency per hint set, looked up by the scan hint of table `a`.
    struct Sim {
        latency: Vec<f64>,
        calls: Vec<(usize, f64)>,
    }

    fn hint(i: usize) -> HintSet {
        let scans = ["SeqScan", "IndexScan", "IndexOnlyScan", "TidScan", "BitmapScan"];
        parse_hints(&format!("{}(a) Leading(a)", scans[i])).unwrap()
    }

    impl DbmsClient for Sim {
        type Scalar = f64;
        fn explain(&mut self, _: &str, _: Option<&KnobVector>, _: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
            unimplemented!()
        }
        fn execute(&mut self, _: &str, h: Option<&HintSet>, t: f64, _: u32) -> Result<ExecutionResult<f64>, DbmsError> {
            let i = (0..5).find(|&i| Some(&hint(i)) == h).unwrap();
            self.calls.push((i, t));
            let l = self.latency[i];
            Ok(if l > t { ExecutionResult::timeout(t) } else { ExecutionResult::completed(l) })
        }
        fn query_values(&mut self, _: &str) -> Result<Vec<StatValue>, DbmsError> {
            unimplemented!()
        }
    }

    fn set(ids: &[usize]) -> CandidateSet {
        CandidateSet {
            query: "SELECT * FROM a".into(),
            entries: ids.iter().map(|&i| CandidateEntry { hint: hint(i), provenance: Provenance::Arm(i) }).collect(),
            report: GenerationReport::default(),
        }
    }

    #[test]
    fn adaptive_trace() {
        let mut sim = Sim { latency: vec![900.0, 400.0, 700.0], calls: vec![] };
        let l = collect_labels("SELECT * FROM a", &set(&[0, 1, 2]), &mut sim, &LabelPolicy::default()).unwrap();
        assert_eq!(l.timeouts_ms, vec![180000.0, 900.0, 400.0]);
        assert_eq!(l.timed_out_count(), 1);
        assert!(l.results[2].timed_out && l.results[2].latency_ms == 400.0);
        assert_eq!(l.optimal_index, Some(1));
        assert_eq!(l.optimal_hint.as_ref(), Some(&l.candidates.entries[1].hint));
    }

    #[test]
    fn ties_and_duplicates() {
        let mut sim = Sim { latency: vec![100.0, 100.0], calls: vec![] };
        let l = collect_labels("q", &set(&[0, 1]), &mut sim, &LabelPolicy::default()).unwrap();
        assert_eq!(l.optimal_index, Some(0));
        assert!(!l.results[1].timed_out);

        let mut sim = Sim { latency: vec![50.0, 10.0], calls: vec![] };
        let l = collect_labels("q", &set(&[0, 1, 0]), &mut sim, &LabelPolicy::default()).unwrap();
        assert_eq!(sim.calls.len(), 2);
        assert_eq!(l.shared_from, vec![None, None, Some(0)]);
        assert_eq!(l.optimal_index, Some(1));
    }

    #[test]
    fn evaluation_mode_uses_global_limit() {
        let mut sim = Sim { latency: vec![900.0, 400.0, 700.0], calls: vec![] };
        let l = collect_labels("q", &set(&[0, 1, 2]), &mut sim, &LabelPolicy::evaluation()).unwrap();
        assert_eq!(l.timeouts_ms, vec![180000.0; 3]);
        assert_eq!(l.latencies(), vec![900.0, 400.0, 700.0]);
    }

    #[test]
    fn all_timed_out_is_discarded() {
        let mut sim = Sim { latency: vec![500.0], calls: vec![] };
        let policy = LabelPolicy { global_timeout_ms: 100.0, ..LabelPolicy::default() };
        match collect_labels("q", &set(&[0]), &mut sim, &policy) {
            Err(LabelError::AllCandidatesTimedOut(l)) => assert!(l.discarded && l.optimal_index.is_none()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn summary_arithmetic() {
        let mk = |lat: &[f64]| {
            let mut sim = Sim { latency: lat.to_vec(), calls: vec![] };
            let ids: Vec<usize> = (0..lat.len()).collect();
            collect_labels("q", &set(&ids), &mut sim, &LabelPolicy::evaluation()).unwrap()
        };
        let s = summarize_candidates(&[mk(&[2.0, 4.0])]).unwrap();
        assert_eq!((s.min_sum, s.avg_sum, s.std_sum), (2.0, 3.0, 1.0));
        let s = summarize_candidates(&[mk(&[1.0, 3.0]), mk(&[5.0, 5.0])]).unwrap();
        assert_eq!((s.min_sum, s.avg_sum, s.std_sum), (6.0, 7.0, 1.0));
        assert!(matches!(summarize_candidates::<f64>(&[]), Err(LabelError::EmptyBatch)));
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        let mut sim = Sim { latency: vec![3.0, 2.0], calls: vec![] };
        let l = collect_labels("q", &set(&[0, 1]), &mut sim, &LabelPolicy::default()).unwrap();
        LabelStore::append(&path, &[l.clone()]).unwrap();
        LabelStore::append(&path, &[l.clone()]).unwrap();
        let back: Vec<LabeledQuery<f64>> = LabelStore::read_all(&path).unwrap();
        assert_eq!(back, vec![l.clone(), l]);
    }
}
