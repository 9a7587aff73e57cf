//! Recorded planner and executor responses for offline, deterministic runs.
//!
//! The store is one JSON document:
//!
//! ```text
//! { "format": "planhint-fixture-store", "version": 1,
//!   "explain": { <key>: { "sql", "knobs", "hints", "plan" | "error" } },
//!   "execute": { <key>: { "sql", "hints", "latency_ms", "censored", "plan"?, "error"? } },
//!   "values":  { <key>: { "sql", "values": [...] } } }
//! ```
//!
//! Keys are the SHA-256 (hex) of the request kind, the whitespace-normalized
//! SQL, the knob bits and the single-line canonical hints. Plans are stored
//! in `EXPLAIN (FORMAT JSON)` layout. A censored execution record means the
//! query was stopped at `latency_ms` without finishing.

use std::collections::BTreeMap;
use std::marker::PhantomData;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::catalog_stats::StatValue;
use crate::hint_codec::HintSet;
use crate::plan_model::PlanTree;
use crate::scalar::Scalar;
use crate::sql::normalize_sql;

use super::explain_json::{parse_explain_value, plan_to_explain_json};
use super::{check_timeout, measurement_lock, DbmsClient, DbmsError, ExecutionResult, KnobVector};

pub const FIXTURE_FORMAT: &str = "planhint-fixture-store";
pub const FIXTURE_VERSION: u32 = 1;

fn hints_text(hints: Option<&HintSet>) -> Option<String> {
    hints.map(|h| h.canonical().unwrap_or_else(|_| h.clone()).to_single_line())
}

/// Store key for a request. Absent knobs mean the all-enabled default.
pub fn fixture_key(kind: &str, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> String {
    let knobs = knobs.copied().unwrap_or_default().to_string();
    let hints = hints_text(hints).unwrap_or_else(|| "-".into());
    let mut h = Sha256::new();
    for part in [kind, &normalize_sql(sql), &knobs, &hints] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRecord {
    pub sql: String,
    pub knobs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hints: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteRecord {
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hints: Option<String>,
    pub latency_ms: f64,
    #[serde(default)]
    pub censored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuesRecord {
    pub sql: String,
    pub values: Vec<StatValue>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FixtureStore {
    pub explain: BTreeMap<String, ExplainRecord>,
    pub execute: BTreeMap<String, ExecuteRecord>,
    pub values: BTreeMap<String, ValuesRecord>,
}

#[derive(Serialize, Deserialize)]
struct FixtureFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    store: FixtureStore,
}

impl FixtureStore {
    pub fn to_json(&self) -> String {
        let file = FixtureFile { format: FIXTURE_FORMAT.into(), version: FIXTURE_VERSION, store: self.clone() };
        let mut s = serde_json::to_string_pretty(&file).expect("fixture store serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, DbmsError> {
        let file: FixtureFile = serde_json::from_str(text).map_err(|e| DbmsError::Parse(format!("fixture store: {e}")))?;
        if file.format != FIXTURE_FORMAT || file.version != FIXTURE_VERSION {
            return Err(DbmsError::Parse(format!(
                "fixture store has format `{}` version {}, expected `{FIXTURE_FORMAT}` version {FIXTURE_VERSION}",
                file.format, file.version
            )));
        }
        Ok(file.store)
    }

    pub fn load(path: &Path) -> Result<Self, DbmsError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DbmsError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn record_explain(
        &mut self,
        sql: &str,
        knobs: Option<&KnobVector>,
        hints: Option<&HintSet>,
        outcome: Result<&PlanTree, String>,
    ) {
        let (plan, error) = match outcome {
            Ok(p) => (Some(plan_to_explain_json(p, None)), None),
            Err(e) => (None, Some(e)),
        };
        self.explain.insert(
            fixture_key("explain", sql, knobs, hints),
            ExplainRecord {
                sql: normalize_sql(sql),
                knobs: knobs.copied().unwrap_or_default().to_string(),
                hints: hints_text(hints),
                plan,
                error,
            },
        );
    }

    /// Records an execution. An existing record is only replaced by a more
    /// informative one: a finished run beats a censored one, and a censored
    /// run with a longer limit beats a shorter one.
    pub fn record_execution(&mut self, sql: &str, hints: Option<&HintSet>, rec_latency_ms: f64, censored: bool, plan: Option<&PlanTree>) {
        let key = fixture_key("execute", sql, None, hints);
        if let Some(old) = self.execute.get(&key) {
            let better = old.error.is_some() || (old.censored && (!censored || rec_latency_ms > old.latency_ms));
            if !better {
                return;
            }
        }
        self.execute.insert(
            key,
            ExecuteRecord {
                sql: normalize_sql(sql),
                hints: hints_text(hints),
                latency_ms: rec_latency_ms,
                censored,
                plan: plan.map(|p| plan_to_explain_json(p, Some(rec_latency_ms))),
                error: None,
            },
        );
    }

    pub fn record_execution_error(&mut self, sql: &str, hints: Option<&HintSet>, error: String) {
        self.execute.insert(
            fixture_key("execute", sql, None, hints),
            ExecuteRecord {
                sql: normalize_sql(sql),
                hints: hints_text(hints),
                latency_ms: 0.0,
                censored: false,
                plan: None,
                error: Some(error),
            },
        );
    }

    pub fn record_values(&mut self, sql: &str, values: Vec<StatValue>) {
        self.values
            .insert(fixture_key("values", sql, None, None), ValuesRecord { sql: normalize_sql(sql), values });
    }

    pub fn merge(&mut self, other: FixtureStore) {
        self.explain.extend(other.explain);
        for (k, v) in other.execute {
            match self.execute.get(&k) {
                Some(old) if !old.censored && old.error.is_none() => {}
                _ => {
                    self.execute.insert(k, v);
                }
            }
        }
        self.values.extend(other.values);
    }

    pub fn len(&self) -> usize {
        self.explain.len() + self.execute.len() + self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One run served by a [`FixtureClient`], warm-ups included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionLogEntry {
    pub key: String,
    pub measured: bool,
    pub timeout_ms: f64,
    pub latency_ms: f64,
    pub timed_out: bool,
}

/// Serves requests from a [`FixtureStore`]; a missing key is an error.
#[derive(Debug, Clone)]
pub struct FixtureClient<S = f64> {
    pub store: FixtureStore,
    pub log: Vec<ExecutionLogEntry>,
    _scalar: PhantomData<S>,
}

impl<S> FixtureClient<S> {
    pub fn new(store: FixtureStore) -> Self {
        FixtureClient { store, log: Vec::new(), _scalar: PhantomData }
    }

    pub fn load(path: &Path) -> Result<Self, DbmsError> {
        Ok(Self::new(FixtureStore::load(path)?))
    }

    /// Number of runs (warm-ups included) served for `sql` with `hints`.
    pub fn executions_of(&self, sql: &str, hints: Option<&HintSet>) -> usize {
        let key = fixture_key("execute", sql, None, hints);
        self.log.iter().filter(|e| e.key == key).count()
    }

    pub fn measured_executions(&self) -> usize {
        self.log.iter().filter(|e| e.measured).count()
    }

    fn replay(&self, key: &str, sql: &str, timeout_ms: f64) -> Result<(f64, bool, Option<PlanTree>), DbmsError> {
        let rec = self.store.execute.get(key).ok_or_else(|| DbmsError::FixtureMiss {
            kind: "execute",
            key: key.to_owned(),
            sql: normalize_sql(sql),
        })?;
        if let Some(e) = &rec.error {
            return Err(DbmsError::Execution(e.clone()));
        }
        let plan = rec.plan.as_ref().map(parse_explain_value).transpose()?.map(|(p, _)| p);
        if rec.latency_ms > timeout_ms || (rec.censored && rec.latency_ms >= timeout_ms) {
            Ok((timeout_ms, true, plan))
        } else if rec.censored {
            Err(DbmsError::FixtureMiss {
                kind: "execute (recording stopped before the requested limit)",
                key: key.to_owned(),
                sql: normalize_sql(sql),
            })
        } else {
            Ok((rec.latency_ms, false, plan))
        }
    }
}

impl<S: Scalar> DbmsClient for FixtureClient<S> {
    type Scalar = S;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        if let Some(k) = knobs {
            k.validate()?;
        }
        let key = fixture_key("explain", sql, knobs, hints);
        let rec = self.store.explain.get(&key).ok_or_else(|| DbmsError::FixtureMiss {
            kind: "explain",
            key: key.clone(),
            sql: normalize_sql(sql),
        })?;
        match (&rec.plan, &rec.error) {
            (_, Some(e)) => Err(DbmsError::Planner(e.clone())),
            (Some(p), None) => Ok(parse_explain_value(p)?.0),
            (None, None) => Err(DbmsError::Parse(format!("explain record {key} has neither plan nor error"))),
        }
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: S, warmups: u32)
        -> Result<ExecutionResult<S>, DbmsError> {
        let limit = timeout_ms.to_f64_lossy();
        check_timeout(limit)?;
        let key = fixture_key("execute", sql, None, hints);
        let _guard = measurement_lock();
        let mut warmup_ms = Vec::new();
        for i in 0..=warmups {
            let (latency, timed_out, plan) = self.replay(&key, sql, limit)?;
            let measured = i == warmups;
            self.log.push(ExecutionLogEntry { key: key.clone(), measured, timeout_ms: limit, latency_ms: latency, timed_out });
            let latency_s = S::from_f64_lossy(latency);
            if !measured {
                warmup_ms.push(latency_s);
                continue;
            }
            let latency_ms = if timed_out { timeout_ms } else { latency_s };
            return Ok(ExecutionResult { latency_ms, timed_out, plan_used: plan, warmup_ms });
        }
        unreachable!("the loop always reaches the measured run")
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        let key = fixture_key("values", sql, None, None);
        self.store.values.get(&key).map(|r| r.values.clone()).ok_or_else(|| DbmsError::FixtureMiss {
            kind: "values",
            key,
            sql: normalize_sql(sql),
        })
    }
}

/// Forwards to an inner client and records every response into a store.
pub struct RecordingClient<C> {
    pub inner: C,
    pub store: FixtureStore,
}

impl<C> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        RecordingClient { inner, store: FixtureStore::default() }
    }

    pub fn into_store(self) -> FixtureStore {
        self.store
    }
}

impl<C: DbmsClient> DbmsClient for RecordingClient<C> {
    type Scalar = C::Scalar;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        match self.inner.explain(sql, knobs, hints) {
            Ok(plan) => {
                self.store.record_explain(sql, knobs, hints, Ok(&plan));
                Ok(plan)
            }
            Err(DbmsError::Planner(msg)) => {
                self.store.record_explain(sql, knobs, hints, Err(msg.clone()));
                Err(DbmsError::Planner(msg))
            }
            Err(e) => Err(e),
        }
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: C::Scalar, warmups: u32)
        -> Result<ExecutionResult<C::Scalar>, DbmsError> {
        match self.inner.execute(sql, hints, timeout_ms, warmups) {
            Ok(r) => {
                self.store.record_execution(sql, hints, r.latency_ms.to_f64_lossy(), r.timed_out, r.plan_used.as_ref());
                Ok(r)
            }
            Err(DbmsError::Execution(msg)) => {
                self.store.record_execution_error(sql, hints, msg.clone());
                Err(DbmsError::Execution(msg))
            }
            Err(e) => Err(e),
        }
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        let values = self.inner.query_values(sql)?;
        self.store.record_values(sql, values.clone());
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hint_codec::parse_hints;
    use crate::plan_model::PlanNode;

    const Q: &str = "SELECT count(*) FROM t WHERE t.id = 1";

    fn store() -> FixtureStore {
        let mut s = FixtureStore::default();
        let plan = PlanTree::new(PlanNode::other("Aggregate", PlanNode::scan("Seq Scan", "t", 5, 2.0), 1, 3.0));
        s.record_explain(Q, None, None, Ok(&plan));
        s.record_explain(Q, Some(&KnobVector::from_bits(0b111011)), None, Err("no scan".into()));
        s.record_execution(Q, None, 812.0, false, None);
        let h = parse_hints("IndexScan(t)\nLeading(t)").unwrap();
        s.record_execution(Q, Some(&h), 500.0, true, None);
        s.record_values("SELECT t.id FROM t", vec![StatValue::Int(1), StatValue::Text("x".into())]);
        s
    }

    #[test]
    fn replays_recordings() {
        let mut c: FixtureClient = FixtureClient::new(FixtureStore::from_json(&store().to_json()).unwrap());
        let plan = c.explain("  SELECT count(*)\nFROM t WHERE t.id = 1;", None, None).unwrap();
        assert_eq!(plan.scan_for("t").unwrap().est_rows, 5);
        assert!(matches!(
            c.explain(Q, Some(&KnobVector::from_bits(0b111011)), None),
            Err(DbmsError::Planner(_))
        ));
        assert!(matches!(
            c.explain(Q, Some(&KnobVector::from_bits(0b111000)), None),
            Err(DbmsError::InvalidKnobs(_))
        ));
        assert!(matches!(c.explain("SELECT 1", None, None), Err(DbmsError::FixtureMiss { .. })));

        let r: ExecutionResult<f64> = c.execute(Q, None, 180_000.0, 2).unwrap();
        assert_eq!((r.latency_ms, r.timed_out), (812.0, false));
        assert_eq!(c.executions_of(Q, None), 3);
        assert_eq!(r.warmup_ms.len(), 2);
        let mut c32: FixtureClient<f32> = FixtureClient::new(c.store.clone());
        let r = c32.execute(Q, None, 1.0, 0).unwrap();
        assert_eq!((r.latency_ms, r.timed_out), (1.0, true));
        let r: ExecutionResult<f64> = c.execute(Q, None, 812.0, 0).unwrap();
        assert!(!r.timed_out);
    }

    #[test]
    fn censored_recordings() {
        let mut c: FixtureClient = FixtureClient::new(store());
        let h = parse_hints("IndexScan(t) Leading(t)").unwrap();
        let r: ExecutionResult<f64> = c.execute(Q, Some(&h), 400.0, 0).unwrap();
        assert!(r.timed_out && r.latency_ms == 400.0);
        assert!(matches!(c.execute(Q, Some(&h), 900.0, 0), Err(DbmsError::FixtureMiss { .. })));
        assert!(matches!(c.execute(Q, None, 0.0, 0), Err(DbmsError::InvalidTimeout(_))));
    }

    #[test]
    fn record_keeps_most_informative() {
        let mut s = FixtureStore::default();
        s.record_execution(Q, None, 100.0, true, None);
        s.record_execution(Q, None, 50.0, true, None);
        assert_eq!(s.execute.values().next().unwrap().latency_ms, 100.0);
        s.record_execution(Q, None, 700.0, false, None);
        s.record_execution(Q, None, 9000.0, true, None);
        let r = s.execute.values().next().unwrap();
        assert_eq!((r.latency_ms, r.censored), (700.0, false));
    }

    #[test]
    fn values_and_version_check() {
        let mut c: FixtureClient = FixtureClient::new(store());
        assert_eq!(c.query_values("SELECT t.id FROM t").unwrap().len(), 2);
        let bad = store().to_json().replace("\"version\": 1", "\"version\": 7");
        assert!(FixtureStore::from_json(&bad).is_err());
    }
}
