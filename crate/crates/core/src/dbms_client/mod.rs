//! Planning and executing queries against a database or a recorded fixture
//! store behind one [`DbmsClient`] interface.

use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog_stats::StatValue;
use crate::hint_codec::{transform_plan, HintSet};
use crate::plan_model::{simplify, PlanError, PlanTree};
use crate::scalar::Scalar;

pub mod explain_json;
pub mod fixture;
pub mod psql;

pub use explain_json::{parse_explain_json, plan_to_explain_json};
pub use fixture::{ExecutionLogEntry, FixtureClient, FixtureStore, RecordingClient};
pub use psql::{PsqlClient, PsqlConfig};

/// Default per-query execution limit: three minutes.
pub const DEFAULT_TIMEOUT_MS: f64 = 180_000.0;
pub const DEFAULT_WARMUPS: u32 = 2;

#[derive(Debug, Error)]
pub enum DbmsError {
    #[error("planner error: {0}")]
    Planner(String),
    #[error("execution error: {0}")]
    Execution(String),
    #[error("no recorded {kind} response for key {key} (sql: {sql})")]
    FixtureMiss { kind: &'static str, key: String, sql: String },
    #[error("invalid knob vector {0}: needs at least one join and one scan method")]
    InvalidKnobs(KnobVector),
    #[error("connection error: {0}")]
    Connection(String),
    #[error("malformed DBMS output: {0}")]
    Parse(String),
    #[error("timeout must be positive, got {0}")]
    InvalidTimeout(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("fixture I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// The six planner method switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnobVector {
    pub enable_hashjoin: bool,
    pub enable_mergejoin: bool,
    pub enable_nestloop: bool,
    pub enable_seqscan: bool,
    pub enable_indexscan: bool,
    pub enable_indexonlyscan: bool,
}

impl KnobVector {
    pub const NAMES: [&'static str; 6] = [
        "enable_hashjoin",
        "enable_mergejoin",
        "enable_nestloop",
        "enable_seqscan",
        "enable_indexscan",
        "enable_indexonlyscan",
    ];

    pub const ALL_ON: KnobVector = KnobVector::from_bits(0b111111);

    /// Bit 5 is `enable_hashjoin`, bit 0 is `enable_indexonlyscan`.
    pub const fn from_bits(bits: u8) -> Self {
        KnobVector {
            enable_hashjoin: bits & 0b100000 != 0,
            enable_mergejoin: bits & 0b010000 != 0,
            enable_nestloop: bits & 0b001000 != 0,
            enable_seqscan: bits & 0b000100 != 0,
            enable_indexscan: bits & 0b000010 != 0,
            enable_indexonlyscan: bits & 0b000001 != 0,
        }
    }

    pub fn bits(&self) -> u8 {
        self.values().iter().fold(0, |acc, &b| (acc << 1) | b as u8)
    }

    pub fn values(&self) -> [bool; 6] {
        [
            self.enable_hashjoin,
            self.enable_mergejoin,
            self.enable_nestloop,
            self.enable_seqscan,
            self.enable_indexscan,
            self.enable_indexonlyscan,
        ]
    }

    pub fn any_join(&self) -> bool {
        self.enable_hashjoin || self.enable_mergejoin || self.enable_nestloop
    }

    pub fn any_scan(&self) -> bool {
        self.enable_seqscan || self.enable_indexscan || self.enable_indexonlyscan
    }

    pub fn is_valid(&self) -> bool {
        self.any_join() && self.any_scan()
    }

    pub fn validate(&self) -> Result<(), DbmsError> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(DbmsError::InvalidKnobs(*self))
        }
    }

    /// `SET` statements that apply this vector to a session.
    pub fn set_statements(&self) -> Vec<String> {
        Self::NAMES
            .iter()
            .zip(self.values())
            .map(|(n, v)| format!("SET {n} = {};", if v { "on" } else { "off" }))
            .collect()
    }
}

impl Default for KnobVector {
    fn default() -> Self {
        KnobVector::ALL_ON
    }
}

impl std::fmt::Display for KnobVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:06b}", self.bits())
    }
}

/// Outcome of one measured execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ExecutionResult<S: Scalar> {
    /// Measured latency, or the imposed limit when `timed_out`.
    pub latency_ms: S,
    pub timed_out: bool,
    /// Plan the executor ran, when the backend reports it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_used: Option<PlanTree>,
    /// Latencies of the unmeasured warm-up runs.
    #[serde(default)]
    pub warmup_ms: Vec<S>,
}

impl<S: Scalar> ExecutionResult<S> {
    pub fn completed(latency_ms: S) -> Self {
        ExecutionResult { latency_ms, timed_out: false, plan_used: None, warmup_ms: Vec::new() }
    }

    pub fn timeout(limit_ms: S) -> Self {
        ExecutionResult { latency_ms: limit_ms, timed_out: true, plan_used: None, warmup_ms: Vec::new() }
    }
}

/// A database (or stand-in) that can plan and run queries.
pub trait DbmsClient {
    type Scalar: Scalar;

    /// Plans `sql` without running it.
    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError>;

    /// Runs `warmups` unmeasured executions followed by one measured one.
    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: Self::Scalar, warmups: u32)
        -> Result<ExecutionResult<Self::Scalar>, DbmsError>;

    /// Values of the first output column.
    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError>;
}

impl<C: DbmsClient + ?Sized> DbmsClient for &mut C {
    type Scalar = C::Scalar;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        (**self).explain(sql, knobs, hints)
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: C::Scalar, warmups: u32)
        -> Result<ExecutionResult<C::Scalar>, DbmsError> {
        (**self).execute(sql, hints, timeout_ms, warmups)
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        (**self).query_values(sql)
    }
}

static MEASUREMENT: Mutex<()> = Mutex::new(());

/// Process-wide lock held for the duration of every measured execution.
pub fn measurement_lock() -> MutexGuard<'static, ()> {
    MEASUREMENT.lock().unwrap_or_else(|p| p.into_inner())
}

/// Whether the planner honoured a complete hint set.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub requested: HintSet,
    pub planned: HintSet,
}

impl FidelityReport {
    pub fn holds(&self) -> bool {
        self.requested.canonical().ok().as_ref() == Some(&self.planned)
    }
}

/// Plans `sql` under `hints` and compares the resulting plan with them.
pub fn check_hint_fidelity<C: DbmsClient + ?Sized>(
    client: &mut C,
    sql: &str,
    hints: &HintSet,
) -> Result<FidelityReport, DbmsError> {
    let plan = client.explain(sql, None, Some(hints))?;
    let planned = transform_plan(&simplify(&plan)?);
    Ok(FidelityReport { requested: hints.clone(), planned })
}

pub(crate) fn check_timeout(timeout_ms: f64) -> Result<(), DbmsError> {
    if timeout_ms > 0.0 && timeout_ms.is_finite() {
        Ok(())
    } else {
        Err(DbmsError::InvalidTimeout(timeout_ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knob_bits_round_trip() {
        for bits in 0..64u8 {
            assert_eq!(KnobVector::from_bits(bits).bits(), bits);
        }
        assert_eq!(KnobVector::ALL_ON.to_string(), "111111");
        assert!(!KnobVector::from_bits(0b000111).is_valid());
        assert!(!KnobVector::from_bits(0b111000).is_valid());
        assert!(KnobVector::from_bits(0b100100).is_valid());
        let sets = KnobVector::from_bits(0b011111).set_statements();
        assert_eq!(sets[0], "SET enable_hashjoin = off;");
        assert_eq!(sets[5], "SET enable_indexonlyscan = on;");
    }
}
