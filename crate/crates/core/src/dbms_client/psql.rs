//! Live PostgreSQL access through the `psql` command-line client.
//!
//! Each call runs one `psql` session with one `-c` per statement, so `SET`
//! commands and the hinted statement share a session. Hints are injected as
//! a leading comment block, which requires the `pg_hint_plan` extension.

use std::collections::BTreeMap;
use std::marker::PhantomData;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use serde::Deserialize;

use crate::catalog_stats::{CatalogSnapshot, ColumnStats, MainValue, StatValue, StatisticsSource, StatsError, TableStats};
use crate::hint_codec::{inject_hints, HintSet};
use crate::plan_model::PlanTree;
use crate::scalar::Scalar;

use super::explain_json::parse_explain_json;
use super::{check_timeout, measurement_lock, DbmsClient, DbmsError, ExecutionResult, KnobVector};

#[derive(Debug, Clone)]
pub struct PsqlConfig {
    pub program: PathBuf,
    /// libpq connection string or URI.
    pub conninfo: String,
    /// Issue `LOAD 'pg_hint_plan'` at session start.
    pub load_hint_plan: bool,
}

impl PsqlConfig {
    pub fn new(conninfo: impl Into<String>) -> Self {
        PsqlConfig { program: PathBuf::from("psql"), conninfo: conninfo.into(), load_hint_plan: true }
    }
}

pub struct PsqlClient<S = f64> {
    pub config: PsqlConfig,
    _scalar: PhantomData<S>,
}

enum RunError {
    Spawn(String),
    Sql(String),
}

const TIMEOUT_MESSAGE: &str = "canceling statement due to statement timeout";

impl<S> PsqlClient<S> {
    pub fn new(config: PsqlConfig) -> Self {
        PsqlClient { config, _scalar: PhantomData }
    }

    fn run(&self, statements: &[String]) -> Result<String, RunError> {
        let mut cmd = Command::new(&self.config.program);
        cmd.args(["-X", "-q", "-A", "-t", "-v", "ON_ERROR_STOP=1", "-d", &self.config.conninfo]);
        if self.config.load_hint_plan {
            cmd.args(["-c", "LOAD 'pg_hint_plan';"]);
        }
        for s in statements {
            cmd.args(["-c", s]);
        }
        log::debug!("psql: {statements:?}");
        let out = cmd.output().map_err(|e| RunError::Spawn(format!("{}: {e}", self.config.program.display())))?;
        if out.status.success() {
            Ok(String::from_utf8_lossy(&out.stdout).into_owned())
        } else {
            let stderr = String::from_utf8_lossy(&out.stderr).trim().to_owned();
            if stderr.contains("could not connect") || stderr.contains("connection to server") {
                Err(RunError::Spawn(stderr))
            } else {
                Err(RunError::Sql(stderr))
            }
        }
    }

    fn statement(sql: &str, prefix: &str, hints: Option<&HintSet>) -> String {
        let body = format!("{prefix} {}", sql.trim().trim_end_matches(';'));
        match hints {
            Some(h) => inject_hints(&body, h),
            None => body,
        }
    }

    /// One run of `EXPLAIN ANALYZE`; `Ok(None)` on timeout.
    fn run_once(&self, sql: &str, hints: Option<&HintSet>, timeout_ms: f64) -> Result<Option<(f64, PlanTree)>, DbmsError> {
        let stmts = vec![
            format!("SET statement_timeout = {};", timeout_ms.ceil().max(1.0) as u64),
            Self::statement(sql, "EXPLAIN (ANALYZE, FORMAT JSON)", hints),
        ];
        let start = Instant::now();
        match self.run(&stmts) {
            Ok(out) => {
                let wall = start.elapsed().as_secs_f64() * 1000.0;
                let (plan, exec) = parse_explain_json(&out)?;
                Ok(Some((exec.unwrap_or(wall), plan)))
            }
            Err(RunError::Sql(e)) if e.contains(TIMEOUT_MESSAGE) => Ok(None),
            Err(RunError::Sql(e)) => Err(DbmsError::Execution(e)),
            Err(RunError::Spawn(e)) => Err(DbmsError::Connection(e)),
        }
    }
}

impl<S: Scalar> DbmsClient for PsqlClient<S> {
    type Scalar = S;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        let mut stmts = Vec::new();
        if let Some(k) = knobs {
            k.validate()?;
            stmts.extend(k.set_statements());
        }
        stmts.push(Self::statement(sql, "EXPLAIN (FORMAT JSON)", hints));
        match self.run(&stmts) {
            Ok(out) => Ok(parse_explain_json(&out)?.0),
            Err(RunError::Sql(e)) => Err(DbmsError::Planner(e)),
            Err(RunError::Spawn(e)) => Err(DbmsError::Connection(e)),
        }
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: S, warmups: u32)
        -> Result<ExecutionResult<S>, DbmsError> {
        let limit = timeout_ms.to_f64_lossy();
        check_timeout(limit)?;
        let _guard = measurement_lock();
        let mut warmup_ms = Vec::new();
        for _ in 0..warmups {
            let l = self.run_once(sql, hints, limit)?.map_or(limit, |(l, _)| l);
            warmup_ms.push(S::from_f64_lossy(l));
        }
        Ok(match self.run_once(sql, hints, limit)? {
            Some((l, plan)) => ExecutionResult {
                latency_ms: S::from_f64_lossy(l.min(limit)),
                timed_out: false,
                plan_used: Some(plan),
                warmup_ms,
            },
            None => ExecutionResult { latency_ms: timeout_ms, timed_out: true, plan_used: None, warmup_ms },
        })
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        match self.run(&[sql.to_owned()]) {
            Ok(out) => Ok(out.lines().filter(|l| !l.is_empty()).map(parse_scalar_text).collect()),
            Err(RunError::Sql(e)) => Err(DbmsError::Execution(e)),
            Err(RunError::Spawn(e)) => Err(DbmsError::Connection(e)),
        }
    }
}

const STATS_QUERY: &str = "SELECT coalesce(json_agg(r), '[]'::json) FROM (\
 SELECT c.relname AS table_name, c.reltuples::float8 AS row_count, a.attname AS column_name,\
 format_type(a.atttypid, a.atttypmod) AS data_type, s.n_distinct::float8 AS n_distinct,\
 s.most_common_vals::text AS mcv, s.most_common_freqs::float8[] AS mcf, s.histogram_bounds::text AS hist\
 FROM pg_class c JOIN pg_namespace n ON n.oid = c.relnamespace\
 JOIN pg_attribute a ON a.attrelid = c.oid AND a.attnum > 0 AND NOT a.attisdropped\
 LEFT JOIN pg_stats s ON s.schemaname = n.nspname AND s.tablename = c.relname AND s.attname = a.attname\
 WHERE n.nspname = 'public' AND c.relkind = 'r' ORDER BY c.relname, a.attnum) r";

impl<S> StatisticsSource for PsqlClient<S> {
    fn read_snapshot(&mut self) -> Result<CatalogSnapshot, StatsError> {
        let out = match self.run(&[STATS_QUERY.to_owned()]) {
            Ok(out) => out,
            Err(RunError::Sql(e)) | Err(RunError::Spawn(e)) => return Err(StatsError::Connection(e)),
        };
        let rows: Vec<PgStatsRow> =
            serde_json::from_str(out.trim()).map_err(|e| StatsError::SnapshotParse(format!("pg_stats rows: {e}")))?;
        Ok(snapshot_from_pg_rows(&rows))
    }
}

/// One row of the catalog query: a column with its `pg_stats` entry.
#[derive(Debug, Clone, Deserialize)]
pub struct PgStatsRow {
    pub table_name: String,
    pub row_count: f64,
    pub column_name: String,
    pub data_type: String,
    pub n_distinct: Option<f64>,
    pub mcv: Option<String>,
    pub mcf: Option<Vec<f64>>,
    pub hist: Option<String>,
}

const NUMERIC_TYPES: &[&str] = &["smallint", "integer", "bigint", "numeric", "real", "double precision", "decimal"];

pub fn is_numeric_type(data_type: &str) -> bool {
    NUMERIC_TYPES.iter().any(|t| data_type.starts_with(t))
}

fn parse_scalar_text(s: &str) -> StatValue {
    if let Ok(v) = s.parse::<i64>() {
        StatValue::Int(v)
    } else if let Ok(v) = s.parse::<f64>() {
        StatValue::Float(v)
    } else {
        StatValue::Text(s.to_owned())
    }
}

/// Splits a one-dimensional PostgreSQL array literal such as
/// `{a,"b c",NULL}`. `NULL` elements are dropped.
pub fn parse_pg_array(text: &str) -> Option<Vec<String>> {
    let inner = text.trim().strip_prefix('{')?.strip_suffix('}')?;
    let mut out = Vec::new();
    let mut chars = inner.chars().peekable();
    while chars.peek().is_some() {
        let mut item = String::new();
        let quoted = chars.peek() == Some(&'"');
        if quoted {
            chars.next();
            loop {
                match chars.next()? {
                    '\\' => item.push(chars.next()?),
                    '"' => break,
                    c => item.push(c),
                }
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c == ',' {
                    break;
                }
                item.push(c);
                chars.next();
            }
        }
        if quoted || item != "NULL" {
            out.push(item);
        }
        match chars.next() {
            None | Some(',') => {}
            Some(_) => return None,
        }
    }
    Some(out)
}

/// Builds a snapshot from catalog rows. Numeric ranges come from the
/// histogram endpoints widened by the most common values.
pub fn snapshot_from_pg_rows(rows: &[PgStatsRow]) -> CatalogSnapshot {
    let mut tables: BTreeMap<String, TableStats> = BTreeMap::new();
    for r in rows {
        let row_count = r.row_count.max(0.0).round() as u64;
        let table = tables.entry(r.table_name.clone()).or_insert_with(|| TableStats { row_count, columns: Vec::new() });
        let is_numeric = is_numeric_type(&r.data_type);
        let typed = |s: &String| if is_numeric { parse_scalar_text(s) } else { StatValue::Text(s.clone()) };
        let ndv = match r.n_distinct {
            Some(d) if d >= 0.0 => d.round() as u64,
            Some(d) => (-d * row_count as f64).round() as u64,
            None => 0,
        };
        let mcv: Vec<StatValue> = r.mcv.as_deref().and_then(parse_pg_array).unwrap_or_default().iter().map(typed).collect();
        let freqs = r.mcf.clone().unwrap_or_default();
        let main_values = mcv
            .iter()
            .zip(freqs)
            .map(|(v, f)| MainValue { value: v.clone(), frequency: f.clamp(0.0, 1.0) })
            .collect();
        let hist: Option<Vec<StatValue>> = r.hist.as_deref().and_then(parse_pg_array).map(|v| v.iter().map(typed).collect());
        let (min_max, histogram) = if is_numeric {
            let mut all: Vec<&StatValue> = mcv.iter().chain(hist.iter().flatten()).collect();
            all.sort_by(|a, b| a.total_cmp(b));
            let mm = all.first().zip(all.last()).map(|(a, b)| ((*a).clone(), (*b).clone()));
            (mm, hist)
        } else {
            (None, None)
        };
        table.columns.push(ColumnStats { name: r.column_name.clone(), is_numeric, ndv, main_values, min_max, histogram });
    }
    CatalogSnapshot { tables }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pg_array_literals() {
        assert_eq!(parse_pg_array("{1,2,3}").unwrap(), vec!["1", "2", "3"]);
        assert_eq!(parse_pg_array(r#"{"a b","x\"y",NULL,"NULL"}"#).unwrap(), vec!["a b", "x\"y", "NULL"]);
        assert_eq!(parse_pg_array("{}").unwrap(), Vec::<String>::new());
        assert!(parse_pg_array("1,2").is_none());
    }

    #[test]
    fn rows_to_snapshot() {
        let rows: Vec<PgStatsRow> = serde_json::from_str(
            r#"[{"table_name":"t","row_count":100,"column_name":"id","data_type":"integer","n_distinct":-1,
                 "mcv":null,"mcf":null,"hist":"{1,50,100}"},
                {"table_name":"t","row_count":100,"column_name":"kind","data_type":"text","n_distinct":2,
                 "mcv":"{movie,\"tv series\"}","mcf":[0.7,0.3],"hist":null}]"#,
        )
        .unwrap();
        let snap = snapshot_from_pg_rows(&rows);
        snap.validate().unwrap();
        let id = snap.column("t", "id").unwrap();
        assert_eq!(id.ndv, 100);
        assert_eq!(id.min_max, Some((StatValue::Int(1), StatValue::Int(100))));
        let kind = snap.column("t", "kind").unwrap();
        assert_eq!(kind.main_values[1].value, StatValue::Text("tv series".into()));
        assert!(kind.min_max.is_none());
    }

    #[test]
    fn missing_binary_is_a_connection_error() {
        let mut c: PsqlClient = PsqlClient::new(PsqlConfig {
            program: PathBuf::from("/nonexistent/psql"),
            conninfo: "dbname=x".into(),
            load_hint_plan: false,
        });
        assert!(matches!(c.explain( "SELECT 1", None, None), Err(DbmsError::Connection(_))));
        assert!(matches!(c.read_snapshot(), Err(StatsError::Connection(_))));
    }
}
