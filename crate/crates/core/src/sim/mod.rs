//! An in-memory stand-in for a PostgreSQL instance with `pg_hint_plan`.
//!
//! [`ToyDb`] generates a seeded movie database, keeps exact statistics,
//! plans queries with an estimate-driven cost model and "executes" plans by
//! pricing them with true cardinalities. Latency is therefore a deterministic
//! function of the plan, which makes labels, fixtures and selection accuracy
//! reproducible without a server.

pub mod data;
pub mod eval;
pub mod planner;

use std::collections::{BTreeSet, HashMap};
use std::marker::PhantomData;

use crate::catalog_stats::{
    CatalogSnapshot, ColumnStats, MainValue, StatValue, StatisticsSource, StatsError, TableStats, MAX_HIST_BOUNDS,
    MAX_MAIN_VALUES,
};
use crate::dbms_client::{check_timeout, DbmsClient, DbmsError, ExecutionResult, KnobVector};
use crate::hint_codec::{hints_to_plan, HintSet};
use crate::plan_model::{PlanTree, SimplifiedPlan};
use crate::scalar::Scalar;
use crate::schema::Schema;
use crate::sql::{normalize_sql, parse_select, SelectItem};

pub use data::{ColumnData, Table, ToyConfig};
use eval::{bind, cell, BoundQuery, Cell, Executor};
use planner::{optimize, plan_cost, render, CostContext, Estimator, Truth};

/// Milliseconds of simulated latency per unit of true plan cost.
pub const DEFAULT_MS_PER_COST: f64 = 0.002;
/// Fixed per-query overhead in milliseconds.
pub const BASE_LATENCY_MS: f64 = 0.2;
/// Warm-up runs are slower by this factor.
pub const COLD_FACTOR: f64 = 1.1;

/// Two-table starting points for workload synthesis on the toy schema.
pub const SEED_QUERIES: [&str; 5] = [
    "SELECT count(*) FROM mc, t WHERE mc.movie_id = t.id",
    "SELECT count(*) FROM mk, k WHERE mk.keyword_id = k.id AND k.keyword = 'sequel'",
    "SELECT count(*) FROM mi, it WHERE mi.info_type_id = it.id AND it.info = 'genres'",
    "SELECT min(t.title) FROM t, kt WHERE t.kind_id = kt.id AND t.production_year > 2005",
    "SELECT count(*) FROM mc, cn WHERE mc.company_id = cn.id AND cn.country_code = '[us]'",
];

/// Exact statistics of every column, shaped like `pg_stats`.
pub fn analyze(tables: &[Table]) -> CatalogSnapshot {
    let mut snapshot = CatalogSnapshot::default();
    for t in tables {
        let rows = t.rows();
        let columns = t
            .columns
            .iter()
            .map(|(name, data)| {
                let mut values: Vec<StatValue> = match data {
                    ColumnData::Int(v) => v.iter().map(|&x| StatValue::Int(x)).collect(),
                    ColumnData::Text(v) => v.iter().map(|x| StatValue::Text(x.clone())).collect(),
                };
                values.sort_by(StatValue::total_cmp);
                let mut counts: Vec<(StatValue, usize)> = Vec::new();
                for v in &values {
                    match counts.last_mut() {
                        Some((last, c)) if last == v => *c += 1,
                        _ => counts.push((v.clone(), 1)),
                    }
                }
                let ndv = counts.len() as u64;
                let mut common: Vec<&(StatValue, usize)> = counts.iter().filter(|(_, c)| *c > 1).collect();
                common.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.total_cmp(&b.0)));
                let main_values = common
                    .iter()
                    .take(MAX_MAIN_VALUES)
                    .map(|(v, c)| MainValue { value: v.clone(), frequency: *c as f64 / rows as f64 })
                    .collect();
                let is_numeric = matches!(data, ColumnData::Int(_));
                let min_max = values.first().zip(values.last()).map(|(a, b)| (a.clone(), b.clone()));
                let histogram = (is_numeric && ndv > 1).then(|| {
                    let last = values.len() - 1;
                    let k = MAX_HIST_BOUNDS - 1;
                    (0..=k).map(|i| values[i * last / k].clone()).collect()
                });
                ColumnStats { name: name.clone(), is_numeric, ndv, main_values, min_max, histogram }
            })
            .collect();
        snapshot.tables.insert(t.name.clone(), TableStats { row_count: rows as u64, columns });
    }
    snapshot
}

fn cell_value(c: Cell<'_>) -> StatValue {
    match c {
        Cell::Int(v) => StatValue::Int(v),
        Cell::Text(s) => StatValue::Text(s.to_owned()),
    }
}

/// Simulated database client.
pub struct ToyDb<S = f64> {
    tables: Vec<Table>,
    schema: Schema,
    stats: CatalogSnapshot,
    pub ms_per_cost: f64,
    card_cache: HashMap<String, HashMap<u32, f64>>,
    _scalar: PhantomData<fn() -> S>,
}

impl<S> ToyDb<S> {
    pub fn new(config: ToyConfig) -> Self {
        let tables = data::generate(&config);
        let schema = data::schema_of(&tables);
        let stats = analyze(&tables);
        ToyDb { tables, schema, stats, ms_per_cost: DEFAULT_MS_PER_COST, card_cache: HashMap::new(), _scalar: PhantomData }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn snapshot(&self) -> &CatalogSnapshot {
        &self.stats
    }

    fn bind(&self, sql: &str) -> Result<BoundQuery, DbmsError> {
        let q = parse_select(sql).map_err(|e| DbmsError::Planner(e.to_string()))?;
        let b = bind(&q, &self.tables).map_err(|e| DbmsError::Planner(e.to_string()))?;
        if b.aliases.len() > 16 {
            return Err(DbmsError::Planner("too many tables".into()));
        }
        Ok(b)
    }

    /// Plan chosen for `sql`: the hinted plan when hints are given, else the
    /// cheapest plan under the estimated cardinalities and `knobs`.
    pub fn plan(&self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        let bound = self.bind(sql)?;
        let exec = Executor::new(&bound, &self.tables);
        let knobs = knobs.copied().unwrap_or_default();
        knobs.validate()?;
        let ctx = CostContext::new(&exec, knobs);
        let mut est = Estimator::new(&exec, &self.stats);
        let simple = match hints {
            Some(h) => forced_plan(h, &bound)?,
            None => SimplifiedPlan::new(optimize(&ctx, &exec, &mut est)).map_err(DbmsError::Plan)?,
        };
        let planning_ms = 0.05 * (1u64 << bound.aliases.len().min(12)) as f64 / 4.0;
        Ok(render(&ctx, &simple, &mut est, planning_ms))
    }

    /// Latency of running `plan` with exact cardinalities.
    pub fn plan_latency_ms(&mut self, sql: &str, plan: &SimplifiedPlan) -> Result<f64, DbmsError> {
        let bound = self.bind(sql)?;
        check_aliases(plan, &bound)?;
        let key = normalize_sql(sql);
        let memo = self.card_cache.remove(&key).unwrap_or_default();
        let mut exec = Executor::new(&bound, &self.tables).with_memo(memo);
        let ctx = CostContext::new(&exec, KnobVector::ALL_ON);
        let (cost, _) = plan_cost(&ctx, plan.root(), &mut Truth { exec: &mut exec });
        self.card_cache.insert(key, exec.into_memo());
        Ok(BASE_LATENCY_MS + cost * self.ms_per_cost)
    }

    /// Latency the hinted (or default) plan would take, ignoring timeouts.
    pub fn true_latency_ms(&mut self, sql: &str, hints: Option<&HintSet>) -> Result<f64, DbmsError> {
        let tree = self.plan(sql, None, hints)?;
        let simple = crate::plan_model::simplify(&tree).map_err(DbmsError::Plan)?;
        self.plan_latency_ms(sql, &simple)
    }

    /// Exact result size of the join over all FROM entries.
    pub fn true_cardinality(&self, sql: &str) -> Result<f64, DbmsError> {
        let bound = self.bind(sql)?;
        let mut exec = Executor::new(&bound, &self.tables);
        Ok(exec.true_card((1u32 << bound.aliases.len()) - 1))
    }

    fn values(&self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        let bound = self.bind(sql)?;
        let exec = Executor::new(&bound, &self.tables);
        let item = bound.query.projection.first().cloned().unwrap_or(SelectItem::Wildcard);
        let full = (1u32 << bound.aliases.len()) - 1;
        let (pos, col, func) = match &item {
            SelectItem::CountStar => {
                let mut exec = exec;
                return Ok(vec![StatValue::Int(exec.true_card(full) as i64)]);
            }
            SelectItem::Wildcard => (0, 0, None),
            SelectItem::Column { column, .. } | SelectItem::Aggregate { arg: column, .. } => {
                let pos = bound.aliases.iter().position(|a| Some(a) == column.qualifier.as_ref()).unwrap();
                let col = exec.table(pos).column_index(&column.column).unwrap();
                let func = match &item {
                    SelectItem::Aggregate { func, .. } => Some(func.to_ascii_lowercase()),
                    _ => None,
                };
                (pos, col, func)
            }
        };
        let table = exec.table(pos);
        let weighted: Vec<(StatValue, f64)> = exec
            .row_weights(pos)
            .into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(r, w)| (cell_value(cell(table, col, r as usize)), w))
            .collect();
        let out = match func.as_deref() {
            None if bound.query.distinct => {
                let set: BTreeSet<OrdValue> = weighted.into_iter().map(|(v, _)| OrdValue(v)).collect();
                set.into_iter().map(|v| v.0).collect()
            }
            None => {
                let total: f64 = weighted.iter().map(|(_, w)| w).sum();
                if total > 1.0e6 {
                    return Err(DbmsError::Execution(format!("result of {total} rows is too large")));
                }
                weighted.into_iter().flat_map(|(v, w)| std::iter::repeat_n(v, w as usize)).collect()
            }
            Some("min") => weighted.into_iter().map(|(v, _)| v).min_by(StatValue::total_cmp).into_iter().collect(),
            Some("max") => weighted.into_iter().map(|(v, _)| v).max_by(StatValue::total_cmp).into_iter().collect(),
            Some("count") => vec![StatValue::Int(weighted.iter().map(|(_, w)| w).sum::<f64>() as i64)],
            Some(f @ ("sum" | "avg")) => {
                let (mut sum, mut n) = (0.0, 0.0);
                for (v, w) in &weighted {
                    let x = v.as_f64().ok_or_else(|| DbmsError::Execution(format!("{f} over text")))?;
                    sum += x * w;
                    n += w;
                }
                if n == 0.0 {
                    Vec::new()
                } else if f == "sum" {
                    vec![StatValue::Float(sum)]
                } else {
                    vec![StatValue::Float(sum / n)]
                }
            }
            Some(f) => return Err(DbmsError::Execution(format!("unsupported aggregate {f}"))),
        };
        Ok(out)
    }
}

impl Default for ToyDb<f64> {
    fn default() -> Self {
        ToyDb::new(ToyConfig::default())
    }
}

#[derive(PartialEq)]
struct OrdValue(StatValue);

impl Eq for OrdValue {}

impl PartialOrd for OrdValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdValue {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn check_aliases(plan: &SimplifiedPlan, bound: &BoundQuery) -> Result<(), DbmsError> {
    let mut planned: Vec<&str> = plan.table_aliases().iter().map(String::as_str).collect();
    let mut wanted: Vec<&str> = bound.aliases.iter().map(String::as_str).collect();
    planned.sort_unstable();
    wanted.sort_unstable();
    if planned != wanted {
        return Err(DbmsError::Planner(format!(
            "hinted tables [{}] do not match query tables [{}]",
            planned.join(", "),
            wanted.join(", ")
        )));
    }
    Ok(())
}

fn forced_plan(h: &HintSet, bound: &BoundQuery) -> Result<SimplifiedPlan, DbmsError> {
    let plan = hints_to_plan(h).map_err(|e| DbmsError::Planner(e.to_string()))?;
    check_aliases(&plan, bound)?;
    Ok(plan)
}

impl<S: Scalar> DbmsClient for ToyDb<S> {
    type Scalar = S;

    fn explain(&mut self, sql: &str, knobs: Option<&KnobVector>, hints: Option<&HintSet>) -> Result<PlanTree, DbmsError> {
        self.plan(sql, knobs, hints)
    }

    fn execute(&mut self, sql: &str, hints: Option<&HintSet>, timeout_ms: S, warmups: u32)
        -> Result<ExecutionResult<S>, DbmsError> {
        let limit = timeout_ms.to_f64_lossy();
        check_timeout(limit)?;
        let tree = self.plan(sql, None, hints)?;
        let simple = crate::plan_model::simplify(&tree).map_err(DbmsError::Plan)?;
        let latency = self.plan_latency_ms(sql, &simple)?;
        let warmup_ms = (0..warmups).map(|_| S::from_f64_lossy((latency * COLD_FACTOR).min(limit))).collect();
        let mut r = if latency > limit {
            ExecutionResult::timeout(timeout_ms)
        } else {
            ExecutionResult::completed(S::from_f64_lossy(latency))
        };
        r.plan_used = Some(tree);
        r.warmup_ms = warmup_ms;
        Ok(r)
    }

    fn query_values(&mut self, sql: &str) -> Result<Vec<StatValue>, DbmsError> {
        self.values(sql)
    }
}

impl<S> StatisticsSource for ToyDb<S> {
    fn read_snapshot(&mut self) -> Result<CatalogSnapshot, StatsError> {
        Ok(self.stats.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate_search::all_bao_arms;
    use crate::hint_codec::transform_plan;
    use crate::plan_model::simplify;

    const Q: &str = "SELECT MIN(t.title) FROM k, mk, t, mi WHERE k.keyword LIKE '%sequel%' AND k.id = mk.keyword_id \
                     AND mk.movie_id = t.id AND t.id = mi.movie_id AND t.production_year > 2000;";

    fn ints<'a>(db: &'a ToyDb, table: &str, col: &str) -> &'a [i64] {
        let t = db.tables().iter().find(|t| t.name == table).unwrap();
        match &t.columns[t.column_index(col).unwrap()].1 {
            ColumnData::Int(v) => v,
            ColumnData::Text(_) => panic!("text column"),
        }
    }

    fn texts<'a>(db: &'a ToyDb, table: &str, col: &str) -> &'a [String] {
        let t = db.tables().iter().find(|t| t.name == table).unwrap();
        match &t.columns[t.column_index(col).unwrap()].1 {
            ColumnData::Text(v) => v,
            ColumnData::Int(_) => panic!("int column"),
        }
    }

    #[test]
    fn analyzed_snapshot_is_valid() {
        let db: ToyDb = ToyDb::default();
        let snap = db.snapshot();
        snap.validate().unwrap();
        let year = snap.column("t", "production_year").unwrap();
        assert_eq!(year.histogram.as_ref().unwrap().len(), MAX_HIST_BOUNDS);
        assert!(year.main_values.len() <= MAX_MAIN_VALUES);
        assert_eq!(snap.tables["mk"].row_count, 5000);
        let ids = snap.column("t", "id").unwrap();
        assert_eq!(ids.ndv, 2000);
        assert!(ids.main_values.is_empty());
    }

    #[test]
    fn generation_is_seeded() {
        let a: ToyDb = ToyDb::new(ToyConfig { seed: 7, scale: 0.2 });
        let b: ToyDb = ToyDb::new(ToyConfig { seed: 7, scale: 0.2 });
        let c: ToyDb = ToyDb::new(ToyConfig { seed: 8, scale: 0.2 });
        assert_eq!(a.tables(), b.tables());
        assert_ne!(a.tables(), c.tables());
    }

    #[test]
    fn exact_cardinality_matches_nested_loops() {
        let db: ToyDb = ToyDb::new(ToyConfig { seed: 3, scale: 0.3 });
        let (mk_movie, mk_kw) = (ints(&db, "mk", "movie_id"), ints(&db, "mk", "keyword_id"));
        let (t_id, t_year) = (ints(&db, "t", "id"), ints(&db, "t", "production_year"));
        let (mi_movie, mi_type) = (ints(&db, "mi", "movie_id"), ints(&db, "mi", "info_type_id"));
        let mut expected = 0u64;
        for i in 0..mk_movie.len() {
            if mk_kw[i] > 10 {
                continue;
            }
            for j in 0..t_id.len() {
                if t_id[j] != mk_movie[i] || t_year[j] <= 1990 {
                    continue;
                }
                expected += (0..mi_movie.len()).filter(|&m| mi_movie[m] == t_id[j] && mi_type[m] < 4).count() as u64;
            }
        }
        let sql = "SELECT count(*) FROM mk, t, mi WHERE mk.keyword_id <= 10 AND mk.movie_id = t.id \
                   AND t.production_year > 1990 AND mi.movie_id = t.id AND mi.info_type_id < 4 \
                   AND mk.movie_id = mi.movie_id";
        assert!(expected > 0);
        assert_eq!(db.true_cardinality(sql).unwrap(), expected as f64);
        let mut db = db;
        assert_eq!(db.query_values(sql).unwrap(), vec![StatValue::Int(expected as i64)]);
    }

    #[test]
    fn distinct_values_are_sorted_and_joined() {
        let mut db: ToyDb = ToyDb::new(ToyConfig { seed: 3, scale: 0.3 });
        let sql = "SELECT DISTINCT cn.country_code FROM cn, mc WHERE cn.id = mc.company_id AND mc.company_type_id = 3";
        let got = db.query_values(sql).unwrap();
        let (cc, mc_company, mc_type) =
            (texts(&db, "cn", "country_code"), ints(&db, "mc", "company_id"), ints(&db, "mc", "company_type_id"));
        let mut expected: Vec<String> = (0..mc_company.len())
            .filter(|&i| mc_type[i] == 3)
            .map(|i| cc[mc_company[i] as usize - 1].clone())
            .collect();
        expected.sort();
        expected.dedup();
        let expected: Vec<StatValue> = expected.into_iter().map(StatValue::Text).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn hinted_explain_reproduces_the_default_plan() {
        let mut db: ToyDb = ToyDb::default();
        let default = simplify(&db.explain(Q, None, None).unwrap()).unwrap();
        let h = transform_plan(&default);
        let forced = simplify(&db.explain(Q, None, Some(&h)).unwrap()).unwrap();
        assert_eq!(default, forced);
    }

    #[test]
    fn disabled_methods_are_avoided() {
        let mut db: ToyDb = ToyDb::default();
        for arm in all_bao_arms() {
            let h = transform_plan(&simplify(&db.explain(Q, Some(&arm.knobs), None).unwrap()).unwrap());
            let k = arm.knobs;
            for j in &h.join_hints {
                let on = match j.join {
                    crate::plan_model::JoinType::NestLoop => k.enable_nestloop,
                    crate::plan_model::JoinType::HashJoin => k.enable_hashjoin,
                    crate::plan_model::JoinType::MergeJoin => k.enable_mergejoin,
                };
                assert!(on, "arm {} used disabled {}", arm.id, j.join);
            }
        }
    }

    #[test]
    fn mismatched_hints_are_rejected() {
        let mut db: ToyDb = ToyDb::default();
        let h = crate::hint_codec::parse_hints("SeqScan(k) SeqScan(mk) HashJoin(k mk) Leading((k mk))").unwrap();
        assert!(matches!(db.explain(Q, None, Some(&h)), Err(DbmsError::Planner(_))));
    }

    #[test]
    fn execution_respects_the_timeout() {
        let mut db: ToyDb = ToyDb::default();
        let full = db.execute(Q, None, 1.0e9, 2).unwrap();
        assert!(!full.timed_out);
        assert_eq!(full.warmup_ms.len(), 2);
        assert!(full.plan_used.is_some());
        let limit = full.latency_ms / 2.0;
        let cut = db.execute(Q, None, limit, 0).unwrap();
        assert!(cut.timed_out);
        assert_eq!(cut.latency_ms, limit);
        let exact = db.execute(Q, None, full.latency_ms, 0).unwrap();
        assert!(!exact.timed_out);
        assert!(db.execute(Q, None, 0.0, 0).is_err());
    }
}
