//! Query synthesis by table extension and value filling, and emission of
//! generative and selective fine-tuning records.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::backend::{BackendError, GenerationBackend, GenerationRequest};
use crate::candidate_search::Provenance;
use crate::catalog_stats::{render_stats, QueryStats, StatValue};
use crate::dbms_client::{DbmsClient, DbmsError};
use crate::hint_codec::{parse_hints, render_hints};
use crate::prompts::{
    extension_prompt, generative_prompt, prompt_query, selective_prompt, EXTENSION_SYSTEM, PROMPT_VERSION,
};
use crate::scalar::Scalar;
use crate::schema::{ColumnType, Schema};
use crate::sql::{parse_select, CmpOp, ColumnRef, Expr, Literal, Operand, SelectItem, SelectQuery, TableRef};
use crate::label_harness::LabeledQuery;

pub const DATASET_FORMAT: &str = "planhint-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("base query is not valid against the schema: {0}")]
    InvalidBase(String),
    #[error("invalid extension: {0}")]
    InvalidExtension(String),
    #[error("fill query returned no values")]
    NoFillValues,
    #[error("labeled query was discarded")]
    Discarded,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Dbms(#[from] DbmsError),
    #[error("dataset file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A query with one unfilled predicate and the query that lists its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub sql_with_placeholder: String,
    pub fill_query: String,
}

/// Resolves every column of `q` against `schema`; unqualified columns must
/// be unambiguous.
pub fn check_against_schema(q: &SelectQuery, schema: &Schema) -> Result<(), String> {
    for t in &q.from {
        if schema.table(&t.table).is_none() {
            return Err(format!("unknown table `{}`", t.table));
        }
    }
    let mut cols: Vec<&ColumnRef> = q.selection.as_ref().map(Expr::columns).unwrap_or_default();
    for p in &q.projection {
        if let SelectItem::Column { column, .. } | SelectItem::Aggregate { arg: column, .. } = p {
            cols.push(column);
        }
    }
    for c in cols {
        match &c.qualifier {
            Some(a) => {
                let table = q.table_for(a).ok_or_else(|| format!("unknown alias `{a}`"))?;
                if schema.column_type(table, &c.column).is_none() {
                    return Err(format!("unknown column `{a}.{}`", c.column));
                }
            }
            None => {
                let owners = q.from.iter().filter(|t| schema.column_type(&t.table, &c.column).is_some()).count();
                if owners != 1 {
                    return Err(format!("column `{}` matches {owners} tables", c.column));
                }
            }
        }
    }
    Ok(())
}

fn placeholder_column(e: &Expr) -> Option<&ColumnRef> {
    match e {
        Expr::Compare { left: Operand::Column(c), right: Operand::Literal(Literal::Placeholder), .. }
        | Expr::Compare { left: Operand::Literal(Literal::Placeholder), right: Operand::Column(c), .. } => Some(c),
        _ => None,
    }
}

fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let t = t.strip_prefix("```sql").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

/// Checks a proposed extension of `base` and derives its fill query.
pub fn validate_extension(base: &SelectQuery, proposal: &str, schema: &Schema) -> Result<QueryTemplate, DatasetError> {
    let bad = |m: String| DatasetError::InvalidExtension(m);
    let ext = parse_select(strip_fences(proposal)).map_err(|e| bad(e.to_string()))?;
    check_against_schema(&ext, schema).map_err(bad)?;
    for t in &base.from {
        if !ext.from.contains(t) {
            return Err(bad(format!("table `{}` of the base query was dropped", t.alias)));
        }
    }
    let new: Vec<&TableRef> = ext.from.iter().filter(|t| !base.from.contains(t)).collect();
    let [new] = new.as_slice() else {
        return Err(bad(format!("expected exactly one new table, got {}", new.len())));
    };
    let ext_conjuncts: Vec<String> = ext.conjuncts().iter().map(|c| c.to_string()).collect();
    for c in base.conjuncts() {
        if !ext_conjuncts.contains(&c.to_string()) {
            return Err(bad(format!("base predicate `{c}` was dropped")));
        }
    }
    let qualify = |c: &ColumnRef| -> Option<String> {
        c.qualifier.clone().or_else(|| {
            ext.from.iter().find(|t| schema.column_type(&t.table, &c.column).is_some()).map(|t| t.alias.clone())
        })
    };
    let joined = ext.conjuncts().iter().any(|c| match c {
        Expr::Compare { left: Operand::Column(l), op: CmpOp::Eq, right: Operand::Column(r) } => {
            let (la, ra) = (qualify(l), qualify(r));
            let is_new = |a: &Option<String>| a.as_deref() == Some(new.alias.as_str());
            is_new(&la) != is_new(&ra)
        }
        _ => false,
    });
    if !joined {
        return Err(bad(format!("table `{}` is not joined to the base query", new.alias)));
    }
    let placeholders: Vec<&Expr> = ext.conjuncts().into_iter().filter(|c| c.has_placeholder()).collect();
    let [slot] = placeholders.as_slice() else {
        return Err(bad(format!("expected one placeholder predicate, got {}", placeholders.len())));
    };
    let col = placeholder_column(slot).ok_or_else(|| bad(format!("placeholder predicate `{slot}` is not `column op %s`")))?;
    if qualify(col).as_deref() != Some(new.alias.as_str()) {
        return Err(bad(format!("placeholder column `{col}` is not on the new table")));
    }
    let column = ColumnRef { qualifier: Some(new.alias.clone()), column: col.column.clone() };
    let rest: Vec<Expr> = ext.conjuncts().into_iter().filter(|c| !c.has_placeholder()).cloned().collect();
    let fill = SelectQuery {
        distinct: true,
        projection: vec![SelectItem::Column { column, alias: None }],
        from: ext.from.clone(),
        selection: Expr::and(rest),
    };
    Ok(QueryTemplate { sql_with_placeholder: ext.to_sql(), fill_query: fill.to_sql() })
}

/// Asks the backend to join one more table to `base_sql`.
pub fn extend_query<B: GenerationBackend + ?Sized>(
    base_sql: &str,
    schema: &Schema,
    backend: &mut B,
) -> Result<QueryTemplate, DatasetError> {
    let base = parse_select(base_sql).map_err(|e| DatasetError::InvalidBase(e.to_string()))?;
    check_against_schema(&base, schema).map_err(DatasetError::InvalidBase)?;
    let req = GenerationRequest {
        system: Some(EXTENSION_SYSTEM.to_owned()),
        prompt: extension_prompt(&schema.describe(), &base.to_sql()),
        temperature: 0.0,
        n: 1,
        max_tokens: Some(1024),
    };
    let out = backend.generate(&req)?;
    let proposal = out.first().ok_or_else(|| DatasetError::InvalidExtension("empty response".into()))?;
    validate_extension(&base, proposal, schema)
}

/// Offline extension backend: follows the `choice`-th foreign key that
/// leads to a table not yet in the query and templates a non-key column.
/// `choice` advances after every call.
#[derive(Debug, Clone)]
pub struct SchemaWalkBackend {
    pub schema: Schema,
    pub choice: usize,
}

impl SchemaWalkBackend {
    pub fn new(schema: Schema) -> Self {
        SchemaWalkBackend { schema, choice: 0 }
    }

    fn propose(&self, sql: &str) -> Result<String, BackendError> {
        let proto = |m: String| BackendError::Protocol(m);
        let mut q = parse_select(sql).map_err(|e| proto(e.to_string()))?;
        let present: BTreeSet<&str> = q.from.iter().map(|t| t.table.as_str()).collect();
        let mut options = Vec::new();
        for t in &q.from {
            for f in self.schema.edges_of(&t.table) {
                let (other, mine, theirs) = if f.table == t.table {
                    (&f.ref_table, &f.column, &f.ref_column)
                } else {
                    (&f.table, &f.ref_column, &f.column)
                };
                if !present.contains(other.as_str()) && !options.iter().any(|(o, ..): &(String, _, _, _)| o == other) {
                    options.push((other.clone(), t.alias.clone(), mine.clone(), theirs.clone()));
                }
            }
        }
        if options.is_empty() {
            return Err(proto("no foreign key leads outside the query".into()));
        }
        let (table, alias, mine, theirs) = options[self.choice % options.len()].clone();
        let fk_cols: BTreeSet<&str> =
            self.schema.foreign_keys.iter().filter(|f| f.table == table).map(|f| f.column.as_str()).collect();
        let cols = &self.schema.table(&table).expect("schema table").columns;
        let pick = cols
            .iter()
            .find(|c| c.ty == ColumnType::Text && c.name != "id")
            .or_else(|| cols.iter().find(|c| c.name != "id" && !fk_cols.contains(c.name.as_str())))
            .or_else(|| cols.first())
            .ok_or_else(|| proto(format!("table `{table}` has no columns")))?;
        q.from.push(TableRef { table: table.clone(), alias: table.clone() });
        let mut conj: Vec<Expr> = q.conjuncts().into_iter().cloned().collect();
        conj.push(Expr::Compare {
            left: Operand::Column(ColumnRef::new(&alias, &mine)),
            op: CmpOp::Eq,
            right: Operand::Column(ColumnRef::new(&table, &theirs)),
        });
        conj.push(Expr::Compare {
            left: Operand::Column(ColumnRef::new(&table, &pick.name)),
            op: CmpOp::Eq,
            right: Operand::Literal(Literal::Placeholder),
        });
        q.selection = Expr::and(conj);
        Ok(q.to_sql())
    }
}

impl GenerationBackend for SchemaWalkBackend {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let sql = prompt_query(&req.prompt).ok_or_else(|| BackendError::Protocol("prompt has no query".into()))?;
        let sql = self.propose(sql);
        self.choice = self.choice.wrapping_add(1);
        Ok(vec![sql?; req.n])
    }
}

fn literal_of(v: &StatValue) -> Literal {
    match v {
        StatValue::Int(i) => Literal::Int(*i),
        StatValue::Float(f) => Literal::Float(*f),
        StatValue::Text(s) => Literal::Str(s.clone()),
    }
}

/// Substitutes up to `k` distinct fill values into the template. Values are
/// drawn from `rng` when more than `k` exist and kept in sorted order.
pub fn fill_template<C: DbmsClient + ?Sized, R: Rng + ?Sized>(
    tpl: &QueryTemplate,
    client: &mut C,
    k: usize,
    rng: &mut R,
) -> Result<Vec<String>, DatasetError> {
    if k == 0 {
        return Err(DatasetError::InvalidArgument("k must be at least 1".into()));
    }
    let template = parse_select(&tpl.sql_with_placeholder).map_err(|e| DatasetError::InvalidExtension(e.to_string()))?;
    let mut values = client.query_values(&tpl.fill_query)?;
    values.sort_by(StatValue::total_cmp);
    values.dedup();
    if values.is_empty() {
        return Err(DatasetError::NoFillValues);
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    if values.len() > k {
        idx.shuffle(rng);
        idx.truncate(k);
        idx.sort_unstable();
    }
    Ok(idx
        .into_iter()
        .map(|i| {
            let mut q = template.clone();
            if let Some(sel) = &mut q.selection {
                sel.fill_placeholder(&literal_of(&values[i]));
            }
            q.to_sql()
        })
        .collect())
}

/// Grows a workload from `seeds`, breadth first: every query is extended by
/// one table and the template filled with up to `k` values, until `target`
/// distinct queries exist. Seeds come first in the result. Extensions that
/// fail validation or have no fill values are skipped.
pub fn synthesize_queries<B, C, R>(
    seeds: &[String],
    schema: &Schema,
    backend: &mut B,
    client: &mut C,
    target: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<String>, DatasetError>
where
    B: GenerationBackend + ?Sized,
    C: DbmsClient + ?Sized,
    R: Rng + ?Sized,
{
    let mut seen = BTreeSet::new();
    let mut out: Vec<String> = Vec::new();
    for s in seeds {
        let q = parse_select(s).map_err(|e| DatasetError::InvalidBase(e.to_string()))?;
        check_against_schema(&q, schema).map_err(DatasetError::InvalidBase)?;
        if seen.insert(q.to_sql()) {
            out.push(q.to_sql());
        }
    }
    let mut next = 0;
    while out.len() < target && next < out.len() {
        let base = out[next].clone();
        next += 1;
        let tpl = match extend_query(&base, schema, backend) {
            Ok(t) => t,
            Err(e @ (DatasetError::InvalidExtension(_) | DatasetError::Backend(_))) => {
                log::debug!("no extension for `{base}`: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let filled = match fill_template(&tpl, client, k, rng) {
            Ok(f) => f,
            Err(DatasetError::NoFillValues) => continue,
            Err(e) => return Err(e),
        };
        for q in filled {
            if out.len() < target && seen.insert(q.clone()) {
                out.push(q);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Generative,
    Selective,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub query_id: String,
    pub benchmark: String,
    pub n_tables: usize,
    /// Where the labeled candidate came from, e.g. `arm:3` or `sample:0`.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub kind: RecordKind,
    pub input_text: String,
    pub output_text: String,
    pub meta: RecordMeta,
}

/// Identifies a query inside a benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRef {
    pub query_id: String,
    pub benchmark: String,
}

fn provenance_text(p: Provenance) -> String {
    match p {
        Provenance::Arm(i) => format!("arm:{i}"),
        Provenance::Sample(i) => format!("sample:{i}"),
        Provenance::Default => "default".into(),
    }
}

fn labeled_parts<S: Scalar>(labeled: &LabeledQuery<S>) -> Result<(usize, RecordMeta), DatasetError> {
    let idx = match labeled.optimal_index {
        Some(i) if !labeled.discarded && i < labeled.candidates.len() => i,
        _ => return Err(DatasetError::Discarded),
    };
    let entry = &labeled.candidates.entries[idx];
    let meta = RecordMeta {
        query_id: String::new(),
        benchmark: String::new(),
        n_tables: entry.hint.scan_hints.len(),
        provenance: provenance_text(entry.provenance),
    };
    Ok((idx, meta))
}

/// Training example mapping (query, statistics) to the best hint set.
pub fn build_generative_record<S: Scalar>(
    q: &QueryRef,
    stats: &QueryStats,
    labeled: &LabeledQuery<S>,
) -> Result<DatasetRecord, DatasetError> {
    let (idx, meta) = labeled_parts(labeled)?;
    Ok(DatasetRecord {
        kind: RecordKind::Generative,
        input_text: generative_prompt(&labeled.query, &render_stats(stats)),
        output_text: render_hints(&labeled.candidates.entries[idx].hint),
        meta: RecordMeta { query_id: q.query_id.clone(), benchmark: q.benchmark.clone(), ..meta },
    })
}

/// Training example mapping (query, statistics, candidates) to the index of
/// the best candidate.
pub fn build_selective_record<S: Scalar>(
    q: &QueryRef,
    stats: &QueryStats,
    labeled: &LabeledQuery<S>,
) -> Result<DatasetRecord, DatasetError> {
    let (idx, meta) = labeled_parts(labeled)?;
    Ok(DatasetRecord {
        kind: RecordKind::Selective,
        input_text: selective_prompt(&labeled.query, &render_stats(stats), &labeled.candidates.hints()),
        output_text: idx.to_string(),
        meta: RecordMeta { query_id: q.query_id.clone(), benchmark: q.benchmark.clone(), ..meta },
    })
}

/// Checks the output of a record: generative outputs must decode to a plan,
/// selective outputs must be an index below `n_candidates`.
pub fn validate_record(r: &DatasetRecord, n_candidates: Option<usize>) -> Result<(), String> {
    match r.kind {
        RecordKind::Generative => {
            let h = parse_hints(&r.output_text).map_err(|e| e.to_string())?;
            crate::hint_codec::hints_to_plan(&h).map_err(|e| e.to_string())?;
            Ok(())
        }
        RecordKind::Selective => {
            if r.output_text.is_empty() || !r.output_text.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("`{}` is not a decimal index", r.output_text));
            }
            let i: usize = r.output_text.parse().map_err(|e| format!("{e}"))?;
            match n_candidates {
                Some(n) if i >= n => Err(format!("index {i} out of range for {n} candidates")),
                _ => Ok(()),
            }
        }
    }
}

/// Appends records as JSON lines.
pub fn append_records(path: &Path, records: &[DatasetRecord]) -> Result<(), DatasetError> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Description of the record file for downstream fine-tuning jobs.
pub fn dataset_schema_document() -> serde_json::Value {
    json!({
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "prompt_version": PROMPT_VERSION,
        "encoding": "one JSON object per line",
        "fields": {
            "kind": "\"generative\" or \"selective\"",
            "input_text": "prompt: query, statistics and, for selective records, numbered candidates",
            "output_text": "generative: one hint per line; selective: zero-based candidate index",
            "meta.query_id": "query identifier, unique within the benchmark",
            "meta.benchmark": "benchmark name",
            "meta.n_tables": "number of tables joined by the query",
            "meta.provenance": "source of the labeled candidate: arm:<id>, sample:<i> or default"
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPolicy {
    /// Share of queries held out for testing.
    pub test_fraction: f64,
    /// Number of queries for validation, taken after the test share.
    pub validation_count: usize,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy { test_fraction: 0.1, validation_count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Shuffles distinct query ids and cuts them into test, validation and
/// training sets.
pub fn split_queries<R: Rng + ?Sized>(ids: &[String], policy: &SplitPolicy, rng: &mut R) -> Result<DatasetSplit, DatasetError> {
    if !(0.0..=1.0).contains(&policy.test_fraction) {
        return Err(DatasetError::InvalidArgument(format!("test fraction {}", policy.test_fraction)));
    }
    let mut unique: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    unique.shuffle(rng);
    let n_test = (unique.len() as f64 * policy.test_fraction).round() as usize;
    let n_val = policy.validation_count.min(unique.len() - n_test);
    let train = unique.split_off(n_test + n_val);
    let validation = unique.split_off(n_test);
    Ok(DatasetSplit { train, validation, test: unique })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::sim::ToyDb;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const BASE: &str = "SELECT count(*) FROM mc, t WHERE mc.movie_id = t.id";

    #[test]
    fn extension_adds_company_name_table() {
        let db: ToyDb = ToyDb::default();
        let proposal = "SELECT count(*) FROM mc, t, cn WHERE mc.movie_id = t.id AND mc.company_id = cn.id \
                        AND cn.country_code = %s";
        let mut backend = ScriptedBackend::new([proposal]);
        let tpl = extend_query(BASE, db.schema(), &mut backend).unwrap();
        assert_eq!(
            tpl.sql_with_placeholder,
            "SELECT count(*) FROM mc, t, cn WHERE mc.movie_id = t.id AND mc.company_id = cn.id AND cn.country_code = %s;"
        );
        assert_eq!(tpl.fill_query, "SELECT DISTINCT cn.country_code FROM mc, t, cn WHERE mc.movie_id = t.id AND mc.company_id = cn.id;");
    }

    #[test]
    fn unknown_column_is_rejected() {
        let db: ToyDb = ToyDb::default();
        let proposal = "SELECT count(*) FROM mc, t, cn WHERE mc.movie_id = t.id AND mc.company_id = cn.id \
                        AND cn.country = %s";
        let mut backend = ScriptedBackend::new([proposal]);
        assert!(matches!(extend_query(BASE, db.schema(), &mut backend), Err(DatasetError::InvalidExtension(_))));
    }

    #[test]
    fn disconnected_or_unchanged_extensions_are_rejected() {
        let db: ToyDb = ToyDb::default();
        for bad in [
            "SELECT count(*) FROM mc, t, cn WHERE mc.movie_id = t.id AND cn.country_code = %s",
            "SELECT count(*) FROM mc, t WHERE mc.movie_id = t.id AND t.title = %s",
            "SELECT count(*) FROM mc, t, cn WHERE mc.company_id = cn.id AND cn.country_code = %s",
            "SELECT count(*) FROM mc, t, cn WHERE mc.movie_id = t.id AND mc.company_id = cn.id AND t.title = %s",
        ] {
            let mut backend = ScriptedBackend::new([bad]);
            let r = extend_query(BASE, db.schema(), &mut backend);
            assert!(matches!(r, Err(DatasetError::InvalidExtension(_))), "{bad}: {r:?}");
        }
    }

    #[test]
    fn fill_quotes_text_values() {
        let mut db: ToyDb = ToyDb::default();
        let tpl = QueryTemplate {
            sql_with_placeholder: "SELECT count(*) FROM mc, cn WHERE mc.company_id = cn.id AND cn.country_code = %s".into(),
            fill_query: "SELECT DISTINCT cn.country_code FROM mc, cn WHERE mc.company_id = cn.id".into(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let all = fill_template(&tpl, &mut db, 100, &mut rng).unwrap();
        assert_eq!(all.len(), 10);
        assert!(all.contains(&"SELECT count(*) FROM mc, cn WHERE mc.company_id = cn.id AND cn.country_code = '[de]';".to_string()));
        let two = fill_template(&tpl, &mut db, 2, &mut rng).unwrap();
        assert_eq!(two.len(), 2);
        assert!(two.iter().all(|q| all.contains(q)));
        assert!(matches!(fill_template(&tpl, &mut db, 0, &mut rng), Err(DatasetError::InvalidArgument(_))));
    }

    #[test]
    fn empty_fill_is_an_error() {
        let mut db: ToyDb = ToyDb::default();
        let tpl = QueryTemplate {
            sql_with_placeholder: "SELECT count(*) FROM t WHERE t.production_year > 3000 AND t.kind_id = %s".into(),
            fill_query: "SELECT DISTINCT t.kind_id FROM t WHERE t.production_year > 3000".into(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(fill_template(&tpl, &mut db, 3, &mut rng), Err(DatasetError::NoFillValues)));
    }

    #[test]
    fn schema_walk_extends_and_fills() {
        let mut db: ToyDb = ToyDb::default();
        let schema = db.schema().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for choice in 0..4 {
            let mut backend = SchemaWalkBackend { schema: schema.clone(), choice };
            let tpl = extend_query(BASE, &schema, &mut backend).unwrap();
            let queries = fill_template(&tpl, &mut db, 3, &mut rng).unwrap();
            for q in queries {
                assert_eq!(parse_select(&q).unwrap().from.len(), 3);
                assert!(db.true_cardinality(&q).unwrap() >= 1.0, "{q}");
            }
        }
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let ids: Vec<String> = (0..250).map(|i| format!("q{i}")).collect();
        let policy = SplitPolicy { test_fraction: 0.2, validation_count: 30 };
        let a = split_queries(&ids, &policy, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = split_queries(&ids, &policy, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.test.len(), a.validation.len(), a.train.len()), (50, 30, 170));
        let mut all: Vec<&String> = a.train.iter().chain(&a.validation).chain(&a.test).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 250);
    }

    #[test]
    fn selective_output_validation() {
        let rec = |out: &str| DatasetRecord {
            kind: RecordKind::Selective,
            input_text: String::new(),
            output_text: out.into(),
            meta: RecordMeta { query_id: "q".into(), benchmark: "b".into(), n_tables: 1, provenance: "arm:0".into() },
        };
        assert!(validate_record(&rec("1"), Some(5)).is_ok());
        assert!(validate_record(&rec("5"), Some(5)).is_err());
        assert!(validate_record(&rec(" 1"), Some(5)).is_err());
        assert!(validate_record(&rec(""), None).is_err());
    }
}
