//! Per-query statistics bundle: table cardinalities, distinct counts, most
//! common values, numeric ranges and histograms.
//!
//! A [`CatalogSnapshot`] holds catalog statistics for a whole database and
//! can be written to or read from a versioned JSON file. [`obtain_statistics`]
//! narrows it to the tables of one query and adds the planner's per-table
//! row estimates; [`render_stats`] produces the prompt text.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan_model::PlanTree;
use crate::sql::{parse_select, SqlError};

pub const SNAPSHOT_FORMAT: &str = "planhint-catalog-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const MAX_MAIN_VALUES: usize = 10;
pub const MAX_HIST_BOUNDS: usize = 21;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("table `{0}` is not in the catalog snapshot")]
    MissingTable(String),
    #[error("default plan has no scan node for alias `{0}`")]
    MissingScanNode(String),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("snapshot parse error: {0}")]
    SnapshotParse(String),
    #[error("statistics connection error: {0}")]
    Connection(String),
    #[error("snapshot I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A catalog value: integer, float or text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl StatValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            StatValue::Int(v) => Some(*v as f64),
            StatValue::Float(v) => Some(*v),
            StatValue::Text(_) => None,
        }
    }

    /// Numbers before text; numbers by value, text lexicographically.
    pub fn total_cmp(&self, other: &StatValue) -> Ordering {
        match (self, other) {
            (StatValue::Int(a), StatValue::Int(b)) => a.cmp(b),
            (StatValue::Text(a), StatValue::Text(b)) => a.cmp(b),
            (StatValue::Text(_), _) => Ordering::Greater,
            (_, StatValue::Text(_)) => Ordering::Less,
            (a, b) => a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()),
        }
    }
}

const STRUCTURAL: &[char] = &[',', '[', ']', '(', ')', '{', '}', ':', '"', '\n', '\r'];

impl fmt::Display for StatValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatValue::Int(v) => write!(f, "{v}"),
            StatValue::Float(v) => write!(f, "{v}"),
            StatValue::Text(s) if s.contains(STRUCTURAL) || s.trim() != s || s.is_empty() => {
                write!(f, "{}", serde_json::Value::String(s.clone()))
            }
            StatValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for StatValue {
    fn from(v: i64) -> Self {
        StatValue::Int(v)
    }
}

impl From<f64> for StatValue {
    fn from(v: f64) -> Self {
        StatValue::Float(v)
    }
}

impl From<&str> for StatValue {
    fn from(v: &str) -> Self {
        StatValue::Text(v.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainValue {
    pub value: StatValue,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub is_numeric: bool,
    pub ndv: u64,
    #[serde(default)]
    pub main_values: Vec<MainValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_max: Option<(StatValue, StatValue)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<StatValue>>,
}

impl ColumnStats {
    fn validate(&self, table: &str) -> Result<(), String> {
        let key = format!("{table}.{}", self.name);
        let mut sum = 0.0;
        for mv in &self.main_values {
            if !(0.0..=1.0).contains(&mv.frequency) {
                return Err(format!("{key}: frequency {} outside [0, 1]", mv.frequency));
            }
            sum += mv.frequency;
        }
        if sum > 1.0 + 1e-9 {
            return Err(format!("{key}: main-value frequencies sum to {sum} > 1"));
        }
        if let Some((lo, hi)) = &self.min_max {
            if lo.total_cmp(hi) == Ordering::Greater {
                return Err(format!("{key}: min {lo} exceeds max {hi}"));
            }
        }
        if let Some(h) = &self.histogram {
            if h.windows(2).any(|w| w[0].total_cmp(&w[1]) == Ordering::Greater) {
                return Err(format!("{key}: histogram boundaries are not nondecreasing"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub row_count: u64,
    pub columns: Vec<ColumnStats>,
}

/// Catalog statistics keyed by table name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CatalogSnapshot {
    pub tables: BTreeMap<String, TableStats>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    version: u32,
    tables: BTreeMap<String, TableStats>,
}

impl CatalogSnapshot {
    pub fn validate(&self) -> Result<(), StatsError> {
        for (name, t) in &self.tables {
            let mut seen = std::collections::HashSet::new();
            for c in &t.columns {
                if !seen.insert(c.name.as_str()) {
                    return Err(StatsError::SnapshotParse(format!("{name}: duplicate column `{}`", c.name)));
                }
                c.validate(name).map_err(StatsError::SnapshotParse)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = SnapshotFile {
            format: SNAPSHOT_FORMAT.to_owned(),
            version: SNAPSHOT_VERSION,
            tables: self.tables.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("snapshot serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, StatsError> {
        let file: SnapshotFile = serde_json::from_str(text).map_err(|e| StatsError::SnapshotParse(e.to_string()))?;
        if file.format != SNAPSHOT_FORMAT {
            return Err(StatsError::SnapshotParse(format!("unexpected format `{}`", file.format)));
        }
        if file.version != SNAPSHOT_VERSION {
            return Err(StatsError::SnapshotParse(format!("unsupported snapshot version {}", file.version)));
        }
        let snap = CatalogSnapshot { tables: file.tables };
        snap.validate()?;
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<(), StatsError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnStats> {
        self.tables.get(table)?.columns.iter().find(|c| c.name == column)
    }
}

/// Anything that can produce a catalog snapshot: a file, or a live database.
pub trait StatisticsSource {
    fn read_snapshot(&mut self) -> Result<CatalogSnapshot, StatsError>;
}

pub struct SnapshotFileSource<P: AsRef<Path>>(pub P);

impl<P: AsRef<Path>> StatisticsSource for SnapshotFileSource<P> {
    fn read_snapshot(&mut self) -> Result<CatalogSnapshot, StatsError> {
        CatalogSnapshot::from_json(&std::fs::read_to_string(self.0.as_ref())?)
    }
}

/// Reads and validates a snapshot from any source.
pub fn ingest_snapshot(source: &mut dyn StatisticsSource) -> Result<CatalogSnapshot, StatsError> {
    let snap = source.read_snapshot()?;
    snap.validate()?;
    Ok(snap)
}

/// Statistics for the tables referenced by one query. Keys follow the FROM
/// clause order, then column name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryStats {
    /// alias -> (estimated rows, table row count)
    pub card_tb: IndexMap<String, (u64, u64)>,
    pub ndv: IndexMap<String, u64>,
    pub main_value: IndexMap<String, Vec<MainValue>>,
    pub min_max: IndexMap<String, (StatValue, StatValue)>,
    pub hist: IndexMap<String, Vec<StatValue>>,
}

/// Evenly spaced subset of at most `cap` boundaries keeping both endpoints.
pub fn downsample_bounds(bounds: &[StatValue], cap: usize) -> Vec<StatValue> {
    if bounds.len() <= cap || cap < 2 {
        return bounds.iter().take(cap).cloned().collect();
    }
    let last = bounds.len() - 1;
    (0..cap)
        .map(|i| {
            let idx = (i * last + (cap - 1) / 2) / (cap - 1);
            bounds[idx].clone()
        })
        .collect()
}

/// Builds the statistics bundle for `sql` from the catalog snapshot and the
/// planner's unhinted plan.
pub fn obtain_statistics(sql: &str, snapshot: &CatalogSnapshot, default_plan: &PlanTree) -> Result<QueryStats, StatsError> {
    let query = parse_select(sql)?;
    let mut out = QueryStats::default();
    for t in &query.from {
        let table = snapshot.tables.get(&t.table).ok_or_else(|| StatsError::MissingTable(t.table.clone()))?;
        let scan = default_plan.scan_for(&t.alias).ok_or_else(|| StatsError::MissingScanNode(t.alias.clone()))?;
        out.card_tb.insert(t.alias.clone(), (scan.est_rows, table.row_count));

        let mut cols: Vec<&ColumnStats> = table.columns.iter().collect();
        cols.sort_by(|a, b| a.name.cmp(&b.name));
        for c in cols {
            let key = format!("{}.{}", t.alias, c.name);
            out.ndv.insert(key.clone(), c.ndv);
            out.main_value.insert(key.clone(), c.main_values.iter().take(MAX_MAIN_VALUES).cloned().collect());
            if c.is_numeric {
                if let Some(mm) = &c.min_max {
                    out.min_max.insert(key.clone(), mm.clone());
                }
                if let Some(h) = &c.histogram {
                    out.hist.insert(key, downsample_bounds(h, MAX_HIST_BOUNDS));
                }
            }
        }
    }
    Ok(out)
}

fn join_values(values: &[StatValue]) -> String {
    values.iter().map(StatValue::to_string).collect::<Vec<_>>().join(",")
}

/// Five-section text block used as prompt context.
pub fn render_stats(stats: &QueryStats) -> String {
    let mut s = String::from("Card_Tb:\n");
    for (alias, (est, rows)) in &stats.card_tb {
        s.push_str(&format!("{alias}:{est}({rows})\n"));
    }
    s.push_str("NDV:\n");
    for (key, ndv) in &stats.ndv {
        s.push_str(&format!("{key}:{ndv}\n"));
    }
    s.push_str("Main_Value:\n");
    for (key, values) in &stats.main_value {
        let items: Vec<String> = values.iter().map(|m| format!("[{}, {:.4}]", m.value, m.frequency)).collect();
        let body = if items.is_empty() { "[]".to_owned() } else { items.join(", ") };
        s.push_str(&format!("{key}:{body}\n"));
    }
    s.push_str("Min_Max:\n");
    for (key, (lo, hi)) in &stats.min_max {
        s.push_str(&format!("{key}:[{lo},{hi}]\n"));
    }
    s.push_str("Hist:\n");
    for (key, bounds) in &stats.hist {
        s.push_str(&format!("{key}:[{}]\n", join_values(bounds)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan_model::PlanNode;

    fn snapshot() -> CatalogSnapshot {
        let mut tables = BTreeMap::new();
        tables.insert(
            "t".to_owned(),
            TableStats {
                row_count: 50000,
                columns: vec![
                    ColumnStats {
                        name: "title".into(),
                        is_numeric: false,
                        ndv: 48000,
                        main_values: vec![MainValue { value: "Hamlet".into(), frequency: 0.001 }],
                        min_max: None,
                        histogram: None,
                    },
                    ColumnStats {
                        name: "id".into(),
                        is_numeric: true,
                        ndv: 50000,
                        main_values: vec![],
                        min_max: Some((1.into(), 50000.into())),
                        histogram: Some(vec![1.into(), 25000.into(), 50000.into()]),
                    },
                ],
            },
        );
        tables.insert("mc".to_owned(), TableStats { row_count: 9, columns: vec![] });
        tables.insert("cn".to_owned(), TableStats { row_count: 3, columns: vec![] });
        CatalogSnapshot { tables }
    }

    fn plan() -> PlanTree {
        PlanTree::new(PlanNode::other(
            "Aggregate",
            PlanNode::join("Hash Join", PlanNode::scan("Seq Scan", "t", 1234, 10.0), PlanNode::scan("Seq Scan", "mc", 9, 1.0), 5, 20.0),
            1,
            21.0,
        ))
    }

    #[test]
    fn filters_to_referenced_tables() {
        let stats = obtain_statistics("SELECT count(*) FROM t, mc WHERE t.id = mc.movie_id", &snapshot(), &plan()).unwrap();
        assert_eq!(stats.card_tb.keys().collect::<Vec<_>>(), vec!["t", "mc"]);
        assert_eq!(stats.card_tb["t"], (1234, 50000));
        assert_eq!(stats.ndv.keys().collect::<Vec<_>>(), vec!["t.id", "t.title"]);
        assert!(stats.min_max.contains_key("t.id") && !stats.min_max.contains_key("t.title"));
        assert!(!stats.hist.contains_key("t.title"));
        let text = render_stats(&stats);
        assert_eq!(
            text,
            "Card_Tb:\nt:1234(50000)\nmc:9(9)\nNDV:\nt.id:50000\nt.title:48000\nMain_Value:\nt.id:[]\nt.title:[Hamlet, 0.0010]\n\
             Min_Max:\nt.id:[1,50000]\nHist:\nt.id:[1,25000,50000]\n"
        );
    }

    #[test]
    fn missing_table_and_scan() {
        let err = obtain_statistics("SELECT * FROM t, k", &snapshot(), &plan()).unwrap_err();
        assert!(matches!(err, StatsError::MissingTable(t) if t == "k"));
        let err = obtain_statistics("SELECT * FROM t, cn", &snapshot(), &plan()).unwrap_err();
        assert!(matches!(err, StatsError::MissingScanNode(a) if a == "cn"));
    }

    #[test]
    fn snapshot_round_trip_and_validation() {
        let snap = snapshot();
        assert_eq!(CatalogSnapshot::from_json(&snap.to_json()).unwrap(), snap);
        let mut bad = snap.clone();
        bad.tables.get_mut("t").unwrap().columns[1].histogram = Some(vec![5.into(), 1.into()]);
        assert!(matches!(CatalogSnapshot::from_json(&bad.to_json()), Err(StatsError::SnapshotParse(_))));
        let mut bad = snap;
        bad.tables.get_mut("t").unwrap().columns[0].main_values[0].frequency = 1.5;
        assert!(CatalogSnapshot::from_json(&bad.to_json()).is_err());
    }

    #[test]
    fn downsampling_keeps_endpoints() {
        let bounds: Vec<StatValue> = (0..101).map(StatValue::Int).collect();
        let d = downsample_bounds(&bounds, 21);
        assert_eq!(d.len(), 21);
        assert_eq!(d[0], StatValue::Int(0));
        assert_eq!(d[20], StatValue::Int(100));
        assert_eq!(d[10], StatValue::Int(50));
        assert_eq!(downsample_bounds(&bounds[..3], 21).len(), 3);
    }

    #[test]
    fn structural_text_is_quoted() {
        assert_eq!(StatValue::from("[de]").to_string(), "\"[de]\"");
        assert_eq!(StatValue::from("Drama").to_string(), "Drama");
    }
}
