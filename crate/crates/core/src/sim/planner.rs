//! Cardinality estimation, operator costs and a dynamic-programming join
//! planner for the toy database.

use std::collections::HashMap;

use crate::catalog_stats::{CatalogSnapshot, ColumnStats, StatValue};
use crate::dbms_client::KnobVector;
use crate::plan_model::{JoinType, NodeKind, PlanNode, PlanTree, ScanType, SimpleNode, SimplifiedPlan};
use crate::sim::eval::{Executor, JoinEdge};
use crate::sql::{CmpOp, Expr, Literal, Operand};

/// Penalty added for each operator whose knob is off.
pub const DISABLE_COST: f64 = 1.0e10;

/// Row-count oracle used by the cost model.
pub trait Cardinality {
    fn card(&mut self, mask: u32) -> f64;
    /// Fraction of the table kept by the filters of FROM position `pos`.
    fn selectivity(&mut self, pos: usize) -> f64;
}

/// Histogram/MCV based estimates with independence between predicates and
/// containment between join keys.
pub struct Estimator<'e, 'a> {
    pub exec: &'e Executor<'a>,
    pub stats: &'e CatalogSnapshot,
    memo: HashMap<u32, f64>,
    sel: Vec<f64>,
}

/// Exact cardinalities.
pub struct Truth<'e, 'a> {
    pub exec: &'e mut Executor<'a>,
}

impl Cardinality for Truth<'_, '_> {
    fn card(&mut self, mask: u32) -> f64 {
        self.exec.true_card(mask)
    }

    fn selectivity(&mut self, pos: usize) -> f64 {
        let rows = self.exec.table(pos).rows().max(1) as f64;
        self.exec.selected[pos].len() as f64 / rows
    }
}

fn lit_value(l: &Literal) -> Option<StatValue> {
    match l {
        Literal::Int(v) => Some(StatValue::Int(*v)),
        Literal::Float(v) => Some(StatValue::Float(*v)),
        Literal::Str(s) => Some(StatValue::Text(s.clone())),
        _ => None,
    }
}

fn eq_sel(cs: &ColumnStats, v: &StatValue) -> f64 {
    if let Some(m) = cs.main_values.iter().find(|m| m.value.total_cmp(v).is_eq()) {
        return m.frequency;
    }
    let mcv_sum: f64 = cs.main_values.iter().map(|m| m.frequency).sum();
    let rest = cs.ndv.saturating_sub(cs.main_values.len() as u64).max(1) as f64;
    ((1.0 - mcv_sum) / rest).clamp(0.0, 1.0)
}

/// Fraction of values strictly below `v` according to the histogram.
fn below(cs: &ColumnStats, v: &StatValue) -> f64 {
    let Some(x) = v.as_f64() else { return 1.0 / 3.0 };
    let Some(h) = cs.histogram.as_ref().filter(|h| h.len() >= 2) else {
        return match &cs.min_max {
            Some((lo, hi)) => match (lo.as_f64(), hi.as_f64()) {
                (Some(lo), Some(hi)) if hi > lo => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
                _ => 0.5,
            },
            None => 1.0 / 3.0,
        };
    };
    let b: Vec<f64> = h.iter().filter_map(StatValue::as_f64).collect();
    if b.len() < 2 || x <= b[0] {
        return 0.0;
    }
    if x > b[b.len() - 1] {
        return 1.0;
    }
    let buckets = (b.len() - 1) as f64;
    for i in 0..b.len() - 1 {
        if x <= b[i + 1] {
            let w = b[i + 1] - b[i];
            let frac = if w > 0.0 { (x - b[i]) / w } else { 0.5 };
            return (i as f64 + frac) / buckets;
        }
    }
    1.0
}

fn literal_side(left: &Operand, right: &Operand) -> Option<(String, Literal, bool)> {
    match (left, right) {
        (Operand::Column(c), Operand::Literal(l)) => Some((c.column.clone(), l.clone(), false)),
        (Operand::Literal(l), Operand::Column(c)) => Some((c.column.clone(), l.clone(), true)),
        _ => None,
    }
}

fn operand_column(o: &Operand) -> Option<&str> {
    match o {
        Operand::Column(c) => Some(&c.column),
        Operand::Literal(_) => None,
    }
}

/// Estimated selectivity of a single-table predicate.
pub fn predicate_selectivity(e: &Expr, stats: &dyn Fn(&str) -> Option<ColumnStats>) -> f64 {
    let s = match e {
        Expr::And(v) => v.iter().map(|x| predicate_selectivity(x, stats)).product(),
        Expr::Or(v) => 1.0 - v.iter().map(|x| 1.0 - predicate_selectivity(x, stats)).product::<f64>(),
        Expr::Not(x) => 1.0 - predicate_selectivity(x, stats),
        Expr::Compare { left, op, right } => match literal_side(left, right) {
            None => 0.005,
            Some((col, lit, flipped)) => {
                let (Some(cs), Some(v)) = (stats(&col), lit_value(&lit)) else { return 0.005 };
                let op = if flipped {
                    match op {
                        CmpOp::Lt => CmpOp::Gt,
                        CmpOp::LtEq => CmpOp::GtEq,
                        CmpOp::Gt => CmpOp::Lt,
                        CmpOp::GtEq => CmpOp::LtEq,
                        o => *o,
                    }
                } else {
                    *op
                };
                match op {
                    CmpOp::Eq => eq_sel(&cs, &v),
                    CmpOp::NotEq => 1.0 - eq_sel(&cs, &v),
                    CmpOp::Lt | CmpOp::LtEq => below(&cs, &v),
                    CmpOp::Gt | CmpOp::GtEq => 1.0 - below(&cs, &v),
                }
            }
        },
        Expr::Between { operand, negated, low, high } => {
            let inside = match (operand_column(operand), low, high) {
                (Some(col), Operand::Literal(lo), Operand::Literal(hi)) => match (stats(col), lit_value(lo), lit_value(hi)) {
                    (Some(cs), Some(lo), Some(hi)) => (below(&cs, &hi) - below(&cs, &lo) + eq_sel(&cs, &hi)).clamp(0.0, 1.0),
                    _ => 0.005,
                },
                _ => 0.005,
            };
            if *negated { 1.0 - inside } else { inside }
        }
        Expr::InList { operand, negated, list } => {
            let s = match operand_column(operand).and_then(stats) {
                Some(cs) => list.iter().filter_map(lit_value).map(|v| eq_sel(&cs, &v)).sum::<f64>().min(1.0),
                None => 0.005 * list.len() as f64,
            };
            if *negated { 1.0 - s } else { s }
        }
        Expr::Like { negated, pattern, .. } => {
            let s = if pattern.contains(['%', '_']) { 0.05 } else { 0.005 };
            if *negated { 1.0 - s } else { s }
        }
        Expr::IsNull { negated, .. } => {
            if *negated { 1.0 } else { 0.0 }
        }
    };
    s.clamp(0.0, 1.0)
}

impl<'e, 'a> Estimator<'e, 'a> {
    pub fn new(exec: &'e Executor<'a>, stats: &'e CatalogSnapshot) -> Self {
        let sel = (0..exec.n())
            .map(|p| {
                let table = &exec.table(p).name;
                let lookup = |c: &str| stats.column(table, c).cloned();
                exec.bound.filters[p].iter().map(|f| predicate_selectivity(f, &lookup)).product()
            })
            .collect();
        Estimator { exec, stats, memo: HashMap::new(), sel }
    }

    fn row_count(&self, pos: usize) -> f64 {
        let t = self.exec.table(pos);
        self.stats.tables.get(&t.name).map_or(t.rows() as f64, |s| s.row_count as f64)
    }

    fn ndv(&self, pos: usize, col: usize) -> f64 {
        let t = self.exec.table(pos);
        let name = &t.columns[col].0;
        self.stats.column(&t.name, name).map_or(200.0, |c| c.ndv.max(1) as f64)
    }

    fn edge_sel(&self, e: &JoinEdge) -> f64 {
        1.0 / self.ndv(e.left.0, e.left.1).max(self.ndv(e.right.0, e.right.1))
    }
}

impl Cardinality for Estimator<'_, '_> {
    fn card(&mut self, mask: u32) -> f64 {
        if let Some(&c) = self.memo.get(&mask) {
            return c;
        }
        let mut c: f64 = (0..self.exec.n())
            .filter(|p| mask & (1 << p) != 0)
            .map(|p| (self.row_count(p) * self.sel[p]).max(1.0))
            .product();
        for e in self.exec.edges_within(mask) {
            c *= self.edge_sel(e);
        }
        let c = c.max(1.0).round();
        self.memo.insert(mask, c);
        c
    }

    fn selectivity(&mut self, pos: usize) -> f64 {
        self.sel[pos]
    }
}

/// Static facts about the query that costs depend on.
pub struct CostContext {
    pub aliases: Vec<String>,
    pub table_names: Vec<String>,
    pub raw_rows: Vec<f64>,
    /// Some filter on the position can use an index.
    pub sargable: Vec<bool>,
    pub n_filters: Vec<usize>,
    /// (outer mask bit, inner position) pairs joinable via an index on the inner key.
    pub indexed_edges: Vec<(usize, usize)>,
    pub knobs: KnobVector,
}

impl CostContext {
    pub fn new(exec: &Executor<'_>, knobs: KnobVector) -> Self {
        let n = exec.n();
        let mut sargable = vec![false; n];
        for (p, filters) in exec.bound.filters.iter().enumerate() {
            let t = exec.table(p);
            sargable[p] = filters.iter().any(|f| index_usable(f, &|c| t.is_indexed(c)));
        }
        let mut indexed_edges = Vec::new();
        for e in &exec.bound.edges {
            for (o, i) in [(e.left, e.right), (e.right, e.left)] {
                let t = exec.table(i.0);
                if t.is_indexed(&t.columns[i.1].0) {
                    indexed_edges.push((o.0, i.0));
                }
            }
        }
        CostContext {
            aliases: exec.bound.aliases.clone(),
            table_names: (0..n).map(|p| exec.table(p).name.clone()).collect(),
            raw_rows: (0..n).map(|p| exec.table(p).rows() as f64).collect(),
            sargable,
            n_filters: exec.bound.filters.iter().map(Vec::len).collect(),
            indexed_edges,
            knobs,
        }
    }

    pub fn position(&self, alias: &str) -> Option<usize> {
        self.aliases.iter().position(|a| a == alias)
    }

    fn scan_enabled(&self, s: ScanType) -> bool {
        let k = &self.knobs;
        match s {
            ScanType::SeqScan => k.enable_seqscan,
            ScanType::IndexScan => k.enable_indexscan,
            ScanType::IndexOnlyScan => k.enable_indexonlyscan,
            ScanType::BitmapScan | ScanType::TidScan => true,
        }
    }

    fn join_enabled(&self, j: JoinType) -> bool {
        let k = &self.knobs;
        match j {
            JoinType::NestLoop => k.enable_nestloop,
            JoinType::HashJoin => k.enable_hashjoin,
            JoinType::MergeJoin => k.enable_mergejoin,
        }
    }

    /// Whether an index lookup on `inner` can be driven by rows of `outer`.
    fn parameterizable(&self, outer: u32, inner: usize) -> bool {
        self.indexed_edges.iter().any(|&(o, i)| i == inner && outer & (1 << o) != 0)
    }
}

fn index_usable(e: &Expr, indexed: &dyn Fn(&str) -> bool) -> bool {
    match e {
        Expr::Compare { left, op, right } => {
            *op != CmpOp::NotEq && literal_side(left, right).is_some_and(|(c, _, _)| indexed(&c))
        }
        Expr::Between { operand, negated: false, .. } | Expr::InList { operand, negated: false, .. } => {
            operand_column(operand).is_some_and(indexed)
        }
        Expr::And(v) => v.iter().any(|x| index_usable(x, indexed)),
        Expr::Or(v) => v.iter().all(|x| index_usable(x, indexed)),
        _ => false,
    }
}

fn sort_cost(n: f64) -> f64 {
    0.4 * n * (n + 2.0).log2()
}

/// Cost of one scan given its output row count.
pub fn scan_cost(ctx: &CostContext, pos: usize, scan: ScanType, out: f64) -> f64 {
    let raw = ctx.raw_rows[pos];
    let filter = 0.2 * ctx.n_filters[pos] as f64 * raw;
    let base = match scan {
        ScanType::SeqScan => raw + filter,
        ScanType::IndexScan if ctx.sargable[pos] => 5.0 + 3.0 * out,
        ScanType::IndexScan => 5.0 + 3.0 * raw + filter,
        ScanType::IndexOnlyScan if ctx.sargable[pos] => 4.0 + 1.8 * out,
        ScanType::IndexOnlyScan => 4.0 + 1.8 * raw + filter,
        ScanType::BitmapScan if ctx.sargable[pos] => 6.0 + 1.5 * out + 0.05 * raw,
        ScanType::BitmapScan => 6.0 + 1.3 * raw + filter,
        ScanType::TidScan => 8.0 * raw + filter,
    };
    base + if ctx.scan_enabled(scan) { 0.0 } else { DISABLE_COST }
}

/// Incremental cost of joining `left` and `right` (excluding child costs).
/// `inner_scan` is set when the right child is a base-table scan.
pub fn join_cost(
    ctx: &CostContext,
    join: JoinType,
    left: u32,
    right: u32,
    inner_scan: Option<(usize, ScanType)>,
    cards: &mut dyn Cardinality,
) -> (f64, bool) {
    let (l, r, out) = (cards.card(left), cards.card(right), cards.card(left | right));
    let mut parameterized = false;
    let c = match join {
        JoinType::NestLoop => match inner_scan {
            Some((p, s)) if s != ScanType::SeqScan && s != ScanType::TidScan && ctx.parameterizable(left, p) => {
                parameterized = true;
                let fetched = out / cards.selectivity(p).max(1e-6);
                let per_fetch = if s == ScanType::IndexOnlyScan { 0.9 } else { 1.5 };
                3.0 * l + per_fetch * fetched + 0.3 * out
            }
            _ => r + 0.05 * l * r + 0.3 * out,
        },
        JoinType::HashJoin => {
            let spill = if r > 20_000.0 { 2.0 * r } else { 0.0 };
            1.5 * r + l + 0.3 * out + spill
        }
        JoinType::MergeJoin => sort_cost(l) + sort_cost(r) + 0.4 * (l + r) + 0.3 * out,
    };
    (c + if ctx.join_enabled(join) { 0.0 } else { DISABLE_COST }, parameterized)
}

/// Total cost of a fixed plan shape. Returns `(cost, mask)`.
pub fn plan_cost(ctx: &CostContext, node: &SimpleNode, cards: &mut dyn Cardinality) -> (f64, u32) {
    match node {
        SimpleNode::Scan { scan, alias } => {
            let p = ctx.position(alias).expect("alias bound");
            let out = cards.card(1 << p);
            (scan_cost(ctx, p, *scan, out), 1 << p)
        }
        SimpleNode::Join { join, left, right } => {
            let (lc, lm) = plan_cost(ctx, left, cards);
            let (rc, rm) = plan_cost(ctx, right, cards);
            let inner = match &**right {
                SimpleNode::Scan { scan, alias } => ctx.position(alias).map(|p| (p, *scan)),
                _ => None,
            };
            let (jc, param) = join_cost(ctx, *join, lm, rm, inner, cards);
            (lc + inner_cost(ctx, rc, param, inner) + jc, lm | rm)
        }
    }
}

/// A parameterized inner scan is charged by its join; only a disabled
/// scan method still costs.
fn inner_cost(ctx: &CostContext, cost: f64, param: bool, inner: Option<(usize, ScanType)>) -> f64 {
    match inner {
        Some((_, s)) if param => {
            if ctx.scan_enabled(s) {
                0.0
            } else {
                DISABLE_COST
            }
        }
        _ => cost,
    }
}

#[derive(Clone)]
struct Best {
    cost: f64,
    plan: SimpleNode,
}

/// Cheapest bushy plan over all ordered splits, avoiding cross products
/// whenever the join graph allows it.
pub fn optimize(ctx: &CostContext, exec: &Executor<'_>, cards: &mut dyn Cardinality) -> SimpleNode {
    let n = ctx.aliases.len();
    let full: u32 = (1u32 << n) - 1;
    let mut best: HashMap<u32, Best> = HashMap::new();
    for p in 0..n {
        let out = cards.card(1 << p);
        let b = ScanType::ALL
            .iter()
            .map(|&s| Best { cost: scan_cost(ctx, p, s, out), plan: SimpleNode::scan(s, ctx.aliases[p].clone()) })
            .fold(None::<Best>, |acc, b| match acc {
                Some(a) if a.cost <= b.cost => Some(a),
                _ => Some(b),
            })
            .unwrap();
        best.insert(1 << p, b);
    }
    let mut masks: Vec<u32> = (1..=full).filter(|m| m.count_ones() >= 2).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let connected = exec.is_connected(mask);
        let mut cur: Option<Best> = None;
        let mut left = (mask - 1) & mask;
        while left != 0 {
            let right = mask & !left;
            let valid = !connected
                || (exec.is_connected(left)
                    && exec.is_connected(right)
                    && exec.edges_between(left, right).next().is_some());
            if valid {
                if let (Some(lb), Some(rb)) = (best.get(&left).cloned(), best.get(&right).cloned()) {
                    let right_options: Vec<Best> = if right.count_ones() == 1 {
                        let p = right.trailing_zeros() as usize;
                        let out = cards.card(right);
                        ScanType::ALL
                            .iter()
                            .map(|&s| Best {
                                cost: scan_cost(ctx, p, s, out),
                                plan: SimpleNode::scan(s, ctx.aliases[p].clone()),
                            })
                            .collect()
                    } else {
                        vec![rb]
                    };
                    for rb in &right_options {
                        let inner = match &rb.plan {
                            SimpleNode::Scan { scan, alias } => ctx.position(alias).map(|p| (p, *scan)),
                            _ => None,
                        };
                        for j in JoinType::ALL {
                            let (jc, param) = join_cost(ctx, j, left, right, inner, cards);
                            let cost = lb.cost + inner_cost(ctx, rb.cost, param, inner) + jc;
                            if cur.as_ref().is_none_or(|c| cost < c.cost) {
                                cur = Some(Best { cost, plan: SimpleNode::join(j, lb.plan.clone(), rb.plan.clone()) });
                            }
                        }
                    }
                }
            }
            left = (left - 1) & mask;
        }
        if let Some(c) = cur {
            best.insert(mask, c);
        }
    }
    best.remove(&full).expect("full set planned").plan
}

/// Expands a simplified plan into a planner-style tree with estimates.
pub fn render(ctx: &CostContext, plan: &SimplifiedPlan, cards: &mut dyn Cardinality, planning_ms: f64) -> PlanTree {
    fn go(ctx: &CostContext, node: &SimpleNode, cards: &mut dyn Cardinality) -> (PlanNode, u32) {
        match node {
            SimpleNode::Scan { scan, alias } => {
                let p = ctx.position(alias).expect("alias bound");
                let rows = cards.card(1 << p);
                let cost = scan_cost(ctx, p, *scan, rows);
                let mut n = PlanNode::scan(scan.operator_name(), alias.clone(), rows as u64, round2(cost));
                if ctx.table_names[p] != *alias {
                    n.relation_name = Some(ctx.table_names[p].clone());
                }
                if *scan == ScanType::BitmapScan {
                    let mut child = PlanNode::scan("Bitmap Index Scan", "", rows as u64, round2(cost * 0.3));
                    child.kind = NodeKind::Other;
                    child.relation = None;
                    child.parent_relationship = Some("Outer".into());
                    n.children.push(child);
                }
                (n, 1 << p)
            }
            SimpleNode::Join { join, left, right } => {
                let (mut l, lm) = go(ctx, left, cards);
                let (mut r, rm) = go(ctx, right, cards);
                let inner = match &**right {
                    SimpleNode::Scan { scan, alias } => ctx.position(alias).map(|p| (p, *scan)),
                    _ => None,
                };
                let (jc, param) = join_cost(ctx, *join, lm, rm, inner, cards);
                let total = l.est_cost + inner_cost(ctx, r.est_cost, param, inner) + jc;
                let rows = cards.card(lm | rm);
                l.parent_relationship = Some("Outer".into());
                r.parent_relationship = Some("Inner".into());
                match join {
                    JoinType::HashJoin => {
                        let mut h = PlanNode::other("Hash", r, rows_of(cards, rm), 0.0);
                        h.est_cost = h.children[0].est_cost;
                        h.parent_relationship = Some("Inner".into());
                        h.children[0].parent_relationship = Some("Outer".into());
                        r = h;
                    }
                    JoinType::MergeJoin => {
                        let wrap = |child: PlanNode, rel: &str, n: u64| {
                            let c = child.est_cost + sort_cost(n as f64);
                            let mut s = PlanNode::other("Sort", child, n, round2(c));
                            s.parent_relationship = Some(rel.into());
                            s.children[0].parent_relationship = Some("Outer".into());
                            s
                        };
                        let (ln, rn) = (l.est_rows, r.est_rows);
                        l = wrap(l, "Outer", ln);
                        r = wrap(r, "Inner", rn);
                    }
                    JoinType::NestLoop if !param => {
                        let mut m = PlanNode::other("Materialize", r, rows_of(cards, rm), 0.0);
                        m.est_cost = m.children[0].est_cost;
                        m.parent_relationship = Some("Inner".into());
                        m.children[0].parent_relationship = Some("Outer".into());
                        r = m;
                    }
                    JoinType::NestLoop => {}
                }
                let mut j = PlanNode::join(join.operator_name(), l, r, rows as u64, round2(total));
                j.join_modifier = Some("Inner".into());
                (j, lm | rm)
            }
        }
    }
    let (top, _) = go(ctx, plan.root(), cards);
    let cost = top.est_cost + 0.01 * top.est_rows as f64;
    let root = PlanNode::other("Aggregate", top, 1, round2(cost));
    PlanTree { root, planning_ms: Some(planning_ms) }
}

fn rows_of(cards: &mut dyn Cardinality, mask: u32) -> u64 {
    cards.card(mask) as u64
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
