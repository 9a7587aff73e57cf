//! Query binding, predicate evaluation and exact join cardinalities.

use std::collections::HashMap;

use crate::sim::data::{ColumnData, Table};
use crate::sql::{CmpOp, ColumnRef, Expr, Literal, Operand, SelectQuery, SqlError};

/// Column of one FROM entry: (position in FROM, column index in its table).
pub type BoundColumn = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct JoinEdge {
    pub left: BoundColumn,
    pub right: BoundColumn,
}

/// A query resolved against the toy tables.
#[derive(Debug, Clone)]
pub struct BoundQuery {
    pub query: SelectQuery,
    pub aliases: Vec<String>,
    /// Index into the table list per FROM entry.
    pub tables: Vec<usize>,
    /// Single-alias conjuncts with qualified columns.
    pub filters: Vec<Vec<Expr>>,
    pub edges: Vec<JoinEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Int(i64),
    Text(&'a str),
}

impl Cell<'_> {
    pub fn cmp_cell(&self, other: &Cell<'_>) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => Some(a.cmp(b)),
            (Cell::Text(a), Cell::Text(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    fn cmp_literal(&self, lit: &Literal) -> Option<std::cmp::Ordering> {
        match (self, lit) {
            (Cell::Int(a), Literal::Int(b)) => Some(a.cmp(b)),
            (Cell::Int(a), Literal::Float(b)) => (*a as f64).partial_cmp(b),
            (Cell::Text(a), Literal::Str(b)) => Some((*a).cmp(b.as_str())),
            _ => None,
        }
    }
}

pub fn cell(table: &Table, col: usize, row: usize) -> Cell<'_> {
    match &table.columns[col].1 {
        ColumnData::Int(v) => Cell::Int(v[row]),
        ColumnData::Text(v) => Cell::Text(&v[row]),
    }
}

fn unsupported(msg: impl Into<String>) -> SqlError {
    SqlError::Unsupported(msg.into())
}

fn qualify_column(c: &mut ColumnRef, from: &[(String, &Table)]) -> Result<(), SqlError> {
    match &c.qualifier {
        Some(q) => {
            let (_, t) = from
                .iter()
                .find(|(a, _)| a == q)
                .ok_or_else(|| unsupported(format!("unknown alias `{q}`")))?;
            if t.column_index(&c.column).is_none() {
                return Err(unsupported(format!("unknown column `{q}.{}`", c.column)));
            }
        }
        None => {
            let mut owners = from.iter().filter(|(_, t)| t.column_index(&c.column).is_some());
            let (a, _) = owners.next().ok_or_else(|| unsupported(format!("unknown column `{}`", c.column)))?;
            if owners.next().is_some() {
                return Err(unsupported(format!("ambiguous column `{}`", c.column)));
            }
            c.qualifier = Some(a.clone());
        }
    }
    Ok(())
}

fn qualify_operand(o: &mut Operand, from: &[(String, &Table)]) -> Result<(), SqlError> {
    if let Operand::Column(c) = o {
        qualify_column(c, from)?;
    }
    Ok(())
}

fn qualify_expr(e: &mut Expr, from: &[(String, &Table)]) -> Result<(), SqlError> {
    match e {
        Expr::And(v) | Expr::Or(v) => v.iter_mut().try_for_each(|x| qualify_expr(x, from)),
        Expr::Not(x) => qualify_expr(x, from),
        Expr::Compare { left, right, .. } => {
            qualify_operand(left, from)?;
            qualify_operand(right, from)
        }
        Expr::Between { operand, low, high, .. } => {
            qualify_operand(operand, from)?;
            qualify_operand(low, from)?;
            qualify_operand(high, from)
        }
        Expr::InList { operand, .. } | Expr::Like { operand, .. } | Expr::IsNull { operand, .. } => {
            qualify_operand(operand, from)
        }
    }
}

/// Resolves aliases and columns and splits the WHERE clause into per-table
/// filters and equi-join edges.
pub fn bind(query: &SelectQuery, tables: &[Table]) -> Result<BoundQuery, SqlError> {
    let mut table_idx = Vec::new();
    let mut from = Vec::new();
    for t in &query.from {
        let i = tables
            .iter()
            .position(|x| x.name == t.table)
            .ok_or_else(|| unsupported(format!("unknown table `{}`", t.table)))?;
        table_idx.push(i);
        from.push((t.alias.clone(), &tables[i]));
    }
    let mut q = query.clone();
    if let Some(sel) = &mut q.selection {
        qualify_expr(sel, &from)?;
    }
    for item in &mut q.projection {
        match item {
            crate::sql::SelectItem::Column { column, .. } | crate::sql::SelectItem::Aggregate { arg: column, .. } => {
                qualify_column(column, &from)?
            }
            _ => {}
        }
    }
    let pos = |c: &ColumnRef| -> BoundColumn {
        let p = from.iter().position(|(a, _)| Some(a) == c.qualifier.as_ref()).unwrap();
        (p, from[p].1.column_index(&c.column).unwrap())
    };
    let mut filters = vec![Vec::new(); from.len()];
    let mut edges = Vec::new();
    for c in q.conjuncts() {
        if c.has_placeholder() {
            return Err(unsupported("unfilled placeholder"));
        }
        let cols = c.columns();
        let mut owners: Vec<usize> = cols.iter().map(|c| pos(c).0).collect();
        owners.sort_unstable();
        owners.dedup();
        match owners.as_slice() {
            [] => return Err(unsupported(format!("constant predicate `{c}`"))),
            [p] => filters[*p].push(c.clone()),
            [_, _] => match c {
                Expr::Compare { left: Operand::Column(l), op: CmpOp::Eq, right: Operand::Column(r) } => {
                    edges.push(JoinEdge { left: pos(l), right: pos(r) })
                }
                _ => return Err(unsupported(format!("non-equi join predicate `{c}`"))),
            },
            _ => return Err(unsupported(format!("predicate over more than two tables `{c}`"))),
        }
    }
    Ok(BoundQuery { query: q, aliases: from.iter().map(|(a, _)| a.clone()).collect(), tables: table_idx, filters, edges })
}

/// SQL `LIKE` with `%` and `_` wildcards.
pub fn like_match(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut ti, mut pi) = (0, 0);
    let (mut star, mut mark) = (None, 0);
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || p[pi] == t[ti]) && p[pi] != '%' {
            ti += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

fn operand_cell<'a>(o: &Operand, table: &'a Table, row: usize) -> Option<Result<Cell<'a>, &'a Literal>> {
    match o {
        Operand::Column(c) => Some(Ok(cell(table, table.column_index(&c.column)?, row))),
        Operand::Literal(_) => None,
    }
}

fn compare(l: &Operand, r: &Operand, table: &Table, row: usize) -> Option<std::cmp::Ordering> {
    match (l, r) {
        (Operand::Column(_), Operand::Literal(lit)) => operand_cell(l, table, row)?.ok()?.cmp_literal(lit),
        (Operand::Literal(lit), Operand::Column(_)) => {
            operand_cell(r, table, row)?.ok()?.cmp_literal(lit).map(std::cmp::Ordering::reverse)
        }
        (Operand::Column(_), Operand::Column(_)) => {
            let a = operand_cell(l, table, row)?.ok()?;
            let b = operand_cell(r, table, row)?.ok()?;
            a.cmp_cell(&b)
        }
        _ => None,
    }
}

/// Evaluates a single-table predicate on one row; comparisons across types
/// are false.
pub fn eval(e: &Expr, table: &Table, row: usize) -> bool {
    use std::cmp::Ordering::*;
    match e {
        Expr::And(v) => v.iter().all(|x| eval(x, table, row)),
        Expr::Or(v) => v.iter().any(|x| eval(x, table, row)),
        Expr::Not(x) => !eval(x, table, row),
        Expr::Compare { left, op, right } => match compare(left, right, table, row) {
            None => false,
            Some(o) => match op {
                CmpOp::Eq => o == Equal,
                CmpOp::NotEq => o != Equal,
                CmpOp::Lt => o == Less,
                CmpOp::LtEq => o != Greater,
                CmpOp::Gt => o == Greater,
                CmpOp::GtEq => o != Less,
            },
        },
        Expr::Between { operand, negated, low, high } => {
            let inside = compare(operand, low, table, row).is_some_and(|o| o != Less)
                && compare(operand, high, table, row).is_some_and(|o| o != Greater);
            inside != *negated
        }
        Expr::InList { operand, negated, list } => {
            let Some(Ok(c)) = operand_cell(operand, table, row) else { return false };
            list.iter().any(|l| c.cmp_literal(l) == Some(Equal)) != *negated
        }
        Expr::Like { operand, negated, pattern } => match operand_cell(operand, table, row) {
            Some(Ok(Cell::Text(s))) => like_match(s, pattern) != *negated,
            _ => false,
        },
        Expr::IsNull { negated, .. } => *negated,
    }
}

/// A non-negative function over join-variable assignments.
#[derive(Debug, Clone)]
struct Factor<'a> {
    vars: Vec<usize>,
    values: HashMap<Vec<Cell<'a>>, f64>,
}

impl<'a> Factor<'a> {
    fn scalar(v: f64) -> Self {
        Factor { vars: Vec::new(), values: HashMap::from([(Vec::new(), v)]) }
    }

    fn lookup(&self, vars: &[usize], key: &[Cell<'a>]) -> f64 {
        let k: Vec<Cell<'a>> = self.vars.iter().map(|v| key[vars.iter().position(|x| x == v).unwrap()]).collect();
        self.values.get(&k).copied().unwrap_or(0.0)
    }

    fn multiply(&self, other: &Factor<'a>) -> Factor<'a> {
        let shared: Vec<usize> = self.vars.iter().copied().filter(|v| other.vars.contains(v)).collect();
        let extra: Vec<usize> = other.vars.iter().copied().filter(|v| !self.vars.contains(v)).collect();
        let pick = |vars: &[usize], key: &[Cell<'a>], want: &[usize]| -> Vec<Cell<'a>> {
            want.iter().map(|w| key[vars.iter().position(|v| v == w).unwrap()]).collect()
        };
        let mut index: HashMap<Vec<Cell<'a>>, Vec<(Vec<Cell<'a>>, f64)>> = HashMap::new();
        for (k, v) in &other.values {
            index.entry(pick(&other.vars, k, &shared)).or_default().push((pick(&other.vars, k, &extra), *v));
        }
        let mut vars = self.vars.clone();
        vars.extend(&extra);
        let mut values = HashMap::new();
        for (k, v) in &self.values {
            if let Some(matches) = index.get(&pick(&self.vars, k, &shared)) {
                for (e, w) in matches {
                    let mut nk = k.clone();
                    nk.extend(e.iter().copied());
                    *values.entry(nk).or_insert(0.0) += v * w;
                }
            }
        }
        Factor { vars, values }
    }

    fn sum_out(&self, var: usize) -> Factor<'a> {
        let i = self.vars.iter().position(|&v| v == var).unwrap();
        let mut vars = self.vars.clone();
        vars.remove(i);
        let mut values = HashMap::new();
        for (k, v) in &self.values {
            let mut nk = k.clone();
            nk.remove(i);
            *values.entry(nk).or_insert(0.0) += v;
        }
        Factor { vars, values }
    }
}

/// Multiplies factors and sums out every variable not in `keep`, choosing
/// the variable whose elimination creates the smallest scope first.
fn eliminate<'a>(mut factors: Vec<Factor<'a>>, keep: &[usize]) -> Vec<Factor<'a>> {
    loop {
        let mut candidates: Vec<usize> =
            factors.iter().flat_map(|f| f.vars.iter().copied()).filter(|v| !keep.contains(v)).collect();
        candidates.sort_unstable();
        candidates.dedup();
        let Some(var) = candidates.into_iter().min_by_key(|v| {
            let mut scope: Vec<usize> =
                factors.iter().filter(|f| f.vars.contains(v)).flat_map(|f| f.vars.iter().copied()).collect();
            scope.sort_unstable();
            scope.dedup();
            let size: usize = factors.iter().filter(|f| f.vars.contains(v)).map(|f| f.values.len()).sum();
            (scope.len(), size)
        }) else {
            return factors;
        };
        let (with, without): (Vec<Factor<'a>>, Vec<Factor<'a>>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        let mut product = with[0].clone();
        for f in &with[1..] {
            product = product.multiply(f);
        }
        factors = without;
        factors.push(product.sum_out(var));
    }
}

/// Exact intermediate result sizes for one bound query.
pub struct Executor<'a> {
    pub bound: &'a BoundQuery,
    pub tables: &'a [Table],
    /// Rows passing each alias's filters.
    pub selected: Vec<Vec<u32>>,
    memo: HashMap<u32, f64>,
}

impl<'a> Executor<'a> {
    pub fn new(bound: &'a BoundQuery, tables: &'a [Table]) -> Self {
        let selected = bound
            .tables
            .iter()
            .zip(&bound.filters)
            .map(|(&ti, filters)| {
                let t = &tables[ti];
                (0..t.rows()).filter(|&r| filters.iter().all(|f| eval(f, t, r))).map(|r| r as u32).collect()
            })
            .collect();
        Executor { bound, tables, selected, memo: HashMap::new() }
    }

    /// Reuses counts computed by an earlier executor for the same query.
    pub fn with_memo(mut self, memo: HashMap<u32, f64>) -> Self {
        self.memo = memo;
        self
    }

    pub fn into_memo(self) -> HashMap<u32, f64> {
        self.memo
    }

    pub fn table(&self, pos: usize) -> &'a Table {
        &self.tables[self.bound.tables[pos]]
    }

    pub fn n(&self) -> usize {
        self.bound.aliases.len()
    }

    /// Edges with both ends inside `mask`.
    pub fn edges_within(&self, mask: u32) -> impl Iterator<Item = &JoinEdge> + '_ {
        self.bound.edges.iter().filter(move |e| mask & (1 << e.left.0) != 0 && mask & (1 << e.right.0) != 0)
    }

    /// Edges with one end in `a` and the other in `b`.
    pub fn edges_between(&self, a: u32, b: u32) -> impl Iterator<Item = &JoinEdge> + '_ {
        self.bound.edges.iter().filter(move |e| {
            let (l, r) = (1u32 << e.left.0, 1u32 << e.right.0);
            (a & l != 0 && b & r != 0) || (a & r != 0 && b & l != 0)
        })
    }

    /// Splits `mask` into connected components of the join graph.
    pub fn components(&self, mask: u32) -> Vec<u32> {
        let mut rest = mask;
        let mut out = Vec::new();
        while rest != 0 {
            let mut comp = rest & rest.wrapping_neg();
            loop {
                let mut grown = comp;
                for e in self.edges_within(mask) {
                    let (l, r) = (1u32 << e.left.0, 1u32 << e.right.0);
                    if grown & l != 0 || grown & r != 0 {
                        grown |= l | r;
                    }
                }
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            out.push(comp);
            rest &= !comp;
        }
        out
    }

    pub fn is_connected(&self, mask: u32) -> bool {
        self.components(mask).len() == 1
    }

    /// Equivalence classes of join columns under the edges inside `mask`.
    fn classes(&self, mask: u32) -> Vec<(BoundColumn, usize)> {
        let mut cols: Vec<BoundColumn> = Vec::new();
        let mut parent: Vec<usize> = Vec::new();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let id = |c: BoundColumn, cols: &mut Vec<BoundColumn>, parent: &mut Vec<usize>| {
            cols.iter().position(|&x| x == c).unwrap_or_else(|| {
                cols.push(c);
                parent.push(parent.len());
                cols.len() - 1
            })
        };
        for e in self.edges_within(mask) {
            let a = id(e.left, &mut cols, &mut parent);
            let b = id(e.right, &mut cols, &mut parent);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..cols.len()).map(|i| (cols[i], find(&mut parent, i))).collect()
    }

    /// Per-position join variables and the row keys over them.
    fn factor_of(&self, pos: usize, classes: &[(BoundColumn, usize)]) -> (Vec<usize>, Vec<(u32, Option<Vec<Cell<'a>>>)>) {
        let mine: Vec<(usize, usize)> =
            classes.iter().filter(|(c, _)| c.0 == pos).map(|(c, k)| (c.1, *k)).collect();
        let mut vars: Vec<usize> = mine.iter().map(|&(_, k)| k).collect();
        vars.sort_unstable();
        vars.dedup();
        let t = self.table(pos);
        let keys = self.selected[pos]
            .iter()
            .map(|&r| {
                let mut key: Vec<Option<Cell<'a>>> = vec![None; vars.len()];
                for &(col, k) in &mine {
                    let v = cell(t, col, r as usize);
                    let slot = &mut key[vars.iter().position(|&x| x == k).unwrap()];
                    match slot {
                        Some(prev) if *prev != v => return (r, None),
                        _ => *slot = Some(v),
                    }
                }
                (r, Some(key.into_iter().map(Option::unwrap).collect()))
            })
            .collect();
        (vars, keys)
    }

    fn factor(&self, pos: usize, classes: &[(BoundColumn, usize)]) -> Factor<'a> {
        let (vars, keys) = self.factor_of(pos, classes);
        let mut values = HashMap::new();
        for (_, k) in keys {
            if let Some(k) = k {
                *values.entry(k).or_insert(0.0) += 1.0;
            }
        }
        Factor { vars, values }
    }

    fn positions(&self, mask: u32) -> impl Iterator<Item = usize> {
        let n = self.n();
        (0..n).filter(move |p| mask & (1 << p) != 0)
    }

    /// Exact row count of the join of `mask`; disconnected subsets multiply.
    pub fn true_card(&mut self, mask: u32) -> f64 {
        if let Some(&c) = self.memo.get(&mask) {
            return c;
        }
        let classes = self.classes(mask);
        let factors: Vec<Factor<'a>> = self.positions(mask).map(|p| self.factor(p, &classes)).collect();
        let c = eliminate(factors, &[]).iter().map(|f| f.values.values().sum::<f64>()).product();
        self.memo.insert(mask, c);
        c
    }

    /// For each selected row of `pos`, the number of full-query result rows
    /// it takes part in.
    pub fn row_weights(&self, pos: usize) -> Vec<(u32, f64)> {
        let full = (1u32 << self.n()) - 1;
        let classes = self.classes(full);
        let (vars, keys) = self.factor_of(pos, &classes);
        let others: Vec<Factor<'a>> =
            self.positions(full).filter(|&p| p != pos).map(|p| self.factor(p, &classes)).collect();
        let rest = if others.is_empty() { vec![Factor::scalar(1.0)] } else { eliminate(others, &vars) };
        keys.into_iter()
            .map(|(r, k)| {
                let w = match k {
                    None => 0.0,
                    Some(k) => rest.iter().map(|f| f.lookup(&vars, &k)).product(),
                };
                (r, w)
            })
            .collect()
    }
}

impl std::hash::Hash for Cell<'_> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Cell::Int(v) => (0u8, v).hash(state),
            Cell::Text(s) => (1u8, s).hash(state),
        }
    }
}

impl Eq for Cell<'_> {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn like_patterns() {
        assert!(like_match("character-name-in-title", "%name%"));
        assert!(like_match("abc", "a_c"));
        assert!(like_match("", "%"));
        assert!(!like_match("abc", "a_"));
        assert!(like_match("sequel", "sequel"));
        assert!(!like_match("sequels", "sequel"));
        assert!(like_match("a%b", "a%b"));
    }
}
