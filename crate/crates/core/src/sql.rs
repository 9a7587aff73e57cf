//! A small parser for the select-project-join SQL dialect used by join-order
//! workloads: comma or inner-join FROM lists, conjunctive/disjunctive WHERE
//! clauses over column comparisons, and simple aggregates in the select list.
//!
//! Nested queries are rejected. A `%s` token parses as a placeholder literal,
//! which is how query templates carry their unfilled predicate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqlError {
    #[error("SQL parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported SQL: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn new(qualifier: &str, column: &str) -> Self {
        ColumnRef { qualifier: Some(qualifier.to_owned()), column: column.to_owned() }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{}.{}", quote_ident(q), quote_ident(&self.column)),
            None => f.write_str(&quote_ident(&self.column)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Null,
    Placeholder,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Float(v) if v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{v:.1}"),
            Literal::Float(v) => write!(f, "{v}"),
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Null => f.write_str("NULL"),
            Literal::Placeholder => f.write_str("%s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Column(ColumnRef),
    Literal(Literal),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => c.fmt(f),
            Operand::Literal(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::NotEq => "<>",
            CmpOp::Lt => "<",
            CmpOp::LtEq => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtEq => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Compare { left: Operand, op: CmpOp, right: Operand },
    Between { operand: Operand, negated: bool, low: Operand, high: Operand },
    InList { operand: Operand, negated: bool, list: Vec<Literal> },
    Like { operand: Operand, negated: bool, pattern: String },
    IsNull { operand: Operand, negated: bool },
}

impl Expr {
    /// Column references anywhere in the expression.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.visit_operands(&mut |o| {
            if let Operand::Column(c) = o {
                out.push(c);
            }
        });
        out
    }

    pub fn has_placeholder(&self) -> bool {
        let mut found = false;
        self.visit_operands(&mut |o| {
            if matches!(o, Operand::Literal(Literal::Placeholder)) {
                found = true;
            }
        });
        found
    }

    fn visit_operands<'a>(&'a self, f: &mut dyn FnMut(&'a Operand)) {
        match self {
            Expr::And(v) | Expr::Or(v) => v.iter().for_each(|e| e.visit_operands(f)),
            Expr::Not(e) => e.visit_operands(f),
            Expr::Compare { left, right, .. } => {
                f(left);
                f(right);
            }
            Expr::Between { operand, low, high, .. } => {
                f(operand);
                f(low);
                f(high);
            }
            Expr::InList { operand, .. } | Expr::Like { operand, .. } | Expr::IsNull { operand, .. } => f(operand),
        }
    }

    /// Replaces every placeholder literal with `value`.
    pub fn fill_placeholder(&mut self, value: &Literal) {
        let fill = |o: &mut Operand| {
            if matches!(o, Operand::Literal(Literal::Placeholder)) {
                *o = Operand::Literal(value.clone());
            }
        };
        match self {
            Expr::And(v) | Expr::Or(v) => v.iter_mut().for_each(|e| e.fill_placeholder(value)),
            Expr::Not(e) => e.fill_placeholder(value),
            Expr::Compare { left, right, .. } => {
                fill(left);
                fill(right);
            }
            Expr::Between { operand, low, high, .. } => {
                fill(operand);
                fill(low);
                fill(high);
            }
            Expr::InList { operand, .. } | Expr::Like { operand, .. } | Expr::IsNull { operand, .. } => fill(operand),
        }
    }

    /// Flattens top-level ANDs.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::And(v) => v.iter().flat_map(Expr::conjuncts).collect(),
            e => vec![e],
        }
    }

    pub fn and(mut parts: Vec<Expr>) -> Option<Expr> {
        match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(Expr::And(parts)),
        }
    }

    fn fmt_nested(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::And(_) | Expr::Or(_) => write!(f, "({self})"),
            _ => fmt::Display::fmt(self, f),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let not = |n: bool| if n { "NOT " } else { "" };
        match self {
            Expr::And(v) | Expr::Or(v) => {
                let sep = if matches!(self, Expr::And(_)) { " AND " } else { " OR " };
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    e.fmt_nested(f)?;
                }
                Ok(())
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                e.fmt_nested(f)
            }
            Expr::Compare { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
            Expr::Between { operand, negated, low, high } => {
                write!(f, "{operand} {}BETWEEN {low} AND {high}", not(*negated))
            }
            Expr::InList { operand, negated, list } => {
                let items: Vec<String> = list.iter().map(Literal::to_string).collect();
                write!(f, "{operand} {}IN ({})", not(*negated), items.join(", "))
            }
            Expr::Like { operand, negated, pattern } => {
                write!(f, "{operand} {}LIKE {}", not(*negated), Literal::Str(pattern.clone()))
            }
            Expr::IsNull { operand, negated } => write!(f, "{operand} IS {}NULL", not(*negated)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectItem {
    Wildcard,
    CountStar,
    Aggregate { func: String, arg: ColumnRef, alias: Option<String> },
    Column { column: ColumnRef, alias: Option<String> },
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Wildcard => f.write_str("*"),
            SelectItem::CountStar => f.write_str("count(*)"),
            SelectItem::Aggregate { func, arg, alias } => {
                write!(f, "{func}({arg})")?;
                alias.as_ref().map_or(Ok(()), |a| write!(f, " AS {}", quote_ident(a)))
            }
            SelectItem::Column { column, alias } => {
                write!(f, "{column}")?;
                alias.as_ref().map_or(Ok(()), |a| write!(f, " AS {}", quote_ident(a)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRef {
    pub table: String,
    pub alias: String,
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.table == self.alias {
            f.write_str(&quote_ident(&self.table))
        } else {
            write!(f, "{} AS {}", quote_ident(&self.table), quote_ident(&self.alias))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectQuery {
    pub distinct: bool,
    pub projection: Vec<SelectItem>,
    pub from: Vec<TableRef>,
    pub selection: Option<Expr>,
}

impl SelectQuery {
    pub fn aliases(&self) -> Vec<&str> {
        self.from.iter().map(|t| t.alias.as_str()).collect()
    }

    pub fn table_for(&self, alias: &str) -> Option<&str> {
        self.from.iter().find(|t| t.alias == alias).map(|t| t.table.as_str())
    }

    pub fn conjuncts(&self) -> Vec<&Expr> {
        self.selection.as_ref().map(Expr::conjuncts).unwrap_or_default()
    }

    pub fn is_aggregate(&self) -> bool {
        self.projection
            .iter()
            .any(|p| matches!(p, SelectItem::CountStar | SelectItem::Aggregate { .. }))
    }

    /// Canonical rendering terminated by `;`.
    pub fn to_sql(&self) -> String {
        format!("{self};")
    }
}

impl fmt::Display for SelectQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        let items: Vec<String> = self.projection.iter().map(SelectItem::to_string).collect();
        f.write_str(&items.join(", "))?;
        let from: Vec<String> = self.from.iter().map(TableRef::to_string).collect();
        write!(f, " FROM {}", from.join(", "))?;
        if let Some(w) = &self.selection {
            write!(f, " WHERE {w}")?;
        }
        Ok(())
    }
}

fn quote_ident(s: &str) -> String {
    let plain = s
        .chars()
        .enumerate()
        .all(|(i, c)| c == '_' || c.is_ascii_lowercase() || (i > 0 && c.is_ascii_digit()))
        && !s.is_empty()
        && !is_keyword(s);
    if plain {
        s.to_owned()
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

const KEYWORDS: &[&str] = &[
    "select", "distinct", "from", "where", "and", "or", "not", "as", "between", "in", "like", "is", "null", "join",
    "inner", "on", "group", "order", "by", "limit", "union", "having", "left", "right", "full", "outer", "cross",
    "with",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s.to_ascii_lowercase().as_str())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Quoted(String),
    Str(String),
    Int(i64),
    Float(f64),
    Symbol(&'static str),
    Placeholder,
}

struct Lexed {
    tok: Tok,
    offset: usize,
}

fn lex(sql: &str) -> Result<Vec<Lexed>, SqlError> {
    let b = sql.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |offset, message: &str| SqlError::Parse { offset, message: message.to_owned() };
    while i < b.len() {
        let c = b[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'-' && b.get(i + 1) == Some(&b'-') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
            let end = sql[i + 2..].find("*/").ok_or_else(|| err(i, "unterminated comment"))?;
            i += 2 + end + 2;
        } else if c == b'%' && b.get(i + 1) == Some(&b's') {
            out.push(Lexed { tok: Tok::Placeholder, offset: start });
            i += 2;
        } else if c == b'\'' {
            let mut s = String::new();
            i += 1;
            loop {
                let rest = &sql[i..];
                let Some(q) = rest.find('\'') else {
                    return Err(err(start, "unterminated string literal"));
                };
                s.push_str(&rest[..q]);
                i += q + 1;
                if b.get(i) == Some(&b'\'') {
                    s.push('\'');
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Lexed { tok: Tok::Str(s), offset: start });
        } else if c == b'"' {
            let rest = &sql[i + 1..];
            let q = rest.find('"').ok_or_else(|| err(start, "unterminated quoted identifier"))?;
            out.push(Lexed { tok: Tok::Quoted(rest[..q].to_owned()), offset: start });
            i += q + 2;
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                i += 1;
                if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                    i += 1;
                }
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text = &sql[start..i];
            let tok = match text.parse::<i64>() {
                Ok(v) => Tok::Int(v),
                Err(_) => Tok::Float(text.parse().map_err(|_| err(start, "bad number"))?),
            };
            out.push(Lexed { tok, offset: start });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push(Lexed { tok: Tok::Word(sql[start..i].to_owned()), offset: start });
        } else {
            let two = sql.get(i..i + 2).unwrap_or("");
            let sym = match two {
                "<=" => Some("<="),
                ">=" => Some(">="),
                "<>" => Some("<>"),
                "!=" => Some("<>"),
                _ => None,
            };
            if let Some(s) = sym {
                out.push(Lexed { tok: Tok::Symbol(s), offset: start });
                i += 2;
                continue;
            }
            let sym = match c {
                b',' => ",",
                b'.' => ".",
                b'(' => "(",
                b')' => ")",
                b'*' => "*",
                b'=' => "=",
                b'<' => "<",
                b'>' => ">",
                b';' => ";",
                b'-' => "-",
                _ => return Err(err(start, &format!("unexpected character `{}`", c as char))),
            };
            out.push(Lexed { tok: Tok::Symbol(sym), offset: start });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|l| &l.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |l| l.offset)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Parse { offset: self.offset(), message: message.into() })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.fail(format!("expected {}", kw.to_ascii_uppercase()))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Symbol(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if !is_keyword(&w) => {
                self.pos += 1;
                Ok(w.to_ascii_lowercase())
            }
            Some(Tok::Quoted(q)) => {
                self.pos += 1;
                Ok(q)
            }
            _ => self.fail("expected identifier"),
        }
    }

    fn at_ident(&self) -> bool {
        match self.peek() {
            Some(Tok::Word(w)) => !is_keyword(w),
            Some(Tok::Quoted(_)) => true,
            _ => false,
        }
    }

    fn query(&mut self) -> Result<SelectQuery, SqlError> {
        if self.is_kw("with") {
            return Err(SqlError::Unsupported("common table expressions".into()));
        }
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        let mut projection = vec![self.select_item()?];
        while self.eat_sym(",") {
            projection.push(self.select_item()?);
        }
        self.expect_kw("from")?;
        let mut from = Vec::new();
        let mut join_conds = Vec::new();
        from.push(self.table_ref()?);
        loop {
            if self.eat_sym(",") {
                from.push(self.table_ref()?);
            } else if self.is_kw("join") || self.is_kw("inner") {
                if self.eat_kw("inner") {
                    self.expect_kw("join")?;
                } else {
                    self.pos += 1;
                }
                from.push(self.table_ref()?);
                self.expect_kw("on")?;
                join_conds.push(self.or_expr()?);
            } else if ["left", "right", "full", "cross"].iter().any(|k| self.is_kw(k)) {
                return Err(SqlError::Unsupported("outer and cross joins".into()));
            } else {
                break;
            }
        }
        let mut selection = if self.eat_kw("where") { Some(self.or_expr()?) } else { None };
        if !join_conds.is_empty() {
            let mut parts: Vec<Expr> = join_conds;
            if let Some(w) = selection.take() {
                parts.push(w);
            }
            let flat: Vec<Expr> = parts
                .into_iter()
                .flat_map(|e| match e {
                    Expr::And(v) => v,
                    e => vec![e],
                })
                .collect();
            selection = Expr::and(flat);
        }
        for kw in ["group", "order", "limit", "having", "union"] {
            if self.is_kw(kw) {
                return Err(SqlError::Unsupported(format!("{} clause", kw.to_ascii_uppercase())));
            }
        }
        self.eat_sym(";");
        if self.peek().is_some() {
            return self.fail("trailing input");
        }
        let mut seen = std::collections::HashSet::new();
        for t in &from {
            if !seen.insert(t.alias.as_str()) {
                return Err(SqlError::Parse { offset: 0, message: format!("duplicate alias `{}`", t.alias) });
            }
        }
        Ok(SelectQuery { distinct, projection, from, selection })
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard);
        }
        let is_call = matches!(self.peek(), Some(Tok::Word(_))) && matches!(self.peek_at(1), Some(Tok::Symbol("(")));
        let item = if is_call {
            let Some(Tok::Word(func)) = self.peek().cloned() else { unreachable!() };
            let func = func.to_ascii_lowercase();
            self.pos += 2;
            if func == "count" && self.eat_sym("*") {
                self.expect_sym(")")?;
                SelectItem::CountStar
            } else if matches!(func.as_str(), "min" | "max" | "count" | "sum" | "avg") {
                let arg = self.column_ref()?;
                self.expect_sym(")")?;
                SelectItem::Aggregate { func, arg, alias: None }
            } else {
                return Err(SqlError::Unsupported(format!("function `{func}`")));
            }
        } else {
            SelectItem::Column { column: self.column_ref()?, alias: None }
        };
        let alias = if self.eat_kw("as") {
            Some(self.ident()?)
        } else if self.at_ident() {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(match item {
            SelectItem::Aggregate { func, arg, .. } => SelectItem::Aggregate { func, arg, alias },
            SelectItem::Column { column, .. } => SelectItem::Column { column, alias },
            other => other,
        })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.is_sym("(") {
            return Err(SqlError::Unsupported("subquery in FROM".into()));
        }
        let table = self.ident()?;
        let alias = if self.eat_kw("as") || self.at_ident() { self.ident()? } else { table.clone() };
        Ok(TableRef { table, alias })
    }

    fn column_ref(&mut self) -> Result<ColumnRef, SqlError> {
        let first = self.ident()?;
        if self.eat_sym(".") {
            let column = self.ident()?;
            Ok(ColumnRef { qualifier: Some(first), column })
        } else {
            Ok(ColumnRef { qualifier: None, column: first })
        }
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut parts = vec![self.and_expr()?];
        while self.eat_kw("or") {
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::Or(parts) })
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut parts = vec![self.not_expr()?];
        while self.eat_kw("and") {
            parts.push(self.not_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::And(parts) })
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.eat_kw("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        if self.is_sym("(") {
            if matches!(self.peek_at(1), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("select")) {
                return Err(SqlError::Unsupported("nested query".into()));
            }
            self.pos += 1;
            let e = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        self.predicate()
    }

    fn operand(&mut self) -> Result<Operand, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("null") => {
                self.pos += 1;
                Ok(Operand::Literal(Literal::Null))
            }
            Some(Tok::Word(_)) | Some(Tok::Quoted(_)) => Ok(Operand::Column(self.column_ref()?)),
            Some(Tok::Symbol("(")) => Err(SqlError::Unsupported("nested query or expression operand".into())),
            _ => Ok(Operand::Literal(self.literal()?)),
        }
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let neg = self.eat_sym("-");
        let lit = match self.peek().cloned() {
            Some(Tok::Int(v)) => Literal::Int(if neg { -v } else { v }),
            Some(Tok::Float(v)) => Literal::Float(if neg { -v } else { v }),
            Some(Tok::Str(s)) if !neg => Literal::Str(s),
            Some(Tok::Placeholder) if !neg => Literal::Placeholder,
            Some(Tok::Word(w)) if !neg && w.eq_ignore_ascii_case("null") => Literal::Null,
            _ => return self.fail("expected literal"),
        };
        self.pos += 1;
        Ok(lit)
    }

    fn predicate(&mut self) -> Result<Expr, SqlError> {
        let operand = self.operand()?;
        if self.eat_kw("is") {
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(Expr::IsNull { operand, negated });
        }
        let negated = self.eat_kw("not");
        if self.eat_kw("between") {
            let low = self.operand()?;
            self.expect_kw("and")?;
            let high = self.operand()?;
            return Ok(Expr::Between { operand, negated, low, high });
        }
        if self.eat_kw("in") {
            self.expect_sym("(")?;
            if self.is_kw("select") {
                return Err(SqlError::Unsupported("nested query".into()));
            }
            let mut list = vec![self.literal()?];
            while self.eat_sym(",") {
                list.push(self.literal()?);
            }
            self.expect_sym(")")?;
            return Ok(Expr::InList { operand, negated, list });
        }
        if self.eat_kw("like") {
            return match self.literal()? {
                Literal::Str(pattern) => Ok(Expr::Like { operand, negated, pattern }),
                _ => self.fail("LIKE expects a string pattern"),
            };
        }
        if negated {
            return self.fail("expected BETWEEN, IN or LIKE after NOT");
        }
        let op = match self.peek() {
            Some(Tok::Symbol("=")) => CmpOp::Eq,
            Some(Tok::Symbol("<>")) => CmpOp::NotEq,
            Some(Tok::Symbol("<")) => CmpOp::Lt,
            Some(Tok::Symbol("<=")) => CmpOp::LtEq,
            Some(Tok::Symbol(">")) => CmpOp::Gt,
            Some(Tok::Symbol(">=")) => CmpOp::GtEq,
            _ => return self.fail("expected comparison operator"),
        };
        self.pos += 1;
        let right = self.operand()?;
        Ok(Expr::Compare { left: operand, op, right })
    }
}

/// Parses one SELECT statement of the supported dialect.
pub fn parse_select(sql: &str) -> Result<SelectQuery, SqlError> {
    let toks = lex(sql)?;
    let mut p = Parser { toks, pos: 0, len: sql.len() };
    p.query()
}

/// Whitespace-collapsed, trimmed SQL without a trailing semicolon.
pub fn normalize_sql(sql: &str) -> String {
    let collapsed = sql.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(';').trim_end().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_job_style_query() {
        let q = parse_select(
            "SELECT MIN(t.title) AS movie_title FROM keyword AS k, movie_keyword mk, title t \
             WHERE k.keyword LIKE '%sequel%' AND mk.keyword_id = k.id AND t.id = mk.movie_id \
             AND t.production_year > 2005 AND (k.id = 1 OR k.id IN (2, 3));",
        )
        .unwrap();
        assert_eq!(q.aliases(), vec!["k", "mk", "t"]);
        assert_eq!(q.table_for("mk"), Some("movie_keyword"));
        assert_eq!(q.conjuncts().len(), 5);
        assert!(q.is_aggregate());
        assert_eq!(
            q.to_sql(),
            "SELECT min(t.title) AS movie_title FROM keyword AS k, movie_keyword AS mk, title AS t \
             WHERE k.keyword LIKE '%sequel%' AND mk.keyword_id = k.id AND t.id = mk.movie_id \
             AND t.production_year > 2005 AND (k.id = 1 OR k.id IN (1 + 1, 3));"
                .replace("1 + 1", "2")
        );
    }

    #[test]
    fn explicit_joins_flatten() {
        let q = parse_select("select count(*) from a join b on a.id = b.a_id inner join c on c.b = b.id where a.x = 1").unwrap();
        assert_eq!(q.to_sql(), "SELECT count(*) FROM a, b, c WHERE a.id = b.a_id AND c.b = b.id AND a.x = 1;");
    }

    #[test]
    fn placeholder_and_fill() {
        let mut q = parse_select("SELECT count(*) FROM cn, mc WHERE cn.country_code = %s AND cn.id = mc.company_id;").unwrap();
        assert!(q.selection.as_ref().unwrap().has_placeholder());
        assert_eq!(q.to_sql(), "SELECT count(*) FROM cn, mc WHERE cn.country_code = %s AND cn.id = mc.company_id;");
        q.selection.as_mut().unwrap().fill_placeholder(&Literal::Str("[de]".into()));
        assert_eq!(q.to_sql(), "SELECT count(*) FROM cn, mc WHERE cn.country_code = '[de]' AND cn.id = mc.company_id;");
    }

    #[test]
    fn comments_are_skipped() {
        let q = parse_select("/*+\nSeqScan(a)\nLeading(a)\n*/\nSELECT * FROM a -- trailing\n").unwrap();
        assert_eq!(q.to_sql(), "SELECT * FROM a;");
    }

    #[test]
    fn literals_and_escapes() {
        let q = parse_select("SELECT * FROM a WHERE a.s = 'it''s' AND a.f >= -1.5 AND a.n IS NOT NULL AND a.y NOT BETWEEN 1 AND 2").unwrap();
        assert_eq!(
            q.to_sql(),
            "SELECT * FROM a WHERE a.s = 'it''s' AND a.f >= -1.5 AND a.n IS NOT NULL AND a.y NOT BETWEEN 1 AND 2;"
        );
    }

    #[test]
    fn rejects_unsupported() {
        for bad in [
            "SELECT * FROM a WHERE a.id IN (SELECT b.id FROM b)",
            "SELECT * FROM (SELECT 1) x",
            "WITH x AS (SELECT 1) SELECT * FROM x",
            "SELECT * FROM a LEFT JOIN b ON a.id = b.id",
            "SELECT * FROM a GROUP BY a.x",
            "SELECT lower(a.x) FROM a",
        ] {
            assert!(matches!(parse_select(bad), Err(SqlError::Unsupported(_))), "{bad}");
        }
        assert!(matches!(parse_select("SELECT * FROM a, a"), Err(SqlError::Parse { .. })));
        assert!(matches!(parse_select("SELECT * FROM a WHERE a.x = 'open"), Err(SqlError::Parse { .. })));
        assert!(matches!(parse_select("SELECT * FROM a b c"), Err(SqlError::Parse { .. })));
    }

    #[test]
    fn normalize() {
        assert_eq!(normalize_sql("  SELECT *\n  FROM a ;"), "SELECT * FROM a");
    }
}
