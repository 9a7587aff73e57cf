//! Conversion between simplified plans and planner hint text.
//!
//! A hint set pins a complete plan with three parts: one scan hint per
//! table, one join hint per join node, and a single `Leading` hint whose
//! fully parenthesized expression fixes both join order and tree shape.
//!
//! ```text
//! SeqScan(k)
//! IndexScan(mk)
//! NestLoop(k mk)
//! Leading(((k mk)t))
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan_model::{JoinType, ScanType, SimpleNode, SimplifiedPlan};

pub const COMMENT_OPEN: &str = "/*+";
pub const COMMENT_CLOSE: &str = "*/";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("hint parse error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HintError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("inconsistent hints: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScanHint {
    pub scan: ScanType,
    pub alias: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinHint {
    pub join: JoinType,
    pub aliases: Vec<String>,
}

/// Join-order expression of a `Leading` hint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leading {
    Table(String),
    Pair(Box<Leading>, Box<Leading>),
}

impl Leading {
    pub fn pair(left: Leading, right: Leading) -> Self {
        Leading::Pair(Box::new(left), Box::new(right))
    }

    /// Tables in in-order sequence.
    pub fn tables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Leading::Table(t) => out.push(t),
            Leading::Pair(l, r) => {
                l.collect(out);
                r.collect(out);
            }
        }
    }
}

/// Renders the expression; a separating space is only emitted after a bare
/// table name, giving `(((k mk)t)mi)` for a left-deep tree.
impl fmt::Display for Leading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leading::Table(t) => write_ident(f, t),
            Leading::Pair(l, r) => {
                f.write_str("(")?;
                l.fmt(f)?;
                if matches!(**l, Leading::Table(_)) {
                    f.write_str(" ")?;
                }
                r.fmt(f)?;
                f.write_str(")")
            }
        }
    }
}

/// Scan hints, join hints and the leading hint for one plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HintSet {
    pub scan_hints: Vec<ScanHint>,
    pub join_hints: Vec<JoinHint>,
    pub leading: Leading,
}

impl HintSet {
    /// `Leading(...)` line.
    pub fn leading_hint(&self) -> String {
        format!("Leading({})", self.leading)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.scan_hints.len() + self.join_hints.len() + 1);
        for s in &self.scan_hints {
            out.push(format!("{}({})", s.scan.hint_name(), ident(&s.alias)));
        }
        for j in &self.join_hints {
            let args: Vec<String> = j.aliases.iter().map(|a| ident(a)).collect();
            out.push(format!("{}({})", j.join.hint_name(), args.join(" ")));
        }
        out.push(self.leading_hint());
        out
    }

    /// All hints on one line, space separated.
    pub fn to_single_line(&self) -> String {
        self.lines().join(" ")
    }

    pub fn tables(&self) -> Vec<&str> {
        self.leading.tables()
    }

    /// Reorders hints into the form `transform_plan` emits.
    pub fn canonical(&self) -> Result<HintSet, HintError> {
        Ok(transform_plan(&hints_to_plan(self)?))
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical().map(|c| &c == self).unwrap_or(false)
    }
}

impl fmt::Display for HintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_hints(self))
    }
}

fn is_plain_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.'))
}

fn ident(s: &str) -> String {
    if is_plain_ident(s) {
        s.to_owned()
    } else {
        format!("\"{}\"", s.replace('"', "\"\""))
    }
}

fn write_ident(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if is_plain_ident(s) {
        f.write_str(s)
    } else {
        write!(f, "\"{}\"", s.replace('"', "\"\""))
    }
}

/// Serializes a simplified plan.
///
/// Scan hints follow leaf order, join hints are emitted once both children
/// have been visited, and the leading expression is the in-order rendering
/// of the tree.
pub fn transform_plan(plan: &SimplifiedPlan) -> HintSet {
    fn traverse(node: &SimpleNode, scans: &mut Vec<ScanHint>, joins: &mut Vec<JoinHint>) -> (Vec<String>, Leading) {
        match node {
            SimpleNode::Scan { scan, alias } => {
                scans.push(ScanHint { scan: *scan, alias: alias.clone() });
                (vec![alias.clone()], Leading::Table(alias.clone()))
            }
            SimpleNode::Join { join, left, right } => {
                let (mut lt, ll) = traverse(left, scans, joins);
                let (rt, rl) = traverse(right, scans, joins);
                lt.extend(rt);
                joins.push(JoinHint { join: *join, aliases: lt.clone() });
                (lt, Leading::pair(ll, rl))
            }
        }
    }
    let mut scan_hints = Vec::new();
    let mut join_hints = Vec::new();
    let (_, leading) = traverse(plan.root(), &mut scan_hints, &mut join_hints);
    HintSet { scan_hints, join_hints, leading }
}

/// One hint per line in scan, join, leading order.
pub fn render_hints(h: &HintSet) -> String {
    h.lines().join("\n")
}

/// Hint block in the comment form the planner plugin reads.
pub fn render_hints_comment(h: &HintSet) -> String {
    format!("{COMMENT_OPEN}\n{}\n{COMMENT_CLOSE}", render_hints(h))
}

/// Prepends the hint comment to a SQL statement.
pub fn inject_hints(sql: &str, h: &HintSet) -> String {
    format!("{}\n{}", render_hints_comment(h), sql.trim_start())
}

/// Rebuilds the unique plan whose hints are `h` (up to hint order).
pub fn hints_to_plan(h: &HintSet) -> Result<SimplifiedPlan, HintError> {
    check_consistency(h)?;
    let scans: HashMap<&str, ScanType> = h.scan_hints.iter().map(|s| (s.alias.as_str(), s.scan)).collect();
    let joins: HashMap<Vec<&str>, JoinType> = h
        .join_hints
        .iter()
        .map(|j| (sorted(j.aliases.iter().map(String::as_str)), j.join))
        .collect();

    fn build(
        l: &Leading,
        scans: &HashMap<&str, ScanType>,
        joins: &HashMap<Vec<&str>, JoinType>,
    ) -> Result<SimpleNode, HintError> {
        match l {
            Leading::Table(t) => Ok(SimpleNode::scan(scans[t.as_str()], t.clone())),
            Leading::Pair(a, b) => {
                let key = sorted(l.tables().into_iter());
                let join = *joins
                    .get(&key)
                    .ok_or_else(|| HintError::Inconsistent(format!("no join hint for ({})", key.join(" "))))?;
                Ok(SimpleNode::join(join, build(a, scans, joins)?, build(b, scans, joins)?))
            }
        }
    }

    let root = build(&h.leading, &scans, &joins)?;
    SimplifiedPlan::new(root).map_err(|e| HintError::Inconsistent(e.to_string()))
}

fn sorted<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut v: Vec<&str> = it.collect();
    v.sort_unstable();
    v
}

/// Validates alias coverage and the join/leading correspondence.
pub fn check_consistency(h: &HintSet) -> Result<(), HintError> {
    let inconsistent = |m: String| Err(HintError::Inconsistent(m));
    let mut scan_aliases = HashSet::new();
    for s in &h.scan_hints {
        if !scan_aliases.insert(s.alias.as_str()) {
            return inconsistent(format!("table `{}` has more than one scan hint", s.alias));
        }
    }
    let leading_tables = h.leading.tables();
    let mut seen = HashSet::new();
    for t in &leading_tables {
        if !seen.insert(*t) {
            return inconsistent(format!("table `{t}` appears twice in Leading"));
        }
        if !scan_aliases.contains(t) {
            return inconsistent(format!("Leading mentions `{t}` which has no scan hint"));
        }
    }
    if let Some(extra) = scan_aliases.iter().find(|a| !seen.contains(*a)) {
        return inconsistent(format!("scan hint for `{extra}` which is absent from Leading"));
    }

    let mut expected: HashMap<Vec<&str>, usize> = HashMap::new();
    fn internal_sets<'a>(l: &'a Leading, out: &mut HashMap<Vec<&'a str>, usize>) {
        if let Leading::Pair(a, b) = l {
            *out.entry(sorted(l.tables().into_iter())).or_default() += 1;
            internal_sets(a, out);
            internal_sets(b, out);
        }
    }
    internal_sets(&h.leading, &mut expected);
    if h.join_hints.len() != expected.len() {
        return inconsistent(format!(
            "{} join hints for {} joins in Leading",
            h.join_hints.len(),
            expected.len()
        ));
    }
    let mut matched = HashSet::new();
    for j in &h.join_hints {
        let key = sorted(j.aliases.iter().map(String::as_str));
        if key.windows(2).any(|w| w[0] == w[1]) {
            return inconsistent(format!("join hint {}({}) repeats a table", j.join, j.aliases.join(" ")));
        }
        if !expected.contains_key(&key) {
            return inconsistent(format!(
                "join hint {}({}) matches no join in Leading",
                j.join,
                j.aliases.join(" ")
            ));
        }
        if !matched.insert(key) {
            return inconsistent(format!("duplicate join hint over ({})", j.aliases.join(" ")));
        }
    }
    Ok(())
}

/// Parses hint text (optionally wrapped in `/*+ ... */`) and validates it.
pub fn parse_hints(text: &str) -> Result<HintSet, HintError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, end: text_end(text) };
    let h = p.hint_block()?;
    check_consistency(&h)?;
    Ok(h)
}

fn text_end(text: &str) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Open,
    Close,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Open => f.write_str("`/*+`"),
            Tok::Close => f.write_str("`*/`"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
        } else if c == '(' {
            advance(1, &mut i);
            out.push(Spanned { tok: Tok::LParen, line: tl, column: tc });
        } else if c == ')' {
            advance(1, &mut i);
            out.push(Spanned { tok: Tok::RParen, line: tl, column: tc });
        } else if c == '/' && chars.get(i + 1) == Some(&'*') && chars.get(i + 2) == Some(&'+') {
            advance(3, &mut i);
            out.push(Spanned { tok: Tok::Open, line: tl, column: tc });
        } else if c == '*' && chars.get(i + 1) == Some(&'/') {
            advance(2, &mut i);
            out.push(Spanned { tok: Tok::Close, line: tl, column: tc });
        } else if c == '"' {
            advance(1, &mut i);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(err(tl, tc, "unterminated quoted identifier".into())),
                    Some('"') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        advance(2, &mut i);
                    }
                    Some('"') => {
                        advance(1, &mut i);
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(1, &mut i);
                    }
                }
            }
            if s.is_empty() {
                return Err(err(tl, tc, "empty quoted identifier".into()));
            }
            out.push(Spanned { tok: Tok::Ident(s), line: tl, column: tc });
        } else if c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.') {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '$' | '.')) {
                advance(1, &mut i);
            }
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
        } else {
            return Err(err(tl, tc, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self
            .tokens
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end);
        ParseError { line, column, message: message.into() }
    }

    fn next(&mut self, expected: &str) -> Result<Tok, ParseError> {
        match self.tokens.get(self.pos) {
            Some(s) => {
                self.pos += 1;
                Ok(s.tok.clone())
            }
            None => Err(self.error_here(format!("unexpected end of input, expected {expected}"))),
        }
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<(), ParseError> {
        let at = self.pos;
        let got = self.next(expected)?;
        if got == want {
            Ok(())
        } else {
            self.pos = at;
            Err(self.error_here(format!("expected {expected}, found {got}")))
        }
    }

    fn hint_block(&mut self) -> Result<HintSet, HintError> {
        let wrapped = self.peek() == Some(&Tok::Open);
        if wrapped {
            self.pos += 1;
        }
        let mut scan_hints = Vec::new();
        let mut join_hints = Vec::new();
        let mut leading: Option<Leading> = None;
        loop {
            match self.peek() {
                None if wrapped => return Err(self.error_here("missing `*/`").into()),
                None => break,
                Some(Tok::Close) if wrapped => {
                    self.pos += 1;
                    if self.peek().is_some() {
                        return Err(self.error_here("trailing input after hint block").into());
                    }
                    break;
                }
                _ => {}
            }
            let at = self.pos;
            let name = match self.next("hint name")? {
                Tok::Ident(n) => n,
                other => {
                    self.pos = at;
                    return Err(self.error_here(format!("expected hint name, found {other}")).into());
                }
            };
            self.expect(Tok::LParen, "`(`")?;
            if name == "Leading" {
                let expr = self.leading_expr()?;
                self.expect(Tok::RParen, "`)` closing Leading")?;
                if leading.replace(expr).is_some() {
                    return Err(HintError::Inconsistent("more than one Leading hint".into()));
                }
            } else if let Some(scan) = ScanType::from_hint_name(&name) {
                let args = self.args()?;
                match <[String; 1]>::try_from(args) {
                    Ok([alias]) => scan_hints.push(ScanHint { scan, alias }),
                    Err(v) => {
                        self.pos -= 1;
                        return Err(self
                            .error_here(format!("{name} takes exactly one table, got {}", v.len()))
                            .into());
                    }
                }
            } else if let Some(join) = JoinType::from_hint_name(&name) {
                let aliases = self.args()?;
                if aliases.len() < 2 {
                    self.pos -= 1;
                    return Err(self.error_here(format!("{name} needs at least two tables")).into());
                }
                join_hints.push(JoinHint { join, aliases });
            } else {
                self.pos = at;
                return Err(self.error_here(format!("unknown hint `{name}`")).into());
            }
        }
        let leading = leading.ok_or_else(|| HintError::Inconsistent("missing Leading hint".into()))?;
        Ok(HintSet { scan_hints, join_hints, leading })
    }

    /// Identifier list terminated by `)`, which is consumed.
    fn args(&mut self) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        loop {
            let at = self.pos;
            match self.next("table name or `)`")? {
                Tok::Ident(s) => out.push(s),
                Tok::RParen => return Ok(out),
                other => {
                    self.pos = at;
                    return Err(self.error_here(format!("expected table name or `)`, found {other}")));
                }
            }
        }
    }

    fn leading_expr(&mut self) -> Result<Leading, ParseError> {
        let at = self.pos;
        match self.next("table name or `(`")? {
            Tok::Ident(s) => Ok(Leading::Table(s)),
            Tok::LParen => {
                let left = self.leading_expr()?;
                let right = self.leading_expr()?;
                self.expect(Tok::RParen, "`)` closing join pair")?;
                Ok(Leading::pair(left, right))
            }
            other => {
                self.pos = at;
                Err(self.error_here(format!("expected table name or `(`, found {other}")))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_plan() -> SimplifiedPlan {
        let kmk = SimpleNode::join(
            JoinType::NestLoop,
            SimpleNode::scan(ScanType::SeqScan, "k"),
            SimpleNode::scan(ScanType::IndexScan, "mk"),
        );
        let t = SimpleNode::join(JoinType::NestLoop, kmk, SimpleNode::scan(ScanType::IndexScan, "t"));
        let root = SimpleNode::join(JoinType::HashJoin, t, SimpleNode::scan(ScanType::BitmapScan, "mi"));
        SimplifiedPlan::new(root).unwrap()
    }

    #[test]
    fn figure_serialization() {
        let h = transform_plan(&figure_plan());
        assert_eq!(h.leading_hint(), "Leading((((k mk)t)mi))");
        assert_eq!(
            render_hints(&h),
            "SeqScan(k)\nIndexScan(mk)\nIndexScan(t)\nBitmapScan(mi)\n\
             NestLoop(k mk)\nNestLoop(k mk t)\nHashJoin(k mk t mi)\nLeading((((k mk)t)mi))"
        );
    }

    #[test]
    fn two_table_plan() {
        let p = SimplifiedPlan::new(SimpleNode::join(
            JoinType::HashJoin,
            SimpleNode::scan(ScanType::SeqScan, "a"),
            SimpleNode::scan(ScanType::SeqScan, "b"),
        ))
        .unwrap();
        let h = transform_plan(&p);
        assert_eq!(render_hints(&h), "SeqScan(a)\nSeqScan(b)\nHashJoin(a b)\nLeading((a b))");
        assert_eq!(hints_to_plan(&h).unwrap(), p);
    }

    #[test]
    fn single_table() {
        let p = SimplifiedPlan::new(SimpleNode::scan(ScanType::IndexOnlyScan, "a")).unwrap();
        let h = transform_plan(&p);
        assert_eq!(render_hints(&h), "IndexOnlyScan(a)\nLeading(a)");
        assert_eq!(parse_hints("IndexOnlyScan(a) Leading(a)").unwrap(), h);
        assert_eq!(hints_to_plan(&h).unwrap(), p);
    }

    #[test]
    fn right_leaf_and_bushy_rendering() {
        let l = Leading::pair(Leading::Table("t".into()), Leading::pair(Leading::Table("k".into()), Leading::Table("mk".into())));
        assert_eq!(l.to_string(), "(t (k mk))");
        let bushy = Leading::pair(
            Leading::pair(Leading::Table("a".into()), Leading::Table("b".into())),
            Leading::pair(Leading::Table("c".into()), Leading::Table("d".into())),
        );
        assert_eq!(bushy.to_string(), "((a b)(c d))");
    }

    #[test]
    fn comment_wrapper_round_trip() {
        let h = transform_plan(&figure_plan());
        let wrapped = render_hints_comment(&h);
        assert!(wrapped.starts_with("/*+\n") && wrapped.ends_with("\n*/"));
        assert_eq!(parse_hints(&wrapped).unwrap(), h);
        let sql = inject_hints("SELECT 1;", &h);
        assert!(sql.ends_with("*/\nSELECT 1;"));
    }

    #[test]
    fn nested_loop_long_spelling_accepted() {
        let h = parse_hints("SeqScan(a) SeqScan(b) NestedLoop(a b) Leading((a b))").unwrap();
        assert_eq!(h.join_hints[0].join, JoinType::NestLoop);
        assert!(render_hints(&h).contains("NestLoop(a b)"));
    }

    #[test]
    fn unbalanced_leading_is_parse_error() {
        let e = parse_hints("SeqScan(a)\nSeqScan(b)\nHashJoin(a b)\nLeading((a b)").unwrap_err();
        match e {
            HintError::Parse(p) => assert_eq!(p.line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn error_positions() {
        let e = parse_hints("SeqScan(a)\n  Bogus(b)").unwrap_err();
        assert_eq!(
            e,
            HintError::Parse(ParseError { line: 2, column: 3, message: "unknown hint `Bogus`".into() })
        );
    }

    #[test]
    fn inconsistencies() {
        let cases = [
            "SeqScan(a) HashJoin(a b) Leading((a b))",
            "SeqScan(a) SeqScan(b) Leading((a b))",
            "SeqScan(a) SeqScan(b) HashJoin(a c) Leading((a b))",
            "SeqScan(a) SeqScan(a) Leading(a)",
            "SeqScan(a) SeqScan(b) HashJoin(a b)",
            "SeqScan(a) SeqScan(b) HashJoin(a b) Leading((a b)) Leading((b a))",
            "SeqScan(a) SeqScan(b) SeqScan(c) HashJoin(a b) HashJoin(a b) Leading(((a b)c))",
            "SeqScan(a) SeqScan(b) Leading(a)",
        ];
        for c in cases {
            assert!(matches!(parse_hints(c), Err(HintError::Inconsistent(_))), "{c}");
        }
    }

    #[test]
    fn order_insensitive_join_args_canonicalize() {
        let h = parse_hints("SeqScan(b) SeqScan(a) HashJoin(b a) Leading((a b))").unwrap();
        assert!(!h.is_canonical());
        let c = h.canonical().unwrap();
        assert_eq!(render_hints(&c), "SeqScan(a)\nSeqScan(b)\nHashJoin(a b)\nLeading((a b))");
    }

    #[test]
    fn quoted_identifiers() {
        let p = SimplifiedPlan::new(SimpleNode::join(
            JoinType::MergeJoin,
            SimpleNode::scan(ScanType::SeqScan, "my tab"),
            SimpleNode::scan(ScanType::SeqScan, "b"),
        ))
        .unwrap();
        let h = transform_plan(&p);
        let text = render_hints(&h);
        assert!(text.contains("SeqScan(\"my tab\")"));
        assert_eq!(parse_hints(&text).unwrap(), h);
    }

    #[test]
    fn scan_hint_arity() {
        assert!(matches!(parse_hints("SeqScan(a b) Leading(a)"), Err(HintError::Parse(_))));
        assert!(matches!(parse_hints("SeqScan() Leading(a)"), Err(HintError::Parse(_))));
        assert!(matches!(parse_hints("HashJoin(a) Leading(a)"), Err(HintError::Parse(_))));
    }
}
