//! Counting and exhaustive enumeration of the plan search space.
//!
//! A plan for `n` tables is a binary tree shape (Catalan(n-1) choices), a
//! placement of the tables on its leaves (n! choices), a scan method per leaf
//! and a join method per internal node. Join children are ordered: swapping
//! the inputs of a join yields a different plan.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan_model::{JoinType, ScanType, SimpleNode, SimplifiedPlan};
use crate::scalar::Count;

pub const DEFAULT_ENUMERATION_CAP: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanSpaceError {
    #[error("count overflows the target integer type")]
    Overflow,
    #[error("{n} tables exceeds the enumeration cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("invalid space spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapePolicy {
    AllShapes,
    LeftDeepOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub n_tables: usize,
    pub scan_types: Vec<ScanType>,
    pub join_types: Vec<JoinType>,
    pub shape_policy: ShapePolicy,
}

impl SpaceSpec {
    pub fn new(n_tables: usize, scan_types: Vec<ScanType>, join_types: Vec<JoinType>, shape_policy: ShapePolicy) -> Self {
        SpaceSpec { n_tables, scan_types, join_types, shape_policy }
    }

    /// Every scan and join method, all shapes.
    pub fn full(n_tables: usize) -> Self {
        SpaceSpec::new(n_tables, ScanType::ALL.to_vec(), JoinType::ALL.to_vec(), ShapePolicy::AllShapes)
    }

    pub fn validate(&self) -> Result<(), PlanSpaceError> {
        if self.n_tables == 0 {
            return Err(PlanSpaceError::InvalidSpec("n_tables must be at least 1".into()));
        }
        if self.scan_types.is_empty() || self.join_types.is_empty() {
            return Err(PlanSpaceError::InvalidSpec("operator sets must be nonempty".into()));
        }
        if self.scan_types.iter().collect::<HashSet<_>>().len() != self.scan_types.len()
            || self.join_types.iter().collect::<HashSet<_>>().len() != self.join_types.len()
        {
            return Err(PlanSpaceError::InvalidSpec("operator sets contain duplicates".into()));
        }
        Ok(())
    }
}

fn from_usize<C: Count>(v: usize) -> Result<C, PlanSpaceError> {
    C::from_usize(v).ok_or(PlanSpaceError::Overflow)
}

fn mul<C: Count>(a: &C, b: &C) -> Result<C, PlanSpaceError> {
    a.checked_mul(b).ok_or(PlanSpaceError::Overflow)
}

fn checked_pow<C: Count>(base: usize, exp: usize) -> Result<C, PlanSpaceError> {
    let b: C = from_usize(base)?;
    (0..exp).try_fold(C::one(), |acc, _| mul(&acc, &b))
}

fn factorial<C: Count>(n: usize) -> Result<C, PlanSpaceError> {
    (2..=n).try_fold(C::one(), |acc, k| mul(&acc, &from_usize(k)?))
}

/// Number of binary tree shapes with `n` leaves, i.e. Catalan(n-1).
///
/// Uses `C(k) = C(k-1) * 2(2k-1) / (k+1)`, cancelling the divisor against
/// the running value first so no intermediate exceeds the result.
pub fn count_tree_shapes<C: Count>(n: usize) -> Result<C, PlanSpaceError> {
    if n == 0 {
        return Err(PlanSpaceError::InvalidSpec("tree needs at least one leaf".into()));
    }
    let mut c = C::one();
    for k in 1..n {
        let divisor: C = from_usize(k + 1)?;
        let g = c.gcd(&divisor);
        let reduced = c.clone() / g.clone();
        let rest = divisor / g;
        let factor: C = from_usize(2 * (2 * k - 1))?;
        debug_assert!((factor.clone() % rest.clone()).is_zero());
        c = mul(&reduced, &(factor / rest))?;
    }
    Ok(c)
}

/// Size of the space under ordered join children:
/// `shapes * n! * s^n * j^(n-1)`.
pub fn count_plans<C: Count>(spec: &SpaceSpec) -> Result<C, PlanSpaceError> {
    spec.validate()?;
    let n = spec.n_tables;
    let shapes: C = match spec.shape_policy {
        ShapePolicy::AllShapes => count_tree_shapes(n)?,
        ShapePolicy::LeftDeepOnly => C::one(),
    };
    let orders: C = factorial(n)?;
    let scans: C = checked_pow(spec.scan_types.len(), n)?;
    let joins: C = checked_pow(spec.join_types.len(), n - 1)?;
    mul(&mul(&mul(&shapes, &orders)?, &scans)?, &joins)
}

/// Size of the space when the two inputs of a join are interchangeable.
///
/// All shapes: `(2n-3)!!` unordered trees over labelled leaves. Left-deep
/// only: `n!/2` for two or more tables (the bottom pair is unordered).
pub fn count_plans_unordered<C: Count>(spec: &SpaceSpec) -> Result<C, PlanSpaceError> {
    spec.validate()?;
    let n = spec.n_tables;
    let trees: C = match (spec.shape_policy, n) {
        (_, 1) => C::one(),
        (ShapePolicy::AllShapes, _) => (1..n - 1).try_fold(C::one(), |acc, k| mul(&acc, &from_usize(2 * k + 1)?))?,
        (ShapePolicy::LeftDeepOnly, _) => factorial::<C>(n)? / from_usize(2)?,
    };
    let scans: C = checked_pow(spec.scan_types.len(), n)?;
    let joins: C = checked_pow(spec.join_types.len(), n - 1)?;
    mul(&mul(&trees, &scans)?, &joins)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Leaf,
    Node(Box<Shape>, Box<Shape>),
}

/// All shapes with `n` leaves; larger left subtrees first, so the
/// left-deep shape is always first.
fn shapes(n: usize) -> Vec<Shape> {
    if n == 1 {
        return vec![Shape::Leaf];
    }
    let mut out = Vec::new();
    for left in (1..n).rev() {
        let ls = shapes(left);
        let rs = shapes(n - left);
        for l in &ls {
            for r in &rs {
                out.push(Shape::Node(Box::new(l.clone()), Box::new(r.clone())));
            }
        }
    }
    out
}

fn left_deep(n: usize) -> Shape {
    (1..n).fold(Shape::Leaf, |acc, _| Shape::Node(Box::new(acc), Box::new(Shape::Leaf)))
}

/// Lexicographic successor; returns false after the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("successor exists");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Odometer increment; returns false on wrap-around.
fn bump(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Streaming enumeration of a plan space.
///
/// Order: tree shape (outermost), table permutation, join methods, scan
/// methods (innermost). The first plan is the left-deep tree over the
/// tables in the given order using the first listed operators.
#[derive(Debug)]
pub struct PlanEnumerator {
    shapes: Vec<Shape>,
    tables: Vec<String>,
    scans: Vec<ScanType>,
    joins: Vec<JoinType>,
    shape_idx: usize,
    perm: Vec<usize>,
    scan_digits: Vec<usize>,
    join_digits: Vec<usize>,
    done: bool,
}

impl PlanEnumerator {
    fn build(&self) -> SimplifiedPlan {
        fn go(
            shape: &Shape,
            e: &PlanEnumerator,
            leaf: &mut usize,
            join: &mut usize,
        ) -> SimpleNode {
            match shape {
                Shape::Leaf => {
                    let i = *leaf;
                    *leaf += 1;
                    SimpleNode::scan(e.scans[e.scan_digits[i]], e.tables[e.perm[i]].clone())
                }
                Shape::Node(l, r) => {
                    let left = go(l, e, leaf, join);
                    let right = go(r, e, leaf, join);
                    let j = *join;
                    *join += 1;
                    SimpleNode::join(e.joins[e.join_digits[j]], left, right)
                }
            }
        }
        let (mut leaf, mut join) = (0, 0);
        let root = go(&self.shapes[self.shape_idx], self, &mut leaf, &mut join);
        SimplifiedPlan::from_distinct(root)
    }

    fn advance(&mut self) {
        if bump(&mut self.scan_digits, self.scans.len()) || bump(&mut self.join_digits, self.joins.len()) {
            return;
        }
        if next_permutation(&mut self.perm) {
            return;
        }
        self.perm.sort_unstable();
        self.shape_idx += 1;
        if self.shape_idx == self.shapes.len() {
            self.done = true;
        }
    }
}

impl Iterator for PlanEnumerator {
    type Item = SimplifiedPlan;

    fn next(&mut self) -> Option<SimplifiedPlan> {
        if self.done {
            return None;
        }
        let plan = self.build();
        self.advance();
        Some(plan)
    }
}

/// Enumerates with the default cap of six tables.
pub fn enumerate_plans(spec: &SpaceSpec, tables: &[String]) -> Result<PlanEnumerator, PlanSpaceError> {
    enumerate_plans_with_cap(spec, tables, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_plans_with_cap(
    spec: &SpaceSpec,
    tables: &[String],
    cap: usize,
) -> Result<PlanEnumerator, PlanSpaceError> {
    spec.validate()?;
    let n = spec.n_tables;
    if n > cap {
        return Err(PlanSpaceError::CapExceeded { n, cap });
    }
    if tables.len() != n {
        return Err(PlanSpaceError::InvalidSpec(format!("{} table names for n_tables = {n}", tables.len())));
    }
    if tables.iter().collect::<HashSet<_>>().len() != n {
        return Err(PlanSpaceError::InvalidSpec("table names must be distinct".into()));
    }
    let shapes = match spec.shape_policy {
        ShapePolicy::AllShapes => shapes(n),
        ShapePolicy::LeftDeepOnly => vec![left_deep(n)],
    };
    Ok(PlanEnumerator {
        shapes,
        tables: tables.to_vec(),
        scans: spec.scan_types.clone(),
        joins: spec.join_types.clone(),
        shape_idx: 0,
        perm: (0..n).collect(),
        scan_digits: vec![0; n],
        join_digits: vec![0; n - 1],
        done: false,
    })
}

/// Exhaustive argmin of `cost_fn`; ties go to the first plan enumerated.
/// Costs that compare as unordered (NaN) never win.
pub fn brute_force_optimal<S, F>(
    spec: &SpaceSpec,
    tables: &[String],
    mut cost_fn: F,
) -> Result<(SimplifiedPlan, S), PlanSpaceError>
where
    S: PartialOrd + Copy,
    F: FnMut(&SimplifiedPlan) -> S,
{
    let mut best: Option<(SimplifiedPlan, S)> = None;
    for plan in enumerate_plans(spec, tables)? {
        let c = cost_fn(&plan);
        match &best {
            Some((_, b)) if !(c < *b) => {}
            Some(_) => best = Some((plan, c)),
            None if c.partial_cmp(&c).is_some() => best = Some((plan, c)),
            None => {}
        }
    }
    best.ok_or_else(|| PlanSpaceError::InvalidSpec("cost function produced no comparable value".into()))
}

/// Convenience for counts that must fit in 128 bits.
pub fn count_plans_u128(spec: &SpaceSpec) -> Result<u128, PlanSpaceError> {
    count_plans::<u128>(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn catalan_small() {
        assert_eq!(count_tree_shapes::<u64>(1).unwrap(), 1);
        assert_eq!(count_tree_shapes::<u64>(5).unwrap(), 14);
        assert_eq!(count_tree_shapes::<u32>(11).unwrap(), 16796);
        assert!(count_tree_shapes::<u64>(0).is_err());
    }

    #[test]
    fn catalan_overflow_vs_bigint() {
        // Catalan(36) is the largest that fits in u64.
        assert_eq!(count_tree_shapes::<u64>(36).unwrap(), 3_116_285_494_907_301_262);
        assert_eq!(count_tree_shapes::<u64>(37).unwrap(), 11_959_798_385_860_453_492);
        assert_eq!(count_tree_shapes::<u64>(38), Err(PlanSpaceError::Overflow));
        let big: BigUint = count_tree_shapes(38).unwrap();
        assert_eq!(big.to_string(), "45950804324621742364");
        assert_eq!(count_tree_shapes::<u128>(38).unwrap(), 45_950_804_324_621_742_364);
    }

    #[test]
    fn plan_counts() {
        let s = SpaceSpec::new(
            3,
            vec![ScanType::SeqScan, ScanType::IndexScan, ScanType::IndexOnlyScan, ScanType::TidScan],
            JoinType::ALL.to_vec(),
            ShapePolicy::AllShapes,
        );
        assert_eq!(count_plans::<u64>(&s).unwrap(), 6912);
        let one = SpaceSpec::new(1, vec![ScanType::SeqScan, ScanType::IndexScan], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
        assert_eq!(count_plans::<u64>(&one).unwrap(), 2);
        let five = SpaceSpec::new(5, vec![ScanType::SeqScan], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
        assert_eq!(count_plans::<u64>(&five).unwrap(), 1680);
        assert_eq!(count_plans::<u8>(&five), Err(PlanSpaceError::Overflow));
    }

    #[test]
    fn left_deep_counts() {
        let s = SpaceSpec::new(4, vec![ScanType::SeqScan], vec![JoinType::HashJoin], ShapePolicy::LeftDeepOnly);
        assert_eq!(count_plans::<u64>(&s).unwrap(), 24);
        assert_eq!(enumerate_plans(&s, &names(4)).unwrap().count(), 24);
        assert!(enumerate_plans(&s, &names(4)).unwrap().all(|p| p.is_left_deep()));
    }

    #[test]
    fn two_tables_two_orders() {
        let s = SpaceSpec::new(2, vec![ScanType::SeqScan], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
        let plans: Vec<_> = enumerate_plans(&s, &names(2)).unwrap().collect();
        assert_eq!(plans.len(), 2);
        assert_ne!(plans[0], plans[1]);
    }

    #[test]
    fn first_plan_is_left_deep_in_given_order() {
        let p = enumerate_plans(&SpaceSpec::full(4), &names(4)).unwrap().next().unwrap();
        assert!(p.is_left_deep());
        assert_eq!(p.table_aliases(), names(4).as_slice());
    }

    #[test]
    fn cap_and_validation() {
        assert_eq!(
            enumerate_plans(&SpaceSpec::full(7), &names(7)).unwrap_err(),
            PlanSpaceError::CapExceeded { n: 7, cap: 6 }
        );
        assert!(enumerate_plans(&SpaceSpec::full(3), &names(2)).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(enumerate_plans(&SpaceSpec::full(2), &dup).is_err());
        let empty = SpaceSpec::new(2, vec![], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
        assert!(count_plans::<u64>(&empty).is_err());
    }

    #[test]
    fn unordered_counts_match_dedup() {
        fn canon(n: &SimpleNode) -> String {
            match n {
                SimpleNode::Scan { scan, alias } => format!("{scan}:{alias}"),
                SimpleNode::Join { join, left, right } => {
                    let (a, b) = (canon(left), canon(right));
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    format!("{join}[{a},{b}]")
                }
            }
        }
        for policy in [ShapePolicy::AllShapes, ShapePolicy::LeftDeepOnly] {
            for n in 1..=4 {
                let s = SpaceSpec::new(n, vec![ScanType::SeqScan, ScanType::IndexScan], vec![JoinType::HashJoin, JoinType::NestLoop], policy);
                let distinct: HashSet<String> =
                    enumerate_plans(&s, &names(n)).unwrap().map(|p| canon(p.root())).collect();
                assert_eq!(distinct.len() as u64, count_plans_unordered::<u64>(&s).unwrap(), "{policy:?} n={n}");
            }
        }
    }

    #[test]
    fn brute_force_tie_break_and_nan() {
        let s = SpaceSpec::full(3);
        let first = enumerate_plans(&s, &names(3)).unwrap().next().unwrap();
        let (p, c) = brute_force_optimal(&s, &names(3), |_| 1.0).unwrap();
        assert_eq!((p, c), (first, 1.0));
        assert!(brute_force_optimal(&s, &names(3), |_| f64::NAN).is_err());
    }
}
