use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;
use proptest::sample::subsequence;

use planhint::plan_model::{JoinType, ScanType, SimpleNode, SimplifiedPlan};
use planhint::plan_space::{brute_force_optimal, count_plans, count_plans_unordered, enumerate_plans, ShapePolicy, SpaceSpec};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i}")).collect()
}

/// Every ordered plan over `tables`, built by splitting into (left, right).
fn all_plans(tables: &[String], scans: &[ScanType], joins: &[JoinType], left_deep: bool) -> Vec<SimpleNode> {
    if tables.len() == 1 {
        return scans.iter().map(|&s| SimpleNode::scan(s, tables[0].clone())).collect();
    }
    let n = tables.len();
    let mut out = Vec::new();
    for mask in 1..(1u32 << n) - 1 {
        let (l, r): (Vec<_>, Vec<_>) = (0..n).partition(|i| mask & (1 << i) != 0);
        if left_deep && r.len() != 1 {
            continue;
        }
        let lt: Vec<String> = l.iter().map(|&i| tables[i].clone()).collect();
        let rt: Vec<String> = r.iter().map(|&i| tables[i].clone()).collect();
        let lp = all_plans(&lt, scans, joins, left_deep);
        let rp = all_plans(&rt, scans, joins, left_deep);
        for a in &lp {
            for b in &rp {
                for &j in joins {
                    out.push(SimpleNode::join(j, a.clone(), b.clone()));
                }
            }
        }
    }
    out
}

fn aliases(node: &SimpleNode) -> BTreeSet<String> {
    match node {
        SimpleNode::Scan { alias, .. } => BTreeSet::from([alias.clone()]),
        SimpleNode::Join { left, right, .. } => &aliases(left) | &aliases(right),
    }
}

/// Children ordered by their smallest alias.
fn unordered_key(node: &SimpleNode) -> String {
    match node {
        SimpleNode::Scan { scan, alias } => format!("{scan}({alias})"),
        SimpleNode::Join { join, left, right } => {
            let (mut a, mut b) = ((aliases(left), unordered_key(left)), (aliases(right), unordered_key(right)));
            if a.0 > b.0 {
                std::mem::swap(&mut a, &mut b);
            }
            format!("{join}[{} {}]", a.1, b.1)
        }
    }
}

fn spec_strategy() -> impl Strategy<Value = SpaceSpec> {
    (
        1usize..=4,
        subsequence(ScanType::ALL.to_vec(), 1..=3),
        subsequence(JoinType::ALL.to_vec(), 1..=3),
        prop_oneof![Just(ShapePolicy::AllShapes), Just(ShapePolicy::LeftDeepOnly)],
    )
        .prop_map(|(n, s, j, p)| SpaceSpec::new(n, s, j, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_count_and_oracle(spec in spec_strategy()) {
        let tables = names(spec.n_tables);
        let left_deep = spec.shape_policy == ShapePolicy::LeftDeepOnly;
        let plans: Vec<SimplifiedPlan> = enumerate_plans(&spec, &tables).unwrap().collect();
        let count: u128 = count_plans(&spec).unwrap();
        prop_assert_eq!(plans.len() as u128, count);

        let got: HashSet<SimpleNode> = plans.iter().map(|p| p.root().clone()).collect();
        prop_assert_eq!(got.len(), plans.len());
        let want: HashSet<SimpleNode> =
            all_plans(&tables, &spec.scan_types, &spec.join_types, left_deep).into_iter().collect();
        prop_assert_eq!(&got, &want);

        for p in &plans {
            prop_assert_eq!(p.leaf_count(), spec.n_tables);
            prop_assert_eq!(p.join_count() + 1, p.leaf_count());
            if left_deep {
                prop_assert!(p.is_left_deep());
            }
        }
        let first = &plans[0];
        prop_assert!(first.is_left_deep());
        prop_assert_eq!(first.table_aliases(), tables.as_slice());

        let unordered: HashSet<String> = plans.iter().map(|p| unordered_key(p.root())).collect();
        prop_assert_eq!(unordered.len() as u128, count_plans_unordered::<u128>(&spec).unwrap());
    }

    #[test]
    fn brute_force_matches_exhaustive_argmin(spec in spec_strategy(), salt in any::<u64>()) {
        let tables = names(spec.n_tables);
        let left_deep = spec.shape_policy == ShapePolicy::LeftDeepOnly;
        let weight = |key: &str| -> u64 {
            let mut h: u64 = salt ^ 0xcbf29ce484222325;
            for b in key.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x100000001b3);
            }
            h % 10_000
        };
        let mut memo: HashMap<String, u64> = HashMap::new();
        let mut cost = |node: &SimpleNode| -> u64 {
            fn go(node: &SimpleNode, w: &dyn Fn(&str) -> u64, memo: &mut HashMap<String, u64>) -> u64 {
                let key = match node {
                    SimpleNode::Scan { scan, alias } => format!("{scan}:{alias}"),
                    SimpleNode::Join { join, left, right } => {
                        format!("{join}:{:?}|{:?}", aliases(left), aliases(right))
                    }
                };
                let own = *memo.entry(key.clone()).or_insert_with(|| w(&key));
                match node {
                    SimpleNode::Scan { .. } => own,
                    SimpleNode::Join { left, right, .. } => own + go(left, w, memo) + go(right, w, memo),
                }
            }
            go(node, &weight, &mut memo)
        };
        let oracle = all_plans(&tables, &spec.scan_types, &spec.join_types, left_deep)
            .iter()
            .map(&mut cost)
            .min()
            .unwrap();
        let (best, c) = brute_force_optimal(&spec, &tables, |p| cost(p.root())).unwrap();
        prop_assert_eq!(c, oracle);
        prop_assert_eq!(cost(best.root()), oracle);
    }
}

fn selectivity_product_cost(node: &SimpleNode, rows: &HashMap<String, f64>, sel: &[(String, String, f64)]) -> (f64, f64) {
    match node {
        SimpleNode::Scan { alias, .. } => (rows[alias], rows[alias]),
        SimpleNode::Join { left, right, .. } => {
            let (lr, lc) = selectivity_product_cost(left, rows, sel);
            let (rr, rc) = selectivity_product_cost(right, rows, sel);
            let (la, ra) = (aliases(left), aliases(right));
            let mut out = lr * rr;
            for (x, y, s) in sel {
                if (la.contains(x) && ra.contains(y)) || (la.contains(y) && ra.contains(x)) {
                    out *= s;
                }
            }
            (out, lc + rc + out)
        }
    }
}

#[test]
fn three_table_catalog_matches_worked_minimum() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/three_table_catalog.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let rows: HashMap<String, f64> =
        doc["rows"].as_object().unwrap().iter().map(|(k, v)| (k.clone(), v.as_f64().unwrap())).collect();
    let sel: Vec<(String, String, f64)> = doc["selectivity"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_str().unwrap().into(), e[1].as_str().unwrap().into(), e[2].as_f64().unwrap()))
        .collect();
    let tables: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
    let spec = SpaceSpec::new(3, vec![ScanType::SeqScan], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
    let (best, cost) = brute_force_optimal(&spec, &tables, |p| selectivity_product_cost(p.root(), &rows, &sel).1).unwrap();
    assert_eq!(cost, doc["expected_cost"].as_f64().unwrap());
    assert_eq!(planhint::transform_plan(&best).leading_hint(), doc["expected_leading"].as_str().unwrap());
}

#[test]
fn constant_cost_picks_first_plan() {
    let tables = names(3);
    let spec = SpaceSpec::full(3);
    let first = enumerate_plans(&spec, &tables).unwrap().next().unwrap();
    let (best, _) = brute_force_optimal(&spec, &tables, |_| 1.0).unwrap();
    assert_eq!(best, first);
}

#[test]
fn left_deep_favoring_cost_picks_left_deep() {
    let tables = names(4);
    let spec = SpaceSpec::new(4, vec![ScanType::SeqScan, ScanType::IndexScan], JoinType::ALL.to_vec(), ShapePolicy::AllShapes);
    fn bushy_joins(n: &SimpleNode) -> u32 {
        match n {
            SimpleNode::Scan { .. } => 0,
            SimpleNode::Join { left, right, .. } => {
                u32::from(!matches!(**right, SimpleNode::Scan { .. })) + bushy_joins(left) + bushy_joins(right)
            }
        }
    }
    let (best, cost) = brute_force_optimal(&spec, &tables, |p| 10 * bushy_joins(p.root()) + p.table_aliases()[0].len() as u32).unwrap();
    assert!(best.is_left_deep());
    let filtered = enumerate_plans(&spec, &tables)
        .unwrap()
        .filter(|p| p.is_left_deep())
        .map(|p| 10 * bushy_joins(p.root()) + p.table_aliases()[0].len() as u32)
        .min()
        .unwrap();
    assert_eq!(cost, filtered);
}

#[test]
fn five_table_small_specs_match_count() {
    let tables = names(5);
    for scans in [vec![ScanType::SeqScan], vec![ScanType::SeqScan, ScanType::IndexScan]] {
        for joins in [vec![JoinType::HashJoin], vec![JoinType::NestLoop, JoinType::MergeJoin]] {
            for policy in [ShapePolicy::AllShapes, ShapePolicy::LeftDeepOnly] {
                let spec = SpaceSpec::new(5, scans.clone(), joins.clone(), policy);
                let n = enumerate_plans(&spec, &tables).unwrap().count() as u128;
                assert_eq!(n, count_plans::<u128>(&spec).unwrap(), "{spec:?}");
            }
        }
    }
    let one = SpaceSpec::new(5, vec![ScanType::SeqScan], vec![JoinType::HashJoin], ShapePolicy::AllShapes);
    assert_eq!(count_plans::<u128>(&one).unwrap(), 1680);
}

#[test]
fn every_enumerated_plan_round_trips() {
    let tables = names(3);
    for p in enumerate_plans(&SpaceSpec::full(3), &tables).unwrap() {
        let h = planhint::transform_plan(&p);
        assert_eq!(planhint::hints_to_plan(&h).unwrap(), p);
        assert_eq!(planhint::parse_hints(&planhint::render_hints(&h)).unwrap(), h);
    }
}
