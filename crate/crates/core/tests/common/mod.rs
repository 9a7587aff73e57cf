//! Helpers shared by integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;

use planhint::plan_model::{JoinType, NodeKind, PlanNode, PlanTree, ScanType, SimpleNode, SimplifiedPlan};

pub const ALIASES: [&str; 7] = ["k", "mk", "t", "mi", "cn", "mc_2", "Odd Name"];

/// Random plan over `n` distinct aliases with random shape and operators.
pub fn random_plan<R: Rng>(rng: &mut R, n: usize) -> SimplifiedPlan {
    let mut names: Vec<String> = ALIASES.iter().map(|s| s.to_string()).collect();
    names.shuffle(rng);
    names.truncate(n);
    SimplifiedPlan::new(random_node(rng, &names)).unwrap()
}

fn random_node<R: Rng>(rng: &mut R, names: &[String]) -> SimpleNode {
    if names.len() == 1 {
        let scan = ScanType::ALL[rng.gen_range(0..ScanType::ALL.len())];
        return SimpleNode::scan(scan, names[0].clone());
    }
    let cut = rng.gen_range(1..names.len());
    let join = JoinType::ALL[rng.gen_range(0..JoinType::ALL.len())];
    SimpleNode::join(join, random_node(rng, &names[..cut]), random_node(rng, &names[cut..]))
}

const WRAPPERS: [&str; 6] = ["Aggregate", "Sort", "Hash", "Materialize", "Gather", "Memoize"];

/// Planner-style tree for `plan` with random pass-through nodes inserted
/// above any node; bitmap scans get their index child.
pub fn embed<R: Rng>(rng: &mut R, plan: &SimplifiedPlan, wrap_probability: f64) -> PlanTree {
    fn go<R: Rng>(rng: &mut R, node: &SimpleNode, p: f64) -> PlanNode {
        let mut out = match node {
            SimpleNode::Scan { scan, alias } => {
                let mut n = PlanNode::scan(scan.operator_name(), alias.clone(), rng.gen_range(1..1000), 1.0);
                if *scan == ScanType::BitmapScan {
                    let mut probe = PlanNode::scan("Bitmap Index Scan", alias.clone(), 1, 1.0);
                    probe.kind = NodeKind::Other;
                    probe.relation = None;
                    n.children.push(probe);
                }
                n
            }
            SimpleNode::Join { join, left, right } => {
                PlanNode::join(join.operator_name(), go(rng, left, p), go(rng, right, p), rng.gen_range(1..1000), 2.0)
            }
        };
        while rng.gen_bool(p) {
            let w = WRAPPERS[rng.gen_range(0..WRAPPERS.len())];
            out = PlanNode::other(w, out, 1, 3.0);
        }
        out
    }
    PlanTree::new(go(rng, plan.root(), wrap_probability))
}

/// Independent splicer: keeps scans and joins, drops everything else.
pub fn splice(node: &PlanNode) -> SimpleNode {
    match node.kind {
        NodeKind::Scan => SimpleNode::scan(
            ScanType::from_operator(&node.operator).unwrap(),
            node.relation.clone().unwrap(),
        ),
        NodeKind::Join => SimpleNode::join(
            JoinType::from_operator(&node.operator).unwrap(),
            splice(&node.children[0]),
            splice(&node.children[1]),
        ),
        NodeKind::Other => splice(&node.children[0]),
    }
}

/// In-order scan aliases of a planner tree.
pub fn scan_order(node: &PlanNode, out: &mut Vec<String>) {
    if node.kind == NodeKind::Scan {
        out.push(node.relation.clone().unwrap());
    } else {
        for c in &node.children {
            scan_order(c, out);
        }
    }
}

/// Text tokens of hint syntax with their byte spans.
pub fn hint_tokens(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b' ' | b'\n' | b'\t' => i += 1,
            b'(' | b')' => {
                out.push((i, i + 1));
                i += 1;
            }
            b'"' => {
                let end = text[i + 1..].find('"').map(|e| i + e + 2).unwrap();
                out.push((i, end));
                i = end;
            }
            _ => {
                let start = i;
                while i < b.len() && !matches!(b[i], b' ' | b'\n' | b'\t' | b'(' | b')') {
                    i += 1;
                }
                out.push((start, i));
            }
        }
    }
    out
}
