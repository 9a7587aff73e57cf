//! Query plan trees as produced by the planner, and their simplified
//! scan/join-only form.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of the operator-name normalization table below. Bump whenever a
/// mapping changes, since it alters every serialized hint downstream.
pub const OPERATOR_MAP_VERSION: u32 = 1;

/// Planner node types that make up a bitmap index probe beneath a
/// `Bitmap Heap Scan`.
const BITMAP_INDEX_NODES: &[&str] = &["Bitmap Index Scan", "BitmapAnd", "BitmapOr"];

/// Node types that signal a nested query the hint machinery cannot address.
const NESTED_QUERY_NODES: &[&str] = &["CTE Scan", "Subquery Scan", "WorkTable Scan"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("operator `{0}` has no scan or join mapping")]
    UnknownOperator(String),
    #[error("nested query constructs are not supported ({0})")]
    NestedQuery(String),
    #[error("duplicate table alias `{0}` in plan")]
    DuplicateAlias(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Scan,
    Join,
    Other,
}

/// Physical scan methods addressable by scan hints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScanType {
    SeqScan,
    IndexScan,
    IndexOnlyScan,
    TidScan,
    BitmapScan,
}

impl ScanType {
    pub const ALL: [ScanType; 5] = [
        ScanType::SeqScan,
        ScanType::IndexScan,
        ScanType::IndexOnlyScan,
        ScanType::TidScan,
        ScanType::BitmapScan,
    ];

    pub fn hint_name(self) -> &'static str {
        match self {
            ScanType::SeqScan => "SeqScan",
            ScanType::IndexScan => "IndexScan",
            ScanType::IndexOnlyScan => "IndexOnlyScan",
            ScanType::TidScan => "TidScan",
            ScanType::BitmapScan => "BitmapScan",
        }
    }

    pub fn from_hint_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.hint_name() == name)
    }

    /// Planner node type emitted for this scan (the heap side for bitmap scans).
    pub fn operator_name(self) -> &'static str {
        match self {
            ScanType::SeqScan => "Seq Scan",
            ScanType::IndexScan => "Index Scan",
            ScanType::IndexOnlyScan => "Index Only Scan",
            ScanType::TidScan => "Tid Scan",
            ScanType::BitmapScan => "Bitmap Heap Scan",
        }
    }

    pub fn from_operator(op: &str) -> Option<Self> {
        match op {
            "Seq Scan" => Some(ScanType::SeqScan),
            "Index Scan" => Some(ScanType::IndexScan),
            "Index Only Scan" => Some(ScanType::IndexOnlyScan),
            "Tid Scan" | "Tid Range Scan" => Some(ScanType::TidScan),
            "Bitmap Heap Scan" => Some(ScanType::BitmapScan),
            _ => None,
        }
    }
}

impl fmt::Display for ScanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.hint_name())
    }
}

/// Physical join methods addressable by join hints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JoinType {
    NestLoop,
    HashJoin,
    MergeJoin,
}

impl JoinType {
    pub const ALL: [JoinType; 3] = [JoinType::NestLoop, JoinType::HashJoin, JoinType::MergeJoin];

    pub fn hint_name(self) -> &'static str {
        match self {
            JoinType::NestLoop => "NestLoop",
            JoinType::HashJoin => "HashJoin",
            JoinType::MergeJoin => "MergeJoin",
        }
    }

    /// Accepts the plugin spelling and the long-hand `NestedLoop`.
    pub fn from_hint_name(name: &str) -> Option<Self> {
        match name {
            "NestLoop" | "NestedLoop" => Some(JoinType::NestLoop),
            "HashJoin" => Some(JoinType::HashJoin),
            "MergeJoin" => Some(JoinType::MergeJoin),
            _ => None,
        }
    }

    pub fn operator_name(self) -> &'static str {
        match self {
            JoinType::NestLoop => "Nested Loop",
            JoinType::HashJoin => "Hash Join",
            JoinType::MergeJoin => "Merge Join",
        }
    }

    pub fn from_operator(op: &str) -> Option<Self> {
        match op {
            "Nested Loop" => Some(JoinType::NestLoop),
            "Hash Join" => Some(JoinType::HashJoin),
            "Merge Join" => Some(JoinType::MergeJoin),
            _ => None,
        }
    }
}

impl fmt::Display for JoinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.hint_name())
    }
}

/// Classifies a planner node type. Unknown leaf operators are treated as
/// scans and unknown interior ones as pass-through nodes; `simplify` rejects
/// the former.
pub fn classify_operator(op: &str, n_children: usize) -> NodeKind {
    if JoinType::from_operator(op).is_some() {
        NodeKind::Join
    } else if ScanType::from_operator(op).is_some() {
        NodeKind::Scan
    } else if BITMAP_INDEX_NODES.contains(&op) {
        NodeKind::Other
    } else if n_children == 0 {
        NodeKind::Scan
    } else {
        NodeKind::Other
    }
}

fn is_bitmap_index_node(op: &str) -> bool {
    BITMAP_INDEX_NODES.contains(&op)
}

/// One operator in a planner-produced plan tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub kind: NodeKind,
    pub operator: String,
    /// Table alias, scan nodes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    /// Underlying table name when it differs from the alias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_name: Option<String>,
    /// Planner join modifier (Inner, Semi, Anti, ...); ignored by hints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_modifier: Option<String>,
    /// How this node hangs off its parent (Outer, Inner, InitPlan, SubPlan ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_relationship: Option<String>,
    #[serde(default)]
    pub children: Vec<PlanNode>,
    pub est_rows: u64,
    pub est_cost: f64,
}

impl PlanNode {
    pub fn scan(operator: impl Into<String>, alias: impl Into<String>, est_rows: u64, est_cost: f64) -> Self {
        PlanNode {
            kind: NodeKind::Scan,
            operator: operator.into(),
            relation: Some(alias.into()),
            relation_name: None,
            join_modifier: None,
            parent_relationship: None,
            children: Vec::new(),
            est_rows,
            est_cost,
        }
    }

    pub fn join(operator: impl Into<String>, left: PlanNode, right: PlanNode, est_rows: u64, est_cost: f64) -> Self {
        PlanNode {
            kind: NodeKind::Join,
            operator: operator.into(),
            relation: None,
            relation_name: None,
            join_modifier: None,
            parent_relationship: None,
            children: vec![left, right],
            est_rows,
            est_cost,
        }
    }

    pub fn other(operator: impl Into<String>, child: PlanNode, est_rows: u64, est_cost: f64) -> Self {
        PlanNode {
            kind: NodeKind::Other,
            operator: operator.into(),
            relation: None,
            relation_name: None,
            join_modifier: None,
            parent_relationship: None,
            children: vec![child],
            est_rows,
            est_cost,
        }
    }

    /// Checks the per-kind arity and alias rules over the whole subtree.
    pub fn validate(&self) -> Result<(), PlanError> {
        match self.kind {
            NodeKind::Scan => {
                if self.relation.as_deref().map_or(true, str::is_empty) {
                    return Err(PlanError::MalformedPlan(format!(
                        "scan `{}` has no relation alias",
                        self.operator
                    )));
                }
                let bitmap_heap = self.operator == "Bitmap Heap Scan";
                if !self.children.is_empty() && !bitmap_heap {
                    return Err(PlanError::MalformedPlan(format!(
                        "scan `{}` has {} children",
                        self.operator,
                        self.children.len()
                    )));
                }
                for child in &self.children {
                    child.validate_bitmap_probe()?;
                }
                Ok(())
            }
            NodeKind::Join => {
                if self.relation.is_some() {
                    return Err(PlanError::MalformedPlan(format!(
                        "join `{}` carries a relation alias",
                        self.operator
                    )));
                }
                if self.children.len() != 2 {
                    return Err(PlanError::MalformedPlan(format!(
                        "join `{}` has {} children",
                        self.operator,
                        self.children.len()
                    )));
                }
                self.children.iter().try_for_each(PlanNode::validate)
            }
            NodeKind::Other => {
                if self.children.len() != 1 {
                    return Err(PlanError::MalformedPlan(format!(
                        "`{}` has {} children, expected 1",
                        self.operator,
                        self.children.len()
                    )));
                }
                self.children[0].validate()
            }
        }
    }

    fn validate_bitmap_probe(&self) -> Result<(), PlanError> {
        if !is_bitmap_index_node(&self.operator) {
            return Err(PlanError::MalformedPlan(format!(
                "`{}` below a bitmap heap scan",
                self.operator
            )));
        }
        self.children.iter().try_for_each(PlanNode::validate_bitmap_probe)
    }

    fn has_bitmap_index_descendant(&self) -> bool {
        self.children
            .iter()
            .any(|c| c.operator == "Bitmap Index Scan" || c.has_bitmap_index_descendant())
    }

    /// Number of nodes in the subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(PlanNode::size).sum::<usize>()
    }

    /// Depth-first preorder iterator over the subtree.
    pub fn iter(&self) -> impl Iterator<Item = &PlanNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }
}

/// A planner-produced plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTree {
    pub root: PlanNode,
    /// Planning time reported by the planner, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning_ms: Option<f64>,
}

impl PlanTree {
    pub fn new(root: PlanNode) -> Self {
        PlanTree { root, planning_ms: None }
    }

    pub fn total_cost(&self) -> f64 {
        self.root.est_cost
    }

    /// Finds the scan node for `alias`.
    pub fn scan_for(&self, alias: &str) -> Option<&PlanNode> {
        self.root
            .iter()
            .find(|n| n.kind == NodeKind::Scan && n.relation.as_deref() == Some(alias))
    }
}

/// A node of the simplified plan: only scans and joins survive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimpleNode {
    Scan {
        scan: ScanType,
        alias: String,
    },
    Join {
        join: JoinType,
        left: Box<SimpleNode>,
        right: Box<SimpleNode>,
    },
}

impl SimpleNode {
    pub fn scan(scan: ScanType, alias: impl Into<String>) -> Self {
        SimpleNode::Scan { scan, alias: alias.into() }
    }

    pub fn join(join: JoinType, left: SimpleNode, right: SimpleNode) -> Self {
        SimpleNode::Join { join, left: Box::new(left), right: Box::new(right) }
    }

    fn collect_aliases<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            SimpleNode::Scan { alias, .. } => out.push(alias),
            SimpleNode::Join { left, right, .. } => {
                left.collect_aliases(out);
                right.collect_aliases(out);
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            SimpleNode::Scan { .. } => 1,
            SimpleNode::Join { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn join_count(&self) -> usize {
        match self {
            SimpleNode::Scan { .. } => 0,
            SimpleNode::Join { left, right, .. } => 1 + left.join_count() + right.join_count(),
        }
    }

    /// True when every join's right child is a scan.
    pub fn is_left_deep(&self) -> bool {
        match self {
            SimpleNode::Scan { .. } => true,
            SimpleNode::Join { left, right, .. } => {
                matches!(**right, SimpleNode::Scan { .. }) && left.is_left_deep()
            }
        }
    }
}

/// Plan reduced to scan and join nodes, with its in-order alias sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SimpleNode", into = "SimpleNode")]
pub struct SimplifiedPlan {
    root: SimpleNode,
    table_aliases: Vec<String>,
}

impl SimplifiedPlan {
    /// Wraps a tree, rejecting duplicate aliases.
    pub fn new(root: SimpleNode) -> Result<Self, PlanError> {
        let mut aliases = Vec::new();
        root.collect_aliases(&mut aliases);
        let mut seen = HashSet::new();
        for a in &aliases {
            if a.is_empty() {
                return Err(PlanError::MalformedPlan("empty table alias".into()));
            }
            if !seen.insert(*a) {
                return Err(PlanError::DuplicateAlias(a.to_string()));
            }
        }
        let table_aliases = aliases.into_iter().map(str::to_owned).collect();
        Ok(SimplifiedPlan { root, table_aliases })
    }

    /// Skips the duplicate check for callers that guarantee distinct aliases.
    pub(crate) fn from_distinct(root: SimpleNode) -> Self {
        let mut aliases = Vec::new();
        root.collect_aliases(&mut aliases);
        let table_aliases = aliases.into_iter().map(str::to_owned).collect();
        SimplifiedPlan { root, table_aliases }
    }

    pub fn root(&self) -> &SimpleNode {
        &self.root
    }

    pub fn table_aliases(&self) -> &[String] {
        &self.table_aliases
    }

    pub fn leaf_count(&self) -> usize {
        self.table_aliases.len()
    }

    pub fn join_count(&self) -> usize {
        self.root.join_count()
    }

    pub fn is_left_deep(&self) -> bool {
        self.root.is_left_deep()
    }

    /// Re-expands into a planner-style tree (no Other nodes, zero estimates).
    pub fn to_plan_tree(&self) -> PlanTree {
        fn go(node: &SimpleNode) -> PlanNode {
            match node {
                SimpleNode::Scan { scan, alias } => {
                    let mut n = PlanNode::scan(scan.operator_name(), alias.clone(), 0, 0.0);
                    if *scan == ScanType::BitmapScan {
                        n.children.push(PlanNode {
                            kind: NodeKind::Other,
                            operator: "Bitmap Index Scan".into(),
                            relation: None,
                            relation_name: None,
                            join_modifier: None,
                            parent_relationship: Some("Outer".into()),
                            children: Vec::new(),
                            est_rows: 0,
                            est_cost: 0.0,
                        });
                    }
                    n
                }
                SimpleNode::Join { join, left, right } => {
                    PlanNode::join(join.operator_name(), go(left), go(right), 0, 0.0)
                }
            }
        }
        PlanTree::new(go(&self.root))
    }
}

impl TryFrom<SimpleNode> for SimplifiedPlan {
    type Error = PlanError;

    fn try_from(root: SimpleNode) -> Result<Self, Self::Error> {
        SimplifiedPlan::new(root)
    }
}

impl From<SimplifiedPlan> for SimpleNode {
    fn from(p: SimplifiedPlan) -> Self {
        p.root
    }
}

/// Number of scan leaves; always `join_count() + 1`.
pub fn leaf_count(plan: &SimplifiedPlan) -> usize {
    plan.leaf_count()
}

/// Reduces a planner tree to its scan/join skeleton.
///
/// Pass-through nodes are spliced out, a bitmap heap scan with its index
/// probe becomes one `BitmapScan` leaf and semi/anti join modifiers are
/// dropped. Sub-plans and CTEs are rejected.
pub fn simplify(plan: &PlanTree) -> Result<SimplifiedPlan, PlanError> {
    let root = simplify_node(&plan.root)?;
    SimplifiedPlan::new(root)
}

fn simplify_node(node: &PlanNode) -> Result<SimpleNode, PlanError> {
    if NESTED_QUERY_NODES.contains(&node.operator.as_str()) {
        return Err(PlanError::NestedQuery(node.operator.clone()));
    }
    if let Some(rel) = node
        .children
        .iter()
        .filter_map(|c| c.parent_relationship.as_deref())
        .find(|r| matches!(*r, "InitPlan" | "SubPlan"))
    {
        return Err(PlanError::NestedQuery(format!("{rel} below `{}`", node.operator)));
    }
    match node.kind {
        NodeKind::Scan => {
            let scan = ScanType::from_operator(&node.operator)
                .ok_or_else(|| PlanError::UnknownOperator(node.operator.clone()))?;
            let alias = node
                .relation
                .clone()
                .filter(|a| !a.is_empty())
                .ok_or_else(|| PlanError::MalformedPlan(format!("scan `{}` without alias", node.operator)))?;
            if scan == ScanType::BitmapScan && !node.has_bitmap_index_descendant() {
                return Err(PlanError::MalformedPlan(
                    "bitmap heap scan without a bitmap index scan".into(),
                ));
            }
            if scan != ScanType::BitmapScan && !node.children.is_empty() {
                return Err(PlanError::MalformedPlan(format!(
                    "scan `{}` has children",
                    node.operator
                )));
            }
            Ok(SimpleNode::Scan { scan, alias })
        }
        NodeKind::Join => {
            let join = JoinType::from_operator(&node.operator)
                .ok_or_else(|| PlanError::UnknownOperator(node.operator.clone()))?;
            let simplified: Vec<SimpleNode> =
                node.children.iter().map(simplify_node).collect::<Result<_, _>>()?;
            let [left, right]: [SimpleNode; 2] = simplified.try_into().map_err(|v: Vec<SimpleNode>| {
                PlanError::MalformedPlan(format!("join `{}` has {} children", node.operator, v.len()))
            })?;
            Ok(SimpleNode::join(join, left, right))
        }
        NodeKind::Other => match node.children.as_slice() {
            [child] => simplify_node(child),
            [] if is_bitmap_index_node(&node.operator) => Err(PlanError::MalformedPlan(format!(
                "`{}` outside a bitmap heap scan",
                node.operator
            ))),
            children => Err(PlanError::MalformedPlan(format!(
                "`{}` has {} children, expected 1",
                node.operator,
                children.len()
            ))),
        },
    }
}
