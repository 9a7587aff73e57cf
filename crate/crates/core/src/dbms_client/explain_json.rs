//! Conversion between PostgreSQL `EXPLAIN (FORMAT JSON)` output and [`PlanTree`].

use serde_json::{json, Map, Value};

use crate::plan_model::{classify_operator, NodeKind, PlanNode, PlanTree};

use super::DbmsError;

/// Parses the JSON document printed by `EXPLAIN (FORMAT JSON)`, with or
/// without `ANALYZE`. Returns the plan and, for `ANALYZE`, the reported
/// execution time in milliseconds.
pub fn parse_explain_json(text: &str) -> Result<(PlanTree, Option<f64>), DbmsError> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| DbmsError::Parse(format!("EXPLAIN JSON: {e}")))?;
    parse_explain_value(&value)
}

pub fn parse_explain_value(value: &Value) -> Result<(PlanTree, Option<f64>), DbmsError> {
    let top = match value {
        Value::Array(items) => items.first().ok_or_else(|| DbmsError::Parse("empty EXPLAIN output".into()))?,
        v => v,
    };
    let plan = top.get("Plan").ok_or_else(|| DbmsError::Parse("EXPLAIN output has no `Plan`".into()))?;
    let root = parse_node(plan)?;
    let mut tree = PlanTree::new(root);
    tree.planning_ms = top.get("Planning Time").and_then(Value::as_f64);
    Ok((tree, top.get("Execution Time").and_then(Value::as_f64)))
}

fn parse_node(v: &Value) -> Result<PlanNode, DbmsError> {
    let obj = v.as_object().ok_or_else(|| DbmsError::Parse("plan node is not an object".into()))?;
    let operator = obj
        .get("Node Type")
        .and_then(Value::as_str)
        .ok_or_else(|| DbmsError::Parse("plan node without `Node Type`".into()))?
        .to_owned();
    let children = match obj.get("Plans") {
        Some(Value::Array(items)) => items.iter().map(parse_node).collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(DbmsError::Parse("`Plans` is not an array".into())),
        None => Vec::new(),
    };
    let kind = classify_operator(&operator, children.len());
    let str_field = |k: &str| obj.get(k).and_then(Value::as_str).map(str::to_owned);
    let relation = if kind == NodeKind::Scan { str_field("Alias").or_else(|| str_field("Relation Name")) } else { None };
    let relation_name = if kind == NodeKind::Scan { str_field("Relation Name") } else { None };
    let est_rows = obj.get("Plan Rows").and_then(Value::as_f64).unwrap_or(0.0).max(0.0).round() as u64;
    let est_cost = obj.get("Total Cost").and_then(Value::as_f64).unwrap_or(0.0).max(0.0);
    Ok(PlanNode {
        kind,
        operator,
        relation,
        relation_name,
        join_modifier: str_field("Join Type"),
        parent_relationship: str_field("Parent Relationship"),
        children,
        est_rows,
        est_cost,
    })
}

/// Renders a plan in the same JSON layout `EXPLAIN (FORMAT JSON)` produces.
pub fn plan_to_explain_json(plan: &PlanTree, execution_ms: Option<f64>) -> Value {
    let mut top = Map::new();
    top.insert("Plan".into(), node_to_json(&plan.root));
    if let Some(p) = plan.planning_ms {
        top.insert("Planning Time".into(), json!(p));
    }
    if let Some(e) = execution_ms {
        top.insert("Execution Time".into(), json!(e));
    }
    Value::Array(vec![Value::Object(top)])
}

fn node_to_json(n: &PlanNode) -> Value {
    let mut o = Map::new();
    o.insert("Node Type".into(), json!(n.operator));
    if let Some(p) = &n.parent_relationship {
        o.insert("Parent Relationship".into(), json!(p));
    }
    if let Some(j) = &n.join_modifier {
        o.insert("Join Type".into(), json!(j));
    }
    if let Some(alias) = &n.relation {
        o.insert("Relation Name".into(), json!(n.relation_name.as_deref().unwrap_or(alias)));
        o.insert("Alias".into(), json!(alias));
    }
    o.insert("Total Cost".into(), json!(n.est_cost));
    o.insert("Plan Rows".into(), json!(n.est_rows));
    if !n.children.is_empty() {
        o.insert("Plans".into(), Value::Array(n.children.iter().map(node_to_json).collect()));
    }
    Value::Object(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hint_codec::transform_plan;
    use crate::plan_model::simplify;

    const SAMPLE: &str = r#"[{"Plan": {"Node Type": "Aggregate", "Total Cost": 50.5, "Plan Rows": 1,
        "Plans": [{"Node Type": "Hash Join", "Parent Relationship": "Outer", "Join Type": "Semi",
          "Total Cost": 40.0, "Plan Rows": 7,
          "Plans": [
            {"Node Type": "Seq Scan", "Parent Relationship": "Outer", "Relation Name": "title", "Alias": "t",
             "Total Cost": 20.0, "Plan Rows": 1234.4},
            {"Node Type": "Hash", "Parent Relationship": "Inner", "Total Cost": 10.0, "Plan Rows": 3,
             "Plans": [{"Node Type": "Bitmap Heap Scan", "Parent Relationship": "Outer", "Relation Name": "movie_info",
                "Alias": "mi", "Total Cost": 9.0, "Plan Rows": 3,
                "Plans": [{"Node Type": "Bitmap Index Scan", "Parent Relationship": "Outer", "Index Name": "mi_idx",
                  "Total Cost": 1.0, "Plan Rows": 3}]}]}]}]},
        "Planning Time": 0.25, "Execution Time": 3.5}]"#;

    #[test]
    fn parses_and_round_trips() {
        let (tree, exec) = parse_explain_json(SAMPLE).unwrap();
        assert_eq!(exec, Some(3.5));
        assert_eq!(tree.planning_ms, Some(0.25));
        let t = tree.scan_for("t").unwrap();
        assert_eq!((t.est_rows, t.relation_name.as_deref()), (1234, Some("title")));
        let hints = transform_plan(&simplify(&tree).unwrap());
        assert_eq!(hints.to_single_line(), "SeqScan(t) BitmapScan(mi) HashJoin(t mi) Leading((t mi))");
        let again = plan_to_explain_json(&tree, exec);
        let (tree2, exec2) = parse_explain_value(&again).unwrap();
        assert_eq!((tree2, exec2), (tree, exec));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_explain_json("[]").is_err());
        assert!(parse_explain_json("{\"Plan\": {}}").is_err());
        assert!(parse_explain_json("not json").is_err());
    }
}
