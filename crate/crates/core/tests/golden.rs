//! Byte-exact golden files. Set `PLANHINT_BLESS=1` to rewrite them.

use std::path::PathBuf;

use planhint::catalog_stats::{obtain_statistics, render_stats};
use planhint::dbms_client::parse_explain_json;
use planhint::hint_codec::{render_hints, transform_plan};
use planhint::plan_model::simplify;
use planhint::sim::{ToyConfig, ToyDb};
use planhint::DbmsClient;

pub const STATS_QUERY: &str =
    "SELECT count(*) FROM cn, mc WHERE cn.country_code = '[de]' AND cn.id = mc.company_id AND mc.company_type_id = 2";

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn check(name: &str, actual: &str) {
    let path = fixture(name);
    if std::env::var_os("PLANHINT_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "golden {name} differs");
}

#[test]
fn four_table_explain_to_hints() {
    let text = std::fs::read_to_string(fixture("four_table_explain.json")).unwrap();
    let (tree, exec) = parse_explain_json(&text).unwrap();
    assert_eq!(exec, None);
    let hints = transform_plan(&simplify(&tree).unwrap());
    check("four_table_hints.txt", &(render_hints(&hints) + "\n"));
}

#[test]
fn toy_catalog_statistics() {
    let mut db: ToyDb = ToyDb::new(ToyConfig::default());
    let plan = db.explain(STATS_QUERY, None, None).unwrap();
    let stats = obtain_statistics(STATS_QUERY, db.snapshot(), &plan).unwrap();
    check("toy_stats.txt", &render_stats(&stats));
}
