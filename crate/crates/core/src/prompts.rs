//! Versioned prompt templates shared by dataset building and inference.

use crate::hint_codec::HintSet;

pub const PROMPT_VERSION: &str = "v1";

pub const GENERATIVE_SYSTEM: &str = "You are a query optimizer. Given a SQL query and statistics of the tables it \
reads, output a complete pg_hint_plan hint set: one scan hint per table, one join hint per join and one Leading \
hint, one hint per line.";

pub const SELECTIVE_SYSTEM: &str = "You are a query optimizer. Given a SQL query, statistics of the tables it \
reads and a numbered list of candidate hint sets, answer with the number of the candidate that executes fastest.";

pub const EXTENSION_SYSTEM: &str = "You write SQL for a benchmark. Add exactly one more table to the query, \
joined along a foreign key, and add one predicate on the new table whose value is the placeholder %s. Keep every \
existing table and predicate. Answer with the SQL only.";

/// Input text asking for a one-table extension of `sql`.
pub fn extension_prompt(schema_text: &str, sql: &str) -> String {
    format!("### Schema\n{}### Query\n{}\n### Extended query\n", ensure_newline(schema_text), sql.trim())
}

/// Query section of a prompt built by this module.
pub fn prompt_query(prompt: &str) -> Option<&str> {
    let start = prompt.find("### Query\n")? + "### Query\n".len();
    let rest = &prompt[start..];
    Some(rest[..rest.find("\n###").unwrap_or(rest.len())].trim())
}

/// Input text for hint generation.
pub fn generative_prompt(sql: &str, stats_text: &str) -> String {
    format!("### Query\n{}\n### Statistics\n{}### Hints\n", sql.trim(), ensure_newline(stats_text))
}

/// Input text for list-wise selection; candidates are numbered from 0.
pub fn selective_prompt(sql: &str, stats_text: &str, candidates: &[HintSet]) -> String {
    let mut s = format!("### Query\n{}\n### Statistics\n{}### Candidates\n", sql.trim(), ensure_newline(stats_text));
    for (i, h) in candidates.iter().enumerate() {
        s.push_str(&format!("{i}: {}\n", h.to_single_line()));
    }
    s.push_str("### Answer\n");
    s
}

fn ensure_newline(s: &str) -> String {
    if s.is_empty() || s.ends_with('\n') {
        s.to_owned()
    } else {
        format!("{s}\n")
    }
}

/// Leading decimal integer of a completion, ignoring surrounding whitespace.
pub fn parse_index(output: &str) -> Option<usize> {
    let t = output.trim_start();
    let digits: String = t.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        None
    } else {
        digits.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hint_codec::parse_hints;

    #[test]
    fn selective_layout() {
        let h = parse_hints("SeqScan(a)\nLeading(a)").unwrap();
        let p = selective_prompt("SELECT * FROM a;", "Card_Tb:\na:1(1)", &[h.clone(), h]);
        assert_eq!(
            p,
            "### Query\nSELECT * FROM a;\n### Statistics\nCard_Tb:\na:1(1)\n### Candidates\n\
             0: SeqScan(a) Leading(a)\n1: SeqScan(a) Leading(a)\n### Answer\n"
        );
    }

    #[test]
    fn query_section_is_recoverable() {
        let p = extension_prompt("t(id integer)", "SELECT * FROM t;");
        assert_eq!(prompt_query(&p), Some("SELECT * FROM t;"));
        assert_eq!(prompt_query(&generative_prompt("SELECT 1 FROM t", "")), Some("SELECT 1 FROM t"));
    }

    #[test]
    fn index_parsing() {
        assert_eq!(parse_index(" 12\n"), Some(12));
        assert_eq!(parse_index("3: because"), Some(3));
        assert_eq!(parse_index("candidate 3"), None);
        assert_eq!(parse_index(""), None);
        assert_eq!(parse_index("99999999999999999999999"), None);
    }
}
