//! Table, column and foreign-key descriptions used to check generated SQL.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Int,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub table: String,
    pub column: String,
    pub ref_table: String,
    pub ref_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub tables: Vec<TableSchema>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl Schema {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn column_type(&self, table: &str, column: &str) -> Option<ColumnType> {
        self.table(table)?.columns.iter().find(|c| c.name == column).map(|c| c.ty)
    }

    /// Foreign keys touching `table` on either side.
    pub fn edges_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ForeignKey> + 'a {
        self.foreign_keys.iter().filter(move |f| f.table == table || f.ref_table == table)
    }

    /// Whether `a.col_a = b.col_b` follows a declared foreign key.
    pub fn is_fk_join(&self, a: &str, col_a: &str, b: &str, col_b: &str) -> bool {
        self.foreign_keys.iter().any(|f| {
            (f.table == a && f.column == col_a && f.ref_table == b && f.ref_column == col_b)
                || (f.table == b && f.column == col_b && f.ref_table == a && f.ref_column == col_a)
        })
    }

    /// `CREATE TABLE`-style listing for prompts.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for t in &self.tables {
            let cols: Vec<String> = t
                .columns
                .iter()
                .map(|c| format!("{} {}", c.name, if c.ty == ColumnType::Int { "integer" } else { "text" }))
                .collect();
            let _ = writeln!(s, "{}({})", t.name, cols.join(", "));
        }
        for f in &self.foreign_keys {
            let _ = writeln!(s, "{}.{} -> {}.{}", f.table, f.column, f.ref_table, f.ref_column);
        }
        s
    }
}
