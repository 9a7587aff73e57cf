//! Seeded generation of a small movie database with skewed foreign keys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::{ColumnSchema, ColumnType, ForeignKey, Schema, TableSchema};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Text(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<(String, ColumnData)>,
    /// Columns with an index.
    pub indexed: Vec<String>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn is_indexed(&self, name: &str) -> bool {
        self.indexed.iter().any(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub seed: u64,
    /// Multiplies every table size except the small dimension tables.
    pub scale: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig { seed: 42, scale: 1.0 }
    }
}

const KINDS: [&str; 7] = ["movie", "tv series", "tv movie", "video movie", "tv mini series", "video game", "episode"];
const COMPANY_KINDS: [&str; 4] = ["distributors", "production companies", "special effects companies", "miscellaneous companies"];
const INFO_TYPES: [&str; 16] = [
    "runtimes", "genres", "languages", "countries", "rating", "votes", "budget", "release dates", "color info",
    "sound mix", "certificates", "plot", "tech info", "locations", "keywords", "trivia",
];
const COUNTRIES: [(&str, f64); 10] = [
    ("[us]", 0.40), ("[gb]", 0.12), ("[de]", 0.10), ("[fr]", 0.08), ("[jp]", 0.07),
    ("[it]", 0.06), ("[ca]", 0.05), ("[in]", 0.05), ("[se]", 0.04), ("[nl]", 0.03),
];
const KEYWORDS: [&str; 16] = [
    "sequel", "character-name-in-title", "based-on-novel", "murder", "love", "revenge", "superhero", "marvel-comics",
    "friendship", "family-relationships", "violence", "blood", "female-nudity", "doctor", "police", "dog",
];
const GENRES: [&str; 8] = ["Drama", "Comedy", "Action", "Horror", "Thriller", "Documentary", "Romance", "Sci-Fi"];
const LANGUAGES: [&str; 5] = ["English", "German", "French", "Japanese", "Spanish"];
const INFO_COUNTRIES: [&str; 5] = ["USA", "Germany", "UK", "France", "Japan"];

/// Index in `0..n` skewed toward 0.
fn skewed(rng: &mut ChaCha8Rng, n: usize, power: f64) -> usize {
    let u: f64 = rng.gen();
    ((u.powf(power) * n as f64) as usize).min(n - 1)
}

fn weighted<'a>(rng: &mut ChaCha8Rng, items: &'a [(&'a str, f64)]) -> &'a str {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.gen::<f64>() * total;
    for (v, w) in items {
        if x < *w {
            return v;
        }
        x -= w;
    }
    items[items.len() - 1].0
}

fn ids(n: usize) -> ColumnData {
    ColumnData::Int((1..=n as i64).collect())
}

fn table(name: &str, columns: Vec<(&str, ColumnData)>, indexed: &[&str]) -> Table {
    Table {
        name: name.into(),
        columns: columns.into_iter().map(|(n, c)| (n.to_owned(), c)).collect(),
        indexed: indexed.iter().map(|s| s.to_string()).collect(),
    }
}

/// Builds all tables deterministically from `config`.
pub fn generate(config: &ToyConfig) -> Vec<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sz = |base: usize| ((base as f64 * config.scale).round() as usize).max(1);
    let (n_t, n_cn, n_k, n_mc, n_mk, n_mi) = (sz(2000), sz(250), sz(400), sz(3500), sz(5000), sz(7000));

    let kt = table("kt", vec![("id", ids(7)), ("kind", ColumnData::Text(KINDS.iter().map(|s| s.to_string()).collect()))], &["id"]);
    let ct = table(
        "ct",
        vec![("id", ids(4)), ("kind", ColumnData::Text(COMPANY_KINDS.iter().map(|s| s.to_string()).collect()))],
        &["id"],
    );
    let it = table(
        "it",
        vec![("id", ids(16)), ("info", ColumnData::Text(INFO_TYPES.iter().map(|s| s.to_string()).collect()))],
        &["id"],
    );
    let k = table(
        "k",
        vec![
            ("id", ids(n_k)),
            (
                "keyword",
                ColumnData::Text(
                    (0..n_k).map(|i| KEYWORDS.get(i).map_or_else(|| format!("keyword-{i}"), |s| s.to_string())).collect(),
                ),
            ),
        ],
        &["id"],
    );
    let cn_country: Vec<String> = (0..n_cn).map(|_| weighted(&mut rng, &COUNTRIES).to_owned()).collect();
    let cn = table(
        "cn",
        vec![
            ("id", ids(n_cn)),
            ("name", ColumnData::Text((0..n_cn).map(|i| format!("company-{i}")).collect())),
            ("country_code", ColumnData::Text(cn_country)),
        ],
        &["id"],
    );
    let kind_weights: Vec<(&str, f64)> =
        vec![("1", 0.5), ("2", 0.08), ("3", 0.06), ("4", 0.05), ("5", 0.03), ("6", 0.03), ("7", 0.25)];
    let mut t_kind = Vec::with_capacity(n_t);
    let mut t_year = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        let kind: i64 = weighted(&mut rng, &kind_weights).parse().unwrap();
        let recent = if kind == 7 { 4.0 } else { 2.0 };
        t_kind.push(kind);
        t_year.push(2020 - (rng.gen::<f64>().powf(recent) * 120.0) as i64);
    }
    let t = table(
        "t",
        vec![
            ("id", ids(n_t)),
            ("title", ColumnData::Text((0..n_t).map(|i| format!("title-{i}")).collect())),
            ("kind_id", ColumnData::Int(t_kind)),
            ("production_year", ColumnData::Int(t_year)),
        ],
        &["id", "kind_id"],
    );
    let ct_weights = [("1", 0.45), ("2", 0.45), ("3", 0.05), ("4", 0.05)];
    let mc = {
        let mut movie = Vec::with_capacity(n_mc);
        let mut company = Vec::with_capacity(n_mc);
        let mut ctype = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            movie.push(skewed(&mut rng, n_t, 2.0) as i64 + 1);
            company.push(skewed(&mut rng, n_cn, 2.5) as i64 + 1);
            ctype.push(weighted(&mut rng, &ct_weights).parse::<i64>().unwrap());
        }
        table(
            "mc",
            vec![
                ("id", ids(n_mc)),
                ("movie_id", ColumnData::Int(movie)),
                ("company_id", ColumnData::Int(company)),
                ("company_type_id", ColumnData::Int(ctype)),
            ],
            &["id", "movie_id", "company_id", "company_type_id"],
        )
    };
    let mk = {
        let movie = (0..n_mk).map(|_| skewed(&mut rng, n_t, 2.0) as i64 + 1).collect();
        let keyword = (0..n_mk).map(|_| skewed(&mut rng, n_k, 3.0) as i64 + 1).collect();
        table(
            "mk",
            vec![("id", ids(n_mk)), ("movie_id", ColumnData::Int(movie)), ("keyword_id", ColumnData::Int(keyword))],
            &["id", "movie_id", "keyword_id"],
        )
    };
    let mi = {
        let mut movie = Vec::with_capacity(n_mi);
        let mut itype = Vec::with_capacity(n_mi);
        let mut info = Vec::with_capacity(n_mi);
        for _ in 0..n_mi {
            movie.push(skewed(&mut rng, n_t, 1.7) as i64 + 1);
            let ty = skewed(&mut rng, 16, 1.5) + 1;
            itype.push(ty as i64);
            info.push(match ty {
                2 => GENRES[skewed(&mut rng, GENRES.len(), 1.5)].to_owned(),
                3 => LANGUAGES[skewed(&mut rng, LANGUAGES.len(), 2.0)].to_owned(),
                4 => INFO_COUNTRIES[skewed(&mut rng, INFO_COUNTRIES.len(), 2.0)].to_owned(),
                5 => format!("{:.1}", 1.0 + rng.gen::<f64>() * 8.9),
                _ => format!("info-{}", rng.gen_range(0..300)),
            });
        }
        table(
            "mi",
            vec![
                ("id", ids(n_mi)),
                ("movie_id", ColumnData::Int(movie)),
                ("info_type_id", ColumnData::Int(itype)),
                ("info", ColumnData::Text(info)),
            ],
            &["id", "movie_id", "info_type_id"],
        )
    };
    vec![t, kt, mc, cn, ct, mk, k, mi, it]
}

pub fn foreign_keys() -> Vec<ForeignKey> {
    [
        ("t", "kind_id", "kt"),
        ("mc", "movie_id", "t"),
        ("mc", "company_id", "cn"),
        ("mc", "company_type_id", "ct"),
        ("mk", "movie_id", "t"),
        ("mk", "keyword_id", "k"),
        ("mi", "movie_id", "t"),
        ("mi", "info_type_id", "it"),
    ]
    .iter()
    .map(|(t, c, r)| ForeignKey { table: t.to_string(), column: c.to_string(), ref_table: r.to_string(), ref_column: "id".into() })
    .collect()
}

pub fn schema_of(tables: &[Table]) -> Schema {
    Schema {
        tables: tables
            .iter()
            .map(|t| TableSchema {
                name: t.name.clone(),
                columns: t
                    .columns
                    .iter()
                    .map(|(n, c)| ColumnSchema {
                        name: n.clone(),
                        ty: if matches!(c, ColumnData::Int(_)) { ColumnType::Int } else { ColumnType::Text },
                    })
                    .collect(),
            })
            .collect(),
        foreign_keys: foreign_keys(),
    }
}
