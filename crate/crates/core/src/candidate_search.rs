//! Candidate hint sets from planner-knob arms or from sampled generations.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, GenerationBackend, GenerationRequest};
use crate::catalog_stats::{render_stats, QueryStats};
use crate::dbms_client::{DbmsClient, DbmsError, KnobVector};
use crate::hint_codec::{hints_to_plan, parse_hints, transform_plan, HintSet};
use crate::plan_model::{simplify, PlanError};
use crate::prompts::{generative_prompt, GENERATIVE_SYSTEM};
use crate::sql::{parse_select, SqlError};

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error(transparent)]
    Dbms(#[from] DbmsError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("no arms given")]
    NoArms,
    #[error("every arm failed to plan the query")]
    AllArmsFailed,
    #[error("sampling policy needs at least one sample")]
    NoSamples,
    #[error("unknown arm id {0}")]
    UnknownArm(usize),
}

/// One knob configuration. Ids index [`all_bao_arms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaoArm {
    pub id: usize,
    pub knobs: KnobVector,
}

/// Knob vector left out on top of the invalid ones: index-only scans as the
/// sole scan method with merge join as the sole join method.
pub const EXCLUDED_EXTRA_BITS: u8 = 0b010001;

/// The 48 arms. A vector is kept when it enables at least one join method
/// and at least one scan method and is not [`EXCLUDED_EXTRA_BITS`]. Ids run
/// over the kept vectors in descending bit order, so arm 0 enables
/// everything.
pub fn all_bao_arms() -> Vec<BaoArm> {
    (0..64u8)
        .rev()
        .map(KnobVector::from_bits)
        .filter(|k| k.is_valid() && k.bits() != EXCLUDED_EXTRA_BITS)
        .enumerate()
        .map(|(id, knobs)| BaoArm { id, knobs })
        .collect()
}

/// Knob bits of the shipped five-arm default subset.
pub const DEFAULT_ARM_BITS: [u8; 5] = [0b111111, 0b110111, 0b101101, 0b100101, 0b101111];

pub fn arm_by_bits(bits: u8) -> Option<BaoArm> {
    all_bao_arms().into_iter().find(|a| a.knobs.bits() == bits)
}

pub fn arms_by_ids(ids: &[usize]) -> Result<Vec<BaoArm>, CandidateError> {
    let all = all_bao_arms();
    ids.iter().map(|&i| all.get(i).copied().ok_or(CandidateError::UnknownArm(i))).collect()
}

pub fn default_arm_subset() -> Vec<BaoArm> {
    DEFAULT_ARM_BITS.iter().map(|&b| arm_by_bits(b).expect("default arms are valid")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Provenance {
    Arm(usize),
    Sample(usize),
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub hint: HintSet,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub invalid: usize,
    /// Arms that could not be planned, with the planner's message.
    pub skipped_arms: Vec<(usize, String)>,
}

impl GenerationReport {
    pub fn invalid_rate(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.invalid as f64 / self.requested as f64
        }
    }
}

/// Ordered candidates for one query. Order is the selector's index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query: String,
    pub entries: Vec<CandidateEntry>,
    #[serde(default)]
    pub report: GenerationReport,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hints(&self) -> Vec<HintSet> {
        self.entries.iter().map(|e| e.hint.clone()).collect()
    }

    /// `true` for entries whose hint set already occurred earlier.
    pub fn duplicate_flags(&self) -> Vec<bool> {
        let mut seen = std::collections::HashSet::new();
        self.entries.iter().map(|e| !seen.insert(e.hint.to_single_line())).collect()
    }

    /// Index of the first entry with the same hint set, per entry.
    pub fn first_occurrence(&self) -> Vec<usize> {
        let mut first: HashMap<String, usize> = HashMap::new();
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| *first.entry(e.hint.to_single_line()).or_insert(i))
            .collect()
    }

    /// Copy without repeated hint sets, keeping first occurrences.
    pub fn dedup(&self) -> CandidateSet {
        let flags = self.duplicate_flags();
        CandidateSet {
            query: self.query.clone(),
            entries: self.entries.iter().zip(flags).filter(|(_, d)| !d).map(|(e, _)| e.clone()).collect(),
            report: self.report.clone(),
        }
    }

    /// Position of the default-plan candidate: a `Default` entry, else arm 0.
    pub fn default_index(&self) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.provenance == Provenance::Default)
            .or_else(|| self.entries.iter().position(|e| e.provenance == Provenance::Arm(0)))
    }
}

/// Hints of the planner's unhinted plan.
pub fn default_hints<C: DbmsClient + ?Sized>(sql: &str, client: &mut C) -> Result<HintSet, CandidateError> {
    let plan = client.explain(sql, None, None)?;
    Ok(transform_plan(&simplify(&plan)?))
}

/// Plans `sql` once per arm and turns each plan into hints. Arms the
/// planner rejects are skipped and listed in the report.
pub fn search_by_arms<C: DbmsClient + ?Sized>(sql: &str, arms: &[BaoArm], client: &mut C) -> Result<CandidateSet, CandidateError> {
    if arms.is_empty() {
        return Err(CandidateError::NoArms);
    }
    let mut set = CandidateSet { query: sql.to_owned(), entries: Vec::new(), report: GenerationReport::default() };
    for arm in arms {
        let hint = match client.explain(sql, Some(&arm.knobs), None) {
            Ok(plan) => simplify(&plan).map(|p| transform_plan(&p)).map_err(|e| e.to_string()),
            Err(DbmsError::Planner(msg)) => Err(msg),
            Err(e) => return Err(e.into()),
        };
        match hint {
            Ok(hint) => set.entries.push(CandidateEntry { hint, provenance: Provenance::Arm(arm.id) }),
            Err(msg) => {
                log::warn!("arm {} ({}) skipped: {msg}", arm.id, arm.knobs);
                set.report.skipped_arms.push((arm.id, msg));
            }
        }
    }
    if set.entries.is_empty() {
        return Err(CandidateError::AllArmsFailed);
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub samples: usize,
    pub temperature: f64,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy { samples: 16, temperature: 1.0, max_tokens: Some(512) }
    }
}

impl SamplingPolicy {
    pub fn greedy() -> Self {
        SamplingPolicy { samples: 1, temperature: 0.0, ..Self::default() }
    }
}

/// Parses one generation and checks it covers exactly the query's aliases.
pub fn validate_generation(output: &str, aliases: &BTreeSet<String>) -> Option<HintSet> {
    let h = parse_hints(output).ok()?.canonical().ok()?;
    let tables: BTreeSet<String> = h.tables().into_iter().map(str::to_owned).collect();
    if &tables != aliases || hints_to_plan(&h).is_err() {
        return None;
    }
    Some(h)
}

/// Samples `policy.samples` hint sets from the generative model. Invalid
/// outputs are replaced by `default_hint` with `Default` provenance.
pub fn generate_by_llm<B: GenerationBackend + ?Sized>(
    sql: &str,
    stats: &QueryStats,
    backend: &mut B,
    policy: &SamplingPolicy,
    default_hint: &HintSet,
) -> Result<CandidateSet, CandidateError> {
    if policy.samples == 0 {
        return Err(CandidateError::NoSamples);
    }
    let aliases: BTreeSet<String> = parse_select(sql)?.aliases().into_iter().map(str::to_owned).collect();
    let req = GenerationRequest {
        system: Some(GENERATIVE_SYSTEM.to_owned()),
        prompt: generative_prompt(sql, &render_stats(stats)),
        temperature: policy.temperature,
        n: policy.samples,
        max_tokens: policy.max_tokens,
    };
    let outputs = backend.generate(&req)?;
    let mut set = CandidateSet { query: sql.to_owned(), entries: Vec::new(), report: GenerationReport::default() };
    set.report.requested = outputs.len();
    for (i, out) in outputs.iter().enumerate() {
        match validate_generation(out, &aliases) {
            Some(hint) => set.entries.push(CandidateEntry { hint, provenance: Provenance::Sample(i) }),
            None => {
                set.report.invalid += 1;
                set.entries.push(CandidateEntry { hint: default_hint.clone(), provenance: Provenance::Default });
            }
        }
    }
    if set.entries.is_empty() {
        set.entries.push(CandidateEntry { hint: default_hint.clone(), provenance: Provenance::Default });
    }
    Ok(set)
}
