//! Seeded stand-in for the language model, so every command runs offline.

use planhint::backend::{BackendError, GenerationBackend, GenerationRequest};
use planhint::dataset_builder::SchemaWalkBackend;
use planhint::prompts::{prompt_query, EXTENSION_SYSTEM, GENERATIVE_SYSTEM, SELECTIVE_SYSTEM};
use planhint::schema::Schema;
use planhint::sql::parse_select;
use planhint::{render_hints, transform_plan, JoinType, ScanType, SimpleNode, SimplifiedPlan};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCANS: [ScanType; 4] = [ScanType::SeqScan, ScanType::IndexScan, ScanType::IndexOnlyScan, ScanType::BitmapScan];

/// Answers generative prompts with random valid hint sets (a share of them
/// deliberately malformed), selective prompts with a random index and
/// extension prompts by walking the schema.
pub struct MockModel {
    rng: ChaCha8Rng,
    invalid_rate: f64,
    schema: Option<Schema>,
}

impl MockModel {
    pub fn new(seed: u64, stream: u64, invalid_rate: f64, schema: Option<Schema>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        MockModel { rng, invalid_rate, schema }
    }

    fn random_tree(&mut self, aliases: &[String]) -> SimpleNode {
        if aliases.len() == 1 {
            return SimpleNode::scan(*SCANS.choose(&mut self.rng).expect("nonempty"), aliases[0].clone());
        }
        let cut = self.rng.gen_range(1..aliases.len());
        let join = *JoinType::ALL.choose(&mut self.rng).expect("nonempty");
        let left = self.random_tree(&aliases[..cut]);
        let right = self.random_tree(&aliases[cut..]);
        SimpleNode::join(join, left, right)
    }

    fn hints_for(&mut self, prompt: &str) -> Result<String, BackendError> {
        if self.rng.gen_bool(self.invalid_rate) {
            return Ok("Leading((".into());
        }
        let sql = prompt_query(prompt).ok_or_else(|| BackendError::Protocol("prompt has no query".into()))?;
        let q = parse_select(sql).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let mut aliases: Vec<String> = q.aliases().into_iter().map(str::to_owned).collect();
        aliases.shuffle(&mut self.rng);
        let plan = SimplifiedPlan::new(self.random_tree(&aliases)).map_err(|e| BackendError::Protocol(e.to_string()))?;
        Ok(render_hints(&transform_plan(&plan)))
    }
}

fn candidate_count(prompt: &str) -> usize {
    prompt
        .split_once("### Candidates\n")
        .map(|(_, rest)| {
            rest.lines()
                .take_while(|l| !l.starts_with("###"))
                .filter(|l| l.split_once(": ").is_some_and(|(i, _)| i.parse::<usize>().is_ok()))
                .count()
        })
        .unwrap_or(0)
}

impl GenerationBackend for MockModel {
    fn generate(&mut self, req: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        match req.system.as_deref() {
            Some(GENERATIVE_SYSTEM) => (0..req.n).map(|_| self.hints_for(&req.prompt)).collect(),
            Some(SELECTIVE_SYSTEM) => {
                let k = candidate_count(&req.prompt).max(1);
                Ok((0..req.n).map(|_| self.rng.gen_range(0..k).to_string()).collect())
            }
            Some(EXTENSION_SYSTEM) => {
                let schema = self
                    .schema
                    .clone()
                    .ok_or_else(|| BackendError::Protocol("the mock model needs a schema to extend queries".into()))?;
                SchemaWalkBackend { schema, choice: self.rng.gen_range(0..8) }.generate(req)
            }
            _ => Err(BackendError::Protocol("unrecognised prompt".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use planhint::prompts::{generative_prompt, selective_prompt};
    use planhint::{parse_hints, HintSet};

    #[test]
    fn generations_are_valid_and_seeded() {
        let sql = "SELECT count(*) FROM a, b, c WHERE a.id = b.id AND b.id = c.id";
        let req = GenerationRequest { system: Some(GENERATIVE_SYSTEM.into()), ..GenerationRequest::new(generative_prompt(sql, ""), 1.0, 8) };
        let a = MockModel::new(1, 0, 0.0, None).generate(&req).unwrap();
        let b = MockModel::new(1, 0, 0.0, None).generate(&req).unwrap();
        assert_eq!(a, b);
        for out in &a {
            let h = parse_hints(out).unwrap();
            assert_eq!(h.scan_hints.len(), 3);
        }
        let bad = MockModel::new(1, 0, 1.0, None).generate(&req).unwrap();
        assert!(bad.iter().all(|o| parse_hints(o).is_err()));
    }

    #[test]
    fn selection_stays_in_range() {
        let h: HintSet = parse_hints("SeqScan(a) Leading(a)").unwrap();
        let prompt = selective_prompt("SELECT * FROM a", "", &[h.clone(), h.clone(), h]);
        assert_eq!(candidate_count(&prompt), 3);
        let req = GenerationRequest { system: Some(SELECTIVE_SYSTEM.into()), ..GenerationRequest::new(prompt, 0.0, 20) };
        let out = MockModel::new(3, 1, 0.0, None).generate(&req).unwrap();
        assert!(out.iter().all(|o| o.parse::<usize>().unwrap() < 3));
    }
}
