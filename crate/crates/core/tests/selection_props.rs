mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planhint::candidate_search::{CandidateEntry, CandidateSet, GenerationReport, Provenance};
use planhint::hint_codec::{transform_plan, HintSet};
use planhint::label_harness::{argmin_completed, LabelMode, LabeledQuery};
use planhint::selector::{is_correct, select_by_cost, select_majority, select_oracle, selection_accuracy, SelectionOutcome, Strategy};
use planhint::ExecutionResult;

fn pool(seed: u64, size: usize) -> Vec<HintSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<HintSet> = Vec::new();
    while out.len() < size {
        let h = transform_plan(&common::random_plan(&mut rng, 3));
        if !out.contains(&h) {
            out.push(h);
        }
    }
    out
}

fn candidates(hints: Vec<HintSet>) -> CandidateSet {
    CandidateSet {
        query: "SELECT 1".into(),
        entries: hints
            .into_iter()
            .enumerate()
            .map(|(i, hint)| CandidateEntry { hint, provenance: Provenance::Sample(i) })
            .collect(),
        report: GenerationReport::default(),
    }
}

fn labeled(set: CandidateSet, results: Vec<ExecutionResult<f64>>) -> LabeledQuery<f64> {
    let optimal_index = argmin_completed(&results);
    LabeledQuery {
        schema_version: 1,
        query: set.query.clone(),
        optimal_hint: optimal_index.map(|i| set.entries[i].hint.clone()),
        timeouts_ms: vec![180_000.0; results.len()],
        shared_from: vec![None; results.len()],
        candidates: set,
        optimal_index,
        discarded: optimal_index.is_none(),
        mode: LabelMode::Evaluation,
        results,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn majority_matches_counting_oracle(picks in prop::collection::vec(0usize..4, 1..20), seed in 0u64..8) {
        let hints = pool(seed, 4);
        let set = candidates(picks.iter().map(|&i| hints[i].clone()).collect());
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &p in &picks {
            *counts.entry(p).or_default() += 1;
        }
        let top = *counts.values().max().unwrap();
        let want = picks.iter().position(|p| counts[p] == top).unwrap();
        let got = select_majority(&set).unwrap();
        prop_assert_eq!(got.chosen_index, want);
        prop_assert_eq!(got.strategy, Strategy::MajorityVote);
        prop_assert_eq!(&got.chosen_hint, &hints[picks[want]]);
    }

    #[test]
    fn cost_selection_is_first_argmin(costs in prop::collection::vec(prop_oneof![0.0f64..5.0, Just(f64::NAN), Just(1.0)], 1..12)) {
        let set = candidates(pool(1, costs.len()));
        let got = select_by_cost(&set, |i, _| Ok(costs[i])).unwrap();
        let finite: Vec<(usize, f64)> = costs.iter().copied().enumerate().filter(|(_, c)| !c.is_nan()).collect();
        if let Some(min) = finite.iter().map(|p| p.1).reduce(f64::min) {
            prop_assert_eq!(got.chosen_index, finite.iter().find(|p| p.1 == min).unwrap().0);
        } else {
            prop_assert_eq!(got.chosen_index, 0);
        }
    }

    #[test]
    fn oracle_is_always_correct(lat in prop::collection::vec((1u32..5, any::<bool>()), 1..8)) {
        let set = candidates(pool(2, lat.len()));
        let results: Vec<_> = lat
            .iter()
            .map(|&(l, t)| if t { ExecutionResult::timeout(l as f64) } else { ExecutionResult::completed(l as f64) })
            .collect();
        let q = labeled(set, results);
        match select_oracle(&q) {
            Ok(o) => prop_assert!(is_correct(&o, &q)),
            Err(_) => prop_assert!(lat.iter().all(|p| p.1)),
        }
    }
}

#[test]
fn random_selection_accuracy_tracks_optimal_share() {
    const QUERIES: usize = 20_000;
    const TOLERANCE_PP: f64 = 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hints = pool(3, 6);
    let mut labels = Vec::new();
    let mut outcomes = Vec::new();
    let mut expected = 0.0;
    for _ in 0..QUERIES {
        let k = rng.gen_range(2..=6);
        let results: Vec<ExecutionResult<f64>> = (0..k)
            .map(|_| {
                let l = [10.0, 20.0, 30.0][rng.gen_range(0..3)];
                if rng.gen_bool(0.1) { ExecutionResult::timeout(l) } else { ExecutionResult::completed(l) }
            })
            .collect();
        let best = results.iter().filter(|r| !r.timed_out).map(|r| r.latency_ms).reduce(f64::min);
        let hits = results.iter().filter(|r| !r.timed_out && Some(r.latency_ms) == best).count();
        expected += hits as f64 / k as f64;
        let set = candidates(hints[..k].to_vec());
        let i = rng.gen_range(0..k);
        outcomes.push(SelectionOutcome {
            chosen_index: i,
            chosen_hint: set.entries[i].hint.clone(),
            strategy: Strategy::CostEstimate,
            fallback_used: false,
        });
        labels.push(labeled(set, results));
    }
    let expected_pct = 100.0 * expected / QUERIES as f64;
    let got = selection_accuracy(&outcomes, &labels).unwrap();
    assert!((got - expected_pct).abs() < TOLERANCE_PP, "accuracy {got:.2} vs expected {expected_pct:.2}");
}
