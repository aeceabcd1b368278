//! Cluster metrics against independent brute-force references.

use proptest::prelude::*;
use proto_harness_core::dataset::{Cluster, ClusterSet};
use proto_harness_core::scorer::{
    max_answers_weight, max_incorrect_weight, score_max_answers, score_max_incorrect, Matcher,
};

/// Best total weight over every injective partial assignment of the first
/// `k` answers to clusters they match.
fn brute_force_max_answers(matches: &[Vec<bool>], weights: &[u64], k: usize) -> u64 {
    fn go(i: usize, n: usize, matches: &[Vec<bool>], weights: &[u64], used: &mut Vec<bool>) -> u64 {
        if i == n {
            return 0;
        }
        let mut best = go(i + 1, n, matches, weights, used);
        for c in 0..weights.len() {
            if matches[i][c] && !used[c] {
                used[c] = true;
                best = best.max(weights[c] + go(i + 1, n, matches, weights, used));
                used[c] = false;
            }
        }
        best
    }
    let n = matches.len().min(k);
    go(0, n, matches, weights, &mut vec![false; weights.len()])
}

/// Step-by-step replay of the rank-order rule.
fn simulate_max_incorrect(matches: &[Vec<bool>], weights: &[u64], ids: &[String], k: usize) -> u64 {
    let mut claimed = vec![false; weights.len()];
    let mut wrong = 0;
    let mut score = 0;
    for row in matches {
        let mut pick: Option<usize> = None;
        for c in 0..weights.len() {
            if !row[c] || claimed[c] {
                continue;
            }
            pick = match pick {
                None => Some(c),
                Some(p) if weights[c] > weights[p] || (weights[c] == weights[p] && ids[c] < ids[p]) => Some(c),
                keep => keep,
            };
        }
        if let Some(c) = pick {
            claimed[c] = true;
            score += weights[c];
        } else {
            wrong += 1;
            if wrong == k {
                break;
            }
        }
    }
    score
}

#[derive(Debug, Clone)]
struct Instance {
    weights: Vec<u64>,
    matches: Vec<Vec<bool>>,
}

impl Instance {
    /// Answers are "a{i}"; cluster c holds every answer that matches it,
    /// plus a private string so no cluster is empty.
    fn build(&self) -> (Vec<String>, ClusterSet, Vec<String>) {
        let answers: Vec<String> = (0..self.matches.len()).map(|i| format!("a{i}")).collect();
        let ids: Vec<String> = (0..self.weights.len()).map(|c| format!("c{c}")).collect();
        let clusters = self
            .weights
            .iter()
            .enumerate()
            .map(|(c, &w)| {
                let mut strings: std::collections::BTreeSet<String> = self
                    .matches
                    .iter()
                    .enumerate()
                    .filter(|(_, row)| row[c])
                    .map(|(i, _)| answers[i].clone())
                    .collect();
                strings.insert(format!("only{c}"));
                Cluster {
                    id: ids[c].clone(),
                    weight: w,
                    answer_strings: strings,
                }
            })
            .collect();
        (answers, ClusterSet::new(clusters).unwrap(), ids)
    }
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=6, 0usize..=6).prop_flat_map(|(n_clusters, n_answers)| {
        (
            prop::collection::vec(1u64..=5, n_clusters),
            prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.35), n_clusters), n_answers),
        )
            .prop_map(|(weights, matches)| Instance { weights, matches })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn max_answers_equals_enumeration(inst in instance(), k in 1usize..=7) {
        let (answers, clusters, _) = inst.build();
        let m = Matcher::exact();
        prop_assert_eq!(
            max_answers_weight(&answers, &clusters, k, &m),
            brute_force_max_answers(&inst.matches, &inst.weights, k)
        );
    }

    #[test]
    fn max_incorrect_equals_simulation(inst in instance(), k in 1usize..=6) {
        let (answers, clusters, ids) = inst.build();
        let m = Matcher::exact();
        prop_assert_eq!(
            max_incorrect_weight(&answers, &clusters, k, &m),
            simulate_max_incorrect(&inst.matches, &inst.weights, &ids, k)
        );
    }

    #[test]
    fn range_and_monotone_in_k(inst in instance(), k in 1usize..=6) {
        let (answers, clusters, _) = inst.build();
        let m = Matcher::exact();
        for f in [score_max_answers, score_max_incorrect] {
            let lo = f(&answers, &clusters, k, &m);
            let hi = f(&answers, &clusters, k + 1, &m);
            prop_assert!((0.0..=1.0).contains(&lo));
            prop_assert!(lo <= hi);
        }
    }

    #[test]
    fn weight_scaling_invariant(inst in instance(), k in 1usize..=6, factor in 2u64..=7) {
        let (answers, clusters, _) = inst.build();
        let scaled = ClusterSet::new(
            clusters.clusters().iter().cloned().map(|mut c| { c.weight *= factor; c }).collect()
        ).unwrap();
        let m = Matcher::exact();
        prop_assert_eq!(
            score_max_answers(&answers, &clusters, k, &m),
            score_max_answers(&answers, &scaled, k, &m)
        );
        prop_assert_eq!(
            score_max_incorrect(&answers, &clusters, k, &m),
            score_max_incorrect(&answers, &scaled, k, &m)
        );
    }

    #[test]
    fn cluster_order_invariant(inst in instance(), k in 1usize..=6, seed in any::<u64>()) {
        use rand_like::shuffle;
        let (answers, clusters, _) = inst.build();
        let mut permuted = clusters.clusters().to_vec();
        shuffle(&mut permuted, seed);
        let permuted = ClusterSet::new(permuted).unwrap();
        let m = Matcher::exact();
        prop_assert_eq!(
            max_answers_weight(&answers, &clusters, k, &m),
            max_answers_weight(&answers, &permuted, k, &m)
        );
        prop_assert_eq!(
            max_incorrect_weight(&answers, &clusters, k, &m),
            max_incorrect_weight(&answers, &permuted, k, &m)
        );
    }

    #[test]
    fn appending_never_hurts_max_incorrect(inst in instance(), k in 1usize..=6, extra in 0usize..6) {
        let (answers, clusters, _) = inst.build();
        let mut longer = answers.clone();
        longer.extend((0..extra).map(|i| if i % 2 == 0 { format!("only{}", i % clusters.len()) } else { format!("miss{i}") }));
        let m = Matcher::exact();
        prop_assert!(
            max_incorrect_weight(&answers, &clusters, k, &m) <= max_incorrect_weight(&longer, &clusters, k, &m)
        );
    }
}

/// Tiny deterministic Fisher–Yates so the test needs no RNG crate.
mod rand_like {
    pub fn shuffle<T>(xs: &mut [T], mut seed: u64) {
        for i in (1..xs.len()).rev() {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let j = (seed % (i as u64 + 1)) as usize;
            xs.swap(i, j);
        }
    }
}

#[test]
fn perfect_cover_scores_one() {
    let inst = Instance {
        weights: vec![4, 1, 2],
        matches: vec![
            vec![false, true, false],
            vec![true, false, false],
            vec![false, false, true],
        ],
    };
    let (answers, clusters, _) = inst.build();
    assert_eq!(score_max_answers(&answers, &clusters, 3, &Matcher::exact()), 1.0);
}
