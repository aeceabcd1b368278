//! Maximum-weight bipartite matching where every edge into a cluster pays
//! that cluster's weight.
//!
//! Because edge value depends only on the cluster side, the sets of
//! clusters that can be matched simultaneously form a transversal matroid,
//! and greedy selection by descending weight is optimal. Each candidate is
//! admitted only if an augmenting path exists for it; previously admitted
//! clusters stay matched along any augmentation.

/// `adjacency[c]` lists the answers cluster `c` may take. Returns the
/// matched weight and, per answer, the cluster it was assigned to.
pub fn max_weight_matching(
    adjacency: &[Vec<usize>],
    weights: &[u64],
    n_answers: usize,
) -> (u64, Vec<Option<usize>>) {
    assert_eq!(adjacency.len(), weights.len());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then(a.cmp(&b)));

    let mut owner: Vec<Option<usize>> = vec![None; n_answers];
    let mut total = 0;
    for c in order {
        if adjacency[c].is_empty() {
            continue;
        }
        let mut visited = vec![false; n_answers];
        if augment(c, adjacency, &mut owner, &mut visited) {
            total += weights[c];
        }
    }
    (total, owner)
}

fn augment(
    cluster: usize,
    adjacency: &[Vec<usize>],
    owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &a in &adjacency[cluster] {
        if visited[a] {
            continue;
        }
        visited[a] = true;
        let free = match owner[a] {
            None => true,
            Some(other) => augment(other, adjacency, owner, visited),
        };
        if free {
            owner[a] = Some(cluster);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefers_heavier_cluster_through_reassignment() {
        // answer 0 fits c0 (w1) and c1 (w5); answer 1 fits only c0
        let adjacency = vec![vec![0, 1], vec![0]];
        let (total, owner) = max_weight_matching(&adjacency, &[1, 5], 2);
        assert_eq!(total, 6);
        assert_eq!(owner, vec![Some(1), Some(0)]);
    }

    #[test]
    fn one_answer_one_cluster() {
        let adjacency = vec![vec![0], vec![0], vec![0]];
        let (total, _) = max_weight_matching(&adjacency, &[2, 7, 3], 1);
        assert_eq!(total, 7);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(max_weight_matching(&[], &[], 0).0, 0);
        assert_eq!(max_weight_matching(&[vec![]], &[4], 3).0, 0);
    }
}
