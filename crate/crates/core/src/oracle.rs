//! Reference computations straight from the definitions, with no bitmask
//! tables or pruning. Slow; meant for cross-checking at small `k`.

use std::collections::BTreeSet;

use crate::assignment::MessageAssignment;

/// Every subset of `1..=k`, as sorted index sets.
fn all_subsets(k: usize) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::new()];
    for j in 1..=k {
        let with: Vec<BTreeSet<usize>> = out
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.insert(j);
                s
            })
            .collect();
        out.extend(with);
    }
    out
}

fn carried(sets: &[Vec<usize>], s: &BTreeSet<usize>) -> usize {
    sets.iter()
        .filter(|t| t.iter().any(|j| s.contains(j)))
        .count()
}

/// `min_S max(|C_S|, K - |S|)` by scanning every `S`.
pub fn bound_by_definition(a: &MessageAssignment) -> usize {
    bound_of_sets(a.k(), a.transmit_sets())
}

fn bound_of_sets(k: usize, sets: &[Vec<usize>]) -> usize {
    all_subsets(k)
        .iter()
        .map(|s| carried(sets, s).max(k - s.len()))
        .min()
        .expect("the empty set is always a candidate")
}

/// `min |C_S|` over `|S| = i`, for every `i`.
pub fn profile_by_definition(a: &MessageAssignment) -> Vec<usize> {
    let k = a.k();
    let mut e = vec![usize::MAX; k + 1];
    for s in all_subsets(k) {
        let c = carried(a.transmit_sets(), &s);
        e[s.len()] = e[s.len()].min(c);
    }
    e
}

/// `η_out(k, m)` by enumerating every assignment and every transmitter set.
pub fn eta_out_by_definition(k: usize, m: usize) -> usize {
    let choices: Vec<Vec<usize>> = all_subsets(k)
        .into_iter()
        .filter(|s| !s.is_empty() && s.len() <= m)
        .map(|s| s.into_iter().collect())
        .collect();
    let mut best = 0;
    let mut idx = vec![0usize; k];
    loop {
        let sets: Vec<Vec<usize>> = idx.iter().map(|&c| choices[c].clone()).collect();
        best = best.max(bound_of_sets(k, &sets));
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < choices.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
