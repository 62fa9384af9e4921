//! Neighbourhood sizes, the expansion profile `e(i)`, and the bound
//! `B = min_S max(|C_S|, K - |S|)`.
//!
//! Transmitters form one side of a bipartite graph and messages the other;
//! transmitter `j` is adjacent to message `i` when `j ∈ T_i`. `C_S` is the
//! neighbourhood of a transmitter set `S`.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{trial_rng, MessageAssignment};
use crate::error::{Error, Result};

/// Default largest `k` for exhaustive subset enumeration.
pub const DEFAULT_EXACT_CAP: usize = 24;
/// Masks are `u32`, and two half tables of `2^15` entries are the most we build.
pub const MAX_EXACT_CAP: usize = 30;

const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionProfile {
    pub k: usize,
    /// `e[i]` for `i = 0..=k`.
    pub e: Vec<usize>,
    pub mode: ProfileMode,
    pub samples_per_size: Option<usize>,
}

impl ExpansionProfile {
    /// `max(K - i, e[i])`, the bound candidate at cardinality `i`.
    pub fn candidate(&self, i: usize) -> usize {
        (self.k - i).max(self.e[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    Exact,
    SampledUpper,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: usize,
    #[serde(rename = "witness")]
    pub witness_set: Vec<usize>,
    pub i_min: usize,
    pub mode: BoundMode,
}

fn check_indices(k: usize, set: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = set.iter().find(|&&j| j == 0 || j > k) {
        return Err(Error::IndexOutOfRange { index: bad, k });
    }
    let mut out = set.to_vec();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `C_S`: the 1-based messages with at least one transmitter in `s`.
pub fn carried_messages(a: &MessageAssignment, s: &[usize]) -> Result<Vec<usize>> {
    let s = check_indices(a.k(), s)?;
    Ok(a.transmit_sets()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.iter().any(|j| s.binary_search(j).is_ok()))
        .map(|(pos, _)| pos + 1)
        .collect())
}

fn check_cap(k: usize, cap: usize) -> Result<()> {
    let cap = cap.min(MAX_EXACT_CAP);
    if k > cap {
        return Err(Error::BudgetExceeded {
            what: "exact enumeration",
            k,
            cap,
            advice: "use sampled mode",
        });
    }
    Ok(())
}

/// Neighbourhood masks split into low and high halves so that
/// `N(S) = lo[S & low_mask] | hi[S >> lo_bits]`.
pub(crate) struct NeighbourTables {
    k: usize,
    lo_bits: usize,
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl NeighbourTables {
    pub(crate) fn new(a: &MessageAssignment) -> Self {
        let k = a.k();
        let mut tx = vec![0u32; k];
        for (pos, set) in a.transmit_sets().iter().enumerate() {
            for &j in set {
                tx[j - 1] |= 1 << pos;
            }
        }
        let lo_bits = k / 2;
        NeighbourTables {
            k,
            lo_bits,
            lo: or_table(&tx[..lo_bits]),
            hi: or_table(&tx[lo_bits..]),
        }
    }

    #[inline]
    pub(crate) fn neighbours(&self, mask: u32) -> u32 {
        let low = mask & ((1u32 << self.lo_bits) - 1);
        self.lo[low as usize] | self.hi[(mask >> self.lo_bits) as usize]
    }

    /// Minimum neighbourhood size per cardinality over all `2^k` masks.
    pub(crate) fn profile(&self) -> Vec<usize> {
        let k = self.k;
        let lo_bits = self.lo_bits;
        let mins = self
            .hi
            .par_iter()
            .enumerate()
            .fold(
                || vec![u32::MAX; k + 1],
                |mut mins, (h, &hn)| {
                    let hc = (h as u32).count_ones() as usize;
                    for (l, &ln) in self.lo.iter().enumerate() {
                        let card = hc + (l as u32).count_ones() as usize;
                        let c = (hn | ln).count_ones();
                        if c < mins[card] {
                            mins[card] = c;
                        }
                    }
                    mins
                },
            )
            .reduce(
                || vec![u32::MAX; k + 1],
                |a, b| a.iter().zip(&b).map(|(x, y)| *x.min(y)).collect(),
            );
        debug_assert_eq!(self.lo.len() << (k - lo_bits), 1 << k);
        mins.into_iter().map(|c| c as usize).collect()
    }

    /// Lexicographically smallest `size`-subset (as sorted 1-based indices)
    /// whose neighbourhood has at most `limit` messages.
    pub(crate) fn first_subset_within(&self, size: usize, limit: usize) -> Option<Vec<usize>> {
        let k = self.k;
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let mask = combo.iter().fold(0u32, |m, &j| m | 1 << j);
            if self.neighbours(mask).count_ones() as usize <= limit {
                return Some(combo.iter().map(|j| j + 1).collect());
            }
            // advance to the next combination in lexicographic order
            let mut pos = size;
            loop {
                if pos == 0 {
                    return None;
                }
                pos -= 1;
                if combo[pos] < k - size + pos {
                    break;
                }
            }
            combo[pos] += 1;
            for q in pos + 1..size {
                combo[q] = combo[q - 1] + 1;
            }
        }
    }
}

fn or_table(tx: &[u32]) -> Vec<u32> {
    let mut table = vec![0u32; 1 << tx.len()];
    for mask in 1..table.len() {
        let low = mask.trailing_zeros() as usize;
        table[mask] = table[mask & (mask - 1)] | tx[low];
    }
    table
}

pub fn exact_profile(a: &MessageAssignment) -> Result<ExpansionProfile> {
    exact_profile_with_cap(a, DEFAULT_EXACT_CAP)
}

pub fn exact_profile_with_cap(a: &MessageAssignment, cap: usize) -> Result<ExpansionProfile> {
    check_cap(a.k(), cap)?;
    Ok(ExpansionProfile {
        k: a.k(),
        e: NeighbourTables::new(a).profile(),
        mode: ProfileMode::Exact,
        samples_per_size: None,
    })
}

/// Upper estimate of the profile from `samples_per_size` uniform subsets of
/// each cardinality. A sampled set of size `j` with `c` neighbours also
/// bounds `e(i)` for every `i <= j`, so the result is suffix-minimised and
/// stays non-decreasing.
pub fn sampled_profile(
    a: &MessageAssignment,
    samples_per_size: usize,
    seed: u64,
) -> Result<ExpansionProfile> {
    if samples_per_size == 0 {
        return Err(Error::Precondition(
            "samples_per_size must be positive".into(),
        ));
    }
    let k = a.k();
    let carried = a.carried_by_transmitter();
    let mut rng = trial_rng(seed, 0);
    let mut e = vec![0usize; k + 1];
    let mut stamp = vec![usize::MAX; k];
    let mut round = 0usize;
    for (size, slot) in e.iter_mut().enumerate().skip(1) {
        let draws = if size == k { 1 } else { samples_per_size };
        let mut best = usize::MAX;
        for _ in 0..draws {
            let mut count = 0;
            for t in index::sample(&mut rng, k, size) {
                for &msg in &carried[t] {
                    if stamp[msg - 1] != round {
                        stamp[msg - 1] = round;
                        count += 1;
                    }
                }
            }
            round += 1;
            best = best.min(count);
        }
        *slot = best;
    }
    for i in (0..k).rev() {
        e[i] = e[i].min(e[i + 1]);
    }
    Ok(ExpansionProfile {
        k,
        e,
        mode: ProfileMode::Sampled,
        samples_per_size: Some(samples_per_size),
    })
}

pub fn expansion_profile(
    a: &MessageAssignment,
    mode: ProfileMode,
    samples_per_size: usize,
    seed: u64,
) -> Result<ExpansionProfile> {
    match mode {
        ProfileMode::Exact => exact_profile(a),
        ProfileMode::Sampled => sampled_profile(a, samples_per_size, seed),
    }
}

/// Smallest `i` minimising `max(K - i, e[i])`, with the minimum.
pub fn i_min_of_profile(profile: &ExpansionProfile) -> Result<(usize, usize)> {
    let k = profile.k;
    if profile.e.len() != k + 1 {
        return Err(Error::MalformedProfile(format!(
            "expected {} entries, found {}",
            k + 1,
            profile.e.len()
        )));
    }
    if profile.e[0] != 0 {
        return Err(Error::MalformedProfile("e[0] must be 0".into()));
    }
    if let Some(i) = (1..=k).find(|&i| profile.e[i] < profile.e[i - 1]) {
        return Err(Error::MalformedProfile(format!(
            "e decreases at i = {i} ({} < {})",
            profile.e[i],
            profile.e[i - 1]
        )));
    }
    if let Some(i) = (0..=k).find(|&i| profile.e[i] > k) {
        return Err(Error::MalformedProfile(format!("e[{i}] exceeds k")));
    }
    let (value, i) = (0..=k)
        .map(|i| (profile.candidate(i), i))
        .min()
        .expect("profile has at least one entry");
    Ok((i, value))
}

pub fn dof_upper_bound(a: &MessageAssignment) -> Result<BoundResult> {
    dof_upper_bound_with_cap(a, DEFAULT_EXACT_CAP)
}

/// Exact `B` with a witness set. Ties go to the smallest `|S|`, then the
/// lexicographically smallest `S`.
pub fn dof_upper_bound_with_cap(a: &MessageAssignment, cap: usize) -> Result<BoundResult> {
    check_cap(a.k(), cap)?;
    let tables = NeighbourTables::new(a);
    let profile = ExpansionProfile {
        k: a.k(),
        e: tables.profile(),
        mode: ProfileMode::Exact,
        samples_per_size: None,
    };
    let (i_min, value) = i_min_of_profile(&profile)?;
    let witness_set = tables
        .first_subset_within(i_min, value)
        .expect("a subset attaining e(i_min) exists");
    Ok(BoundResult {
        value,
        witness_set,
        i_min,
        mode: BoundMode::Exact,
    })
}

/// Bound value only; skips the witness search.
pub(crate) fn bound_value(tables: &NeighbourTables, k: usize) -> usize {
    tables
        .profile()
        .iter()
        .enumerate()
        .map(|(i, &e)| (k - i).max(e))
        .min()
        .expect("k + 1 entries")
}

/// Checks, over `trials` draws of i.i.d. Gaussian channel matrices, that the
/// rows of receivers `a` restricted to the columns of transmitters outside
/// `s` always have full column rank, so those transmit signals can be
/// recovered from the received signals once `X_S` is known.
pub fn reconstruction_check(
    k: usize,
    s: &[usize],
    a: &[usize],
    trials: usize,
    seed: u64,
) -> Result<bool> {
    let s = check_indices(k, s)?;
    let a = check_indices(k, a)?;
    let unknowns = k - s.len();
    if a.len() < unknowns {
        return Err(Error::Underdetermined {
            equations: a.len(),
            unknowns,
        });
    }
    let outside: Vec<usize> = (1..=k).filter(|j| s.binary_search(j).is_err()).collect();
    let mut rng = trial_rng(seed, 0);
    for _ in 0..trials {
        let channel: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let sub: Vec<Vec<f64>> = a
            .iter()
            .map(|&r| outside.iter().map(|&c| channel[r - 1][c - 1]).collect())
            .collect();
        if column_rank(sub, unknowns) < unknowns {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rank by Gaussian elimination with scaled partial pivoting; pivots below
/// `RANK_TOLERANCE` times the largest entry count as zero.
fn column_rank(mut rows: Vec<Vec<f64>>, cols: usize) -> usize {
    let largest = rows.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if largest == 0.0 {
        return 0;
    }
    let threshold = RANK_TOLERANCE * largest;
    let scale: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..order.len())
            .filter(|&p| scale[order[p]] > 0.0)
            .max_by(|&p, &q| {
                let vp = rows[order[p]][col].abs() / scale[order[p]];
                let vq = rows[order[q]][col].abs() / scale[order[q]];
                vp.total_cmp(&vq)
            });
        let Some(p) = pivot else { break };
        if rows[order[p]][col].abs() <= threshold {
            continue;
        }
        order.swap(rank, p);
        let prow = rows[order[rank]].clone();
        for &r in &order[rank + 1..] {
            let factor = rows[r][col] / prow[col];
            for c in col..cols {
                rows[r][c] -= factor * prow[c];
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{generate, GeneratorSpec};

    fn assignment(k: usize, m: usize, sets: &[&[usize]]) -> MessageAssignment {
        MessageAssignment::new(k, m, sets.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    fn cyclic3() -> MessageAssignment {
        assignment(3, 2, &[&[1, 2], &[2, 3], &[3, 1]])
    }

    #[test]
    fn carried_examples() {
        let id = generate(&GeneratorSpec::identity(4), 0).unwrap();
        assert!(carried_messages(&id, &[]).unwrap().is_empty());
        let full = generate(&GeneratorSpec::full(4), 0).unwrap();
        assert_eq!(carried_messages(&full, &[1]).unwrap(), vec![1, 2, 3, 4]);
        let fig = assignment(5, 2, &[&[1], &[1, 2], &[2, 3], &[3, 4], &[4, 5]]);
        assert_eq!(carried_messages(&fig, &[1, 2]).unwrap(), vec![1, 2, 3]);
        assert!(matches!(
            carried_messages(&fig, &[6]),
            Err(Error::IndexOutOfRange { index: 6, k: 5 })
        ));
    }

    #[test]
    fn profile_examples() {
        let id = generate(&GeneratorSpec::identity(4), 0).unwrap();
        assert_eq!(exact_profile(&id).unwrap().e, vec![0, 1, 2, 3, 4]);
        assert_eq!(exact_profile(&cyclic3()).unwrap().e, vec![0, 2, 3, 3]);
        let sampled = sampled_profile(&id, 3, 11).unwrap();
        assert_eq!(sampled.e, vec![0, 1, 2, 3, 4]);
        assert_eq!(sampled.mode, ProfileMode::Sampled);
    }

    #[test]
    fn exact_cap_is_enforced() {
        let id = generate(&GeneratorSpec::identity(25), 0).unwrap();
        assert!(matches!(
            exact_profile(&id),
            Err(Error::BudgetExceeded { cap: 24, .. })
        ));
        assert!(dof_upper_bound(&id).is_err());
        assert!(sampled_profile(&id, 4, 0).is_ok());
    }

    #[test]
    fn bound_examples() {
        let id = generate(&GeneratorSpec::identity(4), 0).unwrap();
        let b = dof_upper_bound(&id).unwrap();
        assert_eq!((b.value, b.i_min), (2, 2));
        assert_eq!(b.witness_set, vec![1, 2]);

        let b = dof_upper_bound(&cyclic3()).unwrap();
        assert_eq!(b.value, 2);
        assert_eq!(b.witness_set, vec![1]);

        let single = assignment(4, 1, &[&[1], &[1], &[1], &[1]]);
        let b = dof_upper_bound(&single).unwrap();
        assert_eq!(b.value, 1);
        assert_eq!(b.witness_set, vec![2, 3, 4]);
    }

    #[test]
    fn single_user() {
        let a = assignment(1, 1, &[&[1]]);
        let b = dof_upper_bound(&a).unwrap();
        assert_eq!((b.value, b.i_min), (1, 0));
        assert!(b.witness_set.is_empty());
    }

    #[test]
    fn i_min_examples() {
        let id = generate(&GeneratorSpec::identity(4), 0).unwrap();
        assert_eq!(
            i_min_of_profile(&exact_profile(&id).unwrap()).unwrap(),
            (2, 2)
        );
        let p = ExpansionProfile {
            k: 3,
            e: vec![0, 2, 3, 3],
            mode: ProfileMode::Exact,
            samples_per_size: None,
        };
        assert_eq!(i_min_of_profile(&p).unwrap(), (1, 2));
        let zero = ExpansionProfile {
            e: vec![0; 4],
            ..p.clone()
        };
        assert_eq!(i_min_of_profile(&zero).unwrap(), (3, 0));
        let bad = ExpansionProfile {
            e: vec![0, 2, 1, 3],
            ..p
        };
        assert!(matches!(
            i_min_of_profile(&bad),
            Err(Error::MalformedProfile(_))
        ));
    }

    #[test]
    fn reconstruction_examples() {
        assert!(reconstruction_check(5, &[1, 2], &[1, 2, 3], 100, 0).unwrap());
        assert!(reconstruction_check(4, &[], &[1, 2, 3, 4], 100, 1).unwrap());
        assert!(matches!(
            reconstruction_check(5, &[1, 2], &[1, 2], 10, 0),
            Err(Error::Underdetermined {
                equations: 2,
                unknowns: 3
            })
        ));
        // nothing to recover when every transmitter is known
        assert!(reconstruction_check(3, &[1, 2, 3], &[], 5, 0).unwrap());
    }

    #[test]
    fn rank_detects_dependence() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert_eq!(column_rank(rows, 2), 1);
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1e-3]];
        assert_eq!(column_rank(rows, 2), 2);
    }

    #[test]
    fn lexicographic_witness_order() {
        let id = generate(&GeneratorSpec::identity(5), 0).unwrap();
        let tables = NeighbourTables::new(&id);
        assert_eq!(tables.first_subset_within(2, 2), Some(vec![1, 2]));
        assert_eq!(tables.first_subset_within(3, 2), None);
        assert_eq!(tables.first_subset_within(0, 0), Some(vec![]));
    }
}
