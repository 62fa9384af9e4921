//! Message assignments: which transmitters know which message.
//!
//! Indices are 1-based throughout the public API. Message `i` is the
//! message intended for receiver `i`; its transmit set `T_i` lists the
//! transmitters that know it.

use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `k` accepted by [`canonical_form`] unless the caller raises it.
pub const DEFAULT_CANONICAL_CAP: usize = 6;

/// Raw assignment document as it appears on the wire. May violate any
/// invariant; run [`validate`] or convert into [`MessageAssignment`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub k: usize,
    pub m: usize,
    pub transmit_sets: Vec<Vec<usize>>,
}

/// A validated message assignment with sorted, duplicate-free transmit sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "AssignmentDoc", into = "AssignmentDoc")]
pub struct MessageAssignment {
    k: usize,
    m: usize,
    transmit_sets: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ZeroUsers,
    ZeroCooperation,
    CooperationExceedsUsers,
    WrongSetCount,
    EmptySet,
    Oversize,
    OutOfRange,
    Duplicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// 1-based message index, when the finding concerns one transmit set.
    pub index: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return write!(f, "valid");
        }
        let parts: Vec<&str> = self.violations.iter().map(|v| v.detail.as_str()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every invariant of a message assignment and reports all
/// violations found. Transmit sets do not need to be sorted.
pub fn validate(doc: &AssignmentDoc) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |index: Option<usize>, rule: Rule, detail: String| {
        violations.push(Violation {
            index,
            rule,
            detail,
        })
    };
    if doc.k == 0 {
        push(None, Rule::ZeroUsers, "k must be at least 1".into());
    }
    if doc.m == 0 {
        push(None, Rule::ZeroCooperation, "m must be at least 1".into());
    }
    if doc.m > doc.k {
        push(
            None,
            Rule::CooperationExceedsUsers,
            format!("m = {} exceeds k = {}", doc.m, doc.k),
        );
    }
    if doc.transmit_sets.len() != doc.k {
        push(
            None,
            Rule::WrongSetCount,
            format!(
                "expected {} transmit sets, found {}",
                doc.k,
                doc.transmit_sets.len()
            ),
        );
    }
    for (pos, set) in doc.transmit_sets.iter().enumerate() {
        let i = pos + 1;
        if set.is_empty() {
            push(Some(i), Rule::EmptySet, format!("T_{i} is empty"));
        }
        if set.len() > doc.m {
            push(
                Some(i),
                Rule::Oversize,
                format!("|T_{i}| = {} > m = {}", set.len(), doc.m),
            );
        }
        for &j in set {
            if j == 0 || j > doc.k {
                push(
                    Some(i),
                    Rule::OutOfRange,
                    format!("T_{i} contains {j}, outside 1..={}", doc.k),
                );
            }
        }
        let mut sorted = set.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            push(
                Some(i),
                Rule::Duplicate,
                format!("T_{i} has repeated entries"),
            );
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        violations,
    }
}

impl TryFrom<AssignmentDoc> for MessageAssignment {
    type Error = Error;

    fn try_from(doc: AssignmentDoc) -> Result<Self> {
        let report = validate(&doc);
        if !report.valid {
            return Err(Error::Invalid(report));
        }
        let transmit_sets = doc
            .transmit_sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s
            })
            .collect();
        Ok(MessageAssignment {
            k: doc.k,
            m: doc.m,
            transmit_sets,
        })
    }
}

impl From<MessageAssignment> for AssignmentDoc {
    fn from(a: MessageAssignment) -> Self {
        AssignmentDoc {
            k: a.k,
            m: a.m,
            transmit_sets: a.transmit_sets,
        }
    }
}

impl MessageAssignment {
    pub fn new(k: usize, m: usize, transmit_sets: Vec<Vec<usize>>) -> Result<Self> {
        AssignmentDoc {
            k,
            m,
            transmit_sets,
        }
        .try_into()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn transmit_sets(&self) -> &[Vec<usize>] {
        &self.transmit_sets
    }

    /// `T_i` for a 1-based message index.
    pub fn transmit_set(&self, i: usize) -> &[usize] {
        &self.transmit_sets[i - 1]
    }

    /// For each transmitter (0-based position), the 1-based messages it carries.
    pub fn carried_by_transmitter(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (pos, set) in self.transmit_sets.iter().enumerate() {
            for &j in set {
                out[j - 1].push(pos + 1);
            }
        }
        out
    }

    /// True when every message is known at its own transmitter.
    pub fn is_self_inclusive(&self) -> bool {
        self.transmit_sets
            .iter()
            .enumerate()
            .all(|(pos, set)| set.binary_search(&(pos + 1)).is_ok())
    }

    /// Total number of (message, transmitter) incidences.
    pub fn edge_count(&self) -> usize {
        self.transmit_sets.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GeneratorKind {
    Identity,
    Full,
    Successive,
    LocalRandom,
    UniformRandom,
    MatchingUnion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub k: usize,
    pub m: usize,
    /// Window radius, used by `local_random` only.
    pub radius: usize,
    /// Wrap indices modulo `k`, used by `successive` only.
    pub wraparound: bool,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, k: usize, m: usize) -> Self {
        GeneratorSpec {
            kind,
            k,
            m,
            radius: 0,
            wraparound: false,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::new(GeneratorKind::Identity, k, 1)
    }

    pub fn full(k: usize) -> Self {
        Self::new(GeneratorKind::Full, k, k)
    }

    pub fn successive(k: usize, m: usize, wraparound: bool) -> Self {
        GeneratorSpec {
            wraparound,
            ..Self::new(GeneratorKind::Successive, k, m)
        }
    }

    pub fn local_random(k: usize, m: usize, radius: usize) -> Self {
        GeneratorSpec {
            radius,
            ..Self::new(GeneratorKind::LocalRandom, k, m)
        }
    }

    pub fn uniform_random(k: usize, m: usize) -> Self {
        Self::new(GeneratorKind::UniformRandom, k, m)
    }

    pub fn matching_union(k: usize, m: usize) -> Self {
        Self::new(GeneratorKind::MatchingUnion, k, m)
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::Precondition("k and m must be at least 1".into()));
        }
        if self.kind != GeneratorKind::Full && self.m > self.k {
            return Err(Error::Precondition(format!(
                "m = {} exceeds k = {}",
                self.m, self.k
            )));
        }
        if self.radius != 0 && self.kind != GeneratorKind::LocalRandom {
            return Err(Error::Precondition(
                "radius only applies to local_random".into(),
            ));
        }
        if self.wraparound && self.kind != GeneratorKind::Successive {
            return Err(Error::Precondition(
                "wraparound only applies to successive".into(),
            ));
        }
        Ok(())
    }
}

/// The random stream used for trial `stream` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates an assignment; a deterministic function of `(spec, seed)`.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<MessageAssignment> {
    generate_trial(spec, seed, 0)
}

/// Generates the assignment for trial `trial` of a seeded run. Each trial
/// draws from its own stream, so it can be reproduced in isolation.
pub fn generate_trial(spec: &GeneratorSpec, seed: u64, trial: u64) -> Result<MessageAssignment> {
    spec.check()?;
    let k = spec.k;
    let m = spec.m;
    let mut rng = trial_rng(seed, trial);
    let (m_out, sets) = match spec.kind {
        GeneratorKind::Identity => (m, (1..=k).map(|i| vec![i]).collect()),
        GeneratorKind::Full => (k, vec![(1..=k).collect(); k]),
        GeneratorKind::Successive => {
            let sets = (1..=k)
                .map(|i| {
                    let mut set: Vec<usize> = (i..i + m)
                        .filter_map(|j| {
                            if j <= k {
                                Some(j)
                            } else if spec.wraparound {
                                Some((j - 1) % k + 1)
                            } else {
                                None
                            }
                        })
                        .collect();
                    set.sort_unstable();
                    set.dedup();
                    set
                })
                .collect();
            (m, sets)
        }
        GeneratorKind::LocalRandom => {
            let mut sets = Vec::with_capacity(k);
            for i in 1..=k {
                let lo = i.saturating_sub(spec.radius).max(1);
                let hi = (i + spec.radius).min(k);
                if lo > hi {
                    return Err(Error::InfeasibleSpec {
                        index: i,
                        detail: "window is empty".into(),
                    });
                }
                let window: Vec<usize> = (lo..=hi).collect();
                sets.push(random_subset(&window, m, &mut rng, i)?);
            }
            (m, sets)
        }
        GeneratorKind::UniformRandom => {
            let all: Vec<usize> = (1..=k).collect();
            let sets = (1..=k)
                .map(|i| random_subset(&all, m, &mut rng, i))
                .collect::<Result<_>>()?;
            (m, sets)
        }
        GeneratorKind::MatchingUnion => {
            let matchings = random_matchings(k, m, &mut rng);
            (m, union_of_matchings(k, &matchings))
        }
    };
    MessageAssignment::new(k, m_out, sets)
}

/// `m` independent uniform perfect matchings; `matchings[j][i]` is the
/// 1-based transmitter matched to message `i + 1` in matching `j`.
pub fn random_matchings<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..m)
        .map(|_| {
            let mut perm: Vec<usize> = (1..=k).collect();
            perm.shuffle(rng);
            perm
        })
        .collect()
}

/// Transmit sets of the union of matchings, parallel edges collapsed.
pub fn union_of_matchings(k: usize, matchings: &[Vec<usize>]) -> Vec<Vec<usize>> {
    (0..k)
        .map(|i| {
            let mut set: Vec<usize> = matchings.iter().map(|p| p[i]).collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect()
}

fn binomial(n: usize, r: usize) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for t in 0..r {
        acc = acc.checked_mul((n - t) as u128)? / (t as u128 + 1);
    }
    Some(acc)
}

/// Uniform draw among the nonempty subsets of `pool` with at most `m` elements.
fn random_subset<R: Rng + ?Sized>(
    pool: &[usize],
    m: usize,
    rng: &mut R,
    index: usize,
) -> Result<Vec<usize>> {
    let overflow = || Error::InfeasibleSpec {
        index,
        detail: "subset count overflows 128 bits".into(),
    };
    let max_size = m.min(pool.len());
    let mut weights = Vec::with_capacity(max_size);
    let mut total: u128 = 0;
    for size in 1..=max_size {
        let w = binomial(pool.len(), size).ok_or_else(overflow)?;
        total = total.checked_add(w).ok_or_else(overflow)?;
        weights.push(w);
    }
    let mut draw = rng.random_range(0..total);
    let mut size = 1;
    for (s, w) in weights.iter().enumerate() {
        if draw < *w {
            size = s + 1;
            break;
        }
        draw -= w;
    }
    let mut set: Vec<usize> = index::sample(rng, pool.len(), size)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    set.sort_unstable();
    Ok(set)
}

/// Lexicographically smallest adjacency matrix over independent relabelings
/// of messages and transmitters, returned as an assignment. Rows are
/// messages; column 1 is the most significant bit of a row.
pub fn canonical_form(a: &MessageAssignment) -> Result<MessageAssignment> {
    canonical_form_with_cap(a, DEFAULT_CANONICAL_CAP)
}

pub fn canonical_form_with_cap(a: &MessageAssignment, cap: usize) -> Result<MessageAssignment> {
    let k = a.k;
    if k > cap || k > 16 {
        return Err(Error::BudgetExceeded {
            what: "canonical form",
            k,
            cap: cap.min(16),
            advice: "run without isomorphism dedup",
        });
    }
    let rows = canonical_rows(a);
    let sets = rows
        .iter()
        .map(|&row| {
            (0..k)
                .filter(|c| row >> (k - 1 - c) & 1 == 1)
                .map(|c| c + 1)
                .collect()
        })
        .collect();
    MessageAssignment::new(k, a.m, sets)
}

/// Canonical matrix rows; the key used for isomorphism dedup.
pub(crate) fn canonical_rows(a: &MessageAssignment) -> Vec<u16> {
    let k = a.k;
    let mut best: Option<Vec<u16>> = None;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut rows = vec![0u16; k];
    permute(&mut perm, 0, &mut |perm| {
        // perm[t] is the column assigned to transmitter t + 1
        for (row, set) in rows.iter_mut().zip(&a.transmit_sets) {
            *row = set
                .iter()
                .fold(0u16, |acc, &t| acc | 1 << (k - 1 - perm[t - 1]));
        }
        rows.sort_unstable();
        if best.as_ref().is_none_or(|b| rows < *b) {
            best = Some(rows.clone());
        }
    });
    best.unwrap_or_default()
}

fn permute(perm: &mut [usize], pos: usize, visit: &mut impl FnMut(&[usize])) {
    if pos == perm.len() {
        visit(perm);
        return;
    }
    for i in pos..perm.len() {
        perm.swap(pos, i);
        permute(perm, pos + 1, visit);
        perm.swap(pos, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(k: usize, m: usize, sets: Vec<Vec<usize>>) -> AssignmentDoc {
        AssignmentDoc {
            k,
            m,
            transmit_sets: sets,
        }
    }

    #[test]
    fn identity_is_valid() {
        let r = validate(&doc(3, 1, vec![vec![1], vec![2], vec![3]]));
        assert!(r.valid);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn oversize_set_is_reported() {
        let r = validate(&doc(3, 1, vec![vec![1, 2], vec![2], vec![3]]));
        assert!(!r.valid);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].rule, Rule::Oversize);
        assert_eq!(r.violations[0].index, Some(1));
    }

    #[test]
    fn empty_set_is_reported() {
        let r = validate(&doc(3, 2, vec![vec![1, 2], vec![2, 3], vec![]]));
        assert!(!r.valid);
        assert_eq!(r.violations[0].rule, Rule::EmptySet);
        assert_eq!(r.violations[0].index, Some(3));
    }

    #[test]
    fn collects_every_violation() {
        let r = validate(&doc(2, 3, vec![vec![0, 5, 5], vec![], vec![1]]));
        let rules: Vec<Rule> = r.violations.iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::CooperationExceedsUsers));
        assert!(rules.contains(&Rule::WrongSetCount));
        assert!(rules.contains(&Rule::OutOfRange));
        assert!(rules.contains(&Rule::Duplicate));
        assert!(rules.contains(&Rule::EmptySet));
    }

    #[test]
    fn successive_clips_at_boundary() {
        let a = generate(&GeneratorSpec::successive(5, 2, false), 99).unwrap();
        assert_eq!(
            a.transmit_sets(),
            &[vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5], vec![5]]
        );
    }

    #[test]
    fn successive_wraps() {
        let a = generate(&GeneratorSpec::successive(4, 3, true), 0).unwrap();
        assert_eq!(a.transmit_set(4), &[1, 2, 4]);
        assert_eq!(a.transmit_set(3), &[1, 3, 4]);
    }

    #[test]
    fn identity_and_full() {
        let a = generate(&GeneratorSpec::identity(4), 0).unwrap();
        assert_eq!(a.transmit_sets(), &[vec![1], vec![2], vec![3], vec![4]]);
        let f = generate(&GeneratorSpec::full(3), 0).unwrap();
        assert_eq!(f.m(), 3);
        assert!(f.transmit_sets().iter().all(|s| s == &[1, 2, 3]));
    }

    #[test]
    fn matching_union_matches_regenerated_matchings() {
        let spec = GeneratorSpec::matching_union(4, 2);
        let a = generate(&spec, 17).unwrap();
        let mut rng = trial_rng(17, 0);
        let matchings = random_matchings(4, 2, &mut rng);
        let mut load = [0usize; 4];
        for p in &matchings {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![1, 2, 3, 4]);
            for &t in p {
                load[t - 1] += 1;
            }
        }
        assert!(load.iter().all(|&l| l == 2));
        for i in 1..=4 {
            let mut expect: Vec<usize> = matchings.iter().map(|p| p[i - 1]).collect();
            expect.sort_unstable();
            expect.dedup();
            assert_eq!(a.transmit_set(i), expect.as_slice());
            assert!(a.transmit_set(i).len() <= 2);
        }
    }

    #[test]
    fn local_random_stays_in_window() {
        let spec = GeneratorSpec::local_random(12, 3, 2);
        for seed in 0..20 {
            let a = generate(&spec, seed).unwrap();
            for i in 1..=12 {
                for &t in a.transmit_set(i) {
                    assert!(t + 2 >= i && t <= i + 2, "T_{i} = {:?}", a.transmit_set(i));
                }
            }
        }
    }

    #[test]
    fn misplaced_parameters_are_rejected() {
        let mut spec = GeneratorSpec::uniform_random(4, 2);
        spec.radius = 1;
        assert!(generate(&spec, 0).is_err());
        let mut spec = GeneratorSpec::identity(4);
        spec.wraparound = true;
        assert!(generate(&spec, 0).is_err());
        assert!(generate(&GeneratorSpec::uniform_random(3, 4), 0).is_err());
    }

    #[test]
    fn random_subset_sizes_are_weighted_by_count() {
        // pool of 4, m = 2: 4 singletons and 6 pairs
        let pool = [1, 2, 3, 4];
        let mut rng = trial_rng(5, 0);
        let trials = 20_000;
        let pairs = (0..trials)
            .filter(|_| random_subset(&pool, 2, &mut rng, 1).unwrap().len() == 2)
            .count();
        let frac = pairs as f64 / trials as f64;
        assert!((frac - 0.6).abs() < 0.02, "pair fraction {frac}");
    }

    #[test]
    fn canonical_swap() {
        let a = MessageAssignment::new(2, 1, vec![vec![2], vec![1]]).unwrap();
        let b = MessageAssignment::new(2, 1, vec![vec![1], vec![2]]).unwrap();
        assert_eq!(canonical_form(&a).unwrap(), canonical_form(&b).unwrap());
    }

    #[test]
    fn canonical_transmitter_relabel() {
        let a = MessageAssignment::new(3, 1, vec![vec![1]; 3]).unwrap();
        let b = MessageAssignment::new(3, 1, vec![vec![2]; 3]).unwrap();
        assert_eq!(canonical_form(&a).unwrap(), canonical_form(&b).unwrap());
    }

    #[test]
    fn canonical_separates_non_isomorphic() {
        let a = MessageAssignment::new(3, 1, vec![vec![1]; 3]).unwrap();
        let b = MessageAssignment::new(3, 1, vec![vec![1], vec![2], vec![3]]).unwrap();
        assert_ne!(canonical_form(&a).unwrap(), canonical_form(&b).unwrap());
    }

    #[test]
    fn canonical_cap() {
        let a = generate(&GeneratorSpec::identity(7), 0).unwrap();
        assert!(matches!(
            canonical_form(&a),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(canonical_form_with_cap(&a, 7).is_ok());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(24, 12), Some(2_704_156));
        assert_eq!(binomial(3, 4), Some(0));
    }
}
