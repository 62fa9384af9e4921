//! Searching for assignments with a large bound, and finite-K expander
//! experiments on unions of random perfect matchings.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::assignment::{
    canonical_rows, generate_trial, GeneratorKind, GeneratorSpec, MessageAssignment,
    DEFAULT_CANONICAL_CAP,
};
use crate::error::{Error, Result};
use crate::expansion::{bound_value, exact_profile_with_cap, NeighbourTables, DEFAULT_EXACT_CAP};

pub type Fraction = Ratio<u64>;

/// Default cardinality fractions for [`expansion_ratio`].
pub fn default_alphas() -> Vec<Fraction> {
    vec![
        Fraction::new(1, 8),
        Fraction::new(1, 4),
        Fraction::new(3, 8),
        Fraction::new(1, 2),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    Exhaustive,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchReport {
    pub k: usize,
    pub m: usize,
    pub best_value: usize,
    pub best_assignment: MessageAssignment,
    pub method: SearchMethod,
    pub trials_or_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "elapsed_ms", serialize_with = "as_millis")]
    pub elapsed: Duration,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dedup_hits: Option<u64>,
}

impl SearchReport {
    /// `best_value / K`, the finite-K per-user ratio.
    pub fn per_user(&self) -> f64 {
        self.best_value as f64 / self.k as f64
    }
}

fn as_millis<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    /// Most assignments examined before giving up with a partial result.
    pub max_assignments: u128,
    /// Skip assignments isomorphic to one already scored.
    pub dedup: bool,
    pub canonical_cap: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_assignments: 100_000,
            dedup: true,
            canonical_cap: DEFAULT_CANONICAL_CAP,
        }
    }
}

/// Nonempty subsets of `1..=k` with at most `m` elements, by size then
/// lexicographically.
fn small_subsets(k: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1u32..1 << k)
        .filter(|mask| mask.count_ones() as usize <= m)
        .map(|mask| {
            (0..k)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| b + 1)
                .collect()
        })
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Exact `η_out(k, m)`: the largest bound over every assignment of nonempty
/// transmit sets of size at most `m`. The first maximiser in enumeration
/// order is reported.
pub fn eta_out_exact(k: usize, m: usize, budget: SearchBudget) -> Result<SearchReport> {
    if k == 0 || m == 0 || m > k {
        return Err(Error::Precondition(format!(
            "need 1 <= m <= k, got k = {k}, m = {m}"
        )));
    }
    if k > 16 {
        return Err(Error::BudgetExceeded {
            what: "exhaustive search",
            k,
            cap: 16,
            advice: "use random search",
        });
    }
    let start = Instant::now();
    let subsets = small_subsets(k, m);
    let total = (subsets.len() as u128)
        .checked_pow(k as u32)
        .unwrap_or(u128::MAX);
    let dedup = budget.dedup && k <= budget.canonical_cap;
    let mut seen: HashSet<Vec<u16>> = HashSet::new();
    let mut dedup_hits = 0u64;
    let mut digits = vec![0usize; k];
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut examined: u128 = 0;
    let build = |digits: &[usize]| {
        MessageAssignment::new(k, m, digits.iter().map(|&d| subsets[d].clone()).collect())
            .expect("enumerated sets are valid")
    };
    loop {
        if examined == budget.max_assignments {
            break;
        }
        examined += 1;
        let a = build(&digits);
        let fresh = !dedup || seen.insert(canonical_rows(&a));
        if fresh {
            let value = bound_value(&NeighbourTables::new(&a), k);
            if best.as_ref().is_none_or(|(v, _)| value > *v) {
                best = Some((value, digits.clone()));
            }
        } else {
            dedup_hits += 1;
        }
        // odometer, last message fastest
        let mut pos = k;
        let done = loop {
            if pos == 0 {
                break true;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < subsets.len() {
                break false;
            }
            digits[pos] = 0;
        };
        if done {
            break;
        }
    }
    let (best_value, best_digits) = best.expect("at least one assignment");
    let mut report = SearchReport {
        k,
        m,
        best_value,
        best_assignment: build(&best_digits),
        method: SearchMethod::Exhaustive,
        trials_or_count: examined as u64,
        seed: None,
        elapsed: start.elapsed(),
        dedup_hits: Some(dedup_hits),
    };
    if examined < total {
        report.method = SearchMethod::Random;
        return Err(Error::SearchBudgetExceeded {
            total,
            partial: Box::new(report),
        });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum RandomGenerator {
    MatchingUnion,
    UniformRandom,
}

impl RandomGenerator {
    fn spec(self, k: usize, m: usize) -> GeneratorSpec {
        match self {
            RandomGenerator::MatchingUnion => GeneratorSpec::matching_union(k, m),
            RandomGenerator::UniformRandom => GeneratorSpec::uniform_random(k, m),
        }
    }
}

impl From<RandomGenerator> for GeneratorKind {
    fn from(g: RandomGenerator) -> Self {
        match g {
            RandomGenerator::MatchingUnion => GeneratorKind::MatchingUnion,
            RandomGenerator::UniformRandom => GeneratorKind::UniformRandom,
        }
    }
}

fn check_exact_k(k: usize) -> Result<()> {
    if k > DEFAULT_EXACT_CAP {
        return Err(Error::BudgetExceeded {
            what: "exact bound",
            k,
            cap: DEFAULT_EXACT_CAP,
            advice: "reduce k",
        });
    }
    Ok(())
}

/// Scores `trials` seeded random assignments exactly and keeps the best;
/// ties go to the earliest trial. Identical for any thread count.
pub fn eta_out_random(
    k: usize,
    m: usize,
    trials: u64,
    seed: u64,
    generator: RandomGenerator,
) -> Result<SearchReport> {
    check_exact_k(k)?;
    if trials == 0 {
        return Err(Error::Precondition("trials must be positive".into()));
    }
    let start = Instant::now();
    let spec = generator.spec(k, m);
    let scored: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = generate_trial(&spec, seed, t)?;
            Ok(bound_value(&NeighbourTables::new(&a), k))
        })
        .collect::<Result<_>>()?;
    let (best_trial, &best_value) = scored
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, v)| **v)
        .expect("trials > 0");
    Ok(SearchReport {
        k,
        m,
        best_value,
        best_assignment: generate_trial(&spec, seed, best_trial as u64)?,
        method: SearchMethod::Random,
        trials_or_count: trials,
        seed: Some(seed),
        elapsed: start.elapsed(),
        dedup_hits: None,
    })
}

/// Best bound over an explicit list of candidate assignments.
pub fn best_of(candidates: &[MessageAssignment]) -> Result<SearchReport> {
    let start = Instant::now();
    let first = candidates
        .first()
        .ok_or_else(|| Error::Precondition("no candidates".into()))?;
    let mut best = (0usize, 0usize);
    for (idx, a) in candidates.iter().enumerate() {
        check_exact_k(a.k())?;
        let value = bound_value(&NeighbourTables::new(a), a.k());
        if idx == 0 || value > best.0 {
            best = (value, idx);
        }
    }
    Ok(SearchReport {
        k: first.k(),
        m: candidates
            .iter()
            .map(MessageAssignment::m)
            .max()
            .unwrap_or(first.m()),
        best_value: best.0,
        best_assignment: candidates[best.1].clone(),
        method: SearchMethod::Random,
        trials_or_count: candidates.len() as u64,
        seed: None,
        elapsed: start.elapsed(),
        dedup_hits: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaRatio {
    pub alpha: Fraction,
    /// `round(alpha * K)`.
    pub size: usize,
    pub neighbours: usize,
    pub ratio: f64,
}

/// `e(round(αK)) / round(αK)` for each α from the exact profile; halves
/// round up.
pub fn expansion_ratio(a: &MessageAssignment, alphas: &[Fraction]) -> Result<Vec<AlphaRatio>> {
    let k = a.k() as u64;
    let half = Fraction::new(1, 2);
    let mut sizes = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if alpha <= Fraction::from_integer(0) || alpha > half {
            return Err(Error::OutOfRange(format!(
                "alpha = {alpha} outside (0, 1/2]"
            )));
        }
        let size = ((2 * alpha.numer() * k + alpha.denom()) / (2 * alpha.denom())) as usize;
        if size == 0 || size > a.k() / 2 {
            return Err(Error::OutOfRange(format!(
                "alpha = {alpha} gives size {size}, outside 1..={}",
                a.k() / 2
            )));
        }
        sizes.push(size);
    }
    let profile = exact_profile_with_cap(a, DEFAULT_EXACT_CAP)?;
    Ok(alphas
        .iter()
        .zip(sizes)
        .map(|(&alpha, size)| AlphaRatio {
            alpha,
            size,
            neighbours: profile.e[size],
            ratio: profile.e[size] as f64 / size as f64,
        })
        .collect())
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `2H(ε) / (−ε log2(1−ε))`: cooperation orders strictly above this make the
/// union-bound exponent for random matching unions negative.
pub fn epsilon_threshold(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange(format!(
            "epsilon = {epsilon} outside (0, 1)"
        )));
    }
    Ok(2.0 * binary_entropy(epsilon) / (-epsilon * (1.0 - epsilon).log2()))
}

/// Smallest integer cooperation order strictly above the threshold.
pub fn min_cooperation_order(epsilon: f64) -> Result<u64> {
    Ok(epsilon_threshold(epsilon)?.floor() as u64 + 1)
}

pub const DEFAULT_SUBSET_BUDGET: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub success: bool,
    /// Minimum `|N(A)| / |A|` over all transmitter sets of size `εK`.
    pub min_ratio: Fraction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExpansionExperiment {
    pub k: usize,
    pub m: usize,
    pub epsilon: Fraction,
    pub trials: u64,
    pub seed: u64,
    pub successes: u64,
    pub outcomes: Vec<TrialOutcome>,
}

impl ExpansionExperiment {
    pub fn min_ratio_per_trial(&self) -> Vec<Fraction> {
        self.outcomes.iter().map(|o| o.min_ratio).collect()
    }
}

/// Smallest neighbourhood over all `size`-subsets of transmitters.
fn min_neighbours(tx: &[u64], size: usize) -> usize {
    let k = tx.len();
    let mut combo: Vec<usize> = (0..size).collect();
    let mut best = usize::MAX;
    loop {
        let n = combo.iter().fold(0u64, |acc, &j| acc | tx[j]).count_ones() as usize;
        best = best.min(n);
        let mut pos = size;
        loop {
            if pos == 0 {
                return best;
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

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r.min(n - r)).fold(1u128, |acc, t| acc * (n - t) as u128 / (t as u128 + 1))
}

pub fn epsilon_experiment(
    k: usize,
    m: usize,
    epsilon: Fraction,
    trials: u64,
    seed: u64,
) -> Result<ExpansionExperiment> {
    epsilon_experiment_with_budget(k, m, epsilon, trials, seed, DEFAULT_SUBSET_BUDGET)
}

/// Per trial, draws a union of `m` random perfect matchings and checks over
/// every transmitter set `A` with `|A| = εK` whether `|N(A)| > (1−ε)K`.
pub fn epsilon_experiment_with_budget(
    k: usize,
    m: usize,
    epsilon: Fraction,
    trials: u64,
    seed: u64,
    subset_budget: u128,
) -> Result<ExpansionExperiment> {
    if epsilon <= Fraction::from_integer(0) || epsilon > Fraction::new(1, 2) {
        return Err(Error::OutOfRange(format!(
            "epsilon = {epsilon} outside (0, 1/2]"
        )));
    }
    let scaled = epsilon * Fraction::from_integer(k as u64);
    if !scaled.is_integer() || scaled.to_integer() == 0 {
        return Err(Error::Precondition(format!(
            "epsilon * k = {scaled} must be a positive integer"
        )));
    }
    let size = scaled.to_integer() as usize;
    if k > 64 {
        return Err(Error::BudgetExceeded {
            what: "expander experiment",
            k,
            cap: 64,
            advice: "use a smaller k",
        });
    }
    if binomial(k, size) > subset_budget {
        return Err(Error::BudgetExceeded {
            what: "expander experiment",
            k,
            cap: k - 1,
            advice: "C(k, epsilon*k) exceeds the subset budget; use a smaller k",
        });
    }
    let spec = GeneratorSpec::matching_union(k, m);
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = generate_trial(&spec, seed, t)?;
            let mut tx = vec![0u64; k];
            for (pos, set) in a.transmit_sets().iter().enumerate() {
                for &j in set {
                    tx[j - 1] |= 1 << pos;
                }
            }
            let least = min_neighbours(&tx, size);
            Ok(TrialOutcome {
                trial: t,
                success: least > k - size,
                min_ratio: Fraction::new(least as u64, size as u64),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExpansionExperiment {
        k,
        m,
        epsilon,
        trials,
        seed,
        successes: outcomes.iter().filter(|o| o.success).count() as u64,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::generate;

    #[test]
    fn subset_order() {
        let s = small_subsets(3, 2);
        assert_eq!(
            s,
            vec![
                vec![1],
                vec![2],
                vec![3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn exact_tiny_values() {
        let r = eta_out_exact(3, 1, SearchBudget::default()).unwrap();
        assert_eq!(r.best_value, 2);
        assert_eq!(r.trials_or_count, 27);
        assert_eq!(
            eta_out_exact(2, 1, SearchBudget::default())
                .unwrap()
                .best_value,
            1
        );
    }

    #[test]
    fn exact_budget_returns_partial() {
        let budget = SearchBudget {
            max_assignments: 10,
            ..SearchBudget::default()
        };
        match eta_out_exact(3, 2, budget) {
            Err(Error::SearchBudgetExceeded { total, partial }) => {
                assert_eq!(total, 216);
                assert_eq!(partial.trials_or_count, 10);
                assert_eq!(partial.method, SearchMethod::Random);
            }
            other => panic!("unexpected {other:?}"),
        }
        // default budget matches the documented caps
        assert!(eta_out_exact(5, 2, SearchBudget::default()).is_err());
        assert!(eta_out_exact(7, 1, SearchBudget::default()).is_err());
    }

    #[test]
    fn dedup_does_not_change_value() {
        let with = eta_out_exact(3, 2, SearchBudget::default()).unwrap();
        let without = eta_out_exact(
            3,
            2,
            SearchBudget {
                dedup: false,
                ..SearchBudget::default()
            },
        )
        .unwrap();
        assert_eq!(with.best_value, without.best_value);
        assert_eq!(with.best_assignment, without.best_assignment);
        assert!(with.dedup_hits.unwrap() > 0);
        assert_eq!(without.dedup_hits, Some(0));
    }

    #[test]
    fn random_m1_stays_at_half() {
        let r = eta_out_random(4, 1, 50, 3, RandomGenerator::UniformRandom).unwrap();
        assert!(r.best_value <= 2);
    }

    #[test]
    fn full_cooperation_candidate() {
        let mut cands: Vec<MessageAssignment> = (0..5)
            .map(|t| generate_trial(&GeneratorSpec::uniform_random(8, 2), 1, t).unwrap())
            .collect();
        cands.push(generate(&GeneratorSpec::full(8), 0).unwrap());
        let r = best_of(&cands).unwrap();
        assert_eq!(r.best_value, 8);
        assert_eq!(r.best_assignment.m(), 8);
    }

    #[test]
    fn ratio_examples() {
        let id = generate(&GeneratorSpec::identity(8), 0).unwrap();
        let r = expansion_ratio(&id, &[Fraction::new(1, 2)]).unwrap();
        assert_eq!(r[0].size, 4);
        assert_eq!(r[0].ratio, 1.0);
        let full = generate(&GeneratorSpec::full(8), 0).unwrap();
        let r = expansion_ratio(&full, &[Fraction::new(1, 4)]).unwrap();
        assert_eq!(r[0].ratio, 4.0);
        assert!(expansion_ratio(&id, &[Fraction::new(3, 4)]).is_err());
        assert!(expansion_ratio(&id, &[Fraction::new(1, 32)]).is_err());
        // 12 * 1/8 = 1.5 rounds up to 2
        let id12 = generate(&GeneratorSpec::identity(12), 0).unwrap();
        assert_eq!(
            expansion_ratio(&id12, &default_alphas()).unwrap()[0].size,
            2
        );
    }

    #[test]
    fn threshold_values() {
        assert_eq!(epsilon_threshold(0.5).unwrap(), 4.0);
        assert_eq!(min_cooperation_order(0.5).unwrap(), 5);
        let t = epsilon_threshold(0.25).unwrap();
        assert!((t - 15.64).abs() < 0.005, "{t}");
        let t = epsilon_threshold(0.9).unwrap();
        assert!(t.is_finite() && t > 0.0);
        assert!(epsilon_threshold(0.0).is_err());
        assert!(epsilon_threshold(1.0).is_err());
    }

    #[test]
    fn single_matching_never_expands() {
        let r = epsilon_experiment(6, 1, Fraction::new(1, 2), 50, 0).unwrap();
        assert_eq!(r.successes, 0);
        assert!(r
            .min_ratio_per_trial()
            .iter()
            .all(|q| *q == Fraction::from_integer(1)));
    }

    #[test]
    fn experiment_rejects_bad_epsilon() {
        assert!(epsilon_experiment(5, 2, Fraction::new(1, 2), 1, 0).is_err());
        assert!(epsilon_experiment(6, 2, Fraction::new(2, 3), 1, 0).is_err());
        assert!(epsilon_experiment_with_budget(20, 2, Fraction::new(1, 2), 1, 0, 1000).is_err());
    }
}
