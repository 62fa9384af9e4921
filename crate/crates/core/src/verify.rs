//! Reproducible finite-K checks of the bounds, certificates, counting
//! inequalities and expander experiments, grouped into suites.

use std::time::Instant;

use serde::Serialize;

use crate::assignment::{generate, generate_trial, GeneratorSpec, MessageAssignment};
use crate::certificate::{construct_certificate, construct_certificate_m3, general_grid, m3_grid};
use crate::error::Error;
use crate::expansion::{
    carried_messages, dof_upper_bound, exact_profile, i_min_of_profile, reconstruction_check,
    sampled_profile,
};
use crate::oracle;
use crate::search::{
    epsilon_experiment, epsilon_threshold, eta_out_exact, eta_out_random, Fraction,
    RandomGenerator, SearchBudget,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Bounds,
    Certificates,
    Inequalities,
    Expanders,
    All,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Overrides every per-check trial count when set.
    pub trials: Option<u64>,
}

impl VerifyConfig {
    fn trials(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub suite: Suite,
    pub passed: bool,
    pub observed: String,
    pub elapsed_ms: f64,
}

type Outcome = (bool, String);

struct Entry {
    name: &'static str,
    suite: Suite,
    run: fn(&VerifyConfig) -> Outcome,
}

const ENTRIES: &[Entry] = &[
    Entry {
        name: "identity_half",
        suite: Suite::Bounds,
        run: identity_half,
    },
    Entry {
        name: "figure1_certificate",
        suite: Suite::Bounds,
        run: figure1,
    },
    Entry {
        name: "m2_certificates",
        suite: Suite::Certificates,
        run: m2_certificates,
    },
    Entry {
        name: "general_m_cap",
        suite: Suite::Bounds,
        run: general_m_cap,
    },
    Entry {
        name: "m3_certificates",
        suite: Suite::Certificates,
        run: m3_certificates,
    },
    Entry {
        name: "local_cooperation",
        suite: Suite::Bounds,
        run: local_cooperation,
    },
    Entry {
        name: "expander_search",
        suite: Suite::Expanders,
        run: expander_search,
    },
    Entry {
        name: "epsilon_threshold",
        suite: Suite::Expanders,
        run: epsilon_check,
    },
    Entry {
        name: "counting_grids",
        suite: Suite::Inequalities,
        run: counting_grids,
    },
    Entry {
        name: "oracle_equivalence",
        suite: Suite::Bounds,
        run: oracle_equivalence,
    },
    Entry {
        name: "tiny_atlas",
        suite: Suite::Bounds,
        run: tiny_atlas,
    },
    Entry {
        name: "genericity",
        suite: Suite::Bounds,
        run: genericity,
    },
];

/// Names of the checks a suite runs, in order.
pub fn check_names(suite: Suite) -> Vec<&'static str> {
    ENTRIES
        .iter()
        .filter(|e| suite == Suite::All || e.suite == suite)
        .map(|e| e.name)
        .collect()
}

pub fn run_check(name: &str, cfg: &VerifyConfig) -> Option<Check> {
    let entry = ENTRIES.iter().find(|e| e.name == name)?;
    let start = Instant::now();
    let (passed, observed) = (entry.run)(cfg);
    Some(Check {
        name: entry.name,
        suite: entry.suite,
        passed,
        observed,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn run(suite: Suite, cfg: &VerifyConfig) -> Vec<Check> {
    check_names(suite)
        .into_iter()
        .filter_map(|name| run_check(name, cfg))
        .collect()
}

fn fail(e: Error) -> Outcome {
    (false, format!("error: {e}"))
}

fn bound(a: &MessageAssignment) -> Result<usize, Error> {
    Ok(dof_upper_bound(a)?.value)
}

fn identity_half(_: &VerifyConfig) -> Outcome {
    let mut values = Vec::new();
    for k in 2..=16 {
        let a = match generate(&GeneratorSpec::identity(k), 0) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let b = match bound(&a) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        if b != k.div_ceil(2) {
            return (
                false,
                format!("K = {k}: B = {b}, expected {}", k.div_ceil(2)),
            );
        }
        values.push(b);
    }
    (true, format!("B = ceil(K/2) for K = 2..16: {values:?}"))
}

/// Transmit sets consistent with the K = 5 illustration: `S = {1,2}`
/// carries messages 1..3.
pub fn figure1_assignment() -> MessageAssignment {
    MessageAssignment::new(
        5,
        2,
        vec![vec![1], vec![1, 2], vec![2, 3], vec![3, 4], vec![4, 5]],
    )
    .expect("valid")
}

fn figure1(_: &VerifyConfig) -> Outcome {
    let a = figure1_assignment();
    let c = match carried_messages(&a, &[1, 2]) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let candidate = c.len().max(5 - 2);
    let b = match bound(&a) {
        Ok(b) => b,
        Err(e) => return fail(e),
    };
    (
        c == [1, 2, 3] && candidate == 3 && b <= 3,
        format!("C_{{1,2}} = {c:?}, candidate {candidate}, B = {b}"),
    )
}

fn m2_certificates(cfg: &VerifyConfig) -> Outcome {
    let trials = cfg.trials(200);
    let mut worst_margin = i64::MAX;
    for k in [5usize, 9, 13, 17] {
        let spec = GeneratorSpec::uniform_random(k, 2);
        for t in 0..trials {
            let a = match generate_trial(&spec, cfg.seed, t) {
                Ok(a) => a,
                Err(e) => return fail(e),
            };
            let c = match construct_certificate(&a) {
                Ok(c) => c,
                Err(e) => return (false, format!("K = {k}, trial {t}: {e}")),
            };
            if c.set_s.len() != (k - 1) / 2 || c.carried > k.div_ceil(2) {
                return (
                    false,
                    format!(
                        "K = {k}, trial {t}: |S| = {}, carried {}",
                        c.set_s.len(),
                        c.carried
                    ),
                );
            }
            if k <= 13 {
                match bound(&a) {
                    Ok(b) if b <= k.div_ceil(2) => {
                        worst_margin = worst_margin.min((k.div_ceil(2)) as i64 - b as i64)
                    }
                    Ok(b) => return (false, format!("K = {k}, trial {t}: B = {b}")),
                    Err(e) => return fail(e),
                }
            }
        }
    }
    (
        true,
        format!("{trials} trials per K in {{5,9,13,17}}; min slack of exact B below (K+1)/2: {worst_margin}"),
    )
}

/// `M·B <= K(M-1) + M + 1`.
pub fn within_general_cap(k: usize, m: usize, b: usize) -> bool {
    m * b <= k * (m - 1) + m + 1
}

fn general_m_cap(cfg: &VerifyConfig) -> Outcome {
    let mut checked = 0u64;
    for k in 2..=4 {
        let report = match eta_out_exact(
            k,
            2,
            SearchBudget {
                dedup: false,
                ..SearchBudget::default()
            },
        ) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        checked += report.trials_or_count;
        if !within_general_cap(k, 2, report.best_value) {
            return (
                false,
                format!("exhaustive K = {k}: eta_out = {}", report.best_value),
            );
        }
    }
    let trials = cfg.trials(500);
    for m in [2usize, 3, 4] {
        for t in 0..trials {
            let k = m + (t as usize) % (21 - m);
            let a = match generate_trial(&GeneratorSpec::uniform_random(k, m), cfg.seed, t) {
                Ok(a) => a,
                Err(e) => return fail(e),
            };
            match bound(&a) {
                Ok(b) if within_general_cap(k, m, b) => checked += 1,
                Ok(b) => return (false, format!("K = {k}, M = {m}, trial {t}: B = {b}")),
                Err(e) => return fail(e),
            }
        }
    }
    (true, format!("{checked} assignments within (K(M-1)+M+1)/M"))
}

fn m3_certificates(cfg: &VerifyConfig) -> Outcome {
    let trials = cfg.trials(200);
    let mut max_b15 = 0;
    for k in [7usize, 15, 23] {
        let spec = GeneratorSpec::uniform_random(k, 3);
        let target = 5 * (k + 1) / 8;
        for t in 0..trials {
            let a = match generate_trial(&spec, cfg.seed, t) {
                Ok(a) => a,
                Err(e) => return fail(e),
            };
            let c = match construct_certificate_m3(&a) {
                Ok(c) => c,
                Err(e) => return (false, format!("K = {k}, trial {t}: {e}")),
            };
            if c.carried > target || k - c.set_s.len() != target {
                return (
                    false,
                    format!(
                        "K = {k}, trial {t}: |S| = {}, carried {}",
                        c.set_s.len(),
                        c.carried
                    ),
                );
            }
            if k == 15 {
                match bound(&a) {
                    Ok(b) if b <= 10 => max_b15 = max_b15.max(b),
                    Ok(b) => return (false, format!("K = 15, trial {t}: B = {b}")),
                    Err(e) => return fail(e),
                }
            }
        }
    }
    (
        true,
        format!("{trials} trials per K in {{7,15,23}}; max exact B at K = 15: {max_b15}"),
    )
}

fn local_cooperation(cfg: &VerifyConfig) -> Outcome {
    let trials = cfg.trials(100);
    let k = 20;
    let mut maxima = Vec::new();
    for r in 1..=3usize {
        let spec = GeneratorSpec::local_random(k, 3, r);
        let mut worst = 0;
        for t in 0..trials {
            let a = match generate_trial(&spec, cfg.seed, t) {
                Ok(a) => a,
                Err(e) => return fail(e),
            };
            match bound(&a) {
                Ok(b) if b <= k.div_ceil(2) + r => worst = worst.max(b),
                Ok(b) => return (false, format!("r = {r}, trial {t}: B = {b}")),
                Err(e) => return fail(e),
            }
        }
        maxima.push(worst);
    }
    (true, format!("max B for r = 1,2,3: {maxima:?}"))
}

fn expander_search(cfg: &VerifyConfig) -> Outcome {
    let trials = cfg.trials(200);
    match eta_out_random(16, 3, trials, cfg.seed, RandomGenerator::MatchingUnion) {
        Ok(r) => (
            r.best_value >= 9,
            format!("best B = {} over {trials} matching unions", r.best_value),
        ),
        Err(e) => fail(e),
    }
}

fn epsilon_check(cfg: &VerifyConfig) -> Outcome {
    let threshold = match epsilon_threshold(0.5) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let trials = cfg.trials(100);
    match epsilon_experiment(12, 5, Fraction::new(1, 2), trials, cfg.seed) {
        Ok(exp) => (
            threshold == 4.0 && exp.successes >= 1,
            format!(
                "M(1/2) = {threshold}; {} of {trials} trials expand every 6-set",
                exp.successes
            ),
        ),
        Err(e) => fail(e),
    }
}

fn counting_grids(_: &VerifyConfig) -> Outcome {
    let general = general_grid(40, 6);
    let m3 = m3_grid(63);
    (
        general.all_true() && m3.all_true(),
        format!(
            "general: {} points, {} false; m3: {} points, {} false",
            general.checked,
            general.failures.len(),
            m3.checked,
            m3.failures.len()
        ),
    )
}

/// The mixed family used for cross-checks: `k` cycles through `1..=12`.
pub fn mixed_assignment(seed: u64, t: u64) -> Result<MessageAssignment, Error> {
    let k = 1 + (t % 12) as usize;
    let m = 1 + ((t / 12) as usize) % k;
    let spec = if t.is_multiple_of(2) {
        GeneratorSpec::uniform_random(k, m)
    } else {
        GeneratorSpec::matching_union(k, m)
    };
    generate_trial(&spec, seed, t)
}

fn oracle_equivalence(cfg: &VerifyConfig) -> Outcome {
    let trials = cfg.trials(500);
    for t in 0..trials {
        let a = match mixed_assignment(cfg.seed, t) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let (b, exact, sampled) = match (
            bound(&a),
            exact_profile(&a),
            sampled_profile(&a, 8, cfg.seed ^ t),
        ) {
            (Ok(b), Ok(e), Ok(s)) => (b, e, s),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return fail(e),
        };
        let via_profile = match i_min_of_profile(&exact) {
            Ok((_, v)) => v,
            Err(e) => return fail(e),
        };
        if b != via_profile {
            return (
                false,
                format!("trial {t}: B = {b}, profile gives {via_profile}"),
            );
        }
        if sampled.e.iter().zip(&exact.e).any(|(s, e)| s < e) {
            return (false, format!("trial {t}: sampled profile below exact"));
        }
    }
    (
        true,
        format!("{trials} assignments agree; sampled dominates exact"),
    )
}

fn tiny_atlas(_: &VerifyConfig) -> Outcome {
    let mut observed = Vec::new();
    for (k, m, expected) in [(3usize, 1usize, 2usize), (2, 1, 1), (4, 2, 3)] {
        let found = match eta_out_exact(k, m, SearchBudget::default()) {
            Ok(r) => r.best_value,
            Err(e) => return fail(e),
        };
        let reference = oracle::eta_out_by_definition(k, m);
        observed.push(format!(
            "eta_out({k},{m}) = {found} (reference {reference})"
        ));
        if found != expected || reference != expected {
            return (false, observed.join(", "));
        }
    }
    (true, observed.join(", "))
}

fn genericity(cfg: &VerifyConfig) -> Outcome {
    let full_rank = reconstruction_check(5, &[1, 2], &[1, 2, 3], 100, cfg.seed);
    let under = reconstruction_check(5, &[1, 2], &[1, 2], 100, cfg.seed);
    let ok = matches!(full_rank, Ok(true)) && matches!(under, Err(Error::Underdetermined { .. }));
    (
        ok,
        format!(
            "3x3 generic: {:?}; 2 equations / 3 unknowns: {}",
            full_rank.map_err(|e| e.to_string()),
            match under {
                Err(e) => e.to_string(),
                Ok(v) => format!("unexpected {v}"),
            }
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_partition_checks() {
        let all = check_names(Suite::All);
        assert_eq!(all.len(), 12);
        let parts: usize = [
            Suite::Bounds,
            Suite::Certificates,
            Suite::Inequalities,
            Suite::Expanders,
        ]
        .iter()
        .map(|&s| check_names(s).len())
        .sum();
        assert_eq!(parts, all.len());
    }

    #[test]
    fn quick_checks_pass() {
        let cfg = VerifyConfig::default();
        for name in [
            "identity_half",
            "figure1_certificate",
            "genericity",
            "counting_grids",
        ] {
            let c = run_check(name, &cfg).unwrap();
            assert!(c.passed, "{name}: {}", c.observed);
        }
        assert!(run_check("nope", &cfg).is_none());
    }

    #[test]
    fn general_cap_arithmetic() {
        // (K(M-1)+M+1)/M at K = 9, M = 2 is 6
        assert!(within_general_cap(9, 2, 6));
        assert!(!within_general_cap(9, 2, 7));
    }
}
