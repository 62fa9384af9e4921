//! Greedy certificate sets: transmitter sets `S` with `|C_S| <= K - |S|`,
//! each of which proves `B <= K - |S|`.
//!
//! The constructions start from a lightly loaded transmitter (pigeonhole on
//! the `<= MK` incidences) and repeatedly add the smallest-index transmitter
//! that keeps `|C_S|` under the running budget.

use serde::{Deserialize, Serialize};

use crate::assignment::MessageAssignment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub added: usize,
    pub carried_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub steps: Vec<TraceStep>,
    pub final_set: Vec<usize>,
    pub final_carried: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Theorem2,
    Theorem3M3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateSet {
    pub set_s: Vec<usize>,
    pub carried: usize,
    pub implied_bound: usize,
    pub trace: GreedyTrace,
    pub kind: CertificateKind,
}

/// Coverage bookkeeping over a (possibly truncated) bipartite graph.
/// Transmitters and messages are 0-based here.
struct Cover {
    carried: Vec<Vec<usize>>,
    hits: Vec<u32>,
    in_set: Vec<bool>,
    count: usize,
}

impl Cover {
    fn new(carried: Vec<Vec<usize>>, messages: usize) -> Self {
        let k = carried.len();
        Cover {
            carried,
            hits: vec![0; messages],
            in_set: vec![false; k],
            count: 0,
        }
    }

    fn full(a: &MessageAssignment) -> Self {
        let carried = a
            .carried_by_transmitter()
            .into_iter()
            .map(|msgs| msgs.into_iter().map(|i| i - 1).collect())
            .collect();
        Cover::new(carried, a.k())
    }

    /// The first `x` users only: transmitters and messages `1..=x`.
    fn truncated(a: &MessageAssignment, x: usize) -> Self {
        let carried = a
            .carried_by_transmitter()
            .into_iter()
            .take(x)
            .map(|msgs| {
                msgs.into_iter()
                    .filter(|&i| i <= x)
                    .map(|i| i - 1)
                    .collect()
            })
            .collect();
        Cover::new(carried, x)
    }

    fn insert(&mut self, j: usize) {
        debug_assert!(!self.in_set[j]);
        self.in_set[j] = true;
        for &i in &self.carried[j] {
            if self.hits[i] == 0 {
                self.count += 1;
            }
            self.hits[i] += 1;
        }
    }

    fn gain(&self, j: usize) -> usize {
        self.carried[j]
            .iter()
            .filter(|&&i| self.hits[i] == 0)
            .count()
    }

    /// Smallest transmitter outside the set whose addition keeps the
    /// number of carried messages within `budget`.
    fn first_within(&self, budget: usize) -> Option<usize> {
        (0..self.carried.len()).find(|&j| !self.in_set[j] && self.count + self.gain(j) <= budget)
    }
}

fn check_set(k: usize, set: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = set.iter().find(|&&j| j == 0 || j > k) {
        return Err(Error::IndexOutOfRange { index: bad, k });
    }
    let mut out = set.to_vec();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Smallest transmitter carrying at most `M` messages, with its load.
pub fn find_basis(a: &MessageAssignment) -> (usize, usize) {
    a.carried_by_transmitter()
        .iter()
        .enumerate()
        .find(|(_, msgs)| msgs.len() <= a.m())
        .map(|(j, msgs)| (j + 1, msgs.len()))
        .expect("sum of loads is at most M*K")
}

fn cover_with(a: &MessageAssignment, set: &[usize]) -> Cover {
    let mut cover = Cover::full(a);
    for &j in set {
        cover.insert(j - 1);
    }
    cover
}

fn step_from(cover: &mut Cover, budget: usize, set: &[usize]) -> Result<(Vec<usize>, TraceStep)> {
    let j = cover.first_within(budget).ok_or_else(|| {
        Error::Precondition(format!(
            "no transmitter outside {set:?} keeps |C| <= {budget}"
        ))
    })?;
    cover.insert(j);
    let mut b = set.to_vec();
    b.push(j + 1);
    b.sort_unstable();
    Ok((
        b,
        TraceStep {
            added: j + 1,
            carried_after: cover.count,
        },
    ))
}

/// One induction step: from `A` with `|C_A| <= (M-1)n + 1` to
/// `B = A ∪ {j}` with `|C_B| <= (M-1)(n+1) + 1`.
pub fn extend_step(a: &MessageAssignment, set: &[usize]) -> Result<(Vec<usize>, TraceStep)> {
    let m = a.m();
    let k = a.k();
    let set = check_set(k, set)?;
    if m < 2 {
        return Err(Error::Precondition(format!("requires M >= 2, got M = {m}")));
    }
    let n = set.len();
    if n >= k {
        return Err(Error::Precondition(format!(
            "|A| = {n} must be below K = {k}"
        )));
    }
    let mut cover = cover_with(a, &set);
    let limit = (m - 1) * n + 1;
    if cover.count > limit {
        return Err(Error::Precondition(format!(
            "|C_A| = {} exceeds (M-1)n+1 = {limit}",
            cover.count
        )));
    }
    step_from(&mut cover, (m - 1) * (n + 1) + 1, &set)
}

fn quarter(k: usize) -> Result<usize> {
    if !(k + 1).is_multiple_of(4) {
        return Err(Error::Precondition(format!(
            "(K+1)/4 must be an integer, K = {k}"
        )));
    }
    Ok((k + 1) / 4)
}

/// Induction step for `M = 3` once `|A| >= (K+1)/4`: from
/// `|C_A| <= n + (K+1)/4 + 1` to `|C_B| <= n + (K+1)/4 + 2`.
pub fn extend_step_m3(a: &MessageAssignment, set: &[usize]) -> Result<(Vec<usize>, TraceStep)> {
    let k = a.k();
    if a.m() != 3 {
        return Err(Error::Precondition(format!(
            "requires M = 3, got M = {}",
            a.m()
        )));
    }
    let set = check_set(k, set)?;
    let q = quarter(k)?;
    let n = set.len();
    if n < q || n >= k {
        return Err(Error::Precondition(format!(
            "|A| = {n} must satisfy (K+1)/4 = {q} <= |A| < K = {k}"
        )));
    }
    let mut cover = cover_with(a, &set);
    let limit = n + q + 1;
    if cover.count > limit {
        return Err(Error::Precondition(format!(
            "|C_A| = {} exceeds n + (K+1)/4 + 1 = {limit}",
            cover.count
        )));
    }
    step_from(&mut cover, limit + 1, &set)
}

/// Grows a set on `cover` by the general induction step until it has
/// `target` members, starting from the pigeonhole basis.
fn grow_general(cover: &mut Cover, m: usize, target: usize, picked: &mut Vec<usize>) {
    if target == 0 {
        return;
    }
    let basis = cover
        .first_within(m)
        .expect("some transmitter carries at most M messages");
    cover.insert(basis);
    picked.push(basis);
    for n in 1..target {
        let j = cover
            .first_within((m - 1) * (n + 1) + 1)
            .expect("induction step always has a candidate");
        cover.insert(j);
        picked.push(j);
    }
}

/// Replays the picks on the full assignment to produce the trace.
fn finish(
    a: &MessageAssignment,
    picked: &[usize],
    kind: CertificateKind,
) -> Result<CertificateSet> {
    let mut cover = Cover::full(a);
    let mut steps = Vec::with_capacity(picked.len());
    for &j in picked {
        cover.insert(j);
        steps.push(TraceStep {
            added: j + 1,
            carried_after: cover.count,
        });
    }
    let mut set_s: Vec<usize> = picked.iter().map(|j| j + 1).collect();
    set_s.sort_unstable();
    let implied_bound = a.k() - set_s.len();
    if cover.count > implied_bound {
        return Err(Error::Precondition(format!(
            "constructed set carries {} > K - |S| = {implied_bound}",
            cover.count
        )));
    }
    Ok(CertificateSet {
        carried: cover.count,
        implied_bound,
        trace: GreedyTrace {
            steps,
            final_set: set_s.clone(),
            final_carried: cover.count,
        },
        set_s,
        kind,
    })
}

/// Largest `x <= k` with `(x - 1)` divisible by `m`.
fn truncation_point(k: usize, m: usize) -> usize {
    (1..=k).rev().find(|x| (x - 1) % m == 0).unwrap_or(1)
}

/// Certificate for `B <= (K(M-1)+1)/M` when `(K-1)/M` is an integer. Otherwise
/// the construction runs on the first `x` users, `x` the largest integer
/// below `K` with `(x-1)/M` integral, and the last `K-x` users are charged
/// in full, giving `B <= (x(M-1)+1)/M + (K-x)`.
pub fn construct_certificate(a: &MessageAssignment) -> Result<CertificateSet> {
    let m = a.m();
    let k = a.k();
    if m < 2 {
        return Err(Error::Precondition(
            "certificate construction needs M >= 2".into(),
        ));
    }
    let x = truncation_point(k, m);
    let n = (x - 1) / m;
    let mut cover = if x == k {
        Cover::full(a)
    } else {
        Cover::truncated(a, x)
    };
    let mut picked = Vec::with_capacity(n);
    grow_general(&mut cover, m, n, &mut picked);
    finish(a, &picked, CertificateKind::Theorem2)
}

/// `(x_1, x_2, x_3)` for an admissible `K` under `M = 3`.
pub fn m3_parameters(k: usize) -> Result<(usize, usize, usize)> {
    if k < 7 || !(k + 1).is_multiple_of(8) {
        return Err(Error::Precondition(format!(
            "K = {k} is not admissible: need (K+1)/4 an even positive integer, i.e. K ≡ 7 (mod 8)"
        )));
    }
    let x1 = (k + 1) / 4;
    let x2 = (k - 7) / 8;
    Ok((x1, x2, 2 * x1 + 1 + x2))
}

/// Largest admissible `K' <= k` for the `M = 3` construction and the padded
/// bound `5(K'+1)/8 + (K - K')`.
pub fn nearest_m3_admissible(k: usize) -> Option<(usize, usize)> {
    let kp = (7..=k).rev().find(|kp| (kp + 1) % 8 == 0)?;
    Some((kp, 5 * (kp + 1) / 8 + (k - kp)))
}

/// Two-phase certificate for `B <= 5(K+1)/8` under `M = 3`.
pub fn construct_certificate_m3(a: &MessageAssignment) -> Result<CertificateSet> {
    if a.m() != 3 {
        return Err(Error::Precondition(format!(
            "requires M = 3, got M = {}",
            a.m()
        )));
    }
    let k = a.k();
    let (x1, x2, _) = m3_parameters(k)?;
    let mut cover = Cover::full(a);
    let mut picked = Vec::with_capacity(x1 + x2);
    grow_general(&mut cover, 3, x1, &mut picked);
    for n in x1..x1 + x2 {
        let j = cover
            .first_within(n + x1 + 2)
            .expect("M = 3 induction step always has a candidate");
        cover.insert(j);
        picked.push(j);
    }
    finish(a, &picked, CertificateKind::Theorem3M3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InequalityVariant {
    General,
    M3,
}

/// Evaluates the counting inequality behind an induction step. Inputs
/// outside the admissible region are errors, not `false`.
pub fn check_counting_inequalities(
    k: usize,
    m: usize,
    n: usize,
    s: usize,
    variant: InequalityVariant,
) -> Result<bool> {
    let (ki, mi, ni, si) = (k as i64, m as i64, n as i64, s as i64);
    match variant {
        InequalityVariant::General => {
            if m < 2 {
                return Err(Error::Precondition(format!("requires M >= 2, got {m}")));
            }
            if ki < (mi - 1) * (ni + 1) + 1 {
                return Err(Error::Precondition(format!(
                    "requires K >= (M-1)(n+1)+1, got K = {k}, M = {m}, n = {n}"
                )));
            }
            if si > (mi - 1) * ni + 1 {
                return Err(Error::Precondition(format!(
                    "requires s <= (M-1)n+1, got s = {s}"
                )));
            }
            Ok(mi * (ki - si) < (ki - ni) * ((mi - 1) * (ni + 1) + 2 - si))
        }
        InequalityVariant::M3 => {
            if m != 3 {
                return Err(Error::Precondition(format!("requires M = 3, got {m}")));
            }
            let q = quarter(k)? as i64;
            if ni < q || ni >= ki {
                return Err(Error::Precondition(format!(
                    "requires (K+1)/4 <= n < K, got n = {n}"
                )));
            }
            if ki <= ni + q + 2 {
                return Err(Error::Precondition(format!(
                    "requires K > n + (K+1)/4 + 2, got K = {k}, n = {n}"
                )));
            }
            if si > ni + q + 1 {
                return Err(Error::Precondition(format!(
                    "requires s <= n + (K+1)/4 + 1, got s = {s}"
                )));
            }
            Ok(3 * (ki - si) < (ki - ni) * (ni + q + 3 - si))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GridReport {
    pub checked: usize,
    /// `(k, m, n, s)` points where the inequality was false.
    pub failures: Vec<(usize, usize, usize, usize)>,
}

impl GridReport {
    pub fn all_true(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }

    fn record(&mut self, point: (usize, usize, usize, usize), ok: bool) {
        self.checked += 1;
        if !ok {
            self.failures.push(point);
        }
    }
}

/// Every admissible `(K, M, n, s)` with `K <= max_k`, `2 <= M <= max_m`.
pub fn general_grid(max_k: usize, max_m: usize) -> GridReport {
    let mut report = GridReport::default();
    for k in 1..=max_k {
        for m in 2..=max_m {
            let mut n = 0;
            while (m - 1) * (n + 1) < k {
                for s in 0..=(m - 1) * n + 1 {
                    let ok = check_counting_inequalities(k, m, n, s, InequalityVariant::General)
                        .expect("grid point is admissible");
                    report.record((k, m, n, s), ok);
                }
                n += 1;
            }
        }
    }
    report
}

/// Every admissible `(K, n, s)` for `M = 3`, `K <= max_k`, `K ≡ 7 (mod 8)`.
pub fn m3_grid(max_k: usize) -> GridReport {
    let mut report = GridReport::default();
    for k in (7..=max_k).step_by(8) {
        let q = (k + 1) / 4;
        for n in q..k {
            if k <= n + q + 2 {
                break;
            }
            for s in 0..=n + q + 1 {
                let ok = check_counting_inequalities(k, 3, n, s, InequalityVariant::M3)
                    .expect("grid point is admissible");
                report.record((k, 3, n, s), ok);
            }
        }
    }
    report
}
