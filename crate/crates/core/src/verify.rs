//! Exhaustive checks on tiny finite mechanisms: DP and zCDP, group privacy,
//! the KL bound for pure DP, admissibility of similarity functions, and the
//! transport inequality that turns admissible similarities into testing
//! lower bounds.
//!
//! These checks refute, they do not prove: a similarity function that
//! passes on every enumerated mechanism here may still fail elsewhere.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{BoundsError, PrivacyConstraint};
use crate::couplings::{exponential_races, CouplingError};
use crate::divergences::{kl_weights, renyi_weights, tv, DiscreteDistribution};
use crate::rng::stream_rng;

/// Largest dataset space for privacy checks.
pub const MAX_DATASETS: usize = 64;
/// Largest output space for privacy checks (events are all subsets).
pub const MAX_OUTPUTS: usize = 8;
/// Largest `N · |datasets|^N · N^|outputs|` for admissibility.
pub const MAX_ADMISSIBILITY_WORK: u64 = 20_000_000;

const ROW_TOLERANCE: f64 = 1e-12;
const CHECK_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("datasets of length {0} and {1} cannot be compared")]
    LengthMismatch(usize, usize),
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("similarity kind {kind} does not apply to {constraint}")]
    KindConstraintMismatch { kind: String, constraint: String },
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

/// A dataset of `n` entries over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dataset {
    pub entries: Vec<i64>,
}

impl Dataset {
    pub fn new(entries: Vec<i64>) -> Result<Self, VerifyError> {
        if entries.is_empty() {
            return Err(VerifyError::InvalidDataset("n must be >= 1".into()));
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }
}

/// Number of coordinates where `a` and `b` differ.
pub fn hamming(a: &Dataset, b: &Dataset) -> Result<usize, VerifyError> {
    if a.n() != b.n() {
        return Err(VerifyError::LengthMismatch(a.n(), b.n()));
    }
    Ok(a.entries.iter().zip(&b.entries).filter(|(x, y)| x != y).count())
}

/// Stochastic kernel from `{0..alphabet}^n` to a finite output set.
///
/// Rows are indexed by datasets in base-`alphabet` order with the first
/// entry most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMechanism {
    alphabet: usize,
    n: usize,
    outputs: Vec<i64>,
    kernel: Vec<Vec<f64>>,
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

impl FiniteMechanism {
    pub fn new(alphabet: usize, n: usize, outputs: Vec<i64>, kernel: Vec<Vec<f64>>) -> Result<Self, VerifyError> {
        if alphabet == 0 || n == 0 || outputs.is_empty() {
            return Err(VerifyError::InvalidMechanism("alphabet, n and outputs must be non-empty".into()));
        }
        let rows = checked_pow(alphabet, n).ok_or_else(|| VerifyError::TooLarge("dataset space overflows".into()))?;
        if kernel.len() != rows {
            return Err(VerifyError::InvalidMechanism(format!("{} rows for {rows} datasets", kernel.len())));
        }
        for (i, row) in kernel.iter().enumerate() {
            if row.len() != outputs.len() {
                return Err(VerifyError::InvalidMechanism(format!("row {i} has {} entries", row.len())));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(VerifyError::InvalidMechanism(format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOLERANCE {
                return Err(VerifyError::InvalidMechanism(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            alphabet,
            n,
            outputs,
            kernel,
        })
    }

    /// Builds the kernel row by row from a function of the dataset.
    pub fn from_fn<F>(alphabet: usize, n: usize, outputs: Vec<i64>, f: F) -> Result<Self, VerifyError>
    where
        F: Fn(&Dataset) -> Vec<f64>,
    {
        let rows = checked_pow(alphabet, n).ok_or_else(|| VerifyError::TooLarge("dataset space overflows".into()))?;
        let kernel = (0..rows).map(|i| f(&dataset_at(alphabet, n, i))).collect();
        Self::new(alphabet, n, outputs, kernel)
    }

    /// Ignores its input.
    pub fn constant(alphabet: usize, n: usize) -> Result<Self, VerifyError> {
        Self::from_fn(alphabet, n, vec![0], |_| vec![1.0])
    }

    /// Releases the dataset itself (encoded by its index). Not private.
    pub fn identity(alphabet: usize, n: usize) -> Result<Self, VerifyError> {
        let rows = checked_pow(alphabet, n).ok_or_else(|| VerifyError::TooLarge("dataset space overflows".into()))?;
        let kernel = (0..rows)
            .map(|i| (0..rows).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(alphabet, n, (0..rows as i64).collect(), kernel)
    }

    /// Randomized response on one bit: keep with probability `e^ε/(1+e^ε)`.
    pub fn randomized_response(epsilon: f64) -> Result<Self, VerifyError> {
        Self::rr_product(epsilon, 1)
    }

    /// Independent randomized response on each of `n` bits; the output is
    /// the perturbed bit vector encoded as an integer.
    pub fn rr_product(epsilon: f64, n: usize) -> Result<Self, VerifyError> {
        let keep = rr_keep_probability(epsilon);
        let outs = checked_pow(2, n).ok_or_else(|| VerifyError::TooLarge("output space overflows".into()))?;
        Self::from_fn(2, n, (0..outs as i64).collect(), |x| {
            (0..outs)
                .map(|o| {
                    let y = dataset_at(2, n, o);
                    x.entries
                        .iter()
                        .zip(&y.entries)
                        .map(|(a, b)| if a == b { keep } else { 1.0 - keep })
                        .product()
                })
                .collect()
        })
    }

    /// Randomized response on each bit, releasing only the number of ones.
    pub fn rr_sum(epsilon: f64, n: usize) -> Result<Self, VerifyError> {
        let prod = Self::rr_product(epsilon, n)?;
        let kernel = prod
            .kernel
            .iter()
            .map(|row| {
                let mut out = vec![0.0; n + 1];
                for (o, p) in row.iter().enumerate() {
                    out[(o as u64).count_ones() as usize] += p;
                }
                out
            })
            .collect();
        Self::new(2, n, (0..=n as i64).collect(), kernel)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn outputs(&self) -> &[i64] {
        &self.outputs
    }

    pub fn num_datasets(&self) -> usize {
        self.kernel.len()
    }

    pub fn dataset(&self, index: usize) -> Dataset {
        dataset_at(self.alphabet, self.n, index)
    }

    pub fn index_of(&self, x: &Dataset) -> Result<usize, VerifyError> {
        if x.n() != self.n {
            return Err(VerifyError::LengthMismatch(x.n(), self.n));
        }
        let mut idx = 0usize;
        for &e in &x.entries {
            if e < 0 || e as usize >= self.alphabet {
                return Err(VerifyError::InvalidDataset(format!("entry {e} outside alphabet")));
            }
            idx = idx * self.alphabet + e as usize;
        }
        Ok(idx)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.kernel[index]
    }

    /// Output law for a dataset.
    pub fn output_law(&self, x: &Dataset) -> Result<DiscreteDistribution, VerifyError> {
        let row = self.row(self.index_of(x)?).to_vec();
        DiscreteDistribution::new(self.outputs.clone(), row).map_err(|e| VerifyError::InvalidMechanism(e.to_string()))
    }

    fn hamming_idx(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b, mut d) = (a, b, 0);
        for _ in 0..self.n {
            if a % self.alphabet != b % self.alphabet {
                d += 1;
            }
            a /= self.alphabet;
            b /= self.alphabet;
        }
        d
    }

    fn check_privacy_caps(&self) -> Result<(), VerifyError> {
        if self.num_datasets() > MAX_DATASETS || self.outputs.len() > MAX_OUTPUTS {
            return Err(VerifyError::TooLarge(format!(
                "{} datasets and {} outputs (caps {MAX_DATASETS}, {MAX_OUTPUTS})",
                self.num_datasets(),
                self.outputs.len()
            )));
        }
        Ok(())
    }
}

fn dataset_at(alphabet: usize, n: usize, mut index: usize) -> Dataset {
    let mut entries = vec![0i64; n];
    for slot in entries.iter_mut().rev() {
        *slot = (index % alphabet) as i64;
        index /= alphabet;
    }
    Dataset { entries }
}

/// `e^ε / (1 + e^ε)`.
pub fn rr_keep_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + (-epsilon).exp())
}

/// Rényi orders checked for zCDP: `1 + 2^-k` for `k = 0..=20`, then 2, 4, 8, 16.
pub fn alpha_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=20).map(|k| 1.0 + 0.5f64.powi(k)).collect();
    g.extend([4.0, 8.0, 16.0]);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WitnessDetail {
    /// `P(M(x) ∈ event) > bound` where the bound is the right-hand side.
    Event { event: Vec<i64>, lhs: f64, bound: f64 },
    /// `D_alpha(M(x) || M(y)) > bound`.
    Renyi { alpha: f64, divergence: f64, bound: f64 },
    /// `KL(M(x) || M(y)) > bound`.
    Kl { divergence: f64, bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyWitness {
    pub x: Dataset,
    pub y: Dataset,
    pub distance: usize,
    pub detail: WitnessDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyCheck {
    pub holds: bool,
    /// Largest violation found (lhs − bound), negative when everything holds.
    pub worst_gap: f64,
    pub witness: Option<PrivacyWitness>,
}

struct Tracker {
    worst: f64,
    witness: Option<PrivacyWitness>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn offer(&mut self, gap: f64, make: impl FnOnce() -> PrivacyWitness) {
        if gap > self.worst {
            self.worst = gap;
            if gap > CHECK_SLACK {
                self.witness = Some(make());
            }
        }
    }

    fn finish(self) -> PrivacyCheck {
        PrivacyCheck {
            holds: self.witness.is_none(),
            worst_gap: if self.worst.is_finite() { self.worst } else { 0.0 },
            witness: self.witness,
        }
    }
}

fn event_mass(row: &[f64], mask: usize) -> f64 {
    row.iter()
        .enumerate()
        .filter(|(o, _)| mask >> o & 1 == 1)
        .map(|(_, p)| p)
        .sum()
}

fn event_labels(m: &FiniteMechanism, mask: usize) -> Vec<i64> {
    (0..m.outputs.len()).filter(|o| mask >> o & 1 == 1).map(|o| m.outputs[o]).collect()
}

/// Checks all ordered dataset pairs at Hamming distance `k` (every distance
/// when `k` is `None`) against `bound_fn(distance)`.
/// Group-privacy constants at distance `k`: `(e^{kε}, kδe^{(k−1)ε})`.
pub fn group_privacy_terms(epsilon: f64, delta: f64, k: usize) -> (f64, f64) {
    let kf = k as f64;
    let add = if k == 0 { 0.0 } else { delta * kf * ((kf - 1.0) * epsilon).exp() };
    ((kf * epsilon).exp(), add)
}

fn check_pairs(m: &FiniteMechanism, c: PrivacyConstraint, distances: &[usize]) -> PrivacyCheck {
    let mut t = Tracker::new();
    let nd = m.num_datasets();
    let masks = 1usize << m.outputs.len();
    let grid = alpha_grid();
    for a in 0..nd {
        for b in 0..nd {
            let k = m.hamming_idx(a, b);
            if !distances.contains(&k) {
                continue;
            }
            let (ra, rb) = (m.row(a), m.row(b));
            let kf = k as f64;
            match c {
                PrivacyConstraint::None => {}
                PrivacyConstraint::Zcdp { rho } => {
                    let pairs = || ra.iter().copied().zip(rb.iter().copied());
                    for &alpha in &grid {
                        let d = renyi_weights(alpha, pairs()).expect("alpha > 1");
                        let bound = rho * kf * kf * alpha;
                        t.offer(d - bound, || PrivacyWitness {
                            x: m.dataset(a),
                            y: m.dataset(b),
                            distance: k,
                            detail: WitnessDetail::Renyi {
                                alpha,
                                divergence: d,
                                bound,
                            },
                        });
                    }
                    // order infinity: only absolute continuity matters
                    let d_inf = renyi_weights(f64::INFINITY, pairs()).expect("alpha > 1");
                    if d_inf.is_infinite() {
                        t.offer(f64::INFINITY, || PrivacyWitness {
                            x: m.dataset(a),
                            y: m.dataset(b),
                            distance: k,
                            detail: WitnessDetail::Renyi {
                                alpha: f64::INFINITY,
                                divergence: d_inf,
                                bound: f64::INFINITY,
                            },
                        });
                    }
                }
                dp => {
                    let (eps, delta) = dp.dp_params().expect("dp constraint");
                    let (mult, add) = group_privacy_terms(eps, delta, k);
                    for mask in 1..masks {
                        let lhs = event_mass(ra, mask);
                        let bound = mult * event_mass(rb, mask) + add;
                        t.offer(lhs - bound, || PrivacyWitness {
                            x: m.dataset(a),
                            y: m.dataset(b),
                            distance: k,
                            detail: WitnessDetail::Event {
                                event: event_labels(m, mask),
                                lhs,
                                bound,
                            },
                        });
                    }
                }
            }
        }
    }
    t.finish()
}

/// Exhaustive privacy check over neighboring datasets.
pub fn verify_privacy(m: &FiniteMechanism, c: PrivacyConstraint) -> Result<PrivacyCheck, VerifyError> {
    c.validate()?;
    m.check_privacy_caps()?;
    Ok(check_pairs(m, c, &[1]))
}

/// Group privacy: datasets at distance `k` for every `k ≤ n`. For DP the
/// bound is `e^{kε}P + kδe^{(k−1)ε}`, for zCDP `D_α ≤ ρk²α`.
pub fn verify_group_privacy(m: &FiniteMechanism, c: PrivacyConstraint) -> Result<PrivacyCheck, VerifyError> {
    let base = verify_privacy(m, c)?;
    if !base.holds {
        return Err(VerifyError::PreconditionFailed(format!(
            "mechanism does not satisfy {}",
            c.kind_name()
        )));
    }
    let ks: Vec<usize> = (0..=m.n).collect();
    Ok(check_pairs(m, c, &ks))
}

/// Checks `KL(M(x) || M(y)) ≤ ε·d_H(x, y)` for all dataset pairs.
pub fn verify_kl_dp(m: &FiniteMechanism, epsilon: f64) -> Result<PrivacyCheck, VerifyError> {
    let c = PrivacyConstraint::PureDp { epsilon };
    let base = verify_privacy(m, c)?;
    if !base.holds {
        return Err(VerifyError::PreconditionFailed(format!("mechanism is not {epsilon}-DP")));
    }
    let mut t = Tracker::new();
    let nd = m.num_datasets();
    for a in 0..nd {
        for b in 0..nd {
            let k = m.hamming_idx(a, b);
            let d = kl_weights(m.row(a).iter().copied().zip(m.row(b).iter().copied()));
            let bound = epsilon * k as f64;
            // looser tolerance: KL sums accumulate more rounding
            t.offer(d - bound - 1e-10 + CHECK_SLACK, || PrivacyWitness {
                x: m.dataset(a),
                y: m.dataset(b),
                distance: k,
                detail: WitnessDetail::Kl { divergence: d, bound },
            });
        }
    }
    Ok(t.finish())
}

/// Anchor dataset for global anchoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "dataset", rename_all = "snake_case")]
pub enum Anchor {
    Fixed(Dataset),
    /// Two datasets only: the first half of the disagreeing coordinates
    /// (rounded up, ascending index) comes from the first dataset, the rest
    /// from the second.
    Midpoint,
}

/// Admissible similarity functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityKind {
    GlobalAnchor { anchor: Anchor },
    ProjectionAnchor { j: usize },
    LeCamMatch,
    PairwiseAnchor,
    FanoMatch,
}

impl SimilarityKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GlobalAnchor { .. } => "global_anchor",
            Self::ProjectionAnchor { .. } => "projection_anchor",
            Self::LeCamMatch => "le_cam_match",
            Self::PairwiseAnchor => "pairwise_anchor",
            Self::FanoMatch => "fano_match",
        }
    }
}

/// Midpoint anchor of two datasets.
pub fn midpoint_anchor(a: &Dataset, b: &Dataset) -> Result<Dataset, VerifyError> {
    let d = hamming(a, b)?;
    let take_from_a = d.div_ceil(2);
    let mut seen = 0;
    let entries = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(&x, &y)| {
            if x == y {
                x
            } else {
                seen += 1;
                if seen <= take_from_a {
                    x
                } else {
                    y
                }
            }
        })
        .collect();
    Ok(Dataset { entries })
}

fn mismatch(kind: &SimilarityKind, c: PrivacyConstraint) -> VerifyError {
    VerifyError::KindConstraintMismatch {
        kind: kind.name().into(),
        constraint: c.kind_name().into(),
    }
}

/// Evaluates a similarity function on a tuple of datasets.
pub fn similarity(c: PrivacyConstraint, kind: &SimilarityKind, datasets: &[Dataset]) -> Result<f64, VerifyError> {
    c.validate()?;
    let big_n = datasets.len();
    if big_n < 2 {
        return Err(VerifyError::ArityMismatch(format!("need at least 2 datasets, got {big_n}")));
    }
    let nf = big_n as f64;
    let dist = |i: usize, j: usize| hamming(&datasets[i], &datasets[j]);
    let pair_sum = |f: &dyn Fn(usize) -> f64| -> Result<f64, VerifyError> {
        let mut s = 0.0;
        for i in 0..big_n {
            for j in 0..big_n {
                s += f(dist(i, j)?);
            }
        }
        Ok(s)
    };
    let need_two = || {
        if big_n != 2 {
            Err(VerifyError::ArityMismatch(format!("{} needs N = 2, got {big_n}", kind.name())))
        } else {
            Ok(())
        }
    };
    let half = |d: usize| d.div_ceil(2) as f64;
    match c {
        PrivacyConstraint::None => Err(mismatch(kind, c)),
        PrivacyConstraint::Zcdp { rho } => match kind {
            SimilarityKind::FanoMatch => {
                let s = pair_sum(&|d| (d * d) as f64)?;
                Ok(1.0 - (1.0 + rho / (nf * nf) * s) / nf.ln())
            }
            SimilarityKind::LeCamMatch => {
                need_two()?;
                Ok(0.5 * (1.0 - (rho / 2.0).sqrt() * dist(0, 1)? as f64))
            }
            _ => Err(mismatch(kind, c)),
        },
        dp => {
            let (eps, delta) = dp.dp_params().expect("dp constraint");
            let global = |m: f64| (nf - 1.0) / nf * (-eps * m).exp() - (-eps).exp() * delta * m;
            match kind {
                SimilarityKind::GlobalAnchor { anchor } => {
                    let anchor = match anchor {
                        Anchor::Fixed(a) => a.clone(),
                        Anchor::Midpoint => {
                            need_two()?;
                            midpoint_anchor(&datasets[0], &datasets[1])?
                        }
                    };
                    let mut m = 0usize;
                    for x in datasets {
                        m = m.max(hamming(x, &anchor)?);
                    }
                    Ok(global(m as f64))
                }
                SimilarityKind::ProjectionAnchor { j } => {
                    if *j >= big_n {
                        return Err(VerifyError::ArityMismatch(format!("projection index {j} >= N = {big_n}")));
                    }
                    let mut m = 0usize;
                    for i in 0..big_n {
                        m = m.max(dist(i, *j)?);
                    }
                    Ok(global(m as f64))
                }
                SimilarityKind::LeCamMatch => {
                    need_two()?;
                    let h = half(dist(0, 1)?);
                    Ok(0.5 * (-eps * h).exp() - (-eps).exp() * delta * h)
                }
                SimilarityKind::PairwiseAnchor => {
                    let s = pair_sum(&|d| {
                        let h = half(d);
                        (-eps * h).exp() - 2.0 * (-eps).exp() * delta * h
                    })?;
                    Ok(s / (2.0 * nf * nf))
                }
                SimilarityKind::FanoMatch => {
                    if delta != 0.0 {
                        return Err(mismatch(kind, c));
                    }
                    let s = pair_sum(&|d| d as f64)?;
                    Ok(1.0 - (1.0 + eps / (nf * nf) * s) / nf.ln())
                }
            }
        }
    }
}

/// Smallest average test error `(1/N) Σ_i P(Ψ(M(X_i)) ≠ i)` over all test
/// maps, by enumeration. Returns the error and a minimizing map.
fn min_average_error(rows: &[&[f64]]) -> (f64, Vec<usize>) {
    let big_n = rows.len();
    let k = rows[0].len();
    let mut psi = vec![0usize; k];
    let mut best = (f64::INFINITY, psi.clone());
    let total = (big_n as u64).pow(k as u32);
    for _ in 0..total {
        let correct: f64 = (0..k).map(|o| rows[psi[o]][o]).sum();
        let err = 1.0 - correct / big_n as f64;
        if err < best.0 {
            best = (err, psi.clone());
        }
        for slot in psi.iter_mut() {
            *slot += 1;
            if *slot < big_n {
                break;
            }
            *slot = 0;
        }
    }
    best
}

/// Closed form of [`min_average_error`]: `1 − (1/N) Σ_o max_i P(o | X_i)`.
pub fn bayes_average_error(rows: &[&[f64]]) -> f64 {
    let k = rows[0].len();
    let s: f64 = (0..k).map(|o| rows.iter().map(|r| r[o]).fold(0.0, f64::max)).sum();
    1.0 - s / rows.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityWitness {
    pub datasets: Vec<Dataset>,
    /// Test map: output position → hypothesis index.
    pub test: Vec<usize>,
    pub average_error: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCheck {
    pub holds: bool,
    /// Minimum of `average_error − similarity` over all tuples and tests.
    pub worst_gap: f64,
    pub witness: Option<AdmissibilityWitness>,
    pub tuples_checked: u64,
    /// Whether the mechanism itself satisfies the constraint; the
    /// admissibility inequality is only claimed when it does.
    pub mechanism_satisfies_constraint: bool,
}

/// Checks the admissibility inequality for every `N`-tuple of datasets and
/// every test map.
pub fn verify_admissibility(
    m: &FiniteMechanism,
    c: PrivacyConstraint,
    kind: &SimilarityKind,
    hypotheses: usize,
) -> Result<AdmissibilityCheck, VerifyError> {
    c.validate()?;
    if hypotheses < 2 {
        return Err(VerifyError::ArityMismatch("N must be >= 2".into()));
    }
    let nd = m.num_datasets() as u64;
    let work = (hypotheses as u64)
        .checked_mul(nd.checked_pow(hypotheses as u32).unwrap_or(u64::MAX))
        .and_then(|w| w.checked_mul((hypotheses as u64).checked_pow(m.outputs.len() as u32)?))
        .unwrap_or(u64::MAX);
    if work > MAX_ADMISSIBILITY_WORK {
        return Err(VerifyError::TooLarge(format!(
            "admissibility work {work} exceeds {MAX_ADMISSIBILITY_WORK}"
        )));
    }
    let satisfies = m.num_datasets() <= MAX_DATASETS
        && m.outputs.len() <= MAX_OUTPUTS
        && match c {
            PrivacyConstraint::None => true,
            _ => verify_privacy(m, c)?.holds,
        };
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut idx = vec![0usize; hypotheses];
    let tuples = nd.pow(hypotheses as u32);
    for _ in 0..tuples {
        let datasets: Vec<Dataset> = idx.iter().map(|&i| m.dataset(i)).collect();
        let s = similarity(c, kind, &datasets)?;
        let rows: Vec<&[f64]> = idx.iter().map(|&i| m.row(i)).collect();
        let (err, psi) = min_average_error(&rows);
        let gap = err - s;
        if gap < worst {
            worst = gap;
            if gap < -CHECK_SLACK {
                witness = Some(AdmissibilityWitness {
                    datasets,
                    test: psi,
                    average_error: err,
                    similarity: s,
                });
            }
        }
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if (*slot as u64) < nd {
                break;
            }
            *slot = 0;
        }
    }
    Ok(AdmissibilityCheck {
        holds: witness.is_none(),
        worst_gap: worst,
        witness,
        tuples_checked: tuples,
        mechanism_satisfies_constraint: satisfies,
    })
}

/// Coupling used to evaluate the right-hand side of the transport bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportCoupling {
    Independent,
    Maximal,
    ExponentialRaces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledSimilarity {
    pub coupling: TransportCoupling,
    pub expectation: f64,
    /// Monte-Carlo standard error; zero for exact evaluations.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportCheck {
    pub holds: bool,
    /// `min_Ψ max_i P(Ψ(M(X)) ≠ i)` with `X ~ P_i`, exact.
    pub min_max_error: f64,
    pub rhs: Vec<CoupledSimilarity>,
}

/// Options for the Monte-Carlo part of [`verify_transport_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub trials: u64,
    pub seed: u64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            trials: 20_000,
            seed: 0,
        }
    }
}

/// Checks `min_Ψ max_i error_i ≥ E_Q[s(X_1, …, X_N)]` for the independent
/// coupling, the maximal coupling (N = 2) and the exponential-races
/// coupling (Monte-Carlo, allowed 3 standard errors). Marginals are laws on
/// dataset indices. Without privacy the check is the data-processing form
/// of Le Cam: `min_Ψ max_i error_i ≥ (1 − TV(P_1, P_2))/2`.
pub fn verify_transport_bound(
    m: &FiniteMechanism,
    c: PrivacyConstraint,
    kind: &SimilarityKind,
    marginals: &[DiscreteDistribution],
    opts: TransportOptions,
) -> Result<TransportCheck, VerifyError> {
    c.validate()?;
    let big_n = marginals.len();
    if big_n < 2 {
        return Err(VerifyError::ArityMismatch("need at least 2 marginals".into()));
    }
    for p in marginals {
        for &a in p.atoms() {
            if a < 0 || a as usize >= m.num_datasets() {
                return Err(VerifyError::InvalidDataset(format!("marginal atom {a} is not a dataset index")));
            }
        }
    }
    let k = m.outputs.len();
    if (big_n as u64).checked_pow(k as u32).is_none_or(|w| w > MAX_ADMISSIBILITY_WORK) {
        return Err(VerifyError::TooLarge("too many test maps".into()));
    }
    let mixtures: Vec<Vec<f64>> = marginals
        .iter()
        .map(|p| {
            let mut row = vec![0.0; k];
            for (x, w) in p.support() {
                for (r, v) in row.iter_mut().zip(m.row(x as usize)) {
                    *r += w * v;
                }
            }
            row
        })
        .collect();
    // exact min over deterministic tests of the worst-case error
    let mut psi = vec![0usize; k];
    let mut lhs = f64::INFINITY;
    for _ in 0..(big_n as u64).pow(k as u32) {
        let mut worst = 0.0f64;
        for (i, mix) in mixtures.iter().enumerate() {
            let correct: f64 = (0..k).filter(|&o| psi[o] == i).map(|o| mix[o]).sum();
            worst = worst.max(1.0 - correct);
        }
        lhs = lhs.min(worst);
        for slot in psi.iter_mut() {
            *slot += 1;
            if *slot < big_n {
                break;
            }
            *slot = 0;
        }
    }

    if c == PrivacyConstraint::None {
        if big_n != 2 {
            return Err(VerifyError::ArityMismatch("non-private transport check needs N = 2".into()));
        }
        let bound = 0.5 * (1.0 - tv(&marginals[0], &marginals[1]));
        return Ok(TransportCheck {
            holds: lhs >= bound - CHECK_SLACK,
            min_max_error: lhs,
            rhs: vec![CoupledSimilarity {
                coupling: TransportCoupling::Maximal,
                expectation: bound,
                stderr: 0.0,
            }],
        });
    }

    let mut cache: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut sim = |tuple: &[i64]| -> Result<f64, VerifyError> {
        if let Some(v) = cache.get(tuple) {
            return Ok(*v);
        }
        let ds: Vec<Dataset> = tuple.iter().map(|&x| m.dataset(x as usize)).collect();
        let v = similarity(c, kind, &ds)?;
        cache.insert(tuple.to_vec(), v);
        Ok(v)
    };

    let mut rhs = Vec::new();
    // independent coupling, exact
    let supports: Vec<Vec<(i64, f64)>> = marginals.iter().map(|p| p.support().collect()).collect();
    let mut idx = vec![0usize; big_n];
    let mut expectation = 0.0;
    let combos: usize = supports.iter().map(Vec::len).product();
    for _ in 0..combos {
        let tuple: Vec<i64> = (0..big_n).map(|i| supports[i][idx[i]].0).collect();
        let w: f64 = (0..big_n).map(|i| supports[i][idx[i]].1).product();
        expectation += w * sim(&tuple)?;
        for (slot, s) in idx.iter_mut().zip(&supports).rev() {
            *slot += 1;
            if *slot < s.len() {
                break;
            }
            *slot = 0;
        }
    }
    rhs.push(CoupledSimilarity {
        coupling: TransportCoupling::Independent,
        expectation,
        stderr: 0.0,
    });

    if big_n == 2 {
        // maximal coupling, exact joint law
        let (p, q) = (&marginals[0], &marginals[1]);
        let aligned = crate::divergences::aligned_weights(p, q);
        let t = tv(p, q);
        let mut e = 0.0;
        for &(x, a, b) in &aligned {
            let common = a.min(b);
            if common > 0.0 {
                e += common * sim(&[x, x])?;
            }
        }
        if t > 0.0 {
            for &(x, a, b) in &aligned {
                for &(y, a2, b2) in &aligned {
                    let w = (a - b).max(0.0) * (b2 - a2).max(0.0) / t;
                    if w > 0.0 {
                        e += w * sim(&[x, y])?;
                    }
                }
            }
        }
        rhs.push(CoupledSimilarity {
            coupling: TransportCoupling::Maximal,
            expectation: e,
            stderr: 0.0,
        });
    }

    let races = exponential_races(marginals)?;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut out = vec![Vec::with_capacity(1); big_n];
    for t in 0..opts.trials {
        let mut rng = stream_rng(opts.seed, t);
        out.iter_mut().for_each(Vec::clear);
        races.draw_into(&mut rng, &mut out);
        let tuple: Vec<i64> = out.iter().map(|v| v[0]).collect();
        let v = sim(&tuple)?;
        s1 += v;
        s2 += v * v;
    }
    let tf = opts.trials.max(1) as f64;
    let mean = s1 / tf;
    let var = if opts.trials > 1 {
        ((s2 - tf * mean * mean) / (tf - 1.0)).max(0.0)
    } else {
        0.0
    };
    rhs.push(CoupledSimilarity {
        coupling: TransportCoupling::ExponentialRaces,
        expectation: mean,
        stderr: (var / tf).sqrt(),
    });

    let holds = rhs
        .iter()
        .all(|r| lhs >= r.expectation - 3.0 * r.stderr - CHECK_SLACK);
    Ok(TransportCheck {
        holds,
        min_max_error: lhs,
        rhs,
    })
}
