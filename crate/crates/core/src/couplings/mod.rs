//! Couplings of finite distributions and their disagreement probabilities.
//!
//! A [`CouplingSampler`] is an immutable description; every draw takes an
//! explicit generator. Monte-Carlo estimates give trial `t` its own stream
//! `(seed, t)` and reduce integer counts, so the result does not depend on
//! the number of worker threads.

mod simplex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergences::{aligned_weights, DiscreteDistribution, DivergenceError};
use crate::rng::{stream_rng, StreamRng};

pub use simplex::{minimize as simplex_minimize, LpSolution, SimplexError};

/// Largest joint support accepted by [`min_disagreement_lp`].
pub const LP_JOINT_CAP: usize = 10_000;

/// Trials handled per parallel work item.
const CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("degenerate marginal: {0}")]
    DegenerateMarginal(String),
    #[error("expected {expected} marginals, got {got}")]
    Arity { expected: String, got: usize },
    #[error("joint support of size {size} exceeds the cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("linear program failed: {0:?}")]
    Lp(SimplexError),
    #[error("trials must be >= 1")]
    NoTrials,
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

/// Construction used by a sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingKind {
    MaximalPair,
    SharedUniformBernoulli,
    ExponentialRaces,
    ProductLift { base: Box<CouplingSampler>, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Plan {
    Maximal {
        overlap: f64,
        common: DiscreteDistribution,
        rest_p: Option<DiscreteDistribution>,
        rest_q: Option<DiscreteDistribution>,
    },
    Shared { ps: Vec<f64> },
    Races { atoms: Vec<i64>, weights: Vec<Vec<f64>> },
    Lift,
}

/// Joint law with prescribed marginals, realized as a sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSampler {
    marginals: Vec<DiscreteDistribution>,
    kind: CouplingKind,
    plan: Plan,
}

fn normalized(pairs: Vec<(i64, f64)>) -> Option<DiscreteDistribution> {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return None;
    }
    let (atoms, weights): (Vec<i64>, Vec<f64>) = pairs.into_iter().map(|(a, w)| (a, w / total)).unzip();
    // renormalize exactly so construction never rejects rounding residue
    let s: f64 = weights.iter().sum();
    DiscreteDistribution::new(atoms, weights.into_iter().map(|w| w / s).collect()).ok()
}

/// Maximal coupling of two distributions: disagreement probability equals
/// their total variation distance.
pub fn maximal_pair(p: &DiscreteDistribution, q: &DiscreteDistribution) -> CouplingSampler {
    let aligned = aligned_weights(p, q);
    let overlap: f64 = aligned.iter().map(|&(_, a, b)| a.min(b)).sum();
    let common = normalized(aligned.iter().map(|&(x, a, b)| (x, a.min(b))).collect());
    let rest_p = normalized(aligned.iter().map(|&(x, a, b)| (x, (a - b).max(0.0))).collect());
    let rest_q = normalized(aligned.iter().map(|&(x, a, b)| (x, (b - a).max(0.0))).collect());
    CouplingSampler {
        marginals: vec![p.clone(), q.clone()],
        kind: CouplingKind::MaximalPair,
        plan: Plan::Maximal {
            overlap: overlap.min(1.0),
            common: common.unwrap_or_else(|| p.clone()),
            rest_p,
            rest_q,
        },
    }
}

/// Couples Bernoulli laws through one shared uniform: `X_i = 1{U < p_i}`.
pub fn shared_uniform_bernoulli(ps: &[f64]) -> Result<CouplingSampler, CouplingError> {
    if ps.is_empty() {
        return Err(CouplingError::Arity {
            expected: ">= 1".into(),
            got: 0,
        });
    }
    let mut marginals = Vec::with_capacity(ps.len());
    for &p in ps {
        if !(p > 0.0 && p < 1.0) {
            return Err(CouplingError::DegenerateMarginal(format!("bernoulli p = {p}")));
        }
        marginals.push(DiscreteDistribution::bernoulli(p)?);
    }
    Ok(CouplingSampler {
        marginals,
        kind: CouplingKind::SharedUniformBernoulli,
        plan: Plan::Shared { ps: ps.to_vec() },
    })
}

/// Exponential-races coupling: one Exp(1) clock per atom, shared by all
/// marginals; marginal `i` picks the atom minimizing `T_x / p_i(x)`.
pub fn exponential_races(ps: &[DiscreteDistribution]) -> Result<CouplingSampler, CouplingError> {
    if ps.len() < 2 {
        return Err(CouplingError::Arity {
            expected: ">= 2".into(),
            got: ps.len(),
        });
    }
    let mut atoms: Vec<i64> = ps.iter().flat_map(|p| p.support().map(|(a, _)| a)).collect();
    atoms.sort_unstable();
    atoms.dedup();
    let weights: Vec<Vec<f64>> = ps.iter().map(|p| atoms.iter().map(|&a| p.prob(a)).collect()).collect();
    for (i, w) in weights.iter().enumerate() {
        if w.iter().all(|&x| x <= 0.0) {
            return Err(CouplingError::DegenerateMarginal(format!("marginal {i} has no mass")));
        }
    }
    Ok(CouplingSampler {
        marginals: ps.to_vec(),
        kind: CouplingKind::ExponentialRaces,
        plan: Plan::Races { atoms, weights },
    })
}

/// `n` independent copies of `base`, component-wise.
pub fn product_lift(base: CouplingSampler, n: usize) -> Result<CouplingSampler, CouplingError> {
    if n == 0 {
        return Err(CouplingError::DegenerateMarginal("product lift needs n >= 1".into()));
    }
    Ok(CouplingSampler {
        marginals: base.marginals.clone(),
        kind: CouplingKind::ProductLift {
            base: Box::new(base),
            n,
        },
        plan: Plan::Lift,
    })
}

impl CouplingSampler {
    /// Single-coordinate marginals (for a product lift, those of one copy).
    pub fn marginals(&self) -> &[DiscreteDistribution] {
        &self.marginals
    }

    pub fn kind(&self) -> &CouplingKind {
        &self.kind
    }

    pub fn arity(&self) -> usize {
        self.marginals.len()
    }

    /// Coordinates per component: 1, or `n` for a product lift.
    pub fn coordinates(&self) -> usize {
        match &self.kind {
            CouplingKind::ProductLift { base, n } => n * base.coordinates(),
            _ => 1,
        }
    }

    /// One joint draw: component `i` is a vector of [`Self::coordinates`] atoms.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::with_capacity(self.coordinates()); self.arity()];
        self.draw_into(rng, &mut out);
        out
    }

    /// Appends one joint draw to `out`, which must hold `arity()` vectors.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Vec<i64>]) {
        match &self.plan {
            Plan::Maximal {
                overlap,
                common,
                rest_p,
                rest_q,
            } => {
                let u: f64 = rng.random();
                match (rest_p, rest_q) {
                    (Some(rp), Some(rq)) if u >= *overlap => {
                        out[0].push(rp.sample(rng));
                        out[1].push(rq.sample(rng));
                    }
                    _ => {
                        let x = common.sample(rng);
                        out[0].push(x);
                        out[1].push(x);
                    }
                }
            }
            Plan::Shared { ps } => {
                let u: f64 = rng.random();
                for (o, &p) in out.iter_mut().zip(ps) {
                    o.push(i64::from(u < p));
                }
            }
            Plan::Races { atoms, weights } => {
                let clocks: Vec<f64> = atoms.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                for (o, w) in out.iter_mut().zip(weights) {
                    let mut best = f64::INFINITY;
                    let mut arg = 0;
                    for (k, (&t, &wk)) in clocks.iter().zip(w).enumerate() {
                        if wk > 0.0 {
                            let s = t / wk;
                            if s < best {
                                best = s;
                                arg = k;
                            }
                        }
                    }
                    o.push(atoms[arg]);
                }
            }
            Plan::Lift => {
                if let CouplingKind::ProductLift { base, n } = &self.kind {
                    for _ in 0..*n {
                        base.draw_into(rng, out);
                    }
                }
            }
        }
    }
}

/// Monte-Carlo estimates of pairwise disagreement probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementMatrix {
    pub estimates: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub trials: u64,
}

/// Pairwise Hamming statistics of a (lifted) coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingMatrix {
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub trials: u64,
}

/// Per-pair integer sums over a trial range, reduced in fixed chunk order.
fn pair_sums<F>(s: &CouplingSampler, trials: u64, seed: u64, stat: F) -> Vec<(u64, u64)>
where
    F: Fn(&[i64], &[i64]) -> u64 + Sync,
{
    let k = s.arity();
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Vec<(u64, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![(0u64, 0u64); k * k];
            let mut out = vec![Vec::with_capacity(s.coordinates()); k];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng: StreamRng = stream_rng(seed, t);
                out.iter_mut().for_each(Vec::clear);
                s.draw_into(&mut rng, &mut out);
                for i in 0..k {
                    for j in i + 1..k {
                        let v = stat(&out[i], &out[j]);
                        acc[i * k + j].0 += v;
                        acc[i * k + j].1 += v * v;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![(0u64, 0u64); k * k];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    total
}

/// Estimates `P(X_i ≠ X_j)` (whole vectors for a product lift).
pub fn estimate_disagreement(s: &CouplingSampler, trials: u64, seed: u64) -> Result<DisagreementMatrix, CouplingError> {
    if trials == 0 {
        return Err(CouplingError::NoTrials);
    }
    let k = s.arity();
    let sums = pair_sums(s, trials, seed, |a, b| u64::from(a != b));
    let mut estimates = vec![vec![0.0; k]; k];
    let mut stderr = vec![vec![0.0; k]; k];
    let tf = trials as f64;
    for i in 0..k {
        for j in i + 1..k {
            let p = sums[i * k + j].0 as f64 / tf;
            let se = (p * (1.0 - p) / tf).sqrt();
            estimates[i][j] = p;
            estimates[j][i] = p;
            stderr[i][j] = se;
            stderr[j][i] = se;
        }
    }
    Ok(DisagreementMatrix {
        estimates,
        stderr,
        trials,
    })
}

/// Estimates the mean Hamming distance between components.
pub fn estimate_hamming(s: &CouplingSampler, trials: u64, seed: u64) -> Result<HammingMatrix, CouplingError> {
    if trials == 0 {
        return Err(CouplingError::NoTrials);
    }
    let k = s.arity();
    let sums = pair_sums(s, trials, seed, |a, b| a.iter().zip(b).filter(|(x, y)| x != y).count() as u64);
    let mut mean = vec![vec![0.0; k]; k];
    let mut stderr = vec![vec![0.0; k]; k];
    let tf = trials as f64;
    for i in 0..k {
        for j in i + 1..k {
            let (s1, s2) = sums[i * k + j];
            let m = s1 as f64 / tf;
            let var = if trials > 1 {
                ((s2 as f64 - tf * m * m) / (tf - 1.0)).max(0.0)
            } else {
                0.0
            };
            let se = (var / tf).sqrt();
            mean[i][j] = m;
            mean[j][i] = m;
            stderr[i][j] = se;
            stderr[j][i] = se;
        }
    }
    Ok(HammingMatrix { mean, stderr, trials })
}

/// L1 distance between each component's empirical law (pooled over
/// coordinates) and its declared marginal.
pub fn marginal_l1_errors(s: &CouplingSampler, draws: u64, seed: u64) -> Result<Vec<f64>, CouplingError> {
    if draws == 0 {
        return Err(CouplingError::NoTrials);
    }
    let k = s.arity();
    let mut atoms: Vec<i64> = s.marginals.iter().flat_map(|m| m.atoms().iter().copied()).collect();
    atoms.sort_unstable();
    atoms.dedup();
    let index = |a: i64| atoms.binary_search(&a).expect("draw outside declared atoms");
    let chunks = draws.div_ceil(CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; k * atoms.len()];
            let mut out = vec![Vec::with_capacity(s.coordinates()); k];
            for t in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                let mut rng = stream_rng(seed, t);
                out.iter_mut().for_each(Vec::clear);
                s.draw_into(&mut rng, &mut out);
                for (i, o) in out.iter().enumerate() {
                    for &a in o {
                        counts[i * atoms.len() + index(a)] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; k * atoms.len()];
    for p in partial {
        for (t, v) in counts.iter_mut().zip(p) {
            *t += v;
        }
    }
    let total = (draws * s.coordinates() as u64) as f64;
    Ok((0..k)
        .map(|i| {
            atoms
                .iter()
                .enumerate()
                .map(|(a_idx, &a)| (counts[i * atoms.len() + a_idx] as f64 / total - s.marginals[i].prob(a)).abs())
                .sum()
        })
        .collect())
}

/// Exact agreement probability `P(X_i = X_j)` of the exponential-races
/// coupling for two marginals.
pub fn races_pairwise_agreement(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let aligned = aligned_weights(p, q);
    let mut total = 0.0;
    for &(_, px, qx) in &aligned {
        if px <= 0.0 || qx <= 0.0 {
            continue;
        }
        let denom: f64 = aligned.iter().map(|&(_, py, qy)| (py / px).max(qy / qx)).sum();
        total += 1.0 / denom;
    }
    total.min(1.0)
}

/// Upper bound `2·tv/(1+tv)` on pairwise disagreement of a good
/// multi-marginal coupling.
pub fn races_disagreement_bound(tv_value: f64) -> f64 {
    2.0 * tv_value / (1.0 + tv_value)
}

/// Joint atom tuples with their probabilities.
pub type JointLaw = Vec<(Vec<i64>, f64)>;

/// Exact minimum of `Σ_{i<j} P(X_i ≠ X_j)` over all couplings.
pub fn min_disagreement_lp(ps: &[DiscreteDistribution]) -> Result<f64, CouplingError> {
    Ok(min_disagreement_coupling(ps)?.0)
}

/// Optimal value together with the optimal joint law as
/// `(joint atom tuple, probability)` pairs with positive mass.
pub fn min_disagreement_coupling(ps: &[DiscreteDistribution]) -> Result<(f64, JointLaw), CouplingError> {
    if ps.len() < 2 {
        return Err(CouplingError::Arity {
            expected: ">= 2".into(),
            got: ps.len(),
        });
    }
    let supports: Vec<Vec<(i64, f64)>> = ps.iter().map(|p| p.support().collect()).collect();
    let mut size: usize = 1;
    for s in &supports {
        size = size.saturating_mul(s.len());
        if size > LP_JOINT_CAP {
            return Err(CouplingError::TooLarge {
                size,
                cap: LP_JOINT_CAP,
            });
        }
    }
    // enumerate joint atoms in mixed-radix order
    let k = ps.len();
    let mut joint: Vec<Vec<usize>> = Vec::with_capacity(size);
    let mut idx = vec![0usize; k];
    for _ in 0..size {
        joint.push(idx.clone());
        for pos in (0..k).rev() {
            idx[pos] += 1;
            if idx[pos] < supports[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    let cost: Vec<f64> = joint
        .iter()
        .map(|ix| {
            let mut c = 0usize;
            for i in 0..k {
                for j in i + 1..k {
                    if supports[i][ix[i]].0 != supports[j][ix[j]].0 {
                        c += 1;
                    }
                }
            }
            c as f64
        })
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, s) in supports.iter().enumerate() {
        for (ai, &(_, w)) in s.iter().enumerate() {
            a.push(joint.iter().map(|ix| if ix[i] == ai { 1.0 } else { 0.0 }).collect());
            b.push(w);
        }
    }
    let sol = simplex::minimize(&a, &b, &cost).map_err(CouplingError::Lp)?;
    let law = joint
        .iter()
        .zip(&sol.x)
        .filter(|(_, &x)| x > 1e-15)
        .map(|(ix, &x)| ((0..k).map(|i| supports[i][ix[i]].0).collect(), x))
        .collect();
    Ok((sol.objective, law))
}
