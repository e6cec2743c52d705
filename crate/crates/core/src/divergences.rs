//! Information divergences on finite distributions and on the Bernoulli,
//! isotropic Gaussian and uniform-support families.
//!
//! All logarithms are natural. Divergences that are infinite (absolute
//! continuity fails) are returned as `f64::INFINITY`, never as errors, so
//! downstream bound formulas can still be evaluated and clamp to zero.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed deviation of the weight total from one at construction.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("distribution needs at least one atom")]
    Empty,
    #[error("atoms ({atoms}) and weights ({weights}) differ in length")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("duplicate atom {0}")]
    DuplicateAtom(i64),
    #[error("weight {0} is negative or not finite")]
    InvalidWeight(f64),
    #[error("weights sum to {0}, not 1 within tolerance")]
    NotNormalized(f64),
    #[error("Rényi order must be > 1, got {0}")]
    InvalidOrder(f64),
    #[error("no closed form for {kind:?} between {family}")]
    UnsupportedPair { kind: DivergenceKind, family: String },
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
}

/// Finite distribution over opaque integer atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<i64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution, renormalizing weights whose total is within
    /// [`NORMALIZATION_TOLERANCE`] of one.
    pub fn new(atoms: Vec<i64>, weights: Vec<f64>) -> Result<Self, DivergenceError> {
        if atoms.is_empty() {
            return Err(DivergenceError::Empty);
        }
        if atoms.len() != weights.len() {
            return Err(DivergenceError::LengthMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &a in &atoms {
            if !seen.insert(a) {
                return Err(DivergenceError::DuplicateAtom(a));
            }
        }
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(DivergenceError::InvalidWeight(w));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DivergenceError::NotNormalized(total));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(atom: i64) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    /// Uniform law on the given distinct atoms.
    pub fn uniform(atoms: Vec<i64>) -> Result<Self, DivergenceError> {
        let k = atoms.len();
        if k == 0 {
            return Err(DivergenceError::Empty);
        }
        Self::new(atoms, vec![1.0 / k as f64; k])
    }

    /// Bernoulli(p) on atoms {0, 1}.
    pub fn bernoulli(p: f64) -> Result<Self, DivergenceError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DivergenceError::InvalidParameter(format!("bernoulli p = {p}")));
        }
        Self::new(vec![0, 1], vec![1.0 - p, p])
    }

    pub fn atoms(&self) -> &[i64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Probability of `atom`; zero for atoms outside the list.
    pub fn prob(&self, atom: i64) -> f64 {
        self.atoms
            .iter()
            .position(|&a| a == atom)
            .map_or(0.0, |i| self.weights[i])
    }

    /// Atoms carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.atoms
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }

    /// Generalized inverse CDF over the atom order as stored.
    pub fn quantile(&self, u: f64) -> i64 {
        let mut acc = 0.0;
        let mut last = self.atoms[0];
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = a;
            if u < acc {
                return a;
            }
        }
        last
    }
}

/// Weight pairs of two distributions over the union of their atoms, in
/// ascending atom order.
pub fn aligned_weights(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Vec<(i64, f64, f64)> {
    let mut map: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for (&a, &w) in p.atoms.iter().zip(&p.weights) {
        map.entry(a).or_default().0 += w;
    }
    for (&a, &w) in q.atoms.iter().zip(&q.weights) {
        map.entry(a).or_default().1 += w;
    }
    map.into_iter().map(|(a, (x, y))| (a, x, y)).collect()
}

/// Total variation distance.
pub fn tv(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let s: f64 = aligned_weights(p, q)
        .iter()
        .map(|(_, a, b)| (a - b).abs())
        .sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Kullback-Leibler divergence KL(p || q).
pub fn kl(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    kl_weights(aligned_weights(p, q).iter().map(|&(_, a, b)| (a, b)))
}

pub(crate) fn kl_weights(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut s = 0.0;
    for (a, b) in pairs {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        s += a * (a / b).ln();
    }
    s.max(0.0)
}

/// Rényi divergence of order `alpha > 1`.
pub fn renyi(alpha: f64, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, DivergenceError> {
    renyi_weights(alpha, aligned_weights(p, q).iter().map(|&(_, a, b)| (a, b)))
}

pub(crate) fn renyi_weights(
    alpha: f64,
    pairs: impl Iterator<Item = (f64, f64)>,
) -> Result<f64, DivergenceError> {
    if !(alpha > 1.0) {
        return Err(DivergenceError::InvalidOrder(alpha));
    }
    if alpha.is_infinite() {
        let mut m = 0.0f64;
        for (a, b) in pairs {
            if a <= 0.0 {
                continue;
            }
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            m = m.max((a / b).ln());
        }
        return Ok(m);
    }
    // log-sum-exp of alpha*ln p + (1-alpha)*ln q
    let mut terms = Vec::new();
    let mut identical = true;
    for (a, b) in pairs {
        identical &= a == b;
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Ok(f64::INFINITY);
        }
        terms.push(alpha * a.ln() + (1.0 - alpha) * b.ln());
    }
    if identical {
        return Ok(0.0);
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    Ok((lse / (alpha - 1.0)).max(0.0))
}

/// Which divergence a closed form is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceKind {
    Tv,
    Kl,
}

/// Parametric families with closed-form divergences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClosedFormFamily {
    Bernoulli { p: f64 },
    IsotropicGaussian { mean: Vec<f64>, sigma: f64 },
    UniformSupport { theta: f64 },
}

impl ClosedFormFamily {
    pub fn validate(&self) -> Result<(), DivergenceError> {
        match self {
            Self::Bernoulli { p } if !(*p > 0.0 && *p < 1.0) => {
                Err(DivergenceError::InvalidParameter(format!("bernoulli p = {p}")))
            }
            Self::IsotropicGaussian { mean, sigma } if mean.is_empty() || !(*sigma > 0.0) => Err(
                DivergenceError::InvalidParameter(format!("gaussian d = {}, sigma = {sigma}", mean.len())),
            ),
            Self::UniformSupport { theta } if !(*theta > 0.0 && *theta <= 1.0) => {
                Err(DivergenceError::InvalidParameter(format!("uniform theta = {theta}")))
            }
            _ => Ok(()),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Bernoulli { .. } => "Bernoulli",
            Self::IsotropicGaussian { .. } => "IsotropicGaussian",
            Self::UniformSupport { .. } => "UniformSupport",
        }
    }
}

/// Divergence between the `n`-fold products of `a` and `b`.
///
/// Supported pairs: Bernoulli KL and TV (TV of the product is computed from
/// the binomial laws of the sufficient statistic), Gaussian KL, and uniform
/// support TV.
pub fn closed_form(
    kind: DivergenceKind,
    a: &ClosedFormFamily,
    b: &ClosedFormFamily,
    n: u64,
) -> Result<f64, DivergenceError> {
    a.validate()?;
    b.validate()?;
    if n == 0 {
        return Err(DivergenceError::InvalidParameter("n must be >= 1".into()));
    }
    let unsupported = || DivergenceError::UnsupportedPair {
        kind,
        family: format!("{} and {}", a.name(), b.name()),
    };
    use ClosedFormFamily::*;
    match (kind, a, b) {
        (DivergenceKind::Kl, Bernoulli { p: t1 }, Bernoulli { p: t2 }) => {
            let single = t1 * (t1 / t2).ln() + (1.0 - t1) * ((1.0 - t1) / (1.0 - t2)).ln();
            Ok(tensorize_kl(single.max(0.0), n))
        }
        (DivergenceKind::Tv, Bernoulli { p: t1 }, Bernoulli { p: t2 }) => Ok(bernoulli_product_tv(*t1, *t2, n)),
        (
            DivergenceKind::Kl,
            IsotropicGaussian { mean: m1, sigma: s1 },
            IsotropicGaussian { mean: m2, sigma: s2 },
        ) => {
            if m1.len() != m2.len() || s1 != s2 {
                return Err(unsupported());
            }
            let sq: f64 = m1.iter().zip(m2).map(|(x, y)| (y - x).powi(2)).sum();
            Ok(tensorize_kl(sq / (2.0 * s1 * s1), n))
        }
        (DivergenceKind::Tv, UniformSupport { theta: t1 }, UniformSupport { theta: t2 }) => {
            let ratio = t1.min(*t2) / t1.max(*t2);
            Ok(1.0 - ratio.powf(n as f64))
        }
        _ => Err(unsupported()),
    }
}

fn bernoulli_product_tv(p: f64, q: f64, n: u64) -> f64 {
    if p == q {
        return 0.0;
    }
    if n == 1 {
        return (p - q).abs();
    }
    let nf = n as f64;
    let mut ln_choose = 0.0f64;
    let mut s = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        if k > 0 {
            ln_choose += ((nf - kf + 1.0) / kf).ln();
        }
        let lp = ln_choose + kf * p.ln() + (nf - kf) * (1.0 - p).ln();
        let lq = ln_choose + kf * q.ln() + (nf - kf) * (1.0 - q).ln();
        s += (lp.exp() - lq.exp()).abs();
    }
    (0.5 * s).clamp(0.0, 1.0)
}

/// Pinsker upper bound on TV from a KL value, clamped to 1.
pub fn pinsker_tv_upper(kl_value: f64) -> f64 {
    (kl_value.max(0.0) / 2.0).sqrt().min(1.0)
}

/// KL of n-fold products from the single-sample KL.
pub fn tensorize_kl(kl_value: f64, n: u64) -> f64 {
    if kl_value == 0.0 {
        return 0.0;
    }
    n as f64 * kl_value
}
