//! Testing lower bounds: classical Le Cam and Fano, their private versions
//! under (ε, δ)-DP and ρ-zCDP, the packing reduction, and the KL-quadratic
//! minimax bounds.
//!
//! Every bound returns the unclamped `raw` value together with the clamped
//! `value` and the identifier of the branch that attains the maximum.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid privacy constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("the product form has no non-private variant; use the joint form")]
    FormMismatch,
    #[error("no branch applies: {0}")]
    NoApplicableBranch(String),
    #[error("outside the domain of the bound: {0}")]
    DomainError(String),
}

/// Privacy condition a mechanism is required to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrivacyConstraint {
    PureDp { epsilon: f64 },
    ApproxDp { epsilon: f64, delta: f64 },
    Zcdp { rho: f64 },
    None,
}

impl PrivacyConstraint {
    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |m: String| Err(BoundsError::InvalidConstraint(m));
        match *self {
            Self::PureDp { epsilon } if !(epsilon > 0.0) => bad(format!("epsilon = {epsilon}")),
            Self::ApproxDp { epsilon, .. } if !(epsilon > 0.0) => bad(format!("epsilon = {epsilon}")),
            Self::ApproxDp { delta, .. } if !(0.0..1.0).contains(&delta) => bad(format!("delta = {delta}")),
            Self::Zcdp { rho } if !(rho > 0.0) => bad(format!("rho = {rho}")),
            _ => Ok(()),
        }
    }

    /// `(ε, δ)` for the DP variants; pure DP maps to `δ = 0`.
    pub fn dp_params(&self) -> Option<(f64, f64)> {
        match *self {
            Self::PureDp { epsilon } => Some((epsilon, 0.0)),
            Self::ApproxDp { epsilon, delta } => Some((epsilon, delta)),
            _ => None,
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match *self {
            Self::Zcdp { rho } => Some(rho),
            _ => None,
        }
    }

    /// Short tag used in reports.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::PureDp { .. } => "pure_dp",
            Self::ApproxDp { .. } => "approx_dp",
            Self::Zcdp { .. } => "zcdp",
            Self::None => "none",
        }
    }
}

/// Whether TV inputs refer to joint laws on `X^n` or to the marginals of
/// product laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestForm {
    Joint,
    Product,
}

/// Identifier of a bound expression. Part of the stable report format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ClassicalLeCam,
    DpLeCamJoint,
    DpLeCamProduct,
    ZcdpLeCamJoint,
    ZcdpLeCamProduct,
    ClassicalFano,
    DpFanoPairwise,
    DpFanoMatch,
    DpFanoProduct,
    DpFanoProductMatch,
    ZcdpFanoJoint,
    ZcdpFanoProduct,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValue {
    pub branch: Branch,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    pub branch: Branch,
    /// Every evaluated branch, in evaluation order.
    pub candidates: Vec<BranchValue>,
    pub n: Option<u64>,
    pub hypotheses: usize,
    pub constraint: PrivacyConstraint,
}

fn clamp01(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Max over candidates; ties keep the earlier branch.
fn best_of(
    candidates: Vec<BranchValue>,
    n: Option<u64>,
    hypotheses: usize,
    constraint: PrivacyConstraint,
) -> BoundResult {
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.raw > best.raw {
            best = *c;
        }
    }
    BoundResult {
        value: clamp01(best.raw),
        raw: best.raw,
        branch: best.branch,
        candidates,
        n,
        hypotheses,
        constraint,
    }
}

fn check_tv(tv: f64) -> Result<(), BoundsError> {
    if !(0.0..=1.0).contains(&tv) {
        return Err(BoundsError::InvalidArgument(format!("tv = {tv} outside [0, 1]")));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<f64, BoundsError> {
    if n == 0 {
        return Err(BoundsError::InvalidArgument("n must be >= 1".into()));
    }
    Ok(n as f64)
}

/// `(1 − tv)/2`.
pub fn le_cam_classical(tv_value: f64) -> Result<BoundResult, BoundsError> {
    check_tv(tv_value)?;
    let c = BranchValue {
        branch: Branch::ClassicalLeCam,
        raw: 0.5 * (1.0 - tv_value),
    };
    Ok(best_of(vec![c], None, 2, PrivacyConstraint::None))
}

/// `1 − (1 + mean KL)/ln N`.
pub fn fano_classical(hypotheses: usize, kls_to_q: &[f64]) -> Result<BoundResult, BoundsError> {
    let raw = classical_fano_raw(hypotheses, kls_to_q)?;
    let c = BranchValue {
        branch: Branch::ClassicalFano,
        raw,
    };
    Ok(best_of(vec![c], None, hypotheses, PrivacyConstraint::None))
}

fn classical_fano_raw(hypotheses: usize, kls: &[f64]) -> Result<f64, BoundsError> {
    if hypotheses < 2 {
        return Err(BoundsError::InvalidArgument("N must be >= 2".into()));
    }
    if kls.len() != hypotheses {
        return Err(BoundsError::ShapeMismatch(format!(
            "{} KL values for N = {hypotheses}",
            kls.len()
        )));
    }
    if kls.iter().any(|k| k.is_nan() || *k < 0.0) {
        return Err(BoundsError::InvalidArgument("KL values must be >= 0".into()));
    }
    let mean = kls.iter().sum::<f64>() / hypotheses as f64;
    Ok(1.0 - (1.0 + mean) / (hypotheses as f64).ln())
}

/// Private Le Cam bound for two hypotheses.
pub fn le_cam_private(
    c: PrivacyConstraint,
    n: u64,
    tv_value: f64,
    form: TestForm,
) -> Result<BoundResult, BoundsError> {
    c.validate()?;
    check_tv(tv_value)?;
    let nf = check_n(n)?;
    let classical = BranchValue {
        branch: Branch::ClassicalLeCam,
        raw: 0.5 * (1.0 - tv_value),
    };
    let candidates = match (c, form) {
        (PrivacyConstraint::None, TestForm::Joint) => vec![classical],
        (PrivacyConstraint::None, TestForm::Product) => return Err(BoundsError::FormMismatch),
        (PrivacyConstraint::Zcdp { rho }, TestForm::Joint) => vec![
            classical,
            BranchValue {
                branch: Branch::ZcdpLeCamJoint,
                raw: 0.5 * (1.0 - nf * (rho / 2.0).sqrt() * tv_value),
            },
        ],
        (PrivacyConstraint::Zcdp { rho }, TestForm::Product) => vec![BranchValue {
            branch: Branch::ZcdpLeCamProduct,
            raw: 0.5 * (1.0 - nf * (rho / 2.0).sqrt() * tv_value),
        }],
        (dp, form) => {
            let (eps, delta) = dp.dp_params().expect("dp constraint");
            let slack = 2.0 * nf * (-eps).exp() * delta;
            match form {
                TestForm::Joint => vec![
                    classical,
                    BranchValue {
                        branch: Branch::DpLeCamJoint,
                        raw: 0.5 * (1.0 - (1.0 - (-nf * eps).exp() + slack) * tv_value),
                    },
                ],
                TestForm::Product => vec![BranchValue {
                    branch: Branch::DpLeCamProduct,
                    raw: 0.5 * ((1.0 - (1.0 - (-eps).exp()) * tv_value).powf(nf) - slack * tv_value),
                }],
            }
        }
    };
    Ok(best_of(candidates, Some(n), 2, c))
}

/// The pairwise disagreement surrogate `2·tv/(1+tv)`.
pub fn disagreement_surrogate(tv_value: f64) -> f64 {
    2.0 * tv_value / (1.0 + tv_value)
}

fn check_tv_matrix(hypotheses: usize, tvs: &[Vec<f64>]) -> Result<(), BoundsError> {
    if hypotheses < 2 {
        return Err(BoundsError::InvalidArgument("N must be >= 2".into()));
    }
    if tvs.len() != hypotheses || tvs.iter().any(|r| r.len() != hypotheses) {
        return Err(BoundsError::ShapeMismatch(format!("tv matrix is not {hypotheses}x{hypotheses}")));
    }
    for (i, row) in tvs.iter().enumerate() {
        if row[i] != 0.0 {
            return Err(BoundsError::InvalidArgument(format!("tv[{i}][{i}] must be 0")));
        }
        for (j, &t) in row.iter().enumerate() {
            check_tv(t)?;
            if (t - tvs[j][i]).abs() > 1e-12 {
                return Err(BoundsError::InvalidArgument(format!("tv matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Private Fano bound for `N` hypotheses. `kls_to_q` enables the classical
/// branch; branches that require `δ = 0` are evaluated only then.
pub fn fano_private(
    c: PrivacyConstraint,
    n: u64,
    hypotheses: usize,
    tvs: &[Vec<f64>],
    kls_to_q: Option<&[f64]>,
    form: TestForm,
) -> Result<BoundResult, BoundsError> {
    c.validate()?;
    let nf = check_n(n)?;
    check_tv_matrix(hypotheses, tvs)?;
    let big_n = hypotheses as f64;
    let ln_n = big_n.ln();
    let ts: Vec<f64> = tvs.iter().flatten().map(|&tv| disagreement_surrogate(tv)).collect();
    let sum_t: f64 = ts.iter().sum();

    let mut candidates = Vec::new();
    if let Some(kls) = kls_to_q {
        candidates.push(BranchValue {
            branch: Branch::ClassicalFano,
            raw: classical_fano_raw(hypotheses, kls)?,
        });
    }
    match (c, form) {
        (PrivacyConstraint::None, TestForm::Product) => return Err(BoundsError::FormMismatch),
        (PrivacyConstraint::None, TestForm::Joint) => {}
        (PrivacyConstraint::Zcdp { rho }, TestForm::Joint) => candidates.push(BranchValue {
            branch: Branch::ZcdpFanoJoint,
            raw: 1.0 - (1.0 + nf * nf * rho / (big_n * big_n) * sum_t) / ln_n,
        }),
        (PrivacyConstraint::Zcdp { rho }, TestForm::Product) => {
            let s: f64 = ts.iter().map(|t| t / nf + t * t).sum();
            candidates.push(BranchValue {
                branch: Branch::ZcdpFanoProduct,
                raw: 1.0 - (1.0 + nf * nf * rho / (big_n * big_n) * s) / ln_n,
            });
        }
        (dp, form) => {
            let (eps, delta) = dp.dp_params().expect("dp constraint");
            let match_raw = 1.0 - (1.0 + nf * eps / (big_n * big_n) * sum_t) / ln_n;
            match form {
                TestForm::Joint => {
                    candidates.push(BranchValue {
                        branch: Branch::DpFanoPairwise,
                        raw: 0.5
                            - (1.0 - (-nf * eps).exp() + 2.0 * nf * (-eps).exp() * delta) / (2.0 * big_n * big_n)
                                * sum_t,
                    });
                    if delta == 0.0 {
                        candidates.push(BranchValue {
                            branch: Branch::DpFanoMatch,
                            raw: match_raw,
                        });
                    }
                }
                TestForm::Product => {
                    let s: f64 = ts
                        .iter()
                        .map(|t| (1.0 - (1.0 - (-eps).exp()) * t).powf(nf) - 2.0 * nf * (-eps).exp() * delta * t)
                        .sum();
                    candidates.push(BranchValue {
                        branch: Branch::DpFanoProduct,
                        raw: s / (2.0 * big_n * big_n),
                    });
                    if delta == 0.0 {
                        candidates.push(BranchValue {
                            branch: Branch::DpFanoProductMatch,
                            raw: match_raw,
                        });
                    }
                }
            }
        }
    }
    if candidates.is_empty() {
        return Err(BoundsError::NoApplicableBranch(
            "non-private Fano needs KL values to a reference law".into(),
        ));
    }
    Ok(best_of(candidates, Some(n), hypotheses, c))
}

/// Minimax risk lower bound `Φ(Ω) · (testing lower bound)`.
pub fn minimax_from_packing(phi_of_omega: f64, test_bound: &BoundResult) -> Result<f64, BoundsError> {
    if !(phi_of_omega >= 0.0) {
        return Err(BoundsError::InvalidArgument(format!("phi(omega) = {phi_of_omega}")));
    }
    Ok(phi_of_omega * test_bound.value)
}

/// Minimax lower bound for models whose KL is at most `γ‖θ₁ − θ₂‖²` and
/// whose parameter space contains a ball of radius `r0` in dimension `d`.
pub fn kl_quadratic_bounds(d: u64, n: u64, gamma: f64, r0: f64, c: PrivacyConstraint) -> Result<f64, BoundsError> {
    c.validate()?;
    let nf = check_n(n)?;
    if d < 66 {
        return Err(BoundsError::DomainError(format!("d = {d} < 66")));
    }
    if !(gamma > 0.0) || !(r0 > 0.0) {
        return Err(BoundsError::InvalidArgument(format!("gamma = {gamma}, r0 = {r0}")));
    }
    let df = d as f64;
    let ball = r0 / df.sqrt();
    let classical = ball.min(1.0 / (64.0 * (nf * gamma).sqrt()));
    let alpha = match c {
        PrivacyConstraint::None => classical,
        PrivacyConstraint::Zcdp { rho } => {
            if rho >= 1.0 {
                return Err(BoundsError::DomainError(format!("rho = {rho} >= 1")));
            }
            let private = ball.min(1.0 / (64.0 * 64.0 * 2.0 * 2f64.sqrt() * nf * (rho * gamma).sqrt()));
            classical.max(private)
        }
        PrivacyConstraint::ApproxDp { delta, .. } if delta > 0.0 => {
            return Err(BoundsError::DomainError("approximate DP with delta > 0 has no KL-quadratic bound".into()))
        }
        dp => {
            let (eps, _) = dp.dp_params().expect("dp constraint");
            let private = ball.min(df.sqrt() / (64.0 * 64.0 * 2f64.sqrt() * nf * eps * gamma.sqrt()));
            classical.max(private)
        }
    };
    Ok(alpha * alpha * df / 32.0)
}
