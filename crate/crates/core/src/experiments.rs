//! Monte-Carlo risk studies: empirical risks of estimators and private
//! mechanisms next to evaluated lower-bound curves, log-log rate slopes, and
//! the DP-SGML near-optimality ratio.
//!
//! Every trial draws from its own stream `cell_trial_rng(seed, stream, t)`
//! and per-trial losses are reduced sequentially in trial order, so reports
//! are bitwise identical for any worker count.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{kl_quadratic_bounds, le_cam_private, BoundsError, PrivacyConstraint, TestForm};
use crate::divergences::{closed_form, ClosedFormFamily, DivergenceError, DivergenceKind};
use crate::mechanisms::{
    dp_sgml, dp_sgml_config, estimate_xi2, gaussian_mean, laplace_mean, maximum_likelihood, mean_stderr,
    MechanismError, ParametricModel,
};
use crate::rng::{cell_trial_rng, derive_seed, stream_rng, StreamRng};

/// Smallest accepted trial count.
pub const MIN_TRIALS: usize = 100;
/// Share of the analytic risk that must come from the privacy term for a
/// cell to count as privacy-dominated in slope fits.
pub const PRIVACY_DOMINATED_SHARE: f64 = 0.8;
/// Batch draws used for each cell's ξ² estimate.
pub const XI2_TRIALS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("outside the valid regime: {0}")]
    RegimeError(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    /// Mean squared loss.
    pub risk: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    pub n: usize,
    pub constraint: PrivacyConstraint,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Mean over `trials` of `‖estimator(rng) − θ*‖²`. The estimator draws the
/// data and runs the mechanism; trial `t` uses `cell_trial_rng(seed, stream, t)`.
pub fn monte_carlo_risk<F>(
    theta_star: &[f64],
    n: usize,
    constraint: PrivacyConstraint,
    trials: usize,
    seed: u64,
    stream: u64,
    estimator: F,
) -> Result<RiskEstimate, ExperimentError>
where
    F: Fn(&mut StreamRng) -> Result<Vec<f64>, ExperimentError> + Sync,
{
    if trials < MIN_TRIALS {
        return Err(ExperimentError::InvalidArgument(format!("trials = {trials} < {MIN_TRIALS}")));
    }
    let losses: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = cell_trial_rng(seed, stream, t);
            let est = estimator(&mut rng)?;
            if est.len() != theta_star.len() {
                return Err(ExperimentError::InvalidArgument("estimate has the wrong dimension".into()));
            }
            Ok(squared_distance(&est, theta_star))
        })
        .collect::<Result<_, _>>()?;
    let (risk, stderr) = mean_stderr(&losses);
    Ok(RiskEstimate {
        risk,
        stderr,
        trials,
        seed,
        n,
        constraint,
    })
}

/// Least-squares slope of `ln risk` against `ln n`.
pub fn rate_slope(points: &[(f64, f64)]) -> Result<f64, ExperimentError> {
    if points.len() < 3 {
        return Err(ExperimentError::DegenerateInput(format!("{} points, need 3", points.len())));
    }
    if let Some(p) = points.iter().find(|(n, r)| !(*n > 0.0) || !(*r > 0.0)) {
        return Err(ExperimentError::DegenerateInput(format!("non-positive point {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExperimentError::DegenerateInput("all abscissae equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult {
    pub mechanism: String,
    pub risk: RiskEstimate,
    /// Closed-form risk where known.
    pub analytic: Option<f64>,
    /// Whether the mechanism satisfies the cell's constraint; only those
    /// are held to the cell's lower bounds.
    pub satisfies_constraint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub value: f64,
    pub branch: String,
    /// False for rate expressions without proven constants; those are
    /// reported but not used in the sanity check.
    pub rigorous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n: usize,
    pub constraint: PrivacyConstraint,
    pub mechanisms: Vec<MechanismResult>,
    /// The first entry is the cell's headline lower bound.
    pub bounds: Vec<BoundEntry>,
    pub extras: BTreeMap<String, f64>,
}

impl Cell {
    pub fn lower_bound(&self) -> Option<&BoundEntry> {
        self.bounds.first()
    }

    pub fn bound(&self, name: &str) -> Option<&BoundEntry> {
        self.bounds.iter().find(|b| b.name == name)
    }

    pub fn mechanism(&self, name: &str) -> Option<&MechanismResult> {
        self.mechanisms.iter().find(|m| m.mechanism == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub name: String,
    /// Abscissa of the fit (`n` or `rho`).
    pub against: String,
    pub points: Vec<(f64, f64)>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ns: Vec<usize>,
    pub constraints: Vec<PrivacyConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub cell: usize,
    pub n: usize,
    pub mechanism: String,
    pub bound: String,
    pub risk: f64,
    pub stderr: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub grid: Grid,
    pub trials: usize,
    pub seed: u64,
    pub cells: Vec<Cell>,
    pub slopes: Vec<Slope>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

/// One flat row per cell × mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub model: String,
    pub n: usize,
    pub constraint_kind: String,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub mechanism: String,
    pub risk: f64,
    pub stderr: f64,
    pub lower_bound: Option<f64>,
    pub branch: Option<String>,
}

impl ExperimentReport {
    #[allow(clippy::too_many_arguments)]
    fn new(
        model: &str,
        parameters: BTreeMap<String, serde_json::Value>,
        grid: Grid,
        trials: usize,
        seed: u64,
        cells: Vec<Cell>,
        slopes: Vec<Slope>,
        notes: Vec<String>,
    ) -> Self {
        let mut report = Self {
            model: model.to_string(),
            parameters,
            grid,
            trials,
            seed,
            cells,
            slopes,
            violations: Vec::new(),
            notes,
        };
        report.violations = report.find_violations();
        report
    }

    /// Cells where a mechanism satisfying the constraint has empirical risk
    /// below a rigorous lower bound by more than three standard errors.
    pub fn find_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, cell) in self.cells.iter().enumerate() {
            for m in cell.mechanisms.iter().filter(|m| m.satisfies_constraint) {
                for b in cell.bounds.iter().filter(|b| b.rigorous) {
                    if m.risk.risk < b.value - 3.0 * m.risk.stderr {
                        out.push(Violation {
                            cell: i,
                            n: cell.n,
                            mechanism: m.mechanism.clone(),
                            bound: b.name.clone(),
                            risk: m.risk.risk,
                            stderr: m.risk.stderr,
                            value: b.value,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn sanity_holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn slope(&self, name: &str) -> Option<&Slope> {
        self.slopes.iter().find(|s| s.name == name)
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for cell in &self.cells {
            let (eps, delta, rho) = match cell.constraint {
                PrivacyConstraint::PureDp { epsilon } => (Some(epsilon), Some(0.0), None),
                PrivacyConstraint::ApproxDp { epsilon, delta } => (Some(epsilon), Some(delta), None),
                PrivacyConstraint::Zcdp { rho } => (None, None, Some(rho)),
                PrivacyConstraint::None => (None, None, None),
            };
            let lb = cell.lower_bound();
            for m in &cell.mechanisms {
                rows.push(CsvRow {
                    model: self.model.clone(),
                    n: cell.n,
                    constraint_kind: cell.constraint.kind_name().to_string(),
                    eps,
                    delta,
                    rho,
                    mechanism: m.mechanism.clone(),
                    risk: m.risk.risk,
                    stderr: m.risk.stderr,
                    lower_bound: lb.map(|b| b.value),
                    branch: lb.map(|b| b.branch.clone()),
                });
            }
        }
        rows
    }
}

/// Label used in slope names, e.g. `pure_dp(eps=0.1)`.
fn constraint_label(c: &PrivacyConstraint) -> String {
    match *c {
        PrivacyConstraint::PureDp { epsilon } => format!("pure_dp(eps={epsilon})"),
        PrivacyConstraint::ApproxDp { epsilon, delta } => format!("approx_dp(eps={epsilon},delta={delta})"),
        PrivacyConstraint::Zcdp { rho } => format!("zcdp(rho={rho})"),
        PrivacyConstraint::None => "none".to_string(),
    }
}

/// Pure ε for `PureDp` and for `ApproxDp` with δ = 0.
fn pure_epsilon(c: &PrivacyConstraint) -> Option<f64> {
    match c.dp_params() {
        Some((eps, 0.0)) => Some(eps),
        _ => None,
    }
}

fn check_common(ns: &[usize], constraints: &[PrivacyConstraint], trials: usize) -> Result<(), ExperimentError> {
    if ns.is_empty() || constraints.is_empty() {
        return Err(ExperimentError::InvalidArgument("empty grid".into()));
    }
    if trials < MIN_TRIALS {
        return Err(ExperimentError::InvalidArgument(format!("trials = {trials} < {MIN_TRIALS}")));
    }
    for c in constraints {
        c.validate()?;
    }
    Ok(())
}

fn stream_id(cell: usize, mechanism: usize) -> u64 {
    ((cell as u64) << 8) | mechanism as u64
}

/// Slopes over `n` for every (mechanism, constraint) series with at least
/// three cells, plus `privacy_dominated` variants over cells selected by
/// `dominated`.
fn n_slopes(cells: &[Cell], dominated: impl Fn(&Cell, &MechanismResult) -> bool) -> Vec<Slope> {
    // (all points, privacy-dominated points) per (mechanism, constraint label)
    type Points = Vec<(f64, f64)>;
    let mut series: BTreeMap<(String, String), (Points, Points)> = BTreeMap::new();
    for cell in cells {
        for m in &cell.mechanisms {
            let e = series
                .entry((m.mechanism.clone(), constraint_label(&cell.constraint)))
                .or_default();
            let p = (cell.n as f64, m.risk.risk);
            e.0.push(p);
            if dominated(cell, m) {
                e.1.push(p);
            }
        }
    }
    let mut out = Vec::new();
    for ((mech, label), (all, dom)) in series {
        if let Ok(v) = rate_slope(&all) {
            out.push(Slope {
                name: format!("{mech}:{label}"),
                against: "n".into(),
                points: all,
                value: v,
            });
        }
        if let Ok(v) = rate_slope(&dom) {
            out.push(Slope {
                name: format!("{mech}:{label}:privacy_dominated"),
                against: "n".into(),
                points: dom,
                value: v,
            });
        }
    }
    out
}

fn bernoulli_sample_mean<R: Rng + ?Sized>(rng: &mut R, theta: f64, n: usize) -> (Vec<f64>, f64) {
    let data: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < theta { 1.0 } else { 0.0 }).collect();
    let mean = data.iter().sum::<f64>() / n as f64;
    (data, mean)
}

/// Bernoulli model at `θ* = 1/2`. Each cell runs the mechanism matching its
/// constraint: the empirical mean (none), the Laplace mechanism (pure DP)
/// or the Gaussian mechanism (zCDP). The headline lower bound is the
/// two-point Le Cam constant `1/(160n)`, `1/(80(nε)²)` or `1/(64n²ρ)`; the
/// bound evaluated with the exact TV of the same packing is reported next to it.
pub fn run_bernoulli(
    ns: &[usize],
    constraints: &[PrivacyConstraint],
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport, ExperimentError> {
    check_common(ns, constraints, trials)?;
    let theta = 0.5;
    let mut cells = Vec::new();
    for c in constraints {
        for &n in ns {
            let nf = n as f64;
            let base_var = theta * (1.0 - theta) / nf;
            let cell_idx = cells.len();
            let (alpha, constant, form, mech_name, privacy_var): (f64, f64, TestForm, &str, f64) = match *c {
                PrivacyConstraint::None => {
                    if n < 4 {
                        return Err(ExperimentError::RegimeError(format!("n = {n} < 4")));
                    }
                    (1.0 / nf.sqrt(), 1.0 / (160.0 * nf), TestForm::Joint, "empirical_mean", 0.0)
                }
                PrivacyConstraint::Zcdp { rho } => {
                    if nf * rho.sqrt() < 2.0 {
                        return Err(ExperimentError::RegimeError(format!("n·sqrt(rho) = {} < 2", nf * rho.sqrt())));
                    }
                    (
                        1.0 / (nf * rho.sqrt()),
                        1.0 / (64.0 * nf * nf * rho),
                        TestForm::Product,
                        "gaussian_mean",
                        4.0 / (nf * nf * rho),
                    )
                }
                ref dp => {
                    let eps = pure_epsilon(dp).ok_or_else(|| {
                        ExperimentError::RegimeError("approximate DP with delta > 0 has no Bernoulli constant".into())
                    })?;
                    if nf * eps < 2.0 {
                        return Err(ExperimentError::RegimeError(format!("n·eps = {} < 2", nf * eps)));
                    }
                    (
                        1.0 / (nf * eps),
                        1.0 / (80.0 * (nf * eps).powi(2)),
                        TestForm::Product,
                        "laplace_mean",
                        2.0 / (nf * eps).powi(2),
                    )
                }
            };
            // packing θ₁ = (1+α)/2, θ₂ = 1/2 with Ω = α/4
            let t1 = (1.0 + alpha) / 2.0;
            let tv = match form {
                TestForm::Joint => closed_form(
                    DivergenceKind::Tv,
                    &ClosedFormFamily::Bernoulli { p: t1 },
                    &ClosedFormFamily::Bernoulli { p: theta },
                    n as u64,
                )?,
                TestForm::Product => alpha / 2.0,
            };
            let exact = le_cam_private(*c, n as u64, tv, form)?;
            let phi = (alpha / 4.0).powi(2);
            let bounds = vec![
                BoundEntry {
                    name: "lower_bound".into(),
                    value: constant,
                    branch: exact.branch.to_string(),
                    rigorous: true,
                },
                BoundEntry {
                    name: "le_cam_exact_tv".into(),
                    value: phi * exact.value,
                    branch: exact.branch.to_string(),
                    rigorous: true,
                },
            ];
            let constraint = *c;
            let risk = monte_carlo_risk(&[theta], n, constraint, trials, seed, stream_id(cell_idx, 0), |rng| {
                let (data, mean) = bernoulli_sample_mean(rng, theta, n);
                let est = match constraint {
                    PrivacyConstraint::None => mean,
                    PrivacyConstraint::Zcdp { rho } => gaussian_mean(&data, rho, rng)?,
                    ref dp => laplace_mean(&data, pure_epsilon(dp).expect("checked above"), rng)?,
                };
                Ok(vec![est])
            })?;
            let mut extras = BTreeMap::new();
            extras.insert("alpha".into(), alpha);
            extras.insert("privacy_share".into(), privacy_var / (base_var + privacy_var));
            cells.push(Cell {
                n,
                constraint,
                mechanisms: vec![MechanismResult {
                    mechanism: mech_name.into(),
                    risk,
                    analytic: Some(base_var + privacy_var),
                    satisfies_constraint: true,
                }],
                bounds,
                extras,
            });
        }
    }
    let slopes = n_slopes(&cells, |cell, _| {
        !matches!(cell.constraint, PrivacyConstraint::None)
            && cell.extras["privacy_share"] >= PRIVACY_DOMINATED_SHARE - 1e-12
    });
    let mut params = BTreeMap::new();
    params.insert("theta_star".into(), serde_json::json!(theta));
    Ok(ExperimentReport::new(
        "bernoulli",
        params,
        Grid {
            ns: ns.to_vec(),
            constraints: constraints.to_vec(),
        },
        trials,
        seed,
        cells,
        slopes,
        vec![format!(
            "privacy_dominated slopes use cells whose analytic privacy share is at least {PRIVACY_DOMINATED_SHARE}"
        )],
    ))
}

/// Isotropic Gaussian mean `N(θ, σ²I_d)` with `θ* = 0`, empirical mean
/// estimator (risk `σ²d/n`). Lower bounds come from the KL-quadratic
/// packing bound with `γ = 1/(2σ²)` on `Θ = ℝ^d`; cells with `d < 66` carry
/// risks only.
pub fn run_gaussian(
    d: usize,
    sigma: f64,
    ns: &[usize],
    constraints: &[PrivacyConstraint],
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport, ExperimentError> {
    check_common(ns, constraints, trials)?;
    if d == 0 || !(sigma > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!("d = {d}, sigma = {sigma}")));
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let theta = vec![0.0; d];
    let mut cells = Vec::new();
    let mut notes = Vec::new();
    if d < 66 {
        notes.push(format!("d = {d} < 66: lower bounds not evaluated"));
    }
    for c in constraints {
        for &n in ns {
            let cell_idx = cells.len();
            let mut bounds = Vec::new();
            if d >= 66 {
                let v = kl_quadratic_bounds(d as u64, n as u64, gamma, f64::INFINITY, *c)?;
                bounds.push(BoundEntry {
                    name: "lower_bound".into(),
                    value: v,
                    branch: format!("kl_quadratic_{}", c.kind_name()),
                    rigorous: true,
                });
            }
            let risk = monte_carlo_risk(&theta, n, *c, trials, seed, stream_id(cell_idx, 0), |rng| {
                let mut acc = vec![0.0; d];
                for _ in 0..n {
                    for a in acc.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *a += sigma * z;
                    }
                }
                Ok(acc.into_iter().map(|a| a / n as f64).collect())
            })?;
            let mut extras = BTreeMap::new();
            extras.insert("gamma".into(), gamma);
            cells.push(Cell {
                n,
                constraint: *c,
                mechanisms: vec![MechanismResult {
                    mechanism: "empirical_mean".into(),
                    risk,
                    analytic: Some(sigma * sigma * d as f64 / n as f64),
                    satisfies_constraint: matches!(c, PrivacyConstraint::None),
                }],
                bounds,
                extras,
            });
        }
    }
    let slopes = n_slopes(&cells, |_, _| false);
    let mut params = BTreeMap::new();
    params.insert("d".into(), serde_json::json!(d));
    params.insert("sigma".into(), serde_json::json!(sigma));
    Ok(ExperimentReport::new(
        "gaussian",
        params,
        Grid {
            ns: ns.to_vec(),
            constraints: constraints.to_vec(),
        },
        trials,
        seed,
        cells,
        slopes,
        notes,
    ))
}

/// `U([0, θ])` with `θ* = 1` and the estimator `max X`. Headline bounds are
/// the two-point constants `e^{−1}/(8n²)`, `e^{−1}/(8(nε)²)` and
/// `(1 − 1/√2)/(8n²ρ)`; the Le Cam bound with exact uniform TV on the same
/// packing is reported as `le_cam_exact_tv`. No private estimator is run.
pub fn run_uniform(
    ns: &[usize],
    constraints: &[PrivacyConstraint],
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport, ExperimentError> {
    check_common(ns, constraints, trials)?;
    let theta = 1.0;
    let e_inv = (-1.0f64).exp();
    let mut cells = Vec::new();
    for c in constraints {
        for &n in ns {
            let nf = n as f64;
            let cell_idx = cells.len();
            let (gap, constant, form) = match *c {
                PrivacyConstraint::None => (1.0 / nf, e_inv / (8.0 * nf * nf), TestForm::Joint),
                PrivacyConstraint::Zcdp { rho } => {
                    if nf * rho.sqrt() <= 1.0 {
                        return Err(ExperimentError::RegimeError(format!("n·sqrt(rho) = {} <= 1", nf * rho.sqrt())));
                    }
                    (
                        1.0 / (nf * rho.sqrt()),
                        (1.0 - 1.0 / 2f64.sqrt()) / (8.0 * nf * nf * rho),
                        TestForm::Product,
                    )
                }
                ref dp => {
                    let eps = pure_epsilon(dp).ok_or_else(|| {
                        ExperimentError::RegimeError("approximate DP with delta > 0 has no uniform constant".into())
                    })?;
                    if nf * eps <= 1.0 {
                        return Err(ExperimentError::RegimeError(format!("n·eps = {} <= 1", nf * eps)));
                    }
                    (1.0 / (nf * eps), e_inv / (8.0 * (nf * eps).powi(2)), TestForm::Product)
                }
            };
            // packing θ₁ = 1 − gap, θ₂ = 1 with Ω = gap/2
            let t1 = ClosedFormFamily::UniformSupport { theta: theta - gap };
            let t2 = ClosedFormFamily::UniformSupport { theta };
            let samples = if form == TestForm::Joint { n as u64 } else { 1 };
            let tv = closed_form(DivergenceKind::Tv, &t1, &t2, samples)?;
            let exact = le_cam_private(*c, n as u64, tv, form)?;
            let phi = (gap / 2.0).powi(2);
            let bounds = vec![
                BoundEntry {
                    name: "lower_bound".into(),
                    value: constant,
                    branch: exact.branch.to_string(),
                    rigorous: true,
                },
                BoundEntry {
                    name: "le_cam_exact_tv".into(),
                    value: phi * exact.value,
                    branch: exact.branch.to_string(),
                    rigorous: true,
                },
            ];
            let risk = monte_carlo_risk(&[theta], n, *c, trials, seed, stream_id(cell_idx, 0), |rng| {
                let m = (0..n).map(|_| theta * rng.random::<f64>()).fold(0.0, f64::max);
                Ok(vec![m])
            })?;
            let mut extras = BTreeMap::new();
            extras.insert("packing_gap".into(), gap);
            extras.insert("tv".into(), tv);
            cells.push(Cell {
                n,
                constraint: *c,
                mechanisms: vec![MechanismResult {
                    mechanism: "max_estimator".into(),
                    risk,
                    analytic: Some(2.0 * theta * theta / ((nf + 1.0) * (nf + 2.0))),
                    satisfies_constraint: matches!(c, PrivacyConstraint::None),
                }],
                bounds,
                extras,
            });
        }
    }
    let slopes = n_slopes(&cells, |_, _| false);
    let mut params = BTreeMap::new();
    params.insert("theta_star".into(), serde_json::json!(theta));
    Ok(ExperimentReport::new(
        "uniform",
        params,
        Grid {
            ns: ns.to_vec(),
            constraints: constraints.to_vec(),
        },
        trials,
        seed,
        cells,
        slopes,
        vec![
            "private lower bounds scale as 1/(n eps)^2 and 1/(n^2 rho): any decrease of eps or rho degrades the 1/n^2 rate"
                .into(),
            "no private estimator is run for this model; max_estimator is non-private".into(),
        ],
    ))
}

/// DP-SGML on `model` at `θ*` for every `(n, ρ)` of the grid, with the
/// calibrated configuration and batch size `m`. Reports the DP-SGML risk,
/// the risk of the exact maximum-likelihood estimate, ξ², the rate-form
/// lower bound `max(d/(n²βρ), d/(nβ))` and the ratio of the two.
pub fn run_dpsgml<M: ParametricModel>(
    model: &M,
    theta_star: &[f64],
    ns: &[usize],
    rhos: &[f64],
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport, ExperimentError> {
    let constraints: Vec<PrivacyConstraint> = rhos.iter().map(|&rho| PrivacyConstraint::Zcdp { rho }).collect();
    check_common(ns, &constraints, trials)?;
    let d = model.dim();
    if theta_star.len() != d || !model.space().contains(theta_star, 0.0) {
        return Err(ExperimentError::InvalidArgument("theta_star must be a point of the parameter space".into()));
    }
    let consts = model.constants();
    let mut cells = Vec::new();
    for &rho in rhos {
        for &n in ns {
            let cfg = dp_sgml_config(n, d, rho, consts, m)?;
            let cell_idx = cells.len();
            let c = PrivacyConstraint::Zcdp { rho };
            let nf = n as f64;
            let draw = |rng: &mut StreamRng| model.sample(theta_star, n, rng);
            let risk = monte_carlo_risk(theta_star, n, c, trials, seed, stream_id(cell_idx, 0), |rng| {
                let data = draw(rng);
                Ok(dp_sgml(&data, model, &cfg, rng)?)
            })?;
            let ml = monte_carlo_risk(theta_star, n, c, trials, seed, stream_id(cell_idx, 1), |rng| {
                let data = draw(rng);
                Ok(maximum_likelihood(&data, model, 1e-10))
            })?;
            let data0 = draw(&mut cell_trial_rng(seed, stream_id(cell_idx, 2), 0));
            let theta_ml = maximum_likelihood(&data0, model, 1e-10);
            let (xi2, xi2_se) = estimate_xi2(
                &data0,
                model,
                &theta_ml,
                m,
                XI2_TRIALS,
                &mut stream_rng(derive_seed(seed, stream_id(cell_idx, 3)), 0),
            );
            let lb_private = d as f64 / (nf * nf * consts.beta * rho);
            let lb_stat = d as f64 / (nf * consts.beta);
            let (lb, branch) = if lb_private >= lb_stat {
                (lb_private, "rate_private")
            } else {
                (lb_stat, "rate_statistical")
            };
            let mut extras = BTreeMap::new();
            extras.insert("ratio".into(), risk.risk / lb);
            extras.insert("xi2".into(), xi2);
            extras.insert("xi2_stderr".into(), xi2_se);
            extras.insert("sigma2_noise".into(), cfg.sigma2_noise);
            extras.insert("k".into(), cfg.k as f64);
            extras.insert("eta".into(), cfg.eta);
            cells.push(Cell {
                n,
                constraint: c,
                mechanisms: vec![
                    MechanismResult {
                        mechanism: "dp_sgml".into(),
                        risk,
                        analytic: None,
                        satisfies_constraint: true,
                    },
                    MechanismResult {
                        mechanism: "maximum_likelihood".into(),
                        risk: ml,
                        analytic: None,
                        satisfies_constraint: false,
                    },
                ],
                bounds: vec![BoundEntry {
                    name: "lower_bound".into(),
                    value: lb,
                    branch: branch.into(),
                    rigorous: false,
                }],
                extras,
            });
        }
    }
    let mut slopes = n_slopes(&cells, |_, _| false);
    // slopes against rho at fixed n
    for &n in ns {
        let pts: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.n == n)
            .map(|c| (c.constraint.rho().expect("zcdp"), c.mechanisms[0].risk.risk))
            .collect();
        if let Ok(v) = rate_slope(&pts) {
            slopes.push(Slope {
                name: format!("dp_sgml:n={n}:vs_rho"),
                against: "rho".into(),
                points: pts,
                value: v,
            });
        }
    }
    let ratios: Vec<f64> = cells.iter().map(|c| c.extras["ratio"]).collect();
    let ratio_spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mut params = BTreeMap::new();
    params.insert("d".into(), serde_json::json!(d));
    params.insert("theta_star".into(), serde_json::json!(theta_star));
    params.insert("m".into(), serde_json::json!(m));
    params.insert("constants".into(), serde_json::to_value(consts).expect("plain struct"));
    params.insert("ratio_spread".into(), serde_json::json!(ratio_spread));
    Ok(ExperimentReport::new(
        "dpsgml",
        params,
        Grid { ns: ns.to_vec(), constraints },
        trials,
        seed,
        cells,
        slopes,
        vec!["lower_bound is the rate expression max(d/(n^2 beta rho), d/(n beta)) without constants".into()],
    ))
}
