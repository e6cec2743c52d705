//! Private estimators: Laplace and Gaussian mean mechanisms, randomized
//! response, and DP-SGML (noisy projected stochastic gradient ascent on the
//! log-likelihood).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verify::{rr_keep_probability, FiniteMechanism, VerifyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("outside the domain: {0}")]
    DomainError(String),
    #[error("privacy budget too small: rho·n² = {budget} must exceed d·e = {needed}")]
    InsufficientBudget { budget: f64, needed: f64 },
    #[error("gradient is not finite at iteration {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// Closed convex parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParameterSpace {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl ParameterSpace {
    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<(), MechanismError> {
        match self {
            Self::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(MechanismError::DomainError("box needs lo < hi in every coordinate".into()));
                }
            }
            Self::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(MechanismError::DomainError("ball needs d >= 1 and radius > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        match self {
            Self::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *x >= a - tol && *x <= b + tol),
            Self::Ball { center, radius } => {
                let r2: f64 = point.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum();
                r2.sqrt() <= radius + tol
            }
        }
    }

    /// A point in the interior.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Self::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Self::Ball { center, .. } => center.clone(),
        }
    }
}

/// Euclidean projection onto the space.
pub fn project(space: &ParameterSpace, point: &[f64]) -> Vec<f64> {
    match space {
        ParameterSpace::Box { lo, hi } => point
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(x, (a, b))| x.clamp(*a, *b))
            .collect(),
        ParameterSpace::Ball { center, radius } => {
            let r: f64 = point.iter().zip(center).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt();
            if r <= *radius {
                point.to_vec()
            } else {
                point.iter().zip(center).map(|(x, c)| c + (x - c) * radius / r).collect()
            }
        }
    }
}

/// Regularity constants of a log-likelihood in its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// Strong concavity.
    pub lambda: f64,
    /// Smoothness.
    pub beta: f64,
    /// Lipschitz constant enforced on per-sample gradients by clipping.
    pub lipschitz: f64,
    /// KL-quadratic coefficient: `KL(P_a || P_b) ≤ γ‖a − b‖²`.
    pub gamma: f64,
}

/// Estimation family with a differentiable log-likelihood.
pub trait ParametricModel: Send + Sync {
    fn dim(&self) -> usize;
    fn space(&self) -> &ParameterSpace;
    fn constants(&self) -> ModelConstants;
    fn sample(&self, theta: &[f64], n: usize, rng: &mut dyn rand::RngCore) -> Vec<Vec<f64>>;
    fn loglik(&self, x: &[f64], theta: &[f64]) -> f64;
    fn grad(&self, x: &[f64], theta: &[f64]) -> Vec<f64>;
}

/// `N(θ, σ²I_d)` with unknown mean, `f(x, θ) = −‖x − θ‖²/(2σ²)` up to a
/// constant. Here `λ = β = 1/σ²` and `γ = β/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMean {
    pub sigma: f64,
    pub space: ParameterSpace,
    pub clip: f64,
}

impl GaussianMean {
    pub fn new(sigma: f64, space: ParameterSpace, clip: f64) -> Result<Self, MechanismError> {
        space.validate()?;
        if !(sigma > 0.0) || !(clip > 0.0) {
            return Err(MechanismError::DomainError(format!("sigma = {sigma}, clip = {clip}")));
        }
        Ok(Self { sigma, space, clip })
    }
}

impl ParametricModel for GaussianMean {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn constants(&self) -> ModelConstants {
        let beta = 1.0 / (self.sigma * self.sigma);
        ModelConstants {
            lambda: beta,
            beta,
            lipschitz: self.clip,
            gamma: beta / 2.0,
        }
    }

    fn sample(&self, theta: &[f64], n: usize, rng: &mut dyn rand::RngCore) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                theta
                    .iter()
                    .map(|t| {
                        let z: f64 = StandardNormal.sample(rng);
                        t + self.sigma * z
                    })
                    .collect()
            })
            .collect()
    }

    fn loglik(&self, x: &[f64], theta: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(theta).map(|(a, b)| (a - b).powi(2)).sum();
        -sq / (2.0 * self.sigma * self.sigma)
    }

    fn grad(&self, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let s2 = self.sigma * self.sigma;
        x.iter().zip(theta).map(|(a, b)| (a - b) / s2).collect()
    }
}

fn check_unit_data(data: &[f64]) -> Result<f64, MechanismError> {
    if data.is_empty() {
        return Err(MechanismError::DomainError("no data".into()));
    }
    if let Some(x) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(MechanismError::DomainError(format!("data value {x} outside [0, 1]")));
    }
    Ok(data.iter().sum::<f64>() / data.len() as f64)
}

/// Laplace(0, b) by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// `mean(data) + Laplace(1/(nε))`; ε-DP for data in `[0, 1]`.
pub fn laplace_mean<R: Rng + ?Sized>(data: &[f64], epsilon: f64, rng: &mut R) -> Result<f64, MechanismError> {
    let mean = check_unit_data(data)?;
    if !(epsilon > 0.0) {
        return Err(MechanismError::DomainError(format!("epsilon = {epsilon}")));
    }
    let scale = 1.0 / (data.len() as f64 * epsilon);
    if scale == 0.0 {
        return Ok(mean);
    }
    Ok(mean + sample_laplace(rng, scale))
}

/// `mean(data) + (2/(n√ρ))·N(0, 1)`.
pub fn gaussian_mean<R: Rng + ?Sized>(data: &[f64], rho: f64, rng: &mut R) -> Result<f64, MechanismError> {
    let mean = check_unit_data(data)?;
    if !(rho > 0.0) {
        return Err(MechanismError::DomainError(format!("rho = {rho}")));
    }
    let scale = 2.0 / (data.len() as f64 * rho.sqrt());
    if scale == 0.0 {
        return Ok(mean);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + scale * z)
}

/// Keeps `bit` with probability `e^ε/(1+e^ε)`, flips it otherwise.
pub fn randomized_response<R: Rng + ?Sized>(bit: u8, epsilon: f64, rng: &mut R) -> Result<u8, MechanismError> {
    if bit > 1 {
        return Err(MechanismError::DomainError(format!("bit = {bit}")));
    }
    if !(epsilon > 0.0) {
        return Err(MechanismError::DomainError(format!("epsilon = {epsilon}")));
    }
    let keep = rng.random::<f64>() < rr_keep_probability(epsilon);
    Ok(if keep { bit } else { 1 - bit })
}

/// The 2×2 kernel of [`randomized_response`].
pub fn randomized_response_kernel(epsilon: f64) -> Result<FiniteMechanism, MechanismError> {
    Ok(FiniteMechanism::randomized_response(epsilon)?)
}

/// How DP-SGML draws its batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSampling {
    /// `m` indices uniformly with replacement.
    WithReplacement,
    /// Every sample once per step (deterministic gradient).
    Full,
}

/// Starting point of DP-SGML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "theta", rename_all = "snake_case")]
pub enum Init {
    /// Projection of `N(0, 2σ²/λ · I_d)`.
    Gaussian,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpsgmlConfig {
    pub sigma2_noise: f64,
    pub k: usize,
    pub eta: f64,
    pub m: usize,
    pub rho: f64,
    pub clip: f64,
    pub lambda: f64,
    pub batch: BatchSampling,
    pub init: Init,
}

/// Calibration giving ρ-zCDP: `σ² = 4L²/(ρλn²)`, `η = 1/(2β)`,
/// `K = ⌈(2β/λ)·ln(ρn²/d)⌉`.
pub fn dp_sgml_config(
    n: usize,
    d: usize,
    rho: f64,
    constants: ModelConstants,
    m: usize,
) -> Result<DpsgmlConfig, MechanismError> {
    if n == 0 || d == 0 || m == 0 {
        return Err(MechanismError::DomainError("n, d and m must be >= 1".into()));
    }
    if !(rho > 0.0) {
        return Err(MechanismError::DomainError(format!("rho = {rho}")));
    }
    let ModelConstants {
        lambda, beta, lipschitz, ..
    } = constants;
    if !(lambda > 0.0 && lambda <= beta && lipschitz > 0.0) {
        return Err(MechanismError::DomainError("need 0 < lambda <= beta and L > 0".into()));
    }
    let nf = n as f64;
    let budget = rho * nf * nf;
    let needed = d as f64 * std::f64::consts::E;
    if budget <= needed {
        return Err(MechanismError::InsufficientBudget { budget, needed });
    }
    let k = ((2.0 * beta / lambda) * (budget / d as f64).ln()).ceil().max(1.0) as usize;
    Ok(DpsgmlConfig {
        sigma2_noise: 4.0 * lipschitz * lipschitz / (rho * lambda * nf * nf),
        k,
        eta: 1.0 / (2.0 * beta),
        m,
        rho,
        clip: lipschitz,
        lambda,
        batch: BatchSampling::WithReplacement,
        init: Init::Gaussian,
    })
}

fn clip_into(g: &mut [f64], clip: f64) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > clip {
        let s = clip / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Average clipped gradient over the given sample indices.
fn batch_gradient<M: ParametricModel + ?Sized>(
    data: &[Vec<f64>],
    model: &M,
    theta: &[f64],
    idx: impl Iterator<Item = usize>,
    clip: f64,
) -> Vec<f64> {
    let mut acc = vec![0.0; theta.len()];
    let mut count = 0usize;
    for i in idx {
        let mut g = model.grad(&data[i], theta);
        clip_into(&mut g, clip);
        for (a, v) in acc.iter_mut().zip(&g) {
            *a += v;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count.max(1) as f64);
    acc
}

/// Runs DP-SGML and returns `θ_K`.
pub fn dp_sgml<M: ParametricModel + ?Sized, R: Rng + ?Sized>(
    data: &[Vec<f64>],
    model: &M,
    cfg: &DpsgmlConfig,
    rng: &mut R,
) -> Result<Vec<f64>, MechanismError> {
    if data.is_empty() {
        return Err(MechanismError::DomainError("no data".into()));
    }
    let d = model.dim();
    let space = model.space();
    let mut theta = match &cfg.init {
        Init::Fixed(t) => {
            if t.len() != d {
                return Err(MechanismError::DomainError("initial point has the wrong dimension".into()));
            }
            project(space, t)
        }
        Init::Gaussian => {
            let sd = (2.0 * cfg.sigma2_noise / cfg.lambda).sqrt();
            let raw: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect();
            project(space, &raw)
        }
    };
    let noise_sd = (2.0 * cfg.eta).sqrt() * cfg.sigma2_noise.sqrt();
    let n = data.len();
    for step in 0..cfg.k {
        let g = match cfg.batch {
            BatchSampling::Full => batch_gradient(data, model, &theta, 0..n, cfg.clip),
            BatchSampling::WithReplacement => {
                let idx: Vec<usize> = (0..cfg.m).map(|_| rng.random_range(0..n)).collect();
                batch_gradient(data, model, &theta, idx.into_iter(), cfg.clip)
            }
        };
        if g.iter().any(|x| !x.is_finite()) {
            return Err(MechanismError::NonFinite(step));
        }
        let next: Vec<f64> = theta
            .iter()
            .zip(&g)
            .map(|(t, gi)| {
                let z: f64 = if noise_sd > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
                t + cfg.eta * gi + noise_sd * z
            })
            .collect();
        theta = project(space, &next);
    }
    Ok(theta)
}

/// Maximum-likelihood estimate by projected full-batch gradient ascent
/// (unclipped) with step `1/β`, stopped when a step moves less than `tol`.
pub fn maximum_likelihood<M: ParametricModel + ?Sized>(data: &[Vec<f64>], model: &M, tol: f64) -> Vec<f64> {
    let beta = model.constants().beta;
    let mut theta = model.space().center();
    for _ in 0..100_000 {
        let g = batch_gradient(data, model, &theta, 0..data.len(), f64::INFINITY);
        let next = project(model.space(), &theta.iter().zip(&g).map(|(t, gi)| t + gi / beta).collect::<Vec<_>>());
        let moved: f64 = next.iter().zip(&theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        theta = next;
        if moved < tol {
            break;
        }
    }
    theta
}

/// Monte-Carlo estimate of `ξ² = E_B ‖∇l_B(θ_ML)‖²` with its standard error.
pub fn estimate_xi2<M: ParametricModel + ?Sized, R: Rng + ?Sized>(
    data: &[Vec<f64>],
    model: &M,
    theta_ml: &[f64],
    m: usize,
    trials: usize,
    rng: &mut R,
) -> (f64, f64) {
    let n = data.len();
    let clip = model.constants().lipschitz;
    let mut vals = Vec::with_capacity(trials);
    for _ in 0..trials {
        let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        let g = batch_gradient(data, model, theta_ml, idx.into_iter(), clip);
        vals.push(g.iter().map(|x| x * x).sum::<f64>());
    }
    mean_stderr(&vals)
}

pub(crate) fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let t = vals.len() as f64;
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let mean = vals.iter().sum::<f64>() / t;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn gm(d: usize) -> GaussianMean {
        GaussianMean::new(
            1.0,
            ParameterSpace::Ball {
                center: vec![0.0; d],
                radius: 10.0,
            },
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn projections() {
        let ball = ParameterSpace::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert_eq!(project(&ball, &[0.3, 0.1]), vec![0.3, 0.1]);
        assert_eq!(project(&ball, &[2.0, 0.0]), vec![1.0, 0.0]);
        let unit_box = ParameterSpace::Box {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        assert_eq!(project(&unit_box, &[-1.0, 0.5]), vec![0.0, 0.5]);
    }

    #[test]
    fn laplace_and_gaussian_means() {
        let mut rng = stream_rng(1, 0);
        let data = vec![0.0, 1.0, 1.0, 0.0];
        assert_eq!(laplace_mean(&data, f64::INFINITY, &mut rng).unwrap(), 0.5);
        assert_eq!(gaussian_mean(&data, f64::INFINITY, &mut rng).unwrap(), 0.5);
        assert!(laplace_mean(&[1.5], 1.0, &mut rng).is_err());
        // unbiasedness for n = 1
        let draws: Vec<f64> = (0..100_000).map(|_| laplace_mean(&[1.0], 1.0, &mut rng).unwrap()).collect();
        let (m, se) = mean_stderr(&draws);
        assert!((m - 1.0).abs() <= 3.0 * se);
    }

    #[test]
    fn rr_keep_rates() {
        assert_abs_diff_eq!(rr_keep_probability(3f64.ln()), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(rr_keep_probability(1e-12), 0.5, epsilon = 1e-12);
        let mut rng = stream_rng(2, 0);
        let kept = (0..40_000)
            .filter(|_| randomized_response(1, 3f64.ln(), &mut rng).unwrap() == 1)
            .count() as f64
            / 40_000.0;
        assert!((kept - 0.75).abs() < 0.01);
    }

    #[test]
    fn dpsgml_config_example() {
        let c = ModelConstants {
            lambda: 1.0,
            beta: 1.0,
            lipschitz: 1.0,
            gamma: 0.5,
        };
        let cfg = dp_sgml_config(100, 5, 0.1, c, 10).unwrap();
        assert_abs_diff_eq!(cfg.sigma2_noise, 0.004, epsilon = 1e-15);
        assert_eq!(cfg.eta, 0.5);
        assert_eq!(cfg.k, 11);
        let cfg2 = dp_sgml_config(200, 5, 0.1, c, 10).unwrap();
        assert_abs_diff_eq!(cfg2.sigma2_noise * 4.0, cfg.sigma2_noise, epsilon = 1e-15);
        assert!(matches!(
            dp_sgml_config(10, 5, 0.1, c, 10),
            Err(MechanismError::InsufficientBudget { .. })
        ));
    }

    #[test]
    fn zero_noise_recovers_sample_mean() {
        let model = gm(5);
        let mut rng = stream_rng(5, 0);
        let data = model.sample(&[1.0, -0.5, 0.0, 2.0, 0.3], 300, &mut rng);
        let mean: Vec<f64> = (0..5).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / 300.0).collect();
        let mut cfg = dp_sgml_config(300, 5, 1.0, model.constants(), 64).unwrap();
        cfg.sigma2_noise = 0.0;
        cfg.k = 200;
        cfg.batch = BatchSampling::Full;
        cfg.init = Init::Fixed(vec![0.0; 5]);
        let theta = dp_sgml(&data, &model, &cfg, &mut rng).unwrap();
        for (a, b) in theta.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn dpsgml_is_deterministic_and_in_space() {
        let model = gm(3);
        let data = model.sample(&[0.0; 3], 100, &mut stream_rng(9, 0));
        let cfg = dp_sgml_config(100, 3, 0.01, model.constants(), 16).unwrap();
        let a = dp_sgml(&data, &model, &cfg, &mut stream_rng(4, 1)).unwrap();
        let b = dp_sgml(&data, &model, &cfg, &mut stream_rng(4, 1)).unwrap();
        assert_eq!(a, b);
        assert!(model.space().contains(&a, 1e-12));
    }

    #[test]
    fn xi2_vanishes_on_constant_data() {
        let model = gm(2);
        let data = vec![vec![0.5, -0.5]; 20];
        let (xi2, _) = estimate_xi2(&data, &model, &[0.5, -0.5], 4, 100, &mut stream_rng(0, 0));
        assert_eq!(xi2, 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = gm(3);
        let x = [0.3, -1.2, 2.0];
        let theta = [0.1, 0.4, -0.7];
        let g = model.grad(&x, &theta);
        for j in 0..3 {
            let mut tp = theta;
            let mut tm = theta;
            tp[j] += 1e-5;
            tm[j] -= 1e-5;
            let fd = (model.loglik(&x, &tp) - model.loglik(&x, &tm)) / 2e-5;
            assert!((fd - g[j]).abs() <= 1e-4 * g[j].abs().max(1.0));
        }
    }

    #[test]
    fn gamma_matches_gaussian_kl() {
        use crate::divergences::{closed_form, ClosedFormFamily, DivergenceKind};
        let model = GaussianMean::new(
            2.0,
            ParameterSpace::Ball {
                center: vec![0.0; 2],
                radius: 5.0,
            },
            1.0,
        )
        .unwrap();
        let a = vec![0.3, 1.0];
        let b = vec![-0.2, 0.5];
        let kl = closed_form(
            DivergenceKind::Kl,
            &ClosedFormFamily::IsotropicGaussian { mean: a.clone(), sigma: 2.0 },
            &ClosedFormFamily::IsotropicGaussian { mean: b.clone(), sigma: 2.0 },
            1,
        )
        .unwrap();
        let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        assert_abs_diff_eq!(kl, model.constants().gamma * sq, epsilon = 1e-15);
    }
}
