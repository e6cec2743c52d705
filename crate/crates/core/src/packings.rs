//! Packings of the parameter space: two-point packings and randomized
//! Varshamov–Gilbert binary codes scaled into parameter space.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanisms::ParameterSpace;
use crate::rng::{derive_seed, stream_rng};

/// Candidate draws per greedy attempt.
pub const VG_DRAW_BUDGET: u64 = 1_000_000;
/// Attempts (each with a freshly derived seed) before giving up.
pub const VG_RESTARTS: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PackingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("greedy code construction exhausted its budget: {found} of {target} words")]
    BudgetExhausted { found: usize, target: usize },
    #[error("point {0} lies outside the parameter space")]
    OutOfSpace(usize),
}

/// Ceiling that ignores floating-point noise just above an integer.
fn robust_ceil(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

/// `⌈e^{ζ²d/2}⌉`.
pub fn vg_target_size(d: usize, zeta: f64) -> usize {
    robust_ceil((zeta * zeta * d as f64 / 2.0).exp()).max(1.0) as usize
}

/// `⌈(1/2 − ζ)d⌉`.
pub fn vg_min_distance(d: usize, zeta: f64) -> usize {
    robust_ceil((0.5 - zeta) * d as f64).max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCode {
    pub d: usize,
    pub words: Vec<Vec<u8>>,
    pub zeta: f64,
    /// Guaranteed pairwise distance `⌈(1/2 − ζ)d⌉`.
    pub min_distance: usize,
    /// Smallest pairwise distance actually realized (`d` for one word).
    pub realized_min_distance: usize,
}

impl BinaryCode {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Smallest pairwise Hamming distance, recomputed from the words.
    pub fn pairwise_min_distance(&self) -> usize {
        let mut m = self.d;
        for i in 0..self.words.len() {
            for j in i + 1..self.words.len() {
                let h = self.words[i].iter().zip(&self.words[j]).filter(|(a, b)| a != b).count();
                m = m.min(h);
            }
        }
        m
    }
}

fn limbs(d: usize) -> usize {
    d.div_ceil(64)
}

fn random_word<R: Rng>(rng: &mut R, d: usize) -> Vec<u64> {
    let mut w: Vec<u64> = (0..limbs(d)).map(|_| rng.random()).collect();
    if !d.is_multiple_of(64) {
        let last = w.len() - 1;
        w[last] &= (1u64 << (d % 64)) - 1;
    }
    w
}

fn distance(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

/// Randomized greedy Varshamov–Gilbert code: uniform candidate words are
/// kept when they are far enough from every kept word, until the target
/// size is reached.
pub fn varshamov_gilbert(d: usize, zeta: f64, seed: u64) -> Result<BinaryCode, PackingError> {
    if d == 0 {
        return Err(PackingError::InvalidArgument("d must be >= 1".into()));
    }
    if !(zeta > 0.0 && zeta < 0.5) {
        return Err(PackingError::InvalidArgument(format!("zeta = {zeta} outside (0, 1/2)")));
    }
    let target = vg_target_size(d, zeta);
    let min_distance = vg_min_distance(d, zeta);
    let mut best = 0;
    for attempt in 0..VG_RESTARTS {
        let mut rng = stream_rng(derive_seed(seed, attempt), 0);
        let mut kept: Vec<Vec<u64>> = Vec::with_capacity(target);
        let mut draws = 0;
        while kept.len() < target && draws < VG_DRAW_BUDGET {
            draws += 1;
            let w = random_word(&mut rng, d);
            if kept.iter().all(|k| distance(k, &w) >= min_distance) {
                kept.push(w);
            }
        }
        if kept.len() == target {
            let mut realized = d;
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    realized = realized.min(distance(&kept[i], &kept[j]));
                }
            }
            let words = kept
                .iter()
                .map(|w| (0..d).map(|b| ((w[b / 64] >> (b % 64)) & 1) as u8).collect())
                .collect();
            return Ok(BinaryCode {
                d,
                words,
                zeta,
                min_distance,
                realized_min_distance: realized,
            });
        }
        best = best.max(kept.len());
    }
    Err(PackingError::BudgetExhausted { found: best, target })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|θ₁ − θ₂|` on one-dimensional parameters.
    AbsDiff,
    Euclidean,
}

impl Metric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::AbsDiff => (a[0] - b[0]).abs(),
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// Parameters pairwise at least `2Ω` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub points: Vec<Vec<f64>>,
    pub omega: f64,
    pub metric: Metric,
}

impl Packing {
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                m = m.min(self.metric.distance(&self.points[i], &self.points[j]));
            }
        }
        m
    }

    /// Every distinct pair is at least `2Ω` apart (up to rounding).
    pub fn is_valid(&self) -> bool {
        self.points.len() < 2 || self.min_pairwise_distance() >= 2.0 * self.omega * (1.0 - 1e-12) - 1e-15
    }
}

/// Points `center + α·w_i`; `Ω = α·√(realized min distance)/2`.
pub fn scale_code(
    code: &BinaryCode,
    alpha: f64,
    center: &[f64],
    space: Option<&ParameterSpace>,
) -> Result<Packing, PackingError> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(PackingError::InvalidArgument(format!("alpha = {alpha}")));
    }
    if center.len() != code.d {
        return Err(PackingError::InvalidArgument(format!(
            "center has dimension {}, code has {}",
            center.len(),
            code.d
        )));
    }
    let points: Vec<Vec<f64>> = code
        .words
        .iter()
        .map(|w| center.iter().zip(w).map(|(c, &b)| c + alpha * f64::from(b)).collect())
        .collect();
    if let Some(space) = space {
        if let Some(i) = points.iter().position(|p| !space.contains(p, 1e-12)) {
            return Err(PackingError::OutOfSpace(i));
        }
    }
    let dist = if code.len() >= 2 {
        code.realized_min_distance.max(code.min_distance)
    } else {
        code.min_distance
    };
    Ok(Packing {
        points,
        omega: alpha * (dist as f64).sqrt() / 2.0,
        metric: Metric::Euclidean,
    })
}

/// Two-point packing with `Ω` half the distance.
pub fn two_point(theta1: &[f64], theta2: &[f64], metric: Metric) -> Result<Packing, PackingError> {
    if theta1.len() != theta2.len() || theta1.is_empty() {
        return Err(PackingError::InvalidArgument("points must share a positive dimension".into()));
    }
    if metric == Metric::AbsDiff && theta1.len() != 1 {
        return Err(PackingError::InvalidArgument("AbsDiff needs one-dimensional points".into()));
    }
    if theta1 == theta2 {
        return Err(PackingError::InvalidArgument("points must differ".into()));
    }
    Ok(Packing {
        points: vec![theta1.to_vec(), theta2.to_vec()],
        omega: metric.distance(theta1, theta2) / 2.0,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vg_thresholds() {
        assert_eq!(vg_target_size(66, 0.25), 8);
        assert_eq!(vg_min_distance(66, 0.25), 17);
        assert_eq!(vg_target_size(128, 0.25), 55);
        assert_eq!(vg_min_distance(128, 0.25), 32);
    }

    #[test]
    fn vg_code_meets_invariants() {
        let c = varshamov_gilbert(66, 0.25, 3).unwrap();
        assert!(c.len() >= 8);
        assert!(c.pairwise_min_distance() >= 17);
        assert_eq!(c.pairwise_min_distance(), c.realized_min_distance);
        assert_eq!(c, varshamov_gilbert(66, 0.25, 3).unwrap());
    }

    #[test]
    fn vg_single_word() {
        let c = varshamov_gilbert(1, 1e-5, 0).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn scaled_code_distances() {
        let c = varshamov_gilbert(66, 0.25, 1).unwrap();
        let p = scale_code(&c, 1.0, &[0.0; 66], None).unwrap();
        for i in 0..p.points.len() {
            for j in i + 1..p.points.len() {
                let sq = Metric::Euclidean.distance(&p.points[i], &p.points[j]).powi(2);
                assert!((17.0 - 1e-9..=66.0 + 1e-9).contains(&sq));
            }
        }
        assert!(p.is_valid());
        let z = scale_code(&c, 0.0, &[0.5; 66], None).unwrap();
        assert_eq!(z.omega, 0.0);
        assert!(z.points.iter().all(|q| q.iter().all(|&x| x == 0.5)));
    }

    #[test]
    fn scaled_code_respects_ball() {
        let (d, n, gamma, r0) = (66usize, 100.0f64, 0.5, 1.0);
        let c = varshamov_gilbert(d, 0.25, 2).unwrap();
        let alpha = (r0 / (d as f64).sqrt()).min(1.0 / (64.0 * (n * gamma).sqrt()));
        let ball = ParameterSpace::Ball {
            center: vec![0.0; d],
            radius: r0,
        };
        assert!(scale_code(&c, alpha, &[0.0; 66], Some(&ball)).is_ok());
        assert!(matches!(
            scale_code(&c, 1.0, &[0.0; 66], Some(&ball)),
            Err(PackingError::OutOfSpace(_))
        ));
    }

    #[test]
    fn two_point_examples() {
        let p = two_point(&[0.5], &[0.5 + 1.0 / (100.0 * 0.1)], Metric::AbsDiff).unwrap();
        assert_abs_diff_eq!(p.omega, 0.05, epsilon = 1e-15);
        let p = two_point(&[1.0 - 1.0 / 10.0], &[1.0], Metric::AbsDiff).unwrap();
        assert_abs_diff_eq!(p.omega, 0.05, epsilon = 1e-15);
        let q = two_point(&[1.0], &[0.9], Metric::AbsDiff).unwrap();
        assert_eq!(p.omega, q.omega);
        assert!(two_point(&[0.3], &[0.3], Metric::AbsDiff).is_err());
    }
}
