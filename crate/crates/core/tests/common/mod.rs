//! Frozen oracle values shared by the regression and acceptance targets.
//! Expected numbers come from `tests/oracles/derived_values.py` (mpmath).

#![allow(clippy::excessive_precision)]

#![allow(dead_code)]

use dpminimax::bounds::{
    fano_classical, fano_private, kl_quadratic_bounds, le_cam_private, minimax_from_packing, Branch, BoundResult,
    PrivacyConstraint, TestForm,
};
use dpminimax::couplings::races_disagreement_bound;
use dpminimax::divergences::{closed_form, kl, renyi, ClosedFormFamily, DiscreteDistribution, DivergenceKind};
use dpminimax::experiments::{run_bernoulli, run_uniform};
use dpminimax::mechanisms::{dp_sgml_config, ModelConstants};
use dpminimax::packings::{vg_min_distance, vg_target_size};
use dpminimax::verify::{group_privacy_terms, rr_keep_probability, similarity, Dataset, SimilarityKind};

pub struct Check {
    pub name: &'static str,
    pub got: f64,
    pub expected: f64,
}

impl Check {
    pub fn ok(&self, tol: f64) -> bool {
        (self.got - self.expected).abs() <= tol
    }
}

fn bern(p: f64) -> DiscreteDistribution {
    DiscreteDistribution::bernoulli(p).unwrap()
}

fn ds(v: &[i64]) -> Dataset {
    Dataset::new(v.to_vec()).unwrap()
}

fn candidate(r: &BoundResult, b: Branch) -> f64 {
    r.candidates.iter().find(|c| c.branch == b).map(|c| c.raw).unwrap_or(f64::NAN)
}

fn off_diagonal(n: usize, v: f64) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { v }).collect()).collect()
}

pub fn derived_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut push = |name: &'static str, got: f64, expected: f64| out.push(Check { name, got, expected });

    push("kl_bernoulli_075_05", kl(&bern(0.75), &bern(0.5)), 0.130_812_035_941_136_959_13);
    push("renyi2_bernoulli_075_05", renyi(2.0, &bern(0.75), &bern(0.5)).unwrap(), 0.223_143_551_314_209_755_77);
    push(
        "uniform_tv_n2",
        closed_form(
            DivergenceKind::Tv,
            &ClosedFormFamily::UniformSupport { theta: 0.5 },
            &ClosedFormFamily::UniformSupport { theta: 1.0 },
            2,
        )
        .unwrap(),
        0.75,
    );
    push(
        "bernoulli_tv_n4",
        closed_form(
            DivergenceKind::Tv,
            &ClosedFormFamily::Bernoulli { p: 0.3 },
            &ClosedFormFamily::Bernoulli { p: 0.5 },
            4,
        )
        .unwrap(),
        0.3392,
    );
    push("races_bound_tv02", races_disagreement_bound(0.2), 1.0 / 3.0);
    push("races_bound_tv05", races_disagreement_bound(0.5), 2.0 / 3.0);

    push("fano_classical_n3", fano_classical(3, &[0.0; 3]).unwrap().value, 0.089_760_773_373_162_606_386);
    push("fano_classical_n16", fano_classical(16, &[0.5; 16]).unwrap().value, 0.458_989_359_666_638_722_24);
    let ln2 = 2f64.ln();
    push(
        "le_cam_dp_product",
        le_cam_private(PrivacyConstraint::PureDp { epsilon: ln2 }, 2, 0.5, TestForm::Product).unwrap().value,
        0.28125,
    );
    push(
        "le_cam_zcdp_product",
        le_cam_private(PrivacyConstraint::Zcdp { rho: 0.02 }, 4, 0.5, TestForm::Product).unwrap().value,
        0.4,
    );
    let none3 = fano_private(PrivacyConstraint::None, 1, 3, &off_diagonal(3, 0.0), Some(&[0.0; 3]), TestForm::Joint)
        .unwrap();
    push("fano_private_classical_branch", none3.value, 0.089_760_773_373_162_606_386);
    let dp8 = fano_private(
        PrivacyConstraint::PureDp { epsilon: 0.1 },
        1,
        8,
        &off_diagonal(8, 0.5),
        None,
        TestForm::Joint,
    )
    .unwrap();
    push("fano_dp_joint_match", candidate(&dp8, Branch::DpFanoMatch), 0.491_049_249_464_171_242_4);
    push("fano_dp_joint_pairwise", candidate(&dp8, Branch::DpFanoPairwise), 0.472_244_246_927_154_875_51);
    push("fano_dp_joint_best", dp8.value, 0.491_049_249_464_171_242_4);
    let z3 = fano_private(PrivacyConstraint::Zcdp { rho: 0.1 }, 1, 3, &off_diagonal(3, 1.0), None, TestForm::Joint)
        .unwrap();
    push("fano_zcdp_joint", z3.value, 0.029_078_158_264_706_780_145);

    let none = PrivacyConstraint::None;
    push(
        "kl_quadratic_none_unbounded",
        kl_quadratic_bounds(66, 100, 0.5, f64::INFINITY, none).unwrap(),
        66.0 / (32.0 * 4096.0 * 100.0 * 0.5),
    );
    push(
        "kl_quadratic_zcdp",
        kl_quadratic_bounds(66, 100, 0.5, 10.0, PrivacyConstraint::Zcdp { rho: 0.01 }).unwrap(),
        1.007_080_078_125e-5,
    );
    push(
        "kl_quadratic_dp",
        kl_quadratic_bounds(66, 100, 0.5, f64::INFINITY, PrivacyConstraint::PureDp { epsilon: 0.1 }).unwrap(),
        1.007_080_078_125e-5,
    );
    push("kl_quadratic_tiny_r0", kl_quadratic_bounds(66, 100, 0.5, 1e-4, none).unwrap(), 3.125e-10);

    let bern_dp_test = 0.5 * (-1.0 / 2f64.sqrt()).exp();
    let test_bound = BoundResult {
        value: bern_dp_test,
        raw: bern_dp_test,
        branch: Branch::DpLeCamProduct,
        candidates: Vec::new(),
        n: None,
        hypotheses: 2,
        constraint: PrivacyConstraint::PureDp { epsilon: 0.1 },
    };
    let alpha: f64 = 1.0 / (100.0 * 0.1);
    push(
        "bernoulli_dp_recipe",
        minimax_from_packing((alpha / 4.0).powi(2), &test_bound).unwrap() * 100.0,
        0.015_408_396_606_101_243_37,
    );
    let uniform_test = BoundResult {
        value: 0.5 * (-1.0f64).exp(),
        raw: 0.5 * (-1.0f64).exp(),
        branch: Branch::ClassicalLeCam,
        ..test_bound
    };
    push(
        "uniform_recipe",
        minimax_from_packing((1.0 / 20.0f64).powi(2), &uniform_test).unwrap() * 100.0,
        0.045_984_930_146_430_290_199,
    );

    let eps1 = PrivacyConstraint::PureDp { epsilon: 1.0 };
    push(
        "le_cam_match_dh3",
        similarity(eps1, &SimilarityKind::LeCamMatch, &[ds(&[0, 0, 0]), ds(&[1, 1, 1])]).unwrap(),
        0.067_667_641_618_306_345_947,
    );
    push(
        "zcdp_fano_match_unit_distances",
        similarity(
            PrivacyConstraint::Zcdp { rho: 0.1 },
            &SimilarityKind::FanoMatch,
            &[ds(&[0]), ds(&[1]), ds(&[2])],
        )
        .unwrap(),
        0.029_078_158_264_706_780_145,
    );

    for (d, size, dist) in [(66, 8, 17), (128, 55, 32), (200, 519, 50)] {
        let name_size: &'static str = match d {
            66 => "vg_size_d66",
            128 => "vg_size_d128",
            _ => "vg_size_d200",
        };
        let name_dist: &'static str = match d {
            66 => "vg_distance_d66",
            128 => "vg_distance_d128",
            _ => "vg_distance_d200",
        };
        push(name_size, vg_target_size(d, 0.25) as f64, size as f64);
        push(name_dist, vg_min_distance(d, 0.25) as f64, dist as f64);
    }

    let (mult, add) = group_privacy_terms(2f64.ln(), 0.01, 2);
    push("group_multiplier_k2", mult, 4.0);
    push("group_additive_k2", add, 0.04);
    push("rr_keep_ln3", rr_keep_probability(3f64.ln()), 0.75);
    let unit = ModelConstants {
        lambda: 1.0,
        beta: 1.0,
        lipschitz: 1.0,
        gamma: 0.5,
    };
    let cfg = dp_sgml_config(100, 5, 0.1, unit, 10).unwrap();
    push("dpsgml_sigma2", cfg.sigma2_noise, 0.004);
    push("dpsgml_eta", cfg.eta, 0.5);
    push("dpsgml_k", cfg.k as f64, 11.0);

    let dp_cell = run_bernoulli(&[100], &[PrivacyConstraint::PureDp { epsilon: 0.1 }], 100, 0).unwrap();
    push("bernoulli_dp_lower_bound", dp_cell.cells[0].bounds[0].value, 1.25e-4);
    push("laplace_analytic_mse", dp_cell.cells[0].mechanisms[0].analytic.unwrap(), 0.0225);
    let z_cell = run_bernoulli(&[100], &[PrivacyConstraint::Zcdp { rho: 0.01 }], 100, 0).unwrap();
    push("gaussian_analytic_mse", z_cell.cells[0].mechanisms[0].analytic.unwrap(), 0.0425);
    let u_cell = run_uniform(&[10], &[PrivacyConstraint::None], 100, 0).unwrap();
    push("uniform_max_analytic_mse", u_cell.cells[0].mechanisms[0].analytic.unwrap(), 0.015_151_515_151_515_151_515);
    push("uniform_lower_bound_n10", u_cell.cells[0].bounds[0].value, (-1.0f64).exp() / 800.0);
    out
}
