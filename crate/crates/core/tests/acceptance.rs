//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

// negated comparisons make NaN count as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::time::Instant;

use dpminimax::bounds::{fano_private, le_cam_private, PrivacyConstraint, TestForm};
use dpminimax::couplings::{
    estimate_disagreement, exponential_races, marginal_l1_errors, maximal_pair, min_disagreement_lp,
    shared_uniform_bernoulli,
};
use dpminimax::divergences::{kl, pinsker_tv_upper, renyi, tensorize_kl, tv, DiscreteDistribution};
use dpminimax::experiments::{run_bernoulli, run_dpsgml, run_gaussian, run_uniform};
use dpminimax::mechanisms::{
    dp_sgml, dp_sgml_config, BatchSampling, GaussianMean, Init, ParameterSpace, ParametricModel,
};
use dpminimax::packings::{varshamov_gilbert, vg_min_distance, vg_target_size};
use dpminimax::rng::stream_rng;
use dpminimax::verify::{
    verify_admissibility, verify_group_privacy, verify_kl_dp, verify_privacy, Anchor, FiniteMechanism,
    SimilarityKind,
};
use rand::Rng;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: summary,
        }
    } else {
        let shown: Vec<String> = failures.iter().take(6).cloned().collect();
        let more = if failures.len() > 6 {
            format!(" (+{} more)", failures.len() - 6)
        } else {
            String::new()
        };
        Outcome {
            pass: false,
            detail: format!("{}{more}", shown.join("; ")),
        }
    }
}

fn c1_formulas() -> Outcome {
    let checks = common::derived_checks();
    let fails: Vec<String> = checks
        .iter()
        .filter(|c| !c.ok(1e-9))
        .map(|c| format!("{}: {} vs {}", c.name, c.got, c.expected))
        .collect();
    outcome(fails, format!("{} values within 1e-9", checks.len()))
}

fn random_law<R: Rng>(rng: &mut R, atoms: usize) -> DiscreteDistribution {
    let w: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.02).collect();
    let s: f64 = w.iter().sum();
    DiscreteDistribution::new((0..atoms as i64).collect(), w.iter().map(|x| x / s).collect()).unwrap()
}

fn c2_couplings() -> Outcome {
    let mut rng = stream_rng(SEED, 2);
    let draws = 100_000;
    let mut fails = Vec::new();
    let mut worst_l1: f64 = 0.0;
    for inst in 0..50u64 {
        let k = rng.random_range(2..=6);
        let triple: Vec<DiscreteDistribution> = (0..3).map(|_| random_law(&mut rng, k)).collect();
        let ps: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let seed = SEED ^ (inst << 20);
        let pairs = maximal_pair(&triple[0], &triple[1]);
        let races = exponential_races(&triple).unwrap();
        let shared = shared_uniform_bernoulli(&ps).unwrap();
        for (name, s) in [("maximal_pair", &pairs), ("races", &races), ("shared_uniform", &shared)] {
            for (i, e) in marginal_l1_errors(s, draws, seed).unwrap().into_iter().enumerate() {
                worst_l1 = worst_l1.max(e);
                if e > 0.01 {
                    // rerun at 10x draws to separate sampling noise from bias
                    let e10 = marginal_l1_errors(s, 10 * draws, seed + 7).unwrap()[i];
                    fails.push(format!("instance {inst} {name} marginal {i}: L1 {e:.4} (at 1e6 draws {e10:.4})"));
                }
            }
        }
        let m = estimate_disagreement(&pairs, draws, seed + 1).unwrap();
        let t = tv(&triple[0], &triple[1]);
        if (m.estimates[0][1] - t).abs() > 3.0 * m.stderr[0][1] {
            fails.push(format!(
                "instance {inst} maximal pair: {:.5} vs tv {t:.5} (se {:.5})",
                m.estimates[0][1], m.stderr[0][1]
            ));
        }
        let r = estimate_disagreement(&races, draws, seed + 2).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let t = tv(&triple[i], &triple[j]);
                if r.estimates[i][j] > 2.0 * t / (1.0 + t) + 3.0 * r.stderr[i][j] {
                    fails.push(format!("instance {inst} races ({i},{j}): {:.5}", r.estimates[i][j]));
                }
            }
        }
    }
    outcome(fails, format!("50 triples, worst marginal L1 {worst_l1:.4}"))
}

fn c3_lp() -> Outcome {
    let u = |a: i64, b: i64| DiscreteDistribution::uniform(vec![a, b]).unwrap();
    let ps = [u(-1, 0), u(0, 1), u(1, -1)];
    let v = min_disagreement_lp(&ps).unwrap();
    let tv_sum = tv(&ps[0], &ps[1]) + tv(&ps[0], &ps[2]) + tv(&ps[1], &ps[2]);
    let mut fails = Vec::new();
    if (v - 2.0).abs() > 1e-9 {
        fails.push(format!("LP value {v}"));
    }
    if !(v > tv_sum) {
        fails.push(format!("LP value {v} not above sum of TV {tv_sum}"));
    }
    outcome(fails, format!("min disagreement {v:.9} > sum TV {tv_sum}"))
}

fn dp_kinds(big_n: usize, m: &FiniteMechanism) -> Vec<SimilarityKind> {
    let mut kinds = vec![SimilarityKind::PairwiseAnchor, SimilarityKind::FanoMatch];
    if big_n == 2 {
        kinds.push(SimilarityKind::LeCamMatch);
        kinds.push(SimilarityKind::GlobalAnchor { anchor: Anchor::Midpoint });
    }
    for i in 0..m.num_datasets() {
        kinds.push(SimilarityKind::GlobalAnchor {
            anchor: Anchor::Fixed(m.dataset(i)),
        });
    }
    for j in 0..big_n {
        kinds.push(SimilarityKind::ProjectionAnchor { j });
    }
    kinds
}

fn c4_exhaustive() -> Outcome {
    let mut fails = Vec::new();
    let mut checked = 0usize;
    for eps in [0.5, 2f64.ln(), 3f64.ln()] {
        let dp = PrivacyConstraint::PureDp { epsilon: eps };
        let z = PrivacyConstraint::Zcdp { rho: eps * eps / 2.0 };
        let mechs = [
            ("rr", FiniteMechanism::randomized_response(eps).unwrap()),
            ("rr_sum2", FiniteMechanism::rr_sum(eps, 2).unwrap()),
        ];
        for (name, m) in &mechs {
            let tag = format!("{name} eps={eps:.4}");
            if !verify_privacy(m, dp).unwrap().holds {
                fails.push(format!("{tag}: privacy"));
            }
            if !verify_privacy(m, z).unwrap().holds {
                fails.push(format!("{tag}: zcdp"));
            }
            for c in [dp, z] {
                match verify_group_privacy(m, c) {
                    Ok(r) if r.holds => {}
                    other => fails.push(format!("{tag}: group {} {:?}", c.kind_name(), other.map(|r| r.worst_gap))),
                }
            }
            if !verify_kl_dp(m, eps).unwrap().holds {
                fails.push(format!("{tag}: kl-dp"));
            }
            for big_n in [2, 3] {
                let mut runs: Vec<(PrivacyConstraint, SimilarityKind)> =
                    dp_kinds(big_n, m).into_iter().map(|k| (dp, k)).collect();
                runs.push((z, SimilarityKind::FanoMatch));
                if big_n == 2 {
                    runs.push((z, SimilarityKind::LeCamMatch));
                }
                for (c, kind) in runs {
                    checked += 1;
                    let r = verify_admissibility(m, c, &kind, big_n).unwrap();
                    if !r.holds {
                        let w = r.witness.unwrap();
                        let msg = format!(
                            "{tag} N={big_n} {} {}: error {:.4} < s {:.4}",
                            c.kind_name(),
                            kind.name(),
                            w.average_error,
                            w.similarity
                        );
                        if !fails.contains(&msg) {
                            fails.push(msg);
                        }
                    }
                }
            }
        }
    }
    let id = FiniteMechanism::identity(2, 1).unwrap();
    let r = verify_admissibility(
        &id,
        PrivacyConstraint::PureDp { epsilon: 3f64.ln() },
        &SimilarityKind::LeCamMatch,
        2,
    )
    .unwrap();
    if r.holds || r.witness.is_none() {
        fails.push("identity mechanism produced no admissibility witness".into());
    }
    outcome(fails, format!("{checked} admissibility runs, identity witness found"))
}

fn c5_bernoulli() -> Outcome {
    let ns = [50, 100, 200, 400];
    let cs = [PrivacyConstraint::PureDp { epsilon: 0.1 }, PrivacyConstraint::Zcdp { rho: 0.01 }];
    let r = run_bernoulli(&ns, &cs, 10_000, SEED).unwrap();
    let mut fails = Vec::new();
    for cell in &r.cells {
        let m = &cell.mechanisms[0];
        let lb = cell.lower_bound().unwrap().value;
        let want = match cell.constraint {
            PrivacyConstraint::Zcdp { rho } => 1.0 / (64.0 * (cell.n * cell.n) as f64 * rho),
            _ => 1.0 / (80.0 * (cell.n as f64 * 0.1).powi(2)),
        };
        if lb != want {
            fails.push(format!("n={} {}: constant {lb} != {want}", cell.n, m.mechanism));
        }
        if m.risk.risk < lb {
            fails.push(format!("n={} {}: risk {:.3e} below {lb:.3e}", cell.n, m.mechanism, m.risk.risk));
        }
        if m.mechanism == "laplace_mean" {
            let a = m.analytic.unwrap();
            if (m.risk.risk - a).abs() > 3.0 * m.risk.stderr {
                fails.push(format!("n={}: laplace {:.5e} vs analytic {a:.5e}", cell.n, m.risk.risk));
            }
        }
    }
    let mut slopes = Vec::new();
    for name in ["laplace_mean:pure_dp(eps=0.1):privacy_dominated", "gaussian_mean:zcdp(rho=0.01):privacy_dominated"] {
        match r.slope(name) {
            Some(s) => {
                slopes.push(format!("{} {:.3}", name.split(':').next().unwrap(), s.value));
                if (s.value + 2.0).abs() > 0.15 {
                    fails.push(format!("{name}: slope {:.3}", s.value));
                }
            }
            None => fails.push(format!("{name}: fewer than 3 privacy-dominated cells")),
        }
    }
    if !r.sanity_holds() {
        fails.push(format!("{} sanity violations", r.violations.len()));
    }
    outcome(fails, format!("slopes {}", slopes.join(", ")))
}

fn c6_uniform() -> Outcome {
    let ns = [10, 20, 40];
    let (eps, rho) = (1.0, 0.5);
    let cs = [
        PrivacyConstraint::None,
        PrivacyConstraint::PureDp { epsilon: eps },
        PrivacyConstraint::Zcdp { rho },
    ];
    let r = run_uniform(&ns, &cs, 100_000, SEED).unwrap();
    let mut fails = Vec::new();
    let e_inv = (-1.0f64).exp();
    let mut worst_rel: f64 = 0.0;
    for cell in &r.cells {
        let nf = cell.n as f64;
        let m = &cell.mechanisms[0];
        let a = 2.0 / ((nf + 1.0) * (nf + 2.0));
        let rel = (m.risk.risk - a).abs() / a;
        worst_rel = worst_rel.max(rel);
        if rel > 0.05 {
            fails.push(format!("n={}: max estimator risk {:.5} vs {a:.5}", cell.n, m.risk.risk));
        }
        let want = match cell.constraint {
            PrivacyConstraint::None => e_inv / (8.0 * nf * nf),
            PrivacyConstraint::Zcdp { rho } => (1.0 - 1.0 / 2f64.sqrt()) / (8.0 * nf * nf * rho),
            _ => e_inv / (8.0 * (nf * eps).powi(2)),
        };
        let lb = cell.lower_bound().unwrap().value;
        if lb != want {
            fails.push(format!("n={} {}: lower bound {lb} != {want}", cell.n, cell.constraint.kind_name()));
        }
        let nonprivate = r
            .cells
            .iter()
            .find(|c| c.n == cell.n && c.constraint == PrivacyConstraint::None)
            .unwrap()
            .mechanisms[0]
            .risk
            .risk;
        if lb > nonprivate {
            fails.push(format!("n={} {}: bound {lb:.3e} above risk {nonprivate:.3e}", cell.n, cell.constraint.kind_name()));
        }
    }
    outcome(fails, format!("worst relative MSE error {worst_rel:.4}"))
}

fn c7_gaussian() -> Outcome {
    let cs = [
        PrivacyConstraint::None,
        PrivacyConstraint::PureDp { epsilon: 1.0 },
        PrivacyConstraint::Zcdp { rho: 0.5 },
    ];
    let r = run_gaussian(66, 1.0, &[500, 1000], &cs, 2_000, SEED).unwrap();
    let mut fails = Vec::new();
    for cell in &r.cells {
        let m = &cell.mechanisms[0];
        let a = 66.0 / cell.n as f64;
        if (m.risk.risk - a).abs() > 3.0 * m.risk.stderr {
            fails.push(format!("n={}: risk {:.5} vs {a:.5}", cell.n, m.risk.risk));
        }
        for b in &cell.bounds {
            if b.value > m.risk.risk {
                fails.push(format!("n={} {}: bound {:.3e} above risk", cell.n, b.name, b.value));
            }
        }
    }
    outcome(fails, format!("{} cells", r.cells.len()))
}

fn c8_vg() -> Outcome {
    let mut fails = Vec::new();
    let mut sizes = Vec::new();
    for d in [66, 128, 200] {
        let a = varshamov_gilbert(d, 0.25, SEED).unwrap();
        let b = varshamov_gilbert(d, 0.25, SEED).unwrap();
        if a.len() < vg_target_size(d, 0.25) {
            fails.push(format!("d={d}: {} words", a.len()));
        }
        let dist = a.pairwise_min_distance();
        if dist < vg_min_distance(d, 0.25) {
            fails.push(format!("d={d}: distance {dist}"));
        }
        if a != b {
            fails.push(format!("d={d}: not reproducible"));
        }
        sizes.push(format!("d={d}: {} words, min distance {dist}", a.len()));
    }
    outcome(fails, sizes.join(", "))
}

fn c9_dpsgml() -> Outcome {
    let d = 5;
    let model = GaussianMean::new(
        1.0,
        ParameterSpace::Ball {
            center: vec![0.0; d],
            radius: 10.0,
        },
        10.0,
    )
    .unwrap();
    let theta_star = [1.0, -0.5, 0.0, 0.5, -1.0];
    let mut fails = Vec::new();

    // (a) zero noise, full batch, interior start
    let data = model.sample(&theta_star, 500, &mut stream_rng(SEED, 9));
    let mean: Vec<f64> = (0..d).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / 500.0).collect();
    let mut cfg = dp_sgml_config(500, d, 1.0, model.constants(), 64).unwrap();
    cfg.sigma2_noise = 0.0;
    cfg.k = 200;
    cfg.batch = BatchSampling::Full;
    cfg.init = Init::Fixed(vec![0.0; d]);
    let th = dp_sgml(&data, &model, &cfg, &mut stream_rng(SEED, 10)).unwrap();
    let err = th.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if err > 1e-6 {
        fails.push(format!("(a) zero-noise error {err:.2e}"));
    }

    let trials = 2_000;
    let by_rho = run_dpsgml(&model, &theta_star, &[500], &[1e-3, 1e-2, 1e-1], 64, trials, SEED).unwrap();
    let s_rho = by_rho.slope("dp_sgml:n=500:vs_rho").map(|s| s.value).unwrap_or(f64::NAN);
    if !((s_rho + 1.0).abs() <= 0.2) {
        fails.push(format!("(b) slope vs rho {s_rho:.3}"));
    }
    let by_n = run_dpsgml(&model, &theta_star, &[200, 500, 1000, 2000], &[0.5], 64, trials, SEED).unwrap();
    let s_n = by_n.slope("dp_sgml:zcdp(rho=0.5)").map(|s| s.value).unwrap_or(f64::NAN);
    if !((s_n + 1.0).abs() <= 0.15) {
        let risks: Vec<String> = by_n
            .cells
            .iter()
            .map(|c| format!("{}:{:.4}", c.n, c.mechanisms[0].risk.risk))
            .collect();
        fails.push(format!("(c) slope vs n {s_n:.3} (risks {})", risks.join(" ")));
    }
    let ratios: Vec<f64> = by_rho.cells.iter().chain(&by_n.cells).map(|c| c.extras["ratio"]).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if !(spread <= 5.0) {
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.1}")).collect();
        fails.push(format!("(d) ratio spread {spread:.2} (ratios {})", shown.join(" ")));
    }
    outcome(
        fails,
        format!("zero-noise error {err:.1e}, slope vs rho {s_rho:.3}, slope vs n {s_n:.3}, ratio spread {spread:.2}"),
    )
}

fn c10_properties() -> Outcome {
    let mut rng = stream_rng(SEED, 10);
    let mut fails = Vec::new();
    for i in 0..1000 {
        let k = rng.random_range(2..=6);
        let p = random_law(&mut rng, k);
        let q = random_law(&mut rng, k);
        let t = tv(&p, &q);
        let kl_pq = kl(&p, &q);
        if t > pinsker_tv_upper(kl_pq) + 1e-12 {
            fails.push(format!("pinsker #{i}"));
        }
        let a = 1.0 + rng.random::<f64>() * 4.0;
        let b = a + rng.random::<f64>() * 4.0;
        let (ra, rb) = (renyi(a, &p, &q).unwrap(), renyi(b, &p, &q).unwrap());
        if ra > rb + 1e-12 || kl_pq > ra + 1e-12 {
            fails.push(format!("renyi monotonicity #{i}"));
        }
        let n = rng.random_range(1..100u64);
        if (tensorize_kl(kl_pq, n) - n as f64 * kl_pq).abs() > 1e-12 * n as f64 {
            fails.push(format!("tensorization #{i}"));
        }

        let eps = rng.random_range(0.01..4.0);
        let rho = rng.random_range(0.001..2.0);
        let tv1 = rng.random::<f64>();
        let tv2 = (tv1 + rng.random::<f64>() * 0.3).min(1.0);
        let nn = rng.random_range(1..50u64);
        for c in [PrivacyConstraint::PureDp { epsilon: eps }, PrivacyConstraint::Zcdp { rho }] {
            for form in [TestForm::Joint, TestForm::Product] {
                let v1 = le_cam_private(c, nn, tv1, form).unwrap().value;
                let v2 = le_cam_private(c, nn, tv2, form).unwrap().value;
                if v2 > v1 + 1e-15 {
                    fails.push(format!("monotone in tv #{i}"));
                }
            }
            let v1 = le_cam_private(c, nn, tv1, TestForm::Product).unwrap().value;
            let v2 = le_cam_private(c, nn + 1, tv1, TestForm::Product).unwrap().value;
            if v2 > v1 + 1e-15 {
                fails.push(format!("monotone in n #{i}"));
            }
        }
        let v1 = le_cam_private(PrivacyConstraint::PureDp { epsilon: eps }, nn, tv1, TestForm::Joint).unwrap();
        let v2 = le_cam_private(PrivacyConstraint::PureDp { epsilon: eps * 1.3 }, nn, tv1, TestForm::Joint).unwrap();
        let z1 = le_cam_private(PrivacyConstraint::Zcdp { rho }, nn, tv1, TestForm::Joint).unwrap();
        let z2 = le_cam_private(PrivacyConstraint::Zcdp { rho: rho * 1.3 }, nn, tv1, TestForm::Joint).unwrap();
        if v2.value > v1.value + 1e-15 || z2.value > z1.value + 1e-15 {
            fails.push(format!("monotone in budget #{i}"));
        }

        let pure = PrivacyConstraint::PureDp { epsilon: eps };
        let zero = PrivacyConstraint::ApproxDp { epsilon: eps, delta: 0.0 };
        let big_n = rng.random_range(2..6usize);
        let tvs: Vec<Vec<f64>> = (0..big_n)
            .map(|a| (0..big_n).map(|b| if a == b { 0.0 } else { tv1 }).collect())
            .collect();
        for form in [TestForm::Joint, TestForm::Product] {
            let a = le_cam_private(pure, nn, tv1, form).unwrap();
            let b = le_cam_private(zero, nn, tv1, form).unwrap();
            let fa = fano_private(pure, nn, big_n, &tvs, None, form).unwrap();
            let fb = fano_private(zero, nn, big_n, &tvs, None, form).unwrap();
            if a.value.to_bits() != b.value.to_bits() || fa.value.to_bits() != fb.value.to_bits() {
                fails.push(format!("pure vs zero-delta #{i}"));
            }
        }
    }
    outcome(fails, "1000 instances".into())
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("formula regression", c1_formulas),
        ("coupling marginals", c2_couplings),
        ("three-marginal LP", c3_lp),
        ("exhaustive verification", c4_exhaustive),
        ("Bernoulli model", c5_bernoulli),
        ("uniform model", c6_uniform),
        ("Gaussian model", c7_gaussian),
        ("Varshamov-Gilbert codes", c8_vg),
        ("DP-SGML", c9_dpsgml),
        ("property suites", c10_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {:>2} {:<24} {} ({secs:.1}s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
