use dpminimax::bounds::{fano_private, le_cam_private, BoundsError};
use dpminimax::couplings::{
    estimate_disagreement, exponential_races, maximal_pair, min_disagreement_coupling, races_disagreement_bound,
    shared_uniform_bernoulli, CouplingError, CouplingSampler,
};
use dpminimax::divergences::{tv, DiscreteDistribution, DivergenceError};
use dpminimax::experiments::{run_bernoulli, run_dpsgml, run_gaussian, run_uniform, ExperimentError, ExperimentReport};
use dpminimax::mechanisms::{GaussianMean, MechanismError, ParameterSpace};
use dpminimax::verify::{
    verify_admissibility, verify_group_privacy, verify_kl_dp, verify_privacy, verify_transport_bound, Anchor,
    FiniteMechanism, SimilarityKind, TransportOptions, VerifyError,
};
use dpminimax::PrivacyConstraint;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{
    BoundsCmd, CoupleCmd, DistArgs, ExperimentCmd, KindArg, MechanismArg, Suite, VerifyArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments; exit 2.
    #[error("{0}")]
    Usage(String),
    /// Checked failure (violation, infeasible instance); exit 1.
    #[error("{0}")]
    Failed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<DivergenceError> for CliError {
    fn from(e: DivergenceError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<CouplingError> for CliError {
    fn from(e: CouplingError) -> Self {
        match e {
            CouplingError::TooLarge { .. } => Self::Failed(format!("TooLarge: {e}")),
            e => Self::Usage(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::TooLarge(_) => Self::Failed(format!("TooLarge: {e}")),
            e => Self::Usage(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> Self {
        Self::Usage(e.to_string())
    }
}

/// Result of one subcommand, before it is wrapped in the report envelope.
pub struct Outcome {
    pub result: Value,
    /// CSV body with header row.
    pub csv: String,
    /// Set when a checked property failed; the report is still written.
    pub failure: Option<String>,
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

#[derive(Serialize)]
struct BoundRow {
    theorem: &'static str,
    n: u64,
    tv: Option<f64>,
    constraint_kind: &'static str,
    value: f64,
    raw: f64,
    branch: String,
}

pub fn bounds(cmd: &BoundsCmd) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let mut full = Vec::new();
    match cmd {
        BoundsCmd::Lecam(a) => {
            let c = a.constraint.constraint().ok_or_else(|| CliError::Usage("missing constraint parameter".into()))?;
            for &n in &a.n {
                for &t in &a.tv {
                    let r = le_cam_private(c, n, t, a.form.into())?;
                    rows.push(BoundRow {
                        theorem: "lecam",
                        n,
                        tv: Some(t),
                        constraint_kind: c.kind_name(),
                        value: r.value,
                        raw: r.raw,
                        branch: r.branch.to_string(),
                    });
                    full.push(json!({ "tv": t, "bound": r }));
                }
            }
        }
        BoundsCmd::Fano(a) => {
            let c = a.constraint.constraint().ok_or_else(|| CliError::Usage("missing constraint parameter".into()))?;
            let big_n = a.hypotheses;
            let tvs = match (&a.tv_all, &a.tv_matrix) {
                (Some(t), _) => (0..big_n)
                    .map(|i| (0..big_n).map(|j| if i == j { 0.0 } else { *t }).collect())
                    .collect(),
                (None, Some(m)) => parse_matrix(m)?,
                (None, None) => return Err(CliError::Usage("one of --tv-all or --tv-matrix is required".into())),
            };
            let kls = a.kl_all.map(|k| vec![k; big_n]);
            for &n in &a.n {
                let r = fano_private(c, n, big_n, &tvs, kls.as_deref(), a.form.into())?;
                rows.push(BoundRow {
                    theorem: "fano",
                    n,
                    tv: a.tv_all,
                    constraint_kind: c.kind_name(),
                    value: r.value,
                    raw: r.raw,
                    branch: r.branch.to_string(),
                });
                full.push(json!({ "tv_matrix": tvs, "bound": r }));
            }
        }
    }
    Ok(Outcome {
        result: json!({ "rows": full }),
        csv: to_csv(&rows)?,
        failure: None,
    })
}

fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad matrix entry {x:?}: {e}"))))
                .collect()
        })
        .collect()
}

/// Parses `atom:weight,atom:weight,...`.
pub fn parse_dist(s: &str) -> Result<DiscreteDistribution, CliError> {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for part in s.split(',') {
        let (a, w) = part
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("expected atom:weight, got {part:?}")))?;
        atoms.push(a.trim().parse::<i64>().map_err(|e| CliError::Usage(format!("bad atom {a:?}: {e}")))?);
        weights.push(w.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad weight {w:?}: {e}")))?);
    }
    Ok(DiscreteDistribution::new(atoms, weights)?)
}

fn dists(args: &DistArgs) -> Result<Vec<DiscreteDistribution>, CliError> {
    if args.dists.is_empty() {
        let u = |a, b| DiscreteDistribution::uniform(vec![a, b]);
        return Ok(vec![u(-1, 0)?, u(0, 1)?, u(1, -1)?]);
    }
    args.dists.iter().map(|s| parse_dist(s)).collect()
}

#[derive(Serialize)]
struct PairRow {
    i: usize,
    j: usize,
    estimate: f64,
    stderr: f64,
    tv: f64,
    races_bound: f64,
}

fn disagreement(s: &CouplingSampler, trials: u64, seed: u64) -> Result<Outcome, CliError> {
    let m = estimate_disagreement(s, trials, seed)?;
    let ps = s.marginals();
    let k = ps.len();
    let tvs: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| tv(&ps[i], &ps[j])).collect()).collect();
    let bound: Vec<Vec<f64>> = tvs.iter().map(|r| r.iter().map(|&t| races_disagreement_bound(t)).collect()).collect();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            rows.push(PairRow {
                i,
                j,
                estimate: m.estimates[i][j],
                stderr: m.stderr[i][j],
                tv: tvs[i][j],
                races_bound: bound[i][j],
            });
        }
    }
    Ok(Outcome {
        result: json!({
            "marginals": ps,
            "disagreement": m,
            "tv": tvs,
            "races_bound": bound,
        }),
        csv: to_csv(&rows)?,
        failure: None,
    })
}

pub fn couple(cmd: &CoupleCmd, trials: u64, seed: u64) -> Result<Outcome, CliError> {
    match cmd {
        CoupleCmd::Pair(a) => {
            let ps = dists(a)?;
            if a.dists.len() > 2 || (a.dists.len() == 1) {
                return Err(CliError::Usage("pair mode needs exactly two --dist laws".into()));
            }
            disagreement(&maximal_pair(&ps[0], &ps[1]), trials, seed)
        }
        CoupleCmd::Races(a) => disagreement(&exponential_races(&dists(a)?)?, trials, seed),
        CoupleCmd::Shared(a) => disagreement(&shared_uniform_bernoulli(&a.ps)?, trials, seed),
        CoupleCmd::Lp(a) => {
            let ps = dists(a)?;
            let (value, joint) = min_disagreement_coupling(&ps)?;
            let k = ps.len();
            let sum_tv: f64 = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| tv(&ps[i], &ps[j])).sum();
            #[derive(Serialize)]
            struct LpRow {
                value: f64,
                sum_tv: f64,
            }
            Ok(Outcome {
                result: json!({
                    "marginals": ps,
                    "min_total_disagreement": value,
                    "sum_tv": sum_tv,
                    "coupling": joint.iter().map(|(a, p)| json!({"atoms": a, "probability": p})).collect::<Vec<_>>(),
                }),
                csv: to_csv(&[LpRow { value, sum_tv }])?,
                failure: None,
            })
        }
    }
}

#[derive(Serialize)]
struct CheckEntry {
    check: &'static str,
    kind: Option<SimilarityKind>,
    hypotheses: Option<usize>,
    /// `None` when the check does not apply.
    holds: Option<bool>,
    note: Option<String>,
    result: Value,
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    kind: String,
    hypotheses: Option<usize>,
    holds: String,
    worst_gap: Option<f64>,
}

fn build_mechanism(a: &VerifyArgs) -> Result<FiniteMechanism, CliError> {
    let need_eps = || a.eps.ok_or_else(|| CliError::Usage(format!("--eps is required for mechanism {:?}", a.mechanism)));
    let binary = || {
        if a.alphabet == 2 {
            Ok(())
        } else {
            Err(CliError::Usage("randomized response needs --alphabet 2".into()))
        }
    };
    Ok(match a.mechanism {
        MechanismArg::Rr if a.n == 1 => {
            binary()?;
            FiniteMechanism::randomized_response(need_eps()?)?
        }
        MechanismArg::Rr => {
            binary()?;
            FiniteMechanism::rr_product(need_eps()?, a.n)?
        }
        MechanismArg::RrSum => {
            binary()?;
            FiniteMechanism::rr_sum(need_eps()?, a.n)?
        }
        MechanismArg::Identity => FiniteMechanism::identity(a.alphabet, a.n)?,
        MechanismArg::Constant => FiniteMechanism::constant(a.alphabet, a.n)?,
    })
}

fn expand_kinds(kinds: &[KindArg], big_n: usize, m: &FiniteMechanism) -> Vec<SimilarityKind> {
    let all = kinds.contains(&KindArg::All);
    let want = |k| all || kinds.contains(&k);
    let mut out = Vec::new();
    if want(KindArg::Global) {
        out.extend((0..m.num_datasets()).map(|i| SimilarityKind::GlobalAnchor {
            anchor: Anchor::Fixed(m.dataset(i)),
        }));
        if big_n == 2 {
            out.push(SimilarityKind::GlobalAnchor { anchor: Anchor::Midpoint });
        }
    }
    if want(KindArg::Projection) {
        out.extend((0..big_n).map(|j| SimilarityKind::ProjectionAnchor { j }));
    }
    if want(KindArg::LeCamMatch) && big_n == 2 {
        out.push(SimilarityKind::LeCamMatch);
    }
    if want(KindArg::Pairwise) {
        out.push(SimilarityKind::PairwiseAnchor);
    }
    if want(KindArg::FanoMatch) {
        out.push(SimilarityKind::FanoMatch);
    }
    out
}

/// Law on dataset indices with i.i.d. Bernoulli(p) entries.
fn product_bernoulli(m: &FiniteMechanism, p: f64) -> Result<DiscreteDistribution, CliError> {
    let (atoms, weights): (Vec<i64>, Vec<f64>) = (0..m.num_datasets())
        .map(|i| {
            let w: f64 = m.dataset(i).entries.iter().map(|&x| if x == 1 { p } else { 1.0 - p }).product();
            (i as i64, w)
        })
        .filter(|&(_, w)| w > 0.0)
        .unzip();
    Ok(DiscreteDistribution::new(atoms, weights)?)
}

pub fn verify(a: &VerifyArgs, trials: u64, seed: u64) -> Result<Outcome, CliError> {
    let m = build_mechanism(a)?;
    let c = if a.zcdp {
        PrivacyConstraint::Zcdp {
            rho: a.rho.ok_or_else(|| CliError::Usage("--zcdp needs --rho".into()))?,
        }
    } else {
        let epsilon = a.eps.ok_or_else(|| CliError::Usage("--eps is required unless --zcdp is given".into()))?;
        if a.delta > 0.0 {
            PrivacyConstraint::ApproxDp { epsilon, delta: a.delta }
        } else {
            PrivacyConstraint::PureDp { epsilon }
        }
    };
    let suites: Vec<Suite> = if a.suite.contains(&Suite::All) {
        vec![Suite::Privacy, Suite::Group, Suite::KlDp, Suite::Admissibility, Suite::Transport]
    } else {
        a.suite.clone()
    };
    let mut entries = Vec::new();
    let skipped = |check, kind, hypotheses, note: String| CheckEntry {
        check,
        kind,
        hypotheses,
        holds: None,
        note: Some(note),
        result: Value::Null,
    };
    for suite in suites {
        match suite {
            Suite::Privacy => {
                let r = verify_privacy(&m, c)?;
                entries.push(CheckEntry {
                    check: "privacy",
                    kind: None,
                    hypotheses: None,
                    holds: Some(r.holds),
                    note: None,
                    result: to_value(&r),
                });
            }
            Suite::Group => {
                let r = verify_group_privacy(&m, c)?;
                entries.push(CheckEntry {
                    check: "group_privacy",
                    kind: None,
                    hypotheses: None,
                    holds: Some(r.holds),
                    note: None,
                    result: to_value(&r),
                });
            }
            Suite::KlDp => match c {
                PrivacyConstraint::PureDp { epsilon } => {
                    let r = verify_kl_dp(&m, epsilon)?;
                    entries.push(CheckEntry {
                        check: "kl_dp",
                        kind: None,
                        hypotheses: None,
                        holds: Some(r.holds),
                        note: None,
                        result: to_value(&r),
                    });
                }
                _ => entries.push(skipped("kl_dp", None, None, "needs pure DP".into())),
            },
            Suite::Admissibility => {
                for &big_n in &a.hypotheses {
                    for kind in expand_kinds(&a.kinds, big_n, &m) {
                        match verify_admissibility(&m, c, &kind, big_n) {
                            Ok(r) => entries.push(CheckEntry {
                                check: "admissibility",
                                kind: Some(kind),
                                hypotheses: Some(big_n),
                                holds: Some(r.holds),
                                note: None,
                                result: to_value(&r),
                            }),
                            Err(e @ VerifyError::KindConstraintMismatch { .. }) => {
                                entries.push(skipped("admissibility", Some(kind), Some(big_n), e.to_string()))
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
            Suite::Transport => {
                if a.alphabet != 2 {
                    entries.push(skipped("transport", None, None, "Bernoulli marginals need --alphabet 2".into()));
                    continue;
                }
                let marginals =
                    a.transport_ps.iter().map(|&p| product_bernoulli(&m, p)).collect::<Result<Vec<_>, _>>()?;
                let kind = if marginals.len() == 2 {
                    SimilarityKind::LeCamMatch
                } else {
                    SimilarityKind::FanoMatch
                };
                let opts = TransportOptions { trials, seed };
                match verify_transport_bound(&m, c, &kind, &marginals, opts) {
                    Ok(r) => entries.push(CheckEntry {
                        check: "transport",
                        kind: Some(kind),
                        hypotheses: Some(marginals.len()),
                        holds: Some(r.holds),
                        note: None,
                        result: to_value(&r),
                    }),
                    Err(e @ VerifyError::KindConstraintMismatch { .. }) => {
                        entries.push(skipped("transport", Some(kind), Some(marginals.len()), e.to_string()))
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Suite::All => unreachable!("expanded above"),
        }
    }
    let rows: Vec<CheckRow> = entries
        .iter()
        .map(|e| CheckRow {
            check: e.check,
            kind: e.kind.as_ref().map(kind_label).unwrap_or_default(),
            hypotheses: e.hypotheses,
            holds: match e.holds {
                Some(true) => "true".into(),
                Some(false) => "false".into(),
                None => "skipped".into(),
            },
            worst_gap: e.result.get("worst_gap").and_then(Value::as_f64),
        })
        .collect();
    let failed: Vec<String> = entries
        .iter()
        .filter(|e| e.holds == Some(false))
        .map(|e| {
            let what = match &e.kind {
                Some(k) => format!("{} {} N={}", e.check, kind_label(k), e.hypotheses.unwrap_or(0)),
                None => e.check.to_string(),
            };
            let witness = e.result.get("witness").cloned().unwrap_or(Value::Null);
            format!("{what} violated; witness {witness}")
        })
        .collect();
    let all_hold = failed.is_empty();
    Ok(Outcome {
        result: json!({
            "mechanism": a.mechanism,
            "constraint": c,
            "all_hold": all_hold,
            "checks": entries,
        }),
        csv: to_csv(&rows)?,
        failure: (!all_hold).then(|| failed.join("\n")),
    })
}

fn kind_label(k: &SimilarityKind) -> String {
    match k {
        SimilarityKind::GlobalAnchor { anchor: Anchor::Fixed(x) } => format!("global_anchor({:?})", x.entries),
        SimilarityKind::GlobalAnchor { anchor: Anchor::Midpoint } => "global_anchor(midpoint)".into(),
        SimilarityKind::ProjectionAnchor { j } => format!("projection_anchor({j})"),
        k => k.name().into(),
    }
}

pub fn experiment(cmd: &ExperimentCmd, trials: u64, seed: u64) -> Result<Outcome, CliError> {
    let trials = trials as usize;
    let report: ExperimentReport = match cmd {
        ExperimentCmd::Bernoulli(g) => run_bernoulli(&g.ns, &g.constraints(), trials, seed)?,
        ExperimentCmd::Uniform(g) => run_uniform(&g.ns, &g.constraints(), trials, seed)?,
        ExperimentCmd::Gaussian(a) => run_gaussian(a.d, a.sigma, &a.grid.ns, &a.grid.constraints(), trials, seed)?,
        ExperimentCmd::Dpsgml(a) => {
            let space = ParameterSpace::Ball {
                center: vec![0.0; a.d],
                radius: a.radius,
            };
            let model = GaussianMean::new(a.sigma, space, a.clip)?;
            let theta = if a.theta_star.is_empty() {
                vec![0.0; a.d]
            } else {
                a.theta_star.clone()
            };
            run_dpsgml(&model, &theta, &a.ns, &a.rho, a.m, trials, seed)?
        }
    };
    let failure = (!report.sanity_holds()).then(|| {
        report
            .violations
            .iter()
            .map(|v| {
                format!(
                    "sanity violated: n={} {} risk {:.6e} (stderr {:.2e}) below {} {:.6e}",
                    v.n, v.mechanism, v.risk, v.stderr, v.bound, v.value
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(Outcome {
        csv: to_csv(&report.csv_rows())?,
        result: to_value(&report),
        failure,
    })
}
