use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpminimax::bounds::TestForm;
use dpminimax::PrivacyConstraint;
use serde::{Deserialize, Serialize};

/// Fully resolved invocation. Embedded verbatim in every output file, so a
/// report can be replayed with `dpminimax replay <file>`.
#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "dpminimax", version, about = "Private minimax lower bounds, couplings, verifiers and experiments")]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo trials (subcommand default when omitted).
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Output file. Experiments write `<path>.json` and `<path>.csv`.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Evaluate private Le Cam or Fano bounds over a parameter grid.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Estimate coupling disagreements or solve the exact LP.
    #[command(subcommand)]
    Couple(CoupleCmd),
    /// Run exhaustive verifiers on a finite mechanism.
    Verify(VerifyArgs),
    /// Run a Monte-Carlo experiment grid.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Re-run the configuration embedded in a JSON report.
    #[serde(skip)]
    Replay {
        /// JSON report or bare RunConfig.
        file: PathBuf,
    },
}

/// Privacy constraint flags. Neither `--dp` nor `--zcdp` means no constraint.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintArgs {
    /// (ε, δ)-differential privacy; pure when δ = 0.
    #[arg(long, conflicts_with = "zcdp", requires = "eps")]
    pub dp: bool,
    /// ρ-zero-concentrated differential privacy.
    #[arg(long, requires = "rho")]
    pub zcdp: bool,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long)]
    pub rho: Option<f64>,
}

impl ConstraintArgs {
    pub fn constraint(&self) -> Option<PrivacyConstraint> {
        if self.dp {
            let epsilon = self.eps?;
            Some(if self.delta > 0.0 {
                PrivacyConstraint::ApproxDp {
                    epsilon,
                    delta: self.delta,
                }
            } else {
                PrivacyConstraint::PureDp { epsilon }
            })
        } else if self.zcdp {
            Some(PrivacyConstraint::Zcdp { rho: self.rho? })
        } else {
            Some(PrivacyConstraint::None)
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormArg {
    Joint,
    Product,
}

impl From<FormArg> for TestForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Joint => TestForm::Joint,
            FormArg::Product => TestForm::Product,
        }
    }
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "snake_case")]
pub enum BoundsCmd {
    /// Two-point bound.
    Lecam(LecamArgs),
    /// N-hypothesis bound.
    Fano(FanoArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LecamArgs {
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    /// Sample sizes (comma separated).
    #[arg(long, required = true, value_delimiter = ',')]
    pub n: Vec<u64>,
    /// Total variation values (comma separated).
    #[arg(long, required = true, value_delimiter = ',')]
    pub tv: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FormArg::Joint)]
    pub form: FormArg,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoArgs {
    #[command(flatten)]
    pub constraint: ConstraintArgs,
    #[arg(long, required = true, value_delimiter = ',')]
    pub n: Vec<u64>,
    /// Number of hypotheses.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub hypotheses: usize,
    /// Common off-diagonal TV value.
    #[arg(long, conflicts_with = "tv_matrix", required_unless_present = "tv_matrix")]
    pub tv_all: Option<f64>,
    /// Full TV matrix, rows separated by ';'.
    #[arg(long)]
    pub tv_matrix: Option<String>,
    /// Common KL(P_i || Q), enabling the classical branch.
    #[arg(long)]
    pub kl_all: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormArg::Joint)]
    pub form: FormArg,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CoupleCmd {
    /// Maximal coupling of two laws.
    Pair(DistArgs),
    /// Exponential races over all given laws.
    Races(DistArgs),
    /// Shared-uniform coupling of Bernoulli laws.
    Shared(SharedArgs),
    /// Exact minimum total disagreement.
    Lp(DistArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistArgs {
    /// A law as `atom:weight,...`; repeat the flag per marginal. Defaults to
    /// uniform laws on {-1,0}, {0,1}, {1,-1}.
    #[arg(long = "dist", allow_hyphen_values = true)]
    pub dists: Vec<String>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedArgs {
    /// Success probabilities.
    #[arg(long, required = true, value_delimiter = ',')]
    pub ps: Vec<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismArg {
    /// Randomized response per entry.
    Rr,
    /// Sum of per-entry randomized responses.
    RrSum,
    Identity,
    Constant,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Privacy,
    Group,
    KlDp,
    Admissibility,
    Transport,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    All,
    Global,
    Projection,
    LeCamMatch,
    Pairwise,
    FanoMatch,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = MechanismArg::Rr)]
    pub mechanism: MechanismArg,
    /// ε of the mechanism and of the DP constraint.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Check against ρ-zCDP instead of (ε, δ)-DP.
    #[arg(long, requires = "rho")]
    pub zcdp: bool,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Dataset length.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub suite: Vec<Suite>,
    /// Hypothesis counts for admissibility.
    #[arg(long = "N", value_delimiter = ',', default_value = "2")]
    #[serde(rename = "N")]
    pub hypotheses: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub kinds: Vec<KindArg>,
    /// Per-entry Bernoulli parameters of the transport marginals.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.8")]
    pub transport_ps: Vec<f64>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ExperimentCmd {
    Bernoulli(GridArgs),
    Uniform(GridArgs),
    Gaussian(GaussianArgs),
    Dpsgml(DpsgmlArgs),
}

/// Constraint grid: one constraint per `--eps` value (approximate when
/// `--delta` > 0), one per `--rho` value, plus the non-private cell when
/// `--non-private` is set or nothing else is given.
#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long)]
    pub non_private: bool,
}

impl GridArgs {
    pub fn constraints(&self) -> Vec<PrivacyConstraint> {
        let mut out = Vec::new();
        if self.non_private || (self.eps.is_empty() && self.rho.is_empty()) {
            out.push(PrivacyConstraint::None);
        }
        for &epsilon in &self.eps {
            out.push(if self.delta > 0.0 {
                PrivacyConstraint::ApproxDp {
                    epsilon,
                    delta: self.delta,
                }
            } else {
                PrivacyConstraint::PureDp { epsilon }
            });
        }
        out.extend(self.rho.iter().map(|&rho| PrivacyConstraint::Zcdp { rho }));
        out
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 66)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpsgmlArgs {
    #[arg(long, required = true, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, required = true, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Radius of the parameter ball around the origin.
    #[arg(long, default_value_t = 10.0)]
    pub radius: f64,
    /// Per-sample gradient clip.
    #[arg(long, default_value_t = 10.0)]
    pub clip: f64,
    /// Batch size.
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// True parameter; defaults to the origin.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta_star: Vec<f64>,
}
