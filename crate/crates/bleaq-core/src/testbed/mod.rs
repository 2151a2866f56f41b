//! Benchmark problem catalog and ground-truth verification.
//!
//! Three families are available by string id:
//!
//! - `ex1` — a single-variable example whose reaction is `x_l = e^{x_u}`,
//!   small enough to solve by hand and sharp enough (the follower's optimum
//!   sits in an absolute-value kink) to exercise a whole solver stack;
//! - `smd1`..`smd6` — the scalable [SMD family](smd) with closed-form
//!   reactions and known optima;
//! - `tp1`..`tp10` — the fixed-dimension [classical collection](tp) with
//!   best-known solutions.
//!
//! Problems that have analytic ground truth come with an [`ExactOracle`],
//! and [`verify_oracle`] stress-tests an oracle against its problem: the
//! claimed reaction must be feasible and must not be beaten by random
//! lower-level sampling, and the claimed optimum must reproduce the claimed
//! objective values. Running it over the catalog guards against
//! transcription slips in either the objectives or the reactions.

mod smd;
mod tp;

pub use smd::{make_smd, make_smd5, BananaForm, SmdDims};
pub use tp::make_tp;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

// Inherent float methods win under `std`; this supplies them for no_std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::problem::{BilevelProblem, Bounds, EvalCounters, KnownOptimum};

/// Analytic ground truth for a benchmark problem: the exact lower-level
/// reaction plus the location and value of the bilevel optimum.
pub struct ExactOracle {
    /// Maps an upper vector to the follower's exact optimum.
    pub psi_exact: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    /// Upper vector of the bilevel optimum.
    pub x_u_star: Vec<f64>,
    /// Upper objective value at the optimum.
    pub upper_star: f64,
    /// Lower objective value at the optimum.
    pub lower_star: f64,
}

/// How hard [`verify_oracle`] probes an oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleCheck {
    /// Number of random upper vectors at which the reaction is challenged.
    pub probes: usize,
    /// Random lower vectors sampled per probe; a feasible sample that beats
    /// the reaction by more than `beat_tol` fails the check.
    pub samples_per_probe: usize,
    /// Tolerance for a sample beating the reaction.
    pub beat_tol: f64,
    /// Tolerance for reproducing the claimed optimum values.
    pub star_tol: f64,
}

impl Default for OracleCheck {
    fn default() -> Self {
        Self {
            probes: 16,
            samples_per_probe: 10_000,
            beat_tol: 1e-9,
            star_tol: 1e-10,
        }
    }
}

/// What a successful [`verify_oracle`] run observed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSummary {
    /// Probes performed.
    pub probes: usize,
    /// Samples drawn per probe.
    pub samples_per_probe: usize,
    /// Smallest value of `best sampled f − reaction f` seen over all probes.
    /// Non-negative means no sample ever matched the reaction; values in
    /// `(-beat_tol, 0]` mean samples tied within tolerance.
    pub worst_margin: f64,
    /// `|F(x_u*, ψ(x_u*)) − claimed F*|`.
    pub upper_star_gap: f64,
    /// `|f(x_u*, ψ(x_u*)) − claimed f*|`.
    pub lower_star_gap: f64,
    /// Lower-level evaluations spent (probing is honest work and is counted
    /// like any other evaluation).
    pub ll_evaluations: u64,
}

/// Ways an oracle can fail verification. Every variant names the upper
/// vector at which the failure was observed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    /// The claimed reaction leaves the lower box or violates a lower
    /// constraint.
    #[error("{problem}: reaction is infeasible at x_u = {x_u:?} (violation {cv:.3e})")]
    ReactionInfeasible {
        /// Problem id.
        problem: String,
        /// Probe point.
        x_u: Vec<f64>,
        /// Constraint violation of the claimed reaction (0 means the box
        /// itself was violated).
        cv: f64,
    },
    /// A random feasible sample achieved a strictly better lower objective
    /// than the claimed reaction.
    #[error(
        "{problem}: reaction beaten at x_u = {x_u:?}: ψ gives f = {psi_value}, \
         a sample gives f = {sample_value}"
    )]
    ReactionBeaten {
        /// Problem id.
        problem: String,
        /// Probe point.
        x_u: Vec<f64>,
        /// Lower objective of the claimed reaction.
        psi_value: f64,
        /// Lower objective of the winning sample.
        sample_value: f64,
    },
    /// Evaluating the problem at the claimed optimum does not reproduce the
    /// claimed objective value.
    #[error("{problem}: {level} value at the claimed optimum is {got}, oracle claims {want}")]
    OptimumMismatch {
        /// Problem id.
        problem: String,
        /// Which level disagreed (`"upper"` or `"lower"`).
        level: &'static str,
        /// Value computed from the problem.
        got: f64,
        /// Value claimed by the oracle.
        want: f64,
    },
}

/// Challenges `oracle` against `problem`: at each of `check.probes` random
/// upper vectors the claimed reaction must be feasible and unbeaten by
/// `check.samples_per_probe` random feasible lower vectors (within
/// `check.beat_tol`), and the claimed optimum must reproduce the claimed
/// upper/lower values within `check.star_tol`.
pub fn verify_oracle<R: Rng + ?Sized>(
    problem: &BilevelProblem,
    oracle: &ExactOracle,
    check: &OracleCheck,
    rng: &mut R,
) -> Result<OracleSummary, OracleError> {
    let mut counters = EvalCounters::new();
    let mut worst_margin = f64::INFINITY;

    for _ in 0..check.probes {
        let x_u = problem.upper_bounds.sample_uniform(rng);
        let x_l = (oracle.psi_exact)(&x_u);
        let reaction = problem.evaluate_lower(&x_u, &x_l, &mut counters);
        if reaction.cv > 0.0 || !problem.lower_bounds.contains(&x_l) {
            return Err(OracleError::ReactionInfeasible {
                problem: problem.id.clone(),
                x_u,
                cv: reaction.cv,
            });
        }

        let mut best_sample = f64::INFINITY;
        for _ in 0..check.samples_per_probe {
            let cand = problem.lower_bounds.sample_uniform(rng);
            let eval = problem.evaluate_lower(&x_u, &cand, &mut counters);
            if eval.cv == 0.0 && eval.value < best_sample {
                best_sample = eval.value;
            }
        }
        if best_sample < reaction.value - check.beat_tol {
            return Err(OracleError::ReactionBeaten {
                problem: problem.id.clone(),
                x_u,
                psi_value: reaction.value,
                sample_value: best_sample,
            });
        }
        worst_margin = worst_margin.min(best_sample - reaction.value);
    }

    let x_l_star = (oracle.psi_exact)(&oracle.x_u_star);
    let upper = problem.evaluate_upper(&oracle.x_u_star, &x_l_star, &mut counters);
    let lower = problem.evaluate_lower(&oracle.x_u_star, &x_l_star, &mut counters);
    let upper_star_gap = (upper.value - oracle.upper_star).abs();
    let lower_star_gap = (lower.value - oracle.lower_star).abs();
    if upper_star_gap > check.star_tol {
        return Err(OracleError::OptimumMismatch {
            problem: problem.id.clone(),
            level: "upper",
            got: upper.value,
            want: oracle.upper_star,
        });
    }
    if lower_star_gap > check.star_tol {
        return Err(OracleError::OptimumMismatch {
            problem: problem.id.clone(),
            level: "lower",
            got: lower.value,
            want: oracle.lower_star,
        });
    }

    Ok(OracleSummary {
        probes: check.probes,
        samples_per_probe: check.samples_per_probe,
        worst_margin,
        upper_star_gap,
        lower_star_gap,
        ll_evaluations: counters.ll_fe,
    })
}

/// Errors raised when a catalog request cannot be built.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    /// The id does not name any catalog problem.
    #[error("no problem named `{0}` in the catalog")]
    UnknownProblem(String),
    /// The id is valid but the requested block sizes break the instance.
    #[error("invalid dimensions for {problem}: {reason}")]
    InvalidDims {
        /// Problem id.
        problem: String,
        /// What was wrong with the request.
        reason: String,
    },
}

/// A catalog problem plus its ground truth, when the family has one.
pub struct Instance {
    /// The problem, ready to optimize.
    pub problem: BilevelProblem,
    /// Analytic reaction and optimum (`ex1` and the SMD family).
    pub oracle: Option<ExactOracle>,
}

/// Every id [`instantiate`] accepts, in catalog order.
pub fn problem_ids() -> &'static [&'static str] {
    &[
        "ex1", "smd1", "smd2", "smd3", "smd4", "smd5", "smd6", "tp1", "tp2", "tp3", "tp4",
        "tp5", "tp6", "tp7", "tp8", "tp9", "tp10",
    ]
}

/// Builds the catalog problem named `id` (case-insensitive). `dims` applies
/// to the scalable SMD family and is ignored by the fixed-dimension
/// problems.
pub fn instantiate(id: &str, dims: SmdDims) -> Result<Instance, CatalogError> {
    let key = id.to_ascii_lowercase();
    if key == "ex1" {
        let (problem, oracle) = make_ex1();
        return Ok(Instance {
            problem,
            oracle: Some(oracle),
        });
    }
    if let Some(rest) = key.strip_prefix("smd") {
        if let Ok(index) = rest.parse::<usize>() {
            let (problem, oracle) = make_smd(index, dims)?;
            return Ok(Instance {
                problem,
                oracle: Some(oracle),
            });
        }
    }
    if let Some(rest) = key.strip_prefix("tp") {
        if let Ok(index) = rest.parse::<usize>() {
            let problem = make_tp(index)?;
            return Ok(Instance {
                problem,
                oracle: None,
            });
        }
    }
    Err(CatalogError::UnknownProblem(id.to_string()))
}

/// The worked single-variable example: leader `|x_u| + x_l − 1`, follower
/// `x_u² + |x_l − e^{x_u}|`. The follower's kink forces `x_l = e^{x_u}`
/// exactly, so the leader reduces to `|x_u| + e^{x_u} − 1` with its optimum
/// at `x_u = 0`, `x_l = 1`, where both objectives vanish. The lower box
/// reaches 150 so the reaction stays interior over the whole upper range
/// (`e^5 ≈ 148.4`).
pub fn make_ex1() -> (BilevelProblem, ExactOracle) {
    let problem = BilevelProblem {
        id: "ex1".to_string(),
        upper_objective: Box::new(|xu, xl| xu[0].abs() + xl[0] - 1.0),
        lower_objective: Box::new(|xu, xl| xu[0] * xu[0] + (xl[0] - xu[0].exp()).abs()),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(1, -5.0, 5.0),
        lower_bounds: Bounds::uniform(1, -5.0, 150.0),
        known_optimum: Some(KnownOptimum {
            upper_value: 0.0,
            lower_value: 0.0,
            x_u: vec![0.0],
            x_l: Some(vec![1.0]),
        }),
    };
    let oracle = ExactOracle {
        psi_exact: Box::new(|xu| vec![xu[0].exp()]),
        x_u_star: vec![0.0],
        upper_star: 0.0,
        lower_star: 0.0,
    };
    (problem, oracle)
}
