//! Lower-level optimization: quadratic-programming fast path with an
//! evolutionary fallback.
//!
//! Given an upper vector, [`solve_lower`] finds (an approximation of) the
//! follower's optimum. With a warm start available it first tries the QP
//! route: sample points around the warm start by polynomial mutation, fit a
//! quadratic objective and affine constraint models, minimize that model
//! with the active-set solver, and accept the candidate only if it is truly
//! feasible and the model's objective value agrees with the true objective
//! within `delta_min`. A rejected round recenters on the best truly-evaluated
//! point so far, shrinks the sampling neighborhood tenfold, and refits — a
//! trust-region iteration that converges on smooth non-quadratic followers
//! while a genuinely quadratic follower accepts in the first round. If every
//! round is rejected (non-convex model, failed solve, model/true mismatch),
//! the solve falls back to a small steady-state EA whose initial population
//! is seeded with the warm start and the best rejected QP point.
//!
//! Every objective evaluation — including the QP route's sample points and
//! its acceptance check — is counted in the shared [`EvalCounters`].

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::evo::{
    constraint_cmp, first_wins, pcx_crossover, polynomial_mutation, population_update,
    population_variance, tournament_select, EvoParams, Scored,
};
use crate::linalg::Mat;
use crate::problem::{BilevelProblem, EvalCounters};
use crate::qp::{append_box_rows, solve_qp};
use crate::regression::{quadratic_basis_size, LinModel, QuadModel};

/// Margin by which fitted constraint rows are tightened before the QP solve,
/// so candidates on an active constraint land strictly inside the true
/// feasible region instead of a rounding error outside it. Must dominate both
/// the active-set solver's feasibility slack (1e-9 relative) and the ridge
/// bias of the fitted row coefficients; the objective suboptimality it costs
/// is orders of magnitude below the accuracy targets.
const CONSTRAINT_MARGIN: f64 = 1e-7;

/// Working-set iteration cap of the model QP.
const QP_MAX_ITERS: usize = 50;

/// Model-fit rounds the QP route may attempt before falling back to the EA.
const QP_ROUNDS: usize = 4;

/// Factor by which the mutation distribution index grows per round; the
/// sampling neighborhood shrinks roughly by the same factor.
const QP_ETA_GROWTH: f64 = 10.0;

/// Configuration of [`solve_lower`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerSolverParams {
    /// EA population size.
    pub pop_size: usize,
    /// EA generation cap.
    pub max_generations: u32,
    /// EA termination threshold on the variance ratio α.
    pub alpha_stop: f64,
    /// Maximum allowed |model − true| objective gap for QP acceptance.
    pub delta_min: f64,
    /// Whether the QP route may be attempted at all (the nested baseline
    /// disables it so its cost reflects pure evolutionary solves).
    pub use_qp: bool,
    /// Variation operator parameters.
    pub evo: EvoParams,
}

impl Default for LowerSolverParams {
    fn default() -> Self {
        LowerSolverParams {
            pop_size: 50,
            max_generations: 200,
            alpha_stop: 1e-5,
            delta_min: 1e-4,
            use_qp: true,
            evo: EvoParams::default(),
        }
    }
}

/// Which route produced a lower-level solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// The QP candidate passed the acceptance test.
    Qp,
    /// No warm start (or QP disabled): evolutionary route only.
    Ea,
    /// QP was attempted, rejected, and the EA finished the job.
    QpThenEa,
}

/// Outcome of one lower-level solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerSolveResult {
    /// Best lower vector found.
    pub x_l: Vec<f64>,
    /// Lower objective at `x_l`.
    pub value: f64,
    /// Lower-level constraint violation at `x_l`.
    pub cv: f64,
    /// Route that produced the result.
    pub method: SolveMethod,
    /// Whether the result is trustworthy: the QP acceptance test passed, or
    /// the EA reached its variance threshold with a feasible best. Hitting
    /// the generation cap or ending infeasible reports `false`.
    pub converged: bool,
}

/// Variance-ratio termination measure: `Σ_i current_i / initial_i`.
///
/// Coordinates whose initial variance is zero contribute `0` if they stayed
/// collapsed and `1` if variance appeared, so degenerate initializations
/// neither divide by zero nor block termination.
pub fn alpha_variance(current: &[f64], initial: &[f64]) -> f64 {
    assert_eq!(current.len(), initial.len());
    current
        .iter()
        .zip(initial.iter())
        .map(|(&c, &i)| {
            if i == 0.0 {
                if c == 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                c / i
            }
        })
        .sum()
}

/// QP-route acceptance test: the candidate must be truly feasible and the
/// model's objective prediction must match the true objective strictly
/// within `delta_min`.
pub fn qp_accepts(model_value: f64, true_value: f64, true_cv: f64, delta_min: f64) -> bool {
    true_cv == 0.0 && (model_value - true_value).abs() < delta_min
}

/// Optimizes the lower level for the given upper vector. Exactly one
/// lower-level call is counted per invocation regardless of route.
pub fn solve_lower<R: Rng + ?Sized>(
    problem: &BilevelProblem,
    x_u: &[f64],
    warm_start: Option<&[f64]>,
    params: &LowerSolverParams,
    counters: &mut EvalCounters,
    rng: &mut R,
) -> LowerSolveResult {
    counters.ll_calls += 1;

    let mut qp_candidate: Option<Vec<f64>> = None;
    let mut qp_tried = false;
    if params.use_qp {
        if let Some(center) = warm_start {
            qp_tried = true;
            match qp_route(problem, x_u, center, params, counters, rng) {
                QpOutcome::Accepted { x_l, value, cv } => {
                    return LowerSolveResult { x_l, value, cv, method: SolveMethod::Qp, converged: true };
                }
                QpOutcome::Rejected { candidate } => qp_candidate = candidate,
            }
        }
    }

    let mut seeds: Vec<&[f64]> = Vec::new();
    if let Some(w) = warm_start {
        seeds.push(w);
    }
    if let Some(c) = qp_candidate.as_deref() {
        seeds.push(c);
    }
    let (x_l, value, cv, converged) = ea_route(problem, x_u, &seeds, params, counters, rng);
    LowerSolveResult {
        x_l,
        value,
        cv,
        method: if qp_tried { SolveMethod::QpThenEa } else { SolveMethod::Ea },
        converged,
    }
}

enum QpOutcome {
    Accepted { x_l: Vec<f64>, value: f64, cv: f64 },
    Rejected { candidate: Option<Vec<f64>> },
}

/// Fits quadratic objective / affine constraint models around `center` and
/// minimizes them with the active-set solver, recentering and shrinking the
/// sampling neighborhood for up to [`QP_ROUNDS`] rounds.
fn qp_route<R: Rng + ?Sized>(
    problem: &BilevelProblem,
    x_u: &[f64],
    center: &[f64],
    params: &LowerSolverParams,
    counters: &mut EvalCounters,
    rng: &mut R,
) -> QpOutcome {
    let m = problem.n_lower();
    let bounds = &problem.lower_bounds;
    let n_samples = quadratic_basis_size(m) + m;
    let n_cons = problem.lower_constraints.len();
    let lo: Vec<f64> = (0..m).map(|i| bounds.lo(i)).collect();
    let hi: Vec<f64> = (0..m).map(|i| bounds.hi(i)).collect();

    let mut center = center.to_vec();
    bounds.clamp(&mut center);
    // Best truly-evaluated point across rounds, by feasibility then value.
    let mut best: Option<LowerMember> = None;
    let record = |cand: &LowerMember, best: &mut Option<LowerMember>| {
        let replace = best
            .as_ref()
            .is_none_or(|b| constraint_cmp(cand.scored(), b.scored()) == core::cmp::Ordering::Less);
        if replace {
            *best = Some(cand.clone());
        }
    };

    let mut eta = params.evo.eta_m;
    for _ in 0..QP_ROUNDS {
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
        let mut fs: Vec<f64> = Vec::with_capacity(n_samples);
        let mut gs: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(n_samples); n_cons];
        for _ in 0..n_samples {
            let mut x = center.clone();
            polynomial_mutation(&mut x, bounds, 1.0, eta, rng);
            let (eval, cons) = problem.evaluate_lower_detailed(x_u, &x, counters);
            record(&LowerMember { x_l: x.clone(), value: eval.value, cv: eval.cv }, &mut best);
            fs.push(eval.value);
            for (col, v) in gs.iter_mut().zip(cons) {
                col.push(v);
            }
            xs.push(x);
        }
        eta *= QP_ETA_GROWTH;

        let all_finite =
            fs.iter().all(|v| v.is_finite()) && gs.iter().flatten().all(|v| v.is_finite());
        if all_finite {
            let x_refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
            let objective = QuadModel::fit(&x_refs, &fs);
            let g_refs: Vec<&[f64]> = gs.iter().map(|c| c.as_slice()).collect();
            let cons_models = LinModel::fit_multi(&x_refs, &g_refs);

            // Assemble `Ax <= b`: fitted constraints (tightened by a hair so
            // the candidate ends up strictly inside the true region) plus box
            // rows.
            let mut a_rows: Vec<Vec<f64>> = Vec::with_capacity(n_cons + 2 * m);
            let mut b_margined: Vec<f64> = Vec::with_capacity(n_cons + 2 * m);
            let mut b_raw: Vec<f64> = Vec::with_capacity(n_cons + 2 * m);
            for lm in &cons_models {
                a_rows.push(lm.a.clone());
                b_margined.push(-lm.a0 - CONSTRAINT_MARGIN * (1.0 + lm.a0.abs()));
                b_raw.push(-lm.a0);
            }
            append_box_rows(&mut a_rows, &mut b_margined, &lo, &hi);
            b_raw.extend_from_slice(&b_margined[n_cons..]);
            let a_refs: Vec<&[f64]> = a_rows.iter().map(|r| r.as_slice()).collect();
            let a = Mat::from_rows(&a_refs);

            // Follower objectives without curvature in some direction (linear
            // programs, or quadratics with a flat axis) fit a Hessian the
            // strictly convex active-set solver rejects, and sampling noise
            // can even tip an eigenvalue slightly negative. Levenberg-style
            // damping rescues those fits: escalate a ridge until the
            // subproblem solves. The candidate is still judged against the
            // undamped model and the true objective below, so damping can
            // only propose a point, never certify one.
            let hessian = objective.hessian();
            let scale = (0..m).map(|i| hessian[(i, i)].abs()).fold(1.0, f64::max);
            let attempt = |b: &[f64]| -> Option<Vec<f64>> {
                for damping in [0.0, 1e-8, 1e-5, 1e-2] {
                    let mut h = hessian.clone();
                    for i in 0..m {
                        h[(i, i)] += damping * scale;
                    }
                    if let Some(sol) =
                        solve_qp(&h, objective.linear_term(), &a, &b, QP_MAX_ITERS)
                    {
                        return Some(sol);
                    }
                }
                None
            };
            // A feasible set with empty interior (active rows that meet in a
            // single point) becomes infeasible once tightened; retrying on
            // the raw rows yields a boundary candidate that the acceptance
            // check below will usually reject for rounding a hair outside,
            // but which then recenters the next round (and ultimately seeds
            // the evolutionary fallback) right next to the optimum.
            if let Some(mut x_l) = attempt(&b_margined).or_else(|| attempt(&b_raw)) {
                bounds.clamp(&mut x_l);
                let model_value = objective.value(&x_l);
                let eval = problem.evaluate_lower(x_u, &x_l, counters);
                if qp_accepts(model_value, eval.value, eval.cv, params.delta_min) {
                    return QpOutcome::Accepted { x_l, value: eval.value, cv: eval.cv };
                }
                record(&LowerMember { x_l, value: eval.value, cv: eval.cv }, &mut best);
            }
        }

        if let Some(b) = &best {
            center.clone_from(&b.x_l);
        }
    }
    QpOutcome::Rejected { candidate: best.map(|b| b.x_l) }
}

#[derive(Clone, PartialEq)]
struct LowerMember {
    x_l: Vec<f64>,
    value: f64,
    cv: f64,
}

impl LowerMember {
    fn scored(&self) -> Scored {
        Scored { cv: self.cv, value: self.value }
    }
}

/// Steady-state EA over the lower variables, seeded with any warm-start /
/// rejected-QP vectors. Returns `(x_l, value, cv, converged)`.
fn ea_route<R: Rng + ?Sized>(
    problem: &BilevelProblem,
    x_u: &[f64],
    seeds: &[&[f64]],
    params: &LowerSolverParams,
    counters: &mut EvalCounters,
    rng: &mut R,
) -> (Vec<f64>, f64, f64, bool) {
    let bounds = &problem.lower_bounds;
    let m = problem.n_lower();
    let evo = &params.evo;

    let mut pop: Vec<LowerMember> = Vec::with_capacity(params.pop_size);
    for seed in seeds.iter().take(params.pop_size) {
        let mut x = seed.to_vec();
        bounds.clamp(&mut x);
        let eval = problem.evaluate_lower(x_u, &x, counters);
        pop.push(LowerMember { x_l: x, value: eval.value, cv: eval.cv });
    }
    while pop.len() < params.pop_size {
        let x = bounds.sample_uniform(rng);
        let eval = problem.evaluate_lower(x_u, &x, counters);
        pop.push(LowerMember { x_l: x, value: eval.value, cv: eval.cv });
    }

    let initial_var = population_variance(pop.iter().map(|mem| mem.x_l.as_slice()), m);
    let mut alpha_converged = false;

    for _ in 0..params.max_generations {
        let scores: Vec<Scored> = pop.iter().map(|mem| mem.scored()).collect();
        let winners = tournament_select(&scores, evo.mu, rng);
        let index_pos = (0..winners.len())
            .reduce(|best, i| {
                if first_wins(scores[winners[best]], scores[winners[i]]) {
                    best
                } else {
                    i
                }
            })
            .unwrap();
        let parents: Vec<&[f64]> = winners.iter().map(|&w| pop[w].x_l.as_slice()).collect();

        let mut offsprings: Vec<LowerMember> = Vec::with_capacity(evo.lambda);
        for _ in 0..evo.lambda {
            let mut child = if rng.random_range(0.0..1.0) < evo.crossover_prob {
                pcx_crossover(&parents, index_pos, bounds, evo, rng)
            } else {
                parents[index_pos].to_vec()
            };
            if rng.random_range(0.0..1.0) < evo.mutation_prob {
                polynomial_mutation(&mut child, bounds, 1.0 / m as f64, evo.eta_m, rng);
            }
            let eval = problem.evaluate_lower(x_u, &child, counters);
            offsprings.push(LowerMember { x_l: child, value: eval.value, cv: eval.cv });
        }

        population_update(&mut pop, &offsprings, evo.r, None, LowerMember::scored, rng);

        let var = population_variance(pop.iter().map(|mem| mem.x_l.as_slice()), m);
        if alpha_variance(&var, &initial_var) < params.alpha_stop {
            alpha_converged = true;
            break;
        }
    }

    let best = pop
        .iter()
        .reduce(|best, mem| {
            if constraint_cmp(best.scored(), mem.scored()) != core::cmp::Ordering::Greater {
                best
            } else {
                mem
            }
        })
        .unwrap();
    let converged = alpha_converged && best.cv == 0.0;
    (best.x_l.clone(), best.value, best.cv, converged)
}
