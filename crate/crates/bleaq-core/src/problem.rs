//! Bilevel problem definitions and counted objective evaluation.
//!
//! A [`BilevelProblem`] packages the upper (leader) and lower (follower)
//! objectives, inequality constraints at both levels, variable boxes, and an
//! optional best-known solution. All objective/constraint access goes through
//! [`BilevelProblem::evaluate_upper`] / [`BilevelProblem::evaluate_lower`] so
//! that function-evaluation accounting in [`EvalCounters`] is impossible to
//! bypass.
//!
//! Constraints use the `g(x_u, x_l) <= 0` convention. A point's constraint
//! violation is the unweighted sum of positive parts; a point is feasible
//! exactly when that sum is `0.0`.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Objective or constraint function of both decision vectors.
pub type BilevelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Closed per-variable boxes `[lo_i, hi_i]` for one decision vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    /// Builds bounds from parallel lower/upper vectors.
    ///
    /// Panics if the vectors differ in length, are empty, or any `lo > hi`:
    /// those are programming errors in a problem definition.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "bound vectors must have equal length");
        assert!(!lo.is_empty(), "bounds must cover at least one variable");
        for i in 0..lo.len() {
            assert!(
                lo[i] <= hi[i] && lo[i].is_finite() && hi[i].is_finite(),
                "invalid interval [{}, {}] for variable {}",
                lo[i],
                hi[i],
                i
            );
        }
        Bounds { lo, hi }
    }

    /// Same interval `[lo, hi]` replicated for `dim` variables.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds::new(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    /// Concatenates two bound sets (e.g. an `x_l1` block followed by `x_l2`).
    pub fn concat(&self, other: &Bounds) -> Self {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo.extend_from_slice(&other.lo);
        hi.extend_from_slice(&other.hi);
        Bounds { lo, hi }
    }

    /// Number of variables covered.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Lower end of variable `i`.
    pub fn lo(&self, i: usize) -> f64 {
        self.lo[i]
    }

    /// Upper end of variable `i`.
    pub fn hi(&self, i: usize) -> f64 {
        self.hi[i]
    }

    /// Interval width of variable `i`.
    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    /// Clamps `x` into the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.max(self.lo[i]).min(self.hi[i]);
        }
    }

    /// Whether `x` lies inside the box (inclusive).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lo[i] && v <= self.hi[i])
    }

    /// Draws a uniform random point inside the box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|i| rng.random_range(self.lo[i]..=self.hi[i]))
            .collect()
    }
}

/// Best-known (or exactly known) solution of a benchmark problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    /// Upper objective value `F0*`.
    pub upper_value: f64,
    /// Lower objective value `f0*`.
    pub lower_value: f64,
    /// Upper-level solution vector.
    pub x_u: Vec<f64>,
    /// Lower-level solution vector, when a reference one is known.
    pub x_l: Option<Vec<f64>>,
}

/// A bilevel optimization problem with inequality constraints at both levels.
///
/// Minimize `upper_objective(x_u, x_l)` over `x_u` subject to
/// `upper_constraints <= 0` and `x_l` being a minimizer of
/// `lower_objective(x_u, .)` under `lower_constraints <= 0`, with both
/// vectors confined to their boxes.
pub struct BilevelProblem {
    /// Catalog identifier, e.g. `"SMD1"`.
    pub id: String,
    /// Upper objective `F0`.
    pub upper_objective: Box<BilevelFn>,
    /// Lower objective `f0`.
    pub lower_objective: Box<BilevelFn>,
    /// Upper-level constraints `Fk(x_u, x_l) <= 0`.
    pub upper_constraints: Vec<Box<BilevelFn>>,
    /// Lower-level constraints `fj(x_u, x_l) <= 0`.
    pub lower_constraints: Vec<Box<BilevelFn>>,
    /// Box for `x_u`.
    pub upper_bounds: Bounds,
    /// Box for `x_l`.
    pub lower_bounds: Bounds,
    /// Best-known solution, when available.
    pub known_optimum: Option<KnownOptimum>,
}

impl fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("id", &self.id)
            .field("n_upper", &self.n_upper())
            .field("n_lower", &self.n_lower())
            .field("upper_constraints", &self.upper_constraints.len())
            .field("lower_constraints", &self.lower_constraints.len())
            .finish()
    }
}

/// Result of one counted upper-level evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperEval {
    /// Upper objective `F0(x_u, x_l)`.
    pub value: f64,
    /// Violation sum over BOTH levels' constraints (the lower-level
    /// constraints restrict the upper problem's feasible region too).
    pub cv: f64,
}

/// Result of one counted lower-level evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerEval {
    /// Lower objective `f0(x_u, x_l)`.
    pub value: f64,
    /// Violation sum over the lower-level constraints only.
    pub cv: f64,
}

impl BilevelProblem {
    /// Upper-level dimension.
    pub fn n_upper(&self) -> usize {
        self.upper_bounds.dim()
    }

    /// Lower-level dimension.
    pub fn n_lower(&self) -> usize {
        self.lower_bounds.dim()
    }

    /// Evaluates the upper objective and the combined constraint violation.
    ///
    /// Counts exactly one upper-level function evaluation regardless of how
    /// many constraints the problem carries. Any non-finite objective or
    /// constraint value marks the point invalid: `cv` becomes `+inf`.
    pub fn evaluate_upper(&self, x_u: &[f64], x_l: &[f64], counters: &mut EvalCounters) -> UpperEval {
        debug_assert_eq!(x_u.len(), self.n_upper());
        debug_assert_eq!(x_l.len(), self.n_lower());
        counters.ul_fe += 1;
        let value = (self.upper_objective)(x_u, x_l);
        let mut cv = violation_sum(&self.upper_constraints, x_u, x_l)
            + violation_sum(&self.lower_constraints, x_u, x_l);
        if !value.is_finite() || !cv.is_finite() {
            cv = f64::INFINITY;
        }
        UpperEval { value, cv }
    }

    /// Evaluates the lower objective and the lower-level constraint violation.
    ///
    /// Counts exactly one lower-level function evaluation.
    pub fn evaluate_lower(&self, x_u: &[f64], x_l: &[f64], counters: &mut EvalCounters) -> LowerEval {
        debug_assert_eq!(x_u.len(), self.n_upper());
        debug_assert_eq!(x_l.len(), self.n_lower());
        counters.ll_fe += 1;
        let value = (self.lower_objective)(x_u, x_l);
        let mut cv = violation_sum(&self.lower_constraints, x_u, x_l);
        if !value.is_finite() || !cv.is_finite() {
            cv = f64::INFINITY;
        }
        LowerEval { value, cv }
    }

    /// Like [`Self::evaluate_lower`] but also returns the raw value of every
    /// lower-level constraint (needed to fit constraint models). Still counts
    /// as a single lower-level function evaluation.
    pub fn evaluate_lower_detailed(
        &self,
        x_u: &[f64],
        x_l: &[f64],
        counters: &mut EvalCounters,
    ) -> (LowerEval, Vec<f64>) {
        let eval = self.evaluate_lower(x_u, x_l, counters);
        let gs: Vec<f64> = self
            .lower_constraints
            .iter()
            .map(|g| g(x_u, x_l))
            .collect();
        (eval, gs)
    }
}

fn violation_sum(constraints: &[Box<BilevelFn>], x_u: &[f64], x_l: &[f64]) -> f64 {
    let mut cv = 0.0;
    for g in constraints {
        let v = g(x_u, x_l);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        if v > 0.0 {
            cv += v;
        }
    }
    cv
}

/// Marker for how trustworthy a member's lower-level vector is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// `x_l` came from an actual (successful) lower-level optimization, or
    /// from a ψ-model whose fit error passed the trust threshold.
    Trusted,
    /// `x_l` is a model prediction (or a failed solve) that was never
    /// confirmed by lower-level optimization.
    Approximate,
}

impl Tag {
    /// Whether this member may serve as a ψ-model training sample / elite.
    pub fn is_trusted(self) -> bool {
        matches!(self, Tag::Trusted)
    }
}

/// One population member of either algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    /// Upper-level decision vector.
    pub x_u: Vec<f64>,
    /// Lower-level decision vector paired with `x_u`.
    pub x_l: Vec<f64>,
    /// Trust marker for `x_l` (see [`Tag`]).
    pub tag: Tag,
    /// Whether `x_l` came from an actual lower-level solve rather than a
    /// model prediction. Certified members are the ψ model's training data.
    pub certified: bool,
    /// Whether `x_l` has been confirmed by a *second* warm-started solve.
    /// A single solve can sit in the wrong basin of a multimodal follower —
    /// and when an under-optimized reaction flatters the upper objective,
    /// selection actively hoards such members. A member must be audited
    /// before it can stand as the elite; for predictions the certifying
    /// solve doubles as the audit, so only solve-born members pay an extra
    /// solve, once, on first accession.
    pub audited: bool,
    /// Upper objective value at `(x_u, x_l)`.
    pub upper_value: f64,
    /// Lower objective value at `(x_u, x_l)`.
    pub lower_value: f64,
    /// Combined constraint violation seen by the upper level.
    pub cv_upper: f64,
    /// Lower-level constraint violation.
    pub cv_lower: f64,
}

/// Function-evaluation bookkeeping shared by every algorithm component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    /// Upper-level objective evaluations.
    pub ul_fe: u64,
    /// Lower-level objective evaluations.
    pub ll_fe: u64,
    /// Number of [`crate::lower::solve_lower`] invocations.
    pub ll_calls: u64,
}

impl EvalCounters {
    /// Fresh zeroed counters.
    pub fn new() -> Self {
        EvalCounters::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::{boxed::Box, vec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_problem() -> BilevelProblem {
        BilevelProblem {
            id: "toy".to_string(),
            upper_objective: Box::new(|xu, xl| xu[0] * xu[0] + xl[0]),
            lower_objective: Box::new(|xu, xl| (xl[0] - xu[0]) * (xl[0] - xu[0])),
            upper_constraints: vec![Box::new(|xu, _| xu[0] - 1.0)],
            lower_constraints: vec![Box::new(|_, xl| -xl[0])],
            upper_bounds: Bounds::uniform(1, -2.0, 2.0),
            lower_bounds: Bounds::uniform(1, -2.0, 2.0),
            known_optimum: None,
        }
    }

    #[test]
    fn upper_evaluation_counts_once_and_sums_both_levels() {
        let p = toy_problem();
        let mut c = EvalCounters::new();
        // x_u = 1.5 violates the upper constraint by 0.5; x_l = -0.25
        // violates the lower constraint by 0.25. Both show up in cv_upper.
        let e = p.evaluate_upper(&[1.5], &[-0.25], &mut c);
        assert_eq!(c, EvalCounters { ul_fe: 1, ll_fe: 0, ll_calls: 0 });
        assert_eq!(e.value, 1.5 * 1.5 - 0.25);
        assert_eq!(e.cv, 0.5 + 0.25);
    }

    #[test]
    fn lower_evaluation_sees_only_lower_constraints() {
        let p = toy_problem();
        let mut c = EvalCounters::new();
        // The upper constraint is violated here but must not leak into cv_lower.
        let e = p.evaluate_lower(&[1.5], &[0.5], &mut c);
        assert_eq!(c, EvalCounters { ul_fe: 0, ll_fe: 1, ll_calls: 0 });
        assert_eq!(e.value, 1.0);
        assert_eq!(e.cv, 0.0);
    }

    #[test]
    fn boundary_points_are_feasible() {
        let p = toy_problem();
        let mut c = EvalCounters::new();
        // Exactly on both constraint boundaries: violation must be exactly zero.
        let e = p.evaluate_upper(&[1.0], &[0.0], &mut c);
        assert_eq!(e.cv, 0.0);
    }

    #[test]
    fn non_finite_values_poison_cv() {
        let p = BilevelProblem {
            id: "bad".to_string(),
            upper_objective: Box::new(|_, _| f64::NAN),
            lower_objective: Box::new(|_, _| f64::INFINITY),
            upper_constraints: vec![],
            lower_constraints: vec![],
            upper_bounds: Bounds::uniform(1, 0.0, 1.0),
            lower_bounds: Bounds::uniform(1, 0.0, 1.0),
            known_optimum: None,
        };
        let mut c = EvalCounters::new();
        assert_eq!(p.evaluate_upper(&[0.5], &[0.5], &mut c).cv, f64::INFINITY);
        assert_eq!(p.evaluate_lower(&[0.5], &[0.5], &mut c).cv, f64::INFINITY);
    }

    #[test]
    fn detailed_lower_eval_returns_raw_constraint_values_for_one_fe() {
        let p = toy_problem();
        let mut c = EvalCounters::new();
        let (e, gs) = p.evaluate_lower_detailed(&[0.0], &[-0.5], &mut c);
        assert_eq!(c.ll_fe, 1, "constraint readout must not cost extra FE");
        assert_eq!(gs, vec![0.5]);
        assert_eq!(e.cv, 0.5);
    }

    #[test]
    fn bounds_clamp_contain_and_sample() {
        let b = Bounds::new(vec![-1.0, 0.0], vec![1.0, 3.0]);
        assert_eq!(b.dim(), 2);
        assert_eq!(b.width(1), 3.0);
        let mut x = vec![-5.0, 7.0];
        b.clamp(&mut x);
        assert_eq!(x, vec![-1.0, 3.0]);
        assert!(b.contains(&x), "clamped points are inside the box");

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert!(b.contains(&b.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn bounds_concat_stacks_blocks() {
        let b = Bounds::uniform(2, -5.0, 10.0).concat(&Bounds::uniform(1, 0.0, 1.0));
        assert_eq!(b.dim(), 3);
        assert_eq!((b.lo(2), b.hi(2)), (0.0, 1.0));
        assert_eq!((b.lo(0), b.hi(0)), (-5.0, 10.0));
    }

    #[test]
    #[should_panic(expected = "invalid interval")]
    fn inverted_bounds_are_rejected() {
        let _ = Bounds::new(vec![1.0], vec![0.0]);
    }
}
