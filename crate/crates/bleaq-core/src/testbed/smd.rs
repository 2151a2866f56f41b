//! The scalable SMD benchmark family (SMD1–SMD6).
//!
//! Every instance shares one block layout. The upper vector splits into
//! `x_u = (x_u1, x_u2)` with `p` and `r` components; the lower vector splits
//! into `x_l = (x_l1, x_l2)` with `q` (or `q + s` for SMD6) and `r`
//! components. Both objectives are sums of three terms,
//!
//! ```text
//! F(x_u, x_l) = F1(x_u1) + F2(x_l1) + F3(x_u2, x_l2)
//! f(x_u, x_l) = f1(x_u1) + f2(x_l1) + f3(x_u2, x_l2)
//! ```
//!
//! where `f2` controls the difficulty of the lower problem (sphere,
//! Rastrigin, or Rosenbrock landscapes), `f3` couples the two levels through
//! an invertible relation per component, and `F2`/`F3` decide whether leader
//! and follower cooperate (SMD1, SMD3) or conflict (SMD2, SMD4–SMD6). Each
//! constructor also returns the closed-form reaction `ψ(x_u)` and the known
//! bilevel optimum `x_u = 0`, `F = f = 0`, packaged as an
//! [`ExactOracle`](super::ExactOracle) so solver output can be judged against
//! ground truth.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

// Inherent float methods win under `std`; this supplies them for no_std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{CatalogError, ExactOracle};
use crate::problem::{BilevelProblem, Bounds, KnownOptimum};

/// Margin by which open interval endpoints are pulled inward so the boxes
/// stay closed: SMD1/SMD3 need `x_l2` strictly inside `(-π/2, π/2)` for
/// `tan` to stay finite, and SMD2 needs `x_l2 > 0` for `log`. The margin is
/// small enough that every reaction value over the upper box stays interior.
const OPEN_MARGIN: f64 = 1e-6;

/// Block sizes of an SMD instance: `p` and `r` split the upper vector,
/// `q` (plus `s` extra degenerate components for SMD6) and `r` split the
/// lower vector. The default is the common 10-variable setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmdDims {
    /// Components of `x_u1` (upper-only block).
    pub p: usize,
    /// Components of `x_l1` (lower-only block; SMD6 appends `s` more).
    pub q: usize,
    /// Components of each of `x_u2` and `x_l2` (the coupled blocks).
    pub r: usize,
    /// Extra degenerate lower components (SMD6 only; must be even).
    pub s: usize,
}

impl Default for SmdDims {
    fn default() -> Self {
        Self { p: 3, q: 3, r: 2, s: 2 }
    }
}

impl SmdDims {
    /// Convenience constructor.
    pub fn new(p: usize, q: usize, r: usize, s: usize) -> Self {
        Self { p, q, r, s }
    }

    /// Total number of upper variables.
    pub fn n_upper(&self) -> usize {
        self.p + self.r
    }

    /// Total number of lower variables for problem `index` (1..=6).
    pub fn n_lower(&self, index: usize) -> usize {
        self.q + self.r + if index == 6 { self.s } else { 0 }
    }
}

/// Which transcription of the SMD5 Rosenbrock term to use.
///
/// Some printings of the suite leave the first difference of the Rosenbrock
/// chain unsquared. Under that variant the term is unbounded below over the
/// box, the all-ones vector is no longer the follower's optimum, and the
/// documented reaction breaks down, so the catalog defaults to the classical
/// squared chain. The unsquared variant is kept for sensitivity studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BananaForm {
    /// Classical Rosenbrock chain `Σ (x_{i+1} - x_i²)² + (x_i - 1)²`.
    #[default]
    Squared,
    /// Variant with the first difference left unsquared:
    /// `Σ (x_{i+1} - x_i²) + (x_i - 1)²`.
    Printed,
}

/// Builds SMD problem `index` (1..=6) with the given block sizes, returning
/// the problem together with its exact reaction and optimum.
///
/// SMD5 uses the squared Rosenbrock chain; see [`make_smd5`] for the
/// unsquared variant. Fails with [`CatalogError::UnknownProblem`] for an
/// index outside 1..=6 and [`CatalogError::InvalidDims`] when a block size
/// breaks the instance (any of `p`, `q`, `r` zero; `q < 2` for SMD5; `s`
/// odd or less than 2 for SMD6).
pub fn make_smd(index: usize, dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    match index {
        1 => smd1(dims),
        2 => smd2(dims),
        3 => smd3(dims),
        4 => smd4(dims),
        5 => make_smd5(dims, BananaForm::Squared)
            .map(|(p, o)| (p, o.expect("squared form has an exact oracle"))),
        6 => smd6(dims),
        _ => Err(CatalogError::UnknownProblem(format!("smd{index}"))),
    }
}

/// Builds SMD5 with an explicit choice of Rosenbrock transcription.
///
/// Only the squared chain admits the closed-form reaction (`x_l1 = 1`,
/// `x_l2 = sqrt(|x_u2|)`), so only that form carries an oracle and a known
/// optimum; the unsquared variant returns `None` for both.
pub fn make_smd5(
    dims: SmdDims,
    form: BananaForm,
) -> Result<(BilevelProblem, Option<ExactOracle>), CatalogError> {
    check_dims(5, dims)?;
    if dims.q < 2 {
        return Err(CatalogError::InvalidDims {
            problem: "smd5".to_string(),
            reason: format!("the Rosenbrock chain needs q >= 2, got q = {}", dims.q),
        });
    }
    let SmdDims { p, q, r, .. } = dims;

    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) - banana(xl1, form) + sq_sum(xu2)
            - coupling(xu2, xl2, |u| u.abs(), |l| l * l)
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + banana(xl1, form) + coupling(xu2, xl2, |u| u.abs(), |l| l * l)
    };

    let problem = BilevelProblem {
        id: "smd5".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p + r, -5.0, 10.0),
        lower_bounds: Bounds::uniform(q + r, -5.0, 10.0),
        known_optimum: None,
    };
    match form {
        BananaForm::Printed => Ok((problem, None)),
        BananaForm::Squared => {
            let psi = move |xu: &[f64]| -> Vec<f64> {
                let mut out = vec![1.0; q];
                out.extend(xu[p..].iter().map(|&u| u.abs().sqrt()));
                out
            };
            let (problem, oracle) = with_zero_optimum(problem, p + r, psi);
            Ok((problem, Some(oracle)))
        }
    }
}

fn smd1(dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    check_dims(1, dims)?;
    let SmdDims { p, q, r, .. } = dims;

    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + sq_sum(xl1) + sq_sum(xu2) + coupling(xu2, xl2, |u| u, |l| l.tan())
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + sq_sum(xl1) + coupling(xu2, xl2, |u| u, |l| l.tan())
    };

    let problem = BilevelProblem {
        id: "smd1".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p + r, -5.0, 10.0),
        lower_bounds: Bounds::uniform(q, -5.0, 10.0).concat(&Bounds::uniform(
            r,
            -core::f64::consts::FRAC_PI_2 + OPEN_MARGIN,
            core::f64::consts::FRAC_PI_2 - OPEN_MARGIN,
        )),
        known_optimum: None,
    };
    let psi = move |xu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q];
        out.extend(xu[p..].iter().map(|&u| u.atan()));
        out
    };
    Ok(with_zero_optimum(problem, p + r, psi))
}

fn smd2(dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    check_dims(2, dims)?;
    let SmdDims { p, q, r, .. } = dims;

    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) - sq_sum(xl1) + sq_sum(xu2) - coupling(xu2, xl2, |u| u, |l| l.ln())
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + sq_sum(xl1) + coupling(xu2, xl2, |u| u, |l| l.ln())
    };

    // x_u2 is capped at 1 so the reaction e^{x_u2} stays inside the x_l2 box.
    let problem = BilevelProblem {
        id: "smd2".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p, -5.0, 10.0).concat(&Bounds::uniform(r, -5.0, 1.0)),
        lower_bounds: Bounds::uniform(q, -5.0, 10.0).concat(&Bounds::uniform(
            r,
            OPEN_MARGIN,
            core::f64::consts::E,
        )),
        known_optimum: None,
    };
    let psi = move |xu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q];
        out.extend(xu[p..].iter().map(|&u| u.exp()));
        out
    };
    Ok(with_zero_optimum(problem, p + r, psi))
}

fn smd3(dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    check_dims(3, dims)?;
    let SmdDims { p, q, r, .. } = dims;

    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + sq_sum(xl1) + sq_sum(xu2)
            + coupling(xu2, xl2, |u| u * u, |l| l.tan())
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + rastrigin(xl1) + coupling(xu2, xl2, |u| u * u, |l| l.tan())
    };

    // tan stays monotone here: x_u2² ≤ 100 keeps atan(x_u2²) below the x_l2
    // cap of π/2 − OPEN_MARGIN.
    let problem = BilevelProblem {
        id: "smd3".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p + r, -5.0, 10.0),
        lower_bounds: Bounds::uniform(q, -5.0, 10.0).concat(&Bounds::uniform(
            r,
            -core::f64::consts::FRAC_PI_2 + OPEN_MARGIN,
            core::f64::consts::FRAC_PI_2 - OPEN_MARGIN,
        )),
        known_optimum: None,
    };
    let psi = move |xu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q];
        out.extend(xu[p..].iter().map(|&u| (u * u).atan()));
        out
    };
    Ok(with_zero_optimum(problem, p + r, psi))
}

fn smd4(dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    check_dims(4, dims)?;
    let SmdDims { p, q, r, .. } = dims;

    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) - sq_sum(xl1) + sq_sum(xu2)
            - coupling(xu2, xl2, |u| u.abs(), |l| (1.0 + l).ln())
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q);
        sq_sum(xu1) + rastrigin(xl1)
            + coupling(xu2, xl2, |u| u.abs(), |l| (1.0 + l).ln())
    };

    // |x_u2| ≤ 1 keeps the reaction e^{|x_u2|} − 1 inside the x_l2 box [0, e].
    let problem = BilevelProblem {
        id: "smd4".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p, -5.0, 10.0).concat(&Bounds::uniform(r, -1.0, 1.0)),
        lower_bounds: Bounds::uniform(q, -5.0, 10.0).concat(&Bounds::uniform(
            r,
            0.0,
            core::f64::consts::E,
        )),
        known_optimum: None,
    };
    let psi = move |xu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q];
        out.extend(xu[p..].iter().map(|&u| u.abs().exp() - 1.0));
        out
    };
    Ok(with_zero_optimum(problem, p + r, psi))
}

fn smd6(dims: SmdDims) -> Result<(BilevelProblem, ExactOracle), CatalogError> {
    check_dims(6, dims)?;
    if dims.s < 2 || dims.s % 2 != 0 {
        return Err(CatalogError::InvalidDims {
            problem: "smd6".to_string(),
            reason: format!("the degenerate tail needs an even s >= 2, got s = {}", dims.s),
        });
    }
    let SmdDims { p, q, r, s } = dims;

    // x_l1 carries q + s components: the follower sees the first q as a
    // sphere and the last s only through consecutive-pair differences, so
    // any tail with equal pairs is follower-optimal. The leader's -/+ split
    // of the same blocks rewards exactly one of those ties (the zero tail).
    let upper_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q + s);
        sq_sum(xu1) - sq_sum(&xl1[..q]) + sq_sum(&xl1[q..]) + sq_sum(xu2)
            - coupling(xu2, xl2, |u| u, |l| l)
    };
    let lower_objective = move |xu: &[f64], xl: &[f64]| {
        let (xu1, xu2) = xu.split_at(p);
        let (xl1, xl2) = xl.split_at(q + s);
        let pair_terms: f64 = (q..q + s)
            .step_by(2)
            .map(|i| {
                let d = xl1[i + 1] - xl1[i];
                d * d
            })
            .sum();
        sq_sum(xu1) + sq_sum(&xl1[..q]) + pair_terms + coupling(xu2, xl2, |u| u, |l| l)
    };

    let problem = BilevelProblem {
        id: "smd6".to_string(),
        upper_objective: Box::new(upper_objective),
        lower_objective: Box::new(lower_objective),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(p + r, -5.0, 10.0),
        lower_bounds: Bounds::uniform(q + s + r, -5.0, 10.0),
        known_optimum: None,
    };
    let psi = move |xu: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q + s];
        out.extend_from_slice(&xu[p..]);
        out
    };
    Ok(with_zero_optimum(problem, p + r, psi))
}

/// Rejects block sizes that would leave a block empty.
fn check_dims(index: usize, dims: SmdDims) -> Result<(), CatalogError> {
    for (name, value) in [("p", dims.p), ("q", dims.q), ("r", dims.r)] {
        if value == 0 {
            return Err(CatalogError::InvalidDims {
                problem: format!("smd{index}"),
                reason: format!("block size {name} must be at least 1"),
            });
        }
    }
    Ok(())
}

/// Sum of squares.
fn sq_sum(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum()
}

/// Rastrigin-style multimodal term, zero exactly at the origin.
fn rastrigin(v: &[f64]) -> f64 {
    v.len() as f64
        + v.iter()
            .map(|&x| x * x - (2.0 * core::f64::consts::PI * x).cos())
            .sum::<f64>()
}

/// Rosenbrock chain in the requested transcription; zero at the all-ones
/// vector for the squared form.
fn banana(v: &[f64], form: BananaForm) -> f64 {
    let mut total = 0.0;
    for i in 0..v.len() - 1 {
        let head = v[i + 1] - v[i] * v[i];
        let tail = v[i] - 1.0;
        total += match form {
            BananaForm::Squared => head * head + tail * tail,
            BananaForm::Printed => head + tail * tail,
        };
    }
    total
}

/// Per-component coupling `Σ (lhs(x_u2_i) - rhs(x_l2_i))²`; the reaction
/// inverts `rhs` at `lhs(x_u2_i)`.
fn coupling(
    xu2: &[f64],
    xl2: &[f64],
    lhs: impl Fn(f64) -> f64,
    rhs: impl Fn(f64) -> f64,
) -> f64 {
    xu2.iter()
        .zip(xl2)
        .map(|(&u, &l)| {
            let d = lhs(u) - rhs(l);
            d * d
        })
        .sum()
}

/// Attaches the known optimum (`x_u = 0`, both objectives zero) and wraps the
/// reaction closure into an oracle.
fn with_zero_optimum(
    mut problem: BilevelProblem,
    n_upper: usize,
    psi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
) -> (BilevelProblem, ExactOracle) {
    let x_u_star = vec![0.0; n_upper];
    let x_l_star = psi(&x_u_star);
    problem.known_optimum = Some(KnownOptimum {
        upper_value: 0.0,
        lower_value: 0.0,
        x_u: x_u_star.clone(),
        x_l: Some(x_l_star),
    });
    let oracle = ExactOracle {
        psi_exact: Box::new(psi),
        x_u_star,
        upper_star: 0.0,
        lower_star: 0.0,
    };
    (problem, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EvalCounters;
    use crate::testbed::{verify_oracle, OracleCheck};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn both_settings() -> [SmdDims; 2] {
        [SmdDims::new(1, 2, 1, 2), SmdDims::new(3, 3, 2, 2)]
    }

    #[test]
    fn every_instance_passes_oracle_verification_at_both_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let check = OracleCheck {
            probes: 6,
            samples_per_probe: 800,
            ..OracleCheck::default()
        };
        for dims in both_settings() {
            for index in 1..=6 {
                let (problem, oracle) = make_smd(index, dims).expect("valid dims");
                let summary = verify_oracle(&problem, &oracle, &check, &mut rng)
                    .unwrap_or_else(|e| panic!("smd{index} {dims:?}: {e}"));
                assert_eq!(summary.probes, 6);
            }
        }
    }

    #[test]
    fn dimensions_are_validated_per_instance() {
        assert!(matches!(
            make_smd(7, SmdDims::default()),
            Err(CatalogError::UnknownProblem(_))
        ));
        assert!(matches!(
            make_smd(1, SmdDims::new(0, 2, 1, 2)),
            Err(CatalogError::InvalidDims { .. })
        ));
        assert!(matches!(
            make_smd(5, SmdDims::new(1, 1, 1, 2)),
            Err(CatalogError::InvalidDims { .. })
        ));
        assert!(matches!(
            make_smd(6, SmdDims::new(1, 2, 1, 3)),
            Err(CatalogError::InvalidDims { .. })
        ));
        assert!(make_smd(6, SmdDims::new(1, 2, 1, 2)).is_ok());
    }

    #[test]
    fn objectives_match_hand_computed_values() {
        // SMD1 at p=1, q=2, r=1: x_u = (2, 1), x_l = (1, -1, 0.5).
        let (p1, _) = make_smd(1, SmdDims::new(1, 2, 1, 2)).unwrap();
        let mut c = EvalCounters::new();
        let xu = [2.0, 1.0];
        let xl = [1.0, -1.0, 0.5];
        let tan_half = 0.5f64.tan();
        let want_f = 4.0 + 2.0 + (1.0 - tan_half) * (1.0 - tan_half);
        let want_upper = want_f + 1.0;
        assert!((p1.evaluate_lower(&xu, &xl, &mut c).value - want_f).abs() < 1e-12);
        assert!((p1.evaluate_upper(&xu, &xl, &mut c).value - want_upper).abs() < 1e-12);

        // SMD3's Rastrigin term is exactly zero on the integers only at 0.
        let (p3, _) = make_smd(3, SmdDims::new(1, 2, 1, 2)).unwrap();
        let zero = p3
            .evaluate_lower(&[0.0, 0.0], &[0.0, 0.0, 0.0], &mut c)
            .value;
        assert!(zero.abs() < 1e-12, "got {zero}");
        let bumped = p3
            .evaluate_lower(&[0.0, 0.0], &[0.5, 0.0, 0.0], &mut c)
            .value;
        assert!(bumped > 1.0, "Rastrigin bump should cost more than 1, got {bumped}");

        // SMD6 at p=1, q=1, r=1, s=2: pair term couples components 1 and 2
        // of x_l1.
        let (p6, _) = make_smd(6, SmdDims::new(1, 1, 1, 2)).unwrap();
        let value = p6
            .evaluate_lower(&[0.0, 0.0], &[3.0, 1.0, 4.0, 0.0], &mut c)
            .value;
        assert!((value - (9.0 + 9.0)).abs() < 1e-12, "got {value}");
    }

    #[test]
    fn cooperative_instances_share_their_minimizer_at_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for index in [1usize, 3] {
            let (problem, oracle) = make_smd(index, SmdDims::new(2, 2, 2, 2)).unwrap();
            let mut c = EvalCounters::new();
            let x_l_star = (oracle.psi_exact)(&oracle.x_u_star);
            let best_upper = problem
                .evaluate_upper(&oracle.x_u_star, &x_l_star, &mut c)
                .value;
            let best_lower = problem
                .evaluate_lower(&oracle.x_u_star, &x_l_star, &mut c)
                .value;
            for _ in 0..2000 {
                let cand = problem.lower_bounds.sample_uniform(&mut rng);
                let upper = problem.evaluate_upper(&oracle.x_u_star, &cand, &mut c);
                let lower = problem.evaluate_lower(&oracle.x_u_star, &cand, &mut c);
                assert!(
                    upper.value >= best_upper - 1e-9 && lower.value >= best_lower - 1e-9,
                    "smd{index}: leader and follower should agree at the optimum, \
                     but {cand:?} gives F = {} (best {best_upper}), f = {} (best {best_lower})",
                    upper.value,
                    lower.value,
                );
            }
        }
    }

    #[test]
    fn conflicting_instances_reward_leaving_the_reaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for index in [2usize, 4, 5, 6] {
            let (problem, oracle) = make_smd(index, SmdDims::new(2, 2, 2, 2)).unwrap();
            let mut c = EvalCounters::new();
            let x_l_star = (oracle.psi_exact)(&oracle.x_u_star);
            let on_psi = problem
                .evaluate_upper(&oracle.x_u_star, &x_l_star, &mut c)
                .value;
            let improved = (0..2000).any(|_| {
                let cand = problem.lower_bounds.sample_uniform(&mut rng);
                problem.evaluate_upper(&oracle.x_u_star, &cand, &mut c).value < on_psi - 0.1
            });
            assert!(
                improved,
                "smd{index}: some off-reaction point should look better to the leader"
            );
        }
    }

    #[test]
    fn smd6_follower_cannot_distinguish_equal_paired_tails() {
        let (problem, _) = make_smd(6, SmdDims::new(1, 2, 1, 4)).unwrap();
        let mut c = EvalCounters::new();
        let xu = [0.7, -0.2];
        // Tail pairs (a, a) and (b, b) leave the follower's value unchanged
        // relative to the zero tail, while the leader sees the difference.
        let base = [0.3, -0.1, 0.0, 0.0, 0.0, 0.0, -0.2];
        let tied = [0.3, -0.1, 1.5, 1.5, -2.0, -2.0, -0.2];
        let f_base = problem.evaluate_lower(&xu, &base, &mut c).value;
        let f_tied = problem.evaluate_lower(&xu, &tied, &mut c).value;
        assert!((f_base - f_tied).abs() < 1e-12);
        let upper_base = problem.evaluate_upper(&xu, &base, &mut c).value;
        let upper_tied = problem.evaluate_upper(&xu, &tied, &mut c).value;
        assert!(upper_tied > upper_base + 1.0);
    }

    #[test]
    fn unsquared_rosenbrock_variant_breaks_the_all_ones_reaction() {
        let dims = SmdDims::new(1, 3, 1, 2);
        let (problem, oracle) = make_smd5(dims, BananaForm::Printed).unwrap();
        assert!(oracle.is_none());
        assert!(problem.known_optimum.is_none());

        // Under the unsquared chain the last component appears only as a
        // head target with no (x−1)² penalty, so driving it negative sends
        // the sum below the all-ones value.
        let mut c = EvalCounters::new();
        let xu = [0.0, 0.0];
        let at_ones = problem
            .evaluate_lower(&xu, &[1.0, 1.0, 1.0, 0.0], &mut c)
            .value;
        let cheat = problem
            .evaluate_lower(&xu, &[1.0, 1.0, -5.0, 0.0], &mut c)
            .value;
        assert!(
            cheat < at_ones - 1.0,
            "unsquared chain should admit f below the all-ones value: {cheat} vs {at_ones}"
        );
    }

    #[test]
    fn boxes_keep_every_objective_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for index in 1..=6 {
            let (problem, _) = make_smd(index, SmdDims::new(2, 2, 2, 2)).unwrap();
            let mut c = EvalCounters::new();
            for _ in 0..500 {
                let xu = problem.upper_bounds.sample_uniform(&mut rng);
                let xl = problem.lower_bounds.sample_uniform(&mut rng);
                let upper = problem.evaluate_upper(&xu, &xl, &mut c);
                let lower = problem.evaluate_lower(&xu, &xl, &mut c);
                assert!(upper.value.is_finite() && lower.value.is_finite());
            }
            // Corners of the lower box are the worst case for tan/log terms.
            let n = problem.n_lower();
            let xu = vec![0.0; problem.n_upper()];
            for corner in 0..(1usize << n.min(12)) {
                let xl: Vec<f64> = (0..n)
                    .map(|i| {
                        if corner >> i & 1 == 1 {
                            problem.lower_bounds.hi(i)
                        } else {
                            problem.lower_bounds.lo(i)
                        }
                    })
                    .collect();
                assert!(problem.evaluate_lower(&xu, &xl, &mut c).value.is_finite());
            }
        }
    }
}
