//! The classical TP1–TP10 bilevel test problems.
//!
//! These are fixed-dimension problems collected from the linear, quadratic,
//! and fractional bilevel literature. None of them has a closed-form
//! reaction, so unlike the SMD family they carry only a
//! [`KnownOptimum`] — the best-known upper/lower objective pair together
//! with a decision vector that attains it. Stored optima are exact for the
//! formulation as implemented: where the values traditionally quoted for a
//! problem are rounded, or predate later improvements, the catalog stores the
//! self-consistent optimum of the stated formulation instead (see the notes
//! on `tp5`, `tp6`, and `tp7`).
//!
//! Variables are boxed even where the original statements leave them open:
//! unbounded directions are either provably unattractive (a quadratic
//! penalty grows) or capped well past the known optimum, and every stored
//! optimum is strictly inside or on its box.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;

// Inherent float methods win under `std`; this supplies them for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use super::CatalogError;
use crate::problem::{BilevelProblem, Bounds, KnownOptimum};

/// Builds TP problem `index` (1..=10). Fails with
/// [`CatalogError::UnknownProblem`] outside that range.
pub fn make_tp(index: usize) -> Result<BilevelProblem, CatalogError> {
    match index {
        1 => Ok(tp1()),
        2 => Ok(tp2()),
        3 => Ok(tp3()),
        4 => Ok(tp4()),
        5 => Ok(tp5()),
        6 => Ok(tp6()),
        7 => Ok(tp7()),
        8 => Ok(tp8()),
        9 => Ok(tp9()),
        10 => Ok(tp10()),
        _ => Err(CatalogError::UnknownProblem(format!("tp{index}"))),
    }
}

/// Quadratic leader chasing a target the follower mirrors inside a smaller
/// box; the leader's constraints cut the corner off its own box.
fn tp1() -> BilevelProblem {
    BilevelProblem {
        id: "tp1".to_string(),
        upper_objective: Box::new(|xu, xl| {
            (xu[0] - 30.0).powi(2) + (xu[1] - 20.0).powi(2) - 20.0 * xl[0] + 20.0 * xl[1]
        }),
        lower_objective: Box::new(|xu, xl| {
            (xu[0] - xl[0]).powi(2) + (xu[1] - xl[1]).powi(2)
        }),
        upper_constraints: vec![
            Box::new(|xu, _| 30.0 - xu[0] - 2.0 * xu[1]),
            Box::new(|xu, _| xu[0] + xu[1] - 25.0),
            Box::new(|xu, _| xu[1] - 15.0),
        ],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(2, 0.0, 30.0),
        lower_bounds: Bounds::uniform(2, 0.0, 10.0),
        known_optimum: Some(KnownOptimum {
            upper_value: 225.0,
            lower_value: 100.0,
            x_u: vec![20.0, 5.0],
            x_l: Some(vec![10.0, 5.0]),
        }),
    }
}

/// Linear leader over a quadratic follower; the follower is pushed against
/// coupling caps, and the leader's minimum is attained on a whole ridge, of
/// which the stored point is the classical representative.
fn tp2() -> BilevelProblem {
    BilevelProblem {
        id: "tp2".to_string(),
        upper_objective: Box::new(|xu, xl| {
            2.0 * xu[0] + 2.0 * xu[1] - 3.0 * xl[0] - 3.0 * xl[1] - 60.0
        }),
        lower_objective: Box::new(tp2_lower),
        upper_constraints: vec![Box::new(|xu, xl| {
            xu[0] + xu[1] + xl[0] - 2.0 * xl[1] - 40.0
        })],
        lower_constraints: vec![
            Box::new(|xu, xl| 10.0 - xu[0] + 2.0 * xl[0]),
            Box::new(|xu, xl| 10.0 - xu[1] + 2.0 * xl[1]),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 50.0),
        lower_bounds: Bounds::uniform(2, -10.0, 20.0),
        known_optimum: Some(KnownOptimum {
            upper_value: 0.0,
            lower_value: 100.0,
            x_u: vec![0.0, 30.0],
            x_l: Some(vec![-10.0, 10.0]),
        }),
    }
}

fn tp2_lower(xu: &[f64], xl: &[f64]) -> f64 {
    (xl[0] - xu[0] + 20.0).powi(2) + (xl[1] - xu[1] + 20.0).powi(2)
}

/// Nonconvex leader over a follower whose active constraints pin one lower
/// variable to 15/8 regardless of the leader's move.
fn tp3() -> BilevelProblem {
    BilevelProblem {
        id: "tp3".to_string(),
        upper_objective: Box::new(|xu, xl| {
            -xu[0] * xu[0] - 3.0 * xu[1] * xu[1] - 4.0 * xl[0] + xl[1] * xl[1]
        }),
        lower_objective: Box::new(|xu, xl| {
            2.0 * xu[0] * xu[0] + xl[0] * xl[0] - 5.0 * xl[1]
        }),
        upper_constraints: vec![Box::new(|xu, _| xu[0] * xu[0] + 2.0 * xu[1] - 4.0)],
        lower_constraints: vec![
            Box::new(|xu, xl| {
                -(xu[0] * xu[0] - 2.0 * xu[0] + xu[1] * xu[1] - 2.0 * xl[0] + xl[1] + 3.0)
            }),
            Box::new(|xu, xl| 4.0 - xu[1] - 3.0 * xl[0] + 4.0 * xl[1]),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 2.0),
        lower_bounds: Bounds::uniform(2, 0.0, 10.0),
        known_optimum: Some(KnownOptimum {
            upper_value: -18.6787109375,
            lower_value: -1.015625,
            x_u: vec![0.0, 2.0],
            x_l: Some(vec![1.875, 0.90625]),
        }),
    }
}

/// Linear/linear instance: the follower solves a small LP whose active rows
/// shift with the leader, and the leader profits from lower variables the
/// follower treats as pure cost.
fn tp4() -> BilevelProblem {
    BilevelProblem {
        id: "tp4".to_string(),
        upper_objective: Box::new(|xu, xl| {
            -8.0 * xu[0] - 4.0 * xu[1] + 4.0 * xl[0] - 40.0 * xl[1] - 4.0 * xl[2]
        }),
        lower_objective: Box::new(|xu, xl| {
            xu[0] + 2.0 * xu[1] + xl[0] + xl[1] + 2.0 * xl[2]
        }),
        upper_constraints: vec![],
        lower_constraints: vec![
            Box::new(|_, xl| xl[1] + xl[2] - xl[0] - 1.0),
            Box::new(|xu, xl| 2.0 * xu[0] - xl[0] + 2.0 * xl[1] - 0.5 * xl[2] - 1.0),
            Box::new(|xu, xl| 2.0 * xu[1] + 2.0 * xl[0] - xl[1] - 0.5 * xl[2] - 1.0),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 2.0),
        lower_bounds: Bounds::uniform(3, 0.0, 2.0),
        known_optimum: Some(KnownOptimum {
            upper_value: -29.2,
            lower_value: 3.2,
            x_u: vec![0.0, 0.9],
            x_l: Some(vec![0.0, 0.6, 0.4]),
        }),
    }
}

/// Quadratic follower with an indefinite leader coupling. The widely quoted
/// value −3.6 with follower value −2.0 belongs to x_u = (1.2, 1.6), which is
/// feasible but not optimal: sliding along the same follower active set to
/// x_u = (0, 1) keeps f = −2.0 and improves the leader to −3.9, which is the
/// exact optimum of the stated formulation and what the catalog stores.
fn tp5() -> BilevelProblem {
    let h = [[1.0, 3.0], [3.0, 10.0]];
    BilevelProblem {
        id: "tp5".to_string(),
        upper_objective: Box::new(|xu, xl| {
            0.1 * (xu[0] * xu[0] + xu[1] * xu[1]) - 3.0 * xl[0] - 4.0 * xl[1]
                + 0.5 * (xl[0] * xl[0] + xl[1] * xl[1])
        }),
        lower_objective: Box::new(move |xu, xl| {
            let b0 = -xu[0] + 2.0 * xu[1];
            let b1 = 3.0 * xu[0] - 3.0 * xu[1];
            0.5 * (h[0][0] * xl[0] * xl[0]
                + (h[0][1] + h[1][0]) * xl[0] * xl[1]
                + h[1][1] * xl[1] * xl[1])
                - b0 * xl[0]
                - b1 * xl[1]
        }),
        upper_constraints: vec![],
        lower_constraints: vec![
            Box::new(|_, xl| -0.333 * xl[0] + xl[1] - 2.0),
            Box::new(|_, xl| xl[0] - 0.333 * xl[1] - 2.0),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 5.0),
        lower_bounds: Bounds::uniform(2, 0.0, 5.0),
        known_optimum: Some(KnownOptimum {
            upper_value: -3.9,
            lower_value: -2.0,
            x_u: vec![0.0, 1.0],
            x_l: Some(vec![2.0, 0.0]),
        }),
    }
}

/// Single upper variable squeezing the follower's polytope: at x_u = 17/9
/// the feasible set collapses to the single point (8/9, 0), which is where
/// the exact optimum F = −98/81, f = 617/81 sits (the traditionally quoted
/// −1.2091 / 7.6145 are the same point at lower numerical precision).
fn tp6() -> BilevelProblem {
    BilevelProblem {
        id: "tp6".to_string(),
        upper_objective: Box::new(|xu, xl| {
            (xu[0] - 1.0).powi(2) + 2.0 * xl[0] - 2.0 * xu[0]
        }),
        lower_objective: Box::new(|xu, xl| {
            (2.0 * xl[0] - 4.0).powi(2) + (2.0 * xl[1] - 1.0).powi(2) + xu[0] * xl[0]
        }),
        upper_constraints: vec![],
        lower_constraints: vec![
            Box::new(|xu, xl| 4.0 * xu[0] + 5.0 * xl[0] + 4.0 * xl[1] - 12.0),
            Box::new(|xu, xl| 4.0 * xl[1] - 4.0 * xu[0] - 5.0 * xl[0] + 4.0),
            Box::new(|xu, xl| 4.0 * xu[0] - 4.0 * xl[0] + 5.0 * xl[1] - 4.0),
            Box::new(|xu, xl| 4.0 * xl[0] - 4.0 * xu[0] + 5.0 * xl[1] - 4.0),
        ],
        upper_bounds: Bounds::uniform(1, 0.0, 3.0),
        lower_bounds: Bounds::uniform(2, 0.0, 4.0),
        known_optimum: Some(KnownOptimum {
            upper_value: -98.0 / 81.0,
            lower_value: 617.0 / 81.0,
            x_u: vec![17.0 / 9.0],
            x_l: Some(vec![8.0 / 9.0, 0.0]),
        }),
    }
}

/// Fractional and fully adversarial: leader and follower optimize the same
/// ratio in opposite directions, so F = −f pointwise and the leader must
/// maximize the follower's minimum. That max-min is 100/51 at
/// x_u = (√50, √50) (the quoted 1.96 is this value rounded).
fn tp7() -> BilevelProblem {
    let root50 = 50f64.sqrt();
    BilevelProblem {
        id: "tp7".to_string(),
        upper_objective: Box::new(|xu, xl| -tp7_ratio(xu, xl)),
        lower_objective: Box::new(tp7_ratio),
        upper_constraints: vec![
            Box::new(|xu, _| xu[0] * xu[0] + xu[1] * xu[1] - 100.0),
            Box::new(|xu, _| xu[0] - xu[1]),
        ],
        lower_constraints: vec![
            Box::new(|xu, xl| xl[0] - xu[0]),
            Box::new(|xu, xl| xl[1] - xu[1]),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 10.0),
        lower_bounds: Bounds::uniform(2, 0.0, 10.0),
        known_optimum: Some(KnownOptimum {
            upper_value: -100.0 / 51.0,
            lower_value: 100.0 / 51.0,
            x_u: vec![root50, root50],
            x_l: Some(vec![0.0, root50]),
        }),
    }
}

fn tp7_ratio(xu: &[f64], xl: &[f64]) -> f64 {
    (xu[0] + xl[0]) * (xu[1] + xl[1]) / (1.0 + xu[0] * xl[0] + xu[1] * xl[1])
}

/// TP2's follower under an absolute-value leader: the ridge of F = 0 points
/// becomes a valley floor the leader has to hit exactly.
fn tp8() -> BilevelProblem {
    BilevelProblem {
        id: "tp8".to_string(),
        upper_objective: Box::new(|xu, xl| {
            (2.0 * xu[0] + 2.0 * xu[1] - 3.0 * xl[0] - 3.0 * xl[1] - 60.0).abs()
        }),
        lower_objective: Box::new(tp2_lower),
        upper_constraints: vec![Box::new(|xu, xl| {
            xu[0] + xu[1] + xl[0] - 2.0 * xl[1] - 40.0
        })],
        lower_constraints: vec![
            Box::new(|xu, xl| 2.0 * xl[0] - xu[0] + 10.0),
            Box::new(|xu, xl| 2.0 * xl[1] - xu[1] + 10.0),
        ],
        upper_bounds: Bounds::uniform(2, 0.0, 50.0),
        lower_bounds: Bounds::uniform(2, -10.0, 20.0),
        known_optimum: Some(KnownOptimum {
            upper_value: 0.0,
            lower_value: 100.0,
            x_u: vec![0.0, 30.0],
            x_l: Some(vec![-10.0, 10.0]),
        }),
    }
}

/// Ten-by-ten separable leader over a Griewank-shaped follower: the follower
/// zeroes x_l whenever the leader moves at all, so the leader only has to
/// reach the all-ones point.
fn tp9() -> BilevelProblem {
    BilevelProblem {
        id: "tp9".to_string(),
        upper_objective: Box::new(tp9_upper),
        lower_objective: Box::new(|xu, xl| {
            let quad: f64 = xl.iter().map(|&v| v * v).sum::<f64>() / 4000.0;
            let prod: f64 = xl
                .iter()
                .enumerate()
                .map(|(i, &v)| (v / ((i + 1) as f64).sqrt()).cos())
                .product();
            let energy: f64 = xu.iter().map(|&v| v * v).sum();
            ((1.0 + quad - prod) * energy).exp()
        }),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(10, -core::f64::consts::PI, core::f64::consts::PI),
        lower_bounds: Bounds::uniform(10, -core::f64::consts::PI, core::f64::consts::PI),
        known_optimum: Some(KnownOptimum {
            upper_value: 0.0,
            lower_value: 1.0,
            x_u: vec![1.0; 10],
            x_l: Some(vec![0.0; 10]),
        }),
    }
}

fn tp9_upper(xu: &[f64], xl: &[f64]) -> f64 {
    xu.iter().map(|&v| (v - 1.0).abs()).sum::<f64>()
        + xl.iter().map(|&v| v.abs()).sum::<f64>()
}

/// TP9 with the follower's landscape defined on the products x_u_i · x_l_i,
/// entangling the levels inside every cosine.
fn tp10() -> BilevelProblem {
    BilevelProblem {
        id: "tp10".to_string(),
        upper_objective: Box::new(tp9_upper),
        lower_objective: Box::new(|xu, xl| {
            let quad: f64 = xu
                .iter()
                .zip(xl)
                .map(|(&u, &l)| (u * l) * (u * l))
                .sum::<f64>()
                / 4000.0;
            let prod: f64 = xu
                .iter()
                .zip(xl)
                .enumerate()
                .map(|(i, (&u, &l))| (u * l / ((i + 1) as f64).sqrt()).cos())
                .product();
            (1.0 + quad - prod).exp()
        }),
        upper_constraints: vec![],
        lower_constraints: vec![],
        upper_bounds: Bounds::uniform(10, -core::f64::consts::PI, core::f64::consts::PI),
        lower_bounds: Bounds::uniform(10, -core::f64::consts::PI, core::f64::consts::PI),
        known_optimum: Some(KnownOptimum {
            upper_value: 0.0,
            lower_value: 1.0,
            x_u: vec![1.0; 10],
            x_l: Some(vec![0.0; 10]),
        }),
    }
}
