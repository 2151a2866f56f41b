//! Active-set solver for the small, strictly convex model QPs built by the
//! lower-level accelerator: minimize `½xᵀHx + gᵀx` subject to `Ax <= b`
//! (general rows and box rows alike).
//!
//! The working set starts empty (at the unconstrained minimum) and the
//! solver alternates equality-constrained KKT solves with working-set edits:
//! constraints with negative multipliers are dropped, the most violated
//! constraint is added, and if an addition would make the KKT system
//! singular a one-element swap is attempted. Problems this crate produces
//! have at most ~10 variables and ~25 rows, so the iteration cap — not
//! asymptotics — is the safety net: failure simply routes the caller to its
//! evolutionary fallback.

use alloc::vec::Vec;

use crate::linalg::{cholesky, lu_solve, Mat};

const FEAS_TOL: f64 = 1e-9;
const MULT_TOL: f64 = -1e-9;

/// Solves `min ½xᵀHx + gᵀx  s.t.  Ax <= b`.
///
/// Returns `None` when `H` is not positive definite, the KKT systems
/// degenerate, or no optimum is certified within `max_iters` working-set
/// changes.
pub fn solve_qp(h: &Mat, g: &[f64], a: &Mat, b: &[f64], max_iters: usize) -> Option<Vec<f64>> {
    let n = g.len();
    assert_eq!(h.rows(), n);
    assert_eq!(h.cols(), n);
    assert_eq!(a.cols(), if a.rows() == 0 { a.cols() } else { n });
    assert_eq!(a.rows(), b.len());

    // Indefinite or singular model curvature: not a trustworthy QP.
    cholesky(h)?;

    let mut working: Vec<usize> = Vec::new();
    let mut solved = solve_kkt(h, g, a, b, &working)?;

    for _ in 0..max_iters {
        let (x, lambda) = &solved;

        // Drop the most negative multiplier first: the constraint is
        // provably not active at the optimum of the current subproblem.
        if let Some(worst) = most_negative(lambda) {
            working.remove(worst);
            solved = solve_kkt(h, g, a, b, &working)?;
            continue;
        }

        match most_violated(a, b, x, &working) {
            None => return Some(solved.0),
            Some(c) => {
                working.push(c);
                match solve_kkt(h, g, a, b, &working) {
                    Some(next) => solved = next,
                    None => {
                        // Dependent rows: swap out one incumbent for `c`.
                        working.pop();
                        let mut fixed = None;
                        for drop_at in 0..working.len() {
                            let mut trial = working.clone();
                            trial.remove(drop_at);
                            trial.push(c);
                            if let Some(next) = solve_kkt(h, g, a, b, &trial) {
                                fixed = Some((trial, next));
                                break;
                            }
                        }
                        let (w, next) = fixed?;
                        working = w;
                        solved = next;
                    }
                }
            }
        }
    }
    None
}

fn most_negative(lambda: &[f64]) -> Option<usize> {
    let mut worst = None;
    for (j, &l) in lambda.iter().enumerate() {
        if l < MULT_TOL && worst.is_none_or(|(_, best)| l < best) {
            worst = Some((j, l));
        }
    }
    worst.map(|(j, _)| j)
}

fn most_violated(a: &Mat, b: &[f64], x: &[f64], working: &[usize]) -> Option<usize> {
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..b.len() {
        if working.contains(&i) {
            continue;
        }
        let lhs: f64 = (0..x.len()).map(|j| a[(i, j)] * x[j]).sum();
        let viol = lhs - b[i];
        let tol = FEAS_TOL * (1.0 + b[i].abs());
        if viol > tol && worst.is_none_or(|(_, w)| viol > w) {
            worst = Some((i, viol));
        }
    }
    worst.map(|(i, _)| i)
}

/// Solves the equality-constrained subproblem for the given working set:
/// `[H Aᵂᵀ; Aᵂ 0]·[x; λ] = [-g; bᵂ]`. Returns `(x, λ)`.
fn solve_kkt(h: &Mat, g: &[f64], a: &Mat, b: &[f64], working: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = g.len();
    let k = working.len();
    if k > n {
        return None;
    }
    let mut kkt = Mat::zeros(n + k, n + k);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = h[(i, j)];
        }
    }
    for (w, &ci) in working.iter().enumerate() {
        for j in 0..n {
            kkt[(n + w, j)] = a[(ci, j)];
            kkt[(j, n + w)] = a[(ci, j)];
        }
    }
    let mut rhs = alloc::vec![0.0; n + k];
    for i in 0..n {
        rhs[i] = -g[i];
    }
    for (w, &ci) in working.iter().enumerate() {
        rhs[n + w] = b[ci];
    }
    let sol = lu_solve(&kkt, &rhs)?;
    Some((sol[..n].to_vec(), sol[n..].to_vec()))
}

/// Appends box rows `x_i <= hi_i` and `-x_i <= -lo_i` to a constraint system.
pub fn append_box_rows(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>, lo: &[f64], hi: &[f64]) {
    let n = lo.len();
    for i in 0..n {
        let mut row = alloc::vec![0.0; n];
        row[i] = 1.0;
        a.push(row);
        b.push(hi[i]);
        let mut row = alloc::vec![0.0; n];
        row[i] = -1.0;
        a.push(row);
        b.push(-lo[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(a: &[Vec<f64>]) -> Mat {
        let refs: Vec<&[f64]> = a.iter().map(|r| r.as_slice()).collect();
        Mat::from_rows(&refs)
    }

    #[test]
    fn unconstrained_minimum_is_returned_directly() {
        // min (x0-2)² + (x1-4)² -> H = 2I, g = (-4, -8).
        let h = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let a = Mat::zeros(0, 2);
        let x = solve_qp(&h, &[-4.0, -8.0], &a, &[], 50).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 4.0).abs() < 1e-10);
    }

    #[test]
    fn indefinite_curvature_is_rejected() {
        let h = Mat::from_rows(&[&[2.0, 0.0], &[0.0, -2.0]]);
        let a = Mat::zeros(0, 2);
        assert!(solve_qp(&h, &[0.0, 0.0], &a, &[], 50).is_none());
    }

    #[test]
    fn single_bound_becomes_active() {
        // min (x-3)² s.t. x <= 1.
        let h = Mat::from_rows(&[&[2.0]]);
        let a = rows(&[alloc::vec![1.0]]);
        let x = solve_qp(&h, &[-6.0], &a, &[1.0], 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn vertex_of_two_constraints_is_found() {
        // min (x0-1)² + (x1-2)² s.t. x1 <= 0.5, x0 + x1 <= 1 -> (0.5, 0.5).
        let h = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let a = rows(&[alloc::vec![0.0, 1.0], alloc::vec![1.0, 1.0]]);
        let x = solve_qp(&h, &[-2.0, -4.0], &a, &[0.5, 1.0], 50).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9 && (x[1] - 0.5).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn greedy_traps_are_escaped_by_swapping() {
        // min (x0-10)² + (x1-10)² s.t. 5x0+5x1 <= 20, x0 <= 1, x1 <= 1.
        // Greedy most-violated addition first grabs the (inactive at the
        // optimum) diagonal cut and then hits a full working set; the swap
        // must still deliver the true optimum (1, 1).
        let h = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let a = rows(&[
            alloc::vec![5.0, 5.0],
            alloc::vec![1.0, 0.0],
            alloc::vec![0.0, 1.0],
        ]);
        let x = solve_qp(&h, &[-20.0, -20.0], &a, &[20.0, 1.0, 1.0], 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn box_rows_helper_encodes_both_sides() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        append_box_rows(&mut a, &mut b, &[-1.0, 0.0], &[2.0, 3.0]);
        assert_eq!(a.len(), 4);
        assert_eq!(b, alloc::vec![2.0, 1.0, 3.0, 0.0]);
        // min ‖x - (5, -5)‖² within the box -> (2, 0).
        let h = Mat::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let x = solve_qp(&h, &[-10.0, 10.0], &rows(&a), &b, 50).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 0.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn redundant_duplicate_rows_do_not_break_the_solver() {
        // The same constraint twice: adding the duplicate would make the KKT
        // singular; the swap path must cope and return x = 1.
        let h = Mat::from_rows(&[&[2.0]]);
        let a = rows(&[alloc::vec![1.0], alloc::vec![1.0]]);
        let x = solve_qp(&h, &[-6.0], &a, &[1.0, 1.0], 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9);
    }
}
