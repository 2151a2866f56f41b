//! Least-squares fitting of linear and quadratic response models.
//!
//! Both surrogate layers of the algorithm reduce to the same primitive:
//! regress scalar targets on a polynomial basis of sample points. The solver
//! standardizes every non-intercept basis column (subtract mean, divide by
//! standard deviation) so that e.g. `x` and `x²` columns on a wide box do not
//! wreck the conditioning of the normal equations, and falls back to ridge
//! regularization (`λ = 1e-8 · trace/p`, escalated by factors of 100) when
//! the Gram matrix is not positive definite — clustered or duplicated sample
//! sets therefore yield a tame minimum-norm-style fit instead of an error.

use alloc::vec::Vec;

// Inherent float methods win under `std`; this supplies them for no_std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{cholesky, cholesky_substitute, Mat};

/// Number of terms of a full quadratic basis in `n` variables:
/// `1` intercept + `n` linear + `n(n+1)/2` quadratic = `(n+1)(n+2)/2`.
pub fn quadratic_basis_size(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Evaluates the quadratic basis of `x`:
/// `[1, x_0..x_{n-1}, x_i·x_j for i <= j in lexicographic (i, j) order]`.
pub fn quadratic_basis(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut b = Vec::with_capacity(quadratic_basis_size(n));
    b.push(1.0);
    b.extend_from_slice(x);
    for i in 0..n {
        for j in i..n {
            b.push(x[i] * x[j]);
        }
    }
    b
}

/// Evaluates the affine basis `[1, x_0..x_{n-1}]`.
pub fn linear_basis(x: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(x.len() + 1);
    b.push(1.0);
    b.extend_from_slice(x);
    b
}

/// Least squares over an arbitrary design matrix whose column 0 is the
/// intercept. Returns one coefficient vector (in the raw, de-standardized
/// basis) per target column. Never fails: pathological designs degrade to an
/// intercept-only fit of the target mean.
pub fn fit_least_squares(design: &Mat, targets: &[&[f64]]) -> Vec<Vec<f64>> {
    let s = design.rows();
    let p = design.cols();
    assert!(s > 0 && p > 0);
    for t in targets {
        assert_eq!(t.len(), s, "target length must match sample count");
    }

    // Standardize columns 1..p that have genuine spread.
    let mut mean = alloc::vec![0.0; p];
    let mut scale = alloc::vec![1.0; p];
    let mut std_design = design.clone();
    for j in 1..p {
        let mu: f64 = (0..s).map(|r| design[(r, j)]).sum::<f64>() / s as f64;
        let var: f64 = (0..s).map(|r| (design[(r, j)] - mu).powi(2)).sum::<f64>() / s as f64;
        let sd = var.sqrt();
        if sd > 1e-100 {
            mean[j] = mu;
            scale[j] = sd;
            for r in 0..s {
                std_design[(r, j)] = (design[(r, j)] - mu) / sd;
            }
        }
    }

    let gram = std_design.ata();
    let trace: f64 = (0..p).map(|i| gram[(i, i)]).sum();
    let base_ridge = 1e-8 * (trace / p as f64).max(1e-300);

    let mut factor = cholesky(&gram);
    let mut ridge = base_ridge;
    for _ in 0..6 {
        if factor.is_some() {
            break;
        }
        let mut damped = gram.clone();
        for i in 0..p {
            damped[(i, i)] += ridge;
        }
        factor = cholesky(&damped);
        ridge *= 100.0;
    }

    targets
        .iter()
        .map(|y| match &factor {
            Some(l) => {
                let rhs = std_design.atv(y);
                let c = cholesky_substitute(l, &rhs);
                // De-standardize back to the raw basis.
                let mut out = alloc::vec![0.0; p];
                for j in 1..p {
                    out[j] = c[j] / scale[j];
                    out[0] -= c[j] * mean[j] / scale[j];
                }
                out[0] += c[0];
                out
            }
            None => {
                let mut out = alloc::vec![0.0; p];
                out[0] = y.iter().sum::<f64>() / s as f64;
                out
            }
        })
        .collect()
}

/// Fits full quadratic models to several target columns over shared sample
/// points; returns one coefficient vector (see [`quadratic_basis`]) each.
pub fn fit_quadratic_multi(xs: &[&[f64]], targets: &[&[f64]]) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = xs.iter().map(|x| quadratic_basis(x)).collect();
    let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    fit_least_squares(&Mat::from_rows(&row_refs), targets)
}

/// A fitted quadratic `c0 + lᵀx + Σ_{i<=j} q_ij x_i x_j` over `n` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadModel {
    n: usize,
    /// Coefficients in [`quadratic_basis`] order.
    pub coeffs: Vec<f64>,
}

impl QuadModel {
    /// Least-squares fit over sample points `xs` with values `ys`.
    pub fn fit(xs: &[&[f64]], ys: &[f64]) -> QuadModel {
        let n = xs.first().map_or(0, |x| x.len());
        let coeffs = fit_quadratic_multi(xs, &[ys]).pop().unwrap();
        QuadModel { n, coeffs }
    }

    /// Builds a model from raw coefficients (basis order of [`quadratic_basis`]).
    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> QuadModel {
        assert_eq!(coeffs.len(), quadratic_basis_size(n));
        QuadModel { n, coeffs }
    }

    /// Number of input variables.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Model value at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        self.coeffs
            .iter()
            .zip(quadratic_basis(x))
            .map(|(c, b)| c * b)
            .sum()
    }

    /// The symmetric Hessian `H` with `value = c0 + lᵀx + ½ xᵀHx`.
    pub fn hessian(&self) -> Mat {
        let n = self.n;
        let mut h = Mat::zeros(n, n);
        let mut k = 1 + n;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    h[(i, i)] = 2.0 * self.coeffs[k];
                } else {
                    h[(i, j)] = self.coeffs[k];
                    h[(j, i)] = self.coeffs[k];
                }
                k += 1;
            }
        }
        h
    }

    /// The linear term `l` (gradient at the origin).
    pub fn linear_term(&self) -> &[f64] {
        &self.coeffs[1..1 + self.n]
    }
}

/// A fitted affine model `a0 + aᵀx`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinModel {
    /// Intercept.
    pub a0: f64,
    /// Slope coefficients.
    pub a: Vec<f64>,
}

impl LinModel {
    /// Least-squares fits one affine model per target column.
    pub fn fit_multi(xs: &[&[f64]], targets: &[&[f64]]) -> Vec<LinModel> {
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| linear_basis(x)).collect();
        let row_refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        fit_least_squares(&Mat::from_rows(&row_refs), targets)
            .into_iter()
            .map(|c| LinModel { a0: c[0], a: c[1..].to_vec() })
            .collect()
    }

    /// Model value at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.a0 + self.a.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>()
    }
}
