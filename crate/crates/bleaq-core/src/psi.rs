//! Quadratic approximation of the lower-level reaction mapping ψ.
//!
//! When the lower level has a unique optimum for every upper vector, the
//! solutions already computed during the search are samples of a function
//! `x_u -> x_l*`. This module fits one full quadratic per lower variable to
//! those samples and reports the mean squared training error, which the
//! caller compares against a trust threshold to decide whether predictions
//! may replace genuine lower-level optimizations. Localization is implicit:
//! the training set is the current population's trusted members, so as the
//! population concentrates, the fit concentrates with it.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::problem::Bounds;
use crate::regression::{fit_quadratic_multi, quadratic_basis, quadratic_basis_size};

/// Samples needed before a ψ-model may be fitted: the quadratic basis size
/// plus `n` extra points so the regression is meaningfully overdetermined.
pub fn required_points(n_upper: usize) -> usize {
    quadratic_basis_size(n_upper) + n_upper
}

/// Whether a training error passes the trust threshold (strictly below).
pub fn is_good_mse(mse: f64, e0: f64) -> bool {
    mse < e0
}

/// One quadratic model per lower-level variable, mapping `x_u -> x_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiModel {
    n_upper: usize,
    n_lower: usize,
    /// Per lower variable, coefficients over
    /// [`quadratic_basis`](crate::regression::quadratic_basis)`(x_u)`.
    coeffs: Vec<Vec<f64>>,
    /// Mean squared training error: average over samples of the squared
    /// Euclidean distance between `x_l` and the model prediction.
    mse: f64,
    /// Number of training samples used.
    n_train: usize,
}

impl PsiModel {
    /// Fits the model to paired samples (`x_us[i]` maps to `x_ls[i]`).
    ///
    /// Callers must supply at least [`required_points`] samples (debug
    /// asserted); clustered or rank-deficient sample sets are handled by the
    /// regression layer's ridge fallback rather than failing.
    pub fn fit(x_us: &[&[f64]], x_ls: &[&[f64]]) -> PsiModel {
        assert_eq!(x_us.len(), x_ls.len());
        let n_train = x_us.len();
        let n_upper = x_us[0].len();
        let n_lower = x_ls[0].len();
        debug_assert!(
            n_train >= required_points(n_upper),
            "ψ-fit called with {n_train} samples, needs {}",
            required_points(n_upper)
        );

        let mut columns: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(n_train); n_lower];
        for xl in x_ls {
            for (k, col) in columns.iter_mut().enumerate() {
                col.push(xl[k]);
            }
        }
        let col_refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
        let coeffs = fit_quadratic_multi(x_us, &col_refs);

        let mut model = PsiModel { n_upper, n_lower, coeffs, mse: 0.0, n_train };
        let mut err = 0.0;
        for (xu, xl) in x_us.iter().zip(x_ls.iter()) {
            let pred = model.predict_unclamped(xu);
            err += pred
                .iter()
                .zip(xl.iter())
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>();
        }
        model.mse = err / n_train as f64;
        model
    }

    /// Raw model prediction (may leave the lower-level box).
    pub fn predict_unclamped(&self, x_u: &[f64]) -> Vec<f64> {
        assert_eq!(x_u.len(), self.n_upper);
        let basis = quadratic_basis(x_u);
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(basis.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Model prediction clamped into the lower-level box.
    pub fn predict(&self, x_u: &[f64], bounds: &Bounds) -> Vec<f64> {
        let mut p = self.predict_unclamped(x_u);
        bounds.clamp(&mut p);
        p
    }

    /// Mean squared training error (see the field docs).
    pub fn mse(&self) -> f64 {
        self.mse
    }

    /// Number of samples the model was fitted on.
    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Upper-level input dimension.
    pub fn n_upper(&self) -> usize {
        self.n_upper
    }

    /// Lower-level output dimension.
    pub fn n_lower(&self) -> usize {
        self.n_lower
    }

    /// Whether predictions are trustworthy under threshold `e0`.
    pub fn is_good(&self, e0: f64) -> bool {
        is_good_mse(self.mse, e0)
    }
}
