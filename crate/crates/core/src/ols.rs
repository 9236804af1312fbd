//! Least-squares baseline.
//!
//! Full-rank designs are solved through a Householder QR factorization.
//! When the design is rank deficient (including more columns than rows) the
//! minimum-norm solution is taken from an SVD and the fit is flagged.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, Error, Result};

/// Relative threshold on `|R_ii| / max |R_jj|` below which a column is
/// treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    /// Slopes, preceded by the intercept when `intercept` is set.
    pub coefficients: DVector<f64>,
    pub intercept: bool,
    pub residual_sse: f64,
    pub n_used: usize,
    pub rank_deficient: bool,
}

impl OlsFit {
    /// Number of regressors the fit expects (excluding the intercept).
    pub fn width(&self) -> usize {
        self.coefficients.len() - usize::from(self.intercept)
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients.as_slice()[usize::from(self.intercept)..]
    }

    pub fn intercept_value(&self) -> f64 {
        if self.intercept {
            self.coefficients[0]
        } else {
            0.0
        }
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<OlsFit> {
    dim_check(x.nrows() == y.len(), || {
        format!("design has {} rows, response has {}", x.nrows(), y.len())
    })?;
    if x.nrows() == 0 || (x.ncols() == 0 && !intercept) {
        return Err(Error::InvalidSize(format!("empty design {:?}", x.shape())));
    }
    let design = if intercept {
        with_intercept(x)
    } else {
        x.clone()
    };
    let (n, p) = design.shape();

    let mut solution = None;
    if n >= p {
        let qr = design.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().amax();
        if diag_max > 0.0 && r.diagonal().iter().all(|d| d.abs() > RANK_TOL * diag_max) {
            let mut qty = y.clone();
            qr.q_tr_mul(&mut qty);
            let top = qty.rows(0, p).into_owned();
            solution = r.solve_upper_triangular(&top);
        }
    }
    let (coefficients, rank_deficient) = match solution {
        Some(beta) => (beta, false),
        None => {
            log::warn!("rank-deficient least squares ({n} x {p}); using minimum-norm solution");
            let svd = design.clone().svd(true, true);
            let eps = RANK_TOL * svd.singular_values.amax();
            let beta = svd
                .solve(y, eps)
                .map_err(|e| Error::Decomposition(e.to_string()))?;
            (beta, true)
        }
    };
    let residual_sse = (y - &design * &coefficients).norm_squared();
    Ok(OlsFit {
        coefficients,
        intercept,
        residual_sse,
        n_used: n,
        rank_deficient,
    })
}

pub fn predict_ols(fit: &OlsFit, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    dim_check(x.ncols() == fit.width(), || {
        format!(
            "design has {} columns, fit expects {}",
            x.ncols(),
            fit.width()
        )
    })?;
    let slopes = DVector::from_column_slice(fit.slopes());
    let mut pred = x * slopes;
    pred.add_scalar_mut(fit.intercept_value());
    Ok(pred)
}
