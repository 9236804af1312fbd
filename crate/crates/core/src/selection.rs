//! Lag-order choice, marginal-correlation screening and the theoretical rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::ols::fit_ols;
use crate::stats::correlation;

/// `n log(SSE) + 2d`.
pub fn aic_value(n: usize, sse: f64, d: usize) -> f64 {
    n as f64 * sse.ln() + 2.0 * d as f64
}

/// Index of the smallest score, preferring the earliest on ties.
fn first_argmin(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
        )
        .0
}

/// AIC of lag orders `1..=d_max`, each fitted by least squares with an
/// intercept on the common sample `t >= d_max`.
pub fn aic_scores(series: &[f64], d_max: usize) -> Result<Vec<f64>> {
    if d_max == 0 {
        return Err(Error::InvalidParameter("d_max must be >= 1".into()));
    }
    if series.len() <= 2 * d_max {
        return Err(Error::InvalidSize(format!(
            "series of length {} is too short for d_max = {d_max}",
            series.len()
        )));
    }
    let n = series.len() - d_max;
    let y = DVector::from_column_slice(&series[d_max..]);
    let lags = DMatrix::from_fn(n, d_max, |r, k| series[d_max + r - 1 - k]);
    (1..=d_max)
        .map(|d| {
            let fit = fit_ols(&lags.columns(0, d).into_owned(), &y, true)?;
            Ok(aic_value(n, fit.residual_sse, d))
        })
        .collect()
}

/// Lag order in `1..=d_max` minimizing AIC; ties go to the smaller order.
pub fn aic_select_lag(series: &[f64], d_max: usize) -> Result<usize> {
    Ok(first_argmin(&aic_scores(series, d_max)?) + 1)
}

/// `max(1, round(c * n^(1 / (alpha + 1))))`.
pub fn theoretical_lag(n: usize, alpha: f64, c: f64) -> usize {
    let d = (c * (n as f64).powf(1.0 / (alpha + 1.0))).round();
    (d as usize).max(1)
}

/// Columns ranked by absolute Pearson correlation with `y`; returns the top
/// `floor(gamma * p / 100)` indices, best first, ties to the lower index.
pub fn sis_screen(x: &DMatrix<f64>, y: &[f64], gamma_percent: f64) -> Result<Vec<usize>> {
    dim_check(x.nrows() == y.len(), || {
        format!("design has {} rows, response has {}", x.nrows(), y.len())
    })?;
    if !(0.0..=100.0).contains(&gamma_percent) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in [0, 100], got {gamma_percent}"
        )));
    }
    let keep = screen_count(x.ncols(), gamma_percent);
    if keep == 0 {
        return Ok(Vec::new());
    }
    let mut scored: Vec<(usize, f64)> = x
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let r = correlation(col.as_slice(), y).abs();
            (j, if r.is_nan() { 0.0 } else { r })
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(keep).map(|(j, _)| j).collect())
}

/// `floor(gamma * p / 100)`, robust to representation error in `gamma`.
pub fn screen_count(p: usize, gamma_percent: f64) -> usize {
    ((gamma_percent * p as f64) / 100.0 + 1e-9).floor() as usize
}

/// Smoothness indices and effective dimensions of a composite regression function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub betas: Vec<f64>,
    pub ts: Vec<u32>,
}

impl RateSpec {
    pub fn new(betas: Vec<f64>, ts: Vec<u32>) -> Result<Self> {
        if betas.is_empty() || betas.len() != ts.len() {
            return Err(Error::InvalidParameter(format!(
                "need equal nonempty lengths, got {} betas and {} dimensions",
                betas.len(),
                ts.len()
            )));
        }
        if betas.iter().any(|b| !(*b > 0.0)) || ts.contains(&0) {
            return Err(Error::InvalidParameter(
                "betas and dimensions must be positive".into(),
            ));
        }
        Ok(Self { betas, ts })
    }

    /// `beta_i * prod_{l > i} min(beta_l, 1)`.
    pub fn effective_betas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.betas.len()];
        let mut tail = 1.0;
        for i in (0..self.betas.len()).rev() {
            out[i] = self.betas[i] * tail;
            tail *= self.betas[i].min(1.0);
        }
        out
    }
}

/// `max_i n^(-2 b_i / (2 b_i + t_i))` over the effective smoothness `b_i`.
pub fn phi_n(spec: &RateSpec, n: usize) -> f64 {
    let n = n as f64;
    spec.effective_betas()
        .iter()
        .zip(&spec.ts)
        .map(|(b, &t)| n.powf(-2.0 * b / (2.0 * b + t as f64)))
        .fold(0.0, f64::max)
}
