//! Rolling one-step-ahead inflation forecasts from a monthly macro panel.
//!
//! Pipeline: CPI is turned into annualized log inflation, a design matrix is
//! built from inflation lags and lagged predictors, and for each forecast
//! origin a fixed-length window of preceding rows is screened (on its
//! training part), fitted, and used to predict the next month.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::generators::{gen_linear_ar, Dataset};
use crate::net::{Architecture, Network};
use crate::ols::{fit_ols, predict_ols};
use crate::seed::derive_seed;
use crate::selection::{screen_count, sis_screen};
use crate::training::{fmt_f64, train, Splits, TrainConfig};

/// A calendar month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!(
                "month {month} out of range"
            )));
        }
        Ok(Self { year, month })
    }

    /// Months since January of year 0.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn succ(self) -> Self {
        Self::from_ordinal(self.ordinal() + 1)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM`, `YYYY:MM`, `YYYY/MM`, `YYYYmMM`, `YYYY-MM-DD` and `M/D/YYYY`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("unrecognized month `{s}`"));
        let parts: Vec<&str> = s.split(['-', ':', '/', 'm', 'M']).collect();
        let num = |p: &str| p.parse::<i64>().map_err(|_| bad());
        let (year, month) = match parts.as_slice() {
            [y, m] => (num(y)?, num(m)?),
            [y, m, _] if y.len() == 4 => (num(y)?, num(m)?),
            [m, _, y] if y.len() == 4 => (num(y)?, num(m)?),
            _ => return Err(bad()),
        };
        Self::new(year as i32, u32::try_from(month).map_err(|_| bad())?)
    }
}

/// Column names used when reading a macro panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroSchema {
    pub date_column: String,
    pub cpi_column: String,
    /// Predictor columns in order; `None` takes every other column.
    pub predictors: Option<Vec<String>>,
}

impl Default for MacroSchema {
    fn default() -> Self {
        Self {
            date_column: "date".into(),
            cpi_column: "cpi".into(),
            predictors: None,
        }
    }
}

/// Monthly panel. Missing cells are NaN and listed in `missing` as
/// `(row, column)` where column 0 is CPI and `j + 1` is predictor `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroTable {
    pub dates: Vec<YearMonth>,
    pub cpi: Vec<f64>,
    pub predictor_names: Vec<String>,
    pub predictors: DMatrix<f64>,
    pub missing: Vec<(usize, usize)>,
}

impl MacroTable {
    /// Build from complete data; dates must be consecutive months.
    pub fn new(
        dates: Vec<YearMonth>,
        cpi: Vec<f64>,
        predictor_names: Vec<String>,
        predictors: DMatrix<f64>,
    ) -> Result<Self> {
        dim_check(
            dates.len() == cpi.len() && predictors.nrows() == cpi.len(),
            || {
                format!(
                    "{} dates, {} CPI values, {} predictor rows",
                    dates.len(),
                    cpi.len(),
                    predictors.nrows()
                )
            },
        )?;
        dim_check(predictor_names.len() == predictors.ncols(), || {
            format!(
                "{} names for {} predictor columns",
                predictor_names.len(),
                predictors.ncols()
            )
        })?;
        for w in dates.windows(2) {
            if w[1] != w[0].succ() {
                return Err(Error::Schema(format!(
                    "dates jump from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(c) = cpi.iter().find(|c| !c.is_nan() && !(**c > 0.0)) {
            return Err(Error::Domain(format!("CPI must be positive, found {c}")));
        }
        let mut missing = Vec::new();
        for r in 0..cpi.len() {
            if cpi[r].is_nan() {
                missing.push((r, 0));
            }
            for j in 0..predictors.ncols() {
                if predictors[(r, j)].is_nan() {
                    missing.push((r, j + 1));
                }
            }
        }
        Ok(Self {
            dates,
            cpi,
            predictor_names,
            predictors,
            missing,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn is_missing(&self, row: usize, column: usize) -> bool {
        self.missing.binary_search(&(row, column)).is_ok()
    }

    /// CSV with columns `date,cpi,<predictors...>`; missing cells are blank.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string(), "cpi".to_string()];
        header.extend(self.predictor_names.iter().cloned());
        w.write_record(&header)?;
        let cell = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                fmt_f64(v)
            }
        };
        for r in 0..self.len() {
            let mut rec = vec![self.dates[r].to_string(), cell(self.cpi[r])];
            rec.extend(self.predictors.row(r).iter().map(|v| cell(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_cell(raw: &str, line: usize) -> Result<f64> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("`{t}`: {e}"),
    })
}

/// Read a monthly panel from any CSV source.
pub fn read_macro_csv<R: Read>(input: R, schema: &MacroSchema) -> Result<MacroTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let date_col = find(&schema.date_column)?;
    let cpi_col = find(&schema.cpi_column)?;
    let names: Vec<String> = match &schema.predictors {
        Some(list) => list.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_col && *i != cpi_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let pred_cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut dates = Vec::new();
    let mut cpi = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let date: YearMonth = rec[date_col].parse().map_err(|e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if let Some(prev) = dates.last() {
            if date != YearMonth::succ(*prev) {
                return Err(Error::Parse {
                    line,
                    msg: format!("date {date} does not follow {prev}"),
                });
            }
        }
        dates.push(date);
        let c = parse_cell(&rec[cpi_col], line)?;
        if !c.is_nan() && !(c > 0.0) {
            return Err(Error::Parse {
                line,
                msg: format!("CPI must be positive, found {c}"),
            });
        }
        cpi.push(c);
        for &j in &pred_cols {
            values.push(parse_cell(&rec[j], line)?);
        }
    }
    let predictors = DMatrix::from_row_slice(dates.len(), names.len(), &values);
    MacroTable::new(dates, cpi, names, predictors)
}

pub fn ingest_csv(path: &Path, schema: &MacroSchema) -> Result<MacroTable> {
    read_macro_csv(std::fs::File::open(path)?, schema)
}

/// `pi_t = 1200 ln(CPI_{t+1} / CPI_t)`; one element shorter than the input.
/// NaN inputs propagate to the affected outputs.
pub fn inflation_transform(cpi: &[f64]) -> Result<Vec<f64>> {
    if cpi.len() < 2 {
        return Err(Error::InvalidSize(format!(
            "need at least 2 CPI values, got {}",
            cpi.len()
        )));
    }
    if let Some(c) = cpi.iter().find(|c| !c.is_nan() && !(**c > 0.0)) {
        return Err(Error::Domain(format!("CPI must be positive, found {c}")));
    }
    Ok(cpi
        .windows(2)
        .map(|w| 1200.0 * (w[1] / w[0]).ln())
        .collect())
}

/// Regression design for `pi_{t+1}`.
///
/// Columns: `pi_t, ..., pi_{t-pi_lags+1}`, then the predictor block laid out
/// lag-major (all predictors at lag 0, then all at lag 1, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct MacroDesign {
    pub data: Dataset,
    /// For each row, the index `t + 1` of its response in the inflation series.
    pub target: Vec<usize>,
    pub pi_cols: usize,
    pub block_cols: usize,
}

pub fn build_design(
    pi: &[f64],
    predictors: &DMatrix<f64>,
    pi_lags: usize,
    pred_lags: usize,
) -> Result<MacroDesign> {
    dim_check(predictors.nrows() >= pi.len(), || {
        format!(
            "{} predictor rows for {} inflation values",
            predictors.nrows(),
            pi.len()
        )
    })?;
    let k = if pred_lags == 0 {
        0
    } else {
        predictors.ncols()
    };
    let width = pi_lags + k * pred_lags;
    if width == 0 {
        return Err(Error::InvalidParameter("design has no regressors".into()));
    }
    let first = pi_lags.max(pred_lags).max(1) - 1;
    if pi.len() < first + 2 {
        return Err(Error::InvalidSize(format!(
            "{} inflation values cannot support {} lags",
            pi.len(),
            pi_lags.max(pred_lags)
        )));
    }
    let mut values = Vec::new();
    let mut ys = Vec::new();
    let mut target = Vec::new();
    let mut row = Vec::with_capacity(width);
    for t in first..pi.len() - 1 {
        row.clear();
        row.extend((0..pi_lags).map(|j| pi[t - j]));
        for l in 0..pred_lags {
            row.extend(predictors.row(t - l).iter().take(k));
        }
        let y = pi[t + 1];
        if y.is_nan() || row.iter().any(|v| v.is_nan()) {
            continue;
        }
        values.extend_from_slice(&row);
        ys.push(y);
        target.push(t + 1);
    }
    let data = Dataset::new(
        DMatrix::from_row_slice(ys.len(), width, &values),
        DVector::from_vec(ys),
        None,
    )?;
    Ok(MacroDesign {
        data,
        target,
        pi_cols: pi_lags,
        block_cols: k * pred_lags,
    })
}

/// Fitting method for each window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Backend {
    /// Least squares with intercept on every window row.
    Ols,
    /// ReLU network trained on the window's training rows, early-stopped on its
    /// validation rows, averaged over `n_init` initializations.
    Nn {
        hidden_width: usize,
        hidden_layers: usize,
        train: TrainConfig,
        n_init: usize,
    },
}

impl Backend {
    /// 100-unit layers, dropout 0.2, 10 initializations.
    pub fn nn(hidden_layers: usize) -> Self {
        Backend::Nn {
            hidden_width: 100,
            hidden_layers,
            train: TrainConfig {
                dropout_rate: 0.2,
                ..TrainConfig::default()
            },
            n_init: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingSpec {
    pub window: usize,
    pub train_len: usize,
    pub val_len: usize,
    pub gamma_percent: f64,
    pub backend: Backend,
    /// First forecast month; defaults to the first feasible origin.
    pub start: Option<YearMonth>,
    /// Stop after this many forecasts.
    pub max_forecasts: Option<usize>,
    pub pi_lags: usize,
    pub pred_lags: usize,
    pub seed: u64,
}

impl Default for RollingSpec {
    fn default() -> Self {
        Self {
            window: 453,
            train_len: 300,
            val_len: 153,
            gamma_percent: 0.0,
            backend: Backend::Ols,
            start: None,
            max_forecasts: None,
            pi_lags: 4,
            pred_lags: 4,
            seed: 0,
        }
    }
}

impl RollingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_len + self.val_len != self.window || self.train_len == 0 {
            return Err(Error::InvalidParameter(format!(
                "window {} must equal train {} + validation {}, with train > 0",
                self.window, self.train_len, self.val_len
            )));
        }
        if !(0.0..=100.0).contains(&self.gamma_percent) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in [0, 100], got {}",
                self.gamma_percent
            )));
        }
        if let Backend::Nn {
            train,
            n_init,
            hidden_width,
            ..
        } = &self.backend
        {
            train.validate()?;
            if *n_init == 0 || *hidden_width == 0 {
                return Err(Error::InvalidParameter(
                    "n_init and hidden_width must be >= 1".into(),
                ));
            }
            if self.val_len == 0 {
                return Err(Error::InvalidParameter(
                    "network backend needs validation rows".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything a backend sees for one forecast origin.
pub struct WindowData {
    pub train_x: DMatrix<f64>,
    pub train_y: DVector<f64>,
    pub valid_x: DMatrix<f64>,
    pub valid_y: DVector<f64>,
    /// Regressors of the row being forecast.
    pub target_x: DVector<f64>,
    /// Design row index of the forecast target.
    pub origin: usize,
    pub seed: u64,
}

/// Produces a one-step forecast from a window.
pub trait ForecastBackend: Sync {
    fn forecast(&self, window: &WindowData) -> Result<f64>;
}

impl ForecastBackend for Backend {
    fn forecast(&self, w: &WindowData) -> Result<f64> {
        match self {
            Backend::Ols => {
                let x = stack(&w.train_x, &w.valid_x);
                let y = DVector::from_iterator(
                    w.train_y.len() + w.valid_y.len(),
                    w.train_y.iter().chain(w.valid_y.iter()).copied(),
                );
                let fit = fit_ols(&x, &y, true)?;
                Ok(predict_ols(&fit, &row_matrix(&w.target_x))?[0])
            }
            Backend::Nn {
                hidden_width,
                hidden_layers,
                train: cfg,
                n_init,
            } => nn_forecast(w, *hidden_width, *hidden_layers, cfg, *n_init),
        }
    }
}

fn row_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Column means and scales from the training rows; zero-variance columns get scale 1.
fn zscore_params(x: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let scale = DVector::from_iterator(
        x.ncols(),
        x.column_iter().zip(mean.iter()).map(|(c, m)| {
            let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        }),
    );
    (mean, scale)
}

fn apply_zscore(x: &DMatrix<f64>, mean: &DVector<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        (x[(r, c)] - mean[c]) / scale[c]
    })
}

fn nn_forecast(
    w: &WindowData,
    width: usize,
    layers: usize,
    cfg: &TrainConfig,
    n_init: usize,
) -> Result<f64> {
    let (mean, scale) = zscore_params(&w.train_x);
    let y_mean = w.train_y.mean();
    let y_scale = {
        let v =
            w.train_y.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / w.train_y.len() as f64;
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    };
    let x = apply_zscore(&stack(&w.train_x, &w.valid_x), &mean, &scale);
    let y = DVector::from_iterator(
        w.train_y.len() + w.valid_y.len(),
        w.train_y
            .iter()
            .chain(w.valid_y.iter())
            .map(|v| (v - y_mean) / y_scale),
    );
    let data = Dataset::new(x, y, None)?;
    let total = data.len();
    let splits = Splits {
        train: 0..w.train_y.len(),
        valid: w.train_y.len()..total,
        test: total..total,
    };
    let target = apply_zscore(&row_matrix(&w.target_x), &mean, &scale);
    let arch = Architecture::mlp(target.ncols(), width, layers)?;
    let mut sum = 0.0;
    for init in 0..n_init {
        let seed = derive_seed(w.seed, &[init as u64]);
        let net = Network::init(
            arch.clone(),
            &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0])),
        );
        let run_cfg = TrainConfig {
            seed: derive_seed(seed, &[1]),
            ..cfg.clone()
        };
        let report = train(&net, &data, &splits, &run_cfg)?;
        sum += report.network.predict(&target)?[0];
    }
    Ok(sum / n_init as f64 * y_scale + y_mean)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastStep {
    pub date: YearMonth,
    pub truth: f64,
    pub forecast: f64,
    pub n_features: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastReport {
    pub steps: Vec<ForecastStep>,
    pub mse: f64,
    /// Origins skipped because the backend failed.
    pub skipped: usize,
}

impl ForecastReport {
    fn from_steps(steps: Vec<ForecastStep>, skipped: usize) -> Self {
        let mse = steps
            .iter()
            .map(|s| (s.truth - s.forecast).powi(2))
            .sum::<f64>()
            / steps.len() as f64;
        Self {
            steps,
            mse,
            skipped,
        }
    }

    /// CSV with columns `date,truth,forecast,abs_error,n_features`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "truth", "forecast", "abs_error", "n_features"])?;
        for s in &self.steps {
            w.write_record([
                s.date.to_string(),
                fmt_f64(s.truth),
                fmt_f64(s.forecast),
                fmt_f64((s.truth - s.forecast).abs()),
                s.n_features.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Design and per-row target dates for a panel.
pub fn prepare_design(
    table: &MacroTable,
    pi_lags: usize,
    pred_lags: usize,
) -> Result<(MacroDesign, Vec<YearMonth>)> {
    let pi = inflation_transform(&table.cpi)?;
    let design = build_design(&pi, &table.predictors, pi_lags, pred_lags)?;
    let dates = design.target.iter().map(|&t| table.dates[t]).collect();
    Ok((design, dates))
}

/// Rolling forecasts with the backend named in `spec`.
pub fn rolling_forecast(table: &MacroTable, spec: &RollingSpec) -> Result<ForecastReport> {
    let (design, dates) = prepare_design(table, spec.pi_lags, spec.pred_lags)?;
    rolling_forecast_with(&design, &dates, spec, &spec.backend)
}

/// Rolling forecasts over a prepared design with any backend.
pub fn rolling_forecast_with<B: ForecastBackend + ?Sized>(
    design: &MacroDesign,
    dates: &[YearMonth],
    spec: &RollingSpec,
    backend: &B,
) -> Result<ForecastReport> {
    spec.validate()?;
    let data = &design.data;
    dim_check(dates.len() == data.len(), || {
        format!("{} dates for {} design rows", dates.len(), data.len())
    })?;
    let first = match spec.start {
        Some(start) => dates
            .iter()
            .position(|d| *d >= start)
            .unwrap_or(dates.len()),
        None => spec.window,
    };
    if first < spec.window || first >= data.len() {
        return Err(Error::InvalidSize(format!(
            "no feasible origin: first forecast row {first}, window {}, {} design rows",
            spec.window,
            data.len()
        )));
    }
    let mut origins: Vec<usize> = (first..data.len()).collect();
    if let Some(cap) = spec.max_forecasts {
        origins.truncate(cap);
    }
    let keep = screen_count(design.block_cols, spec.gamma_percent);

    let results: Vec<Result<ForecastStep>> = origins
        .par_iter()
        .map(|&origin| {
            let lo = origin - spec.window;
            let mid = lo + spec.train_len;
            let block = data
                .x
                .view((lo, design.pi_cols), (spec.train_len, design.block_cols));
            let chosen = if keep == 0 {
                Vec::new()
            } else {
                let y: Vec<f64> = data.y.rows(lo, spec.train_len).iter().copied().collect();
                sis_screen(&block.into_owned(), &y, spec.gamma_percent)?
            };
            let cols: Vec<usize> = (0..design.pi_cols)
                .chain(chosen.iter().map(|j| design.pi_cols + j))
                .collect();
            let pick = |r0: usize, len: usize| {
                DMatrix::from_fn(len, cols.len(), |r, c| data.x[(r0 + r, cols[c])])
            };
            let window = WindowData {
                train_x: pick(lo, spec.train_len),
                train_y: data.y.rows(lo, spec.train_len).into_owned(),
                valid_x: pick(mid, spec.val_len),
                valid_y: data.y.rows(mid, spec.val_len).into_owned(),
                target_x: DVector::from_iterator(
                    cols.len(),
                    cols.iter().map(|&c| data.x[(origin, c)]),
                ),
                origin,
                seed: derive_seed(spec.seed, &[origin as u64]),
            };
            Ok(ForecastStep {
                date: dates[origin],
                truth: data.y[origin],
                forecast: backend.forecast(&window)?,
                n_features: chosen.len(),
            })
        })
        .collect();

    let mut steps = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for (r, origin) in results.into_iter().zip(&origins) {
        match r {
            Ok(step) if step.forecast.is_finite() => steps.push(step),
            Ok(_) | Err(Error::TrainingDiverged { .. }) => {
                log::warn!("forecast origin {} skipped", dates[*origin]);
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if steps.is_empty() {
        return Err(Error::InvalidSize("every forecast window failed".into()));
    }
    Ok(ForecastReport::from_steps(steps, skipped))
}

/// Monthly panel whose inflation follows `pi_t = mean + AR(coeffs) + N(0, 1)`,
/// with no predictors, starting in `start`.
pub fn simulate_ar_inflation(
    coeffs: &[f64],
    mean: f64,
    months: usize,
    start: YearMonth,
    seed: u64,
) -> Result<MacroTable> {
    let pi = gen_linear_ar(months - 1, coeffs, 500, seed)?;
    let mut cpi = Vec::with_capacity(months);
    cpi.push(100.0);
    for p in &pi {
        let last = *cpi.last().unwrap();
        cpi.push(last * ((p + mean) / 1200.0).exp());
    }
    let dates = (0..months as i64)
        .map(|k| YearMonth::from_ordinal(start.ordinal() + k))
        .collect();
    MacroTable::new(dates, cpi, Vec::new(), DMatrix::zeros(months, 0))
}
