//! Replicated convergence experiments.
//!
//! An [`ExperimentSpec`] fixes a data model, an `n` grid, a replicate count
//! and the network/training template. [`run_convergence`] runs every
//! `(n, replicate)` cell, in parallel, and returns one [`RiskRow`] per
//! method. Each cell's seed is derived from `(base_seed, stream, n,
//! replicate)`, so output does not depend on scheduling.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{lag_embed_with_truth, Dataset, GeneratorKind, DEFAULT_BURN_IN};
use crate::net::{Architecture, Network};
use crate::ols::{fit_ols, predict_ols};
use crate::seed::{derive_seed, label_hash};
use crate::selection::{aic_select_lag, theoretical_lag};
use crate::stats::quantile_sorted;
use crate::training::{empirical_risk, fmt_f64, split_indices, train, TrainConfig};

/// How the input dimension of a series model is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LagRule {
    Fixed {
        d: usize,
    },
    /// AIC over `1..=d_max`, computed on the training part of the series.
    Aic {
        d_max: usize,
    },
    /// `round(c n^(1 / (alpha + 1)))`.
    Theoretical {
        alpha: f64,
        c: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model_id: String,
    pub model: GeneratorKind,
    pub burn_in: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Template; its `seed` is replaced per replicate.
    pub train: TrainConfig,
    pub base_seed: u64,
    pub baseline: bool,
    pub lag_rule: LagRule,
    pub ols_intercept: bool,
    /// Label hashed into the seeds; paired experiments share one.
    pub seed_stream: Option<String>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

impl ExperimentSpec {
    /// Defaults for a model: 3 hidden layers of 20 units, paper-style
    /// training template, AIC lag choice up to 10.
    pub fn new(model_id: impl Into<String>, model: GeneratorKind) -> Self {
        Self {
            model_id: model_id.into(),
            model,
            burn_in: DEFAULT_BURN_IN,
            n_grid: vec![100, 400, 1600, 6400],
            replicates: 200,
            hidden_width: 20,
            hidden_layers: 3,
            train: TrainConfig::default(),
            base_seed: 0,
            baseline: true,
            lag_rule: LagRule::Aic { d_max: 10 },
            ols_intercept: false,
            seed_stream: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "n_grid must be nonempty and strictly increasing".into(),
            ));
        }
        if self.n_grid[0] < 4 {
            return Err(Error::Config("every n must be >= 4".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be >= 1".into()));
        }
        match self.lag_rule {
            LagRule::Fixed { d: 0 } | LagRule::Aic { d_max: 0 } => {
                Err(Error::Config("lag orders must be >= 1".into()))
            }
            LagRule::Theoretical { alpha, c } if !(alpha > 0.0 && c > 0.0) => Err(Error::Config(
                "theoretical lag needs alpha > 0 and c > 0".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn cell_seed(&self, n: usize, replicate: usize) -> u64 {
        let stream = self.seed_stream.as_deref().unwrap_or(&self.model_id);
        derive_seed(
            self.base_seed,
            &[label_hash(stream), n as u64, replicate as u64],
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nn,
    Ols,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Nn => "nn",
            Method::Ols => "ols",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Method::Nn),
            "ols" => Ok(Method::Ols),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// One fitted method on one replicate. `risk` is `None` when training failed.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskRow {
    pub model_id: String,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub method: Method,
    pub risk: Option<f64>,
    pub epochs: usize,
    pub selected_d: usize,
}

impl RiskRow {
    pub fn log_risk(&self) -> Option<f64> {
        self.risk.filter(|r| *r > 0.0).map(f64::ln)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
}

const RISK_HEADER: [&str; 10] = [
    "model_id",
    "n",
    "replicate",
    "seed",
    "method",
    "risk",
    "log_risk",
    "epochs",
    "selected_d",
    "status",
];

impl RiskTable {
    pub fn ok_rows(&self) -> impl Iterator<Item = &RiskRow> {
        self.rows.iter().filter(|r| r.risk.is_some())
    }

    pub fn failed_count(&self) -> usize {
        self.rows.len() - self.ok_rows().count()
    }

    /// Risks of successful rows for `(n, method)` in replicate order.
    pub fn risks(&self, n: usize, method: Method) -> Vec<f64> {
        self.ok_rows()
            .filter(|r| r.n == n && r.method == method)
            .filter_map(|r| r.risk)
            .collect()
    }

    pub fn log_risks(&self, n: usize, method: Method) -> Vec<f64> {
        self.ok_rows()
            .filter(|r| r.n == n && r.method == method)
            .filter_map(RiskRow::log_risk)
            .collect()
    }

    pub fn extend(&mut self, other: RiskTable) {
        self.rows.extend(other.rows);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RISK_HEADER)?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            w.write_record([
                r.model_id.clone(),
                r.n.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                r.method.as_str().to_string(),
                opt(r.risk),
                opt(r.log_risk()),
                r.epochs.to_string(),
                r.selected_d.to_string(),
                if r.risk.is_some() { "ok" } else { "failed" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<&str> = r.headers()?.iter().collect();
        if header != RISK_HEADER {
            return Err(Error::Schema(format!(
                "unexpected risk table header {header:?}"
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let err = |msg: String| Error::Parse { line, msg };
            let num =
                |j: usize| -> Result<u64> { rec[j].parse::<u64>().map_err(|e| err(e.to_string())) };
            let risk = match &rec[9] {
                "ok" => Some(rec[5].parse::<f64>().map_err(|e| err(e.to_string()))?),
                "failed" => None,
                other => return Err(err(format!("unknown status `{other}`"))),
            };
            rows.push(RiskRow {
                model_id: rec[0].to_string(),
                n: num(1)? as usize,
                replicate: num(2)? as usize,
                seed: num(3)?,
                method: rec[4].parse().map_err(|e: Error| err(e.to_string()))?,
                risk,
                epochs: num(7)? as usize,
                selected_d: num(8)? as usize,
            });
        }
        Ok(Self { rows })
    }
}

/// Data for one cell: `n` rows with oracle, plus the input dimension used.
fn cell_data(spec: &ExperimentSpec, n: usize, seed: u64) -> Result<(Dataset, usize)> {
    if !spec.model.is_series() {
        let data = spec.model.simulate_regression(n, spec.burn_in, seed)?;
        let d = data.dim();
        return Ok((data, d));
    }
    let order = spec.model.truth_order();
    let cap = match spec.lag_rule {
        LagRule::Fixed { d } => d,
        LagRule::Aic { d_max } => d_max,
        LagRule::Theoretical { alpha, c } => theoretical_lag(n, alpha, c),
    };
    let start = cap.max(order).max(1);
    let (series, truth) = spec.model.simulate_series(n + start, spec.burn_in, seed)?;
    let d = match spec.lag_rule {
        LagRule::Aic { d_max } => {
            // training rows are t in [start, start + n/2)
            aic_select_lag(&series[..start + n / 2], d_max)?
        }
        _ => cap,
    };
    let full = lag_embed_with_truth(&series, d, &truth)?;
    Ok((full.rows(full.len() - n..full.len()), d))
}

fn run_cell(spec: &ExperimentSpec, n: usize, replicate: usize) -> Result<Vec<RiskRow>> {
    let seed = spec.cell_seed(n, replicate);
    let (data, d) = cell_data(spec, n, derive_seed(seed, &[0]))?;
    let splits = split_indices(n)?;
    let oracle = data
        .oracle
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("experiment data lacks oracle values".into()))?;
    let test = data.rows(splits.test.clone());
    let test_oracle = oracle.rows(splits.test.start, splits.test.len());

    let row = |method, risk, epochs| RiskRow {
        model_id: spec.model_id.clone(),
        n,
        replicate,
        seed,
        method,
        risk,
        epochs,
        selected_d: d,
    };

    let arch = Architecture::mlp(d, spec.hidden_width, spec.hidden_layers)?;
    let net = Network::init(
        arch,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1])),
    );
    let cfg = TrainConfig {
        seed: derive_seed(seed, &[2]),
        ..spec.train.clone()
    };
    let mut rows = Vec::with_capacity(2);
    match train(&net, &data, &splits, &cfg) {
        Ok(report) => {
            let pred = report.network.predict(&test.x)?;
            let risk = empirical_risk(pred.as_slice(), test_oracle.as_slice())?;
            rows.push(row(Method::Nn, Some(risk), report.epochs_run));
        }
        Err(Error::TrainingDiverged { epoch }) => {
            log::warn!(
                "{} n={n} rep={replicate}: training diverged at epoch {epoch}",
                spec.model_id
            );
            rows.push(row(Method::Nn, None, epoch));
        }
        Err(e) => return Err(e),
    }

    if spec.baseline {
        let fit_rows = data.rows(splits.train.start..splits.valid.end);
        let fit = fit_ols(&fit_rows.x, &fit_rows.y, spec.ols_intercept)?;
        let pred: DVector<f64> = predict_ols(&fit, &test.x)?;
        let risk = empirical_risk(pred.as_slice(), test_oracle.as_slice())?;
        rows.push(row(Method::Ols, Some(risk), 0));
    }
    Ok(rows)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(job))
}

/// Run every `(n, replicate)` cell of `spec`.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<RiskTable> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .n_grid
        .iter()
        .flat_map(|&n| (0..spec.replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<Vec<RiskRow>>> = with_pool(spec.workers, || {
        cells
            .par_iter()
            .map(|&(n, r)| run_cell(spec, n, r))
            .collect()
    })?;
    let mut rows = Vec::with_capacity(cells.len() * 2);
    for r in results {
        rows.extend(r?);
    }
    Ok(RiskTable { rows })
}

/// VAR(1)-driven covariates against iid covariates with the same marginal
/// law, sharing seeds cell by cell. Rows are tagged `dependent` / `independent`.
pub fn run_dependent_vs_independent(
    rho: f64,
    n_grid: &[usize],
    replicates: usize,
    template: &ExperimentSpec,
) -> Result<RiskTable> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|rho| must be < 1, got {rho}"
        )));
    }
    let arm = |id: &str, model: GeneratorKind| ExperimentSpec {
        model_id: id.to_string(),
        model,
        n_grid: n_grid.to_vec(),
        replicates,
        seed_stream: Some(format!("dep-vs-indep/{rho}")),
        ..template.clone()
    };
    let mut table = run_convergence(&arm("dependent", GeneratorKind::Var1Shift { rho }))?;
    table.extend(run_convergence(&arm(
        "independent",
        GeneratorKind::iid_matching_var1(rho),
    ))?);
    Ok(table)
}

/// Least-squares fit of `log(mean risk)` on `log n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Straight-line fit with R², used on log-log points.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> RateEstimate {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    RateEstimate {
        slope,
        intercept,
        r_squared,
    }
}

/// Slope of log mean risk against log n for one method, over successful rows.
pub fn estimate_rate(table: &RiskTable, method: Method) -> Result<RateEstimate> {
    let mut by_n: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in table.ok_rows().filter(|r| r.method == method) {
        let e = by_n.entry(r.n).or_default();
        e.0 += r.risk.unwrap_or_default();
        e.1 += 1;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = by_n
        .into_iter()
        .map(|(n, (sum, count))| (n, sum / count as f64))
        .filter(|(_, m)| *m > 0.0)
        .map(|(n, m)| ((n as f64).ln(), m.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::InvalidSize(format!(
            "rate fit needs at least 2 sample sizes with positive mean risk, found {}",
            xs.len()
        )));
    }
    Ok(fit_line(&xs, &ys))
}

/// Five-number summary of log risk for one `(model, n, method)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSummary {
    pub model_id: String,
    pub n: usize,
    pub method: Method,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles (linear interpolation) of an unsorted sample: `[min, q1, median, q3, max]`.
pub fn five_numbers(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&v, q))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoxSummaries {
    pub groups: Vec<BoxSummary>,
    /// Groups with no usable row (every replicate failed).
    pub skipped: usize,
}

impl BoxSummaries {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model_id", "n", "method", "count", "min", "q1", "median", "q3", "max",
        ])?;
        for g in &self.groups {
            w.write_record([
                g.model_id.clone(),
                g.n.to_string(),
                g.method.as_str().to_string(),
                g.count.to_string(),
                fmt_f64(g.min),
                fmt_f64(g.q1),
                fmt_f64(g.median),
                fmt_f64(g.q3),
                fmt_f64(g.max),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-group box statistics of log risk, ordered by `(model_id, n, method)`.
pub fn summarize_box(table: &RiskTable) -> BoxSummaries {
    let mut groups: BTreeMap<(String, usize, Method), Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        let slot = groups
            .entry((r.model_id.clone(), r.n, r.method))
            .or_default();
        if let Some(l) = r.log_risk() {
            slot.push(l);
        }
    }
    let mut out = BoxSummaries::default();
    for ((model_id, n, method), values) in groups {
        if values.is_empty() {
            log::warn!(
                "box summary: no usable rows for {model_id} n={n} {}",
                method.as_str()
            );
            out.skipped += 1;
            continue;
        }
        let [min, q1, median, q3, max] = five_numbers(&values);
        out.groups.push(BoxSummary {
            model_id,
            n,
            method,
            count: values.len(),
            min,
            q1,
            median,
            q3,
            max,
        });
    }
    out
}

/// Flat key/value experiment configuration (TOML syntax, unknown keys rejected).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    pub model_id: Option<String>,
    pub rho: Option<f64>,
    pub sigma: Option<Vec<Vec<f64>>>,
    pub coeffs: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub mass: Option<f64>,
    pub d_trunc: Option<usize>,
    pub burn_in: Option<usize>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub hidden_width: Option<usize>,
    pub hidden_layers: Option<usize>,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub dropout: Option<f64>,
    pub base_seed: Option<u64>,
    pub baseline: Option<bool>,
    pub lag_rule: Option<String>,
    pub lag: Option<usize>,
    pub d_max: Option<usize>,
    pub lag_alpha: Option<f64>,
    pub lag_c: Option<f64>,
    pub ols_intercept: Option<bool>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The generator named by `model` with its parameters.
    pub fn model_kind(&self) -> Result<GeneratorKind> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("model `{}` needs `{key}`", self.model)))
        };
        let model = match self.model.as_str() {
            "var1_shift" => GeneratorKind::Var1Shift {
                rho: need(self.rho, "rho")?,
            },
            "iid_gaussian" => match (&self.sigma, self.rho) {
                (Some(s), _) => GeneratorKind::IidGaussian { sigma: s.clone() },
                (None, Some(rho)) => GeneratorKind::iid_matching_var1(rho),
                (None, None) => {
                    return Err(Error::Config("iid_gaussian needs `sigma` or `rho`".into()))
                }
            },
            "linear_ar" => GeneratorKind::LinearAr {
                coeffs: self
                    .coeffs
                    .clone()
                    .ok_or_else(|| Error::Config("linear_ar needs `coeffs`".into()))?,
            },
            "nonlinear_ar_sqrt" => GeneratorKind::NonlinearArSqrt,
            "nonlinear_ar_abs" => GeneratorKind::NonlinearArAbs,
            "ar_infinity" => GeneratorKind::ArInfinity {
                alpha: need(self.alpha, "alpha")?,
                mass: need(self.mass, "mass")?,
                d_trunc: self
                    .d_trunc
                    .ok_or_else(|| Error::Config("ar_infinity needs `d_trunc`".into()))?,
            },
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let model = self.model_kind()?;
        let lag_rule = match self.lag_rule.as_deref().unwrap_or("aic") {
            "fixed" => LagRule::Fixed {
                d: self
                    .lag
                    .ok_or_else(|| Error::Config("lag_rule = fixed needs `lag`".into()))?,
            },
            "aic" => LagRule::Aic {
                d_max: self.d_max.unwrap_or(10),
            },
            "theoretical" => LagRule::Theoretical {
                alpha: self.lag_alpha.or(self.alpha).ok_or_else(|| {
                    Error::Config("lag_rule = theoretical needs `lag_alpha`".into())
                })?,
                c: self.lag_c.unwrap_or(1.0),
            },
            other => return Err(Error::Config(format!("unknown lag_rule `{other}`"))),
        };
        let defaults = TrainConfig::default();
        let mut spec = ExperimentSpec::new(
            self.model_id.unwrap_or_else(|| model.name().to_string()),
            model,
        );
        spec.burn_in = self.burn_in.unwrap_or(DEFAULT_BURN_IN);
        spec.n_grid = self.n_grid;
        spec.replicates = self.replicates;
        spec.hidden_width = self.hidden_width.unwrap_or(spec.hidden_width);
        spec.hidden_layers = self.hidden_layers.unwrap_or(spec.hidden_layers);
        spec.train = TrainConfig {
            lambda: self.lambda.unwrap_or(defaults.lambda),
            learning_rate: self.learning_rate.unwrap_or(defaults.learning_rate),
            max_epochs: self.max_epochs.unwrap_or(defaults.max_epochs),
            patience: self.patience.unwrap_or(defaults.patience),
            dropout_rate: self.dropout.unwrap_or(0.0),
            seed: 0,
        };
        spec.base_seed = self.base_seed.unwrap_or(0);
        spec.baseline = self.baseline.unwrap_or(true);
        spec.lag_rule = lag_rule;
        spec.ols_intercept = self.ols_intercept.unwrap_or(false);
        spec.workers = self.workers.unwrap_or(0);
        spec.validate()?;
        Ok(spec)
    }
}
