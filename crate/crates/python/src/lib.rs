//! Python bindings: networks, training, generators, lag selection, the
//! experiment harness and rolling forecasts. Matrices cross the boundary as
//! lists of rows.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use depnet::forecasting::{
    inflation_transform as inflation, ingest_csv, rolling_forecast, Backend, MacroSchema,
    RollingSpec,
};
use depnet::generators::{Dataset, GeneratorSpec, DEFAULT_BURN_IN};
use depnet::harness::{
    estimate_rate, run_convergence, summarize_box, ExperimentConfig, Method, RiskTable,
};
use depnet::ols;
use depnet::selection::{self, RateSpec};
use depnet::training::{self, split_indices, TrainConfig};
use depnet::{Architecture, Network};

fn err(e: depnet::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "Network", module = "depnet_py", from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// Glorot-initialized network with the given layer widths.
    #[new]
    #[pyo3(signature = (widths, seed = 0))]
    fn new(widths: Vec<usize>, seed: u64) -> PyResult<Self> {
        let arch = Architecture::new(widths, 1.0, 0).map_err(err)?;
        Ok(Self {
            inner: Network::init(arch, &mut ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    /// `hidden_layers` layers of `hidden_width` units between `input_dim` inputs and one output.
    #[staticmethod]
    #[pyo3(signature = (input_dim, hidden_width, hidden_layers, seed = 0))]
    fn mlp(
        input_dim: usize,
        hidden_width: usize,
        hidden_layers: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let arch = Architecture::mlp(input_dim, hidden_width, hidden_layers).map_err(err)?;
        Ok(Self {
            inner: Network::init(arch, &mut ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    /// Exact linear map `x -> phi . x` as a two-layer network.
    #[staticmethod]
    fn linear_replica(phi: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Network::linear_replica(&phi).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Network::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.inner.arch().widths().to_vec()
    }

    fn parameter_count(&self) -> usize {
        self.inner.arch().parameter_count()
    }

    #[pyo3(signature = (tol = 0.0))]
    fn sparsity(&self, tol: f64) -> usize {
        self.inner.sparsity(tol)
    }

    fn weight_l1(&self) -> f64 {
        self.inner.weight_l1()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&x).map_err(err)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .predict(&matrix(&x)?)
            .map_err(err)?
            .as_slice()
            .to_vec())
    }

    fn project_params(&self) -> Self {
        Self {
            inner: self.inner.project_params(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Network(widths={:?})", self.inner.arch().widths())
    }
}

/// Full-batch gradient descent with early stopping on the standard half/quarter/quarter split.
#[pyfunction]
#[pyo3(signature = (network, x, y, lambda_ = 0.1, learning_rate = 0.01, max_epochs = 5000, patience = 50, dropout = 0.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    lambda_: f64,
    learning_rate: f64,
    max_epochs: usize,
    patience: usize,
    dropout: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = Dataset::new(matrix(&x)?, DVector::from_vec(y), None).map_err(err)?;
    let splits = split_indices(data.len()).map_err(err)?;
    let cfg = TrainConfig {
        lambda: lambda_,
        learning_rate,
        max_epochs,
        patience,
        dropout_rate: dropout,
        seed,
    };
    let report = py
        .detach(|| training::train(&network.inner, &data, &splits, &cfg))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item(
        "network",
        PyNetwork {
            inner: report.network,
        },
    )?;
    out.set_item("epochs_run", report.epochs_run)?;
    out.set_item("best_epoch", report.best_epoch)?;
    out.set_item("train_loss", report.train_loss_history)?;
    out.set_item("valid_mse", report.valid_mse_history)?;
    Ok(out)
}

#[pyfunction]
fn penalized_loss(
    network: &PyNetwork,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    lambda_: f64,
) -> PyResult<f64> {
    training::penalized_loss(&network.inner, &matrix(&x)?, &DVector::from_vec(y), lambda_)
        .map_err(err)
}

/// Simulate `n` rows of a named model; returns `x` (rows), `y` and `oracle`.
#[pyfunction]
#[pyo3(signature = (model, n, seed = 0, burn_in = DEFAULT_BURN_IN, lags = None, rho = None, coeffs = None, alpha = None, mass = None, d_trunc = None))]
#[allow(clippy::too_many_arguments)]
fn generate<'py>(
    py: Python<'py>,
    model: String,
    n: usize,
    seed: u64,
    burn_in: usize,
    lags: Option<usize>,
    rho: Option<f64>,
    coeffs: Option<Vec<f64>>,
    alpha: Option<f64>,
    mass: Option<f64>,
    d_trunc: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig {
        model,
        rho,
        coeffs,
        alpha,
        mass,
        d_trunc,
        ..Default::default()
    };
    let spec = GeneratorSpec {
        kind: cfg.model_kind().map_err(err)?,
        n,
        burn_in,
        seed,
    };
    let data = spec.generate(lags).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("x", rows_of(&data.x))?;
    out.set_item("y", data.y.as_slice().to_vec())?;
    out.set_item("oracle", data.oracle.map(|o| o.as_slice().to_vec()))?;
    Ok(out)
}

#[pyfunction]
fn aic_select_lag(series: Vec<f64>, d_max: usize) -> PyResult<usize> {
    selection::aic_select_lag(&series, d_max).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, alpha, c = 1.0))]
fn theoretical_lag(n: usize, alpha: f64, c: f64) -> usize {
    selection::theoretical_lag(n, alpha, c)
}

#[pyfunction]
fn sis_screen(x: Vec<Vec<f64>>, y: Vec<f64>, gamma_percent: f64) -> PyResult<Vec<usize>> {
    selection::sis_screen(&matrix(&x)?, &y, gamma_percent).map_err(err)
}

#[pyfunction]
fn phi_n(betas: Vec<f64>, ts: Vec<u32>, n: usize) -> PyResult<f64> {
    Ok(selection::phi_n(&RateSpec::new(betas, ts).map_err(err)?, n))
}

/// Least squares; returns coefficients (intercept first when requested), SSE and the rank flag.
#[pyfunction]
#[pyo3(signature = (x, y, intercept = true))]
fn fit_ols<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    intercept: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = ols::fit_ols(&matrix(&x)?, &DVector::from_vec(y), intercept).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("coefficients", fit.coefficients.as_slice().to_vec())?;
    out.set_item("residual_sse", fit.residual_sse)?;
    out.set_item("rank_deficient", fit.rank_deficient)?;
    Ok(out)
}

#[pyfunction]
fn inflation_transform(cpi: Vec<f64>) -> PyResult<Vec<f64>> {
    inflation(&cpi).map_err(err)
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> depnet::Result<()>) -> PyResult<String> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run an experiment from TOML text; returns `(risk_csv, box_csv)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<(String, String)> {
    let spec = ExperimentConfig::from_toml(config)
        .and_then(ExperimentConfig::into_spec)
        .map_err(err)?;
    let table = py.detach(|| run_convergence(&spec)).map_err(err)?;
    let risks = csv_string(|b| table.write_csv(b))?;
    let boxes = csv_string(|b| summarize_box(&table).write_csv(b))?;
    Ok((risks, boxes))
}

/// Log-log slope, intercept and R² from a risk-table CSV.
#[pyfunction]
#[pyo3(signature = (risk_csv, method = "nn"))]
fn rate(risk_csv: &str, method: &str) -> PyResult<(f64, f64, f64)> {
    let table = RiskTable::read_csv(risk_csv.as_bytes()).map_err(err)?;
    let method: Method = method.parse().map_err(err)?;
    let est = estimate_rate(&table, method).map_err(err)?;
    Ok((est.slope, est.intercept, est.r_squared))
}

/// Rolling one-step forecasts from a panel CSV; returns `(forecast_csv, mse)`.
#[pyfunction]
#[pyo3(signature = (path, start = None, gamma = 0.0, backend = "ols", hidden_layers = 1, hidden_width = 100, n_init = 10, window = 453, train_len = 300, seed = 0, max_forecasts = None))]
#[allow(clippy::too_many_arguments)]
fn forecast(
    py: Python<'_>,
    path: PathBuf,
    start: Option<&str>,
    gamma: f64,
    backend: &str,
    hidden_layers: usize,
    hidden_width: usize,
    n_init: usize,
    window: usize,
    train_len: usize,
    seed: u64,
    max_forecasts: Option<usize>,
) -> PyResult<(String, f64)> {
    let table = ingest_csv(&path, &MacroSchema::default()).map_err(err)?;
    let backend = match backend {
        "ols" => Backend::Ols,
        "nn" => Backend::Nn {
            hidden_width,
            hidden_layers,
            train: TrainConfig {
                dropout_rate: 0.2,
                ..TrainConfig::default()
            },
            n_init,
        },
        other => return Err(PyValueError::new_err(format!("unknown backend `{other}`"))),
    };
    let spec = RollingSpec {
        window,
        train_len,
        val_len: window.saturating_sub(train_len),
        gamma_percent: gamma,
        backend,
        start: start.map(str::parse).transpose().map_err(err)?,
        max_forecasts,
        seed,
        ..RollingSpec::default()
    };
    let report = py.detach(|| rolling_forecast(&table, &spec)).map_err(err)?;
    Ok((csv_string(|b| report.write_csv(b))?, report.mse))
}

#[pymodule]
fn depnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(penalized_loss, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(aic_select_lag, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_lag, m)?)?;
    m.add_function(wrap_pyfunction!(sis_screen, m)?)?;
    m.add_function(wrap_pyfunction!(phi_n, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ols, m)?)?;
    m.add_function(wrap_pyfunction!(inflation_transform, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    Ok(())
}
