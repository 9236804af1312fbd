//! Simulators for the regression and autoregressive data models.
//!
//! Every generator starts from a zero state, runs `burn_in` discarded steps,
//! and is a pure function of its arguments and seed. Innovations are
//! standard normal throughout.

use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::seed::derive_seed;
use crate::training::fmt_f64;

pub const DEFAULT_BURN_IN: usize = 500;

/// Regression sample: design rows, responses, and optionally `f0(X_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub oracle: Option<DVector<f64>>,
    pub meta: Option<GeneratorSpec>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, oracle: Option<DVector<f64>>) -> Result<Self> {
        dim_check(x.nrows() == y.len(), || {
            format!("design has {} rows, response has {}", x.nrows(), y.len())
        })?;
        if let Some(o) = &oracle {
            dim_check(o.len() == y.len(), || {
                format!("oracle has {} entries, response has {}", o.len(), y.len())
            })?;
        }
        Ok(Self {
            x,
            y,
            oracle,
            meta: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Contiguous row subset.
    pub fn rows(&self, range: Range<usize>) -> Dataset {
        let m = range.len();
        Dataset {
            x: self.x.rows(range.start, m).into_owned(),
            y: self.y.rows(range.start, m).into_owned(),
            oracle: self
                .oracle
                .as_ref()
                .map(|o| o.rows(range.start, m).into_owned()),
            meta: self.meta.clone(),
        }
    }

    /// Rows in `range` as column-samples (`d x m`) plus their responses.
    pub(crate) fn columns_t(&self, range: Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let m = range.len();
        (
            self.x.rows(range.start, m).transpose(),
            self.y.rows(range.start, m).into_owned(),
        )
    }

    /// CSV with header `t,x_1..x_d,y[,oracle]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("x_{j}")));
        header.push("y".into());
        if self.oracle.is_some() {
            header.push("oracle".into());
        }
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.x.row(t).iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(self.y[t]));
            if let Some(o) = &self.oracle {
                rec.push(fmt_f64(o[t]));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("t") {
            return Err(Error::Schema("first column must be `t`".into()));
        }
        let has_oracle = header.last().map(String::as_str) == Some("oracle");
        let y_col = if has_oracle {
            header.len() - 2
        } else {
            header.len() - 1
        };
        if header.get(y_col).map(String::as_str) != Some("y") {
            return Err(Error::Schema("missing `y` column".into()));
        }
        let d = y_col - 1;
        for (j, name) in header[1..y_col].iter().enumerate() {
            if *name != format!("x_{}", j + 1) {
                return Err(Error::Schema(format!("unexpected column `{name}`")));
            }
        }
        let (mut xs, mut ys, mut os) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("missing field {j}"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })
            };
            for j in 1..=d {
                xs.push(parse(j)?);
            }
            ys.push(parse(y_col)?);
            if has_oracle {
                os.push(parse(y_col + 1)?);
            }
        }
        let n = ys.len();
        Dataset::new(
            DMatrix::from_row_slice(n, d, &xs),
            DVector::from_vec(ys),
            has_oracle.then(|| DVector::from_vec(os)),
        )
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn var1_transition(rho: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(4, 4);
    for i in 0..3 {
        a[(i, i + 1)] = rho;
    }
    a
}

/// Stationary covariance of `X_t = A X_{t-1} + e_t`, `e_t ~ N(0, I_4)`, with
/// `A` carrying `rho` on the superdiagonal. `A` is nilpotent of index 4, so
/// the covariance is the finite sum `sum_{k<4} A^k (A^k)^T`.
pub fn stationary_cov_var1(rho: f64) -> DMatrix<f64> {
    let a = var1_transition(rho);
    let mut power = DMatrix::identity(4, 4);
    let mut sigma = DMatrix::zeros(4, 4);
    for _ in 0..4 {
        sigma += &power * power.transpose();
        power = &a * power;
    }
    sigma
}

/// `n x 4` path of the superdiagonal VAR(1).
pub fn gen_var1(n: usize, rho: f64, burn_in: usize, seed: u64) -> Result<DMatrix<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|rho| must be < 1, got {rho}"
        )));
    }
    let mut rng = rng_for(seed);
    let mut state = [0.0f64; 4];
    let mut out = DMatrix::zeros(n, 4);
    for t in 0..burn_in + n {
        // row i depends on the previous state's entry i + 1 only
        let next = [
            rho * state[1] + normal(&mut rng),
            rho * state[2] + normal(&mut rng),
            rho * state[3] + normal(&mut rng),
            normal(&mut rng),
        ];
        state = next;
        if t >= burn_in {
            for (j, v) in state.iter().enumerate() {
                out[(t - burn_in, j)] = *v;
            }
        }
    }
    Ok(out)
}

/// `f0(x) = 2 * sum_i cos(x_i)`.
pub fn additive_cos(row: &[f64]) -> f64 {
    2.0 * row.iter().map(|x| x.cos()).sum::<f64>()
}

/// Attach `Y_t = 2 sum cos(X_{t,i}) + eta_t` to a 4-column design.
pub fn gen_additive_cos(x: &DMatrix<f64>, seed: u64) -> Result<Dataset> {
    dim_check(x.ncols() == 4, || {
        format!("additive cosine model needs 4 columns, got {}", x.ncols())
    })?;
    let mut rng = rng_for(seed);
    let oracle = DVector::from_iterator(
        x.nrows(),
        x.row_iter()
            .map(|r| additive_cos(&r.iter().copied().collect::<Vec<_>>())),
    );
    let y = oracle.map(|o| o + normal(&mut rng));
    Dataset::new(x.clone(), y, Some(oracle))
}

/// Rows drawn iid from `N(0, sigma)` via the symmetric eigen-factor
/// `Q diag(sqrt(lambda)) Q^T`, which tolerates singular covariances.
pub fn gen_iid_gaussian(n: usize, sigma: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    dim_check(sigma.is_square(), || {
        format!("covariance shape {:?} is not square", sigma.shape())
    })?;
    let asym = (sigma - sigma.transpose()).amax();
    let scale = sigma.amax().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::Decomposition(format!(
            "covariance is not symmetric (gap {asym:e})"
        )));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::Decomposition(format!(
            "covariance is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    let mut rng = rng_for(seed);
    let z = DMatrix::from_fn(d, n, |_, _| normal(&mut rng));
    Ok((factor * z).transpose())
}

/// Largest eigenvalue modulus of the AR companion matrix (0 for white noise).
pub fn companion_spectral_radius(coeffs: &[f64]) -> f64 {
    let p = coeffs.len();
    if p == 0 {
        return 0.0;
    }
    let mut c = DMatrix::zeros(p, p);
    for (j, a) in coeffs.iter().enumerate() {
        c[(0, j)] = *a;
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn simulate_recursion<F>(n: usize, order: usize, burn_in: usize, seed: u64, mut step: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rng = rng_for(seed);
    let mut path = vec![0.0; order + burn_in + n];
    for t in order..path.len() {
        path[t] = step(&path[..t]) + normal(&mut rng);
    }
    path.split_off(order + burn_in)
}

/// Conditional mean `sum_i coeffs[i] * history[len - 1 - i]`.
fn linear_mean(coeffs: &[f64], history: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(history.iter().rev())
        .map(|(a, x)| a * x)
        .sum()
}

/// Stationary AR(p) path with `N(0, 1)` innovations.
pub fn gen_linear_ar(n: usize, coeffs: &[f64], burn_in: usize, seed: u64) -> Result<Vec<f64>> {
    let radius = companion_spectral_radius(coeffs);
    if !(radius < 1.0) {
        return Err(Error::Unstable(radius));
    }
    Ok(simulate_recursion(n, coeffs.len(), burn_in, seed, |h| {
        linear_mean(coeffs, h)
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearKind {
    /// `X_t = 0.5 sqrt|X_{t-1}| + e_t`
    SqrtAbs,
    /// `X_t = 0.5 |X_{t-1}| + e_t`
    Abs,
}

impl NonlinearKind {
    /// The regression function `g(x_{t-1})`.
    pub fn mean(self, prev: f64) -> f64 {
        match self {
            NonlinearKind::SqrtAbs => 0.5 * prev.abs().sqrt(),
            NonlinearKind::Abs => 0.5 * prev.abs(),
        }
    }
}

pub fn gen_nonlinear_ar(n: usize, kind: NonlinearKind, burn_in: usize, seed: u64) -> Vec<f64> {
    simulate_recursion(n, 1, burn_in, seed, |h| kind.mean(h[h.len() - 1]))
}

/// Coefficients `phi_i = c (1 + i)^-(alpha + 2)`, `i = 1..=d_trunc`.
///
/// With `A = sum (1+i)^alpha |phi_i| / c` and `B = sum |phi_i| / c`, the scale
/// is `c = min(mass / A, 0.9 / B)`: the weighted sum hits `mass` unless that
/// would push `sum |phi_i|` past 0.9, in which case it is capped there.
pub fn ar_infinity_coeffs(alpha: f64, mass: f64, d_trunc: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mass must be >= 0, got {mass}"
        )));
    }
    if d_trunc == 0 {
        return Err(Error::InvalidParameter(
            "truncation lag must be >= 1".into(),
        ));
    }
    let shape: Vec<f64> = (1..=d_trunc)
        .map(|i| (1.0 + i as f64).powf(-(alpha + 2.0)))
        .collect();
    let weighted: f64 = shape
        .iter()
        .enumerate()
        .map(|(k, s)| (2.0 + k as f64).powf(alpha) * s)
        .sum();
    let plain: f64 = shape.iter().sum();
    let c = (mass / weighted).min(0.9 / plain);
    let phi: Vec<f64> = shape.iter().map(|s| c * s).collect();
    let abs_sum: f64 = phi.iter().map(|p| p.abs()).sum();
    if !(abs_sum < 1.0) {
        return Err(Error::Stationarity(format!(
            "sum |phi_i| = {abs_sum} is not below 1"
        )));
    }
    Ok(phi)
}

/// AR(infinity) path simulated through its `d_trunc`-lag truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct ArInfinityPath {
    pub series: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Empirical `max |X_t|`; stands in for the boundedness constant, which
    /// Gaussian innovations cannot satisfy.
    pub max_abs: f64,
}

pub fn gen_ar_infinity(
    n: usize,
    alpha: f64,
    mass: f64,
    d_trunc: usize,
    burn_in: usize,
    seed: u64,
) -> Result<ArInfinityPath> {
    let coeffs = ar_infinity_coeffs(alpha, mass, d_trunc)?;
    let series = simulate_recursion(n, d_trunc, burn_in, seed, |h| linear_mean(&coeffs, h));
    let max_abs = series.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(ArInfinityPath {
        series,
        coeffs,
        max_abs,
    })
}

/// Known conditional mean of an autoregressive series.
#[derive(Clone, Debug, PartialEq)]
pub enum ArTruth {
    Linear(Vec<f64>),
    Nonlinear(NonlinearKind),
}

impl ArTruth {
    /// Number of past values the conditional mean reads.
    pub fn order(&self) -> usize {
        match self {
            ArTruth::Linear(c) => c.len(),
            ArTruth::Nonlinear(_) => 1,
        }
    }

    /// `f0` evaluated on the values strictly before time `history.len()`.
    pub fn eval(&self, history: &[f64]) -> f64 {
        match self {
            ArTruth::Linear(c) => linear_mean(c, history),
            ArTruth::Nonlinear(k) => k.mean(history[history.len() - 1]),
        }
    }
}

/// Regress `X_t` on `(X_{t-1}, ..., X_{t-d})`. Output has `len - d` rows.
pub fn lag_embed(series: &[f64], d: usize) -> Result<Dataset> {
    embed(series, d, None)
}

/// Like [`lag_embed`], filling the oracle column from `truth`. Rows start
/// once both `d` lags and the truth's own lags are available, so the output
/// has `len - max(d, truth.order())` rows.
pub fn lag_embed_with_truth(series: &[f64], d: usize, truth: &ArTruth) -> Result<Dataset> {
    embed(series, d, Some(truth))
}

fn embed(series: &[f64], d: usize, truth: Option<&ArTruth>) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::InvalidParameter("lag order must be >= 1".into()));
    }
    let start = d.max(truth.map_or(0, ArTruth::order));
    if series.len() <= start {
        return Err(Error::InvalidSize(format!(
            "series of length {} is too short for {start} lags",
            series.len()
        )));
    }
    let rows = series.len() - start;
    let x = DMatrix::from_fn(rows, d, |r, k| series[start + r - 1 - k]);
    let y = DVector::from_column_slice(&series[start..]);
    let oracle = truth.map(|tr| DVector::from_fn(rows, |r, _| tr.eval(&series[..start + r])));
    Dataset::new(x, y, oracle)
}

/// A data-generating model and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Superdiagonal VAR(1) covariates with the additive cosine response.
    Var1Shift {
        rho: f64,
    },
    /// Independent `N(0, sigma)` covariates with the additive cosine response.
    IidGaussian {
        sigma: Vec<Vec<f64>>,
    },
    LinearAr {
        coeffs: Vec<f64>,
    },
    NonlinearArSqrt,
    NonlinearArAbs,
    ArInfinity {
        alpha: f64,
        mass: f64,
        d_trunc: usize,
    },
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::Var1Shift { .. } => "var1_shift",
            GeneratorKind::IidGaussian { .. } => "iid_gaussian",
            GeneratorKind::LinearAr { .. } => "linear_ar",
            GeneratorKind::NonlinearArSqrt => "nonlinear_ar_sqrt",
            GeneratorKind::NonlinearArAbs => "nonlinear_ar_abs",
            GeneratorKind::ArInfinity { .. } => "ar_infinity",
        }
    }

    /// True for models that produce a univariate series to be lag-embedded.
    pub fn is_series(&self) -> bool {
        !matches!(
            self,
            GeneratorKind::Var1Shift { .. } | GeneratorKind::IidGaussian { .. }
        )
    }

    /// Independent covariates matching the VAR(1) marginal law.
    pub fn iid_matching_var1(rho: f64) -> Self {
        let s = stationary_cov_var1(rho);
        GeneratorKind::IidGaussian {
            sigma: s.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorKind::Var1Shift { rho } if !(rho.abs() < 1.0) => Err(Error::InvalidParameter(
                format!("|rho| must be < 1, got {rho}"),
            )),
            GeneratorKind::IidGaussian { sigma } => {
                let d = sigma.len();
                if d != 4 || sigma.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension(
                        "iid_gaussian needs a 4 x 4 covariance".into(),
                    ));
                }
                Ok(())
            }
            GeneratorKind::LinearAr { coeffs } => {
                let r = companion_spectral_radius(coeffs);
                if r < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Unstable(r))
                }
            }
            GeneratorKind::ArInfinity {
                alpha,
                mass,
                d_trunc,
            } => ar_infinity_coeffs(*alpha, *mass, *d_trunc).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Lags read by the true conditional mean of a series model (0 otherwise).
    pub fn truth_order(&self) -> usize {
        match self {
            GeneratorKind::LinearAr { coeffs } => coeffs.len(),
            GeneratorKind::NonlinearArSqrt | GeneratorKind::NonlinearArAbs => 1,
            GeneratorKind::ArInfinity { d_trunc, .. } => *d_trunc,
            _ => 0,
        }
    }

    /// Simulate `len` points of a series model, returning the path and its truth.
    pub fn simulate_series(
        &self,
        len: usize,
        burn_in: usize,
        seed: u64,
    ) -> Result<(Vec<f64>, ArTruth)> {
        match self {
            GeneratorKind::LinearAr { coeffs } => Ok((
                gen_linear_ar(len, coeffs, burn_in, seed)?,
                ArTruth::Linear(coeffs.clone()),
            )),
            GeneratorKind::NonlinearArSqrt => Ok((
                gen_nonlinear_ar(len, NonlinearKind::SqrtAbs, burn_in, seed),
                ArTruth::Nonlinear(NonlinearKind::SqrtAbs),
            )),
            GeneratorKind::NonlinearArAbs => Ok((
                gen_nonlinear_ar(len, NonlinearKind::Abs, burn_in, seed),
                ArTruth::Nonlinear(NonlinearKind::Abs),
            )),
            GeneratorKind::ArInfinity {
                alpha,
                mass,
                d_trunc,
            } => {
                let path = gen_ar_infinity(len, *alpha, *mass, *d_trunc, burn_in, seed)?;
                Ok((path.series, ArTruth::Linear(path.coeffs)))
            }
            _ => Err(Error::InvalidParameter(format!(
                "{} is not a series model",
                self.name()
            ))),
        }
    }

    /// Covariates plus additive-cosine response for the regression models.
    pub fn simulate_regression(&self, n: usize, burn_in: usize, seed: u64) -> Result<Dataset> {
        let x = match self {
            GeneratorKind::Var1Shift { rho } => {
                gen_var1(n, *rho, burn_in, derive_seed(seed, &[0]))?
            }
            GeneratorKind::IidGaussian { sigma } => {
                let flat: Vec<f64> = sigma.iter().flatten().copied().collect();
                let d = sigma.len();
                gen_iid_gaussian(
                    n,
                    &DMatrix::from_row_slice(d, d, &flat),
                    derive_seed(seed, &[0]),
                )?
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{} is not a regression model",
                    self.name()
                )))
            }
        };
        gen_additive_cos(&x, derive_seed(seed, &[1]))
    }
}

/// A model, sample size, burn-in and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Exactly `n` regression rows. Series models are embedded at `lags`
    /// (defaulting to the true order) with the oracle column filled in.
    pub fn generate(&self, lags: Option<usize>) -> Result<Dataset> {
        self.kind.validate()?;
        let mut data = if self.kind.is_series() {
            let order = self.kind.truth_order();
            let d = lags.unwrap_or(order.max(1));
            let start = d.max(order);
            let (series, truth) =
                self.kind
                    .simulate_series(self.n + start, self.burn_in, self.seed)?;
            lag_embed_with_truth(&series, d, &truth)?
        } else {
            self.kind
                .simulate_regression(self.n, self.burn_in, self.seed)?
        };
        data.meta = Some(self.clone());
        Ok(data)
    }
}
