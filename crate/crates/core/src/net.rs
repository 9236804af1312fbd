//! Sparse feed-forward ReLU networks with shifted activations.
//!
//! A network of depth `L` has widths `p_0, ..., p_L` with `p_0` the input
//! dimension and `p_L = 1`. Layer `i` (1-based) holds a `p_i x p_{i-1}`
//! weight matrix `W_i` and a shift vector `v_i` of length `p_i`. Hidden
//! layers compute `a_i = max(W_i a_{i-1} - v_i, 0)`; the output layer is the
//! bare linear map `W_L a_{L-1}` and its shift slot is kept only so every
//! layer has the same storage layout.
//!
//! Batched evaluation works column-wise: a batch of `n` inputs is a `d x n`
//! matrix, so each column is one sample.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};

/// Layer widths plus the output bound `F` and an advisory sparsity target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    output_bound: f64,
    sparsity_target: usize,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, output_bound: f64, sparsity_target: usize) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least input and output widths, got {}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidParameter("all widths must be >= 1".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidParameter("output width must be 1".into()));
        }
        if !(output_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "output bound must be positive, got {output_bound}"
            )));
        }
        Ok(Self {
            widths,
            output_bound,
            sparsity_target,
        })
    }

    /// `input_dim -> hidden x hidden_layers -> 1` with `F = 1` and no sparsity target.
    pub fn mlp(input_dim: usize, hidden_width: usize, hidden_layers: usize) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden_layers + 2);
        widths.push(input_dim);
        widths.extend(std::iter::repeat_n(hidden_width, hidden_layers));
        widths.push(1);
        Self::new(widths, 1.0, 0)
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_bound(&self) -> f64 {
        self.output_bound
    }

    pub fn sparsity_target(&self) -> usize {
        self.sparsity_target
    }

    /// Total number of weight and shift entries.
    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }
}

/// Component-wise `max(x - v, 0)`.
pub fn shifted_relu(x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    dim_check(x.len() == v.len(), || {
        format!("input length {} vs shift length {}", x.len(), v.len())
    })?;
    Ok(x.iter().zip(v).map(|(a, b)| (a - b).max(0.0)).collect())
}

/// Truncate `y` into `[-bound, bound]`.
pub fn clamp_output(y: f64, bound: f64) -> f64 {
    y.clamp(-bound, bound)
}

/// Per-layer partial derivatives, shape-congruent with a [`Network`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<DMatrix<f64>>,
    pub shifts: Vec<DVector<f64>>,
}

impl Gradient {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            shifts: net.shifts.iter().map(|v| DVector::zeros(v.len())).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.shifts.iter().flat_map(|v| v.iter()))
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Cached forward pass over a batch, reused by backpropagation.
pub(crate) struct Trace {
    /// `inputs[i]` is the input to layer `i + 1` (so `inputs[0]` is the data).
    pub inputs: Vec<DMatrix<f64>>,
    /// Hidden-unit masks: 0 where the unit is inactive or dropped, else the
    /// dropout scale (1 without dropout).
    pub gates: Vec<DMatrix<f64>>,
    pub output: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    arch: Architecture,
    weights: Vec<DMatrix<f64>>,
    shifts: Vec<DVector<f64>>,
}

impl Network {
    /// All-zero parameters.
    pub fn zeros(arch: Architecture) -> Self {
        let (weights, shifts) = arch
            .widths
            .windows(2)
            .map(|w| (DMatrix::zeros(w[1], w[0]), DVector::zeros(w[1])))
            .unzip();
        Self {
            arch,
            weights,
            shifts,
        }
    }

    /// Glorot-uniform weights on `(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`; zero shifts.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut net = Self::zeros(arch);
        for w in &mut net.weights {
            let r = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
            // column-major fill order is part of the seeded determinism contract
            for x in w.iter_mut() {
                *x = rng.random_range(-r..r);
            }
        }
        net
    }

    /// Build from explicit parameters, validating every shape against `arch`.
    pub fn from_parts(
        arch: Architecture,
        weights: Vec<DMatrix<f64>>,
        shifts: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let depth = arch.depth();
        dim_check(weights.len() == depth && shifts.len() == depth, || {
            format!(
                "expected {depth} layers, got {} weight matrices and {} shift vectors",
                weights.len(),
                shifts.len()
            )
        })?;
        for (i, (w, v)) in weights.iter().zip(&shifts).enumerate() {
            let (rows, cols) = (arch.widths[i + 1], arch.widths[i]);
            dim_check(w.shape() == (rows, cols), || {
                format!(
                    "layer {}: weight shape {:?}, expected {:?}",
                    i + 1,
                    w.shape(),
                    (rows, cols)
                )
            })?;
            dim_check(v.len() == rows, || {
                format!("layer {}: shift length {}, expected {rows}", i + 1, v.len())
            })?;
        }
        Ok(Self {
            arch,
            weights,
            shifts,
        })
    }

    /// Two-layer network reproducing `x -> sum_i phi_i x_i` exactly.
    ///
    /// Input `i` feeds `ceil(|phi_i|)` units computing `(x_i)_+` and as many
    /// computing `(-x_i)_+`; the output weights `+-phi_i / ceil(|phi_i|)` sum
    /// them back to `phi_i x_i`. Every parameter stays in `[-1, 1]`.
    pub fn linear_replica(phi: &[f64]) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::InvalidSize("need at least one coefficient".into()));
        }
        if phi.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "coefficients must be finite".into(),
            ));
        }
        let copies: Vec<usize> = phi.iter().map(|p| p.abs().ceil() as usize).collect();
        let hidden = (2 * copies.iter().sum::<usize>()).max(1);
        let arch = Architecture::new(vec![phi.len(), hidden, 1], 1.0, 0)?;
        let mut net = Self::zeros(arch);
        let mut unit = 0;
        for (i, (&p, &m)) in phi.iter().zip(&copies).enumerate() {
            let out = p / m.max(1) as f64;
            for _ in 0..m {
                net.weights[0][(unit, i)] = 1.0;
                net.weights[1][(0, unit)] = out;
                net.weights[0][(unit + 1, i)] = -1.0;
                net.weights[1][(0, unit + 1)] = -out;
                unit += 2;
            }
        }
        Ok(net)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn shifts(&self) -> &[DVector<f64>] {
        &self.shifts
    }

    pub fn weights_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.weights
    }

    pub fn shifts_mut(&mut self) -> &mut [DVector<f64>] {
        &mut self.shifts
    }

    /// Evaluate one input vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        dim_check(x.len() == self.arch.input_dim(), || {
            format!(
                "input length {}, network expects {}",
                x.len(),
                self.arch.input_dim()
            )
        })?;
        let mut a = DVector::from_column_slice(x);
        let last = self.weights.len() - 1;
        for (i, (w, v)) in self.weights.iter().zip(&self.shifts).enumerate() {
            let mut z = w * &a;
            if i < last {
                z.zip_apply(v, |zi, vi| *zi = (*zi - vi).max(0.0));
            }
            a = z;
        }
        Ok(a[0])
    }

    /// Evaluate and truncate to `[-F, F]`.
    pub fn forward_clamped(&self, x: &[f64]) -> Result<f64> {
        Ok(clamp_output(self.forward(x)?, self.arch.output_bound))
    }

    /// Evaluate every row of `x` (an `n x d` matrix).
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        dim_check(x.ncols() == self.arch.input_dim(), || {
            format!(
                "design has {} columns, network expects {}",
                x.ncols(),
                self.arch.input_dim()
            )
        })?;
        Ok(self.trace(&x.transpose(), None).output)
    }

    /// Forward pass over column-samples `xt` (`d x n`), keeping what backprop needs.
    ///
    /// `dropout` holds one keep-mask per hidden layer, already scaled by `1 / (1 - rate)`.
    pub(crate) fn trace(&self, xt: &DMatrix<f64>, dropout: Option<&[DMatrix<f64>]>) -> Trace {
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut gates = Vec::with_capacity(last);
        let mut a = xt.clone();
        for (i, (w, v)) in self.weights.iter().zip(&self.shifts).enumerate() {
            let mut z = w * &a;
            inputs.push(a);
            if i == last {
                return Trace {
                    inputs,
                    gates,
                    output: DVector::from_iterator(z.ncols(), z.row(0).iter().copied()),
                };
            }
            let mut gate = DMatrix::zeros(z.nrows(), z.ncols());
            for c in 0..z.ncols() {
                for r in 0..z.nrows() {
                    let pre = z[(r, c)] - v[r];
                    if pre > 0.0 {
                        let keep = dropout.map_or(1.0, |m| m[i][(r, c)]);
                        gate[(r, c)] = keep;
                        z[(r, c)] = pre * keep;
                    } else {
                        z[(r, c)] = 0.0;
                    }
                }
            }
            gates.push(gate);
            a = z;
        }
        unreachable!("networks always have at least one layer")
    }

    /// Backpropagate `d(loss)/d(output)` (one entry per sample) through a trace.
    pub(crate) fn backward(&self, trace: &Trace, output_grad: &DVector<f64>) -> Gradient {
        let mut grad = Gradient::zeros_like(self);
        let mut delta = DMatrix::from_row_slice(1, output_grad.len(), output_grad.as_slice());
        for i in (0..self.weights.len()).rev() {
            grad.weights[i] = &delta * trace.inputs[i].transpose();
            if i == 0 {
                break;
            }
            let mut back = self.weights[i].tr_mul(&delta);
            back.component_mul_assign(&trace.gates[i - 1]);
            // d a / d v = -(d a / d z)
            grad.shifts[i - 1] = -back.column_sum();
            delta = back;
        }
        grad
    }

    /// Number of parameters with `|entry| > tol`.
    pub fn sparsity(&self, tol: f64) -> usize {
        self.params().filter(|x| x.abs() > tol).count()
    }

    /// Clip every weight and shift into `[-1, 1]`.
    pub fn project_params(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.weights {
            w.apply(|x| *x = x.clamp(-1.0, 1.0));
        }
        for v in &mut out.shifts {
            v.apply(|x| *x = x.clamp(-1.0, 1.0));
        }
        out
    }

    /// True when every parameter is in `[-1, 1]` and at most `s` exceed `tol`.
    pub fn in_class(&self, s: usize, tol: f64) -> bool {
        self.params().all(|x| x.abs() <= 1.0) && self.sparsity(tol) <= s
    }

    /// Sum of absolute weight entries (shifts excluded).
    pub fn weight_l1(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|x| x.abs()).sum::<f64>())
            .sum()
    }

    /// Every weight then every shift, layer by layer.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.shifts.iter().flat_map(|v| v.iter().copied()))
    }

    /// `self -= step * grad`.
    pub fn descend(&mut self, grad: &Gradient, step: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            w.zip_apply(g, |wi, gi| *wi -= step * gi);
        }
        for (v, g) in self.shifts.iter_mut().zip(&grad.shifts) {
            v.zip_apply(g, |vi, gi| *vi -= step * gi);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(f64::is_finite)
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.is_finite() {
            return Err(Error::InvalidParameter(
                "cannot serialize non-finite parameters".into(),
            ));
        }
        Ok(serde_json::to_string_pretty(&NetworkDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// On-disk layout: architecture header, then row-major weights and shifts.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    depth: usize,
    widths: Vec<usize>,
    output_bound: f64,
    sparsity_target: usize,
    weights: Vec<Vec<f64>>,
    shifts: Vec<Vec<f64>>,
}

impl From<&Network> for NetworkDoc {
    fn from(net: &Network) -> Self {
        Self {
            depth: net.arch.depth(),
            widths: net.arch.widths.clone(),
            output_bound: net.arch.output_bound,
            sparsity_target: net.arch.sparsity_target,
            weights: net
                .weights
                .iter()
                .map(|w| w.transpose().as_slice().to_vec())
                .collect(),
            shifts: net.shifts.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
    }
}

impl TryFrom<NetworkDoc> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let arch = Architecture::new(doc.widths, doc.output_bound, doc.sparsity_target)?;
        dim_check(doc.depth == arch.depth(), || {
            format!(
                "depth {} disagrees with {} widths",
                doc.depth,
                arch.widths.len()
            )
        })?;
        dim_check(doc.weights.len() == arch.depth(), || {
            format!(
                "expected {} weight matrices, got {}",
                arch.depth(),
                doc.weights.len()
            )
        })?;
        let weights = doc
            .weights
            .iter()
            .enumerate()
            .map(|(i, flat)| {
                let (rows, cols) = (arch.widths[i + 1], arch.widths[i]);
                dim_check(flat.len() == rows * cols, || {
                    format!(
                        "layer {}: {} weights, expected {}",
                        i + 1,
                        flat.len(),
                        rows * cols
                    )
                })?;
                Ok(DMatrix::from_row_slice(rows, cols, flat))
            })
            .collect::<Result<Vec<_>>>()?;
        let shifts = doc.shifts.into_iter().map(DVector::from_vec).collect();
        Network::from_parts(arch, weights, shifts)
    }
}
