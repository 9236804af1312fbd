//! Penalized least-squares training with validation-based early stopping.

use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::generators::Dataset;
use crate::net::{Gradient, Network};

/// Contiguous train / validation / test index ranges covering `[0, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.test.end == 0
    }
}

/// `[0, n/2)`, `[n/2, 3n/4)`, `[3n/4, n)` with floor division.
pub fn split_indices(n: usize) -> Result<Splits> {
    if n < 4 {
        return Err(Error::InvalidSize(format!("need n >= 4 to split, got {n}")));
    }
    let half = n / 2;
    let three_q = 3 * n / 4;
    Ok(Splits {
        train: 0..half,
        valid: half..three_q,
        test: three_q..n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            learning_rate: 0.01,
            max_epochs: 5000,
            patience: 50,
            dropout_rate: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        check_rate(self.dropout_rate)
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )))
    }
}

/// Outcome of [`train`]. Histories are indexed by epoch, starting at 0.
///
/// `train_loss_history[e]` is the penalized training loss at the parameters
/// entering epoch `e` (the point where the gradient is taken);
/// `valid_mse_history[e]` is the unpenalized validation MSE after that
/// epoch's update. The returned network is the state after epoch `best_epoch`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub network: Network,
    pub epochs_run: usize,
    pub train_loss_history: Vec<f64>,
    pub valid_mse_history: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainReport {
    pub fn best_valid_mse(&self) -> Option<f64> {
        self.valid_mse_history.get(self.best_epoch).copied()
    }

    /// CSV with header `epoch,train_loss,valid_mse`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "valid_mse"])?;
        for (e, (tl, vm)) in self
            .train_loss_history
            .iter()
            .zip(&self.valid_mse_history)
            .enumerate()
        {
            w.write_record([e.to_string(), fmt_f64(*tl), fmt_f64(*vm)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any finite double.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidSize("no observations".into()));
    }
    dim_check(x.nrows() == y.len(), || {
        format!("design has {} rows but response has {}", x.nrows(), y.len())
    })
}

fn mse(pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (pred - y).norm_squared() / y.len() as f64
}

/// Mean squared residual plus `lambda` times the L1 norm of all weight matrices.
pub fn penalized_loss(
    net: &Network,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<f64> {
    check_data(x, y)?;
    let pred = net.predict(x)?;
    Ok(mse(&pred, y) + lambda * net.weight_l1())
}

/// Gradient of [`penalized_loss`]. The L1 subgradient is `sign(w)` with 0 at 0;
/// shifts carry no penalty.
pub fn grad_loss(
    net: &Network,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
) -> Result<Gradient> {
    check_data(x, y)?;
    dim_check(x.ncols() == net.arch().input_dim(), || {
        format!(
            "design has {} columns, network expects {}",
            x.ncols(),
            net.arch().input_dim()
        )
    })?;
    let (_, grad) = loss_and_grad(net, &x.transpose(), y, lambda, None);
    Ok(grad)
}

/// Penalized loss and its gradient over column-samples `xt`.
fn loss_and_grad(
    net: &Network,
    xt: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    dropout: Option<&[DMatrix<f64>]>,
) -> (f64, Gradient) {
    let trace = net.trace(xt, dropout);
    let resid = &trace.output - y;
    let n = y.len() as f64;
    let loss = resid.norm_squared() / n + lambda * net.weight_l1();
    let mut grad = net.backward(&trace, &(resid * (2.0 / n)));
    if lambda > 0.0 {
        for (g, w) in grad.weights.iter_mut().zip(net.weights()) {
            g.zip_apply(w, |gi, wi| {
                if wi != 0.0 {
                    *gi += lambda * wi.signum();
                }
            });
        }
    }
    (loss, grad)
}

/// Inverted dropout: zero each entry with probability `rate`, scale survivors by `1 / (1 - rate)`.
pub fn apply_dropout<R: Rng + ?Sized>(
    activations: &[f64],
    rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(activations.to_vec());
    }
    let scale = 1.0 / (1.0 - rate);
    Ok(activations
        .iter()
        .map(|a| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                a * scale
            }
        })
        .collect())
}

fn dropout_masks<R: Rng + ?Sized>(
    net: &Network,
    n: usize,
    rate: f64,
    rng: &mut R,
) -> Vec<DMatrix<f64>> {
    let scale = 1.0 / (1.0 - rate);
    let widths = net.arch().widths();
    widths[1..widths.len() - 1]
        .iter()
        .map(|&p| {
            DMatrix::from_fn(p, n, |_, _| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    scale
                }
            })
        })
        .collect()
}

/// Full-batch gradient descent on the training range, keeping the
/// parameters with the lowest validation MSE and stopping after `patience`
/// epochs without improvement.
pub fn train(
    net: &Network,
    data: &Dataset,
    splits: &Splits,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let n = data.len();
    if splits.len() != n {
        return Err(Error::InvalidSize(format!(
            "splits cover {} rows but dataset has {n}",
            splits.len()
        )));
    }
    if splits.train.is_empty() || splits.valid.is_empty() {
        return Err(Error::InvalidSize(
            "train and validation ranges must be nonempty".into(),
        ));
    }
    dim_check(data.x.ncols() == net.arch().input_dim(), || {
        format!(
            "dataset has {} columns, network expects {}",
            data.x.ncols(),
            net.arch().input_dim()
        )
    })?;

    let (xt_train, y_train) = data.columns_t(splits.train.clone());
    let (xt_valid, y_valid) = data.columns_t(splits.valid.clone());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = net.clone();
    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut best_mse = f64::INFINITY;
    let mut train_loss_history = Vec::new();
    let mut valid_mse_history = Vec::new();

    for epoch in 0..cfg.max_epochs {
        let masks = (cfg.dropout_rate > 0.0)
            .then(|| dropout_masks(&current, y_train.len(), cfg.dropout_rate, &mut rng));
        let (loss, grad) =
            loss_and_grad(&current, &xt_train, &y_train, cfg.lambda, masks.as_deref());
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        current.descend(&grad, cfg.learning_rate);

        let valid = mse(&current.trace(&xt_valid, None).output, &y_valid);
        if !valid.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        train_loss_history.push(loss);
        valid_mse_history.push(valid);

        if valid < best_mse {
            best_mse = valid;
            best_epoch = epoch;
            best.clone_from(&current);
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    Ok(TrainReport {
        network: best,
        epochs_run: train_loss_history.len(),
        train_loss_history,
        valid_mse_history,
        best_epoch,
    })
}

/// Mean squared distance between predictions and the regression function.
pub fn empirical_risk(predictions: &[f64], oracle: &[f64]) -> Result<f64> {
    dim_check(predictions.len() == oracle.len(), || {
        format!(
            "{} predictions vs {} oracle values",
            predictions.len(),
            oracle.len()
        )
    })?;
    if oracle.is_empty() {
        return Err(Error::InvalidSize(
            "empirical risk needs at least one point".into(),
        ));
    }
    let sse: f64 = predictions
        .iter()
        .zip(oracle)
        .map(|(p, o)| (o - p).powi(2))
        .sum();
    Ok(sse / oracle.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Architecture;
    use rand::RngCore;

    /// Replays a fixed list of `u64` draws.
    struct Scripted(Vec<u64>, usize);

    impl RngCore for Scripted {
        fn next_u32(&mut self) -> u32 {
            (self.next_u64() >> 32) as u32
        }
        fn next_u64(&mut self) -> u64 {
            let v = self.0[self.1 % self.0.len()];
            self.1 += 1;
            v
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            for b in dst {
                *b = self.next_u32() as u8;
            }
        }
    }

    fn single_weight(w: f64) -> Network {
        let arch = Architecture::new(vec![1, 1], 1.0, 0).unwrap();
        Network::from_parts(
            arch,
            vec![DMatrix::from_element(1, 1, w)],
            vec![DVector::zeros(1)],
        )
        .unwrap()
    }

    #[test]
    fn split_examples() {
        let s = split_indices(100).unwrap();
        assert_eq!((s.train, s.valid, s.test), (0..50, 50..75, 75..100));
        let s = split_indices(8).unwrap();
        assert_eq!((s.train, s.valid, s.test), (0..4, 4..6, 6..8));
        let s = split_indices(4).unwrap();
        assert_eq!((s.train, s.valid, s.test), (0..2, 2..3, 3..4));
        assert!(matches!(split_indices(3), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn penalized_loss_examples() {
        let net = single_weight(2.0);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.5]);
        let y = DVector::from_vec(vec![2.0, -2.0, 1.0]);
        assert_eq!(penalized_loss(&net, &x, &y, 0.0).unwrap(), 0.0);
        assert_eq!(penalized_loss(&net, &x, &y, 0.5).unwrap(), 1.0);

        let zero = Network::zeros(Architecture::mlp(2, 3, 1).unwrap());
        let x = DMatrix::from_element(5, 2, 0.7);
        let ones = DVector::from_element(5, 1.0);
        assert_eq!(penalized_loss(&zero, &x, &ones, 0.1).unwrap(), 1.0);

        let empty = DMatrix::zeros(0, 2);
        assert!(matches!(
            penalized_loss(&zero, &empty, &DVector::zeros(0), 0.1),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn grad_single_linear_unit() {
        let net = single_weight(1.0);
        let x = DMatrix::from_element(1, 1, 2.0);
        let y = DVector::from_element(1, 0.0);
        let g = grad_loss(&net, &x, &y, 0.0).unwrap();
        assert_eq!(g.weights[0][(0, 0)], 8.0);
    }

    #[test]
    fn grad_zero_at_perfect_fit() {
        let net = single_weight(-1.5);
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![-1.5, -3.0]);
        let g = grad_loss(&net, &x, &y, 0.0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn l1_subgradient_is_zero_at_zero_weight() {
        let net = single_weight(0.0);
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 0.0);
        let g = grad_loss(&net, &x, &y, 0.3).unwrap();
        assert_eq!(g.weights[0][(0, 0)], 0.0);
        let g = grad_loss(
            &single_weight(-0.2),
            &x,
            &DVector::from_element(1, -0.2),
            0.3,
        )
        .unwrap();
        assert_eq!(g.weights[0][(0, 0)], -0.3);
    }

    #[test]
    fn dropout_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            apply_dropout(&[1.0, -2.0, 3.0], 0.0, &mut rng).unwrap(),
            vec![1.0, -2.0, 3.0]
        );
        // first draw ~1 keeps, second draw 0 drops
        let mut scripted = Scripted(vec![u64::MAX, 0], 0);
        assert_eq!(
            apply_dropout(&[1.0, 1.0], 0.5, &mut scripted).unwrap(),
            vec![2.0, 0.0]
        );
        assert!(apply_dropout(&[1.0], 1.0, &mut rng).is_err());
        assert!(apply_dropout(&[1.0], -0.1, &mut rng).is_err());
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ones = vec![1.0; 4];
        let draws = 100_000;
        let mut sum = vec![0.0; 4];
        for _ in 0..draws {
            for (s, v) in sum
                .iter_mut()
                .zip(apply_dropout(&ones, 0.3, &mut rng).unwrap())
            {
                *s += v;
            }
        }
        for s in sum {
            assert!(
                (s / draws as f64 - 1.0).abs() < 0.01,
                "mean {}",
                s / draws as f64
            );
        }
    }

    #[test]
    fn empirical_risk_examples() {
        assert_eq!(
            empirical_risk(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(
            empirical_risk(&[3.0, 0.0, -1.0], &[1.0, -2.0, -3.0]).unwrap(),
            4.0
        );
        assert_eq!(empirical_risk(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 2.5);
        assert!(matches!(
            empirical_risk(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension(_))
        ));
        assert!(empirical_risk(&[], &[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            dropout_rate: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
