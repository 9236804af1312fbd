use depnet::generators::Dataset;
use depnet::training::{empirical_risk, penalized_loss, split_indices, train, TrainConfig};
use depnet::{Architecture, Network};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_data(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
    let y = DVector::from_fn(n, |r, _| 0.8 * x[(r, 0)] - 0.5 * x[(r, 1)]);
    Dataset::new(x, y, None).unwrap()
}

fn fitted(data: &Dataset, hidden: usize, layers: usize, cfg: &TrainConfig) -> depnet::TrainReport {
    let arch = Architecture::mlp(data.dim(), hidden, layers).unwrap();
    let net = Network::init(arch, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    train(&net, data, &split_indices(data.len()).unwrap(), cfg).unwrap()
}

#[test]
fn zero_epochs_returns_initial_network() {
    let data = linear_data(40, 1);
    let arch = Architecture::mlp(2, 4, 1).unwrap();
    let net = Network::init(arch, &mut ChaCha8Rng::seed_from_u64(5));
    let cfg = TrainConfig {
        max_epochs: 0,
        ..TrainConfig::default()
    };
    let report = train(&net, &data, &split_indices(40).unwrap(), &cfg).unwrap();
    assert_eq!(report.network, net);
    assert!(report.train_loss_history.is_empty() && report.valid_mse_history.is_empty());
}

#[test]
fn fits_noiseless_linear_data() {
    let data = linear_data(200, 7);
    let cfg = TrainConfig {
        lambda: 0.0,
        seed: 3,
        ..TrainConfig::default()
    };
    let report = fitted(&data, 8, 1, &cfg);
    let splits = split_indices(200).unwrap();
    let train_rows = data.rows(splits.train);
    let pred = report.network.predict(&train_rows.x).unwrap();
    let mse = empirical_risk(pred.as_slice(), train_rows.y.as_slice()).unwrap();
    assert!(mse < 1e-2, "train MSE {mse}");
}

#[test]
fn same_seed_gives_identical_report() {
    let data = linear_data(120, 9);
    let cfg = TrainConfig {
        seed: 21,
        dropout_rate: 0.2,
        max_epochs: 300,
        ..TrainConfig::default()
    };
    let a = fitted(&data, 6, 2, &cfg);
    let b = fitted(&data, 6, 2, &cfg);
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert!(String::from_utf8(ca)
        .unwrap()
        .starts_with("epoch,train_loss,valid_mse\n"));
}

#[test]
fn best_epoch_is_validation_minimum() {
    let data = linear_data(100, 4);
    let report = fitted(
        &data,
        5,
        2,
        &TrainConfig {
            seed: 8,
            max_epochs: 800,
            ..TrainConfig::default()
        },
    );
    let h = &report.valid_mse_history;
    let min = h.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(h[report.best_epoch], min);
    assert_eq!(report.best_valid_mse(), Some(min));
}

#[test]
fn loss_nonincreasing_on_single_linear_unit() {
    let x = DMatrix::from_fn(40, 1, |r, _| (r as f64 / 10.0) - 2.0);
    let y = x.column(0) * 1.7;
    let data = Dataset::new(x, y, None).unwrap();
    let arch = Architecture::new(vec![1, 1], 1.0, 0).unwrap();
    let net = Network::from_parts(
        arch,
        vec![DMatrix::from_element(1, 1, -0.3)],
        vec![DVector::zeros(1)],
    )
    .unwrap();
    let cfg = TrainConfig {
        lambda: 0.0,
        learning_rate: 0.05,
        max_epochs: 200,
        patience: 200,
        ..TrainConfig::default()
    };
    let report = train(&net, &data, &split_indices(40).unwrap(), &cfg).unwrap();
    let h = &report.train_loss_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0]), "train loss increased");
    assert!(h.last().unwrap() < &1e-6);
}

proptest! {
    #[test]
    fn splits_partition(n in 4usize..=1000) {
        let s = split_indices(n).unwrap();
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.valid.start);
        prop_assert_eq!(s.valid.end, s.test.start);
        prop_assert_eq!(s.test.end, n);
        prop_assert!(!s.train.is_empty() && !s.valid.is_empty() && !s.test.is_empty());
    }

    #[test]
    fn penalized_loss_monotone_in_lambda(seed in any::<u64>(), l1 in 0.0f64..2.0, dl in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::init(Architecture::mlp(3, 4, 2).unwrap(), &mut rng);
        let x = DMatrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        prop_assert!(penalized_loss(&net, &x, &y, l1).unwrap() <= penalized_loss(&net, &x, &y, l1 + dl).unwrap());
    }

    #[test]
    fn empirical_risk_zero_iff_equal(v in prop::collection::vec(-10.0f64..10.0, 1..20), k in 0usize..20, bump in 1e-6f64..1.0) {
        prop_assert_eq!(empirical_risk(&v, &v).unwrap(), 0.0);
        let mut w = v.clone();
        let i = k % w.len();
        w[i] += bump;
        prop_assert!(empirical_risk(&v, &w).unwrap() > 0.0);
    }
}
