#![allow(dead_code)]

use depnet::training::{grad_loss, penalized_loss};
use depnet::{Architecture, Network};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Network with uniform weights in [-1, 1] and shifts in [-0.5, 0.5].
pub fn random_network(widths: Vec<usize>, rng: &mut impl Rng) -> Network {
    let arch = Architecture::new(widths.clone(), 1.0, 0).unwrap();
    let weights = widths
        .windows(2)
        .map(|w| DMatrix::from_fn(w[1], w[0], |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let shifts = widths[1..]
        .iter()
        .map(|&k| DVector::from_fn(k, |_, _| rng.random_range(-0.5..0.5)))
        .collect();
    Network::from_parts(arch, weights, shifts).unwrap()
}

/// Random widths for depth `depth` with every layer in `1..=max_width` and a scalar output.
pub fn random_widths(depth: usize, max_width: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut w: Vec<usize> = (0..depth)
        .map(|_| rng.random_range(1..=max_width))
        .collect();
    w.push(1);
    w
}

#[derive(Debug, Default)]
pub struct FdStats {
    pub checked: usize,
    pub worst: f64,
}

/// Compare analytic gradients with central differences at step `h` on every
/// parameter whose magnitude exceeds `min_abs`. Relative error uses
/// `max(|analytic|, |numeric|, 1e-6)` as denominator.
pub fn finite_difference_check(
    net: &Network,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    h: f64,
    min_abs: f64,
) -> FdStats {
    let grad = grad_loss(net, x, y, lambda).unwrap();
    let mut stats = FdStats::default();
    let mut probe = net.clone();
    let loss = |n: &Network| penalized_loss(n, x, y, lambda).unwrap();
    let mut record = |analytic: f64, plus: f64, minus: f64| {
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        stats.checked += 1;
        stats.worst = stats.worst.max(rel);
    };
    for layer in 0..net.weights().len() {
        for idx in 0..net.weights()[layer].len() {
            let w = net.weights()[layer][idx];
            if w.abs() <= min_abs {
                continue;
            }
            probe.weights_mut()[layer][idx] = w + h;
            let plus = loss(&probe);
            probe.weights_mut()[layer][idx] = w - h;
            let minus = loss(&probe);
            probe.weights_mut()[layer][idx] = w;
            record(grad.weights[layer][idx], plus, minus);
        }
        for idx in 0..net.shifts()[layer].len() {
            let v = net.shifts()[layer][idx];
            if v.abs() <= min_abs {
                continue;
            }
            probe.shifts_mut()[layer][idx] = v + h;
            let plus = loss(&probe);
            probe.shifts_mut()[layer][idx] = v - h;
            let minus = loss(&probe);
            probe.shifts_mut()[layer][idx] = v;
            record(grad.shifts[layer][idx], plus, minus);
        }
    }
    stats
}

/// Run the check on `count` random networks of depth 2..=4 and widths <= 8.
pub fn gradient_suite(count: usize, seed: u64) -> FdStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = FdStats::default();
    for _ in 0..count {
        let depth = rng.random_range(2..=4);
        let widths = random_widths(depth, 8, &mut rng);
        let net = random_network(widths.clone(), &mut rng);
        let n = 6;
        let x = DMatrix::from_fn(n, widths[0], |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let lambda = rng.random_range(0.0..0.2);
        let s = finite_difference_check(&net, &x, &y, lambda, 1e-5, 1e-3);
        total.checked += s.checked;
        total.worst = total.worst.max(s.worst);
    }
    total
}
