use ndarray::{Array1, Array2};
use probelens::analysis::stats::binomial_interval;
use probelens::probe::{evaluate, loss, loss_gradient, train_probe, ProbeModel, TrainConfig};
use probelens::rng::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_instance(seed: u64) -> (ProbeModel<f64>, Array2<f64>, Vec<usize>, f64) {
    let mut r = rng_from_seed(seed);
    let c = r.random_range(2..=11);
    let d = r.random_range(1..=32);
    let n = r.random_range(c..=40);
    let mut m = ProbeModel::<f64>::zeros(c, d);
    m.weights = Array2::from_shape_fn((c, d), |_| 0.5 * r.sample::<f64, _>(StandardNormal));
    m.bias = Array1::from_shape_fn(c, |_| r.sample(StandardNormal));
    let x = Array2::from_shape_fn((n, d), |_| r.sample(StandardNormal));
    let y = (0..n).map(|_| r.random_range(0..c)).collect();
    let l2 = if seed.is_multiple_of(2) { 0.0 } else { 0.05 };
    (m, x, y, l2)
}

/// Central differences of `loss` over every weight and bias entry.
fn numeric_gradient(m: &ProbeModel<f64>, x: &Array2<f64>, y: &[usize], l2: f64) -> Vec<f64> {
    let h = 1e-4;
    let f = |m: &ProbeModel<f64>| loss(m, x.view(), y, l2).unwrap();
    let mut out = Vec::new();
    for i in 0..m.weights.len() {
        let mut plus = m.clone();
        let mut minus = m.clone();
        plus.weights.as_slice_mut().unwrap()[i] += h;
        minus.weights.as_slice_mut().unwrap()[i] -= h;
        out.push((f(&plus) - f(&minus)) / (2.0 * h));
    }
    for i in 0..m.bias.len() {
        let mut plus = m.clone();
        let mut minus = m.clone();
        plus.bias[i] += h;
        minus.bias[i] -= h;
        out.push((f(&plus) - f(&minus)) / (2.0 * h));
    }
    out
}

#[test]
fn gradient_matches_central_differences_on_twenty_instances() {
    for seed in 0..20 {
        let (m, x, y, l2) = random_instance(seed);
        let (dw, db) = loss_gradient(&m, x.view(), &y, l2).unwrap();
        let analytic: Vec<f64> = dw.iter().chain(db.iter()).copied().collect();
        let numeric = numeric_gradient(&m, &x, &y, l2);
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        assert!(diff / scale < 1e-5, "seed {seed}: relative error {}", diff / scale);
    }
}

#[test]
fn gradient_vanishes_at_regularized_minimum() {
    let mut r = rng_from_seed(3);
    let n = 40;
    let x = Array2::from_shape_fn((n, 2), |(i, j)| {
        let centre = if i % 2 == 0 { 1.5 } else { -1.5 };
        (if j == 0 { centre } else { 0.0 }) + 0.3 * r.sample::<f64, _>(StandardNormal)
    });
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let cfg = TrainConfig {
        learning_rate: 0.5,
        epochs: 5000,
        batch_size: n,
        l2_penalty: 0.1,
        standardize: false,
        ..TrainConfig::default()
    };
    let m = train_probe(x.view(), &y, 2, &cfg).unwrap();
    let (dw, db) = loss_gradient(&m, x.view(), &y, 0.1).unwrap();
    let norm = dw.iter().chain(db.iter()).map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-6, "gradient norm {norm}");
}

#[test]
fn shuffled_labels_stay_at_chance() {
    let mut r = rng_from_seed(17);
    let (n_train, n_test, d, c) = (1100, 1100, 16, 11);
    let x = Array2::from_shape_fn((n_train + n_test, d), |_| r.sample::<f64, _>(StandardNormal));
    let y: Vec<usize> = (0..n_train + n_test).map(|_| r.random_range(0..c)).collect();
    let (xtr, xte) = x.view().split_at(ndarray::Axis(0), n_train);
    let m = train_probe(xtr, &y[..n_train], c, &TrainConfig::default()).unwrap();
    let acc = evaluate(&m, xte, &y[n_train..]).unwrap().accuracy;
    let (lo, hi) = binomial_interval(n_test as u64, 1.0 / c as f64, 0.99);
    assert!(acc >= lo && acc <= hi, "accuracy {acc} outside [{lo}, {hi}]");
}
