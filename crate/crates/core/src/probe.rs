//! Linear position probes: multinomial logistic regression per layer.
//!
//! The training objective is the mean cross-entropy of `softmax(W x + b)`
//! against one-hot gold classes, plus `(l2/2)·‖W‖²`. Optimization is plain
//! mini-batch gradient descent from zero weights with a seeded per-epoch
//! reshuffle, so a given `(data, config)` always produces the same model.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, stream};
use crate::tensor_store::{self, ArchiveError, EmbeddingArchive};
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("training data covers a single class; a probe needs at least two")]
    SingleClass,
    #[error("need at least {n_classes} samples, got {n_samples}")]
    TooFewSamples { n_samples: usize, n_classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_penalty: f64,
    pub standardize: bool,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 256,
            l2_penalty: 1e-4,
            standardize: true,
            seed: 0,
            repeats: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let bad = |m: &str| Err(ProbeError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad("l2_penalty must be >= 0");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        Ok(())
    }
}

/// Per-feature affine map fitted on training data: `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T: Scalar> {
    pub mean: Array1<T>,
    pub scale: Array1<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Zero-variance features get scale 1.
    pub fn fit(x: ArrayView2<T>) -> Self {
        let n = T::of_usize(x.nrows());
        let mean = x.sum_axis(Axis(0)) / n;
        let mut var = Array1::<T>::zeros(x.ncols());
        for row in x.rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = xi - m;
                *v = *v + d * d;
            }
        }
        let scale = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s > T::zero() {
                s
            } else {
                T::one()
            }
        });
        Self { mean, scale }
    }

    pub fn apply(&self, x: ArrayView2<T>) -> Array2<T> {
        (&x - &self.mean) / &self.scale
    }
}

/// One trained probe: `C × d` weights and `C` biases for a single layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel<T: Scalar> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub layer: u32,
    pub seed: u64,
    /// Applied to raw inputs before the linear map.
    pub standardizer: Option<Standardizer<T>>,
}

impl<T: Scalar> ProbeModel<T> {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, dim)),
            bias: Array1::zeros(n_classes),
            layer: 0,
            seed: 0,
            standardizer: None,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    fn features(&self, x: ArrayView2<T>) -> Array2<T> {
        match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.to_owned(),
        }
    }

    /// Class probabilities for raw inputs, one row per sample.
    pub fn predict_proba(&self, x: ArrayView2<T>) -> Result<Array2<T>, ProbeError> {
        self.check_dim(x.ncols())?;
        Ok(probabilities(&self.weights, &self.bias, self.features(x).view()))
    }

    /// Argmax class per sample; ties go to the smaller index.
    pub fn predict(&self, x: ArrayView2<T>) -> Result<Vec<usize>, ProbeError> {
        self.check_dim(x.ncols())?;
        let logits = self.features(x).dot(&self.weights.t()) + &self.bias;
        Ok(logits.rows().into_iter().map(argmax).collect())
    }

    fn check_dim(&self, d: usize) -> Result<(), ProbeError> {
        if d != self.dim() {
            return Err(ProbeError::Dimension(format!(
                "input has {d} features, model expects {}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// First index of the maximum.
pub fn argmax<T: Scalar>(row: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place<T: Scalar>(z: &mut [T]) {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in z.iter_mut() {
        *v = *v / sum;
    }
}

fn probabilities<T: Scalar>(w: &Array2<T>, b: &Array1<T>, x: ArrayView2<T>) -> Array2<T> {
    // The product may come back column-major; rows must be contiguous.
    let mut p = (x.dot(&w.t()) + b).as_standard_layout().into_owned();
    for mut row in p.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("standard layout"));
    }
    p
}

fn check_inputs<T: Scalar>(
    model: &ProbeModel<T>,
    x: ArrayView2<T>,
    y: &[usize],
) -> Result<(), ProbeError> {
    model.check_dim(x.ncols())?;
    if x.nrows() != y.len() {
        return Err(ProbeError::Dimension(format!(
            "{} samples but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(ProbeError::Dimension("no samples".into()));
    }
    let c = model.n_classes();
    if let Some(&label) = y.iter().find(|&&l| l >= c) {
        return Err(ProbeError::LabelOutOfRange { label, n_classes: c });
    }
    Ok(())
}

/// Mean cross-entropy of raw inputs `x` against labels `y`, plus
/// `(l2_penalty/2)·‖W‖²`.
pub fn loss<T: Scalar>(
    model: &ProbeModel<T>,
    x: ArrayView2<T>,
    y: &[usize],
    l2_penalty: T,
) -> Result<T, ProbeError> {
    check_inputs(model, x, y)?;
    let f = model.features(x);
    let logits = f.dot(&model.weights.t()) + &model.bias;
    let mut total = T::zero();
    for (row, &label) in logits.rows().into_iter().zip(y) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total = total + (lse - row[label]);
    }
    let reg = model.weights.iter().map(|&w| w * w).sum::<T>();
    Ok(total / T::of_usize(y.len()) + l2_penalty * reg / T::lit(2.0))
}

/// Gradient of [`loss`] with respect to `(W, b)`:
/// `dW = (P − Y)ᵀ X / N + l2·W`, `db = colsum(P − Y) / N`.
pub fn loss_gradient<T: Scalar>(
    model: &ProbeModel<T>,
    x: ArrayView2<T>,
    y: &[usize],
    l2_penalty: T,
) -> Result<(Array2<T>, Array1<T>), ProbeError> {
    check_inputs(model, x, y)?;
    let f = model.features(x);
    Ok(gradient_on_features(
        &model.weights,
        &model.bias,
        f.view(),
        y,
        l2_penalty,
    ))
}

fn gradient_on_features<T: Scalar>(
    w: &Array2<T>,
    b: &Array1<T>,
    f: ArrayView2<T>,
    y: &[usize],
    l2: T,
) -> (Array2<T>, Array1<T>) {
    let mut g = probabilities(w, b, f);
    for (mut row, &label) in g.rows_mut().into_iter().zip(y) {
        row[label] = row[label] - T::one();
    }
    let n = T::of_usize(y.len());
    let mut dw = g.t().dot(&f) / n;
    if l2 > T::zero() {
        dw.scaled_add(l2, w);
    }
    let db = g.sum_axis(Axis(0)) / n;
    (dw, db)
}

fn check_training_labels(y: &[usize], n_classes: usize) -> Result<(), ProbeError> {
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ProbeError::LabelOutOfRange { label, n_classes });
    }
    if y.len() < n_classes {
        return Err(ProbeError::TooFewSamples {
            n_samples: y.len(),
            n_classes,
        });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(ProbeError::SingleClass);
    }
    Ok(())
}

/// Trains a probe on raw features. Per-epoch loss values are returned via
/// [`train_probe_traced`] when needed.
pub fn train_probe<T: Scalar>(
    x: ArrayView2<T>,
    y: &[usize],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<ProbeModel<T>, ProbeError> {
    train_probe_traced(x, y, n_classes, config).map(|(m, _)| m)
}

/// [`train_probe`] that also reports the full-data training loss before the
/// first epoch and after each epoch.
pub fn train_probe_traced<T: Scalar>(
    x: ArrayView2<T>,
    y: &[usize],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<(ProbeModel<T>, Vec<T>), ProbeError> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(ProbeError::Dimension(format!(
            "{} samples but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    check_training_labels(y, n_classes)?;

    let mut model = ProbeModel::<T>::zeros(n_classes, x.ncols());
    model.seed = config.seed;
    let features = if config.standardize {
        let s = Standardizer::fit(x);
        let f = s.apply(x);
        model.standardizer = Some(s);
        f
    } else {
        x.to_owned()
    };

    let lr = T::lit(config.learning_rate);
    let l2 = T::lit(config.l2_penalty);
    let n = y.len();
    let batch = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::rng_from_seed(config.seed);
    let full_loss = |m: &ProbeModel<T>| {
        let plain = ProbeModel {
            standardizer: None,
            ..m.clone()
        };
        loss(&plain, features.view(), y, l2)
    };
    let mut trace = Vec::with_capacity(config.epochs + 1);
    trace.push(full_loss(&model)?);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = features.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (dw, db) = gradient_on_features(&model.weights, &model.bias, xb.view(), &yb, l2);
            model.weights.scaled_add(-lr, &dw);
            model.bias.scaled_add(-lr, &db);
        }
        trace.push(full_loss(&model)?);
    }
    if !model.is_finite() {
        return Err(ProbeError::InvalidConfig(
            "training diverged (non-finite weights); lower the learning rate".into(),
        ));
    }
    Ok((model, trace))
}

/// Accuracy of one trained probe on a labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Fraction correct within each class; 0 for classes absent from the set.
    pub per_class_accuracy: Vec<f64>,
    pub class_counts: Vec<usize>,
}

pub fn evaluate<T: Scalar>(
    model: &ProbeModel<T>,
    x: ArrayView2<T>,
    y: &[usize],
) -> Result<Evaluation, ProbeError> {
    check_inputs(model, x, y)?;
    let pred = model.predict(x)?;
    let c = model.n_classes();
    let mut correct = vec![0usize; c];
    let mut counts = vec![0usize; c];
    for (&p, &t) in pred.iter().zip(y) {
        counts[t] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    let total: usize = correct.iter().sum();
    Ok(Evaluation {
        accuracy: total as f64 / y.len() as f64,
        per_class_accuracy: correct
            .iter()
            .zip(&counts)
            .map(|(&k, &n)| if n == 0 { 0.0 } else { k as f64 / n as f64 })
            .collect(),
        class_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub layer: u32,
    pub mean_accuracy: f64,
    /// Population standard deviation over repeats.
    pub std_accuracy: f64,
    /// Per-class accuracy averaged over repeats.
    pub per_class_accuracy: Vec<f64>,
    pub repeats: usize,
    pub run_accuracies: Vec<f64>,
}

/// Mean and population standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains and evaluates `config.repeats` probes with seeds `seed, seed+1, …`.
pub fn repeat_train<T: Scalar>(
    x_train: ArrayView2<T>,
    y_train: &[usize],
    x_test: ArrayView2<T>,
    y_test: &[usize],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<ProbeMetrics, ProbeError> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats {
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let model = train_probe(x_train, y_train, n_classes, &cfg)?;
        runs.push(evaluate(&model, x_test, y_test)?);
    }
    let accs: Vec<f64> = runs.iter().map(|e| e.accuracy).collect();
    let (mean, std) = mean_and_std(&accs);
    let per_class = (0..n_classes)
        .map(|c| runs.iter().map(|e| e.per_class_accuracy[c]).sum::<f64>() / runs.len() as f64)
        .collect();
    Ok(ProbeMetrics {
        layer: 0,
        mean_accuracy: mean,
        std_accuracy: std,
        per_class_accuracy: per_class,
        repeats: config.repeats,
        run_accuracies: accs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSweepReport {
    pub metrics: Vec<ProbeMetrics>,
    pub peak_layer: u32,
    pub peak_accuracy: f64,
    /// Gold positions matching the per-class columns.
    #[serde(default)]
    pub positions: Vec<u32>,
}

impl LayerSweepReport {
    /// Peak is the smallest layer attaining the maximum mean accuracy.
    pub fn from_metrics(metrics: Vec<ProbeMetrics>, positions: Vec<u32>) -> Self {
        let mut peak = 0;
        for (i, m) in metrics.iter().enumerate() {
            if m.mean_accuracy > metrics[peak].mean_accuracy {
                peak = i;
            }
        }
        let (peak_layer, peak_accuracy) = metrics
            .get(peak)
            .map(|m| (m.layer, m.mean_accuracy))
            .unwrap_or((0, 0.0));
        Self {
            metrics,
            peak_layer,
            peak_accuracy,
            positions,
        }
    }

    /// CSV with columns `layer, mean_acc, std_acc, acc_pos<k>...`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,mean_acc,std_acc");
        let n_classes = self.metrics.first().map_or(0, |m| m.per_class_accuracy.len());
        for c in 0..n_classes {
            match self.positions.get(c) {
                Some(p) => s.push_str(&format!(",acc_pos{p}")),
                None => s.push_str(&format!(",acc_class{c}")),
            }
        }
        s.push('\n');
        for m in &self.metrics {
            s.push_str(&format!("{},{},{}", m.layer, m.mean_accuracy, m.std_accuracy));
            for a in &m.per_class_accuracy {
                s.push_str(&format!(",{a}"));
            }
            s.push('\n');
        }
        s
    }

    /// For each class, the best per-class accuracy over layers and the
    /// smallest layer reaching it.
    pub fn per_class_peaks(&self) -> Vec<(u32, f64)> {
        let n_classes = self.metrics.first().map_or(0, |m| m.per_class_accuracy.len());
        (0..n_classes)
            .map(|c| {
                let mut best = (0u32, f64::NEG_INFINITY);
                for m in &self.metrics {
                    if m.per_class_accuracy[c] > best.1 {
                        best = (m.layer, m.per_class_accuracy[c]);
                    }
                }
                best
            })
            .collect()
    }
}

/// Runs [`repeat_train`] at every layer. Layer `l` uses base seed
/// `sub_seed(config.seed, PROBE_LAYER, l)`, so results do not depend on
/// how layers are scheduled across threads.
pub fn layer_sweep<T: Scalar>(
    train: &EmbeddingArchive,
    test: &EmbeddingArchive,
    config: &TrainConfig,
) -> Result<LayerSweepReport, ProbeError> {
    config.validate()?;
    tensor_store::check_compatible(train, test)?;
    let n_classes = train.n_classes();
    let metrics = (0..train.n_layers())
        .into_par_iter()
        .map(|layer| -> Result<ProbeMetrics, ProbeError> {
            let (xtr, ytr) = tensor_store::slice_layer_as::<T>(train, layer)?;
            let (xte, yte) = tensor_store::slice_layer_as::<T>(test, layer)?;
            let cfg = TrainConfig {
                seed: rng::sub_seed(config.seed, stream::PROBE_LAYER, layer as u64),
                ..config.clone()
            };
            let mut m = repeat_train(xtr.view(), &ytr, xte.view(), &yte, n_classes, &cfg)?;
            m.layer = layer as u32;
            Ok(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LayerSweepReport::from_metrics(
        metrics,
        train.manifest.schedule.positions.clone(),
    ))
}
