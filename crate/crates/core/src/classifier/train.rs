use serde::{Deserialize, Serialize};

use super::model::{
    sigmoid, softmax, Architecture, Class, ClassifierModel, Normalization, OutputHead,
};
use crate::error::{Error, Result};
use crate::numeric::linalg::gemm;
use crate::numeric::{AdamState, Rng};
use crate::scenario::{Label, LabeledDataset, Sample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub architecture: Architecture,
    /// Return the weights of the epoch with the best validation accuracy
    /// instead of the last epoch's.
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 3e-4,
            batch_size: 64,
            seed: 0,
            architecture: Architecture::default(),
            keep_best: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Metrics of the untrained initialization (epoch 0).
    pub initial: EpochMetrics,
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose weights were returned (0 for the initialization).
    pub selected_epoch: usize,
}

impl TrainingReport {
    /// Metrics of the returned model.
    pub fn final_metrics(&self) -> EpochMetrics {
        match self.selected_epoch {
            0 => self.initial,
            e => self.epochs[e - 1],
        }
    }
}

/// Features and targets of one split, stored row-major.
struct Matrix {
    rows: usize,
    cols: usize,
    features: Vec<f64>,
    targets: Vec<usize>,
}

fn target_index(head: &OutputHead, label: Label) -> Result<usize> {
    match (head, label) {
        (OutputHead::BinaryLogit, Label::Binary(y)) => Ok(usize::from(y > 0)),
        (OutputHead::Brackets { spec }, Label::Bracket(k)) if k < spec.len() => Ok(k),
        _ => Err(Error::InvalidArgument(format!(
            "label {label:?} does not fit the output head"
        ))),
    }
}

fn pooled_matrix(model: &ClassifierModel, samples: &[Sample]) -> Result<Matrix> {
    let cols = model.architecture.input_features();
    let mut features = Vec::with_capacity(samples.len() * cols);
    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        let n = model.input_size();
        s.image.ensure_dims(n, n)?;
        features.extend(model.pooled(&s.image));
        targets.push(target_index(model.head(), s.label)?);
    }
    Ok(Matrix {
        rows: samples.len(),
        cols,
        features,
        targets,
    })
}

fn channel_statistics(m: &Matrix) -> Normalization {
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    for (i, v) in m.features.iter().enumerate() {
        sum[i % 3] += v;
        sq[i % 3] += v * v;
    }
    let count = (m.features.len() / 3).max(1) as f64;
    let mut norm = Normalization::default();
    for c in 0..3 {
        let mean = sum[c] / count;
        let var = (sq[c] / count - mean * mean).max(0.0);
        norm.mean[c] = mean;
        norm.std[c] = var.sqrt().max(1e-6);
    }
    norm
}

/// Forward pass over a batch; returns the activations feeding each layer and
/// the final logits.
fn forward_batch(model: &ClassifierModel, x: &[f64], rows: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut inputs = vec![x.to_vec()];
    let last = model.layers.len() - 1;
    for (i, l) in model.layers.iter().enumerate() {
        let mut z = vec![0.0; rows * l.outputs];
        for r in 0..rows {
            z[r * l.outputs..(r + 1) * l.outputs].copy_from_slice(&l.bias);
        }
        gemm(
            rows,
            l.inputs,
            l.outputs,
            1.0,
            &inputs[i],
            (l.inputs, 1),
            &l.weights,
            (1, l.inputs),
            1.0,
            &mut z,
        );
        if i == last {
            return (inputs, z);
        }
        let act = model.architecture.activation;
        z.iter_mut().for_each(|v| *v = act.apply(*v));
        inputs.push(z);
    }
    unreachable!("model has at least one layer")
}

/// Mean cross-entropy and the gradient with respect to the logits.
fn loss_and_delta(head: &OutputHead, logits: &[f64], targets: &[usize]) -> (f64, Vec<f64>, usize) {
    let k = head.outputs();
    let rows = targets.len();
    let mut delta = vec![0.0; logits.len()];
    let mut loss = 0.0;
    let mut correct = 0;
    for (r, &t) in targets.iter().enumerate() {
        let row = &logits[r * k..(r + 1) * k];
        match head {
            OutputHead::BinaryLogit => {
                let l = row[0];
                let y = t as f64;
                // log(1 + e^-|l|) + max(l, 0) - l y
                loss += (-l.abs()).exp().ln_1p() + l.max(0.0) - l * y;
                delta[r] = sigmoid(l) - y;
            }
            OutputHead::Brackets { .. } => {
                let p = softmax(row);
                loss -= p[t].max(1e-300).ln();
                for j in 0..k {
                    delta[r * k + j] = p[j] - if j == t { 1.0 } else { 0.0 };
                }
            }
        }
        let predicted = match ClassifierModel::prediction_from_logits(head, row).class {
            Class::Binary(y) => usize::from(y > 0),
            Class::Bracket(i) => i,
        };
        correct += usize::from(predicted == t);
    }
    let scale = 1.0 / rows.max(1) as f64;
    delta.iter_mut().for_each(|d| *d *= scale);
    (loss * scale, delta, correct)
}

fn evaluate_matrix(model: &ClassifierModel, m: &Matrix) -> (f64, f64) {
    if m.rows == 0 {
        return (0.0, 0.0);
    }
    const CHUNK: usize = 256;
    let mut loss = 0.0;
    let mut correct = 0;
    for start in (0..m.rows).step_by(CHUNK) {
        let end = (start + CHUNK).min(m.rows);
        let x = &m.features[start * m.cols..end * m.cols];
        let (_, logits) = forward_batch(model, x, end - start);
        let (l, _, c) = loss_and_delta(model.head(), &logits, &m.targets[start..end]);
        loss += l * (end - start) as f64;
        correct += c;
    }
    (loss / m.rows as f64, correct as f64 / m.rows as f64)
}

/// Fraction of samples whose predicted class matches their label.
pub fn evaluate(model: &ClassifierModel, samples: &[Sample]) -> Result<f64> {
    let mut m = pooled_matrix(model, samples)?;
    model.normalize_in_place(&mut m.features);
    Ok(evaluate_matrix(model, &m).1)
}

/// Mini-batch Adam on cross-entropy. Deterministic for a fixed dataset and
/// configuration.
pub fn train(
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(ClassifierModel, TrainingReport)> {
    if dataset.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "lr and batch_size must be positive".into(),
        ));
    }
    let rng = Rng::new(cfg.seed);
    let mut model = ClassifierModel::initialize(
        &dataset.scenario,
        cfg.architecture.clone(),
        Normalization::default(),
        &mut rng.derive("init"),
    )?;
    let mut train = pooled_matrix(&model, &dataset.train)?;
    let mut val = pooled_matrix(&model, &dataset.val)?;
    let classes = model.head().outputs().max(2);
    let mut seen = vec![false; classes];
    train.targets.iter().for_each(|&t| seen[t] = true);
    if seen.iter().filter(|s| **s).count() < 2 {
        tracing::warn!(scenario = %dataset.scenario, "training set contains a single class");
    }

    model.normalization = channel_statistics(&train);
    model.normalize_in_place(&mut train.features);
    model.normalize_in_place(&mut val.features);

    let metrics = |model: &ClassifierModel, epoch, train_loss, train_accuracy| {
        let (val_loss, val_accuracy) = evaluate_matrix(model, &val);
        EpochMetrics {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        }
    };
    let (l0, a0) = evaluate_matrix(&model, &train);
    let initial = metrics(&model, 0, l0, a0);
    let mut best = (model.clone(), initial);

    let mut weight_opt: Vec<AdamState> = model
        .layers
        .iter()
        .map(|l| AdamState::new(l.weights.len(), cfg.lr))
        .collect();
    let mut bias_opt: Vec<AdamState> = model
        .layers
        .iter()
        .map(|l| AdamState::new(l.bias.len(), cfg.lr))
        .collect();
    let mut order: Vec<usize> = (0..train.rows).collect();
    let mut shuffle_rng = rng.derive("shuffle");
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let cols = train.cols;
    let mut batch = Vec::with_capacity(cfg.batch_size * cols);
    let mut targets = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            targets.clear();
            for &i in chunk {
                batch.extend_from_slice(&train.features[i * cols..(i + 1) * cols]);
                targets.push(train.targets[i]);
            }
            let rows = chunk.len();
            let (inputs, logits) = forward_batch(&model, &batch, rows);
            let (loss, mut delta, c) = loss_and_delta(model.head(), &logits, &targets);
            loss_sum += loss * rows as f64;
            correct += c;
            for i in (0..model.layers.len()).rev() {
                let l = &model.layers[i];
                let (n_in, n_out) = (l.inputs, l.outputs);
                let mut grad_w = vec![0.0; n_out * n_in];
                // dW = deltaᵀ · inputs
                gemm(
                    n_out,
                    rows,
                    n_in,
                    1.0,
                    &delta,
                    (1, n_out),
                    &inputs[i],
                    (n_in, 1),
                    0.0,
                    &mut grad_w,
                );
                let mut grad_b = vec![0.0; n_out];
                for r in 0..rows {
                    for (g, d) in grad_b.iter_mut().zip(&delta[r * n_out..(r + 1) * n_out]) {
                        *g += d;
                    }
                }
                let next = if i > 0 {
                    let mut back = vec![0.0; rows * n_in];
                    gemm(
                        rows,
                        n_out,
                        n_in,
                        1.0,
                        &delta,
                        (n_out, 1),
                        &l.weights,
                        (n_in, 1),
                        0.0,
                        &mut back,
                    );
                    let act = model.architecture.activation;
                    for (b, a) in back.iter_mut().zip(&inputs[i]) {
                        *b *= act.derivative_from_output(*a);
                    }
                    Some(back)
                } else {
                    None
                };
                let l = &mut model.layers[i];
                weight_opt[i].step(&mut l.weights, &grad_w)?;
                bias_opt[i].step(&mut l.bias, &grad_b)?;
                if let Some(back) = next {
                    delta = back;
                }
            }
        }
        let n = train.rows as f64;
        let m = metrics(&model, epoch, loss_sum / n, correct as f64 / n);
        tracing::debug!(epoch, val_accuracy = m.val_accuracy, "epoch finished");
        if !cfg.keep_best || val.rows == 0 || m.val_accuracy >= best.1.val_accuracy {
            best = (model.clone(), m);
        }
        epochs.push(m);
    }
    let (model, chosen) = best;
    let report = TrainingReport {
        initial,
        epochs,
        selected_epoch: chosen.epoch,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Activation;
    use crate::generator::ImageBuffer;
    use crate::scenario::{SceneParams, Split};

    /// Bright-left vs bright-right 8×8 images.
    fn toy(n: usize, seed: u64, split: Split) -> Vec<Sample> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let mut data = vec![0.0; 8 * 8 * 3];
                for y in 0..8 {
                    for x in 0..8 {
                        let bright = (x < 4) == positive;
                        let base = if bright { 0.7 } else { 0.3 };
                        for c in 0..3 {
                            data[(y * 8 + x) * 3 + c] =
                                (base + 0.2 * (rng.uniform() - 0.5)).clamp(0.0, 1.0);
                        }
                    }
                }
                Sample {
                    image: ImageBuffer::new(8, 8, data).unwrap(),
                    label: Label::Binary(if positive { 1 } else { -1 }),
                    params: SceneParams::from_unchecked(vec![]),
                    split,
                }
            })
            .collect()
    }

    fn dataset() -> LabeledDataset {
        LabeledDataset {
            scenario: "toy".into(),
            train: toy(256, 1, Split::Train),
            val: toy(64, 2, Split::Val),
        }
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            lr: 1e-3,
            batch_size: 16,
            seed: 3,
            architecture: Architecture {
                input_size: 8,
                pool: 2,
                hidden: vec![8, 4],
                activation: Activation::default(),
                head: OutputHead::BinaryLogit,
            },
            keep_best: true,
        }
    }

    #[test]
    fn learns_separable_toy() {
        let (model, report) = train(&dataset(), &cfg(10)).unwrap();
        assert!(report.final_metrics().val_accuracy >= 0.95, "{report:?}");
        assert_eq!(
            evaluate(&model, &dataset().val).unwrap(),
            report.final_metrics().val_accuracy
        );
        let first = report.epochs[0].train_loss;
        assert!(report.final_metrics().train_loss < first);
    }

    #[test]
    fn returns_best_validation_epoch() {
        let (_, report) = train(&dataset(), &cfg(6)).unwrap();
        let best = report
            .epochs
            .iter()
            .map(|e| e.val_accuracy)
            .fold(0.0, f64::max);
        assert_eq!(
            report.final_metrics().val_accuracy,
            best.max(report.initial.val_accuracy)
        );
        let mut last = cfg(6);
        last.keep_best = false;
        let (_, report) = train(&dataset(), &last).unwrap();
        assert_eq!(report.selected_epoch, 6);
    }

    #[test]
    fn deterministic() {
        let (a, _) = train(&dataset(), &cfg(2)).unwrap();
        let (b, _) = train(&dataset(), &cfg(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let c = cfg(0);
        let (model, report) = train(&dataset(), &c).unwrap();
        assert!(report.epochs.is_empty());
        let init = ClassifierModel::initialize(
            "toy",
            c.architecture.clone(),
            model.normalization,
            &mut Rng::new(c.seed).derive("init"),
        )
        .unwrap();
        assert_eq!(model, init);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let empty = LabeledDataset {
            scenario: "toy".into(),
            train: vec![],
            val: vec![],
        };
        assert!(matches!(train(&empty, &cfg(1)), Err(Error::EmptyDataset)));
        let mut bracketed = dataset();
        bracketed.train[0].label = Label::Bracket(0);
        assert!(train(&bracketed, &cfg(1)).is_err());
    }

    #[test]
    fn single_class_still_trains() {
        let mut d = dataset();
        d.train.retain(|s| s.label == Label::Binary(1));
        let (_, report) = train(&d, &cfg(1)).unwrap();
        assert_eq!(report.epochs.len(), 1);
    }
}
