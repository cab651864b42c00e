//! Linear edit directions in style space: logistic regression on
//! classifier-labeled styles, applied as `w + λ·u`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::codec;
use crate::error::{Error, Result};
use crate::generator::{Generator, ImageBuffer, StyleVector};
use crate::numeric::linalg::{dot, norm};
use crate::numeric::{AdamState, Rng};
use crate::par;
use crate::scenario::SceneSpec;

pub const DEFAULT_LAMBDAS: [f64; 6] = [-0.09, -0.06, -0.03, 0.03, 0.06, 0.09];
pub const DEFAULT_LATENT_TRAIN: usize = 20_000;
pub const DEFAULT_LATENT_VAL: usize = 5_000;

/// Largest magnitude an edited style component may take.
pub const STYLE_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub style: StyleVector,
    /// `+1` or `-1`.
    pub label: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentDataset {
    pub train: Vec<LatentSample>,
    pub val: Vec<LatentSample>,
}

/// Draws `z ~ N(0, I)`, maps to `w` and labels each style with `labeler`.
/// Sample `i` uses its own sub-stream, so the set does not depend on
/// scheduling.
pub fn sample_latent_dataset_with<F>(
    generator: &Generator,
    n_train: usize,
    n_val: usize,
    seed: u64,
    labeler: F,
) -> Result<LatentDataset>
where
    F: Fn(&StyleVector) -> Result<i8> + Sync + Send,
{
    if n_train == 0 || n_val == 0 {
        return Err(Error::InvalidArgument(
            "latent dataset sizes must be at least 1".into(),
        ));
    }
    let base = Rng::new(seed).derive("latent-dataset");
    let samples = par::map_indexed(n_train + n_val, |i| {
        let style = generator.sample_style(&mut base.derive_index(i as u64));
        labeler(&style).map(|label| LatentSample { style, label })
    });
    let mut train = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let val = train.split_off(n_train);
    Ok(LatentDataset { train, val })
}

/// Label of a style under a classifier: `+1` iff the score of its uniform
/// synthesis is positive.
pub fn classifier_label(
    generator: &Generator,
    model: &ClassifierModel,
    scene: &SceneSpec,
    style: &StyleVector,
) -> Result<i8> {
    let image = generator.synthesize_style(style, scene)?;
    Ok(if model.score(&image)? > 0.0 { 1 } else { -1 })
}

pub fn sample_latent_dataset(
    generator: &Generator,
    model: &ClassifierModel,
    scene: &SceneSpec,
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<LatentDataset> {
    sample_latent_dataset_with(generator, n_train, n_val, seed, |w| {
        classifier_label(generator, model, scene, w)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectionFitConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for DirectionFitConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            batch_size: 256,
            max_epochs: 200,
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub epochs: usize,
    /// Fraction of positive training labels.
    pub positive_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionModel {
    /// Unit-norm weight vector.
    pub u: Vec<f64>,
    /// Bias divided by the raw weight norm, so `u·w + bias` is a signed
    /// distance to the fitted boundary.
    pub bias: f64,
    pub attribute: String,
    pub scenario: String,
    pub metrics: FitMetrics,
}

fn accuracy(weights: &[f64], bias: f64, samples: &[LatentSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| {
            let positive = dot(weights, s.style.as_slice()) + bias > 0.0;
            positive == (s.label > 0)
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Logistic regression by mini-batch Adam from a zero initialization; stops
/// once validation accuracy has not improved for `patience` epochs and keeps
/// the best weights.
pub fn fit_direction(
    dataset: &LatentDataset,
    attribute: &str,
    scenario: &str,
    cfg: &DirectionFitConfig,
) -> Result<DirectionModel> {
    if dataset.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let positives = dataset.train.iter().filter(|s| s.label > 0).count();
    if positives == 0 || positives == dataset.train.len() {
        return Err(Error::SingleClass);
    }
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "lr and batch_size must be positive".into(),
        ));
    }
    let d = dataset.train[0].style.len();
    // Parameters: d weights followed by the bias.
    let mut params = vec![0.0; d + 1];
    let mut adam = AdamState::new(d + 1, cfg.lr);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut rng = Rng::new(cfg.seed).derive("direction");
    let val_or_train = if dataset.val.is_empty() {
        &dataset.train
    } else {
        &dataset.val
    };
    let mut best = (f64::NEG_INFINITY, params.clone());
    let mut stale = 0;
    let mut epochs = 0;
    let mut grad = vec![0.0; d + 1];
    for _ in 0..cfg.max_epochs {
        epochs += 1;
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let s = &dataset.train[i];
                let x = s.style.as_slice();
                let y = if s.label > 0 { 1.0 } else { 0.0 };
                let p = crate::classifier::sigmoid(dot(&params[..d], x) + params[d]);
                let e = (p - y) / chunk.len() as f64;
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += e * xi;
                }
                grad[d] += e;
            }
            adam.step(&mut params, &grad)?;
        }
        let acc = accuracy(&params[..d], params[d], val_or_train);
        if acc > best.0 {
            best = (acc, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let params = best.1;
    let n = norm(&params[..d]);
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(
            "fitted weight vector is zero".into(),
        ));
    }
    Ok(DirectionModel {
        u: params[..d].iter().map(|v| v / n).collect(),
        bias: params[d] / n,
        attribute: attribute.to_string(),
        scenario: scenario.to_string(),
        metrics: FitMetrics {
            train_accuracy: accuracy(&params[..d], params[d], &dataset.train),
            val_accuracy: accuracy(&params[..d], params[d], val_or_train),
            epochs,
            positive_fraction: positives as f64 / dataset.train.len() as f64,
        },
    })
}

/// `w + λ·u`, with components clamped to `±STYLE_LIMIT`; the flag reports
/// whether clamping happened.
pub fn apply_direction(
    w: &StyleVector,
    dir: &DirectionModel,
    lambda: f64,
) -> Result<(StyleVector, bool)> {
    if w.len() != dir.u.len() {
        return Err(Error::dims("direction", w.len(), dir.u.len()));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    let mut clamped = false;
    let edited = w
        .as_slice()
        .iter()
        .zip(&dir.u)
        .map(|(x, u)| {
            let v = x + lambda * u;
            if v.abs() > STYLE_LIMIT {
                clamped = true;
                v.clamp(-STYLE_LIMIT, STYLE_LIMIT)
            } else {
                v
            }
        })
        .collect();
    Ok((StyleVector::new(edited)?, clamped))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub lambda: f64,
    pub style: StyleVector,
    pub image: ImageBuffer,
    pub score: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Ascending in `lambda`.
    pub entries: Vec<SweepEntry>,
}

/// Edits `w` at every layer for each `λ` and scores the results.
pub fn sweep(
    generator: &Generator,
    model: &ClassifierModel,
    scene: &SceneSpec,
    w: &StyleVector,
    dir: &DirectionModel,
    lambdas: &[f64],
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one lambda is required".into(),
        ));
    }
    let mut sorted = lambdas.to_vec();
    if sorted.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let entries = par::map_indexed(sorted.len(), |i| -> Result<SweepEntry> {
        let lambda = sorted[i];
        let (style, clamped) = apply_direction(w, dir, lambda)?;
        let image = generator.synthesize_style(&style, scene)?;
        let score = model.score(&image)?;
        Ok(SweepEntry {
            lambda,
            style,
            image,
            score,
            clamped,
        })
    });
    Ok(SweepResult {
        entries: entries.into_iter().collect::<Result<_>>()?,
    })
}

impl SweepResult {
    /// Tab-separated `lambda  score  clamped` table with a header row.
    pub fn table(&self) -> String {
        let mut out = String::from("lambda\tscore\tclamped\n");
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.lambda, e.score, e.clamped));
        }
        out
    }

    /// Writes `strip.png` (images left to right) and `scores.tsv`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let images: Vec<ImageBuffer> = self.entries.iter().map(|e| e.image.clone()).collect();
        codec::save_png(&codec::hstack(&images)?, dir.join("strip.png"))?;
        fs::write(dir.join("scores.tsv"), self.table())?;
        Ok(())
    }
}

pub fn save_direction(dir: &DirectionModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(dir)?)?;
    Ok(())
}

pub fn load_direction(path: impl AsRef<Path>) -> Result<DirectionModel> {
    let dir: DirectionModel = serde_json::from_slice(&fs::read(path)?)?;
    if (norm(&dir.u) - 1.0).abs() > 1e-9 {
        return Err(Error::Format("direction vector is not unit length".into()));
    }
    Ok(dir)
}
