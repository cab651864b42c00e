//! Gradient attribution baselines: vanilla saliency, SmoothGrad and
//! Integrated Gradients, plus heat-map rendering.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierModel;
use crate::codec;
use crate::error::{Error, Result};
use crate::generator::ImageBuffer;
use crate::numeric::Rng;
use crate::par;

pub const DEFAULT_SMOOTHGRAD_SAMPLES: usize = 25;
pub const DEFAULT_SMOOTHGRAD_SIGMA: f64 = 0.1;
pub const DEFAULT_IG_STEPS: usize = 128;

/// A differentiable scalar function of an image.
pub trait ScoreFunction: Sync {
    fn score(&self, image: &ImageBuffer) -> Result<f64>;
    /// Gradient laid out like `image.data()`.
    fn gradient(&self, image: &ImageBuffer) -> Result<Vec<f64>>;
}

impl ScoreFunction for ClassifierModel {
    fn score(&self, image: &ImageBuffer) -> Result<f64> {
        ClassifierModel::score(self, image)
    }

    fn gradient(&self, image: &ImageBuffer) -> Result<Vec<f64>> {
        self.input_gradient(image)
    }
}

/// `f(x) = c·x + b`. Handy as an exact reference.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearScore {
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl ScoreFunction for LinearScore {
    fn score(&self, image: &ImageBuffer) -> Result<f64> {
        if image.data().len() != self.coefficients.len() {
            return Err(Error::dims(
                "linear score input",
                self.coefficients.len(),
                image.data().len(),
            ));
        }
        Ok(self.bias + crate::numeric::linalg::dot(&self.coefficients, image.data()))
    }

    fn gradient(&self, image: &ImageBuffer) -> Result<Vec<f64>> {
        if image.data().len() != self.coefficients.len() {
            return Err(Error::dims(
                "linear score input",
                self.coefficients.len(),
                image.data().len(),
            ));
        }
        Ok(self.coefficients.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Saliency,
    Smoothgrad,
    IntegratedGradients,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saliency" => Ok(Method::Saliency),
            "smoothgrad" => Ok(Method::Smoothgrad),
            "integrated_gradients" => Ok(Method::IntegratedGradients),
            other => Err(Error::InvalidArgument(format!(
                "unknown attribution method `{other}`"
            ))),
        }
    }
}

/// Parameters actually used to produce a map. Fields that do not apply to
/// the method are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributionParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    pub method: Method,
    pub params: AttributionParams,
    pub height: usize,
    pub width: usize,
    /// Interleaved like `ImageBuffer::data`.
    pub values: Vec<f64>,
}

impl AttributionMap {
    fn new(
        method: Method,
        params: AttributionParams,
        image: &ImageBuffer,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != image.data().len() {
            return Err(Error::dims("attribution", image.data().len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain("non-finite attribution".into()));
        }
        Ok(Self {
            method,
            params,
            height: image.height(),
            width: image.width(),
            values,
        })
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `[row][column][channel]`.
    pub fn nested(&self) -> Vec<Vec<[f64; 3]>> {
        self.values
            .chunks(self.width * 3)
            .map(|row| row.chunks(3).map(|p| [p[0], p[1], p[2]]).collect())
            .collect()
    }

    /// Writes `heatmap.png` and `attribution.json` (method, params, nested
    /// values).
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        codec::save_png(&to_heatmap(self), dir.join("heatmap.png"))?;
        let doc = serde_json::json!({
            "method": self.method,
            "params": self.params,
            "shape": [self.height, self.width, 3],
            "values": self.nested(),
        });
        fs::write(dir.join("attribution.json"), serde_json::to_vec(&doc)?)?;
        Ok(())
    }
}

pub fn saliency(f: &impl ScoreFunction, image: &ImageBuffer) -> Result<AttributionMap> {
    AttributionMap::new(
        Method::Saliency,
        AttributionParams::default(),
        image,
        f.gradient(image)?,
    )
}

/// Running mean, so averaging `n` identical vectors returns them unchanged.
fn accumulate(mean: &mut [f64], sample: &[f64], count: usize) {
    let k = count as f64;
    for (m, s) in mean.iter_mut().zip(sample) {
        *m += (s - *m) / k;
    }
}

/// The copy of `image` that SmoothGrad sample `index` differentiates at.
pub fn smoothgrad_sample(
    image: &ImageBuffer,
    sigma: f64,
    seed: u64,
    index: usize,
) -> Result<ImageBuffer> {
    let mut rng = Rng::new(seed)
        .derive("smoothgrad")
        .derive_index(index as u64);
    let data = image
        .data()
        .iter()
        .map(|v| v + sigma * rng.normal())
        .collect();
    ImageBuffer::from_clamped(image.height(), image.width(), data)
}

/// Mean saliency over `n` copies perturbed by `N(0, sigma²)` pixel noise,
/// clipped to `[0, 1]`.
pub fn smoothgrad(
    f: &impl ScoreFunction,
    image: &ImageBuffer,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<AttributionMap> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "smoothgrad needs at least one sample".into(),
        ));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(
            "sigma must be finite and non-negative".into(),
        ));
    }
    let grads = par::map_indexed(n, |i| {
        smoothgrad_sample(image, sigma, seed, i).and_then(|x| f.gradient(&x))
    });
    let mut mean = vec![0.0; image.data().len()];
    for (i, g) in grads.into_iter().enumerate() {
        accumulate(&mut mean, &g?, i + 1);
    }
    let params = AttributionParams {
        samples: Some(n),
        sigma: Some(sigma),
        seed: Some(seed),
        steps: None,
    };
    AttributionMap::new(Method::Smoothgrad, params, image, mean)
}

/// `(x − x₀) ⊙ mean_k ∇f(x₀ + t_k (x − x₀))` with midpoints
/// `t_k = (k + ½) / steps`.
pub fn integrated_gradients(
    f: &impl ScoreFunction,
    image: &ImageBuffer,
    baseline: &ImageBuffer,
    steps: usize,
) -> Result<AttributionMap> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "integrated gradients needs at least one step".into(),
        ));
    }
    baseline.ensure_dims(image.height(), image.width())?;
    let delta: Vec<f64> = image
        .data()
        .iter()
        .zip(baseline.data())
        .map(|(x, b)| x - b)
        .collect();
    let grads = par::map_indexed(steps, |k| {
        let t = (k as f64 + 0.5) / steps as f64;
        let point = baseline
            .data()
            .iter()
            .zip(&delta)
            .map(|(b, d)| b + t * d)
            .collect();
        ImageBuffer::from_clamped(image.height(), image.width(), point).and_then(|x| f.gradient(&x))
    });
    let mut mean = vec![0.0; delta.len()];
    for (k, g) in grads.into_iter().enumerate() {
        accumulate(&mut mean, &g?, k + 1);
    }
    let values = mean.iter().zip(&delta).map(|(g, d)| g * d).collect();
    let params = AttributionParams {
        steps: Some(steps),
        ..Default::default()
    };
    AttributionMap::new(Method::IntegratedGradients, params, image, values)
}

pub fn zeros_like(image: &ImageBuffer) -> ImageBuffer {
    ImageBuffer::filled(image.height(), image.width(), 0.0)
}

/// Heat-map colour ramp, low to high: near-black indigo, purple, crimson,
/// orange, pale yellow. Linear interpolation between evenly spaced stops.
pub const RAMP: [[f64; 3]; 5] = [
    [0.02, 0.01, 0.10],
    [0.32, 0.07, 0.50],
    [0.73, 0.20, 0.33],
    [0.97, 0.55, 0.10],
    [0.99, 0.98, 0.64],
];

pub fn ramp(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    [
        a[0] + f * (b[0] - a[0]),
        a[1] + f * (b[1] - a[1]),
        a[2] + f * (b[2] - a[2]),
    ]
}

/// Nearest-rank percentile of unsorted data.
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Per-pixel sum of absolute channel attributions, clipped at the 99th
/// percentile, min-max scaled and coloured with [`RAMP`].
pub fn to_heatmap(attr: &AttributionMap) -> ImageBuffer {
    let magnitude: Vec<f64> = attr
        .values
        .chunks(3)
        .map(|p| p.iter().map(|v| v.abs()).sum())
        .collect();
    let cap = percentile(&magnitude, 0.99);
    let clipped: Vec<f64> = magnitude.iter().map(|m| m.min(cap)).collect();
    let lo = clipped.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = clipped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data = clipped
        .iter()
        .flat_map(|m| ramp(if hi > lo { (m - lo) / (hi - lo) } else { 0.0 }))
        .collect();
    ImageBuffer::from_clamped(attr.height, attr.width, data).expect("shape preserved")
}
