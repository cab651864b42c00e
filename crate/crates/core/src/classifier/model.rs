use serde::{Deserialize, Serialize};

use super::BracketSpec;
use crate::error::{Error, Result};
use crate::generator::ImageBuffer;
use crate::numeric::linalg::{matvec, matvec_t};
use crate::numeric::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutputHead {
    /// One logit; positive class when it is positive.
    BinaryLogit,
    /// One logit per ordinal bracket.
    Brackets { spec: BracketSpec },
}

impl OutputHead {
    pub fn outputs(&self) -> usize {
        match self {
            OutputHead::BinaryLogit => 1,
            OutputHead::Brackets { spec } => spec.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    /// Side length of the (square) input image.
    pub input_size: usize,
    /// Average-pooling factor applied before the first dense layer.
    pub pool: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: OutputHead,
}

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// `ln(1 + eᶻ)`. Smooth, so the score is smooth along any straight
    /// path in pixel space and path integrals converge at second order.
    #[default]
    Softplus,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Derivative at pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            // σ(z) = 1 − e^(−softplus(z))
            Activation::Softplus => -(-a).exp_m1(),
        }
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_size: 64,
            pool: 2,
            hidden: vec![128, 32],
            activation: Activation::default(),
            head: OutputHead::BinaryLogit,
        }
    }
}

impl Architecture {
    pub fn feature_side(&self) -> usize {
        self.input_size / self.pool
    }

    pub fn input_features(&self) -> usize {
        self.feature_side() * self.feature_side() * 3
    }

    /// `(inputs, outputs)` of every dense layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_features()];
        widths.extend(&self.hidden);
        widths.push(self.head.outputs());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool == 0 || self.input_size == 0 || !self.input_size.is_multiple_of(self.pool) {
            return Err(Error::Config(
                "input_size must be a positive multiple of pool".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if let OutputHead::Brackets { spec } = &self.head {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Fully connected layer, `weights` row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-channel input normalization frozen from the training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Binary(i8),
    Bracket(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: Class,
    /// Probability of the predicted class.
    pub confidence: f64,
}

/// Rectifier MLP over pooled, normalized pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub scenario: String,
    pub architecture: Architecture,
    pub normalization: Normalization,
    pub layers: Vec<Dense>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax-weighted average of bracket centers.
pub fn continuous_score_from_logits(logits: &[f64], brackets: &BracketSpec) -> Result<f64> {
    if logits.len() != brackets.len() {
        return Err(Error::dims("bracket logits", brackets.len(), logits.len()));
    }
    // One division at the end: a uniform softmax then rounds exactly like
    // the plain mean of the centers.
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let weighted: f64 = exps.iter().zip(&brackets.centers).map(|(e, c)| e * c).sum();
    Ok(weighted / exps.iter().sum::<f64>())
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

impl ClassifierModel {
    /// He-initialized weights, zero biases.
    pub fn initialize(
        scenario: &str,
        architecture: Architecture,
        normalization: Normalization,
        rng: &mut Rng,
    ) -> Result<Self> {
        architecture.validate()?;
        let shapes = architecture.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(i, &(inputs, outputs))| {
                let gain = if i == last { 1.0 } else { 2.0 };
                let std = (gain / inputs as f64).sqrt();
                Dense {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs).map(|_| rng.normal() * std).collect(),
                    bias: vec![0.0; outputs],
                }
            })
            .collect();
        Ok(Self {
            scenario: scenario.to_string(),
            architecture,
            normalization,
            layers,
        })
    }

    pub fn head(&self) -> &OutputHead {
        &self.architecture.head
    }

    pub fn input_size(&self) -> usize {
        self.architecture.input_size
    }

    fn check_image(&self, image: &ImageBuffer) -> Result<()> {
        let n = self.architecture.input_size;
        image.ensure_dims(n, n)
    }

    /// Pooled pixels before normalization.
    pub(crate) fn pooled(&self, image: &ImageBuffer) -> Vec<f64> {
        let p = self.architecture.pool;
        let n = self.architecture.input_size;
        let side = n / p;
        let inv = 1.0 / (p * p) as f64;
        let data = image.data();
        let mut out = vec![0.0; side * side * 3];
        for y in 0..n {
            for x in 0..n {
                let dst = ((y / p) * side + x / p) * 3;
                let src = (y * n + x) * 3;
                for c in 0..3 {
                    out[dst + c] += data[src + c];
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }

    pub(crate) fn normalize_in_place(&self, features: &mut [f64]) {
        let Normalization { mean, std } = self.normalization;
        for (i, v) in features.iter_mut().enumerate() {
            let c = i % 3;
            *v = (*v - mean[c]) / std[c];
        }
    }

    pub fn features(&self, image: &ImageBuffer) -> Result<Vec<f64>> {
        self.check_image(image)?;
        let mut f = self.pooled(image);
        self.normalize_in_place(&mut f);
        Ok(f)
    }

    /// Pre-activations of every layer for one feature vector.
    fn forward(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = features.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; l.outputs];
            matvec(&l.weights, l.outputs, l.inputs, &x, &mut z);
            for (zi, b) in z.iter_mut().zip(&l.bias) {
                *zi += b;
            }
            if i + 1 < self.layers.len() {
                let act = self.architecture.activation;
                x = z.iter().map(|v| act.apply(*v)).collect();
            }
            pre.push(z);
        }
        pre
    }

    pub fn logits_from_features(&self, features: &[f64]) -> Vec<f64> {
        self.forward(features).pop().expect("at least one layer")
    }

    pub fn logits(&self, image: &ImageBuffer) -> Result<Vec<f64>> {
        Ok(self.logits_from_features(&self.features(image)?))
    }

    /// Scalar score shown to users: `tanh(logit)` for a binary head, the
    /// softmax-weighted bracket center for an ordinal head.
    pub fn score(&self, image: &ImageBuffer) -> Result<f64> {
        let logits = self.logits(image)?;
        Ok(match self.head() {
            OutputHead::BinaryLogit => logits[0].tanh(),
            OutputHead::Brackets { spec } => continuous_score_from_logits(&logits, spec)?,
        })
    }

    /// Sigmoid probability of the positive class (binary head only).
    pub fn probability(&self, image: &ImageBuffer) -> Result<f64> {
        match self.head() {
            OutputHead::BinaryLogit => Ok(sigmoid(self.logits(image)?[0])),
            OutputHead::Brackets { .. } => Err(Error::InvalidArgument(
                "probability is defined for binary heads only".into(),
            )),
        }
    }

    pub fn continuous_score(&self, image: &ImageBuffer, brackets: &BracketSpec) -> Result<f64> {
        if !matches!(self.head(), OutputHead::Brackets { .. }) {
            return Err(Error::InvalidArgument("model has a binary head".into()));
        }
        continuous_score_from_logits(&self.logits(image)?, brackets)
    }

    pub fn predict_class(&self, image: &ImageBuffer) -> Result<Prediction> {
        let logits = self.logits(image)?;
        Ok(Self::prediction_from_logits(self.head(), &logits))
    }

    pub(crate) fn prediction_from_logits(head: &OutputHead, logits: &[f64]) -> Prediction {
        match head {
            OutputHead::BinaryLogit => {
                let p = sigmoid(logits[0]);
                if logits[0] > 0.0 {
                    Prediction {
                        class: Class::Binary(1),
                        confidence: p,
                    }
                } else {
                    Prediction {
                        class: Class::Binary(-1),
                        confidence: 1.0 - p,
                    }
                }
            }
            OutputHead::Brackets { .. } => {
                let i = argmax(logits);
                Prediction {
                    class: Class::Bracket(i),
                    confidence: softmax(logits)[i],
                }
            }
        }
    }

    /// `∂score/∂pixel`, laid out like the image.
    pub fn input_gradient(&self, image: &ImageBuffer) -> Result<Vec<f64>> {
        let features = self.features(image)?;
        let pre = self.forward(&features);
        let logits = pre.last().expect("at least one layer");
        let mut delta: Vec<f64> = match self.head() {
            OutputHead::BinaryLogit => {
                let t = logits[0].tanh();
                vec![1.0 - t * t]
            }
            OutputHead::Brackets { spec } => {
                let p = softmax(logits);
                let s: f64 = p.iter().zip(&spec.centers).map(|(a, c)| a * c).sum();
                p.iter()
                    .zip(&spec.centers)
                    .map(|(a, c)| a * (c - s))
                    .collect()
            }
        };
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let mut back = vec![0.0; l.inputs];
            matvec_t(&l.weights, l.outputs, l.inputs, &delta, &mut back);
            if i > 0 {
                let act = self.architecture.activation;
                for (b, z) in back.iter_mut().zip(&pre[i - 1]) {
                    *b *= act.derivative(*z);
                }
            }
            delta = back;
        }
        // Undo normalization and pooling.
        let p = self.architecture.pool;
        let n = self.architecture.input_size;
        let side = n / p;
        let inv = 1.0 / (p * p) as f64;
        let std = self.normalization.std;
        let mut grad = vec![0.0; n * n * 3];
        for y in 0..n {
            for x in 0..n {
                let src = ((y / p) * side + x / p) * 3;
                let dst = (y * n + x) * 3;
                for c in 0..3 {
                    grad[dst + c] = delta[src + c] * inv / std[c];
                }
            }
        }
        Ok(grad)
    }
}
