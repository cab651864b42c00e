use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator input `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain(
                "latent code has non-finite entries".into(),
            ));
        }
        Ok(Self(z))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mapped style `w`, every component strictly inside `(-1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StyleVector(Vec<f64>);

impl StyleVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::OutOfDomain(format!(
                "style component {v} outside the open interval (-1, 1)"
            )));
        }
        Ok(Self(w))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Componentwise `(1 - alpha)·a + alpha·b`.
    ///
    /// Components that agree are copied unchanged, so blending a style with
    /// itself, or with `alpha` at either endpoint, returns the input bits.
    pub fn lerp(a: &StyleVector, b: &StyleVector, alpha: f64) -> Result<StyleVector> {
        if a.len() != b.len() {
            return Err(Error::dims("style blend", a.len(), b.len()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OutOfDomain(format!(
                "blend alpha {alpha} outside [0, 1]"
            )));
        }
        let w =
            a.0.iter()
                .zip(&b.0)
                .map(|(&x, &y)| {
                    if x == y {
                        x
                    } else {
                        (1.0 - alpha) * x + alpha * y
                    }
                })
                .collect();
        Ok(StyleVector(w))
    }
}

impl<'de> Deserialize<'de> for StyleVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        StyleVector::new(w).map_err(serde::de::Error::custom)
    }
}

/// The style feeding one generator layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerStyle {
    Single {
        style: StyleVector,
    },
    Blend {
        a: StyleVector,
        b: StyleVector,
        alpha: f64,
    },
}

impl LayerStyle {
    pub fn single(style: StyleVector) -> Self {
        LayerStyle::Single { style }
    }

    pub fn blend(a: StyleVector, b: StyleVector, alpha: f64) -> Self {
        LayerStyle::Blend { a, b, alpha }
    }

    /// The style the layer actually reads.
    pub fn effective(&self) -> Result<StyleVector> {
        match self {
            LayerStyle::Single { style } => Ok(style.clone()),
            LayerStyle::Blend { a, b, alpha } => StyleVector::lerp(a, b, *alpha),
        }
    }
}

/// One [`LayerStyle`] per generator layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerAssignment(Vec<LayerStyle>);

impl LayerAssignment {
    pub fn new(layers: Vec<LayerStyle>) -> Self {
        Self(layers)
    }

    /// The same style at every layer.
    pub fn uniform(style: &StyleVector, layers: usize) -> Self {
        Self(vec![LayerStyle::single(style.clone()); layers])
    }

    pub fn layers(&self) -> &[LayerStyle] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Replaces the style of one layer (0-based index).
    pub fn set(&mut self, layer: usize, style: LayerStyle) {
        self.0[layer] = style;
    }

    pub fn validate(&self, layers: usize, style_dim: usize) -> Result<()> {
        if self.0.len() != layers {
            return Err(Error::dims("layer assignment", layers, self.0.len()));
        }
        for l in &self.0 {
            match l {
                LayerStyle::Single { style } => {
                    if style.len() != style_dim {
                        return Err(Error::dims("style vector", style_dim, style.len()));
                    }
                }
                LayerStyle::Blend { a, b, alpha } => {
                    for s in [a, b] {
                        if s.len() != style_dim {
                            return Err(Error::dims("style vector", style_dim, s.len()));
                        }
                    }
                    if !(0.0..=1.0).contains(alpha) {
                        return Err(Error::OutOfDomain(format!(
                            "blend alpha {alpha} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Ordered partition of the layers into contiguous, non-empty groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LayerGrouping {
    sizes: Vec<usize>,
}

impl LayerGrouping {
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("layer groups must be non-empty".into()));
        }
        Ok(Self { sizes })
    }

    /// `groups` consecutive groups as even as possible.
    pub fn even(layers: usize, groups: usize) -> Result<Self> {
        if groups == 0 || groups > layers {
            return Err(Error::Config(format!(
                "cannot split {layers} layers into {groups} groups"
            )));
        }
        let sizes = (0..groups)
            .map(|g| layers / groups + usize::from(g < layers % groups))
            .collect();
        Self::from_sizes(sizes)
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// 0-based layer range of a group.
    pub fn layers_of(&self, group: usize) -> std::ops::Range<usize> {
        let start: usize = self.sizes[..group].iter().sum();
        start..start + self.sizes[group]
    }

    /// 1-based layer numbers per group, as shown to users.
    pub fn as_lists(&self) -> Vec<Vec<usize>> {
        (0..self.group_count())
            .map(|g| self.layers_of(g).map(|l| l + 1).collect())
            .collect()
    }

    /// Expands one style choice per group into a per-layer assignment.
    pub fn expand(&self, per_group: Vec<LayerStyle>) -> Result<LayerAssignment> {
        if per_group.len() != self.group_count() {
            return Err(Error::dims(
                "group assignment",
                self.group_count(),
                per_group.len(),
            ));
        }
        let mut layers = Vec::with_capacity(self.layer_count());
        for (g, style) in per_group.into_iter().enumerate() {
            for _ in self.layers_of(g) {
                layers.push(style.clone());
            }
        }
        Ok(LayerAssignment::new(layers))
    }
}

impl TryFrom<Vec<usize>> for LayerGrouping {
    type Error = Error;
    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::from_sizes(sizes)
    }
}

impl From<LayerGrouping> for Vec<usize> {
    fn from(g: LayerGrouping) -> Self {
        g.sizes
    }
}
