//! The style-based procedural generator.
//!
//! A latent code `z` is mapped to a style `w = tanh(A·z)` with a fixed seeded
//! orthogonal `A`. Each generator layer reads one style; the attributes that
//! belong to a layer are decoded from the style effective at that layer, so
//! feeding different styles to different layers mixes their attributes.

mod image;
pub(crate) mod render;
mod style;

use serde::{Deserialize, Serialize};

pub use image::ImageBuffer;
pub use style::{LatentCode, LayerAssignment, LayerGrouping, LayerStyle, StyleVector};

use crate::error::{Error, Result};
use crate::numeric::linalg::{matvec, matvec_t, random_orthogonal};
use crate::numeric::{Dual, Real, Rng};
use crate::scenario::{SceneParams, SceneSpec};

/// Generator dimensions and rendering constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorGeometry {
    pub latent_dim: usize,
    pub style_dim: usize,
    pub layers: usize,
    pub grouping: LayerGrouping,
    pub image_size: usize,
    /// Half-width of the soft mask band, in pixels.
    pub softness: f64,
    pub mapping_seed: u64,
    /// Images produced per generate request.
    pub output_count: usize,
}

impl Default for GeneratorGeometry {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            style_dim: 16,
            layers: 6,
            grouping: LayerGrouping::from_sizes(vec![2, 2, 2]).expect("static grouping"),
            image_size: 64,
            softness: 1.5,
            mapping_seed: 0x5EED_0001,
            output_count: 7,
        }
    }
}

impl GeneratorGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.latent_dim != self.style_dim {
            return Err(Error::Config(
                "latent_dim and style_dim must be equal and positive (the mapping is square)"
                    .into(),
            ));
        }
        if self.grouping.layer_count() != self.layers {
            return Err(Error::Config(format!(
                "grouping covers {} layers, generator has {}",
                self.grouping.layer_count(),
                self.layers
            )));
        }
        if self.image_size < 8 {
            return Err(Error::Config("image_size must be at least 8".into()));
        }
        if !(self.softness > 0.0) {
            return Err(Error::Config("softness must be positive".into()));
        }
        if self.output_count == 0 {
            return Err(Error::Config("output_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-attribute derivative images of a render.
#[derive(Clone, Debug)]
pub struct RenderJacobian {
    pub image: ImageBuffer,
    pub attributes: Vec<String>,
    /// `gradients[k]` has the image layout and holds ∂pixel/∂attribute k.
    pub gradients: Vec<Vec<f64>>,
}

/// Soft geometry masks (one plane per shape, values in `[0, 1]`).
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryMasks {
    pub names: Vec<String>,
    pub planes: Vec<Vec<f64>>,
}

#[inline]
fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

#[derive(Clone, Debug)]
pub struct Generator {
    geometry: GeneratorGeometry,
    /// Row-major `style_dim × latent_dim` orthogonal matrix.
    mapping: Vec<f64>,
}

impl Generator {
    pub fn new(geometry: GeneratorGeometry) -> Result<Self> {
        geometry.validate()?;
        let mapping = random_orthogonal(
            geometry.latent_dim,
            &mut Rng::new(geometry.mapping_seed).derive("mapping"),
        );
        Ok(Self { geometry, mapping })
    }

    pub fn geometry(&self) -> &GeneratorGeometry {
        &self.geometry
    }

    pub fn layers(&self) -> usize {
        self.geometry.layers
    }

    pub fn style_dim(&self) -> usize {
        self.geometry.style_dim
    }

    pub fn image_size(&self) -> usize {
        self.geometry.image_size
    }

    pub fn grouping(&self) -> &LayerGrouping {
        &self.geometry.grouping
    }

    /// Pre-activation `A·z`.
    pub(crate) fn preactivation(&self, z: &[f64]) -> Vec<f64> {
        let d = self.geometry.latent_dim;
        let mut s = vec![0.0; d];
        matvec(&self.mapping, d, d, z, &mut s);
        s
    }

    pub fn map_latent(&self, z: &LatentCode) -> Result<StyleVector> {
        if z.len() != self.geometry.latent_dim {
            return Err(Error::dims(
                "latent code",
                self.geometry.latent_dim,
                z.len(),
            ));
        }
        StyleVector::new(
            self.preactivation(z.as_slice())
                .into_iter()
                .map(f64::tanh)
                .collect(),
        )
    }

    pub fn unmap_latent(&self, w: &StyleVector) -> Result<LatentCode> {
        if w.len() != self.geometry.style_dim {
            return Err(Error::dims(
                "style vector",
                self.geometry.style_dim,
                w.len(),
            ));
        }
        let s: Vec<f64> = w.as_slice().iter().map(|v| v.atanh()).collect();
        let d = self.geometry.latent_dim;
        let mut z = vec![0.0; d];
        matvec_t(&self.mapping, d, d, &s, &mut z);
        LatentCode::new(z)
    }

    pub fn sample_latent(&self, rng: &mut Rng) -> LatentCode {
        LatentCode::new(
            (0..self.geometry.latent_dim)
                .map(|_| rng.normal())
                .collect(),
        )
        .expect("normal draws are finite")
    }

    pub fn sample_style(&self, rng: &mut Rng) -> StyleVector {
        let z = self.sample_latent(rng);
        self.map_latent(&z)
            .expect("sampled latent has the right length")
    }

    fn check_scene(&self, scene: &SceneSpec) -> Result<()> {
        scene.validate(self.geometry.layers, self.geometry.style_dim)
    }

    /// Attribute value decoded from a style component.
    pub fn decode_component(scene: &SceneSpec, attribute: usize, w: f64) -> f64 {
        let a = &scene.attributes[attribute];
        match a.frozen {
            Some(v) => v,
            None => a.min + (a.max - a.min) * smoothstep(0.5 * (w + 1.0)),
        }
    }

    /// `∂attribute/∂w` of [`Generator::decode_component`].
    pub fn decode_slope(scene: &SceneSpec, attribute: usize, w: f64) -> f64 {
        let a = &scene.attributes[attribute];
        if a.frozen.is_some() {
            return 0.0;
        }
        let u = 0.5 * (w + 1.0);
        (a.max - a.min) * 3.0 * u * (1.0 - u)
    }

    /// Reads each attribute from the style effective at its layer.
    pub fn decode_styles(
        &self,
        assignment: &LayerAssignment,
        scene: &SceneSpec,
    ) -> Result<SceneParams> {
        assignment.validate(self.geometry.layers, self.geometry.style_dim)?;
        self.check_scene(scene)?;
        let effective = assignment
            .layers()
            .iter()
            .map(LayerStyle::effective)
            .collect::<Result<Vec<_>>>()?;
        let values = scene
            .attributes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Self::decode_component(scene, i, effective[a.layer - 1].as_slice()[a.component])
            })
            .collect();
        Ok(SceneParams::from_unchecked(values))
    }

    pub fn decode_style(&self, w: &StyleVector, scene: &SceneSpec) -> Result<SceneParams> {
        self.decode_styles(&LayerAssignment::uniform(w, self.geometry.layers), scene)
    }

    fn check_params(&self, params: &SceneParams, scene: &SceneSpec) -> Result<()> {
        self.check_scene(scene)?;
        SceneParams::new(scene, params.values().to_vec()).map(|_| ())
    }

    /// Renders explicit scene parameters.
    pub fn render(&self, params: &SceneParams, scene: &SceneSpec) -> Result<ImageBuffer> {
        self.check_params(params, scene)?;
        Ok(self.render_unchecked(params.values(), scene))
    }

    pub(crate) fn render_unchecked(&self, values: &[f64], scene: &SceneSpec) -> ImageBuffer {
        let n = self.geometry.image_size;
        let px = render::render(scene, values, n, self.geometry.softness, None);
        let data = px
            .into_iter()
            .flatten()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        ImageBuffer::from_raw_unchecked(n, n, data)
    }

    pub fn render_masks(&self, params: &SceneParams, scene: &SceneSpec) -> Result<GeometryMasks> {
        self.check_params(params, scene)?;
        let n = self.geometry.image_size;
        let names = render::mask_names(scene.kind);
        let mut planes = vec![vec![0.0; n * n]; names.len()];
        render::render(
            scene,
            params.values(),
            n,
            self.geometry.softness,
            Some(&mut planes),
        );
        Ok(GeometryMasks {
            names: names.iter().map(|s| s.to_string()).collect(),
            planes,
        })
    }

    pub fn synthesize(
        &self,
        assignment: &LayerAssignment,
        scene: &SceneSpec,
    ) -> Result<ImageBuffer> {
        let params = self.decode_styles(assignment, scene)?;
        Ok(self.render_unchecked(params.values(), scene))
    }

    /// The same style at every layer.
    pub fn synthesize_style(&self, w: &StyleVector, scene: &SceneSpec) -> Result<ImageBuffer> {
        self.synthesize(&LayerAssignment::uniform(w, self.geometry.layers), scene)
    }

    pub fn synthesize_from_z(&self, z: &LatentCode, scene: &SceneSpec) -> Result<ImageBuffer> {
        let w = self.map_latent(z)?;
        self.synthesize_style(&w, scene)
    }

    /// ∂image/∂attribute for every attribute of the decoded assignment.
    pub fn render_jacobian(
        &self,
        assignment: &LayerAssignment,
        scene: &SceneSpec,
    ) -> Result<RenderJacobian> {
        let params = self.decode_styles(assignment, scene)?;
        Ok(self.params_jacobian_unchecked(params.values(), scene))
    }

    pub fn params_jacobian(
        &self,
        params: &SceneParams,
        scene: &SceneSpec,
    ) -> Result<RenderJacobian> {
        self.check_params(params, scene)?;
        Ok(self.params_jacobian_unchecked(params.values(), scene))
    }

    pub(crate) fn params_jacobian_unchecked(
        &self,
        values: &[f64],
        scene: &SceneSpec,
    ) -> RenderJacobian {
        let n = self.geometry.image_size;
        let k = values.len();
        let duals: Vec<Dual> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::variable(v, i))
            .collect();
        let px = render::render(scene, &duals, n, self.geometry.softness, None);
        let mut data = Vec::with_capacity(n * n * 3);
        let mut gradients = vec![Vec::with_capacity(n * n * 3); k];
        for d in px.iter().flatten() {
            data.push(d.value().clamp(0.0, 1.0));
            for (g, slot) in gradients.iter_mut().zip(d.d.iter()) {
                g.push(*slot);
            }
        }
        RenderJacobian {
            image: ImageBuffer::from_raw_unchecked(n, n, data),
            attributes: scene.attributes.iter().map(|a| a.name.clone()).collect(),
            gradients,
        }
    }
}

#[cfg(test)]
mod tests;
