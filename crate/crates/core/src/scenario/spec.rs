//! Declarative scenario descriptions: attribute tables, label rules and the
//! three built-in toy scenarios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::BracketSpec;
use crate::error::{Error, Result};
use crate::numeric::TANGENTS;

/// Which procedural renderer draws the scene.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Faces,
    Flowers,
}

impl SceneKind {
    /// Attribute names the renderer reads, in canonical order.
    pub fn roles(self) -> &'static [&'static str] {
        match self {
            SceneKind::Faces => &[
                "pos_x",
                "pos_y",
                "head_scale",
                "tilt",
                "head_aspect",
                "mouth_curvature",
                "eye_size",
                "hair_length",
                "skin_tone",
                "hair_color",
                "makeup_tint",
                "background",
            ],
            SceneKind::Flowers => &[
                "pos_x",
                "pos_y",
                "scale",
                "rotation",
                "petal_count",
                "petal_length",
                "disc_radius",
                "petal_width",
                "petal_shade",
                "disc_darkness",
                "background",
                "background_hue",
            ],
        }
    }
}

/// One renderer attribute: which layer controls it, its range, and which
/// style component it is decoded from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    /// 1-based generator layer.
    pub layer: usize,
    pub min: f64,
    pub max: f64,
    /// Style component the attribute is decoded from.
    pub component: usize,
    /// Pins the attribute to a constant, removing its dependence on the style.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen: Option<f64>,
}

impl AttributeSpec {
    pub fn new(name: &str, layer: usize, min: f64, max: f64, component: usize) -> Self {
        Self {
            name: name.to_string(),
            layer,
            min,
            max,
            component,
            frozen: None,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    /// Position of `v` inside the range, 0 at `min` and 1 at `max`.
    pub fn normalized(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }
}

/// Strict comparisons; ties fall on the negative side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Condition {
    Above {
        attribute: String,
        threshold: f64,
    },
    Below {
        attribute: String,
        threshold: f64,
    },
    /// Strictly closer to `positive` than to `negative`.
    Nearer {
        attribute: String,
        positive: f64,
        negative: f64,
    },
}

impl Condition {
    pub fn attribute(&self) -> &str {
        match self {
            Condition::Above { attribute, .. }
            | Condition::Below { attribute, .. }
            | Condition::Nearer { attribute, .. } => attribute,
        }
    }

    pub fn holds(&self, v: f64) -> bool {
        match self {
            Condition::Above { threshold, .. } => v > *threshold,
            Condition::Below { threshold, .. } => v < *threshold,
            Condition::Nearer {
                positive, negative, ..
            } => (v - positive).abs() < (v - negative).abs(),
        }
    }
}

/// Label is `+1` iff every condition holds, `-1` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub all_of: Vec<Condition>,
}

/// Maps one attribute linearly onto a numeric scale that is then bucketed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrdinalRule {
    pub attribute: String,
    pub value_at_min: f64,
    pub value_at_max: f64,
    pub brackets: BracketSpec,
}

/// Colour endpoints for the flower renderer; attributes interpolate between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub petal: [[f64; 3]; 2],
    pub disc: [[f64; 3]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub id: String,
    pub kind: SceneKind,
    pub attributes: Vec<AttributeSpec>,
    pub label: LabelRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<OrdinalRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<Palette>,
}

impl SceneSpec {
    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeSpec> {
        Ok(&self.attributes[self.attribute_index(name)?])
    }

    /// Attributes referenced by the label rule.
    pub fn class_attributes(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.label.all_of.iter().map(|c| c.attribute()).collect();
        names.dedup();
        names
    }

    pub fn confounder_index(&self) -> Option<usize> {
        self.confounder
            .as_deref()
            .and_then(|c| self.attribute_index(c).ok())
    }

    /// Checks the table against a generator geometry.
    pub fn validate(&self, layers: usize, style_dim: usize) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(format!("scenario `{}`: {msg}", self.id)));
        if self.attributes.len() > TANGENTS {
            return cfg(format!("at most {TANGENTS} attributes are supported"));
        }
        for (i, a) in self.attributes.iter().enumerate() {
            if self.attributes[..i].iter().any(|b| b.name == a.name) {
                return cfg(format!("attribute `{}` declared twice", a.name));
            }
            if a.layer == 0 || a.layer > layers {
                return cfg(format!(
                    "attribute `{}` on layer {} of {layers}",
                    a.name, a.layer
                ));
            }
            if a.component >= style_dim {
                return cfg(format!(
                    "attribute `{}` reads component {} of a {style_dim}-dimensional style",
                    a.name, a.component
                ));
            }
            if !(a.min < a.max) {
                return cfg(format!("attribute `{}` has an empty range", a.name));
            }
            if let Some(v) = a.frozen {
                if !a.contains(v) {
                    return cfg(format!("attribute `{}` frozen outside its range", a.name));
                }
            }
        }
        for role in self.kind.roles() {
            if self.attribute_index(role).is_err() {
                return cfg(format!("renderer attribute `{role}` is missing"));
            }
        }
        if self.label.all_of.is_empty() {
            return cfg("label rule has no conditions".into());
        }
        for c in &self.label.all_of {
            if self.attribute_index(c.attribute()).is_err() {
                return cfg(format!(
                    "label rule references unknown attribute `{}`",
                    c.attribute()
                ));
            }
        }
        if let Some(c) = &self.confounder {
            if self.attribute_index(c).is_err() {
                return cfg(format!("unknown confounder `{c}`"));
            }
        }
        if let Some(o) = &self.ordinal {
            if self.attribute_index(&o.attribute).is_err() {
                return cfg(format!(
                    "ordinal rule references unknown attribute `{}`",
                    o.attribute
                ));
            }
            o.brackets.validate()?;
        }
        if self.kind == SceneKind::Flowers && self.palette.is_none() {
            return cfg("flower scenarios need a palette".into());
        }
        Ok(())
    }

    /// Binary ground-truth label of a parameter set.
    pub fn label_of(&self, params: &SceneParams) -> i8 {
        let all = self.label.all_of.iter().all(|c| {
            let i = self
                .attribute_index(c.attribute())
                .expect("label rule validated against the table");
            c.holds(params.values()[i])
        });
        if all {
            1
        } else {
            -1
        }
    }

    /// Ordinal bracket of a parameter set, when the scenario defines one.
    pub fn bracket_of(&self, params: &SceneParams) -> Option<usize> {
        let o = self.ordinal.as_ref()?;
        let i = self.attribute_index(&o.attribute).ok()?;
        let t = self.attributes[i].normalized(params.values()[i]);
        let v = o.value_at_min + (o.value_at_max - o.value_at_min) * t;
        Some(o.brackets.index_of(v))
    }

    /// Copy with one attribute pinned to a constant.
    pub fn with_frozen(&self, name: &str, value: f64) -> Result<SceneSpec> {
        let mut s = self.clone();
        let i = s.attribute_index(name)?;
        if !s.attributes[i].contains(value) {
            return Err(Error::OutOfDomain(format!(
                "{value} outside the range of `{name}`"
            )));
        }
        s.attributes[i].frozen = Some(value);
        Ok(s)
    }
}

/// Renderer parameters, one value per attribute in table order.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    values: Vec<f64>,
}

impl SceneParams {
    pub fn new(spec: &SceneSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.attributes.len() {
            return Err(Error::dims(
                "scene parameters",
                spec.attributes.len(),
                values.len(),
            ));
        }
        for (a, v) in spec.attributes.iter().zip(&values) {
            if !a.contains(*v) {
                return Err(Error::OutOfDomain(format!(
                    "attribute `{}` = {v} outside [{}, {}]",
                    a.name, a.min, a.max
                )));
            }
        }
        Ok(Self { values })
    }

    pub(crate) fn from_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn midpoints(spec: &SceneSpec) -> Self {
        Self {
            values: spec
                .attributes
                .iter()
                .map(|a| a.frozen.unwrap_or(a.midpoint()))
                .collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, spec: &SceneSpec, name: &str) -> Result<f64> {
        Ok(self.values[spec.attribute_index(name)?])
    }

    pub fn set(&mut self, spec: &SceneSpec, name: &str, v: f64) -> Result<()> {
        let i = spec.attribute_index(name)?;
        if !spec.attributes[i].contains(v) {
            return Err(Error::OutOfDomain(format!(
                "{v} outside the range of `{name}`"
            )));
        }
        self.values[i] = v;
        Ok(())
    }

    pub fn to_map(&self, spec: &SceneSpec) -> BTreeMap<String, f64> {
        spec.attributes
            .iter()
            .zip(&self.values)
            .map(|(a, v)| (a.name.clone(), *v))
            .collect()
    }

    pub fn from_map(spec: &SceneSpec, map: &BTreeMap<String, f64>) -> Result<Self> {
        let values = spec
            .attributes
            .iter()
            .map(|a| {
                map.get(&a.name)
                    .copied()
                    .ok_or_else(|| Error::UnknownAttribute(a.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, values)
    }
}

fn table(rows: &[(&str, usize, f64, f64)]) -> Vec<AttributeSpec> {
    rows.iter()
        .enumerate()
        .map(|(c, &(name, layer, min, max))| AttributeSpec::new(name, layer, min, max, c))
        .collect()
}

/// Smile-detection analogue: the label is the sign of the mouth curvature,
/// makeup tint is the default plantable confounder.
pub fn toy_faces() -> SceneSpec {
    SceneSpec {
        id: "toy-faces".into(),
        kind: SceneKind::Faces,
        attributes: table(&[
            ("pos_x", 1, -2.5, 2.5),
            ("pos_y", 1, -2.5, 2.5),
            ("head_scale", 2, 0.9, 1.1),
            ("tilt", 2, -14.0, 14.0),
            ("head_aspect", 2, 0.88, 1.12),
            ("mouth_curvature", 3, -1.0, 1.0),
            ("eye_size", 4, 0.8, 1.25),
            ("hair_length", 4, 0.0, 1.0),
            ("skin_tone", 5, 0.0, 1.0),
            ("hair_color", 5, 0.0, 1.0),
            ("makeup_tint", 6, -1.0, 1.0),
            ("background", 6, 0.0, 1.0),
        ]),
        label: LabelRule {
            all_of: vec![Condition::Above {
                attribute: "mouth_curvature".into(),
                threshold: 0.0,
            }],
        },
        confounder: Some("makeup_tint".into()),
        ordinal: Some(OrdinalRule {
            // Larger eyes read as younger.
            attribute: "eye_size".into(),
            value_at_min: 19.0,
            value_at_max: 0.0,
            brackets: BracketSpec::age_defaults(),
        }),
        palette: None,
    }
}

fn flower_table() -> Vec<AttributeSpec> {
    table(&[
        ("pos_x", 1, -1.5, 1.5),
        ("pos_y", 1, -1.5, 1.5),
        ("scale", 2, 0.92, 1.08),
        ("rotation", 2, -12.0, 12.0),
        ("petal_count", 3, 5.0, 11.0),
        ("petal_length", 3, 18.0, 26.0),
        ("disc_radius", 4, 4.0, 14.0),
        ("petal_width", 4, 0.35, 0.75),
        ("petal_shade", 5, 0.0, 1.0),
        ("disc_darkness", 5, 0.0, 1.0),
        ("background", 6, 0.0, 1.0),
        ("background_hue", 6, 0.0, 1.0),
    ])
}

/// White-petalled versus orange-petalled flowers; the label depends only on
/// petal colour, background brightness is the default confounder.
pub fn toy_flowers_a() -> SceneSpec {
    SceneSpec {
        id: "toy-flowers-a".into(),
        kind: SceneKind::Flowers,
        attributes: flower_table(),
        label: LabelRule {
            all_of: vec![Condition::Nearer {
                attribute: "petal_shade".into(),
                positive: 1.0,
                negative: 0.0,
            }],
        },
        confounder: Some("background".into()),
        ordinal: None,
        palette: Some(Palette {
            petal: [[0.95, 0.48, 0.08], [0.97, 0.96, 0.93]],
            disc: [[0.98, 0.82, 0.25], [0.72, 0.52, 0.10]],
        }),
    }
}

/// Small dark disc (positive) versus large or light disc (negative); petal
/// shade varies over yellows but plays no part in the label. Thresholds put
/// each condition at probability √½ so classes are balanced.
pub fn toy_flowers_b() -> SceneSpec {
    let q = std::f64::consts::FRAC_1_SQRT_2;
    SceneSpec {
        id: "toy-flowers-b".into(),
        kind: SceneKind::Flowers,
        attributes: flower_table(),
        label: LabelRule {
            all_of: vec![
                Condition::Below {
                    attribute: "disc_radius".into(),
                    threshold: 4.0 + 10.0 * q,
                },
                Condition::Above {
                    attribute: "disc_darkness".into(),
                    threshold: 1.0 - q,
                },
            ],
        },
        confounder: Some("background".into()),
        ordinal: None,
        palette: Some(Palette {
            petal: [[0.93, 0.70, 0.04], [1.0, 0.93, 0.40]],
            disc: [[0.66, 0.45, 0.14], [0.07, 0.045, 0.03]],
        }),
    }
}

pub fn builtin_scenarios() -> Vec<SceneSpec> {
    vec![toy_faces(), toy_flowers_a(), toy_flowers_b()]
}
