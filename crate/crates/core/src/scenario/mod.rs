//! Scenario descriptions and labeled dataset generation with plantable
//! confounders.

mod dataset;
mod spec;

pub use dataset::{
    confounder_agreement, export_dataset, import_dataset, make_dataset, sample_params,
    DatasetConfig, Label, LabeledDataset, ManifestRecord, Sample, Split,
};
pub use spec::{
    builtin_scenarios, toy_faces, toy_flowers_a, toy_flowers_b, AttributeSpec, Condition,
    LabelRule, OrdinalRule, Palette, SceneKind, SceneParams, SceneSpec,
};

use crate::error::{Error, Result};

/// Looks up a scenario by id.
pub fn find_scenario<'a>(scenarios: &'a [SceneSpec], id: &str) -> Result<&'a SceneSpec> {
    scenarios
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownScenario(id.to_string()))
}

/// Ground-truth label of a parameter set under the scenario rule.
pub fn label_of(scene: &SceneSpec, params: &SceneParams) -> i8 {
    scene.label_of(params)
}
