use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SceneParams, SceneSpec};
use crate::codec;
use crate::error::{Error, Result};
use crate::generator::{Generator, ImageBuffer};
use crate::numeric::Rng;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    /// `-1` or `+1`.
    Binary(i8),
    /// Index into the scenario's bracket list.
    Bracket(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: ImageBuffer,
    pub label: Label,
    pub params: SceneParams,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub scenario: String,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(&self.val)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_val: usize,
    /// Coupling between label and confounder: sign agreement occurs with
    /// probability `(1 + rho) / 2`.
    pub confound_rho: f64,
    /// Overrides the scenario's default confounder.
    pub confounder: Option<String>,
    /// Store ordinal bracket labels instead of binary ones.
    pub ordinal: bool,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_train: 4096,
            n_val: 1024,
            confound_rho: 0.0,
            confounder: None,
            ordinal: false,
            seed: 0,
        }
    }
}

/// Draws one parameter set: every free attribute uniform over its range,
/// except the confounder whose side of the midpoint agrees with the label
/// with probability `(1 + rho) / 2`. Its distance from the midpoint stays
/// uniform, so its marginal does not depend on `rho` when labels are balanced.
pub fn sample_params(
    scene: &SceneSpec,
    confound_rho: f64,
    confounder: Option<usize>,
    rng: &mut Rng,
) -> SceneParams {
    let mut values: Vec<f64> = scene
        .attributes
        .iter()
        .map(|a| match a.frozen {
            Some(v) => v,
            None => rng.uniform_range(a.min, a.max),
        })
        .collect();
    if let Some(ci) = confounder {
        let a = &scene.attributes[ci];
        if a.frozen.is_none() {
            let label = scene.label_of(&SceneParams::from_unchecked(values.clone()));
            let agree = rng.bernoulli(0.5 * (1.0 + confound_rho));
            let side = if agree {
                f64::from(label)
            } else {
                -f64::from(label)
            };
            let offset = rng.uniform() * 0.5 * (a.max - a.min);
            values[ci] = (a.midpoint() + side * offset).clamp(a.min, a.max);
        }
    }
    SceneParams::from_unchecked(values)
}

pub fn make_dataset(
    generator: &Generator,
    scene: &SceneSpec,
    cfg: &DatasetConfig,
) -> Result<LabeledDataset> {
    scene.validate(generator.layers(), generator.style_dim())?;
    if !(0.0..=1.0).contains(&cfg.confound_rho) {
        return Err(Error::OutOfDomain(format!(
            "confound_rho {} outside [0, 1]",
            cfg.confound_rho
        )));
    }
    if cfg.n_train == 0 {
        return Err(Error::InvalidArgument("n_train must be at least 1".into()));
    }
    if cfg.ordinal && scene.ordinal.is_none() {
        return Err(Error::InvalidArgument(format!(
            "scenario `{}` has no ordinal rule",
            scene.id
        )));
    }
    let confounder = match &cfg.confounder {
        Some(name) => Some(scene.attribute_index(name)?),
        None => scene.confounder_index(),
    };
    if let Some(ci) = confounder {
        if scene
            .class_attributes()
            .contains(&scene.attributes[ci].name.as_str())
        {
            return Err(Error::InvalidArgument(
                "the confounder cannot be a class-defining attribute".into(),
            ));
        }
    }
    let base = Rng::new(cfg.seed).derive("dataset");
    let total = cfg.n_train + cfg.n_val;
    let samples = par::map_indexed(total, |i| {
        let mut rng = base.derive_index(i as u64);
        let params = sample_params(scene, cfg.confound_rho, confounder, &mut rng);
        let label = if cfg.ordinal {
            Label::Bracket(scene.bracket_of(&params).expect("ordinal rule checked"))
        } else {
            Label::Binary(scene.label_of(&params))
        };
        let image = generator.render_unchecked(params.values(), scene);
        let split = if i < cfg.n_train {
            Split::Train
        } else {
            Split::Val
        };
        Sample {
            image,
            label,
            params,
            split,
        }
    });
    let mut train = samples;
    let val = train.split_off(cfg.n_train);
    Ok(LabeledDataset {
        scenario: scene.id.clone(),
        train,
        val,
    })
}

/// Fraction of samples whose confounder lies on the side of its midpoint
/// matching the ground-truth binary label.
pub fn confounder_agreement(
    dataset: &LabeledDataset,
    scene: &SceneSpec,
    confounder: &str,
) -> Result<f64> {
    let ci = scene.attribute_index(confounder)?;
    let a = &scene.attributes[ci];
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let agree = dataset
        .samples()
        .filter(|s| {
            let label = scene.label_of(&s.params);
            let side = if s.params.values()[ci] > a.midpoint() {
                1
            } else {
                -1
            };
            side == label
        })
        .count();
    Ok(agree as f64 / n as f64)
}

/// One manifest line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub file: String,
    pub scenario: String,
    pub split: Split,
    pub label: Label,
    pub params: BTreeMap<String, f64>,
}

pub const MANIFEST: &str = "manifest.jsonl";

/// Writes one PNG per sample plus `manifest.jsonl` into `dir`.
pub fn export_dataset(
    dataset: &LabeledDataset,
    scene: &SceneSpec,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut out = BufWriter::new(fs::File::create(dir.join(MANIFEST))?);
    for (split, samples) in [(Split::Train, &dataset.train), (Split::Val, &dataset.val)] {
        let prefix = match split {
            Split::Train => "train",
            Split::Val => "val",
        };
        for (i, s) in samples.iter().enumerate() {
            let file = format!("{prefix}_{i:05}.png");
            codec::save_png(&s.image, dir.join(&file))?;
            let rec = ManifestRecord {
                file,
                scenario: dataset.scenario.clone(),
                split,
                label: s.label,
                params: s.params.to_map(scene),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a directory written by [`export_dataset`]. Images come back
/// 8-bit quantized.
pub fn import_dataset(dir: impl AsRef<Path>, scene: &SceneSpec) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let reader = BufReader::new(fs::File::open(dir.join(MANIFEST))?);
    let mut ds = LabeledDataset {
        scenario: scene.id.clone(),
        train: Vec::new(),
        val: Vec::new(),
    };
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)?;
        if rec.scenario != scene.id {
            return Err(Error::UnknownScenario(rec.scenario));
        }
        let sample = Sample {
            image: codec::load_png(dir.join(&rec.file))?,
            label: rec.label,
            params: SceneParams::from_map(scene, &rec.params)?,
            split: rec.split,
        };
        match rec.split {
            Split::Train => ds.train.push(sample),
            Split::Val => ds.val.push(sample),
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorGeometry;
    use crate::scenario::{toy_faces, toy_flowers_b};

    fn small(rho: f64, n: usize) -> DatasetConfig {
        DatasetConfig {
            n_train: n,
            n_val: 0,
            confound_rho: rho,
            seed: 11,
            ..Default::default()
        }
    }

    fn agreement(scene: &SceneSpec, rho: f64, n: usize) -> f64 {
        let ci = scene.confounder_index();
        let mid = scene.attributes[ci.unwrap()].midpoint();
        let base = Rng::new(5);
        let agree = (0..n)
            .filter(|&i| {
                let p = sample_params(scene, rho, ci, &mut base.derive_index(i as u64));
                let side = if p.values()[ci.unwrap()] > mid { 1 } else { -1 };
                side == scene.label_of(&p)
            })
            .count();
        agree as f64 / n as f64
    }

    #[test]
    fn independent_confounder_agrees_half_the_time() {
        let a = agreement(&toy_faces(), 0.0, 10_000);
        assert!((a - 0.5).abs() <= 0.02, "{a}");
    }

    #[test]
    fn strong_coupling_agrees_at_planted_rate() {
        let a = agreement(&toy_faces(), 0.95, 10_000);
        assert!((a - 0.975).abs() <= 0.01, "{a}");
    }

    #[test]
    fn confounder_marginal_does_not_depend_on_rho() {
        // Compare deciles of the confounder under rho = 0 and rho = 0.95.
        let scene = toy_faces();
        let ci = scene.confounder_index().unwrap();
        let hist = |rho: f64| {
            let mut h = [0usize; 10];
            let base = Rng::new(17);
            for i in 0..20_000u64 {
                let p = sample_params(&scene, rho, Some(ci), &mut base.derive_index(i));
                let t = scene.attributes[ci].normalized(p.values()[ci]);
                h[((t * 10.0) as usize).min(9)] += 1;
            }
            h
        };
        let (a, b) = (hist(0.0), hist(0.95));
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (*x as f64 / 20_000.0, *y as f64 / 20_000.0);
            assert!((x - y).abs() < 0.015, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn labels_recompute_from_params_and_images_rerender() {
        let gen = Generator::new(GeneratorGeometry::default()).unwrap();
        let scene = toy_faces();
        let ds = make_dataset(&gen, &scene, &small(0.3, 64)).unwrap();
        for s in ds.samples() {
            assert_eq!(s.label, Label::Binary(scene.label_of(&s.params)));
            assert_eq!(gen.render(&s.params, &scene).unwrap(), s.image);
        }
    }

    #[test]
    fn rejects_bad_rho_and_class_confounder() {
        let gen = Generator::new(GeneratorGeometry::default()).unwrap();
        let scene = toy_faces();
        assert!(make_dataset(&gen, &scene, &small(1.5, 4)).is_err());
        assert!(make_dataset(&gen, &scene, &small(-0.1, 4)).is_err());
        let cfg = DatasetConfig {
            confounder: Some("mouth_curvature".into()),
            ..small(0.5, 4)
        };
        assert!(make_dataset(&gen, &scene, &cfg).is_err());
    }

    #[test]
    fn flowers_b_labels_are_balanced() {
        let scene = toy_flowers_b();
        let base = Rng::new(2);
        let pos = (0..10_000u64)
            .filter(|&i| {
                scene.label_of(&sample_params(&scene, 0.0, None, &mut base.derive_index(i))) == 1
            })
            .count();
        assert!((pos as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn export_import_round_trip() {
        let gen = Generator::new(GeneratorGeometry::default()).unwrap();
        let scene = toy_faces();
        let cfg = DatasetConfig {
            n_train: 5,
            n_val: 3,
            ..small(0.9, 5)
        };
        let ds = make_dataset(&gen, &scene, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(&ds, &scene, dir.path()).unwrap();
        let back = import_dataset(dir.path(), &scene).unwrap();
        assert_eq!(back.train.len(), 5);
        assert_eq!(back.val.len(), 3);
        for (a, b) in ds.samples().zip(back.samples()) {
            assert_eq!(a.params, b.params);
            assert_eq!(a.label, b.label);
            assert_eq!(a.split, b.split);
            assert_eq!(codec::quantized(&a.image), b.image);
        }
        // A second export of the imported set is byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        export_dataset(&back, &scene, dir2.path()).unwrap();
        let m1 = fs::read(dir.path().join(MANIFEST)).unwrap();
        let m2 = fs::read(dir2.path().join(MANIFEST)).unwrap();
        assert_eq!(m1, m2);
        let p1 = fs::read(dir.path().join("val_00002.png")).unwrap();
        let p2 = fs::read(dir2.path().join("val_00002.png")).unwrap();
        assert_eq!(p1, p2);
    }
}
