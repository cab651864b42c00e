//! Model files: 8-byte magic, little-endian `u32` version, `u64` header
//! length, a JSON header, then every weight and bias as little-endian `f64`
//! in layer order (weights row-major before biases).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, ClassifierModel, Dense, Normalization};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPMODEL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    scenario: String,
    architecture: Architecture,
    normalization: Normalization,
}

pub fn to_bytes(model: &ClassifierModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        scenario: model.scenario.clone(),
        architecture: model.architecture.clone(),
        normalization: model.normalization,
    })?;
    let count: usize = model
        .layers
        .iter()
        .map(|l| l.weights.len() + l.bias.len())
        .sum();
    let mut out = Vec::with_capacity(20 + header.len() + 8 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for l in &model.layers {
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format("truncated file".into()));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<ClassifierModel> {
    if take(&mut bytes, 8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::Format("header too large".into()))?;
    let header: Header = serde_json::from_slice(take(&mut bytes, len)?)?;
    header.architecture.validate()?;
    let mut read = |n: usize| -> Result<Vec<f64>> {
        Ok(take(&mut bytes, n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let mut layers = Vec::new();
    for (inputs, outputs) in header.architecture.layer_shapes() {
        let weights = read(inputs * outputs)?;
        let bias = read(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if !bytes.is_empty() {
        return Err(Error::Format("trailing bytes".into()));
    }
    Ok(ClassifierModel {
        scenario: header.scenario,
        architecture: header.architecture,
        normalization: header.normalization,
        layers,
    })
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    from_bytes(&fs::read(path)?)
}
