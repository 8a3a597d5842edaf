//! JSON checkpoints: format version, layout and every tensor by name.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces the parameters bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkLayout, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    /// Free-form origin note, e.g. the hash of the experiment that wrote it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    layout: NetworkLayout,
    tensors: Vec<Tensor>,
}

impl NetworkParams {
    pub fn to_json(&self) -> String {
        self.checkpoint_json(None)
    }

    /// Checkpoint with an origin note; loading ignores the note.
    pub fn to_json_with_provenance(&self, provenance: &str) -> String {
        self.checkpoint_json(Some(provenance.to_string()))
    }

    fn checkpoint_json(&self, provenance: Option<String>) -> String {
        let mut values = self.values().iter().copied();
        let tensors = self
            .layout()
            .tensors()
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                Tensor {
                    name,
                    shape,
                    values: values.by_ref().take(len).collect(),
                }
            })
            .collect();
        let ck = Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            provenance,
            layout: self.layout().clone(),
            tensors,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::parse(
                origin,
                format!("unsupported checkpoint format {}", ck.format_version),
            ));
        }
        let expected = ck.layout.tensors();
        if expected.len() != ck.tensors.len() {
            return Err(Error::parse(origin, "tensor count does not match the layout"));
        }
        let mut values = Vec::with_capacity(ck.layout.param_count());
        for ((name, shape), t) in expected.iter().zip(&ck.tensors) {
            if *name != t.name || *shape != t.shape || t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::parse(
                    origin,
                    format!("tensor `{}` does not match layout entry `{name}` {shape:?}", t.name),
                ));
            }
            values.extend_from_slice(&t.values);
        }
        Self::from_values(ck.layout, values).map_err(|e| Error::parse(origin, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = NetworkParams::init(NetworkLayout::default_for(32), 17).unwrap();
        let back = NetworkParams::from_json(&p.to_json(), "mem").unwrap();
        assert_eq!(p.layout(), back.layout());
        assert!(p.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(p.to_json(), back.to_json());
        let tagged = p.to_json_with_provenance("run 3");
        assert!(tagged.contains("\"provenance\":\"run 3\""));
        assert_eq!(NetworkParams::from_json(&tagged, "mem").unwrap(), p);
    }

    #[test]
    fn rejects_tampered_files() {
        let p = NetworkParams::init(NetworkLayout::default_for(16), 1).unwrap();
        let json = p.to_json();
        let bad_version = json.replacen("\"format_version\":1", "\"format_version\":9", 1);
        assert!(NetworkParams::from_json(&bad_version, "x").is_err());
        let bad_name = json.replacen("conv0.weight", "conv9.weight", 1);
        assert!(NetworkParams::from_json(&bad_name, "x").is_err());
        assert!(NetworkParams::from_json("{", "x").is_err());
    }
}
