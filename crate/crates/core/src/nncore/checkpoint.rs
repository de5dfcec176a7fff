//! Checkpoint container.
//!
//! Layout: the magic line `GAMFQ-CKPT`, one line of JSON header, then the
//! tensors of the header's manifest as little-endian `f64` arrays, back to
//! back, in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParamSpec, Tensor};

pub const CHECKPOINT_MAGIC: &str = "GAMFQ-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub scenario_hash: String,
    /// Hyperparameter record of the run that produced the checkpoint.
    pub hyperparameters: serde_json::Value,
    /// Free-form extension (learner kind, schedule position, buffer stats).
    pub extra: serde_json::Value,
    pub manifest: Vec<ParamSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>, NnError> {
        if self.header.manifest.len() != self.tensors.len() {
            return Err(NnError::Checkpoint("manifest and tensor count differ".into()));
        }
        for (spec, t) in self.header.manifest.iter().zip(&self.tensors) {
            if spec.shape != t.shape() {
                return Err(NnError::Checkpoint(format!("{}: manifest shape disagrees with tensor", spec.name)));
            }
        }
        let header = serde_json::to_string(&self.header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let payload: usize = self.tensors.iter().map(Tensor::len).sum();
        let mut out = Vec::with_capacity(CHECKPOINT_MAGIC.len() + header.len() + 2 + payload * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(header.as_bytes());
        out.push(b'\n');
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        let magic_end = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing magic line"))?;
        if &bytes[..magic_end] != CHECKPOINT_MAGIC.as_bytes() {
            return Err(bad("not a checkpoint file"));
        }
        let rest = &bytes[magic_end + 1..];
        let header_end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&rest[..header_end]).map_err(|e| NnError::Checkpoint(format!("header: {e}")))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_VERSION})",
                header.format_version
            )));
        }
        let mut payload = &rest[header_end + 1..];
        let mut tensors = Vec::with_capacity(header.manifest.len());
        for spec in &header.manifest {
            let n = spec.shape[0] * spec.shape[1];
            if payload.len() < n * 8 {
                return Err(NnError::Checkpoint(format!("payload truncated at {}", spec.name)));
            }
            let data = payload[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            payload = &payload[n * 8..];
            tensors.push(Tensor::from_vec(spec.shape[0], spec.shape[1], data)?);
        }
        if !payload.is_empty() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.header
            .manifest
            .iter()
            .position(|s| s.name == name)
            .map(|i| &self.tensors[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                format_version: CHECKPOINT_VERSION,
                scenario_hash: "abc".into(),
                hyperparameters: serde_json::json!({"lr": 1e-4, "gamma": 0.95}),
                extra: serde_json::json!({"kind": "gamfq"}),
                manifest: vec![
                    ParamSpec { name: "a".into(), shape: [2, 2] },
                    ParamSpec { name: "b".into(), shape: [1, 3] },
                ],
            },
            tensors: vec![
                Tensor::from_vec(2, 2, vec![1.0, -0.1, 1e-300, 3.5]).unwrap(),
                Tensor::row(&[0.1, 0.2, 0.3]),
            ],
        }
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn rejects_wrong_version_and_truncation() {
        let mut c = sample();
        c.header.format_version = 99;
        let bytes = c.to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes).is_err());

        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"nope\n{}\n").is_err());
    }
}
