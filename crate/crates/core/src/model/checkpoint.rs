//! `CMCL1` checkpoint files.
//!
//! ```text
//! CMCL1
//! @dtype f64
//! @<key> <value>          metadata, any number
//! <name> <d0> [<d1> ...]  one line per tensor, in blob order
//!                         blank line
//! <little-endian blobs>
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::{HierModel, ModelDims, ModelError};
use crate::nn::Tensor;

const MAGIC: &str = "CMCL1";

/// Free-form `key value` metadata stored alongside the weights.
pub type CheckpointMeta = BTreeMap<String, String>;

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl HierModel {
    pub fn to_checkpoint_bytes(&self, meta: &CheckpointMeta) -> Result<Vec<u8>, ModelError> {
        let mut head = format!("{MAGIC}\n@dtype f64\n@dropout {}\n", self.dropout);
        for (k, v) in meta {
            if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') || k == "dtype" || k == "dropout" {
                return Err(bad(format!("unusable metadata key `{k}`")));
            }
            head.push_str(&format!("@{k} {v}\n"));
        }
        let names: Vec<&str> = super::param_names().map(|p| p.0).collect();
        let tensors = self.tensors();
        for (name, t) in names.iter().zip(&tensors) {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            head.push_str(&format!("{name} {}\n", dims.join(" ")));
        }
        head.push('\n');
        let mut out = head.into_bytes();
        for t in tensors {
            for v in t.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, CheckpointMeta), ModelError> {
        let header_end = bytes
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| bad("missing header terminator"))?;
        let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("header is not utf-8"))?;
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("bad magic"));
        }
        let mut meta = CheckpointMeta::new();
        let mut manifest: Vec<(String, Vec<usize>)> = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix('@') {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.insert(k.to_string(), v.to_string());
                continue;
            }
            let mut parts = line.split(' ');
            let name = parts.next().unwrap_or_default().to_string();
            let shape = parts
                .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad shape in `{line}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if shape.is_empty() {
                return Err(bad(format!("tensor `{name}` has no shape")));
            }
            manifest.push((name, shape));
        }
        let width = match meta.remove("dtype").as_deref() {
            Some("f64") => 8,
            Some("f32") => 4,
            other => return Err(bad(format!("unsupported dtype {other:?}"))),
        };
        let dropout = match meta.remove("dropout") {
            Some(v) => v.parse::<f64>().map_err(|_| bad("bad dropout"))?,
            None => super::DROPOUT,
        };

        let shape_of = |name: &str| {
            manifest
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, s)| s.as_slice())
                .ok_or_else(|| bad(format!("missing tensor `{name}`")))
        };
        let emb = shape_of("embedding")?;
        let w_h = shape_of("lstm1_fwd.w_h")?;
        let pos = shape_of("head_pos.b")?;
        let lang = shape_of("head_lang.b")?;
        if emb.len() != 2 || w_h.len() != 2 {
            return Err(bad("embedding and recurrent weights must be matrices"));
        }
        let dims = ModelDims {
            vocab: emb[0],
            emb: emb[1],
            hidden: w_h[1],
            n_pos: pos[0],
            n_lang: lang[0],
        };
        let mut model = HierModel::zeros(dims);
        model.dropout = dropout;
        if manifest.len() != super::PARAM_NAMES.len() {
            return Err(bad(format!(
                "expected {} tensors, manifest lists {}",
                super::PARAM_NAMES.len(),
                manifest.len()
            )));
        }

        let expected: usize = manifest.iter().map(|(_, s)| s.iter().product::<usize>()).sum::<usize>() * width;
        let blob = &bytes[header_end + 2..];
        if blob.len() != expected {
            return Err(bad(format!("expected {expected} bytes of weights, found {}", blob.len())));
        }

        let index: BTreeMap<&str, usize> = super::param_names().enumerate().map(|(i, p)| (p.0, i)).collect();
        let mut offset = 0;
        let mut tensors = model.tensors_mut();
        let mut seen = vec![false; tensors.len()];
        for (name, shape) in &manifest {
            let i = *index.get(name.as_str()).ok_or_else(|| bad(format!("unknown tensor `{name}`")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(bad(format!("duplicate tensor `{name}`")));
            }
            let t: &mut Tensor = tensors[i];
            if t.shape() != shape.as_slice() {
                return Err(bad(format!(
                    "tensor `{name}` has shape {shape:?}, expected {:?}",
                    t.shape()
                )));
            }
            for v in t.values_mut() {
                let chunk = &blob[offset..offset + width];
                *v = if width == 8 {
                    f64::from_le_bytes(chunk.try_into().expect("8 bytes"))
                } else {
                    f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes")))
                };
                offset += width;
            }
        }
        Ok((model, meta))
    }
}

pub fn save_checkpoint(path: &Path, model: &HierModel, meta: &CheckpointMeta) -> Result<(), ModelError> {
    std::fs::write(path, model.to_checkpoint_bytes(meta)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(HierModel, CheckpointMeta), ModelError> {
    HierModel::from_checkpoint_bytes(&std::fs::read(path)?)
}
