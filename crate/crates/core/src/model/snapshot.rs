//! Parameter snapshots: a binary tensor container plus a TOML sidecar.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic  8 bytes "HTLSNP\0\x01"
//! count  u32
//! count × { name_len u16, name utf-8, ndim u8, dims u64[ndim], data f64[prod(dims)] }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DeepConvLstm, LayerGroup, ModelError, ModelSpec};

const MAGIC: &[u8; 8] = b"HTLSNP\0\x01";
const MAX_NDIM: u8 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub method: String,
    pub split: String,
    pub iteration: usize,
    pub seed: u64,
}

impl Default for SnapshotMeta {
    fn default() -> Self {
        SnapshotMeta {
            method: "untrained".into(),
            split: String::new(),
            iteration: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl SnapshotTensor {
    pub fn group(&self) -> Result<LayerGroup, ModelError> {
        group_of(&self.name)
    }
}

/// Group implied by a qualified tensor name.
pub fn group_of(name: &str) -> Result<LayerGroup, ModelError> {
    let first = name.split('.').next().unwrap_or("");
    if first == "domain" {
        return Ok(LayerGroup::Domain);
    }
    if first.starts_with("recurrent") {
        return Ok(LayerGroup::Recurrent);
    }
    first.parse()
}

/// Immutable copy of a label network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSnapshot {
    pub spec: ModelSpec,
    pub spec_hash: String,
    pub meta: SnapshotMeta,
    pub tensors: Vec<SnapshotTensor>,
}

/// Sidecar written next to the tensor container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotManifest {
    pub spec_hash: String,
    pub groups: Vec<LayerGroup>,
    pub meta: SnapshotMeta,
    pub spec: ModelSpec,
}

impl ParameterSnapshot {
    pub fn groups(&self) -> Vec<LayerGroup> {
        let mut out: Vec<LayerGroup> = self.tensors.iter().filter_map(|t| t.group().ok()).collect();
        out.dedup();
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_tensors(&self.tensors)
    }

    pub fn manifest(&self) -> SnapshotManifest {
        SnapshotManifest {
            spec_hash: self.spec_hash.clone(),
            groups: self.groups(),
            meta: self.meta.clone(),
            spec: self.spec.clone(),
        }
    }

    /// Write `<path>` (tensors) and `<path>.meta.toml`.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.encode()).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        let side = sidecar_path(path);
        let text = toml::to_string(&self.manifest()).expect("manifest serializes");
        std::fs::write(&side, text).map_err(|e| ModelError::Io(side.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let side = sidecar_path(path);
        let text = std::fs::read_to_string(&side)
            .map_err(|e| ModelError::Io(side.display().to_string(), e))?;
        let manifest: SnapshotManifest =
            toml::from_str(&text).map_err(|e| ModelError::Snapshot(format!("sidecar: {e}")))?;
        if manifest.spec.hash() != manifest.spec_hash {
            return Err(ModelError::Snapshot("sidecar spec hash does not match its spec".into()));
        }
        let bytes = std::fs::read(path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        let tensors = decode_tensors(&bytes)?;
        Ok(ParameterSnapshot {
            spec: manifest.spec,
            spec_hash: manifest.spec_hash,
            meta: manifest.meta,
            tensors,
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

pub fn encode_tensors(tensors: &[SnapshotTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(t.shape.len() as u8);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<SnapshotTensor>, ModelError> {
    let bad = |m: &str| ModelError::Snapshot(m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], ModelError> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("truncated"))?;
        let out = &bytes[pos..end];
        pos = end;
        Ok(out)
    };
    if take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let count = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(len)?)
            .map_err(|_| bad("tensor name is not utf-8"))?
            .to_string();
        group_of(&name)?;
        let ndim = take(1)?[0];
        if ndim > MAX_NDIM {
            return Err(bad("too many dimensions"));
        }
        let mut shape = Vec::with_capacity(ndim as usize);
        let mut numel = 1usize;
        for _ in 0..ndim {
            let d = usize::try_from(u64::from_le_bytes(take(8)?.try_into().unwrap()))
                .map_err(|_| bad("dimension overflow"))?;
            numel = numel.checked_mul(d).ok_or_else(|| bad("size overflow"))?;
            shape.push(d);
        }
        let raw = take(numel.checked_mul(8).ok_or_else(|| bad("size overflow"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(SnapshotTensor { name, shape, data });
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

impl DeepConvLstm {
    pub fn snapshot(&self, meta: SnapshotMeta) -> ParameterSnapshot {
        ParameterSnapshot {
            spec: self.spec().clone(),
            spec_hash: self.spec().hash(),
            meta,
            tensors: self
                .params()
                .tensors()
                .into_iter()
                .map(|t| SnapshotTensor {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        }
    }

    /// Copy the named groups from `snap`. With a matching spec hash any
    /// groups may be restored; otherwise each requested group must match
    /// tensor-for-tensor in name and shape.
    pub fn restore(&mut self, snap: &ParameterSnapshot, groups: &[LayerGroup]) -> Result<(), ModelError> {
        let known = self.spec().layer_groups();
        if let Some(g) = groups.iter().find(|g| !known.contains(g)) {
            return Err(ModelError::UnknownGroup(g.to_string()));
        }
        let current: Vec<(String, LayerGroup, Vec<usize>)> = self
            .params()
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.group, t.shape))
            .collect();
        for g in groups {
            let mine: Vec<_> = current.iter().filter(|(_, tg, _)| tg == g).collect();
            let theirs: Vec<&SnapshotTensor> = snap
                .tensors
                .iter()
                .filter(|t| t.group().ok() == Some(*g))
                .collect();
            let compatible = mine.len() == theirs.len()
                && mine
                    .iter()
                    .zip(&theirs)
                    .all(|((n, _, s), t)| *n == t.name && *s == t.shape && t.data.len() == s.iter().product::<usize>());
            if !compatible {
                return Err(ModelError::Incompatible(g.to_string()));
            }
        }
        for t in self.params_mut().tensors_mut() {
            if !groups.contains(&t.group) {
                continue;
            }
            let src = snap
                .tensors
                .iter()
                .find(|s| s.name == t.name)
                .expect("checked above");
            t.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}
