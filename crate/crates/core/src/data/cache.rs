//! Binary window-set cache with a TOML sidecar.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic    8 bytes  "HTLWIN\0\x01"
//! length   u32
//! stride   u32
//! channels u32
//! count    u64
//! count × { label u16, domain u8, subject u32, run u8, start u64, values f64[length*channels] }
//! ```

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DataError, Domain, Result, RunId, Window, WindowOrigin, WindowSet, NULL_CLASS};

const MAGIC: &[u8; 8] = b"HTLWIN\0\x01";
const HEADER_LEN: usize = 8 + 4 * 3 + 8;
const RECORD_HEADER_LEN: usize = 2 + 1 + 4 + 1 + 8;
pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSidecar {
    pub format_version: u32,
    pub length: usize,
    pub stride: usize,
    pub channel_count: usize,
    pub window_count: usize,
    pub manifest_hash: String,
}

pub fn encode_window_set(set: &WindowSet) -> Vec<u8> {
    let per = RECORD_HEADER_LEN + set.length * set.channel_count * 8;
    let mut out = Vec::with_capacity(HEADER_LEN + per * set.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(set.length as u32).to_le_bytes());
    out.extend_from_slice(&(set.stride as u32).to_le_bytes());
    out.extend_from_slice(&(set.channel_count as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for w in &set.windows {
        out.extend_from_slice(&w.label.to_le_bytes());
        out.push(w.domain.index() as u8);
        out.extend_from_slice(&w.origin.subject_id.to_le_bytes());
        out.push(w.origin.run.code());
        out.extend_from_slice(&(w.origin.start as u64).to_le_bytes());
        for v in w.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DataError::Cache("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_window_set(bytes: &[u8]) -> Result<WindowSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(DataError::Cache("bad magic".into()));
    }
    let length = r.u32()? as usize;
    let stride = r.u32()? as usize;
    let channels = r.u32()? as usize;
    let count = r.u64()?;
    if length == 0 || stride == 0 || channels == 0 {
        return Err(DataError::Cache("zero window dimension".into()));
    }
    let cells = length
        .checked_mul(channels)
        .ok_or_else(|| DataError::Cache("window too large".into()))?;
    let expected = cells
        .checked_mul(8)
        .and_then(|v| v.checked_add(RECORD_HEADER_LEN))
        .and_then(|per| usize::try_from(count).ok()?.checked_mul(per))
        .and_then(|body| body.checked_add(HEADER_LEN))
        .ok_or_else(|| DataError::Cache("size overflow".into()))?;
    if expected != bytes.len() {
        return Err(DataError::Cache(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut set = WindowSet::empty(length, stride, channels);
    for _ in 0..count {
        let label = r.u16()?;
        if label == NULL_CLASS {
            return Err(DataError::Cache("null-labeled window".into()));
        }
        let domain = match r.u8()? {
            0 => Domain::Source,
            1 => Domain::Target,
            d => return Err(DataError::Cache(format!("unknown domain tag {d}"))),
        };
        let subject_id = r.u32()?;
        let run = RunId::from_code(r.u8()?);
        let start = usize::try_from(r.u64()?)
            .map_err(|_| DataError::Cache("start index overflow".into()))?;
        let raw = r.take(cells * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set.windows.push(Window {
            values: Array2::from_shape_vec((length, channels), values).expect("sized above"),
            label,
            domain,
            origin: WindowOrigin { subject_id, run, start },
        });
    }
    Ok(set)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write the cache file and its `<path>.meta.toml` sidecar.
pub fn write_window_cache(path: &Path, set: &WindowSet, manifest_hash: &str) -> Result<CacheSidecar> {
    let sidecar = CacheSidecar {
        format_version: CACHE_FORMAT_VERSION,
        length: set.length,
        stride: set.stride,
        channel_count: set.channel_count,
        window_count: set.len(),
        manifest_hash: manifest_hash.to_string(),
    };
    std::fs::write(path, encode_window_set(set)).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let text = toml::to_string(&sidecar).expect("sidecar serializes");
    std::fs::write(&side, text).map_err(io_err(&side))?;
    Ok(sidecar)
}

pub fn read_window_cache(path: &Path) -> Result<(WindowSet, CacheSidecar)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let sidecar: CacheSidecar =
        toml::from_str(&text).map_err(|e| DataError::Cache(format!("sidecar: {e}")))?;
    if sidecar.format_version != CACHE_FORMAT_VERSION {
        return Err(DataError::Cache(format!(
            "unsupported format version {}",
            sidecar.format_version
        )));
    }
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let set = decode_window_set(&bytes)?;
    if (set.length, set.stride, set.channel_count, set.len())
        != (sidecar.length, sidecar.stride, sidecar.channel_count, sidecar.window_count)
    {
        return Err(DataError::Cache("sidecar disagrees with cache contents".into()));
    }
    Ok((set, sidecar))
}
