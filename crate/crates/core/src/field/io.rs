//! `gfld-1` field files: a JSON sidecar plus a raw little-endian f64 payload.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::GridField;
use crate::error::{Error, Result};

pub const FORMAT: &str = "gfld-1";

#[derive(Serialize, Deserialize, Debug)]
struct Sidecar {
    format: String,
    m: usize,
    n: usize,
    dims: Vec<usize>,
    origin: Vec<f64>,
    spacing: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mask: Option<Vec<bool>>,
    payload: String,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Payload path next to a sidecar: `name.json` → `name.bin`.
pub fn payload_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("bin")
}

pub fn write_field(field: &GridField, sidecar: &Path) -> Result<()> {
    let bin = payload_path(sidecar);
    let meta = Sidecar {
        format: FORMAT.into(),
        m: field.m(),
        n: field.n(),
        dims: field.dims().to_vec(),
        origin: field.origin().to_vec(),
        spacing: field.spacing(),
        mask: field.mask().map(|m| m.to_vec()),
        payload: bin
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(sidecar, json).map_err(|e| io_err(sidecar, e))?;
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| io_err(&bin, e))
}

pub fn read_field(sidecar: &Path) -> Result<GridField> {
    let text = fs::read_to_string(sidecar).map_err(|e| io_err(sidecar, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?;
    if meta.format != FORMAT {
        return Err(Error::Format(format!("unsupported format tag {:?}", meta.format)));
    }
    let bin = sidecar
        .parent()
        .map(|d| d.join(&meta.payload))
        .unwrap_or_else(|| PathBuf::from(&meta.payload));
    let bytes = fs::read(&bin).map_err(|e| io_err(&bin, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("payload {} is not a whole number of f64", bin.display())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let f = GridField::new(meta.m, meta.n, meta.dims, meta.origin, meta.spacing, values)?;
    match meta.mask {
        Some(mk) => f.with_mask(mk),
        None => Ok(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let f = GridField::from_fn(2, vec![5, 4], vec![-0.3, 0.1], 0.0137, |x, o| {
            o[0] = (x[0] * 1e3).sin() / 7.0;
            o[1] = x[1].exp() * 1e-300;
        })
        .unwrap();
        let mut mask = vec![true; 20];
        mask[3] = false;
        let f = f.with_mask(mask).unwrap();
        let path = dir.path().join("u.json");
        write_field(&f, &path).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(f, g);
        let bits = |h: &GridField| h.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&f), bits(&g));
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_field(Path::new("/nonexistent/x.json")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.json"));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = GridField::centered(1, 1, 1.0, 4).unwrap();
        let path = dir.path().join("t.json");
        write_field(&f, &path).unwrap();
        fs::write(payload_path(&path), [0u8; 12]).unwrap();
        assert!(read_field(&path).is_err());
    }
}
