//! Field dumps and hashed export directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::ByteReader;

const FIELD_MAGIC: &[u8; 4] = b"SDPF";
const FIELD_VERSION: u32 = 1;

/// Little-endian binary layout of a single field:
///
/// ```text
/// "SDPF" | version u32 | N u64 | L f64 | t f64 | N × f64
/// ```
pub fn field_to_bytes(field: &Field, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(32 + 8 * field.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n_points() as u64).to_le_bytes());
    out.extend_from_slice(&g.half_length().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`field_to_bytes`]; returns the field and its time stamp.
pub fn field_from_bytes(bytes: &[u8]) -> Result<(Field, f64)> {
    let mut r = ByteReader { bytes, pos: 0 };
    if r.take(4)? != FIELD_MAGIC {
        return Err(Error::Format("not a field dump".into()));
    }
    let version = r.u32()?;
    if version != FIELD_VERSION {
        return Err(Error::Format(format!("unsupported field dump version {version}")));
    }
    let n = r.u64()? as usize;
    let l = r.f64()?;
    let t = r.f64()?;
    let grid = Grid::new(l, n).map_err(|e| Error::Format(format!("field dump grid: {e}")))?;
    let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after field dump".into()));
    }
    let field = Field::new(grid, values).map_err(|e| Error::Format(format!("field dump values: {e}")))?;
    Ok((field, t))
}

pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    field_from_bytes(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Run manifest; serialized as TOML next to the files it lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub verdicts: BTreeMap<String, bool>,
    pub files: Vec<FileEntry>,
    pub config: toml::Table,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects files written into one directory and their hashes.
#[derive(Debug)]
pub struct Exporter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

impl Exporter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Exporter { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `bytes` to `name` (relative, `/`-separated) and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST_NAME || name.starts_with('/') || name.split('/').any(|p| p == "..") {
            return Err(Error::Usage(format!("invalid export name {name:?}")));
        }
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write(name, text.as_bytes())
    }

    pub fn write_field(&mut self, name: &str, field: &Field, t: f64) -> Result<()> {
        self.write(name, &field_to_bytes(field, t))
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Writes the manifest; files are listed in name order.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = self.files;
        let text = toml::to_string(&manifest).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
