//! The AFEN binary container for model parameters and centroid models.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `AFEN` |
//! | 4 | 2 | format version (u16, currently 1) |
//! | 6 | 4 | metadata length `M` (u32) |
//! | 10 | M | metadata, UTF-8 JSON object |
//! | 10+M | 4 | array count `N` (u32) |
//!
//! then `N` arrays, each:
//!
//! | size | field |
//! |---|---|
//! | 2 | name length `L` (u16) |
//! | L | name, UTF-8 |
//! | 1 | rank (u8, always 2) |
//! | 8 * rank | dimensions (u64 each, rows then columns) |
//! | 8 * rows * cols | values, f64 row-major |
//!
//! Nothing may follow the last array.

use std::path::Path;

use afen_core::Matrix;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const MAGIC: [u8; 4] = *b"AFEN";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub meta: Map<String, Value>,
    pub arrays: Vec<(String, Matrix)>,
}

impl Container {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn push(&mut self, name: impl Into<String>, m: Matrix) {
        self.arrays.push((name.into(), m));
    }

    pub fn encode(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("json map serializes");
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, m) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(2);
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self, CliError> {
        let mut r = Reader {
            bytes,
            pos: 0,
            path,
        };
        if r.take(4, "magic")? != MAGIC {
            return Err(r.error(0, "magic", "not an AFEN container"));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(r.error(4, "version", format!("unsupported version {version}")));
        }
        let meta_len = r.u32("metadata length")? as usize;
        let start = r.pos;
        let meta = match serde_json::from_slice(r.take(meta_len, "metadata")?) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(r.error(start, "metadata", "not a JSON object")),
            Err(e) => return Err(r.error(start, "metadata", e.to_string())),
        };
        let count = r.u32("array count")?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| r.error(at, "name", "invalid UTF-8"))?
                .to_owned();
            let at = r.pos;
            let rank = r.take(1, "rank")?[0];
            if rank != 2 {
                return Err(r.error(at, "rank", format!("rank {rank}, expected 2")));
            }
            let at = r.pos;
            let rows = r.u64("rows")? as usize;
            let cols = r.u64("cols")? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| {
                    r.error(at, "dimensions", format!("{rows} x {cols} is too large"))
                })?;
            let raw = r.take(8 * n, "values")?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            arrays.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        if r.pos != bytes.len() {
            return Err(r.error(r.pos, "end", "trailing bytes after the last array"));
        }
        Ok(Self { meta, arrays })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.encode()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn error(&self, offset: usize, field: &'static str, msg: impl Into<String>) -> CliError {
        CliError::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            field,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.error(self.pos, field, format!("truncated: need {n} bytes")));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(
            self.take(2, field)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(
            self.take(4, field)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(
            self.take(8, field)?.try_into().expect("8 bytes"),
        ))
    }
}
