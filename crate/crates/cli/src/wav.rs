//! RIFF/WAVE reader for PCM 16-bit little-endian mono audio.

use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Wav {
    pub sample_rate: u32,
    /// Samples mapped to floats by `v / 32768`.
    pub samples: Vec<f64>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, field: &'static str, msg: impl Into<String>) -> CliError {
        CliError::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            field,
            msg: msg.into(),
        }
    }

    fn slice(&self, at: usize, n: usize, field: &'static str) -> CliResult<&[u8]> {
        at.checked_add(n)
            .and_then(|end| self.bytes.get(at..end))
            .ok_or_else(|| self.err(at, field, format!("truncated: need {n} bytes")))
    }

    fn u16(&self, at: usize, field: &'static str) -> CliResult<u16> {
        Ok(u16::from_le_bytes(
            self.slice(at, 2, field)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&self, at: usize, field: &'static str) -> CliResult<u32> {
        Ok(u32::from_le_bytes(
            self.slice(at, 4, field)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> CliResult<Wav> {
    let c = Cursor { bytes, path };
    if c.slice(0, 4, "RIFF id")? != b"RIFF" {
        return Err(c.err(0, "RIFF id", "expected `RIFF`"));
    }
    c.u32(4, "RIFF size")?;
    if c.slice(8, 4, "WAVE id")? != b"WAVE" {
        return Err(c.err(8, "WAVE id", "expected `WAVE`"));
    }

    let mut pos = 12;
    let mut sample_rate = None;
    while pos < bytes.len() {
        let id = c.slice(pos, 4, "chunk id")?;
        let size = c.u32(pos + 4, "chunk size")? as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(c.err(pos + 4, "fmt size", format!("{size} < 16")));
                }
                let format = c.u16(body, "audio format")?;
                if format != 1 {
                    return Err(c.err(body, "audio format", format!("{format}, expected 1 (PCM)")));
                }
                let channels = c.u16(body + 2, "channels")?;
                if channels != 1 {
                    return Err(c.err(
                        body + 2,
                        "channels",
                        format!("{channels} channels, expected mono"),
                    ));
                }
                let rate = c.u32(body + 4, "sample rate")?;
                if rate == 0 {
                    return Err(c.err(body + 4, "sample rate", "zero"));
                }
                let block_align = c.u16(body + 12, "block align")?;
                if block_align != 2 {
                    return Err(c.err(
                        body + 12,
                        "block align",
                        format!("{block_align}, expected 2"),
                    ));
                }
                let bits = c.u16(body + 14, "bits per sample")?;
                if bits != 16 {
                    return Err(c.err(
                        body + 14,
                        "bits per sample",
                        format!("{bits}, expected 16"),
                    ));
                }
                sample_rate = Some(rate);
            }
            b"data" => {
                let Some(sample_rate) = sample_rate else {
                    return Err(c.err(pos, "data", "data chunk before fmt chunk"));
                };
                if !size.is_multiple_of(2) {
                    return Err(c.err(
                        pos + 4,
                        "data size",
                        format!("{size} is not a whole number of samples"),
                    ));
                }
                let raw = c.slice(body, size, "data")?;
                let samples = raw
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                    .collect();
                return Ok(Wav {
                    sample_rate,
                    samples,
                });
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = body + size + size % 2;
    }
    Err(c.err(bytes.len(), "data", "no data chunk"))
}

pub fn read(path: &Path) -> CliResult<Wav> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes, path)
}

/// Canonical 44-byte-header PCM16 mono file.
pub fn encode(sample_rate: u32, samples: &[i16]) -> Vec<u8> {
    let data_len = 2 * samples.len() as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(2 * sample_rate).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
