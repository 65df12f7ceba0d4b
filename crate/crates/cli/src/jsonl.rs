//! JSON-Lines annotation files: one object per frame.

use std::fmt::Write as _;
use std::path::Path;

use afen_core::dataset::LabeledFrame;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub video_id: String,
    pub frame: u32,
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal: Option<f64>,
    /// 0/1 per action unit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub au: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<usize>,
    /// Model inputs for training and model-based evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl FrameRecord {
    pub fn key(&self) -> (&str, u32) {
        (&self.video_id, self.frame)
    }

    pub fn to_frame(&self) -> Result<LabeledFrame, String> {
        let aus = match &self.au {
            Some(v) => Some(
                v.iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        _ => Err(format!("au entries must be 0 or 1, found {b}")),
                    })
                    .collect::<Result<Vec<bool>, String>>()?,
            ),
            None => None,
        };
        let frame = LabeledFrame {
            video: self.video_id.clone(),
            frame: self.frame,
            subject: self.subject_id.clone(),
            valence: self.valence,
            arousal: self.arousal,
            aus,
            expr: self.expr,
        };
        frame.validate().map_err(|e| e.to_string())?;
        Ok(frame)
    }

    pub fn from_frame(f: &LabeledFrame) -> Self {
        Self {
            video_id: f.video.clone(),
            frame: f.frame,
            subject_id: f.subject.clone(),
            annotator_id: None,
            valence: f.valence,
            arousal: f.arousal,
            au: f
                .aus
                .as_ref()
                .map(|v| v.iter().map(|&b| u8::from(b)).collect()),
            expr: f.expr,
            features: None,
        }
    }
}

/// A parsed record and its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub line: usize,
    pub record: FrameRecord,
}

pub fn parse(text: &str, path: &Path) -> CliResult<Vec<Located>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: FrameRecord =
            serde_json::from_str(line).map_err(|e| CliError::line(path, i + 1, e.to_string()))?;
        record
            .to_frame()
            .map_err(|msg| CliError::line(path, i + 1, msg))?;
        out.push(Located {
            line: i + 1,
            record,
        });
    }
    Ok(out)
}

pub fn read(path: &Path) -> CliResult<Vec<Located>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

/// Records as validated frames.
pub fn read_frames(path: &Path) -> CliResult<Vec<LabeledFrame>> {
    Ok(read(path)?
        .iter()
        .map(|l| l.record.to_frame().expect("validated in parse"))
        .collect())
}

pub fn render(records: &[FrameRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "{}",
            serde_json::to_string(r).expect("record serializes")
        );
    }
    s
}
