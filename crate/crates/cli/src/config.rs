//! JSON run configuration. Unknown keys are rejected; every default comes
//! from the network configuration table.

use std::path::{Path, PathBuf};

use afen_core::config::DEFAULT_SEQUENCE_LENGTH;
use afen_core::config::{arcface, batch_size, learning_rate, DEFAULT_AU_COUNT, DEFAULT_DROPOUT};
use afen_core::losses::VaMode;
use afen_core::nets::{OptimizerKind, TrainConfig};
use afen_core::signals::{self, SpectrogramConfig};
use afen_core::synthetic::TaskMask;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::experiments::ClusterSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Multitask,
    Arcface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    SgdMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VaLoss {
    #[default]
    Ccc,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tasks {
    pub va: bool,
    pub au: bool,
    pub expr: bool,
}

impl Default for Tasks {
    fn default() -> Self {
        Self {
            va: true,
            au: true,
            expr: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArcFaceSettings {
    pub dim: usize,
    pub scale: f64,
    pub margin: f64,
}

impl Default for ArcFaceSettings {
    fn default() -> Self {
        Self {
            dim: arcface::DEFAULT_DIM,
            scale: arcface::DEFAULT_SCALE,
            margin: arcface::DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrogramSettings {
    pub sample_rate: u32,
    pub window_ms: f64,
    pub overlap_ms: f64,
    pub log_magnitude: bool,
}

impl Default for SpectrogramSettings {
    fn default() -> Self {
        Self {
            sample_rate: signals::DEFAULT_SAMPLE_RATE,
            window_ms: signals::DEFAULT_WINDOW_MS,
            overlap_ms: signals::DEFAULT_OVERLAP_MS,
            log_magnitude: false,
        }
    }
}

impl SpectrogramSettings {
    pub fn to_core(self) -> SpectrogramConfig {
        SpectrogramConfig {
            sample_rate: self.sample_rate,
            window_ms: self.window_ms,
            overlap_ms: self.overlap_ms,
            log_magnitude: self.log_magnitude,
        }
    }
}

/// Generated data used when no training file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSettings {
    /// Input width of the multi-task set.
    pub inputs: usize,
    pub au_count: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Per-class sizes and geometry of the 2D clusters for ArcFace runs.
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub radius: f64,
    pub std: f64,
}

impl Default for SyntheticSettings {
    fn default() -> Self {
        let c = ClusterSpec::default();
        Self {
            inputs: 16,
            au_count: DEFAULT_AU_COUNT,
            train_samples: 4096,
            test_samples: 1024,
            per_class_train: c.per_class_train,
            per_class_test: c.per_class_test,
            radius: c.radius,
            std: c.std,
        }
    }
}

impl SyntheticSettings {
    pub fn clusters(&self) -> ClusterSpec {
        ClusterSpec {
            per_class_train: self.per_class_train,
            per_class_test: self.per_class_test,
            radius: self.radius,
            std: self.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    /// JSON-Lines frames carrying `features`; relative to the config file.
    pub train: Option<PathBuf>,
    pub synthetic: SyntheticSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub optimizer: Optimizer,
    /// Defaults to the table rate of the chosen model.
    pub learning_rate: Option<f64>,
    /// Defaults to the table batch size of the chosen model.
    pub batch_size: Option<usize>,
    pub sequence_length: usize,
    pub dropout: f64,
    pub steps: usize,
    pub seed: u64,
    pub tasks: Tasks,
    pub va_loss: VaLoss,
    /// Hidden widths; defaults to [256] for multitask and [32] for arcface.
    pub hidden: Option<Vec<usize>>,
    pub arcface: ArcFaceSettings,
    pub spectrogram: SpectrogramSettings,
    pub data: DataSettings,
    /// Relative to the config file.
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::default(),
            optimizer: Optimizer::default(),
            learning_rate: None,
            batch_size: None,
            sequence_length: DEFAULT_SEQUENCE_LENGTH,
            dropout: DEFAULT_DROPOUT,
            steps: 1000,
            seed: 0,
            tasks: Tasks::default(),
            va_loss: VaLoss::default(),
            hidden: None,
            arcface: ArcFaceSettings::default(),
            spectrogram: SpectrogramSettings::default(),
            data: DataSettings::default(),
            output_dir: PathBuf::from("afen-out"),
        }
    }
}

fn key_error(key: &str, msg: impl std::fmt::Display) -> String {
    format!("`{key}`: {msg}")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                inner.to_string()
            } else {
                key_error(&path, inner)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and validate; relative paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|msg| CliError::Config {
            path: path.to_path_buf(),
            msg,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output_dir = base.join(&cfg.output_dir);
        if let Some(t) = &cfg.data.train {
            cfg.data.train = Some(base.join(t));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(lr) = self.learning_rate {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(key_error(
                    "learning_rate",
                    format!("{lr} must be finite and >= 0"),
                ));
            }
        }
        if self.batch_size == Some(0) {
            return Err(key_error("batch_size", "must be positive"));
        }
        if self.sequence_length == 0 {
            return Err(key_error("sequence_length", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(key_error(
                "dropout",
                format!("{} must lie in [0, 1)", self.dropout),
            ));
        }
        if let Some(h) = &self.hidden {
            if h.contains(&0) {
                return Err(key_error("hidden", "widths must be positive"));
            }
        }
        if self.model == ModelKind::Multitask
            && !(self.tasks.va || self.tasks.au || self.tasks.expr)
        {
            return Err(key_error("tasks", "at least one task must be enabled"));
        }
        let a = &self.arcface;
        if a.dim < 2 {
            return Err(key_error("arcface.dim", format!("{} < 2", a.dim)));
        }
        if !(a.scale > 0.0 && a.scale.is_finite()) {
            return Err(key_error(
                "arcface.scale",
                format!("{} must be positive", a.scale),
            ));
        }
        if !(a.margin >= 0.0 && a.margin.is_finite()) {
            return Err(key_error(
                "arcface.margin",
                format!("{} must be >= 0", a.margin),
            ));
        }
        self.spectrogram
            .to_core()
            .validate()
            .map_err(|e| key_error("spectrogram", e))?;
        let s = &self.data.synthetic;
        for (key, v) in [
            ("data.synthetic.inputs", s.inputs),
            ("data.synthetic.au_count", s.au_count),
            ("data.synthetic.per_class_train", s.per_class_train),
            ("data.synthetic.per_class_test", s.per_class_test),
        ] {
            if v == 0 {
                return Err(key_error(key, "must be positive"));
            }
        }
        for (key, v) in [
            ("data.synthetic.train_samples", s.train_samples),
            ("data.synthetic.test_samples", s.test_samples),
        ] {
            if v < 2 {
                return Err(key_error(key, "must be at least 2"));
            }
        }
        if !(s.std >= 0.0 && s.std.is_finite() && s.radius.is_finite()) {
            return Err(key_error(
                "data.synthetic",
                "radius and std must be finite, std >= 0",
            ));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let (lr, batch) = match self.model {
            ModelKind::Multitask => (learning_rate::CNN, batch_size::CNN),
            ModelKind::Arcface => (learning_rate::ARCFACE, batch_size::ARCFACE),
        };
        TrainConfig {
            optimizer: match self.optimizer {
                Optimizer::Adam => OptimizerKind::Adam,
                Optimizer::SgdMomentum => OptimizerKind::SgdMomentum,
            },
            learning_rate: self.learning_rate.unwrap_or(lr),
            batch_size: self.batch_size.unwrap_or(batch),
            sequence_length: self.sequence_length,
            dropout: self.dropout,
            seed: self.seed,
            steps: self.steps,
        }
    }

    pub fn hidden(&self) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| match self.model {
            ModelKind::Multitask => vec![256],
            ModelKind::Arcface => vec![32],
        })
    }

    pub fn mask(&self) -> TaskMask {
        TaskMask {
            va: self.tasks.va,
            au: self.tasks.au,
            expr: self.tasks.expr,
        }
    }

    pub fn va_mode(&self) -> VaMode {
        match self.va_loss {
            VaLoss::Ccc => VaMode::Ccc,
            VaLoss::Mse => VaMode::Mse,
        }
    }
}
