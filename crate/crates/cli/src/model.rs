//! Trained networks and their AFEN container form.

use std::path::Path;

use afen_core::embedspace::CentroidModel;
use afen_core::nets::{ArcFaceNet, DenseStack, MultiTaskNet, Parameters};
use afen_core::Matrix;
use serde_json::{json, Value};

use crate::container::Container;
use crate::error::{CliError, CliResult};
use crate::experiments::stream;

pub enum TrainedModel {
    MultiTask(MultiTaskNet),
    ArcFace {
        net: ArcFaceNet,
        centroids: CentroidModel,
    },
}

fn widths(stack: &DenseStack) -> Vec<usize> {
    let mut w: Vec<usize> = stack.layers.iter().map(|l| l.inputs()).collect();
    w.push(stack.outputs());
    w
}

fn column(values: &[usize]) -> Matrix {
    Matrix::column(&values.iter().map(|&v| v as f64).collect::<Vec<_>>())
}

fn bad(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::Invalid(format!("{}: {}", path.display(), msg.into()))
}

impl TrainedModel {
    pub fn to_container(&self) -> Container {
        let mut c = Container::default();
        let (meta, params) = match self {
            Self::MultiTask(net) => (
                json!({
                    "kind": "multitask",
                    "widths": widths(&net.backbone),
                    "au_count": net.heads.au.outputs(),
                }),
                net.named_params(),
            ),
            Self::ArcFace { net, .. } => (
                json!({
                    "kind": "arcface",
                    "widths": widths(&net.backbone),
                    "scale": net.head.scale,
                    "margin": net.head.margin,
                }),
                net.named_params(),
            ),
        };
        let Value::Object(meta) = meta else {
            unreachable!("json! object literal")
        };
        c.meta = meta;
        for (name, m) in params {
            c.push(name, m.clone());
        }
        if let Self::ArcFace { centroids, .. } = self {
            c.push("centroids.centers", centroids.centers().clone());
            c.push("centroids.labels", column(centroids.labels()));
            c.push("centroids.counts", column(centroids.counts()));
        }
        c
    }

    pub fn from_container(c: &Container, path: &Path) -> CliResult<Self> {
        let widths: Vec<usize> = c
            .meta
            .get("widths")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .filter(|w: &Vec<usize>| w.len() >= 2 && !w.contains(&0))
            .ok_or_else(|| bad(path, "metadata `widths` missing or invalid"))?;
        let number = |key: &str| {
            c.meta
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(path, format!("metadata `{key}` missing")))
        };
        let lookup = |name: &str| c.get(name).cloned();
        // parameters are overwritten below; the rng only fixes shapes
        let mut rng = stream(0, 0);
        match c.meta.get("kind").and_then(Value::as_str) {
            Some("multitask") => {
                let au_count = number("au_count")? as usize;
                let mut net = MultiTaskNet::new(&widths, au_count, &mut rng);
                net.load_params(&lookup)?;
                Ok(Self::MultiTask(net))
            }
            Some("arcface") => {
                let mut net =
                    ArcFaceNet::new(&widths, number("scale")?, number("margin")?, &mut rng)?;
                net.load_params(&lookup)?;
                let part = |name: &str| {
                    c.get(name)
                        .cloned()
                        .ok_or_else(|| bad(path, format!("array `{name}` missing")))
                };
                let ints = |m: Matrix| m.as_slice().iter().map(|&v| v as usize).collect::<Vec<_>>();
                let centroids = CentroidModel::from_parts(
                    part("centroids.centers")?,
                    ints(part("centroids.labels")?),
                    ints(part("centroids.counts")?),
                )?;
                Ok(Self::ArcFace { net, centroids })
            }
            other => Err(bad(path, format!("unknown model kind {other:?}"))),
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Self::from_container(&Container::read(path)?, path)
    }

    pub fn inputs(&self) -> usize {
        let stack = match self {
            Self::MultiTask(n) => &n.backbone,
            Self::ArcFace { net, .. } => &net.backbone,
        };
        stack.layers[0].inputs()
    }
}
