//! JSON form of network parameters. Matrices are stored row-major with
//! explicit shapes.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DenseLayer, HnnParams, MlpParams};
use crate::error::{Error, Result};
use crate::hypgeom::HPoint;

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp(MlpParams),
    Hnn(HnnParams),
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<HPoint>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Mlp {
        layers: Vec<LayerRecord>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        batch_norm: bool,
    },
    Hnn {
        c0: HPoint,
        layers: Vec<LayerRecord>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        batch_norm: bool,
    },
}

fn to_record(layer: &DenseLayer, c: Option<&HPoint>) -> LayerRecord {
    LayerRecord {
        rows: layer.output_dim(),
        cols: layer.input_dim(),
        a: layer.a.iter().copied().collect(),
        b: layer.b.to_vec(),
        c: c.cloned(),
    }
}

fn from_record(r: LayerRecord) -> Result<(DenseLayer, Option<HPoint>)> {
    let a = Array2::from_shape_vec((r.rows, r.cols), r.a)
        .map_err(|e| Error::InvalidArgument(format!("layer matrix: {e}")))?;
    Ok((DenseLayer::new(a, Array1::from(r.b))?, r.c))
}

impl Network {
    pub fn input_dim(&self) -> usize {
        match self {
            Network::Mlp(p) => p.input_dim(),
            Network::Hnn(p) => p.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::Mlp(p) => p.output_dim(),
            Network::Hnn(p) => p.output_dim(),
        }
    }

    /// Serializes the parameters; `batch_norm` records whether hidden
    /// activations were normalized during training.
    pub fn to_json(&self, batch_norm: bool) -> Result<String> {
        let record = match self {
            Network::Mlp(p) => Record::Mlp {
                layers: p.layers().iter().map(|l| to_record(l, None)).collect(),
                batch_norm,
            },
            Network::Hnn(p) => Record::Hnn {
                c0: p.c0().clone(),
                layers: p
                    .layers()
                    .iter()
                    .zip(p.biases())
                    .map(|(l, c)| to_record(l, Some(c)))
                    .collect(),
                batch_norm,
            },
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    /// Returns the network and its batch-norm flag.
    pub fn from_json(s: &str) -> Result<(Self, bool)> {
        match serde_json::from_str(s)? {
            Record::Mlp { layers, batch_norm } => {
                let layers = layers
                    .into_iter()
                    .map(|r| from_record(r).map(|(l, _)| l))
                    .collect::<Result<Vec<_>>>()?;
                Ok((Network::Mlp(MlpParams::new(layers)?), batch_norm))
            }
            Record::Hnn {
                c0,
                layers,
                batch_norm,
            } => {
                let mut dense = Vec::with_capacity(layers.len());
                let mut biases = Vec::with_capacity(layers.len());
                for r in layers {
                    let (l, c) = from_record(r)?;
                    let c = c.ok_or_else(|| {
                        Error::InvalidArgument("hnn layer is missing its hyperbolic bias".into())
                    })?;
                    dense.push(l);
                    biases.push(c);
                }
                Ok((Network::Hnn(HnnParams::new(c0, dense, biases)?), batch_norm))
            }
        }
    }

    pub fn write(&self, path: &Path, batch_norm: bool) -> Result<()> {
        std::fs::write(path, self.to_json(batch_norm)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<(Self, bool)> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
