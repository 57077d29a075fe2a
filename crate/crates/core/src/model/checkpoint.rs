//! JSON checkpoint files.
//!
//! Numbers are written in the shortest form that parses back to the same f64,
//! so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Linear, ModelConfig, ModelParams};
use crate::error::{file_err, Error, Result};
use crate::real::Real;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    /// Multiscale split step the model was trained with, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn from_params<T: Real>(params: &ModelParams<T>, k_star: Option<usize>) -> Self {
        let mut tensors = BTreeMap::new();
        for (name, layer) in params.layers() {
            tensors.insert(
                format!("{name}.weight"),
                Tensor {
                    shape: layer.weight.shape().to_vec(),
                    data: layer.weight.iter().map(|x| x.as_f64()).collect(),
                },
            );
            tensors.insert(
                format!("{name}.bias"),
                Tensor {
                    shape: vec![layer.bias.len()],
                    data: layer.bias.iter().map(|x| x.as_f64()).collect(),
                },
            );
        }
        Self {
            format_version: FORMAT_VERSION,
            config: params.config,
            k_star,
            tensors,
        }
    }

    pub fn to_params<T: Real>(&self) -> Result<ModelParams<T>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint format_version {}",
                self.format_version
            )));
        }
        let mut params = ModelParams::<T>::zeros(self.config)?;
        for (name, layer) in params.layers_mut() {
            *layer = self.layer(name, layer.inputs(), layer.outputs())?;
        }
        if !params.is_finite() {
            return Err(Error::InvalidConfig("checkpoint holds non-finite weights".into()));
        }
        let expected = 2 * params.layers().len();
        if self.tensors.len() != expected {
            return Err(Error::Dimension(format!(
                "checkpoint has {} tensors, config implies {expected}",
                self.tensors.len()
            )));
        }
        Ok(params)
    }

    fn layer<T: Real>(&self, name: &str, inputs: usize, outputs: usize) -> Result<Linear<T>> {
        let get = |suffix: &str, shape: &[usize]| -> Result<Vec<T>> {
            let key = format!("{name}.{suffix}");
            let t = self
                .tensors
                .get(&key)
                .ok_or_else(|| Error::Dimension(format!("checkpoint lacks tensor {key}")))?;
            let len: usize = shape.iter().product();
            if t.shape != shape || t.data.len() != len {
                return Err(Error::Dimension(format!(
                    "tensor {key} has shape {:?} ({} values), expected {shape:?}",
                    t.shape,
                    t.data.len()
                )));
            }
            Ok(t.data.iter().map(|&x| T::lit(x)).collect())
        };
        let w = get("weight", &[outputs, inputs])?;
        let b = get("bias", &[outputs])?;
        Ok(Linear {
            weight: Array2::from_shape_vec((outputs, inputs), w).map_err(|e| Error::Dimension(e.to_string()))?,
            bias: Array1::from_vec(b),
        })
    }
}

pub fn write_checkpoint<W: Write>(writer: W, checkpoint: &Checkpoint) -> Result<()> {
    serde_json::to_writer(writer, checkpoint)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Checkpoint> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn save_checkpoint<T: Real>(path: &Path, params: &ModelParams<T>, k_star: Option<usize>) -> Result<()> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(&mut w, &Checkpoint::from_params(params, k_star))?;
    w.flush().map_err(file_err(path))?;
    Ok(())
}

/// Loads parameters and the stored multiscale split step.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<(ModelParams<T>, Option<usize>)> {
    let file = File::open(path).map_err(file_err(path))?;
    let ck = read_checkpoint(BufReader::new(file))?;
    Ok((ck.to_params()?, ck.k_star))
}
