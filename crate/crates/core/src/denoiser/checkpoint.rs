//! Checkpoint layout: one line of JSON describing the architecture, then the
//! layer tensors as consecutive `RFRT` records (weights, bias, weights, ...).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, DenoiserParams};
use crate::conv::ConvLayerParams;
use crate::error::{Result, RfrError};
use crate::tensor::Tensor;

const FORMAT: &str = "rfr-checkpoint";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(flatten)]
    arch: Architecture,
}

pub fn encode(params: &DenoiserParams) -> Vec<u8> {
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        arch: params.arch,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for layer in &params.layers {
        layer.weights.write_rfrt(&mut out).expect("vec write");
        layer.bias.write_rfrt(&mut out).expect("vec write");
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DenoiserParams> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or(RfrError::Format {
        offset: bytes.len(),
        message: "missing checkpoint header line".into(),
    })?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).map_err(|e| RfrError::Format {
        offset: 0,
        message: format!("bad checkpoint header: {e}"),
    })?;
    if header.format != FORMAT {
        return Err(RfrError::Format {
            offset: 0,
            message: format!("not a checkpoint (format `{}`)", header.format),
        });
    }
    let arch = header.arch;
    let template = DenoiserParams::zeros(arch)?;
    let mut pos = nl + 1;
    let mut layers = Vec::with_capacity(arch.depth);
    for expected in &template.layers {
        let (w, used) = Tensor::read_rfrt(&bytes[pos..], pos)?;
        let w_at = pos;
        pos += used;
        let (b, used) = Tensor::read_rfrt(&bytes[pos..], pos)?;
        pos += used;
        if w.shape() != expected.weights.shape() {
            return Err(RfrError::Format {
                offset: w_at,
                message: format!(
                    "layer weights have shape {:?}, header implies {:?}",
                    w.shape(),
                    expected.weights.shape()
                ),
            });
        }
        layers.push(ConvLayerParams::new(w, b, arch.padding)?);
    }
    if pos != bytes.len() {
        return Err(RfrError::Format {
            offset: pos,
            message: "trailing bytes after last layer".into(),
        });
    }
    Ok(DenoiserParams { arch, layers })
}

pub fn save_checkpoint(path: &Path, params: &DenoiserParams) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| RfrError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<DenoiserParams> {
    if !path.exists() {
        return Err(RfrError::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| RfrError::io(path, e))?;
    decode(&bytes)
}
