//! Dense row-major `f64` tensors and the handful of elementwise ops the
//! denoiser needs.
//!
//! Binary operations check shapes and return [`RfrError::ShapeMismatch`]
//! instead of panicking. Losses come in forward/backward pairs so the
//! training loops can chain them with [`crate::conv`] without a general
//! autodiff graph.

use std::io::{Read, Write};

use crate::error::{Result, RfrError};

const RFRT_MAGIC: &[u8; 4] = b"RFRT";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(RfrError::InvalidArgument(format!(
                "shape {:?} holds {} values but {} were given",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check_same(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(RfrError::shape(op, &self.shape, &other.shape));
        }
        Ok(())
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.check_same(other, op)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    /// In-place `self += other`, used for gradient accumulation.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.check_same(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes the `RFRT` binary layout: magic, u32 rank, u32 dims, f64 payload
    /// (all little-endian).
    pub fn write_rfrt<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(RFRT_MAGIC)?;
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Reads one `RFRT` record. `offset` is the byte position of the record in
    /// the enclosing stream and only feeds error messages.
    pub fn read_rfrt<R: Read>(mut r: R, offset: usize) -> Result<(Tensor, usize)> {
        let mut pos = offset;
        let mut read_exact = |buf: &mut [u8], what: &str, pos: &mut usize| -> Result<()> {
            r.read_exact(buf).map_err(|_| RfrError::Format {
                offset: *pos,
                message: format!("truncated tensor record while reading {what}"),
            })?;
            *pos += buf.len();
            Ok(())
        };

        let mut magic = [0u8; 4];
        read_exact(&mut magic, "magic", &mut pos)?;
        if &magic != RFRT_MAGIC {
            return Err(RfrError::Format {
                offset: pos - 4,
                message: format!("bad tensor magic {magic:?}"),
            });
        }
        let mut word = [0u8; 4];
        read_exact(&mut word, "rank", &mut pos)?;
        let rank = u32::from_le_bytes(word) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            read_exact(&mut word, "dims", &mut pos)?;
            shape.push(u32::from_le_bytes(word) as usize);
        }
        let len: usize = shape.iter().product();
        let mut payload = vec![0u8; len * 8];
        read_exact(&mut payload, "payload", &mut pos)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((Tensor { shape, data }, pos - offset))
    }
}

/// `max(x, 0)`, propagating NaN.
pub fn relu_forward(input: &Tensor) -> Tensor {
    input.map(|v| if v < 0.0 { 0.0 } else { v })
}

/// Gradient of ReLU w.r.t. its input; the subgradient at 0 is taken as 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.zip(grad_out, "relu_backward", |x, g| if x > 0.0 { g } else { 0.0 })
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same(b, "mse")?;
    let n = a.len().max(1) as f64;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// d mse(a, b) / d a.
pub fn mse_grad(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let n = a.len().max(1) as f64;
    a.zip(b, "mse_grad", |x, y| 2.0 * (x - y) / n)
}

pub fn mae(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same(b, "mae")?;
    let n = a.len().max(1) as f64;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// d mae(a, b) / d a, with sign(0) = 0.
pub fn mae_grad(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let n = a.len().max(1) as f64;
    a.zip(b, "mae_grad", |x, y| {
        let d = x - y;
        if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        }
    })
}
