use crate::error::{Result, RfrError};
use crate::tensor::Tensor;

/// A `[C, H, W]` image. Clean frames live in `[0, 1]`; noisy and intermediate
/// frames may hold any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    tensor: Tensor,
}

impl Frame {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Frame {
            tensor: Tensor::zeros(&[channels, height, width]),
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Frame {
            tensor: Tensor::full(&[channels, height, width], value),
        }
    }

    pub fn from_tensor(tensor: Tensor) -> Result<Self> {
        let s = tensor.shape();
        if s.len() != 3 || s.iter().any(|&d| d == 0) {
            return Err(RfrError::InvalidArgument(format!(
                "a frame needs a non-empty [C, H, W] tensor, got shape {s:?}"
            )));
        }
        Ok(Frame { tensor })
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_tensor(Tensor::from_vec(&[channels, height, width], data)?)
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn shape(&self) -> &[usize] {
        self.tensor.shape()
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor {
        self.tensor
    }

    pub fn data(&self) -> &[f64] {
        self.tensor.data()
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.tensor.data_mut()
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data()[(c * self.height() + y) * self.width() + x]
    }

    pub fn clamp01(&self) -> Frame {
        Frame {
            tensor: self.tensor.map(|v| v.clamp(0.0, 1.0)),
        }
    }

    /// Circular translation: the pixel at `(x, y)` moves to
    /// `((x + dx) mod W, (y + dy) mod H)`.
    pub fn shift(&self, dx: i64, dy: i64) -> Frame {
        let (c, h, w) = (self.channels(), self.height(), self.width());
        let ox = dx.rem_euclid(w as i64) as usize;
        let oy = dy.rem_euclid(h as i64) as usize;
        let src = self.data();
        let mut out = vec![0.0; src.len()];
        for ci in 0..c {
            for y in 0..h {
                let ty = (y + oy) % h;
                let s = &src[(ci * h + y) * w..(ci * h + y + 1) * w];
                let d = &mut out[(ci * h + ty) * w..(ci * h + ty + 1) * w];
                // d[(x + ox) % w] = s[x]
                d[ox..].copy_from_slice(&s[..w - ox]);
                d[..ox].copy_from_slice(&s[w - ox..]);
            }
        }
        Frame {
            tensor: Tensor::from_vec(self.shape(), out).expect("same shape"),
        }
    }
}

pub fn shift(frame: &Frame, dx: i64, dy: i64) -> Frame {
    frame.shift(dx, dy)
}
