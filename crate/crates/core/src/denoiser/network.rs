use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamState};
use crate::conv::{conv2d_backward_with, conv2d_forward, ConvLayerParams, PaddingMode};
use crate::error::{Result, RfrError};
use crate::frame::Frame;
use crate::rng::{self, domain, BoxMuller};
use crate::tensor::{relu_forward, Tensor};

/// Shape of the fully convolutional denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub channels: usize,
    #[serde(default = "default_image_channels")]
    pub image_channels: usize,
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default)]
    pub padding: PaddingMode,
    #[serde(default = "default_residual")]
    pub residual: bool,
}

fn default_image_channels() -> usize {
    1
}
fn default_kernel() -> usize {
    3
}
fn default_residual() -> bool {
    true
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            depth: 7,
            channels: 48,
            image_channels: 1,
            kernel_size: 3,
            padding: PaddingMode::Circular,
            residual: true,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 || self.channels == 0 || self.image_channels == 0 {
            return Err(RfrError::InvalidArgument(format!(
                "need depth >= 2 and positive channel counts, got {self:?}"
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(RfrError::InvalidArgument("kernel size must be odd".into()));
        }
        Ok(())
    }

    /// Side length of the receptive field in pixels.
    pub fn receptive_field(&self) -> usize {
        self.depth * (self.kernel_size - 1) + 1
    }

    fn layer_shape(&self, i: usize) -> [usize; 4] {
        let k = self.kernel_size;
        let c_in = if i == 0 { self.image_channels } else { self.channels };
        let c_out = if i + 1 == self.depth {
            self.image_channels
        } else {
            self.channels
        };
        [c_out, c_in, k, k]
    }
}

/// Weights of `f_θ`: conv → ReLU → ... → conv, stride 1 throughout. With
/// `residual` set the last layer predicts the noise and the output is
/// `input − prediction`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub arch: Architecture,
    pub layers: Vec<ConvLayerParams>,
}

impl DenoiserParams {
    /// He-normal weights (std `sqrt(2 / fan_in)`), zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut normal = BoxMuller::new(rng::stream(seed, rng::stream_id(&[domain::INIT])));
        let layers = (0..arch.depth)
            .map(|i| {
                let shape = arch.layer_shape(i);
                let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
                let std = (2.0 / fan_in).sqrt();
                let n: usize = shape.iter().product();
                let w = Tensor::from_vec(&shape, (0..n).map(|_| std * normal.sample()).collect())?;
                ConvLayerParams::new(w, Tensor::zeros(&[shape[0]]), arch.padding)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DenoiserParams { arch, layers })
    }

    /// All weights and biases zero: with `residual` this is the identity map.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = (0..arch.depth)
            .map(|i| {
                let shape = arch.layer_shape(i);
                ConvLayerParams::new(Tensor::zeros(&shape), Tensor::zeros(&[shape[0]]), arch.padding)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DenoiserParams { arch, layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(ConvLayerParams::is_finite)
    }

    pub fn with_padding(&self, padding: PaddingMode) -> Self {
        let mut p = self.clone();
        p.arch.padding = padding;
        for l in &mut p.layers {
            l.padding = padding;
        }
        p
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = input.shape();
        let c = self.arch.image_channels;
        if s.len() != 3 || s[0] != c {
            let (h, w) = if s.len() == 3 { (s[1], s[2]) } else { (0, 0) };
            return Err(RfrError::shape("denoise", &[c, h, w], s));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut a = input.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = conv2d_forward(&a, layer)?;
            a = if i < last { relu_forward(&z) } else { z };
        }
        if self.arch.residual {
            input.sub(&a)
        } else {
            Ok(a)
        }
    }

    /// Forward pass that keeps each layer's input for [`Self::backward`].
    pub fn forward_cached(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = conv2d_forward(&a, layer)?;
            inputs.push(a);
            a = if i < last { relu_forward(&z) } else { z };
        }
        let out = if self.arch.residual { input.sub(&a)? } else { a };
        Ok((out, ForwardCache { inputs }))
    }

    /// Parameter gradients given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Tensor) -> Result<ParamGrads> {
        let mut g = if self.arch.residual {
            grad_output.scale(-1.0)
        } else {
            grad_output.clone()
        };
        let mut layers = vec![None; self.layers.len()];
        for i in (0..self.layers.len()).rev() {
            let grads = conv2d_backward_with(&cache.inputs[i], &self.layers[i], &g, i > 0)?;
            layers[i] = Some((grads.weights, grads.bias));
            if let Some(gi) = grads.input {
                // The input of layer i (> 0) is relu(z_{i-1}); it is positive
                // exactly where the ReLU passes gradient.
                let mut gz = gi;
                for (v, &a) in gz.data_mut().iter_mut().zip(cache.inputs[i].data()) {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                }
                g = gz;
            }
        }
        Ok(ParamGrads {
            layers: layers.into_iter().map(Option::unwrap).collect(),
        })
    }
}

pub struct ForwardCache {
    inputs: Vec<Tensor>,
}

/// Per-layer `(d weights, d bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<(Tensor, Tensor)>,
}

impl ParamGrads {
    pub fn zeros_like(params: &DenoiserParams) -> Self {
        ParamGrads {
            layers: params
                .layers
                .iter()
                .map(|l| (Tensor::zeros(l.weights.shape()), Tensor::zeros(l.bias.shape())))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) -> Result<()> {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.add_assign(ow)?;
            b.add_assign(ob)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.data_mut().iter_mut().for_each(|v| *v *= factor);
            b.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|(w, b)| w.is_finite() && b.is_finite())
    }

    /// Sums in slice order.
    pub fn sum(params: &DenoiserParams, parts: &[ParamGrads]) -> Result<ParamGrads> {
        let mut total = ParamGrads::zeros_like(params);
        for p in parts {
            total.add_assign(p)?;
        }
        Ok(total)
    }
}

/// Adam over every tensor of a [`DenoiserParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    states: Vec<(AdamState, AdamState)>,
}

impl Optimizer {
    pub fn new(params: &DenoiserParams) -> Self {
        Optimizer {
            states: params
                .layers
                .iter()
                .map(|l| (AdamState::new(l.weights.shape()), AdamState::new(l.bias.shape())))
                .collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.states.first().map_or(0, |s| s.0.step_count)
    }

    pub fn step(&mut self, params: &mut DenoiserParams, grads: &ParamGrads, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(RfrError::NonFinite {
                context: "parameter gradient".into(),
            });
        }
        for ((layer, (gw, gb)), (sw, sb)) in params.layers.iter_mut().zip(&grads.layers).zip(&mut self.states) {
            adam_step(&mut layer.weights, gw, sw, lr)?;
            adam_step(&mut layer.bias, gb, sb, lr)?;
        }
        Ok(())
    }
}

/// `f_θ(frame)`, unclamped.
pub fn denoise(params: &DenoiserParams, frame: &Frame) -> Result<Frame> {
    Frame::from_tensor(params.forward(frame.tensor())?)
}
