use serde::{Deserialize, Serialize};

use crate::error::{Result, RfrError};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LossKind {
    #[default]
    L2,
    L1,
}

impl LossKind {
    pub fn value(self, prediction: &Tensor, target: &Tensor) -> Result<f64> {
        match self {
            LossKind::L2 => tensor::mse(prediction, target),
            LossKind::L1 => tensor::mae(prediction, target),
        }
    }

    pub fn grad(self, prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
        match self {
            LossKind::L2 => tensor::mse_grad(prediction, target),
            LossKind::L1 => tensor::mae_grad(prediction, target),
        }
    }

    pub fn value_and_grad(self, prediction: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
        Ok((self.value(prediction, target)?, self.grad(prediction, target)?))
    }
}

impl std::str::FromStr for LossKind {
    type Err = RfrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L2" | "MSE" => Ok(LossKind::L2),
            "L1" | "MAE" => Ok(LossKind::L1),
            _ => Err(RfrError::InvalidArgument(format!("unknown loss `{s}`"))),
        }
    }
}
