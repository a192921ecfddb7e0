use std::fmt;
use std::str::FromStr;

use crate::error::ScaError;

/// Element-wise activation used by the encoder and decoder slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative evaluated at the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = ScaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(ScaError::InvalidArgument(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

/// Encoder/decoder activation pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Activations {
    pub encoder: Activation,
    pub decoder: Activation,
}

impl Default for Activations {
    fn default() -> Self {
        Self {
            encoder: Activation::Tanh,
            decoder: Activation::Identity,
        }
    }
}

impl Activations {
    pub const LINEAR: Self = Self {
        encoder: Activation::Identity,
        decoder: Activation::Identity,
    };
}
