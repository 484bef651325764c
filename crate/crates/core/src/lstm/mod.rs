//! Stacked LSTM over one-hot event codes.
//!
//! Each layer computes the standard (non-peephole) cell
//!
//! ```text
//! z = W_in·x + W_rec·h_prev + b          (4H rows: input, forget, candidate, output)
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c = f ⊙ c_prev + i ⊙ g
//! h = o ⊙ tanh(c)
//! ```
//!
//! Layer 0 sees a one-hot code, so `W_in·x` is a single column of `W_in`.
//! The top layer's `h` is projected to vocabulary logits. Training uses
//! teacher forcing: the input at step `t` is code `t`, the target code
//! `t + 1`, and the loss is the softmax cross-entropy in nats.
//!
//! Everything is generic over [`Scalar`] so gradient checks can run in `f64`
//! while training runs in `f32`.

mod backward;
mod forward;
pub mod gradcheck;
mod kernels;
#[cfg(test)]
mod tests;

pub use forward::{log_softmax, softmax, ForwardTrace};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstmError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {0} is too short (need at least 2 events)")]
    SequenceTooShort(usize),
    #[error("non-finite activation at step {step}")]
    NonFiniteActivation { step: usize },
    #[error("event code {code} outside vocabulary of {vocab}")]
    CodeOutOfRange { code: usize, vocab: usize },
    #[error("trace does not belong to this sequence/parameters")]
    TraceMismatch,
}

/// Floating-point element type of parameters and activations.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + Debug
    + Default
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                <$t>::ln(self)
            }
            #[inline]
            fn tanh(self) -> Self {
                <$t>::tanh(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

#[inline]
pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    S::ONE / (S::ONE + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub cells_per_layer: usize,
    pub vocab_size: usize,
}

impl Default for ModelConfig {
    /// Three layers of 512 cells over the 413-event vocabulary.
    fn default() -> Self {
        Self {
            num_layers: 3,
            cells_per_layer: 512,
            vocab_size: crate::vocab::VOCAB_SIZE,
        }
    }
}

impl ModelConfig {
    pub fn new(num_layers: usize, cells_per_layer: usize, vocab_size: usize) -> Self {
        Self {
            num_layers,
            cells_per_layer,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        if self.num_layers == 0 || self.cells_per_layer == 0 {
            return Err(LstmError::InvalidConfig(
                "num_layers and cells_per_layer must be positive".into(),
            ));
        }
        if self.vocab_size < 2 || self.vocab_size > u16::MAX as usize {
            return Err(LstmError::InvalidConfig(format!(
                "vocab_size {} outside 2..=65535",
                self.vocab_size
            )));
        }
        Ok(())
    }

    fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.vocab_size
        } else {
            self.cells_per_layer
        }
    }

    pub fn parameter_count(&self) -> usize {
        let h = self.cells_per_layer;
        (0..self.num_layers)
            .map(|l| 4 * h * (self.layer_input_dim(l) + h + 1))
            .sum::<usize>()
            + self.vocab_size * (h + 1)
    }
}

/// Weights of one LSTM layer. Matrices are row-major with `4H` rows in gate
/// order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<S> {
    /// `4H × input_dim`.
    pub w_input: Vec<S>,
    /// `4H × H`.
    pub w_recurrent: Vec<S>,
    /// `4H`.
    pub bias: Vec<S>,
}

/// All model weights. Also used to hold gradients, which share the shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<S> {
    pub config: ModelConfig,
    pub layers: Vec<LayerParams<S>>,
    /// `V × H`.
    pub w_out: Vec<S>,
    /// `V`.
    pub b_out: Vec<S>,
}

pub type Gradients<S> = Parameters<S>;

impl<S: Scalar> Parameters<S> {
    pub fn zeros(config: ModelConfig) -> Self {
        let h = config.cells_per_layer;
        let layers = (0..config.num_layers)
            .map(|l| LayerParams {
                w_input: vec![S::ZERO; 4 * h * config.layer_input_dim(l)],
                w_recurrent: vec![S::ZERO; 4 * h * h],
                bias: vec![S::ZERO; 4 * h],
            })
            .collect();
        Self {
            config,
            layers,
            w_out: vec![S::ZERO; config.vocab_size * h],
            b_out: vec![S::ZERO; config.vocab_size],
        }
    }

    /// Uniform weights in `±1/√fan_in` (fan-in = the matrix's column count),
    /// zero biases except the forget-gate bias, which starts at 1.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, LstmError> {
        config.validate()?;
        let mut p = Self::zeros(config);
        let h = config.cells_per_layer;
        let mut fill = |w: &mut [S], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in w {
                *x = S::from_f64(rng.random_range(-bound..=bound));
            }
        };
        for (l, layer) in p.layers.iter_mut().enumerate() {
            fill(&mut layer.w_input, config.layer_input_dim(l));
            fill(&mut layer.w_recurrent, h);
            for b in &mut layer.bias[h..2 * h] {
                *b = S::ONE;
            }
        }
        fill(&mut p.w_out, h);
        Ok(p)
    }

    /// Tensors in their canonical (serialization) order: per layer input
    /// weights, recurrent weights, bias; then output weights and bias.
    pub fn tensors(&self) -> Vec<&[S]> {
        let mut out: Vec<&[S]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.w_input);
            out.push(&l.w_recurrent);
            out.push(&l.bias);
        }
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [S]> {
        let mut out: Vec<&mut [S]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.w_input);
            out.push(&mut l.w_recurrent);
            out.push(&mut l.bias);
        }
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Euclidean norm over every entry, accumulated in `f64`.
    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| {
                let v = x.to_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: S) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= factor;
            }
        }
    }

    /// `self += alpha * other`. Shapes must match.
    pub fn add_scaled(&mut self, other: &Self, alpha: S) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            kernels::axpy(alpha, src, dst);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(S::ZERO);
        }
    }

    /// Converts the element type (e.g. `f32` training weights to `f64`).
    pub fn cast<T: Scalar>(&self) -> Parameters<T> {
        let conv = |v: &[S]| v.iter().map(|x| T::from_f64(x.to_f64())).collect::<Vec<T>>();
        Parameters {
            config: self.config,
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w_input: conv(&l.w_input),
                    w_recurrent: conv(&l.w_recurrent),
                    bias: conv(&l.bias),
                })
                .collect(),
            w_out: conv(&self.w_out),
            b_out: conv(&self.b_out),
        }
    }
}

/// Recurrent state: hidden and cell vectors per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState<S> {
    pub h: Vec<Vec<S>>,
    pub c: Vec<Vec<S>>,
}

impl<S: Scalar> LayerState<S> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let v = vec![vec![S::ZERO; config.cells_per_layer]; config.num_layers];
        Self {
            h: v.clone(),
            c: v,
        }
    }
}
