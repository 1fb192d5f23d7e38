//! Encoder hyperparameters and the flat parameter store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            d_model: 32,
            n_layers: 1,
            n_heads: 2,
            d_ff: 64,
            max_len: 128,
            dropout: 0.0,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::validation(format!("encoder config: {m}")));
        if self.vocab_size < 6 {
            return bad("vocab_size must cover the reserved tokens");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.n_layers == 0 || self.d_ff == 0 || self.max_len < 5 {
            return bad("n_layers, d_ff must be positive and max_len at least 5");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    /// Receives decoupled weight decay (matrices only).
    pub decay: bool,
}

// Per-layer tensor offsets.
pub(crate) const LN1_G: usize = 0;
pub(crate) const LN1_B: usize = 1;
pub(crate) const WQ: usize = 2;
pub(crate) const BQ: usize = 3;
pub(crate) const WK: usize = 4;
pub(crate) const BK: usize = 5;
pub(crate) const WV: usize = 6;
pub(crate) const BV: usize = 7;
pub(crate) const WO: usize = 8;
pub(crate) const BO: usize = 9;
pub(crate) const LN2_G: usize = 10;
pub(crate) const LN2_B: usize = 11;
pub(crate) const W1: usize = 12;
pub(crate) const B1: usize = 13;
pub(crate) const W2: usize = 14;
pub(crate) const B2: usize = 15;
pub(crate) const PER_LAYER: usize = 16;

pub(crate) const TOK: usize = 0;
pub(crate) const POS: usize = 1;

/// Model weights in a fixed declared order: token and positional
/// embeddings, then each layer's attention and feed-forward blocks, then the
/// final norm and the classification head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: EncoderConfig,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Names, shapes and decay flags in storage order.
    pub fn layout(config: &EncoderConfig) -> Vec<(String, Vec<usize>, bool)> {
        let (d, f) = (config.d_model, config.d_ff);
        let mut out = vec![
            ("tok_emb".to_string(), vec![config.vocab_size, d], true),
            ("pos_emb".to_string(), vec![config.max_len, d], true),
        ];
        for l in 0..config.n_layers {
            let p = |n: &str| format!("layer{l}.{n}");
            out.extend([
                (p("ln1.gain"), vec![d], false),
                (p("ln1.bias"), vec![d], false),
                (p("attn.wq"), vec![d, d], true),
                (p("attn.bq"), vec![d], false),
                (p("attn.wk"), vec![d, d], true),
                (p("attn.bk"), vec![d], false),
                (p("attn.wv"), vec![d, d], true),
                (p("attn.bv"), vec![d], false),
                (p("attn.wo"), vec![d, d], true),
                (p("attn.bo"), vec![d], false),
                (p("ln2.gain"), vec![d], false),
                (p("ln2.bias"), vec![d], false),
                (p("ffn.w1"), vec![d, f], true),
                (p("ffn.b1"), vec![f], false),
                (p("ffn.w2"), vec![f, d], true),
                (p("ffn.b2"), vec![d], false),
            ]);
        }
        out.extend([
            ("final_ln.gain".to_string(), vec![d], false),
            ("final_ln.bias".to_string(), vec![d], false),
            ("head.w".to_string(), vec![d, 1], true),
            ("head.b".to_string(), vec![1], false),
        ]);
        out
    }

    /// All-zero parameters (also the shape of a gradient).
    pub fn zeros(config: &EncoderConfig) -> Self {
        let tensors = Self::layout(config)
            .into_iter()
            .map(|(name, shape, decay)| Tensor {
                data: vec![T::zero(); shape.iter().product()],
                name,
                shape,
                decay,
            })
            .collect();
        Self {
            config: config.clone(),
            tensors,
        }
    }

    /// Zeros with this value's tensor names and shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![T::zero(); t.data.len()],
                    decay: t.decay,
                })
                .collect(),
        }
    }

    /// True when `other` has the same tensor names and shapes.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape && a.data.len() == b.data.len())
    }

    /// Seeded initialization: Xavier-normal matrices, unit-variance-scaled
    /// embeddings, unit norm gains, zero biases.
    pub fn init(config: &EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for t in &mut params.tensors {
            let std = if t.name.ends_with("emb") {
                0.5
            } else if t.decay {
                let (fan_in, fan_out) = (t.shape[0], t.shape[1]);
                (2.0 / (fan_in + fan_out) as f64).sqrt()
            } else if t.name.ends_with("gain") {
                for v in &mut t.data {
                    *v = T::one();
                }
                continue;
            } else {
                continue;
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut t.data {
                *v = T::of(normal.sample(&mut rng));
            }
        }
        Ok(params)
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub(crate) fn get(&self, idx: usize) -> &[T] {
        &self.tensors[idx].data
    }

    pub(crate) fn get_mut(&mut self, idx: usize) -> &mut [T] {
        &mut self.tensors[idx].data
    }

    pub(crate) fn layer_base(l: usize) -> usize {
        2 + l * PER_LAYER
    }

    pub(crate) fn final_base(&self) -> usize {
        2 + self.config.n_layers * PER_LAYER
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Checks tensor names and shapes against the config.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let layout = Self::layout(&self.config);
        if layout.len() != self.tensors.len() {
            return Err(Error::validation("parameter count does not match the config"));
        }
        for ((name, shape, _), t) in layout.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::validation(format!("tensor {} has inconsistent shape", t.name)));
            }
        }
        if !self.is_finite() {
            return Err(Error::validation("parameters contain non-finite values"));
        }
        Ok(())
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, alpha: T) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x = *x + alpha * *y;
            }
        }
    }
}
