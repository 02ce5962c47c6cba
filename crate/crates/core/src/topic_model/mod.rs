//! ProdLDA-style variational autoencoder topic model.
//!
//! Encoder: softplus MLP over raw counts, followed by two linear heads that
//! produce the mean and log-variance of a diagonal Gaussian in the softmax
//! pre-image of the topic simplex. Decoder: `log_softmax(theta · beta)`.
//! The prior is the Laplace approximation of a symmetric Dirichlet.
//!
//! Gradients are computed by hand in [`backward`]; there is no
//! autodiff.

mod network;
mod optim;
mod prior;
mod train;

pub use network::{
    backward, decode, elbo_loss, encode, forward, infer_theta, loss_and_grad, sample_theta, CountBatch, ElboLoss,
    EncoderTrace, ForwardTrace,
};
pub use optim::{apply_update, OptimizerState};
pub use prior::LogisticNormalPrior;
pub use train::{draw_noise, train_step, BatchCursor, Trainer};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// `logvar` is clamped to this range before exponentiation.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub num_topics: usize,
    pub hidden_sizes: Vec<usize>,
    /// Symmetric Dirichlet concentration approximated by the prior.
    pub prior_alpha: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
}

impl ModelConfig {
    pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];
    pub const DEFAULT_ALPHA: f64 = 0.02;
    pub const DEFAULT_LR: f64 = 2e-3;
    pub const DEFAULT_BATCH: usize = 64;

    pub fn new(vocab_size: usize, num_topics: usize) -> Self {
        Self {
            vocab_size,
            num_topics,
            hidden_sizes: Self::DEFAULT_HIDDEN.to_vec(),
            prior_alpha: Self::DEFAULT_ALPHA,
            learning_rate: Self::DEFAULT_LR,
            optimizer: OptimizerKind::default(),
            batch_size: Self::DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::invalid("vocab_size must be at least 2"));
        }
        if self.num_topics < 2 {
            return Err(Error::invalid("num_topics must be at least 2"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("hidden sizes must be at least 1"));
        }
        if !(self.prior_alpha > 0.0 && self.prior_alpha.is_finite()) {
            return Err(Error::invalid("prior_alpha must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::invalid("adam requires beta1, beta2 in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// A fully connected layer; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: Vec<Dense>,
    pub mu_head: Dense,
    pub logvar_head: Dense,
    /// `K × V` unnormalised topic-word weights.
    pub beta: Matrix,
}

/// Gradients share the parameter shape tree.
pub type Gradients = ModelParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Weight matrices (including `beta`) are prunable; biases are not.
    pub prunable: bool,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Layer a tensor belongs to: the name without `.weight` / `.bias`.
    pub fn layer(&self) -> &str {
        self.name
            .strip_suffix(".weight")
            .or_else(|| self.name.strip_suffix(".bias"))
            .unwrap_or(&self.name)
    }
}

/// Names and shapes of every tensor, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub tensors: Vec<TensorInfo>,
}

impl ParamLayout {
    pub fn prunable(&self) -> impl Iterator<Item = &TensorInfo> {
        self.tensors.iter().filter(|t| t.prunable)
    }

    pub fn total_params(&self) -> usize {
        self.tensors.iter().map(TensorInfo::len).sum()
    }

    pub fn prunable_params(&self) -> usize {
        self.prunable().map(TensorInfo::len).sum()
    }
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let mut encoder = Vec::with_capacity(config.hidden_sizes.len());
        let mut inputs = config.vocab_size;
        for &h in &config.hidden_sizes {
            encoder.push(Dense::zeros(inputs, h));
            inputs = h;
        }
        Self {
            encoder,
            mu_head: Dense::zeros(inputs, config.num_topics),
            logvar_head: Dense::zeros(inputs, config.num_topics),
            beta: Matrix::zeros(config.num_topics, config.vocab_size),
        }
    }

    /// Xavier-uniform weights, zero biases; a pure function of `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = Self::zeros(config);
        let mut rng = rng::stream(seed, &[rng::TAG_INIT]);
        for w in params.prunable_mut() {
            let (fan_out, fan_in) = w.shape();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        let dense = |d: &Dense| Dense::zeros(d.inputs(), d.outputs());
        Self {
            encoder: self.encoder.iter().map(dense).collect(),
            mu_head: dense(&self.mu_head),
            logvar_head: dense(&self.logvar_head),
            beta: Matrix::zeros(self.beta.rows(), self.beta.cols()),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.beta.cols()
    }

    pub fn num_topics(&self) -> usize {
        self.beta.rows()
    }

    pub fn layout(&self) -> ParamLayout {
        let mut tensors = Vec::new();
        let mut dense = |name: String, d: &Dense| {
            tensors.push(TensorInfo {
                name: format!("{name}.weight"),
                rows: d.weight.rows(),
                cols: d.weight.cols(),
                prunable: true,
            });
            tensors.push(TensorInfo {
                name: format!("{name}.bias"),
                rows: 1,
                cols: d.bias.len(),
                prunable: false,
            });
        };
        for (i, d) in self.encoder.iter().enumerate() {
            dense(format!("encoder.{i}"), d);
        }
        dense("mu_head".into(), &self.mu_head);
        dense("logvar_head".into(), &self.logvar_head);
        tensors.push(TensorInfo {
            name: "beta".into(),
            rows: self.beta.rows(),
            cols: self.beta.cols(),
            prunable: true,
        });
        ParamLayout { tensors }
    }

    fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain([&self.mu_head, &self.logvar_head])
    }

    /// Every tensor as a flat slice, in [`ParamLayout`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in self.dense_layers() {
            out.push(d.weight.as_slice());
            out.push(&d.bias);
        }
        out.push(self.beta.as_slice());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        let Self {
            encoder,
            mu_head,
            logvar_head,
            beta,
        } = self;
        for d in encoder.iter_mut().chain([mu_head, logvar_head]) {
            out.push(d.weight.as_mut_slice());
            out.push(&mut d.bias);
        }
        out.push(beta.as_mut_slice());
        out
    }

    /// Prunable weight matrices, in layout order.
    pub fn prunable(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.dense_layers().map(|d| &d.weight).collect();
        out.push(&self.beta);
        out
    }

    pub fn prunable_mut(&mut self) -> Vec<&mut Matrix> {
        let Self {
            encoder,
            mu_head,
            logvar_head,
            beta,
        } = self;
        let mut out: Vec<&mut Matrix> = encoder
            .iter_mut()
            .chain([mu_head, logvar_head])
            .map(|d| &mut d.weight)
            .collect();
        out.push(beta);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_congruent(&self, other: &ModelParams) -> bool {
        self.layout() == other.layout()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Scale every entry in place.
    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let cfg = ModelConfig::new(50, 5);
        let a = ModelParams::init(&cfg, 3).unwrap();
        let b = ModelParams::init(&cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = ModelParams::init(&cfg, 4).unwrap();
        assert_ne!(a, c);
        for (info, t) in a.layout().tensors.iter().zip(a.tensors()) {
            if !info.prunable {
                assert!(t.iter().all(|&v| v == 0.0), "{}", info.name);
            }
        }
    }

    #[test]
    fn init_respects_xavier_bound() {
        let mut cfg = ModelConfig::new(50, 5);
        cfg.hidden_sizes = vec![16];
        let p = ModelParams::init(&cfg, 0).unwrap();
        assert_eq!(p.encoder[0].weight.shape(), (16, 50));
        assert_eq!(p.beta.shape(), (5, 50));
        assert_eq!(p.mu_head.weight.shape(), (5, 16));
        let bound = (6.0f64 / 66.0).sqrt();
        assert!(p.encoder[0].weight.as_slice().iter().all(|v| v.abs() < bound));
        assert!(p.encoder[0].weight.as_slice().iter().any(|v| v.abs() > bound / 2.0));
    }

    #[test]
    fn layout_names_and_order() {
        let mut cfg = ModelConfig::new(10, 3);
        cfg.hidden_sizes = vec![4, 2];
        let p = ModelParams::zeros(&cfg);
        let names: Vec<_> = p.layout().tensors.into_iter().map(|t| t.name).collect();
        assert_eq!(
            names,
            [
                "encoder.0.weight",
                "encoder.0.bias",
                "encoder.1.weight",
                "encoder.1.bias",
                "mu_head.weight",
                "mu_head.bias",
                "logvar_head.weight",
                "logvar_head.bias",
                "beta"
            ]
        );
        assert_eq!(p.num_params(), 40 + 4 + 8 + 2 + 6 + 3 + 6 + 3 + 30);
        assert_eq!(p.layout().prunable_params(), 40 + 8 + 6 + 6 + 30);
        assert_eq!(p.tensors().len(), p.layout().tensors.len());
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(1, 3).validate().is_err());
        assert!(ModelConfig::new(3, 1).validate().is_err());
        let mut c = ModelConfig::new(3, 3);
        c.hidden_sizes = vec![0];
        assert!(c.validate().is_err());
        assert!(ModelConfig::new(3, 3).validate().is_ok());
    }
}
