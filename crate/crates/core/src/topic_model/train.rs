use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::corpus::BowDocument;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pruning::{GradientAccumulator, PruneMask};
use crate::rng::Rng;

use super::{
    apply_update, loss_and_grad, CountBatch, ElboLoss, Gradients, LogisticNormalPrior, ModelConfig, ModelParams,
    OptimizerState,
};

/// Cycles through a shuffled document order, reshuffling when exhausted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchCursor {
    order: Vec<usize>,
    pos: usize,
}

impl BatchCursor {
    pub fn new(num_docs: usize) -> Self {
        Self {
            order: (0..num_docs).collect(),
            pos: num_docs,
        }
    }

    /// Next `min(size, num_docs)` document indices.
    pub fn next_batch(&mut self, size: usize, rng: &mut Rng) -> Vec<usize> {
        let n = self.order.len();
        let size = size.min(n);
        let mut out = Vec::with_capacity(size);
        for _ in 0..size {
            if self.pos == n {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// `rows × k` standard normal draws in row-major order.
pub fn draw_noise(rng: &mut Rng, rows: usize, k: usize) -> Matrix {
    Matrix::from_vec(rows, k, (0..rows * k).map(|_| rng.sample(StandardNormal)).collect())
}

/// One gradient step on `x` with noise `eps`. Returns the pre-update loss and
/// the gradients that were applied.
pub fn train_step(
    params: &mut ModelParams,
    optimizer: &mut OptimizerState,
    x: &CountBatch,
    eps: &Matrix,
    prior: &LogisticNormalPrior,
    mask: &PruneMask,
    config: &ModelConfig,
) -> Result<(ElboLoss, Gradients)> {
    let (loss, grads) = loss_and_grad(params, x, eps, prior)?;
    apply_update(params, &grads, optimizer, mask, config)?;
    Ok((loss, grads))
}

/// Plain mini-batch trainer. Used directly for centralised training and by
/// each simulated client for its local iterations.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub prior: LogisticNormalPrior,
    cursor: BatchCursor,
}

impl Trainer {
    pub fn new(config: ModelConfig, params: ModelParams, num_docs: usize) -> Result<Self> {
        config.validate()?;
        if params.layout() != ModelParams::zeros(&config).layout() {
            return Err(Error::shape("parameters do not match model config".to_string()));
        }
        let prior = LogisticNormalPrior::from_alpha(config.prior_alpha, config.num_topics)?;
        let optimizer = OptimizerState::new(&params);
        Ok(Self {
            config,
            params,
            optimizer,
            prior,
            cursor: BatchCursor::new(num_docs),
        })
    }

    /// Runs `steps` mini-batch updates drawing batches and noise from `rng`.
    /// When `accumulator` is given, squared gradients of every step are added
    /// to it. Returns the mean per-document loss over the steps (0 if none).
    pub fn run(
        &mut self,
        docs: &[BowDocument],
        steps: usize,
        rng: &mut Rng,
        mask: &PruneMask,
        mut accumulator: Option<&mut GradientAccumulator>,
    ) -> Result<f64> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot train on an empty corpus"));
        }
        if self.cursor.order.len() != docs.len() {
            self.cursor = BatchCursor::new(docs.len());
        }
        let vocab = self.config.vocab_size;
        let k = self.config.num_topics;
        let mut loss_sum = 0.0;
        for _ in 0..steps {
            let idx = self.cursor.next_batch(self.config.batch_size, rng);
            let x = CountBatch::from_docs(idx.iter().map(|&i| &docs[i]), vocab);
            let eps = draw_noise(rng, x.len(), k);
            let (loss, grads) = train_step(
                &mut self.params,
                &mut self.optimizer,
                &x,
                &eps,
                &self.prior,
                mask,
                &self.config,
            )?;
            if let Some(acc) = accumulator.as_deref_mut() {
                acc.accumulate(&grads)?;
            }
            loss_sum += loss.total / x.len() as f64;
        }
        Ok(if steps == 0 { 0.0 } else { loss_sum / steps as f64 })
    }
}
