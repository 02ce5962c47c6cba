//! Forward pass, ELBO and backpropagation.

use crate::corpus::BowDocument;
use crate::error::{Error, Result};
use crate::linalg::{
    add_matmul_nn, add_matmul_nt, add_matmul_tn, axpy, dot, log_softmax_in_place, softmax_in_place,
    softplus_with_slope, Matrix,
};

use super::{Dense, Gradients, LogisticNormalPrior, ModelParams, LOGVAR_MAX, LOGVAR_MIN};

/// A mini-batch of sparse count vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CountBatch {
    vocab_size: usize,
    rows: Vec<Vec<(usize, f64)>>,
    totals: Vec<f64>,
}

impl CountBatch {
    pub fn from_docs<'a>(docs: impl IntoIterator<Item = &'a BowDocument>, vocab_size: usize) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = docs
            .into_iter()
            .map(|d| d.counts().iter().map(|&(i, c)| (i, f64::from(c))).collect())
            .collect();
        Self::from_sparse(rows, vocab_size)
    }

    pub fn from_sparse(rows: Vec<Vec<(usize, f64)>>, vocab_size: usize) -> Self {
        let totals = rows.iter().map(|r| r.iter().map(|&(_, c)| c).sum()).collect();
        Self {
            vocab_size,
            rows,
            totals,
        }
    }

    pub fn from_dense(x: &Matrix) -> Self {
        let rows = (0..x.rows())
            .map(|b| {
                x.row(b)
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c != 0.0)
                    .map(|(i, &c)| (i, c))
                    .collect()
            })
            .collect();
        Self::from_sparse(rows, x.cols())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows.len(), self.vocab_size);
        for (b, row) in self.rows.iter().enumerate() {
            for &(i, c) in row {
                m.set(b, i, m.get(b, i) + c);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, b: usize) -> &[(usize, f64)] {
        &self.rows[b]
    }

    pub fn total(&self, b: usize) -> f64 {
        self.totals[b]
    }

    /// The same batch with every row repeated twice, in order.
    pub fn duplicated(&self) -> Self {
        let rows = self.rows.iter().chain(&self.rows).cloned().collect();
        Self::from_sparse(rows, self.vocab_size)
    }
}

/// Softplus activations of every encoder layer and their derivatives with
/// respect to the pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    pub act: Vec<Matrix>,
    pub slope: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub encoder: EncoderTrace,
    pub mu: Matrix,
    pub logvar: Matrix,
    pub eps: Matrix,
    pub theta: Matrix,
    pub log_probs: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboLoss {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

enum Input<'a> {
    Sparse(&'a CountBatch),
    Dense(&'a Matrix),
}

impl Input<'_> {
    fn batch(&self) -> usize {
        match self {
            Input::Sparse(x) => x.len(),
            Input::Dense(m) => m.rows(),
        }
    }
}

fn linear_forward(layer: &Dense, input: &Input) -> Matrix {
    let n = input.batch();
    let mut out = Matrix::zeros(n, layer.outputs());
    for b in 0..n {
        out.row_mut(b).copy_from_slice(&layer.bias);
    }
    match input {
        Input::Sparse(x) => {
            for b in 0..n {
                let row = x.row(b);
                for (o, d) in out.row_mut(b).iter_mut().enumerate() {
                    let w = layer.weight.row(o);
                    *d += row.iter().map(|&(i, c)| w[i] * c).sum::<f64>();
                }
            }
        }
        Input::Dense(m) => add_matmul_nt(&mut out, m, &layer.weight),
    }
    out
}

/// Accumulates weight/bias gradients for `d_out` and, when asked, the
/// gradient w.r.t. the layer input.
fn linear_backward(layer: &Dense, input: &Input, d_out: &Matrix, grad: &mut Dense, d_input: Option<&mut Matrix>) {
    for b in 0..d_out.rows() {
        for (gb, &v) in grad.bias.iter_mut().zip(d_out.row(b)) {
            *gb += v;
        }
    }
    match input {
        Input::Sparse(x) => {
            for b in 0..d_out.rows() {
                let row = x.row(b);
                for (o, &v) in d_out.row(b).iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let gw = grad.weight.row_mut(o);
                    for &(i, c) in row {
                        gw[i] += v * c;
                    }
                }
            }
        }
        Input::Dense(m) => add_matmul_tn(&mut grad.weight, d_out, m),
    }
    if let Some(d_in) = d_input {
        add_matmul_nn(d_in, d_out, &layer.weight);
    }
}

fn check_input(params: &ModelParams, x: &CountBatch) -> Result<()> {
    if x.vocab_size() != params.vocab_size() {
        return Err(Error::shape(format!(
            "batch vocabulary {} does not match model vocabulary {}",
            x.vocab_size(),
            params.vocab_size()
        )));
    }
    Ok(())
}

/// Runs the encoder; returns `(mu, logvar, trace)`.
pub fn encode(params: &ModelParams, x: &CountBatch) -> Result<(Matrix, Matrix, EncoderTrace)> {
    check_input(params, x)?;
    let mut slope = Vec::with_capacity(params.encoder.len());
    let mut act: Vec<Matrix> = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let mut h = match act.last() {
            None => linear_forward(layer, &Input::Sparse(x)),
            Some(h) => linear_forward(layer, &Input::Dense(h)),
        };
        let mut s = Matrix::zeros(h.rows(), h.cols());
        for (v, d) in h.as_mut_slice().iter_mut().zip(s.as_mut_slice()) {
            (*v, *d) = softplus_with_slope(*v);
        }
        slope.push(s);
        act.push(h);
    }
    let head_in = match act.last() {
        None => Input::Sparse(x),
        Some(h) => Input::Dense(h),
    };
    let mu = linear_forward(&params.mu_head, &head_in);
    let logvar = linear_forward(&params.logvar_head, &head_in);
    if !mu.is_finite() || !logvar.is_finite() {
        return Err(Error::NonFinite("encoder output".into()));
    }
    Ok((mu, logvar, EncoderTrace { act, slope }))
}

#[inline]
fn clamp_logvar(lv: f64) -> f64 {
    lv.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

/// `softmax(mu + exp(logvar / 2) ⊙ eps)`, row-wise.
pub fn sample_theta(mu: &Matrix, logvar: &Matrix, eps: &Matrix) -> Matrix {
    assert_eq!(mu.shape(), logvar.shape());
    assert_eq!(mu.shape(), eps.shape());
    let mut theta = mu.clone();
    for b in 0..mu.rows() {
        let row = theta.row_mut(b);
        for (k, t) in row.iter_mut().enumerate() {
            *t += (0.5 * clamp_logvar(logvar.get(b, k))).exp() * eps.get(b, k);
        }
        softmax_in_place(row);
    }
    theta
}

/// `log_softmax(theta · beta)`, row-wise over the vocabulary.
pub fn decode(params: &ModelParams, theta: &Matrix) -> Matrix {
    let beta = &params.beta;
    assert_eq!(theta.cols(), beta.rows());
    let mut out = Matrix::zeros(theta.rows(), beta.cols());
    for b in 0..theta.rows() {
        let dst = out.row_mut(b);
        for (k, &t) in theta.row(b).iter().enumerate() {
            axpy(dst, t, beta.row(k));
        }
        log_softmax_in_place(dst);
    }
    out
}

/// Negative ELBO, summed over the batch.
pub fn elbo_loss(
    x: &CountBatch,
    log_probs: &Matrix,
    mu: &Matrix,
    logvar: &Matrix,
    prior: &LogisticNormalPrior,
) -> Result<ElboLoss> {
    if log_probs.rows() != x.len()
        || log_probs.cols() != x.vocab_size()
        || mu.shape() != logvar.shape()
        || mu.rows() != x.len()
        || mu.cols() != prior.num_topics()
    {
        return Err(Error::shape("elbo_loss operands disagree".to_string()));
    }
    let mut recon = 0.0;
    for b in 0..x.len() {
        let lp = log_probs.row(b);
        recon -= x.row(b).iter().map(|&(i, c)| c * lp[i]).sum::<f64>();
    }
    let mut kl = 0.0;
    for b in 0..mu.rows() {
        for k in 0..mu.cols() {
            let lv = clamp_logvar(logvar.get(b, k));
            let var0 = prior.var[k];
            let diff = mu.get(b, k) - prior.mean[k];
            kl += 0.5 * (lv.exp() / var0 + diff * diff / var0 - 1.0 + var0.ln() - lv);
        }
    }
    let total = recon + kl;
    if !total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(ElboLoss { recon, kl, total })
}

/// Full forward pass with fixed reparameterisation noise `eps`.
pub fn forward(params: &ModelParams, x: &CountBatch, eps: &Matrix) -> Result<ForwardTrace> {
    let (mu, logvar, encoder) = encode(params, x)?;
    if eps.shape() != mu.shape() {
        return Err(Error::shape(format!(
            "noise shape {:?} does not match posterior shape {:?}",
            eps.shape(),
            mu.shape()
        )));
    }
    let theta = sample_theta(&mu, &logvar, eps);
    let log_probs = decode(params, &theta);
    Ok(ForwardTrace {
        encoder,
        mu,
        logvar,
        eps: eps.clone(),
        theta,
        log_probs,
    })
}

/// Exact gradient of the summed negative ELBO with the noise held fixed.
pub fn backward(
    trace: &ForwardTrace,
    x: &CountBatch,
    prior: &LogisticNormalPrior,
    params: &ModelParams,
) -> Result<Gradients> {
    let n = x.len();
    let k = params.num_topics();
    let v = params.vocab_size();
    if trace.theta.shape() != (n, k)
        || trace.log_probs.shape() != (n, v)
        || trace.encoder.slope.len() != params.encoder.len()
        || prior.num_topics() != k
    {
        return Err(Error::shape("trace does not match parameters".to_string()));
    }
    let mut grads = params.zeros_like();

    // Decoder: d/dz of -Σ x·log_softmax(z) is n_b·softmax(z) - x.
    let mut dz = Matrix::zeros(n, v);
    for b in 0..n {
        let total = x.total(b);
        let dst = dz.row_mut(b);
        for (d, &lp) in dst.iter_mut().zip(trace.log_probs.row(b)) {
            *d = total * lp.exp();
        }
        for &(i, c) in x.row(b) {
            dst[i] -= c;
        }
    }
    let mut dtheta = Matrix::zeros(n, k);
    for b in 0..n {
        let dzb = dz.row(b);
        for kk in 0..k {
            axpy(grads.beta.row_mut(kk), trace.theta.get(b, kk), dzb);
            dtheta.set(b, kk, dot(dzb, params.beta.row(kk)));
        }
    }

    // Softmax, reparameterisation and KL.
    let mut dmu = Matrix::zeros(n, k);
    let mut dlv = Matrix::zeros(n, k);
    for b in 0..n {
        let th = trace.theta.row(b);
        let dt = dtheta.row(b);
        let inner = dot(th, dt);
        for kk in 0..k {
            let du = th[kk] * (dt[kk] - inner);
            let mu = trace.mu.get(b, kk);
            let lv = trace.logvar.get(b, kk);
            let var0 = prior.var[kk];
            dmu.set(b, kk, du + (mu - prior.mean[kk]) / var0);
            if (LOGVAR_MIN..=LOGVAR_MAX).contains(&lv) {
                let sigma = (0.5 * lv).exp();
                let g = du * trace.eps.get(b, kk) * 0.5 * sigma + 0.5 * (sigma * sigma / var0 - 1.0);
                dlv.set(b, kk, g);
            }
        }
    }

    // Heads.
    let depth = params.encoder.len();
    let head_in = match trace.encoder.act.last() {
        None => Input::Sparse(x),
        Some(h) => Input::Dense(h),
    };
    let mut dh = (depth > 0).then(|| Matrix::zeros(n, params.mu_head.inputs()));
    linear_backward(&params.mu_head, &head_in, &dmu, &mut grads.mu_head, dh.as_mut());
    linear_backward(&params.logvar_head, &head_in, &dlv, &mut grads.logvar_head, dh.as_mut());

    // Encoder, last layer first.
    for l in (0..depth).rev() {
        let mut da = dh.take().expect("encoder gradient present");
        for (d, &s) in da.as_mut_slice().iter_mut().zip(trace.encoder.slope[l].as_slice()) {
            *d *= s;
        }
        let input = if l == 0 {
            Input::Sparse(x)
        } else {
            Input::Dense(&trace.encoder.act[l - 1])
        };
        let mut d_prev = (l > 0).then(|| Matrix::zeros(n, params.encoder[l].inputs()));
        linear_backward(&params.encoder[l], &input, &da, &mut grads.encoder[l], d_prev.as_mut());
        dh = d_prev;
    }

    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    Ok(grads)
}

/// Forward, loss and backward in one call.
pub fn loss_and_grad(
    params: &ModelParams,
    x: &CountBatch,
    eps: &Matrix,
    prior: &LogisticNormalPrior,
) -> Result<(ElboLoss, Gradients)> {
    let trace = forward(params, x, eps)?;
    let loss = elbo_loss(x, &trace.log_probs, &trace.mu, &trace.logvar, prior)?;
    let grads = backward(&trace, x, prior, params)?;
    Ok((loss, grads))
}

/// Evaluation-mode document-topic proportions: `softmax(mu)`.
pub fn infer_theta(params: &ModelParams, x: &CountBatch) -> Result<Matrix> {
    let (mut mu, _, _) = encode(params, x)?;
    for b in 0..mu.rows() {
        softmax_in_place(mu.row_mut(b));
    }
    Ok(mu)
}
