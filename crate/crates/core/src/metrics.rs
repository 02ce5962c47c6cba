//! Evaluation: topic extraction, NPMI coherence, topic diversity,
//! downstream classification accuracy, perplexity and model size.

use crate::corpus::Corpus;
use crate::ddouble::Dd;
use crate::error::{Error, Result};
use crate::linalg::{axpy, softmax_in_place, Matrix};
use crate::pruning::PruneMask;
use crate::topic_model::{infer_theta, CountBatch, ModelParams, ParamLayout};

/// Number of top words per topic used for coherence.
pub const COHERENCE_TOP_N: usize = 10;
/// Number of top words per topic used for diversity.
pub const DIVERSITY_TOP_N: usize = 25;
const NPMI_EPS: f64 = 1e-12;

/// Ranked top-n vocabulary indices for each topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSet {
    pub topics: Vec<Vec<usize>>,
}

impl TopicSet {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Keeps the first `n` words of every topic.
    pub fn truncated(&self, n: usize) -> TopicSet {
        TopicSet {
            topics: self.topics.iter().map(|t| t[..n.min(t.len())].to_vec()).collect(),
        }
    }
}

/// For each row of `beta`, the `n` largest columns (ties to lower index).
pub fn top_words(beta: &Matrix, n: usize) -> Result<TopicSet> {
    if n > beta.cols() {
        return Err(Error::invalid(format!(
            "requested {n} top words from a vocabulary of {}",
            beta.cols()
        )));
    }
    let topics = (0..beta.rows())
        .map(|k| {
            let row = beta.row(k);
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            idx.truncate(n);
            idx
        })
        .collect();
    Ok(TopicSet { topics })
}

/// Document-level occurrence statistics of a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    doc_freq: Vec<usize>,
    /// Sorted document ids containing each token.
    postings: Vec<Vec<u32>>,
    num_docs: usize,
}

impl CooccurrenceStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab().len()];
        for (d, doc) in corpus.docs().iter().enumerate() {
            for &(i, _) in doc.counts() {
                postings[i].push(d as u32);
            }
        }
        Self {
            doc_freq: postings.iter().map(Vec::len).collect(),
            postings,
            num_docs: corpus.len(),
        }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_freq(&self, i: usize) -> usize {
        self.doc_freq[i]
    }

    /// Number of documents containing both `i` and `j`.
    pub fn joint_freq(&self, i: usize, j: usize) -> usize {
        let (a, b) = (&self.postings[i], &self.postings[j]);
        let (mut x, mut y, mut n) = (0, 0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        n
    }

    /// NPMI of a token pair. Never co-occurring pairs score -1; a pair present
    /// in every document scores 0.
    pub fn npmi(&self, i: usize, j: usize) -> f64 {
        let d = self.num_docs as f64;
        let joint = self.joint_freq(i, j);
        if joint == 0 {
            return -1.0;
        }
        if joint == self.num_docs {
            return 0.0;
        }
        let pij = joint as f64 / d;
        let pi = self.doc_freq[i] as f64 / d;
        let pj = self.doc_freq[j] as f64 / d;
        let pmi = ((pij + NPMI_EPS) / (pi * pj)).ln();
        (pmi / -(pij + NPMI_EPS).ln()).clamp(-1.0, 1.0)
    }
}

/// Mean over topics of the mean pairwise NPMI among each topic's top words.
pub fn npmi_coherence(topics: &TopicSet, stats: &CooccurrenceStats) -> f64 {
    let per_topic: Vec<f64> = topics
        .topics
        .iter()
        .map(|t| {
            let words = &t[..t.len().min(COHERENCE_TOP_N)];
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for a in 0..words.len() {
                for b in a + 1..words.len() {
                    sum += stats.npmi(words[a], words[b]);
                    pairs += 1;
                }
            }
            if pairs == 0 {
                0.0
            } else {
                sum / pairs as f64
            }
        })
        .collect();
    if per_topic.is_empty() {
        0.0
    } else {
        per_topic.iter().sum::<f64>() / per_topic.len() as f64
    }
}

/// Distinct words across all topic lists over the total list length.
pub fn topic_diversity(topics: &TopicSet) -> f64 {
    let total: usize = topics.topics.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let mut all: Vec<usize> = topics.topics.iter().flatten().copied().collect();
    all.sort_unstable();
    all.dedup();
    all.len() as f64 / total as f64
}

/// Fixed training budget of the downstream classifier.
pub const CLASSIFIER_STEPS: usize = 500;
pub const CLASSIFIER_LR: f64 = 0.1;

/// Multinomial logistic regression with a bias, trained by full-batch
/// gradient descent from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// `classes × (features + 1)`; the last column is the bias.
    pub weights: Matrix,
}

impl SoftmaxClassifier {
    pub fn fit(x: &Matrix, labels: &[usize], num_classes: usize, steps: usize, lr: f64) -> Self {
        let (n, f) = x.shape();
        let mut w = Matrix::zeros(num_classes, f + 1);
        let mut probs = vec![0.0; num_classes];
        for _ in 0..steps {
            let mut grad = Matrix::zeros(num_classes, f + 1);
            for (b, &label) in labels.iter().enumerate().take(n) {
                let row = x.row(b);
                for (c, p) in probs.iter_mut().enumerate() {
                    let wc = w.row(c);
                    *p = wc[f] + row.iter().zip(wc).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_in_place(&mut probs);
                for (c, &p) in probs.iter().enumerate() {
                    let d = p - f64::from(u8::from(c == label));
                    let g = grad.row_mut(c);
                    for (gi, &xi) in g.iter_mut().zip(row) {
                        *gi += d * xi;
                    }
                    g[f] += d;
                }
            }
            let scale = lr / n as f64;
            for (wi, gi) in w.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                *wi -= scale * gi;
            }
        }
        Self { weights: w }
    }

    /// Arg-max class per row; ties go to the lower class id.
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        let f = x.cols();
        (0..x.rows())
            .map(|b| {
                let row = x.row(b);
                let mut best = (0, f64::NEG_INFINITY);
                for c in 0..self.weights.rows() {
                    let wc = self.weights.row(c);
                    let s = wc[f] + row.iter().zip(wc).map(|(a, b)| a * b).sum::<f64>();
                    if s > best.1 {
                        best = (c, s);
                    }
                }
                best.0
            })
            .collect()
    }
}

/// Test accuracy of a softmax classifier trained on `theta_train`.
pub fn classify_accuracy(
    theta_train: &Matrix,
    labels_train: &[usize],
    theta_test: &Matrix,
    labels_test: &[usize],
) -> Result<f64> {
    if theta_train.rows() != labels_train.len()
        || theta_test.rows() != labels_test.len()
        || theta_train.cols() != theta_test.cols()
    {
        return Err(Error::shape("classifier inputs disagree".to_string()));
    }
    if labels_test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut distinct: Vec<usize> = labels_train.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::invalid("classifier needs at least two training classes"));
    }
    let num_classes = labels_train.iter().chain(labels_test).max().map_or(0, |m| m + 1);
    let clf = SoftmaxClassifier::fit(theta_train, labels_train, num_classes, CLASSIFIER_STEPS, CLASSIFIER_LR);
    let correct = clf
        .predict(theta_test)
        .iter()
        .zip(labels_test)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels_test.len() as f64)
}

/// Evaluation-mode theta for every document of `corpus`, in batches.
pub fn corpus_theta(params: &ModelParams, corpus: &Corpus) -> Result<Matrix> {
    const CHUNK: usize = 256;
    let k = params.num_topics();
    let mut data = Vec::with_capacity(corpus.len() * k);
    for chunk in corpus.docs().chunks(CHUNK) {
        let x = CountBatch::from_docs(chunk, params.vocab_size());
        data.extend_from_slice(infer_theta(params, &x)?.as_slice());
    }
    Ok(Matrix::from_vec(corpus.len(), k, data))
}

/// `exp(-Σ x·log p / Σ x)` with evaluation-mode theta.
///
/// The log-likelihood is accumulated in double-double precision and only the
/// final value is rounded, so a uniform model scores exactly `V`.
pub fn perplexity(params: &ModelParams, corpus: &Corpus) -> Result<f64> {
    let v = params.vocab_size();
    if corpus.vocab().len() != v {
        return Err(Error::shape("corpus vocabulary does not match model".to_string()));
    }
    let mut nll = Dd::ZERO;
    let mut tokens = 0.0;
    let mut logits = vec![0.0; v];
    for chunk in corpus.docs().chunks(256) {
        let x = CountBatch::from_docs(chunk, v);
        let theta = infer_theta(params, &x)?;
        for b in 0..x.len() {
            logits.fill(0.0);
            for (k, &t) in theta.row(b).iter().enumerate() {
                axpy(&mut logits, t, params.beta.row(k));
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = Dd::ln(logits.iter().map(|z| (z - max).exp()).sum());
            for &(i, c) in x.row(b) {
                nll = nll + (lse - Dd::from_f64(logits[i] - max)).mul_f64(c);
            }
            tokens += x.total(b);
        }
    }
    if tokens == 0.0 {
        return Err(Error::invalid("perplexity of an empty corpus"));
    }
    let ppl = nll.div_f64(tokens).exp().to_f64();
    if !ppl.is_finite() {
        return Err(Error::NonFinite("perplexity".to_string()));
    }
    Ok(ppl)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSize {
    pub active_params: usize,
    /// Density over prunable entries only; 1.0 when nothing is prunable.
    pub density: f64,
}

/// Active prunable entries plus every non-prunable parameter.
pub fn model_size(mask: &PruneMask, layout: &ParamLayout) -> Result<ModelSize> {
    let prunable: Vec<_> = layout.prunable().collect();
    if prunable.len() != mask.len()
        || prunable
            .iter()
            .zip(mask.tensors())
            .any(|(t, m)| (t.rows, t.cols) != (m.rows(), m.cols()))
    {
        return Err(Error::shape("mask does not match layout".to_string()));
    }
    let fixed: usize = layout.tensors.iter().filter(|t| !t.prunable).map(|t| t.len()).sum();
    Ok(ModelSize {
        active_params: fixed + mask.active(),
        density: mask.density(),
    })
}
