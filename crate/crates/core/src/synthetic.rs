//! Planted-topic corpus generator for tests, benchmarks and demos.
//!
//! Topic `k` owns a contiguous block of `V / K` words and emits a block word
//! with probability `block_weight`, otherwise a uniformly random word. A
//! document with label `l` mixes topics as
//! `label_weight · e_l + (1 − label_weight) · Dirichlet(1)`.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::corpus::{BowDocument, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::TopicSet;
use crate::rng;

const TAG_SYNTH: u64 = u64::MAX - 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub num_topics: usize,
    #[serde(default = "default_min_len")]
    pub min_doc_len: usize,
    #[serde(default = "default_max_len")]
    pub max_doc_len: usize,
    #[serde(default = "default_block_weight")]
    pub block_weight: f64,
    #[serde(default = "default_label_weight")]
    pub label_weight: f64,
    pub seed: u64,
}

fn default_min_len() -> usize {
    40
}

fn default_max_len() -> usize {
    120
}

fn default_block_weight() -> f64 {
    0.9
}

fn default_label_weight() -> f64 {
    0.8
}

impl SyntheticSpec {
    pub fn new(num_docs: usize, vocab_size: usize, num_topics: usize, seed: u64) -> Self {
        Self {
            num_docs,
            vocab_size,
            num_topics,
            min_doc_len: default_min_len(),
            max_doc_len: default_max_len(),
            block_weight: default_block_weight(),
            label_weight: default_label_weight(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_docs == 0 || self.num_topics == 0 {
            return Err(Error::invalid("synthetic corpus needs documents and topics"));
        }
        if self.vocab_size < self.num_topics {
            return Err(Error::invalid("synthetic vocab_size must be at least num_topics"));
        }
        if self.min_doc_len == 0 || self.min_doc_len > self.max_doc_len {
            return Err(Error::invalid("synthetic document lengths need 1 <= min <= max"));
        }
        for w in [self.block_weight, self.label_weight] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid("synthetic mixture weights must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Word index range owned by topic `k`. The last block absorbs the
    /// remainder when `V` is not a multiple of `K`.
    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        let size = self.vocab_size / self.num_topics;
        let end = if k + 1 == self.num_topics {
            self.vocab_size
        } else {
            (k + 1) * size
        };
        k * size..end
    }

    /// The first `n` words of each block.
    pub fn planted_topics(&self, n: usize) -> TopicSet {
        TopicSet {
            topics: (0..self.num_topics).map(|k| self.block(k).take(n).collect()).collect(),
        }
    }
}

pub fn token_name(i: usize, vocab_size: usize) -> String {
    let width = vocab_size.saturating_sub(1).to_string().len().max(3);
    format!("w{i:0width$}")
}

/// Generates the corpus. Labels cycle through topics so every class is
/// populated.
pub fn generate(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[TAG_SYNTH]);
    let k = spec.num_topics;
    let v = spec.vocab_size;
    let blocks: Vec<_> = (0..k).map(|t| spec.block(t)).collect();
    let mut docs = Vec::with_capacity(spec.num_docs);
    let mut counts = vec![0u32; v];
    for d in 0..spec.num_docs {
        let label = d % k;
        let noise: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
        let noise_sum: f64 = noise.iter().sum();
        let theta: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(t, &g)| {
                let planted = if t == label { spec.label_weight } else { 0.0 };
                planted + (1.0 - spec.label_weight) * g / noise_sum
            })
            .collect();
        let len = rng.random_range(spec.min_doc_len..=spec.max_doc_len);
        counts.fill(0);
        for _ in 0..len {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut topic = k - 1;
            for (t, &p) in theta.iter().enumerate() {
                acc += p;
                if u < acc {
                    topic = t;
                    break;
                }
            }
            let word = if rng.random::<f64>() < spec.block_weight {
                rng.random_range(blocks[topic].clone())
            } else {
                rng.random_range(0..v)
            };
            counts[word] += 1;
        }
        let nz = counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c));
        docs.push(BowDocument::new(nz, label).expect("documents have at least one token"));
    }
    let vocab = Vocabulary::new((0..v).map(|i| token_name(i, v)));
    Corpus::new(docs, vocab, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::new(50, 40, 4, 3);
        let a = generate(&spec).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a.vocab().len(), 40);
        assert_eq!(a.vocab().token(7), Some("w007"));
        assert!(a.docs().iter().all(|d| (40..=120).contains(&d.total())));
        assert_eq!(a, generate(&spec).unwrap());
        assert_ne!(a, generate(&SyntheticSpec { seed: 4, ..spec }).unwrap());
    }

    #[test]
    fn documents_favour_their_label_block() {
        let spec = SyntheticSpec::new(40, 100, 5, 1);
        let c = generate(&spec).unwrap();
        for d in c.docs() {
            let block = spec.block(d.label());
            let inside: u64 = d
                .counts()
                .iter()
                .filter(|(i, _)| block.contains(i))
                .map(|&(_, n)| n as u64)
                .sum();
            assert!(inside as f64 > 0.5 * d.total() as f64);
        }
    }

    #[test]
    fn blocks_cover_vocabulary() {
        let spec = SyntheticSpec::new(1, 10, 3, 0);
        assert_eq!(spec.block(0), 0..3);
        assert_eq!(spec.block(2), 6..10);
        assert_eq!(spec.planted_topics(2).topics, vec![vec![0, 1], vec![3, 4], vec![6, 7]]);
    }
}
