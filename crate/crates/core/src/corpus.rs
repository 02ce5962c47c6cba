//! Bag-of-words corpora, vocabulary consensus and client partitioning.
//!
//! Corpus files are plain UTF-8 text, one document per line:
//!
//! ```text
//! # comment
//! <label>\t<token>:<count> <token>:<count> ...
//! ```
//!
//! Tokens may contain `:`; the count is taken after the last one. Repeated
//! tokens on a line are summed. An optional sidecar `<file>.labels` holds
//! `<label>\t<name>` lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Canonically ordered (byte-lexicographic) set of unique tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = tokens.into_iter().map(Into::into).collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// Sorted union of a non-empty list of vocabularies.
pub fn merge_vocabularies(vocabs: &[Vocabulary]) -> Result<Vocabulary> {
    if vocabs.is_empty() {
        return Err(Error::invalid("cannot merge an empty list of vocabularies"));
    }
    Ok(Vocabulary::new(vocabs.iter().flat_map(|v| v.tokens.iter().cloned())))
}

/// One document: sparse counts keyed by vocabulary index, sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BowDocument {
    counts: Vec<(usize, u32)>,
    label: usize,
    total: u64,
}

impl BowDocument {
    /// Builds a document, merging duplicate indices. Returns `None` when the
    /// document has no tokens.
    pub fn new(counts: impl IntoIterator<Item = (usize, u32)>, label: usize) -> Option<Self> {
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (idx, c) in counts {
            if c > 0 {
                *merged.entry(idx).or_default() += c;
            }
        }
        let total = merged.values().map(|&c| u64::from(c)).sum();
        if total == 0 {
            return None;
        }
        Some(Self {
            counts: merged.into_iter().collect(),
            label,
            total,
        })
    }

    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count_of(&self, idx: usize) -> u32 {
        self.counts
            .binary_search_by_key(&idx, |&(i, _)| i)
            .map_or(0, |p| self.counts[p].1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    docs: Vec<BowDocument>,
    vocab: Vocabulary,
    num_labels: usize,
}

impl Corpus {
    /// Validates that every index fits the vocabulary and every label fits
    /// `num_labels`.
    pub fn new(docs: Vec<BowDocument>, vocab: Vocabulary, num_labels: usize) -> Result<Self> {
        for (i, d) in docs.iter().enumerate() {
            if d.label >= num_labels {
                return Err(Error::invalid(format!(
                    "document {i} has label {} but num_labels is {num_labels}",
                    d.label
                )));
            }
            if let Some(&(idx, _)) = d.counts.last() {
                if idx >= vocab.len() {
                    return Err(Error::invalid(format!(
                        "document {i} references token index {idx} outside vocabulary of size {}",
                        vocab.len()
                    )));
                }
            }
        }
        Ok(Self {
            docs,
            vocab,
            num_labels,
        })
    }

    pub fn docs(&self) -> &[BowDocument] {
        &self.docs
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.docs.iter().map(|d| d.label).collect()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.total).sum()
    }

    /// Same documents, with `num_labels` widened to at least `n`.
    pub fn with_num_labels(mut self, n: usize) -> Self {
        self.num_labels = self.num_labels.max(n);
        self
    }

    fn subset(&self, idx: impl IntoIterator<Item = usize>) -> Corpus {
        Corpus {
            docs: idx.into_iter().map(|i| self.docs[i].clone()).collect(),
            vocab: self.vocab.clone(),
            num_labels: self.num_labels,
        }
    }

    /// Restricts the vocabulary to tokens that actually occur in the
    /// documents. This is the client-local view used for consensus.
    pub fn compact(&self) -> Corpus {
        let used: BTreeSet<usize> = self
            .docs
            .iter()
            .flat_map(|d| d.counts.iter().map(|&(i, _)| i))
            .collect();
        let vocab = Vocabulary::new(used.iter().map(|&i| self.vocab.tokens[i].clone()));
        // Sorted index order is preserved by the canonical ordering.
        let docs = self
            .docs
            .iter()
            .map(|d| BowDocument {
                counts: d
                    .counts
                    .iter()
                    .map(|&(i, c)| (vocab.index[&self.vocab.tokens[i]], c))
                    .collect(),
                label: d.label,
                total: d.total,
            })
            .collect();
        Corpus {
            docs,
            vocab,
            num_labels: self.num_labels,
        }
    }

    /// Re-indexes onto `vocab`, dropping unknown tokens and documents left
    /// empty. Used for held-out data the consensus never saw. Returns the
    /// projected corpus and the number of dropped documents.
    pub fn project_onto(&self, vocab: &Vocabulary) -> (Corpus, usize) {
        let mut dropped = 0;
        let docs = self
            .docs
            .iter()
            .filter_map(|d| {
                let doc = BowDocument::new(
                    d.counts
                        .iter()
                        .filter_map(|&(i, c)| vocab.index_of(&self.vocab.tokens[i]).map(|g| (g, c))),
                    d.label,
                );
                if doc.is_none() {
                    dropped += 1;
                }
                doc
            })
            .collect();
        (
            Corpus {
                docs,
                vocab: vocab.clone(),
                num_labels: self.num_labels,
            },
            dropped,
        )
    }
}

/// Re-indexes `corpus` against `global`. Every local token must be present.
pub fn remap_corpus(corpus: &Corpus, global: &Vocabulary) -> Result<Corpus> {
    let map: Vec<usize> = corpus
        .vocab
        .tokens
        .iter()
        .map(|t| global.index_of(t).ok_or_else(|| Error::MissingToken(t.clone())))
        .collect::<Result<_>>()?;
    let docs = corpus
        .docs
        .iter()
        .map(|d| {
            let mut counts: Vec<(usize, u32)> = d.counts.iter().map(|&(i, c)| (map[i], c)).collect();
            counts.sort_unstable_by_key(|&(i, _)| i);
            BowDocument {
                counts,
                label: d.label,
                total: d.total,
            }
        })
        .collect();
    Ok(Corpus {
        docs,
        vocab: global.clone(),
        num_labels: corpus.num_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// `<label>\t<token>:<count> ...` per line.
    BagOfWords,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// Documents dropped because they contained no tokens.
    pub dropped_empty: usize,
    /// Names from the `.labels` sidecar, indexed by label id, if present.
    pub label_names: Option<Vec<String>>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus> {
    let text = fs::read_to_string(path)?;
    let (corpus, dropped_empty) = match format {
        CorpusFormat::BagOfWords => parse_bow(&text)?,
    };
    let sidecar = sidecar_path(path);
    let label_names = if sidecar.exists() {
        Some(parse_labels(&fs::read_to_string(&sidecar)?)?)
    } else {
        None
    };
    let corpus = match &label_names {
        Some(names) => corpus.with_num_labels(names.len()),
        None => corpus,
    };
    Ok(LoadedCorpus {
        corpus,
        dropped_empty,
        label_names,
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Parses corpus text; returns the corpus and the count of dropped empty
/// documents.
pub fn parse_bow(text: &str) -> Result<(Corpus, usize)> {
    let mut raw: Vec<(usize, Vec<(&str, u32)>)> = Vec::new();
    let mut dropped = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (label, body) = match line.split_once('\t') {
            Some((l, b)) => (l, b),
            None => (line, ""),
        };
        let label: usize = label.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label `{}`", label.trim()),
        })?;
        let mut pairs = Vec::new();
        for item in body.split_whitespace() {
            let (tok, cnt) = item.rsplit_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected token:count, found `{item}`"),
            })?;
            if tok.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("empty token in `{item}`"),
                });
            }
            let cnt: u32 = cnt.parse().ok().filter(|&c| c > 0).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("count must be a positive integer in `{item}`"),
            })?;
            pairs.push((tok, cnt));
        }
        if pairs.is_empty() {
            dropped += 1;
            continue;
        }
        raw.push((label, pairs));
    }
    if raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocabulary::new(raw.iter().flat_map(|(_, p)| p.iter().map(|(t, _)| *t)));
    let num_labels = raw.iter().map(|(l, _)| l + 1).max().unwrap_or(0);
    let docs = raw
        .into_iter()
        .map(|(label, pairs)| {
            BowDocument::new(pairs.into_iter().map(|(t, c)| (vocab.index[t], c)), label)
                .expect("non-empty by construction")
        })
        .collect();
    Ok((Corpus::new(docs, vocab, num_labels)?, dropped))
}

fn parse_labels(text: &str) -> Result<Vec<String>> {
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: "expected `<label>\\t<name>`".into(),
        })?;
        let id: usize = id.trim().parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            message: format!("invalid label id `{id}`"),
        })?;
        names.insert(id, name.trim().to_string());
    }
    let n = names.keys().next_back().map_or(0, |m| m + 1);
    Ok((0..n)
        .map(|i| names.get(&i).cloned().unwrap_or_else(|| i.to_string()))
        .collect())
}

/// Writes `corpus` in the bag-of-words text format.
pub fn write_bow(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in &corpus.docs {
        out.push_str(&d.label.to_string());
        out.push('\t');
        let body: Vec<String> = d
            .counts
            .iter()
            .map(|&(i, c)| format!("{}:{c}", corpus.vocab.tokens[i]))
            .collect();
        out.push_str(&body.join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Iid,
    /// Label skew: per-label client shares drawn from a symmetric Dirichlet.
    LabelDirichlet {
        concentration: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub mode: PartitionMode,
    pub seed: u64,
}

/// Splits `corpus` into `spec.num_clients` disjoint client corpora covering
/// every document exactly once.
pub fn partition(corpus: &Corpus, spec: &PartitionSpec) -> Result<Vec<Corpus>> {
    let n = corpus.len();
    let k = spec.num_clients;
    if k == 0 {
        return Err(Error::invalid("num_clients must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "cannot partition {n} documents across {k} clients"
        )));
    }
    let mut rng = rng::stream(spec.seed, &[rng::TAG_PARTITION]);
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); k];
    match spec.mode {
        PartitionMode::Iid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (pos, doc) in order.into_iter().enumerate() {
                assignment[pos % k].push(doc);
            }
        }
        PartitionMode::LabelDirichlet { concentration } => {
            if !(concentration > 0.0 && concentration.is_finite()) {
                return Err(Error::invalid("dirichlet concentration must be positive"));
            }
            let gamma =
                Gamma::new(concentration, 1.0).map_err(|e| Error::invalid(format!("dirichlet concentration: {e}")))?;
            let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); corpus.num_labels];
            for (i, d) in corpus.docs.iter().enumerate() {
                by_label[d.label].push(i);
            }
            for docs in &mut by_label {
                docs.shuffle(&mut rng);
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
                let sum: f64 = draws.iter().sum();
                let m = docs.len();
                let mut cum = 0.0;
                let mut start = 0;
                for (c, w) in draws.iter().enumerate() {
                    cum += w;
                    let end = if c + 1 == k {
                        m
                    } else if sum > 0.0 {
                        ((cum / sum) * m as f64).round().min(m as f64) as usize
                    } else {
                        m * (c + 1) / k
                    };
                    let end = end.max(start);
                    assignment[c].extend_from_slice(&docs[start..end]);
                    start = end;
                }
            }
        }
    }
    if let Some(c) = assignment.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!(
            "client {c} received no documents; use a larger corpus or fewer clients"
        )));
    }
    Ok(assignment
        .into_iter()
        .map(|mut idx| {
            idx.sort_unstable();
            corpus.subset(idx)
        })
        .collect())
}

/// Shuffled train/test split; the test set has `round(fraction * n)` docs.
pub fn train_test_split(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = corpus.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "split of {n} documents at fraction {test_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::TAG_SPLIT]));
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((corpus.subset(train), corpus.subset(test)))
}
