//! Line-oriented text checkpoints.
//!
//! ```text
//! fedtopic-checkpoint 1
//! vocab <V>
//! <token>                      # V lines, index order
//! tensor <name> <rows> <cols>  # one block per tensor, layout order
//! <row values>                 # rows lines, space separated
//! mask <name> <rows> <cols> <hex>
//! end
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a checkpoint
//! reloads bit-exactly and two runs diff line by line. Masks are bit-packed,
//! least significant bit first, one hex digit per four entries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::pruning::{MaskTensor, PruneMask};
use crate::topic_model::{ModelConfig, ModelParams};

const MAGIC: &str = "fedtopic-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub params: ModelParams,
    pub mask: PruneMask,
}

impl Checkpoint {
    pub fn to_text(&self) -> Result<String> {
        if self.vocab.len() != self.params.vocab_size() {
            return Err(Error::Checkpoint("vocabulary does not match beta".to_string()));
        }
        if !self.mask.is_congruent(&self.params) {
            return Err(Error::Checkpoint("mask does not match parameters".to_string()));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "vocab {}", self.vocab.len());
        for t in self.vocab.tokens() {
            let _ = writeln!(out, "{t}");
        }
        let layout = self.params.layout();
        for (info, data) in layout.tensors.iter().zip(self.params.tensors()) {
            let _ = writeln!(out, "tensor {} {} {}", info.name, info.rows, info.cols);
            for row in data.chunks(info.cols.max(1)) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        }
        for (info, m) in layout.prunable().zip(self.mask.tensors()) {
            let _ = writeln!(out, "mask {} {} {} {}", info.name, m.rows(), m.cols(), m.to_hex());
        }
        out.push_str("end\n");
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, expected {what}")))
        };
        let (_, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!("not a checkpoint (header {magic:?})")));
        }
        let (ln, vline) = next("vocab")?;
        let v: usize = vline
            .strip_prefix("vocab ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad(ln, "expected `vocab <n>`"))?;
        let mut tokens = Vec::with_capacity(v);
        for _ in 0..v {
            tokens.push(next("token")?.1.to_string());
        }
        let vocab = Vocabulary::new(tokens.iter().cloned());
        if vocab.tokens() != tokens.as_slice() {
            return Err(Error::Checkpoint("vocabulary is not in canonical order".to_string()));
        }

        let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
        let mut masks: Vec<(String, MaskTensor)> = Vec::new();
        loop {
            let (ln, line) = next("tensor, mask or end")?;
            let fields: Vec<&str> = line.split(' ').collect();
            match fields.as_slice() {
                ["end"] => break,
                ["tensor", name, rows, cols] => {
                    let (rows, cols) = (dim(ln, rows)?, dim(ln, cols)?);
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rl, row) = next("tensor row")?;
                        let before = data.len();
                        for tok in row.split(' ').filter(|s| !s.is_empty()) {
                            data.push(tok.parse::<f64>().map_err(|_| bad(rl, "bad float"))?);
                        }
                        if data.len() - before != cols {
                            return Err(bad(rl, &format!("expected {cols} values")));
                        }
                    }
                    tensors.push((name.to_string(), rows, cols, data));
                }
                ["mask", name, rows, cols, hex] => {
                    let m = MaskTensor::from_hex(dim(ln, rows)?, dim(ln, cols)?, hex)
                        .map_err(|e| bad(ln, &e.to_string()))?;
                    masks.push((name.to_string(), m));
                }
                _ => return Err(bad(ln, "unrecognised line")),
            }
        }

        let config = infer_config(&tensors)?;
        let mut params = ModelParams::zeros(&config);
        let layout = params.layout();
        if layout.tensors.len() != tensors.len() {
            return Err(Error::Checkpoint("tensor list does not form a model".to_string()));
        }
        for ((info, dst), (name, rows, cols, data)) in layout.tensors.iter().zip(params.tensors_mut()).zip(&tensors) {
            if &info.name != name || info.rows != *rows || info.cols != *cols {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {rows}x{cols} where {} {}x{} was expected",
                    info.name, info.rows, info.cols
                )));
            }
            dst.copy_from_slice(data);
        }
        let prunable: Vec<_> = layout.prunable().collect();
        if prunable.len() != masks.len() || prunable.iter().zip(&masks).any(|(i, (n, _))| &i.name != n) {
            return Err(Error::Checkpoint(
                "mask list does not match prunable tensors".to_string(),
            ));
        }
        let mask = PruneMask::from_tensors(masks.into_iter().map(|(_, m)| m).collect());
        if !mask.is_congruent(&params) {
            return Err(Error::Checkpoint("mask shapes do not match parameters".to_string()));
        }
        if vocab.len() != params.vocab_size() {
            return Err(Error::Checkpoint("vocabulary does not match beta".to_string()));
        }
        Ok(Self { vocab, params, mask })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn bad(line: usize, msg: &str) -> Error {
    Error::Checkpoint(format!("line {line}: {msg}"))
}

fn dim(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| bad(line, "bad dimension"))
}

/// Architecture from tensor shapes: encoder widths and the `K × V` beta.
fn infer_config(tensors: &[(String, usize, usize, Vec<f64>)]) -> Result<ModelConfig> {
    let beta = tensors
        .iter()
        .find(|t| t.0 == "beta")
        .ok_or_else(|| Error::Checkpoint("missing beta".to_string()))?;
    let hidden: Vec<usize> = (0..)
        .map_while(|i| {
            let name = format!("encoder.{i}.weight");
            tensors.iter().find(|t| t.0 == name).map(|t| t.1)
        })
        .collect();
    let mut config = ModelConfig::new(beta.2, beta.1);
    config.hidden_sizes = hidden;
    Ok(config)
}
