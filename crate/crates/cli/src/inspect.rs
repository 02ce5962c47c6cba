//! Human-readable checkpoint summary.

use std::fmt::Write as _;

use fedtopic::checkpoint::Checkpoint;
use fedtopic::metrics::{model_size, top_words};

pub const TOP_WORDS: usize = 10;

pub fn describe(ck: &Checkpoint) -> fedtopic::Result<String> {
    let layout = ck.params.layout();
    let size = model_size(&ck.mask, &layout)?;
    let mut out = String::new();
    let _ = writeln!(out, "vocabulary: {} tokens", ck.vocab.len());
    let _ = writeln!(out, "tensors:");
    let mut prunable = ck.mask.tensors().iter();
    for info in &layout.tensors {
        let _ = write!(out, "  {:<24} {:>5} x {:<5}", info.name, info.rows, info.cols);
        if info.prunable {
            if let Some(m) = prunable.next() {
                let _ = write!(out, " active {}/{}", m.active(), m.len());
            }
        }
        out.push('\n');
    }
    let _ = writeln!(out, "density: {:.4}", size.density);
    let _ = writeln!(out, "active parameters: {}", size.active_params);
    let topics = top_words(&ck.params.beta, TOP_WORDS.min(ck.vocab.len()))?;
    let _ = writeln!(out, "top words:");
    for (k, words) in topics.topics.iter().enumerate() {
        let names: Vec<&str> = words.iter().filter_map(|&i| ck.vocab.token(i)).collect();
        let _ = writeln!(out, "  topic {k:>3}: {}", names.join(" "));
    }
    Ok(out)
}
