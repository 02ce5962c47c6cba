//! Pruning masks, accumulated-gradient statistics, density schedules and
//! mask selection with gradient-based recovery.
//!
//! Pruning is unstructured: every entry of every weight matrix (encoder
//! layers, both heads and `beta`) is individually maskable. Biases are never
//! pruned.
//!
//! Mask selection ranks all prunable entries jointly by
//!
//! ```text
//! score_j = |w_j| + lr * sqrt(Z_j / max(steps, 1))
//! ```
//!
//! where `Z_j` is the accumulated squared gradient. An entry whose weight is
//! currently zero can therefore re-enter the kept set purely on its gradient
//! history.

use std::borrow::Borrow;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topic_model::{Gradients, ModelParams};

/// Binary mask for one weight matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTensor {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl MaskTensor {
    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        Self {
            rows,
            cols,
            bits: vec![value; rows * cols],
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} mask bits for a {rows}x{cols} tensor",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.bits[idx] = value;
    }

    pub fn active(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bit-packed (LSB first within each byte), lowercase hex.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(8) * 2);
        for chunk in self.bits.chunks(8) {
            let byte = chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << i));
            write!(out, "{byte:02x}").expect("writing to a String");
        }
        out
    }

    pub fn from_hex(rows: usize, cols: usize, hex: &str) -> Result<Self> {
        let n = rows * cols;
        if hex.len() != n.div_ceil(8) * 2 {
            return Err(Error::shape(format!(
                "packed mask has {} hex digits, expected {}",
                hex.len(),
                n.div_ceil(8) * 2
            )));
        }
        let mut bits = Vec::with_capacity(n);
        for i in 0..hex.len() / 2 {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::invalid(format!("packed mask: {e}")))?;
            for b in 0..8 {
                if bits.len() < n {
                    bits.push(byte >> b & 1 == 1);
                }
            }
        }
        Ok(Self { rows, cols, bits })
    }
}

/// Masks for all prunable tensors of a model, in layout order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    tensors: Vec<MaskTensor>,
}

impl PruneMask {
    pub fn all_ones(params: &ModelParams) -> Self {
        Self {
            tensors: params
                .prunable()
                .iter()
                .map(|m| MaskTensor::filled(m.rows(), m.cols(), true))
                .collect(),
        }
    }

    pub fn from_tensors(tensors: Vec<MaskTensor>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[MaskTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &MaskTensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut MaskTensor {
        &mut self.tensors[i]
    }

    /// Number of mask tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total(&self) -> usize {
        self.tensors.iter().map(MaskTensor::len).sum()
    }

    pub fn active(&self) -> usize {
        self.tensors.iter().map(MaskTensor::active).sum()
    }

    /// Active fraction of prunable entries; 1.0 when there are none.
    pub fn density(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            1.0
        } else {
            self.active() as f64 / total as f64
        }
    }

    pub fn is_congruent(&self, params: &ModelParams) -> bool {
        let p = params.prunable();
        p.len() == self.tensors.len() && p.iter().zip(&self.tensors).all(|(w, m)| w.shape() == (m.rows, m.cols))
    }

    /// True when every masked entry of `params` is exactly zero.
    pub fn is_satisfied_by(&self, params: &ModelParams) -> bool {
        self.is_congruent(params)
            && params
                .prunable()
                .iter()
                .zip(&self.tensors)
                .all(|(w, m)| w.as_slice().iter().zip(&m.bits).all(|(&v, &b)| b || v == 0.0))
    }
}

/// Per-entry sum of squared gradients over prunable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    sums: Vec<Vec<f64>>,
    step_count: u64,
}

impl GradientAccumulator {
    pub fn zeros_for(params: &ModelParams) -> Self {
        Self {
            sums: params
                .prunable()
                .iter()
                .map(|m| vec![0.0; m.as_slice().len()])
                .collect(),
            step_count: 0,
        }
    }

    pub fn from_sums(sums: Vec<Vec<f64>>, step_count: u64) -> Result<Self> {
        if sums.iter().flatten().any(|&z| !(z >= 0.0 && z.is_finite())) {
            return Err(Error::invalid(
                "accumulated squared gradients must be finite and non-negative",
            ));
        }
        Ok(Self { sums, step_count })
    }

    pub fn sums(&self) -> &[Vec<f64>] {
        &self.sums
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    fn same_shape(&self, other: &[&[f64]]) -> bool {
        self.sums.len() == other.len() && self.sums.iter().zip(other).all(|(a, b)| a.len() == b.len())
    }

    /// `Z += g²` over prunable tensors and count one step.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        let g: Vec<&[f64]> = grads.prunable().iter().map(|m| m.as_slice()).collect();
        if !self.same_shape(&g) {
            return Err(Error::shape("gradients do not match accumulator".to_string()));
        }
        for (z, g) in self.sums.iter_mut().zip(g) {
            for (z, &g) in z.iter_mut().zip(g) {
                *z += g * g;
            }
        }
        self.step_count += 1;
        Ok(())
    }

    pub fn reset(&mut self) {
        for z in &mut self.sums {
            z.fill(0.0);
        }
        self.step_count = 0;
    }
}

/// Weighted mean of client accumulators. The step count is the weighted mean
/// step count, rounded.
pub fn aggregate_accumulators<Z: Borrow<GradientAccumulator>>(
    zs: &[Z],
    weights: &[f64],
) -> Result<GradientAccumulator> {
    let norm = normalized_weights(zs.len(), weights)?;
    let zs: Vec<&GradientAccumulator> = zs.iter().map(Borrow::borrow).collect();
    let first = zs[0];
    let shape: Vec<&[f64]> = first.sums.iter().map(Vec::as_slice).collect();
    if zs.iter().any(|z| !z.same_shape(&shape)) {
        return Err(Error::shape("accumulators differ in shape".to_string()));
    }
    let mut sums: Vec<Vec<f64>> = first
        .sums
        .iter()
        .map(|t| t.iter().map(|&v| norm[0] * v).collect())
        .collect();
    for (z, &w) in zs.iter().zip(&norm).skip(1) {
        for (dst, src) in sums.iter_mut().zip(&z.sums) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    let steps: f64 = zs.iter().zip(&norm).map(|(z, &w)| w * z.step_count as f64).sum();
    Ok(GradientAccumulator {
        sums,
        step_count: steps.round() as u64,
    })
}

/// Validates and normalises aggregation weights to sum to one.
pub(crate) fn normalized_weights(n: usize, weights: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("cannot aggregate an empty list"));
    }
    if weights.len() != n {
        return Err(Error::invalid(format!("{} weights for {n} items", weights.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("aggregation weights must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("aggregation weights must not all be zero"));
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Linear density ramp over the whole run.
    Normal,
    /// Linear ramp finished after `ramp_fraction` of the run, then constant.
    Fast { ramp_fraction: f64 },
}

impl ScheduleKind {
    pub const DEFAULT_RAMP_FRACTION: f64 = 0.2;

    pub fn fast() -> Self {
        ScheduleKind::Fast {
            ramp_fraction: Self::DEFAULT_RAMP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    pub kind: ScheduleKind,
    pub final_density: f64,
    pub total_rounds: usize,
    /// Pruning happens after round `r` when `r > 0` and `r % prune_interval == 0`.
    pub prune_interval: usize,
}

impl PruneSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.final_density > 0.0 && self.final_density <= 1.0) {
            return Err(Error::invalid(format!(
                "final_density must lie in (0, 1], got {}",
                self.final_density
            )));
        }
        if self.prune_interval == 0 {
            return Err(Error::invalid("prune_interval must be at least 1"));
        }
        if let ScheduleKind::Fast { ramp_fraction } = self.kind {
            if !(ramp_fraction > 0.0 && ramp_fraction <= 1.0) {
                return Err(Error::invalid(format!(
                    "ramp_fraction must lie in (0, 1], got {ramp_fraction}"
                )));
            }
        }
        Ok(())
    }

    /// Round at which the final density is reached.
    pub fn horizon(&self) -> f64 {
        let r = self.total_rounds as f64;
        match self.kind {
            ScheduleKind::Normal => r,
            ScheduleKind::Fast { ramp_fraction } => ramp_fraction * r,
        }
    }

    /// Target density after round `round`.
    pub fn target_density(&self, round: usize) -> f64 {
        if round == 0 {
            return 1.0;
        }
        let h = self.horizon();
        let k = round as f64;
        if h <= 0.0 || k >= h {
            return self.final_density;
        }
        1.0 - (k / h) * (1.0 - self.final_density)
    }

    pub fn is_pruning_round(&self, round: usize) -> bool {
        round > 0 && self.prune_interval > 0 && round.is_multiple_of(self.prune_interval)
    }
}

/// `|w| + lr * sqrt(Z / max(steps, 1))` for every prunable entry, flattened.
pub fn importance_scores(weights: &[&[f64]], z: &GradientAccumulator, lr: f64) -> Result<Vec<f64>> {
    if !z.same_shape(weights) {
        return Err(Error::shape("accumulator does not match weights".to_string()));
    }
    let steps = z.step_count.max(1) as f64;
    Ok(weights
        .iter()
        .zip(&z.sums)
        .flat_map(|(w, zt)| w.iter().zip(zt).map(move |(&w, &z)| w.abs() + lr * (z / steps).sqrt()))
        .collect())
}

/// Number of entries kept at density `d` out of `total`.
pub fn keep_count(d: f64, total: usize) -> usize {
    if total == 0 {
        return 0;
    }
    ((d * total as f64).round() as usize).clamp(1, total)
}

/// Mask bits for arbitrary tensors. See [`select_mask`].
pub fn select_mask_tensors(
    weights: &[&[f64]],
    z: &GradientAccumulator,
    density: f64,
    lr: f64,
) -> Result<Vec<Vec<bool>>> {
    if density.is_nan() || density <= 0.0 || density > 1.0 {
        return Err(Error::invalid(format!("density must lie in (0, 1], got {density}")));
    }
    let scores = importance_scores(weights, z, lr)?;
    let n_keep = keep_count(density, scores.len());
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut kept = vec![false; scores.len()];
    for &j in &ranked[..n_keep] {
        kept[j] = true;
    }

    let mut out = Vec::with_capacity(weights.len());
    let mut offset = 0;
    for w in weights {
        out.push(kept[offset..offset + w.len()].to_vec());
        offset += w.len();
    }
    Ok(out)
}

/// Global top-k mask over all prunable weights of `params`, keeping
/// `round(density * M)` entries (at least one).
pub fn select_mask(params: &ModelParams, z: &GradientAccumulator, density: f64, lr: f64) -> Result<PruneMask> {
    let prunable = params.prunable();
    let weights: Vec<&[f64]> = prunable.iter().map(|m| m.as_slice()).collect();
    let bits = select_mask_tensors(&weights, z, density, lr)?;
    Ok(PruneMask {
        tensors: prunable
            .iter()
            .zip(bits)
            .map(|(m, bits)| MaskTensor {
                rows: m.rows(),
                cols: m.cols(),
                bits,
            })
            .collect(),
    })
}

/// Zeroes every masked prunable entry; biases are untouched.
pub fn apply_mask(params: &mut ModelParams, mask: &PruneMask) -> Result<()> {
    if !mask.is_congruent(params) {
        return Err(Error::shape("mask does not match parameters".to_string()));
    }
    for (w, m) in params.prunable_mut().into_iter().zip(&mask.tensors) {
        for (v, &b) in w.as_mut_slice().iter_mut().zip(&m.bits) {
            if !b {
                *v = 0.0;
            }
        }
    }
    Ok(())
}
