use crate::error::{Error, Result};
use crate::pruning::PruneMask;

use super::{Gradients, ModelConfig, ModelParams, OptimizerKind};

/// Adam moments per tensor (empty for SGD) and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One optimizer step. Masked entries get no update, are forced to zero and
/// have their moments cleared.
pub fn apply_update(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    mask: &PruneMask,
    config: &ModelConfig,
) -> Result<()> {
    if !params.is_congruent(grads) {
        return Err(Error::shape("gradients do not match parameters".to_string()));
    }
    if !mask.is_congruent(params) {
        return Err(Error::shape("mask does not match parameters".to_string()));
    }
    let layout = params.layout();
    if state.m.len() != layout.tensors.len() {
        return Err(Error::shape("optimizer state does not match parameters".to_string()));
    }
    state.step += 1;
    let lr = config.learning_rate;
    let t = state.step as i32;
    let grads = grads.tensors();
    let mut prunable_idx = 0;
    for (ti, (p, info)) in params.tensors_mut().into_iter().zip(&layout.tensors).enumerate() {
        let bits = if info.prunable {
            prunable_idx += 1;
            Some(mask.tensor(prunable_idx - 1).bits())
        } else {
            None
        };
        let g = grads[ti];
        let (m, v) = (&mut state.m[ti], &mut state.v[ti]);
        match config.optimizer {
            OptimizerKind::Sgd => {
                for j in 0..p.len() {
                    if bits.is_some_and(|b| !b[j]) {
                        p[j] = 0.0;
                        continue;
                    }
                    p[j] -= lr * g[j];
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for j in 0..p.len() {
                    if bits.is_some_and(|b| !b[j]) {
                        p[j] = 0.0;
                        m[j] = 0.0;
                        v[j] = 0.0;
                        continue;
                    }
                    m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                    v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                    let m_hat = m[j] / c1;
                    let v_hat = v[j] / c2;
                    p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn tiny(opt: OptimizerKind, lr: f64) -> (ModelConfig, ModelParams) {
        let mut cfg = ModelConfig::new(2, 2);
        cfg.hidden_sizes = vec![1];
        cfg.optimizer = opt;
        cfg.learning_rate = lr;
        let p = ModelParams::zeros(&cfg);
        (cfg, p)
    }

    #[test]
    fn sgd_rule() {
        let (cfg, mut p) = tiny(OptimizerKind::Sgd, 0.1);
        p.beta = Matrix::from_vec(2, 2, vec![1.0; 4]);
        let mut g = p.zeros_like();
        g.beta = Matrix::from_vec(2, 2, vec![2.0; 4]);
        let mut st = OptimizerState::new(&p);
        let mask = PruneMask::all_ones(&p);
        apply_update(&mut p, &g, &mut st, &mask, &cfg).unwrap();
        assert!(p.beta.as_slice().iter().all(|&w| (w - 0.8).abs() < 1e-15));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let (cfg, mut p) = tiny(OptimizerKind::default(), 1e-3);
        let mut g = p.zeros_like();
        for t in g.tensors_mut() {
            t.fill(1.0);
        }
        let mut st = OptimizerState::new(&p);
        let mask = PruneMask::all_ones(&p);
        apply_update(&mut p, &g, &mut st, &mask, &cfg).unwrap();
        // m_hat = 1, v_hat = 1 => step = lr / (1 + eps).
        let expect = -1e-3 / (1.0 + 1e-8);
        for t in p.tensors() {
            for &w in t {
                assert!((w - expect).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn masked_entries_stay_zero() {
        for opt in [OptimizerKind::Sgd, OptimizerKind::default()] {
            let (cfg, mut p) = tiny(opt, 0.5);
            p.beta = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
            let mut mask = PruneMask::all_ones(&p);
            let last = mask.len() - 1;
            mask.tensor_mut(last).set(1, false);
            let mut st = OptimizerState::new(&p);
            let mut g = p.zeros_like();
            for t in g.tensors_mut() {
                t.fill(-3.0);
            }
            for _ in 0..5 {
                apply_update(&mut p, &g, &mut st, &mask, &cfg).unwrap();
                assert_eq!(p.beta.as_slice()[1], 0.0);
            }
            if !st.m.is_empty() {
                let bi = st.m.len() - 1;
                assert_eq!(st.m[bi][1], 0.0);
                assert_eq!(st.v[bi][1], 0.0);
            }
            assert!(p.beta.as_slice()[0] > 1.0);
        }
    }
}
