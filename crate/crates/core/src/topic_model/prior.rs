use crate::error::{Error, Result};

/// Diagonal Gaussian prior in the softmax basis (Laplace approximation of a
/// Dirichlet).
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticNormalPrior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl LogisticNormalPrior {
    /// Symmetric Dirichlet(alpha) over `k` topics.
    pub fn from_alpha(alpha: f64, k: usize) -> Result<Self> {
        Self::from_alphas(&vec![alpha; k])
    }

    /// `mean_k = ln a_k - mean(ln a)`,
    /// `var_k = (1/a_k)(1 - 2/K) + (1/K²) Σ 1/a_i`.
    pub fn from_alphas(alphas: &[f64]) -> Result<Self> {
        let k = alphas.len();
        if k < 2 {
            return Err(Error::invalid("prior needs at least 2 topics"));
        }
        if alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("dirichlet concentrations must be positive"));
        }
        let kf = k as f64;
        let inv_sum: f64 = alphas.iter().map(|a| 1.0 / a).sum();
        // Written as a mean of log-ratios so equal concentrations give 0 exactly.
        let mean = alphas
            .iter()
            .map(|a| alphas.iter().map(|b| (a / b).ln()).sum::<f64>() / kf)
            .collect();
        let var = alphas
            .iter()
            .map(|a| (1.0 / a) * (1.0 - 2.0 / kf) + inv_sum / (kf * kf))
            .collect();
        Ok(Self { mean, var })
    }

    pub fn num_topics(&self) -> usize {
        self.mean.len()
    }

    pub fn log_var(&self) -> Vec<f64> {
        self.var.iter().map(|v| v.ln()).collect()
    }
}
