use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::tail_count;

/// Epigraph variables of the sampled CVaR problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpigraphState {
    pub tau: f64,
    pub slacks: Vec<f64>,
    pub alpha: f64,
}

impl EpigraphState {
    /// `τ − (1/(α N_s)) Σ s_s`.
    pub fn objective(&self) -> f64 {
        let n = self.slacks.len() as f64;
        self.tau - self.slacks.iter().sum::<f64>() / (self.alpha * n)
    }

    /// Whether `s_s ≥ max(0, τ − R_s)` holds for every sample.
    pub fn satisfies(&self, values: &[f64]) -> bool {
        self.slacks.len() == values.len()
            && self
                .slacks
                .iter()
                .zip(values)
                .all(|(&s, &r)| s >= 0.0 && s >= self.tau - r)
    }
}

/// Optimal epigraph variables for fixed per-sample SSEs: `τ*` is the boundary
/// order statistic of the worst-α tail and `s_s* = [τ* − R_s]⁺`.
pub fn epigraph_update(values: &[f64], alpha: f64) -> Result<EpigraphState> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidRiskLevel(alpha));
    }
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tau = sorted[tail_count(alpha, sorted.len()) - 1];
    let slacks = values.iter().map(|&r| (tau - r).max(0.0)).collect();
    Ok(EpigraphState { tau, slacks, alpha })
}
