//! SINRs, secrecy spectral efficiency, the empirical CVaR and summary statistics.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::impairments::apply_evm;
use crate::linalg::{inner, norm_sq, C64};
use crate::stage2::UncertaintySample;

/// Per-stream precoders `W = [w_1 … w_K]`, stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precoder {
    pub streams: Vec<Vec<C64>>,
}

impl Precoder {
    pub fn new(streams: Vec<Vec<C64>>) -> Self {
        Self { streams }
    }

    pub fn streams(&self) -> usize {
        self.streams.len()
    }

    pub fn antennas(&self) -> usize {
        self.streams.first().map_or(0, Vec::len)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.streams.iter().map(|w| norm_sq(w)).sum()
    }

    /// Transmit power on each antenna, `Σ_k |W[n, k]|²`.
    pub fn antenna_powers(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.antennas()];
        for w in &self.streams {
            for (pn, z) in p.iter_mut().zip(w) {
                *pn += z.norm_sqr();
            }
        }
        p
    }

    pub fn max_antenna_power(&self) -> f64 {
        self.antenna_powers().into_iter().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, p_max: f64, per_antenna: f64) -> bool {
        let tol = 1e-12;
        self.frobenius_sq() <= p_max * (1.0 + tol)
            && self.max_antenna_power() <= per_antenna * (1.0 + tol)
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.streams {
            for z in w.iter_mut() {
                *z *= s;
            }
        }
    }
}

/// `|g^H w_k|² / (Σ_{j≠k} |g^H w_j|² + σ²)`, with `noise_var` holding σ² plus
/// any distortion power.
pub fn sinr(g: &[C64], w: &Precoder, k: usize, noise_var: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, wj) in w.streams.iter().enumerate() {
        let p = inner(g, wj).norm_sqr();
        if j == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise_var)
}

/// Noise and hardware-distortion model shared by every SINR evaluation.
///
/// Distortion is additive with variance `EVM² × received signal power`: the BS
/// EVM affects every receiver, the user EVM only the legitimate users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrModel {
    pub noise: f64,
    pub evm_bs: f64,
    pub evm_user: f64,
}

impl SinrModel {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            noise: cfg.system.noise_power_w(),
            evm_bs: cfg.impairments.evm_bs,
            evm_user: cfg.impairments.evm_user,
        }
    }

    /// Distortion-to-signal power ratio at a user.
    pub fn user_distortion(&self) -> f64 {
        self.evm_bs * self.evm_bs + self.evm_user * self.evm_user
    }

    /// Distortion-to-signal power ratio at the eavesdropper.
    pub fn eve_distortion(&self) -> f64 {
        self.evm_bs * self.evm_bs
    }

    fn total_power(g: &[C64], w: &Precoder) -> f64 {
        w.streams.iter().map(|wj| inner(g, wj).norm_sqr()).sum()
    }

    pub fn user_sinr(&self, g: &[C64], w: &Precoder, k: usize) -> f64 {
        let p = Self::total_power(g, w);
        let distortion = apply_evm(p, self.evm_bs) + apply_evm(p, self.evm_user);
        sinr(g, w, k, self.noise + distortion)
    }

    pub fn eve_sinr(&self, g_eve: &[C64], w: &Precoder, k: usize) -> f64 {
        let p = Self::total_power(g_eve, w);
        sinr(g_eve, w, k, self.noise + apply_evm(p, self.evm_bs))
    }

    /// Secrecy SE for user channels `g_users` and eavesdropper channel `g_eve`.
    pub fn sse(&self, g_users: &[Vec<C64>], g_eve: &[C64], w: &Precoder) -> f64 {
        let gm: Vec<f64> = g_users
            .iter()
            .enumerate()
            .map(|(k, g)| self.user_sinr(g, w, k))
            .collect();
        let ge: Vec<f64> = (0..g_users.len())
            .map(|k| self.eve_sinr(g_eve, w, k))
            .collect();
        secrecy_sse(&gm, &ge)
    }
}

/// `Σ_k [log₂(1+γ_Mk) − log₂(1+γ_Ek)]⁺`.
pub fn secrecy_sse(user_sinrs: &[f64], eve_sinrs: &[f64]) -> f64 {
    user_sinrs
        .iter()
        .zip(eve_sinrs)
        .map(|(gm, ge)| ((1.0 + gm).log2() - (1.0 + ge).log2()).max(0.0))
        .sum()
}

/// Minimum SSE over the sample set, each sample perturbing the nominal
/// cascaded channels `g_users`, `g_eve` (the estimates at the current RIS state).
pub fn worst_case_sse(
    w: &Precoder,
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    samples: &[UncertaintySample],
    model: &SinrModel,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut worst = f64::INFINITY;
    for s in samples {
        let users: Vec<Vec<C64>> = g_users
            .iter()
            .zip(&s.users)
            .map(|(g, d)| g.iter().zip(d).map(|(a, b)| a + b).collect())
            .collect();
        let eve: Vec<C64> = g_eve.iter().zip(&s.eve).map(|(a, b)| a + b).collect();
        worst = worst.min(model.sse(&users, &eve, w));
    }
    Ok(worst)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRiskLevel(alpha))
    }
}

/// Number of order statistics in the worst-α tail, `⌈αL⌉`, robust to
/// floating-point noise in the product.
pub(crate) fn tail_count(alpha: f64, len: usize) -> usize {
    let k = alpha * len as f64;
    ((k - 1e-9).ceil() as usize).clamp(1, len)
}

/// Empirical lower-tail CVaR, `max_τ {τ − (1/(αL)) Σ [τ − R_l]⁺}`.
///
/// Closed form: the mean of the worst `αL` samples, the boundary order
/// statistic carrying the fractional weight.
pub fn cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = alpha * sorted.len() as f64;
    let m = tail_count(alpha, sorted.len());
    let full = m - 1;
    let head: f64 = sorted[..full].iter().sum();
    let frac = k - full as f64;
    Ok((head + frac * sorted[full]) / k)
}

/// Percentile with linear interpolation between order statistics
/// (position `(L−1)·p`), `p ∈ [0, 1]`.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fraction of samples strictly below `threshold`.
pub fn outage_probability(samples: &[f64], threshold: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|&&x| x < threshold).count() as f64 / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub p10: f64,
    pub p20: f64,
    pub p50: f64,
    pub mean: f64,
    /// Coefficient of variation with the population standard deviation.
    pub cv: f64,
    pub outage: f64,
    pub outage_threshold: f64,
    pub count: usize,
}

pub fn summary_stats(samples: &[f64], outage_threshold: f64) -> Result<SummaryStats> {
    if samples.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::UndefinedCv);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(SummaryStats {
        p10: percentile_sorted(&sorted, 0.10),
        p20: percentile_sorted(&sorted, 0.20),
        p50: percentile_sorted(&sorted, 0.50),
        mean,
        cv: var.sqrt() / mean,
        outage: outage_probability(samples, outage_threshold),
        outage_threshold,
        count: samples.len(),
    })
}
