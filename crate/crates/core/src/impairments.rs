//! RIS and transceiver non-idealities, and the bounded CSI error model.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ImpairmentConfig;
use crate::error::{Error, Result};
use crate::linalg::{complex_normal, norm, wrap_angle, CMat, C64};

/// Uniform `B`-bit phase codebook `{2πm / 2^B}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisCodebook {
    pub bits: u32,
}

impl RisCodebook {
    pub fn new(bits: u32) -> Self {
        Self { bits }
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    pub fn phase(&self, index: usize) -> f64 {
        self.step() * (index % self.levels()) as f64
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.levels()).map(|m| self.phase(m)).collect()
    }

    /// Index of the nearest codebook phase; exact ties go to the smaller index.
    pub fn nearest_index(&self, phase: f64) -> usize {
        let m = self.levels();
        let x = phase.rem_euclid(TAU) / self.step();
        let lo = x.floor();
        let d_lo = x - lo;
        let d_hi = 1.0 - d_lo;
        let lo_idx = (lo as usize) % m;
        let hi_idx = (lo_idx + 1) % m;
        if d_lo < d_hi {
            lo_idx
        } else if d_hi < d_lo {
            hi_idx
        } else {
            lo_idx.min(hi_idx)
        }
    }

    pub fn contains(&self, phase: f64) -> bool {
        let q = quantize_phase(phase, self);
        wrap_angle(phase - q).abs() < 1e-9
    }
}

/// Nearest codebook phase by circular distance.
pub fn quantize_phase(phase: f64, codebook: &RisCodebook) -> f64 {
    codebook.phase(codebook.nearest_index(phase))
}

/// One draw from the von Mises distribution VM(mean, κ) on (−π, π].
///
/// Best–Fisher wrapped-Cauchy rejection. κ = 0 is the uniform circle; very
/// large κ falls back to the Gaussian limit N(mean, 1/κ).
pub fn sample_von_mises<R: Rng + ?Sized>(mean: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa.is_infinite() {
        return wrap_angle(mean);
    }
    if kappa < 1e-12 {
        let u: f64 = rng.gen();
        return wrap_angle(PI - TAU * u);
    }
    if kappa > 1e6 {
        let z: f64 = rng.sample(StandardNormal);
        return wrap_angle(mean + z / kappa.sqrt());
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return wrap_angle(mean + signed);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisImpairmentParams {
    pub jitter_kappa: f64,
    /// One jitter draw shared by every element (rigid-body attitude error).
    pub common_mode_jitter: bool,
    pub extra_phase_noise_std: f64,
    pub amplitude_error_std: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub phase_offset: f64,
    pub exponent: f64,
}

impl RisImpairmentParams {
    pub fn from_config(c: &ImpairmentConfig) -> Self {
        Self {
            jitter_kappa: c.jitter_kappa,
            common_mode_jitter: c.common_mode_jitter,
            extra_phase_noise_std: c.extra_phase_noise_std,
            amplitude_error_std: c.amplitude_error_std,
            beta_min: c.beta_min,
            beta_max: c.beta_max,
            phase_offset: c.pda_phase_offset,
            exponent: c.pda_exponent,
        }
    }

    /// Phase-dependent amplitude `β_min + (β_max − β_min)·((sin(φ − φ₀) + 1)/2)^p`.
    pub fn beta(&self, phase: f64) -> f64 {
        let s = (((phase - self.phase_offset).sin() + 1.0) / 2.0).clamp(0.0, 1.0);
        self.beta_min + (self.beta_max - self.beta_min) * s.powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionState {
    /// Intended codebook phases φ̂.
    pub intended: Vec<f64>,
    /// Realized coefficients ṽ after jitter and amplitude distortion.
    pub realized: Vec<C64>,
}

impl ReflectionState {
    pub fn intended_vector(&self) -> Vec<C64> {
        unit_vector(&self.intended)
    }
}

pub fn unit_vector(phases: &[f64]) -> Vec<C64> {
    phases.iter().map(|&p| C64::from_polar(1.0, p)).collect()
}

/// Apply the RIS impairment chain to intended codebook phases.
///
/// Random draws are consumed in a fixed order that does not depend on the
/// phases, so two calls with identically seeded generators see the same
/// hardware noise.
pub fn realize_reflection<R: Rng + ?Sized>(
    intended: &[f64],
    codebook: &RisCodebook,
    params: &RisImpairmentParams,
    rng: &mut R,
) -> Result<ReflectionState> {
    if let Some(bad) = intended.iter().find(|&&p| !codebook.contains(p)) {
        return Err(Error::Infeasible(format!(
            "intended phase {bad} is not in the {}-bit codebook",
            codebook.bits
        )));
    }
    let common = if params.common_mode_jitter {
        Some(sample_von_mises(0.0, params.jitter_kappa, rng))
    } else {
        None
    };
    let clip = 3.0 * params.amplitude_error_std;
    let realized = intended
        .iter()
        .map(|&target| {
            let jitter = match common {
                Some(j) => j,
                None => sample_von_mises(0.0, params.jitter_kappa, rng),
            };
            let extra: f64 = rng.sample::<f64, _>(StandardNormal) * params.extra_phase_noise_std;
            let amp_err: f64 = (rng.sample::<f64, _>(StandardNormal) * params.amplitude_error_std)
                .clamp(-clip, clip);
            let phase = target + jitter + extra;
            let amplitude = (params.beta(phase) + amp_err).clamp(0.0, 1.0);
            C64::from_polar(amplitude, phase)
        })
        .collect();
    Ok(ReflectionState {
        intended: intended.to_vec(),
        realized,
    })
}

/// Relative CSI error budgets and temporal correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiErrorParams {
    pub user: f64,
    pub eve: f64,
    /// BS-RIS estimation error, folded into both cascaded budgets.
    pub bs_ris: f64,
    pub correlation: f64,
}

impl CsiErrorParams {
    pub fn from_config(c: &ImpairmentConfig) -> Self {
        Self {
            user: c.csi_error_user,
            eve: c.csi_error_eve,
            bs_ris: c.csi_error_br,
            correlation: c.csi_correlation,
        }
    }

    /// Relative squared radius of a user's cascaded error ball.
    pub fn user_radius_sq(&self) -> f64 {
        self.user + self.bs_ris
    }

    pub fn eve_radius_sq(&self) -> f64 {
        self.eve + self.bs_ris
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsiEstimate {
    pub estimate: Vec<C64>,
    pub error: Vec<C64>,
    /// Normalized AR(1) state to pass as `previous` next slot.
    pub state: Vec<C64>,
}

/// Split a true cascaded channel into estimate and error, `g = ĝ + Δg`.
///
/// The error evolves as an AR(1) process in units of `σ_e‖g‖` and is then
/// projected so that `‖Δg‖² ≤ σ²_e ‖g‖²` holds on every draw.
pub fn estimate_csi<R: Rng + ?Sized>(
    g: &[C64],
    radius_sq: f64,
    correlation: f64,
    previous: Option<&[C64]>,
    rng: &mut R,
) -> CsiEstimate {
    let dim = g.len();
    let fresh_scale = (1.0 / dim as f64).sqrt();
    let innovation = (1.0 - correlation * correlation).max(0.0).sqrt();
    let state: Vec<C64> = match previous {
        Some(prev) if prev.len() == dim => prev
            .iter()
            .map(|p| correlation * p + innovation * fresh_scale * complex_normal(rng))
            .collect(),
        _ => (0..dim)
            .map(|_| fresh_scale * complex_normal(rng))
            .collect(),
    };
    let radius = radius_sq.max(0.0).sqrt() * norm(g);
    let state_norm = norm(&state);
    let scale = if state_norm > 1.0 {
        radius / state_norm
    } else {
        radius
    };
    let error: Vec<C64> = state.iter().map(|e| e * scale).collect();
    let estimate = g.iter().zip(&error).map(|(a, b)| a - b).collect();
    CsiEstimate {
        estimate,
        error,
        state,
    }
}

/// Estimate of a cascade matrix whose error is multiplicative per BS antenna:
/// `Ĉ = C · diag(1 − e)` with `|e_m| ≤ σ_e`.
///
/// For any reflection vector the induced cascaded error is `Δg = g ∘ conj(e)`,
/// so `‖Δg‖² ≤ σ²_e ‖g‖²` holds for every RIS configuration at once. The
/// normalized state follows the same AR(1) recursion as [`estimate_csi`].
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEstimate {
    pub estimate: CMat,
    /// Per-antenna error factors `e`.
    pub factors: Vec<C64>,
    pub state: Vec<C64>,
}

pub fn estimate_cascade<R: Rng + ?Sized>(
    cascade: &CMat,
    radius_sq: f64,
    correlation: f64,
    previous: Option<&[C64]>,
    rng: &mut R,
) -> CascadeEstimate {
    let dim = cascade.cols();
    let innovation = (1.0 - correlation * correlation).max(0.0).sqrt();
    let state: Vec<C64> = match previous {
        Some(prev) if prev.len() == dim => prev
            .iter()
            .map(|p| correlation * p + innovation * complex_normal(rng))
            .collect(),
        _ => (0..dim).map(|_| complex_normal(rng)).collect(),
    };
    let sigma = radius_sq.max(0.0).sqrt();
    let factors: Vec<C64> = state
        .iter()
        .map(|z| {
            let m = z.norm();
            if m > 1.0 {
                sigma * z / m
            } else {
                sigma * z
            }
        })
        .collect();
    let mut estimate = cascade.clone();
    for r in 0..estimate.rows() {
        for (x, e) in estimate.row_mut(r).iter_mut().zip(&factors) {
            *x *= 1.0 - e;
        }
    }
    CascadeEstimate {
        estimate,
        factors,
        state,
    }
}

/// Additive distortion variance `evm² · power`.
pub fn apply_evm(signal_power: f64, evm: f64) -> f64 {
    evm * evm * signal_power
}
