//! Sampled secrecy objective over the RIS phases, its softplus surrogate and
//! the analytic Wirtinger gradient of the surrogate.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::CascadeSet;
use crate::error::{Error, Result};
use crate::impairments::unit_vector;
use crate::linalg::{dot, inner, C64};
use crate::metrics::{cvar, Precoder, SinrModel};

use super::UncertaintySample;

/// Statistic of the per-sample SSEs the AO loop maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Worst-α tail mean.
    Cvar { alpha: f64 },
    /// Risk-neutral sample mean.
    Mean,
}

impl Objective {
    pub fn evaluate(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        match *self {
            Objective::Cvar { alpha } => cvar(values, alpha),
            Objective::Mean => Ok(values.iter().sum::<f64>() / values.len() as f64),
        }
    }
}

/// `ln(1 + e^{βx}) / β`, evaluated without overflow.
pub fn softplus(x: f64, sharpness: f64) -> f64 {
    let z = sharpness * x;
    (z.max(0.0) + (-z.abs()).exp().ln_1p()) / sharpness
}

/// Derivative of [`softplus`], the logistic function of `βx`.
pub fn logistic(x: f64, sharpness: f64) -> f64 {
    let z = sharpness * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `C_j w_l` for every receiver/stream pair and `Δg_j^H w_l` for every sample.
///
/// With these, the received amplitude of stream `l` at receiver `j` under
/// sample `s` is `v^T b_jl + c_jl^s`, linear in the reflection vector.
#[derive(Debug, Clone)]
pub struct PrecoderCache {
    streams: usize,
    receivers: usize,
    b: Vec<Vec<C64>>,
    c: Vec<C64>,
}

/// Per-sample SSE terms at a fixed precoder.
#[derive(Debug, Clone, Copy)]
pub struct SampledProblem<'a> {
    pub cascades: &'a CascadeSet,
    pub samples: &'a [UncertaintySample],
    pub model: SinrModel,
    pub objective: Objective,
    pub sharpness: f64,
}

pub(crate) struct Rates {
    /// Per stream: `(T, D)` at the user, `(T, D)` at the eavesdropper.
    pub(crate) user: Vec<(f64, f64)>,
    pub(crate) eve: Vec<(f64, f64)>,
}

impl<'a> SampledProblem<'a> {
    pub fn cache(&self, w: &Precoder) -> Result<PrecoderCache> {
        let streams = w.streams();
        let receivers = self.cascades.receivers();
        if streams != self.cascades.users_count() {
            return Err(Error::DimensionMismatch {
                expected: self.cascades.users_count(),
                found: streams,
            });
        }
        if w.antennas() != self.cascades.bs_antennas() {
            return Err(Error::DimensionMismatch {
                expected: self.cascades.bs_antennas(),
                found: w.antennas(),
            });
        }
        let mut b = Vec::with_capacity(receivers * streams);
        for j in 0..receivers {
            let cj = self.cascades.receiver(j);
            for wl in &w.streams {
                b.push(cj.mul_vec(wl));
            }
        }
        let mut c = Vec::with_capacity(self.samples.len() * receivers * streams);
        for s in self.samples {
            for j in 0..receivers {
                let d = if j < streams { &s.users[j] } else { &s.eve };
                for wl in &w.streams {
                    c.push(inner(d, wl));
                }
            }
        }
        Ok(PrecoderCache {
            streams,
            receivers,
            b,
            c,
        })
    }

    fn base(&self, cache: &PrecoderCache, v: &[C64]) -> Vec<C64> {
        cache.b.iter().map(|b| dot(v, b)).collect()
    }

    fn amplitudes(&self, cache: &PrecoderCache, base: &[C64], s: usize) -> Vec<C64> {
        let off = s * cache.receivers * cache.streams;
        base.iter()
            .zip(&cache.c[off..off + base.len()])
            .map(|(a, c)| a + c)
            .collect()
    }

    fn rates(&self, cache: &PrecoderCache, a: &[C64]) -> Rates {
        rate_terms(a, cache.streams, &self.model)
    }

    /// Exact per-sample SSEs at reflection vector `v`.
    pub fn sample_values_at(&self, cache: &PrecoderCache, v: &[C64]) -> Vec<f64> {
        let base = self.base(cache, v);
        (0..self.samples.len())
            .map(|s| {
                let a = self.amplitudes(cache, &base, s);
                rate_margins(&self.rates(cache, &a))
                    .map(|x| x.max(0.0))
                    .sum()
            })
            .collect()
    }

    pub fn sample_values(&self, cache: &PrecoderCache, phases: &[f64]) -> Vec<f64> {
        self.sample_values_at(cache, &unit_vector(phases))
    }

    /// Exact objective `J` at the given phases.
    pub fn value(&self, cache: &PrecoderCache, phases: &[f64]) -> Result<f64> {
        self.objective.evaluate(&self.sample_values(cache, phases))
    }

    fn smooth_sample_values(
        &self,
        cache: &PrecoderCache,
        base: &[C64],
    ) -> Vec<(Vec<C64>, Rates, f64)> {
        (0..self.samples.len())
            .map(|s| {
                let a = self.amplitudes(cache, base, s);
                let r = self.rates(cache, &a);
                let value = rate_margins(&r).map(|x| softplus(x, self.sharpness)).sum();
                (a, r, value)
            })
            .collect()
    }

    fn combine(&self, values: &[f64], tau: f64) -> (f64, Vec<f64>) {
        let n = values.len() as f64;
        match self.objective {
            Objective::Cvar { alpha } => {
                let scale = 1.0 / (alpha * n);
                let mut total = tau;
                let weights = values
                    .iter()
                    .map(|&r| {
                        total -= scale * softplus(tau - r, self.sharpness);
                        scale * logistic(tau - r, self.sharpness)
                    })
                    .collect();
                (total, weights)
            }
            Objective::Mean => (values.iter().sum::<f64>() / n, vec![1.0 / n; values.len()]),
        }
    }

    /// Surrogate objective at fixed epigraph level `tau`: every `[·]⁺` is
    /// replaced by a softplus. `tau` is ignored for the mean objective.
    pub fn smooth_value(&self, cache: &PrecoderCache, phases: &[f64], tau: f64) -> f64 {
        let base = self.base(cache, &unit_vector(phases));
        let values: Vec<f64> = self
            .smooth_sample_values(cache, &base)
            .into_iter()
            .map(|(_, _, v)| v)
            .collect();
        self.combine(&values, tau).0
    }

    /// Surrogate value and its gradient with respect to the phases.
    pub fn smooth_gradient(
        &self,
        cache: &PrecoderCache,
        phases: &[f64],
        tau: f64,
    ) -> (f64, Vec<f64>) {
        let v = unit_vector(phases);
        let base = self.base(cache, &v);
        let per_sample = self.smooth_sample_values(cache, &base);
        let values: Vec<f64> = per_sample.iter().map(|p| p.2).collect();
        let (total, weights) = self.combine(&values, tau);

        let mut omega = vec![C64::new(0.0, 0.0); cache.b.len()];
        for ((a, r, _), &ws) in per_sample.iter().zip(&weights) {
            let kappa = power_sensitivities(r, a, cache.streams, &self.model, self.sharpness);
            for ((om, ai), kp) in omega.iter_mut().zip(a).zip(kappa) {
                *om += ws * kp * ai;
            }
        }

        let mut grad_conj = vec![C64::new(0.0, 0.0); v.len()];
        for (om, b) in omega.iter().zip(&cache.b) {
            if *om == C64::new(0.0, 0.0) {
                continue;
            }
            for (g, bn) in grad_conj.iter_mut().zip(b) {
                *g += om * bn.conj();
            }
        }
        let minus_j = C64::new(0.0, -1.0);
        let grad = grad_conj
            .iter()
            .zip(&v)
            .map(|(g, vn)| 2.0 * (g * minus_j * vn.conj()).re)
            .collect();
        (total, grad)
    }
}

/// `(T, D)` pairs of every legitimate and wiretap rate for amplitudes `a`
/// laid out receiver-major (`a[j·K + l]`, eavesdropper last).
pub(crate) fn rate_terms(a: &[C64], streams: usize, model: &SinrModel) -> Rates {
    let k = streams;
    let sigma2 = model.noise;
    let du = model.user_distortion();
    let de = model.eve_distortion();
    let power = |j: usize| -> f64 { (0..k).map(|l| a[j * k + l].norm_sqr()).sum() };
    let user = (0..k)
        .map(|m| {
            let t = (1.0 + du) * power(m) + sigma2;
            (t, t - a[m * k + m].norm_sqr())
        })
        .collect();
    let te = (1.0 + de) * power(k) + sigma2;
    let eve = (0..k).map(|m| (te, te - a[k * k + m].norm_sqr())).collect();
    Rates { user, eve }
}

/// Per-stream secrecy margins `log₂(1+γ_Mk) − log₂(1+γ_Ek)`.
pub(crate) fn rate_margins(r: &Rates) -> impl Iterator<Item = f64> + '_ {
    r.user
        .iter()
        .zip(&r.eve)
        .map(|(&(tu, du), &(te, de))| ((tu / du).ln() - (te / de).ln()) / LN_2)
}

/// Real weights `κ_jl` with `∂R̃/∂x* = Σ κ_jl ∂|a_jl|²/∂x*` for the softplus
/// surrogate `R̃` of one sample's SSE.
pub(crate) fn power_sensitivities(
    r: &Rates,
    a: &[C64],
    streams: usize,
    model: &SinrModel,
    sharpness: f64,
) -> Vec<f64> {
    let k = streams;
    let du = model.user_distortion();
    let de = model.eve_distortion();
    let mut kappa = vec![0.0; a.len()];
    for (m, x) in rate_margins(r).enumerate() {
        let u = logistic(x, sharpness) / LN_2;

        let (tu, dm) = r.user[m];
        let sig_u = a[m * k + m].norm_sqr();
        let common_u = -u * (1.0 + du) * sig_u / (tu * dm);
        for l in 0..k {
            kappa[m * k + l] += common_u;
        }
        kappa[m * k + m] += u / dm;

        let (te, dme) = r.eve[m];
        let sig_e = a[k * k + m].norm_sqr();
        let common_e = u * (1.0 + de) * sig_e / (te * dme);
        for l in 0..k {
            kappa[k * k + l] += common_e;
        }
        kappa[k * k + m] -= u / dme;
    }
    kappa
}
