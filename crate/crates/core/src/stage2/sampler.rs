//! SAA sample generation around the nominal cascaded channels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_normal, inner, norm, norm_sq, C64};
use crate::metrics::{Precoder, SinrModel};

use super::objective::{power_sensitivities, rate_terms};

/// One joint perturbation of every cascaded channel estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySample {
    /// `Δg_Mk`, one per user.
    pub users: Vec<Vec<C64>>,
    /// `Δg_E`.
    pub eve: Vec<C64>,
}

impl UncertaintySample {
    pub fn zero(users: usize, antennas: usize) -> Self {
        Self {
            users: vec![vec![C64::new(0.0, 0.0); antennas]; users],
            eve: vec![C64::new(0.0, 0.0); antennas],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.users
            .iter()
            .chain(std::iter::once(&self.eve))
            .all(|d| d.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    /// Whether every component lies in its relative error ball
    /// `‖Δg_j‖² ≤ σ²_j ‖ĝ_j‖²` (with a small relative slack for rounding).
    pub fn within_balls(
        &self,
        g_users: &[Vec<C64>],
        g_eve: &[C64],
        user_radius_sq: f64,
        eve_radius_sq: f64,
    ) -> bool {
        let inside =
            |d: &[C64], g: &[C64], r2: f64| norm_sq(d) <= r2 * norm_sq(g) * (1.0 + 1e-9) + 1e-300;
        self.users
            .iter()
            .zip(g_users)
            .all(|(d, g)| inside(d, g, user_radius_sq))
            && inside(&self.eve, g_eve, eve_radius_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Number of samples `N_s`, the zero anchor included.
    pub count: usize,
    /// Perturbation scale relative to `‖ĝ_j‖`.
    pub radius: f64,
    /// Adversarial descent steps per sample; 0 gives isotropic samples.
    pub steps: usize,
    pub user_radius_sq: f64,
    pub eve_radius_sq: f64,
    pub sharpness: f64,
}

fn project(d: &mut [C64], g: &[C64], radius_sq: f64) {
    let limit = radius_sq.max(0.0).sqrt() * norm(g);
    let n = norm(d);
    if n > limit {
        let s = if n > 0.0 { limit / n } else { 0.0 };
        d.iter_mut().for_each(|z| *z *= s);
    }
}

fn isotropic<R: Rng + ?Sized>(g: &[C64], radius: f64, rng: &mut R) -> Vec<C64> {
    let scale = radius * norm(g) / (g.len() as f64).sqrt();
    (0..g.len()).map(|_| scale * complex_normal(rng)).collect()
}

/// Gradient of the smoothed SSE with respect to each conjugate perturbation
/// `Δg_j*`, receivers in canonical order (eavesdropper last).
fn perturbation_gradient(
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    sample: &UncertaintySample,
    w: &Precoder,
    model: &SinrModel,
    sharpness: f64,
) -> Vec<Vec<C64>> {
    let k = w.streams();
    let channels: Vec<Vec<C64>> = g_users
        .iter()
        .zip(&sample.users)
        .chain(std::iter::once((&g_eve.to_vec(), &sample.eve)))
        .map(|(g, d)| g.iter().zip(d).map(|(a, b)| a + b).collect())
        .collect();
    let mut a = Vec::with_capacity((k + 1) * k);
    for g in &channels {
        for wl in &w.streams {
            a.push(inner(g, wl));
        }
    }
    let r = rate_terms(&a, k, model);
    let kappa = power_sensitivities(&r, &a, k, model, sharpness);
    channels
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let mut grad = vec![C64::new(0.0, 0.0); g.len()];
            for (l, wl) in w.streams.iter().enumerate() {
                let coef = kappa[j * k + l] * a[j * k + l].conj();
                for (x, wn) in grad.iter_mut().zip(wl) {
                    *x += coef * wn;
                }
            }
            grad
        })
        .collect()
}

/// Draw `N_s` perturbation samples around the nominal estimates.
///
/// Sample 0 is the zero perturbation. Each other sample starts from an
/// isotropic draw of norm about `ε‖ĝ_j‖`, takes `A` normalized descent steps
/// of length `ε‖ĝ_j‖/A` on the smoothed SSE, and is finally projected onto
/// its error ball.
pub fn adversarial_sample<R: Rng + ?Sized>(
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    w: &Precoder,
    model: &SinrModel,
    params: &SamplerParams,
    rng: &mut R,
) -> Vec<UncertaintySample> {
    let n = g_eve.len();
    let mut out = Vec::with_capacity(params.count.max(1));
    out.push(UncertaintySample::zero(g_users.len(), n));
    for _ in 1..params.count {
        let mut s = UncertaintySample {
            users: g_users
                .iter()
                .map(|g| isotropic(g, params.radius, rng))
                .collect(),
            eve: isotropic(g_eve, params.radius, rng),
        };
        if params.radius > 0.0 {
            for _ in 0..params.steps {
                let grads = perturbation_gradient(g_users, g_eve, &s, w, model, params.sharpness);
                let targets = s
                    .users
                    .iter_mut()
                    .zip(g_users.iter().map(Vec::as_slice))
                    .chain(std::iter::once((&mut s.eve, g_eve)));
                for ((d, g), grad) in targets.zip(&grads) {
                    let gn = norm(grad);
                    if !(gn > 0.0) || !gn.is_finite() {
                        continue;
                    }
                    let step = params.radius * norm(g) / params.steps as f64 / gn;
                    for (x, gr) in d.iter_mut().zip(grad) {
                        *x -= step * gr;
                    }
                }
            }
        }
        for (d, g) in s.users.iter_mut().zip(g_users) {
            project(d, g, params.user_radius_sq);
        }
        project(&mut s.eve, g_eve, params.eve_radius_sq);
        out.push(s);
    }
    out
}
