//! Closed-form precoders: MRT or user-nulling directions with partial
//! projection away from the eavesdropper's estimated channel.

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, norm_sq, C64};
use crate::metrics::Precoder;

use serde::{Deserialize, Serialize};

/// BS power limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimits {
    /// Total transmit power `P_max`, W.
    pub total: f64,
    /// Per-antenna power limit, W.
    pub per_antenna: f64,
}

/// Closed-form precoder families searched by the AO precoder block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderFamily {
    /// Matched filter with partial eavesdropper projection.
    Mrt,
    /// Other users nulled, then partial eavesdropper projection inside the
    /// remaining subspace.
    ZeroForcing,
}

/// How the total power is split across the user streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamPower {
    /// `P_max / K` per stream.
    Equal,
    /// All power on one stream, the others silent.
    Single(usize),
}

fn check_users(g_users: &[Vec<C64>], g_eve: &[C64]) -> Result<()> {
    if g_users.is_empty() {
        return Err(Error::DegenerateChannel("no user channels".into()));
    }
    for (idx, g) in g_users.iter().enumerate() {
        if g.len() != g_eve.len() {
            return Err(Error::DimensionMismatch {
                expected: g_eve.len(),
                found: g.len(),
            });
        }
        let gn = norm(g);
        if !(gn > 0.0) || !gn.is_finite() {
            return Err(Error::DegenerateChannel(format!(
                "user {idx} estimate is all zero"
            )));
        }
    }
    Ok(())
}

fn unit(mut d: Vec<C64>, reference: f64, idx: usize) -> Result<Vec<C64>> {
    let dn = norm(&d);
    if !(dn > reference * 1e-10) {
        return Err(Error::DegenerateChannel(format!(
            "user {idx} has no component outside the suppressed subspace"
        )));
    }
    d.iter_mut().for_each(|x| *x /= dn);
    Ok(d)
}

/// Unit MRT directions `(I − ζ ĝ_E ĝ_E^H / ‖ĝ_E‖²) ĝ_Mk`.
fn mrt_directions(g_users: &[Vec<C64>], g_eve: &[C64], zeta: f64) -> Result<Vec<Vec<C64>>> {
    check_users(g_users, g_eve)?;
    let eve_sq = norm_sq(g_eve);
    g_users
        .iter()
        .enumerate()
        .map(|(idx, g)| {
            let mut d = g.clone();
            if zeta != 0.0 && eve_sq > 0.0 {
                let coef = zeta * inner(g_eve, g) / eve_sq;
                for (x, e) in d.iter_mut().zip(g_eve) {
                    *x -= coef * e;
                }
            }
            unit(d, norm(g), idx)
        })
        .collect()
}

/// Unit user-nulling directions, see [`threat_aware_zf`].
fn zf_directions(g_users: &[Vec<C64>], g_eve: &[C64], zeta: f64) -> Result<Vec<Vec<C64>>> {
    check_users(g_users, g_eve)?;
    g_users
        .iter()
        .enumerate()
        .map(|(idx, g)| {
            let others: Vec<&[C64]> = g_users
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != idx)
                .map(|(_, v)| v.as_slice())
                .collect();
            let basis = orthonormal_basis(&others);
            let mut d = project_out(g, &basis);
            let e = project_out(g_eve, &basis);
            let en = norm_sq(&e);
            if zeta != 0.0 && en > 0.0 {
                let coef = zeta * inner(&e, &d) / en;
                for (x, y) in d.iter_mut().zip(&e) {
                    *x -= coef * y;
                }
            }
            unit(d, norm(g), idx)
        })
        .collect()
}

fn allocate(dirs: Vec<Vec<C64>>, power: StreamPower, limits: &PowerLimits) -> Result<Precoder> {
    let k = dirs.len();
    let amplitude = |idx: usize| -> f64 {
        match power {
            StreamPower::Equal => (limits.total / k as f64).sqrt(),
            StreamPower::Single(s) if s == idx => limits.total.sqrt(),
            StreamPower::Single(_) => 0.0,
        }
    };
    if let StreamPower::Single(s) = power {
        if s >= k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: s,
            });
        }
    }
    let streams = dirs
        .into_iter()
        .enumerate()
        .map(|(idx, d)| {
            let a = amplitude(idx);
            d.into_iter().map(|x| x * a).collect()
        })
        .collect();
    Ok(scale_to_limits(Precoder::new(streams), limits))
}

/// Threat-aware MRT at blending level `zeta ∈ [0, 1]`.
///
/// `d_k = (I − ζ ĝ_E ĝ_E^H / ‖ĝ_E‖²) ĝ_Mk`; each stream gets `P_max / K`
/// along its unit direction, then the whole precoder is scaled down if any
/// antenna exceeds its limit.
pub fn threat_aware_mrt(
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    zeta: f64,
    limits: &PowerLimits,
) -> Result<Precoder> {
    allocate(
        mrt_directions(g_users, g_eve, zeta)?,
        StreamPower::Equal,
        limits,
    )
}

/// Scale down uniformly until both the per-antenna and total limits hold.
fn scale_to_limits(mut w: Precoder, limits: &PowerLimits) -> Precoder {
    let peak = w.max_antenna_power();
    if peak > limits.per_antenna {
        w.scale((limits.per_antenna / peak).sqrt());
    }
    let total = w.frobenius_sq();
    if total > limits.total {
        w.scale((limits.total / total).sqrt());
    }
    w
}

/// Orthonormal basis of `span(vectors)` by modified Gram-Schmidt.
fn orthonormal_basis(vectors: &[&[C64]]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut u = v.to_vec();
        let scale = norm(&u);
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &u);
                for (x, y) in u.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let n = norm(&u);
        if n > scale * 1e-10 && n > 0.0 {
            basis.push(u.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn project_out(v: &[C64], basis: &[Vec<C64>]) -> Vec<C64> {
    let mut u = v.to_vec();
    for b in basis {
        let c = inner(b, &u);
        for (x, y) in u.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
    u
}

/// Threat-aware zero forcing at blending level `zeta`.
///
/// With `B_k` the projector onto the complement of the other users'
/// estimates, `d_k = B_k ĝ_Mk − ζ e_k (e_k^H B_k ĝ_Mk)/‖e_k‖²`, `e_k = B_k ĝ_E`.
/// Streams get equal power and are then scaled into the limits.
pub fn threat_aware_zf(
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    zeta: f64,
    limits: &PowerLimits,
) -> Result<Precoder> {
    allocate(
        zf_directions(g_users, g_eve, zeta)?,
        StreamPower::Equal,
        limits,
    )
}

/// Precoder of `family` at blending level `zeta` with power split `power`.
pub fn threat_aware_precoder(
    family: PrecoderFamily,
    power: StreamPower,
    g_users: &[Vec<C64>],
    g_eve: &[C64],
    zeta: f64,
    limits: &PowerLimits,
) -> Result<Precoder> {
    let dirs = match family {
        PrecoderFamily::Mrt => mrt_directions(g_users, g_eve, zeta)?,
        PrecoderFamily::ZeroForcing => zf_directions(g_users, g_eve, zeta)?,
    };
    allocate(dirs, power, limits)
}
