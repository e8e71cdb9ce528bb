//! Ricean synthesis of the BS-RIS, RIS-user and RIS-eavesdropper links, and
//! the cascaded channels they form through the RIS.
//!
//! LoS components are built from the unit-norm steering vectors scaled by the
//! square root of the array sizes, so every LoS entry has unit modulus and the
//! LoS and NLoS parts carry the same per-entry power. With that scaling the
//! Ricean factor is the LoS-to-NLoS power ratio and
//! `E‖H‖²_F = L · rows · cols` regardless of κ.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{angles_between, ArrayGeometry, Position3};
use crate::linalg::{complex_normal, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// BS to RIS.
    BR,
    /// RIS to a legitimate user.
    RM,
    /// RIS to the eavesdropper.
    RE,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub kind: LinkKind,
    /// Ricean factor, linear.
    pub ricean_factor: f64,
    pub path_loss_exponent: f64,
    /// Power gain at 1 m, linear.
    pub reference_loss: f64,
}

/// Free-space power gain at 1 m, `(λ / 4π)²`.
pub fn free_space_reference(carrier_hz: f64) -> f64 {
    let lambda = crate::config::SPEED_OF_LIGHT / carrier_hz;
    (lambda / (4.0 * std::f64::consts::PI)).powi(2)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl LinkParams {
    pub fn new(kind: LinkKind, kappa_db: f64, exponent: f64, reference_loss: f64) -> Self {
        Self {
            kind,
            ricean_factor: db_to_linear(kappa_db),
            path_loss_exponent: exponent,
            reference_loss,
        }
    }

    /// LoS and NLoS amplitude weights `(√(κ/(κ+1)), 1/√(κ+1))`.
    pub fn weights(&self) -> (f64, f64) {
        let k = self.ricean_factor;
        if k.is_infinite() {
            return (1.0, 0.0);
        }
        ((k / (k + 1.0)).sqrt(), 1.0 / (k + 1.0).sqrt())
    }
}

/// Large-scale power gain `C₀ · d^(−α)`.
pub fn path_loss(distance: f64, link: &LinkParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "non-positive link distance {distance}"
        )));
    }
    Ok(link.reference_loss * distance.powf(-link.path_loss_exponent))
}

/// Every parameter needed to synthesize one slot's channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub br: LinkParams,
    pub rm: LinkParams,
    pub re: LinkParams,
    pub bs_array: ArrayGeometry,
    pub ris_array: ArrayGeometry,
    /// Extra power gain applied to the BS-RIS hop, linear.
    pub budget_gain: f64,
}

impl ChannelParams {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let c = &cfg.channel;
        let s = &cfg.system;
        let c0 = match c.reference_loss_db {
            Some(db) => db_to_linear(db),
            None => free_space_reference(s.carrier_hz),
        };
        Self {
            br: LinkParams::new(LinkKind::BR, c.kappa_br_db, c.ple_br, c0),
            rm: LinkParams::new(LinkKind::RM, c.kappa_ru_db, c.ple_ru, c0),
            re: LinkParams::new(LinkKind::RE, c.kappa_re_db, c.ple_re, c0),
            bs_array: ArrayGeometry::Linear {
                n: s.bs_antennas,
                spacing: s.element_spacing,
            },
            ris_array: ArrayGeometry::Planar {
                nx: s.ris_nx,
                ny: s.ris_ny,
                spacing: s.element_spacing,
            },
            budget_gain: db_to_linear(c.link_budget_gain_db),
        }
    }

    pub fn bs_antennas(&self) -> usize {
        self.bs_array.elements()
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_array.elements()
    }
}

/// Node positions for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub bs: Position3,
    pub ris: Position3,
    pub users: Vec<Position3>,
    pub eve: Position3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    User(usize),
    Eve,
}

/// One slot's true channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `H_BR`, N_R × N.
    pub h_br: CMat,
    /// `h_RM_k`, length N_R each.
    pub h_rm: Vec<Vec<C64>>,
    /// `h_RE`, length N_R.
    pub h_re: Vec<C64>,
    /// Unit-modulus LoS component of `H_BR` (before path loss and Ricean weighting).
    pub los_br: CMat,
    pub los_rm: Vec<Vec<C64>>,
    pub los_re: Vec<C64>,
    /// Large-scale gains `L_BR` (budget gain included), `L_RM_k`, `L_RE`.
    pub loss_br: f64,
    pub loss_rm: Vec<f64>,
    pub loss_re: f64,
}

struct LosGeometry {
    los_br: CMat,
    los_rm: Vec<Vec<C64>>,
    los_re: Vec<C64>,
    loss_br: f64,
    loss_rm: Vec<f64>,
    loss_re: f64,
}

fn scaled(v: Vec<C64>, s: f64) -> Vec<C64> {
    v.into_iter().map(|z| z * s).collect()
}

fn los_geometry(snap: &Snapshot, params: &ChannelParams) -> Result<LosGeometry> {
    let n = params.bs_antennas();
    let nr = params.ris_elements();
    let root_nr = (nr as f64).sqrt();

    let (az_b, el_b, d_br) = angles_between(&snap.bs, &snap.ris)?;
    let (az_r, el_r, _) = angles_between(&snap.ris, &snap.bs)?;
    let a_b = params.bs_array.response(az_b, el_b);
    let a_r = params.ris_array.response(az_r, el_r);
    let mut los_br = CMat::outer_conj(&a_r, &a_b);
    los_br.scale(((nr * n) as f64).sqrt());

    let mut los_rm = Vec::with_capacity(snap.users.len());
    let mut loss_rm = Vec::with_capacity(snap.users.len());
    for user in &snap.users {
        let (az, el, d) = angles_between(&snap.ris, user)?;
        los_rm.push(scaled(params.ris_array.response(az, el), root_nr));
        loss_rm.push(path_loss(d, &params.rm)?);
    }
    let (az_e, el_e, d_re) = angles_between(&snap.ris, &snap.eve)?;
    let los_re = scaled(params.ris_array.response(az_e, el_e), root_nr);

    Ok(LosGeometry {
        los_br,
        los_rm,
        los_re,
        loss_br: params.budget_gain * path_loss(d_br, &params.br)?,
        loss_rm,
        loss_re: path_loss(d_re, &params.re)?,
    })
}

fn mix_vec<R: Rng + ?Sized>(
    los: &[C64],
    link: &LinkParams,
    loss: f64,
    rng: Option<&mut R>,
) -> Vec<C64> {
    let (a, abar) = link.weights();
    let root = loss.sqrt();
    match rng {
        Some(rng) => los
            .iter()
            .map(|l| root * (a * l + abar * complex_normal(rng)))
            .collect(),
        None => los.iter().map(|l| root * a * l).collect(),
    }
}

fn assemble<R: Rng + ?Sized>(
    geo: LosGeometry,
    params: &ChannelParams,
    mut rng: Option<&mut R>,
) -> ChannelSet {
    let (a, abar) = params.br.weights();
    let root = geo.loss_br.sqrt();
    let mut h_br = geo.los_br.clone();
    for z in h_br.as_mut_slice() {
        let nlos = match rng.as_deref_mut() {
            Some(r) => complex_normal(r),
            None => C64::new(0.0, 0.0),
        };
        *z = root * (a * *z + abar * nlos);
    }
    let h_rm = geo
        .los_rm
        .iter()
        .zip(&geo.loss_rm)
        .map(|(los, &loss)| mix_vec(los, &params.rm, loss, rng.as_deref_mut()))
        .collect();
    let h_re = mix_vec(&geo.los_re, &params.re, geo.loss_re, rng.as_deref_mut());
    ChannelSet {
        h_br,
        h_rm,
        h_re,
        los_br: geo.los_br,
        los_rm: geo.los_rm,
        los_re: geo.los_re,
        loss_br: geo.loss_br,
        loss_rm: geo.loss_rm,
        loss_re: geo.loss_re,
    }
}

/// Draw one slot of Ricean channels. NLoS parts are fresh i.i.d. CN(0, 1) entries.
pub fn draw_channels<R: Rng + ?Sized>(
    snap: &Snapshot,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelSet> {
    let geo = los_geometry(snap, params)?;
    Ok(assemble(geo, params, Some(rng)))
}

/// The deterministic LoS part of every link (NLoS set to zero).
pub fn line_of_sight(snap: &Snapshot, params: &ChannelParams) -> Result<ChannelSet> {
    let geo = los_geometry(snap, params)?;
    Ok(assemble::<rand_chacha::ChaCha8Rng>(geo, params, None))
}

impl ChannelSet {
    pub fn users(&self) -> usize {
        self.h_rm.len()
    }

    pub fn ris_elements(&self) -> usize {
        self.h_br.rows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.h_br.cols()
    }

    pub fn receiver_channel(&self, target: Receiver) -> Result<&[C64]> {
        match target {
            Receiver::User(k) => {
                self.h_rm
                    .get(k)
                    .map(|v| v.as_slice())
                    .ok_or(Error::DimensionMismatch {
                        expected: self.h_rm.len(),
                        found: k,
                    })
            }
            Receiver::Eve => Ok(&self.h_re),
        }
    }

    /// Receivers in canonical order: users `0..K`, then the eavesdropper.
    pub fn receivers(&self) -> Vec<Receiver> {
        (0..self.users())
            .map(Receiver::User)
            .chain(std::iter::once(Receiver::Eve))
            .collect()
    }

    /// Per-element cascade `C_j` with `C_j[n, m] = conj(h_jn) · H_BR[n, m]`, so
    /// that `g_j^H = v^T C_j` for any reflection vector `v`.
    pub fn cascade_matrix(&self, target: Receiver) -> Result<CMat> {
        let h = self.receiver_channel(target)?;
        let mut c = self.h_br.clone();
        for (n, hn) in h.iter().enumerate() {
            let w = hn.conj();
            for z in c.row_mut(n) {
                *z *= w;
            }
        }
        Ok(c)
    }

    /// Write every complex entry as interleaved little-endian `f64` re/im pairs,
    /// preceded by a little-endian `u64` header `[N_R, N, K]`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for dim in [self.ris_elements(), self.bs_antennas(), self.users()] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        let mut put = |z: &C64| -> std::io::Result<()> {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())
        };
        for z in self.h_br.as_slice() {
            put(z)?;
        }
        for h in &self.h_rm {
            for z in h {
                put(z)?;
            }
        }
        for z in &self.h_re {
            put(z)?;
        }
        Ok(())
    }
}

/// Channels read back from a trace: only the small-scale matrices are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub h_br: CMat,
    pub h_rm: Vec<Vec<C64>>,
    pub h_re: Vec<C64>,
}

pub fn read_trace<R: Read>(mut r: R) -> std::io::Result<ChannelTrace> {
    let mut buf8 = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> std::io::Result<u64> {
        r.read_exact(&mut buf8)?;
        Ok(u64::from_le_bytes(buf8))
    };
    let nr = next_u64(&mut r)? as usize;
    let n = next_u64(&mut r)? as usize;
    let k = next_u64(&mut r)? as usize;
    let read_c = |r: &mut R| -> std::io::Result<C64> {
        let mut b = [0u8; 16];
        r.read_exact(&mut b)?;
        let re = f64::from_le_bytes(b[..8].try_into().unwrap());
        let im = f64::from_le_bytes(b[8..].try_into().unwrap());
        Ok(C64::new(re, im))
    };
    let mut br = Vec::with_capacity(nr * n);
    for _ in 0..nr * n {
        br.push(read_c(&mut r)?);
    }
    let mut h_rm = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = Vec::with_capacity(nr);
        for _ in 0..nr {
            v.push(read_c(&mut r)?);
        }
        h_rm.push(v);
    }
    let mut h_re = Vec::with_capacity(nr);
    for _ in 0..nr {
        h_re.push(read_c(&mut r)?);
    }
    let h_br = CMat::from_vec(nr, n, br)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
    Ok(ChannelTrace { h_br, h_rm, h_re })
}

/// Per-element cascades for every receiver: users `0..K`, then the eavesdropper.
///
/// For a reflection vector `v` the cascaded channel of receiver `j` is
/// `g_j = conj(v^T C_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSet {
    pub users: Vec<CMat>,
    pub eve: CMat,
}

impl CascadeSet {
    pub fn from_channels(chs: &ChannelSet) -> Result<Self> {
        let users = (0..chs.users())
            .map(|k| chs.cascade_matrix(Receiver::User(k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            users,
            eve: chs.cascade_matrix(Receiver::Eve)?,
        })
    }

    pub fn users_count(&self) -> usize {
        self.users.len()
    }

    pub fn ris_elements(&self) -> usize {
        self.eve.rows()
    }

    pub fn bs_antennas(&self) -> usize {
        self.eve.cols()
    }

    /// Matrix of receiver `j` in canonical order (index `K` is the eavesdropper).
    pub fn receiver(&self, j: usize) -> &CMat {
        if j < self.users.len() {
            &self.users[j]
        } else {
            &self.eve
        }
    }

    pub fn receivers(&self) -> usize {
        self.users.len() + 1
    }

    pub fn effective(&self, j: usize, v: &[C64]) -> Vec<C64> {
        self.receiver(j)
            .tmul_vec(v)
            .into_iter()
            .map(|z| z.conj())
            .collect()
    }

    /// Cascaded channels `(g_users, g_eve)` for reflection vector `v`.
    pub fn effective_all(&self, v: &[C64]) -> (Vec<Vec<C64>>, Vec<C64>) {
        let users = (0..self.users.len())
            .map(|j| self.effective(j, v))
            .collect();
        (users, self.effective(self.users.len(), v))
    }
}

/// The cascaded channel `g_j = (h_j^H diag(v) H_BR)^H` for a reflection vector `v`.
pub fn cascaded_channel(
    chs: &ChannelSet,
    reflection: &[C64],
    target: Receiver,
) -> Result<Vec<C64>> {
    if reflection.len() != chs.ris_elements() {
        return Err(Error::DimensionMismatch {
            expected: chs.ris_elements(),
            found: reflection.len(),
        });
    }
    let h = chs.receiver_channel(target)?;
    let mut g = vec![C64::new(0.0, 0.0); chs.bs_antennas()];
    for (n, (hn, vn)) in h.iter().zip(reflection).enumerate() {
        // g^H = Σ_n conj(h_n) v_n H[n, :]  ⇒  g = Σ_n h_n conj(v_n) conj(H[n, :]).
        let w = hn * vn.conj();
        for (gm, hm) in g.iter_mut().zip(chs.h_br.row(n)) {
            *gm += w * hm.conj();
        }
    }
    Ok(g)
}
