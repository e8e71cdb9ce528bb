//! Slot-by-slot simulation of one deployment: user mobility, channel draws,
//! imperfect CSI, beamforming, RIS hardware impairments and the realized SSE.
//!
//! Every random stream is derived from a master seed and structural indices,
//! never from execution order, so runs are reproducible under any parallel
//! schedule and different schemes see identical channel and hardware draws.

use std::ops::Range;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channels, CascadeSet, ChannelParams, Snapshot};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::{step_mobility, Area, MobilityState, Position3};
use crate::impairments::{
    estimate_cascade, realize_reflection, CsiErrorParams, RisCodebook, RisImpairmentParams,
};
use crate::linalg::C64;
use crate::metrics::{Precoder, SinrModel};
use crate::stage2::{best_mrt, solve_slot, AoSettings, PowerLimits, SlotOutcome, SlotRecord};

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the structural path `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |h, &p| {
        splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn keyed_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Purpose tags for derived random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Layout = 1,
    Mobility = 2,
    Channel = 3,
    Csi = 4,
    Impairment = 5,
    Solver = 6,
    Probe = 7,
    Grid = 8,
    Trial = 9,
}

/// Node placement and user trajectories of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs: Position3,
    pub eve: Position3,
    /// `trajectory[t][k]`: position of user `k` in slot `t`.
    pub trajectory: Vec<Vec<Position3>>,
}

fn area_of(cfg: &SystemConfig) -> Area {
    Area {
        x: cfg.geometry.area_x_m,
        y: cfg.geometry.area_y_m,
    }
}

fn sample_until<R: Rng + ?Sized>(
    rng: &mut R,
    area: &Area,
    what: &str,
    mut draw: impl FnMut(&mut R) -> Position3,
    accept: impl Fn(&Position3) -> bool,
) -> Result<Position3> {
    for _ in 0..10_000 {
        let p = draw(rng);
        if area.contains(&p) && accept(&p) {
            return Ok(p);
        }
    }
    Err(Error::DegenerateGeometry(format!(
        "could not place the {what} inside the service area"
    )))
}

impl Scenario {
    /// Users are drawn in the configured sector and distance band around the
    /// BS, the eavesdropper at a random offset from a random user and no closer
    /// than the minimum offset to any user; then users
    /// follow Gauss-Markov mobility for `slots` slots.
    pub fn generate(cfg: &SystemConfig, seed: u64, slots: usize) -> Result<Self> {
        let g = &cfg.geometry;
        let area = area_of(cfg);
        let bs = Position3::from_array(cfg.system.bs_position);
        let mut rng = keyed_rng(seed, &[Stream::Layout as u64]);
        let mut users = Vec::with_capacity(cfg.system.users);
        for _ in 0..cfg.system.users {
            let p = sample_until(
                &mut rng,
                &area,
                "user",
                |r| {
                    let az = r
                        .gen_range(g.user_sector_deg[0]..=g.user_sector_deg[1])
                        .to_radians();
                    let d = r.gen_range(g.user_distance_m[0]..=g.user_distance_m[1]);
                    Position3::new(bs.x + d * az.cos(), bs.y + d * az.sin(), 0.0)
                },
                |_| true,
            )?;
            users.push(p);
        }
        let anchor = users[rng.gen_range(0..users.len())];
        let eve = sample_until(
            &mut rng,
            &area,
            "eavesdropper",
            |r| {
                let d = r.gen_range(g.eve_offset_m[0]..=g.eve_offset_m[1]);
                let h = r.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                Position3::new(anchor.x + d * h.cos(), anchor.y + d * h.sin(), 0.0)
            },
            |p| users.iter().all(|u| u.distance(p) >= g.eve_offset_m[0]),
        )?;

        let mut states: Vec<MobilityState> = users
            .iter()
            .map(|&p| {
                MobilityState::new(
                    p,
                    g.mean_speed_mps,
                    g.mobility_memory,
                    g.speed_noise_std_mps,
                    area,
                    &mut rng,
                )
            })
            .collect();
        let mut trajectory = Vec::with_capacity(slots.max(1));
        trajectory.push(users);
        for t in 1..slots {
            let mut step_rng = keyed_rng(seed, &[Stream::Mobility as u64, t as u64]);
            states = states
                .iter()
                .map(|s| step_mobility(s, cfg.system.slot_s, &mut step_rng))
                .collect();
            trajectory.push(states.iter().map(|s| s.position).collect());
        }
        Ok(Self {
            bs,
            eve,
            trajectory,
        })
    }

    pub fn slots(&self) -> usize {
        self.trajectory.len()
    }

    pub fn initial_users(&self) -> &[Position3] {
        &self.trajectory[0]
    }

    pub fn snapshot(&self, slot: usize, ris: Position3) -> Snapshot {
        Snapshot {
            bs: self.bs,
            ris,
            users: self.trajectory[slot].clone(),
            eve: self.eve,
        }
    }
}

/// Per-slot beamforming policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Beamformer {
    /// Alternating optimization, warm-started from the previous slot.
    Ao(AoSettings),
    /// Uniformly random codebook phases with plain MRT.
    RandomPhaseMrt,
    /// Fixed phases with plain MRT.
    FixedPhaseMrt(Vec<f64>),
}

/// Violation counters over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub total_power: usize,
    pub per_antenna: usize,
    pub codebook: usize,
    pub sample_ball: usize,
    pub negative_sse: usize,
    pub non_monotone: usize,
}

impl Feasibility {
    pub fn violations(&self) -> usize {
        self.total_power
            + self.per_antenna
            + self.codebook
            + self.sample_ball
            + self.negative_sse
            + self.non_monotone
    }

    pub fn merge(&mut self, o: &Feasibility) {
        self.total_power += o.total_power;
        self.per_antenna += o.per_antenna;
        self.codebook += o.codebook;
        self.sample_ball += o.sample_ball;
        self.negative_sse += o.negative_sse;
        self.non_monotone += o.non_monotone;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Realized SSE per simulated slot.
    pub sse: Vec<f64>,
    pub feasibility: Feasibility,
    /// Per-slot log, when requested.
    pub records: Vec<SlotRecord>,
    /// Phases in force after the last slot.
    pub final_phases: Vec<f64>,
}

/// Immutable per-configuration simulation context.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: ChannelParams,
    pub model: SinrModel,
    pub csi: CsiErrorParams,
    pub ris: RisImpairmentParams,
    pub codebook: RisCodebook,
    pub limits: PowerLimits,
    /// Precoder grid of the non-iterative beamformers.
    pub closed_form: AoSettings,
}

/// Everything a beamformer sees in one slot, plus the hidden truth.
pub struct SlotChannels {
    pub truth: CascadeSet,
    pub estimate: CascadeSet,
}

impl Simulator {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self {
            params: ChannelParams::from_config(cfg),
            model: SinrModel::from_config(cfg),
            csi: CsiErrorParams::from_config(&cfg.impairments),
            ris: RisImpairmentParams::from_config(&cfg.impairments),
            codebook: RisCodebook::new(cfg.impairments.phase_bits),
            limits: PowerLimits {
                total: cfg.system.p_max_w,
                per_antenna: cfg.system.per_antenna_w,
            },
            closed_form: AoSettings::dro(cfg),
        }
    }

    /// True and estimated cascades of one slot. `csi_state` carries the AR(1)
    /// error states (users, then the eavesdropper) between slots.
    pub fn slot_channels(
        &self,
        snap: &Snapshot,
        seed: u64,
        stream: u64,
        slot: usize,
        csi_state: &mut Vec<Vec<C64>>,
    ) -> Result<SlotChannels> {
        let mut ch_rng = keyed_rng(seed, &[stream, slot as u64, Stream::Channel as u64]);
        let chs = draw_channels(snap, &self.params, &mut ch_rng)?;
        let truth = CascadeSet::from_channels(&chs)?;
        let mut csi_rng = keyed_rng(seed, &[stream, slot as u64, Stream::Csi as u64]);
        let receivers = truth.receivers();
        let mut estimates = Vec::with_capacity(receivers);
        let mut next_state = Vec::with_capacity(receivers);
        for j in 0..receivers {
            let radius = if j < truth.users_count() {
                self.csi.user_radius_sq()
            } else {
                self.csi.eve_radius_sq()
            };
            let prev = csi_state.get(j).map(Vec::as_slice);
            let est = estimate_cascade(
                truth.receiver(j),
                radius,
                self.csi.correlation,
                prev,
                &mut csi_rng,
            );
            estimates.push(est.estimate);
            next_state.push(est.state);
        }
        *csi_state = next_state;
        let eve = estimates.pop().expect("at least one receiver");
        Ok(SlotChannels {
            truth,
            estimate: CascadeSet {
                users: estimates,
                eve,
            },
        })
    }

    /// Realized SSE of `(w, phases)` on the true cascades after RIS impairments.
    pub fn realized_sse<R: Rng + ?Sized>(
        &self,
        truth: &CascadeSet,
        w: &Precoder,
        phases: &[f64],
        rng: &mut R,
    ) -> Result<f64> {
        let refl = realize_reflection(phases, &self.codebook, &self.ris, rng)?;
        let (gu, ge) = truth.effective_all(&refl.realized);
        Ok(self.model.sse(&gu, &ge, w))
    }

    fn random_phases<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let levels = self.codebook.levels();
        (0..n)
            .map(|_| self.codebook.phase(rng.gen_range(0..levels)))
            .collect()
    }

    /// Simulate the slots in `window` of `scenario` with the RIS hovering at
    /// `ris`. All randomness is keyed by `(seed, stream, slot)`.
    #[allow(clippy::too_many_arguments)]
    pub fn run(
        &self,
        scenario: &Scenario,
        ris: Position3,
        window: Range<usize>,
        beamformer: &Beamformer,
        initial_phases: &[f64],
        seed: u64,
        stream: u64,
        log: bool,
    ) -> Result<RunOutput> {
        if window.end > scenario.slots() {
            return Err(Error::DimensionMismatch {
                expected: scenario.slots(),
                found: window.end,
            });
        }
        let mut csi_state = Vec::new();
        let mut phases = initial_phases.to_vec();
        let mut precoder: Option<Precoder> = None;
        let mut out = RunOutput {
            sse: Vec::with_capacity(window.len()),
            feasibility: Feasibility::default(),
            records: Vec::new(),
            final_phases: Vec::new(),
        };
        for slot in window {
            let snap = scenario.snapshot(slot, ris);
            let ch = self
                .slot_channels(&snap, seed, stream, slot, &mut csi_state)
                .map_err(|e| e.context(format!("slot {slot}")))?;
            let mut solver_rng = keyed_rng(seed, &[stream, slot as u64, Stream::Solver as u64]);
            let started = Instant::now();
            let (w, outcome): (Precoder, Option<SlotOutcome>) = match beamformer {
                Beamformer::Ao(settings) => {
                    let o = solve_slot(
                        &ch.estimate,
                        precoder.as_ref(),
                        &phases,
                        settings,
                        &mut solver_rng,
                    )
                    .map_err(|e| e.context(format!("slot {slot}")))?;
                    phases = o.phases.clone();
                    (o.precoder.clone(), Some(o))
                }
                Beamformer::RandomPhaseMrt => {
                    phases = self.random_phases(ch.estimate.ris_elements(), &mut solver_rng);
                    let (gu, ge) = ch
                        .estimate
                        .effective_all(&crate::impairments::unit_vector(&phases));
                    (best_mrt(&gu, &ge, &self.closed_form)?, None)
                }
                Beamformer::FixedPhaseMrt(fixed) => {
                    phases = fixed.clone();
                    let (gu, ge) = ch
                        .estimate
                        .effective_all(&crate::impairments::unit_vector(&phases));
                    (best_mrt(&gu, &ge, &self.closed_form)?, None)
                }
            };
            let elapsed = started.elapsed();
            let mut imp_rng = keyed_rng(seed, &[stream, slot as u64, Stream::Impairment as u64]);
            let sse = self.realized_sse(&ch.truth, &w, &phases, &mut imp_rng)?;

            let f = &mut out.feasibility;
            if w.frobenius_sq() > self.limits.total * (1.0 + 1e-12) {
                f.total_power += 1;
            }
            if w.max_antenna_power() > self.limits.per_antenna * (1.0 + 1e-12) {
                f.per_antenna += 1;
            }
            if !phases.iter().all(|&p| self.codebook.contains(p)) {
                f.codebook += 1;
            }
            if !(sse >= 0.0) || !sse.is_finite() {
                f.negative_sse += 1;
            }
            if let Some(o) = &outcome {
                if !o.samples_in_ball {
                    f.sample_ball += 1;
                }
                if !o.trace.is_monotone(1e-9) {
                    f.non_monotone += 1;
                }
                if log {
                    out.records
                        .push(SlotRecord::new(slot, o, sse, elapsed.as_micros() as u64));
                }
            }
            out.sse.push(sse);
            precoder = Some(w);
        }
        out.final_phases = phases;
        Ok(out)
    }
}
