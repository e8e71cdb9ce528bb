//! Hover-position selection: cheap probing of every candidate, a blended
//! tail-risk surrogate for coarse screening, then full per-slot simulation of
//! the shortlist scored by the CVaR of realized SSE.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{line_of_sight, CascadeSet, Snapshot};
use crate::config::{GridMode, SystemConfig};
use crate::error::{Error, Result};
use crate::geometry::Position3;
use crate::impairments::{quantize_phase, unit_vector};
use crate::linalg::{norm_sq, C64};
use crate::metrics::{cvar, Precoder};
use crate::simulation::{keyed_rng, Beamformer, Scenario, Simulator, Stream};
use crate::stage2::{threat_aware_precoder, AoSettings, PrecoderFamily, StreamPower};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub position: Position3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub candidates: Vec<Candidate>,
}

impl CandidateGrid {
    pub fn from_positions(positions: Vec<Position3>) -> Self {
        Self {
            candidates: positions
                .into_iter()
                .enumerate()
                .map(|(id, position)| Candidate { id, position })
                .collect(),
        }
    }

    /// Uniform draws over the service area and altitude band.
    pub fn random<R: Rng + ?Sized>(cfg: &SystemConfig, count: usize, rng: &mut R) -> Self {
        let g = &cfg.geometry;
        let positions = (0..count)
            .map(|_| {
                Position3::new(
                    rng.gen_range(g.area_x_m[0]..=g.area_x_m[1]),
                    rng.gen_range(g.area_y_m[0]..=g.area_y_m[1]),
                    rng.gen_range(g.uav_altitude_m[0]..=g.uav_altitude_m[1]),
                )
            })
            .collect();
        Self::from_positions(positions)
    }

    /// The first `count` points of a regular lattice spanning the feasible box.
    pub fn regular(cfg: &SystemConfig, count: usize) -> Self {
        let g = &cfg.geometry;
        let per_axis = (count as f64).cbrt().ceil().max(1.0) as usize;
        let axis = |lo: f64, hi: f64, i: usize| {
            if per_axis == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
            }
        };
        let mut positions = Vec::with_capacity(count);
        'outer: for iz in 0..per_axis {
            for ix in 0..per_axis {
                for iy in 0..per_axis {
                    if positions.len() == count {
                        break 'outer;
                    }
                    positions.push(Position3::new(
                        axis(g.area_x_m[0], g.area_x_m[1], ix),
                        axis(g.area_y_m[0], g.area_y_m[1], iy),
                        axis(g.uav_altitude_m[0], g.uav_altitude_m[1], iz),
                    ));
                }
            }
        }
        Self::from_positions(positions)
    }

    pub fn generate<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Self {
        match cfg.stage1.grid_mode {
            GridMode::Random => Self::random(cfg, cfg.stage1.candidates, rng),
            GridMode::Grid => Self::regular(cfg, cfg.stage1.candidates),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Whether every candidate lies in the feasible hover region.
    pub fn is_feasible(&self, cfg: &SystemConfig) -> bool {
        self.candidates
            .iter()
            .all(|c| is_feasible_position(cfg, &c.position))
    }

    pub fn get(&self, id: usize) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }
}

pub fn is_feasible_position(cfg: &SystemConfig, p: &Position3) -> bool {
    let g = &cfg.geometry;
    (g.area_x_m[0]..=g.area_x_m[1]).contains(&p.x)
        && (g.area_y_m[0]..=g.area_y_m[1]).contains(&p.y)
        && (g.uav_altitude_m[0]..=g.uav_altitude_m[1]).contains(&p.z)
}

/// Codebook phases that co-phase the cascade of `c` toward its dominant BS
/// direction.
pub fn conjugation_phases(c: &crate::linalg::CMat, sim: &Simulator) -> Vec<f64> {
    let best_row = (0..c.rows())
        .max_by(|&a, &b| {
            norm_sq(c.row(a))
                .total_cmp(&norm_sq(c.row(b)))
                .then(b.cmp(&a))
        })
        .unwrap_or(0);
    let u: Vec<C64> = c.row(best_row).iter().map(|z| z.conj()).collect();
    c.mul_vec(&u)
        .iter()
        .map(|z| quantize_phase(-z.arg(), &sim.codebook))
        .collect()
}

/// Minimum over users of the SINR in dB when that user alone is served by MRT
/// at `phases` on `cascades`.
pub fn min_user_sinr_db(cascades: &CascadeSet, phases: &[f64], sim: &Simulator) -> Result<f64> {
    let (gu, ge) = cascades.effective_all(&unit_vector(phases));
    let mut min = f64::INFINITY;
    for (k, g) in gu.iter().enumerate() {
        let w: Precoder = threat_aware_precoder(
            PrecoderFamily::Mrt,
            StreamPower::Single(k),
            &gu,
            &ge,
            0.0,
            &sim.limits,
        )?;
        min = min.min(sim.model.user_sinr(g, &w, k));
    }
    Ok(10.0 * min.max(1e-300).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Warm-start codebook phases.
    pub phases: Vec<f64>,
    /// Best minimum user SINR over the probe set, dB.
    pub s_probe: f64,
    /// Number of probe configurations evaluated.
    pub evaluated: usize,
}

/// Probe a hover position on the LoS-only nominal channel: per-user and
/// centroid conjugation beams plus `random_probes` random codebook draws.
pub fn probe_candidate<R: Rng + ?Sized>(
    ris: Position3,
    bs: Position3,
    users: &[Position3],
    eve: Position3,
    sim: &Simulator,
    random_probes: usize,
    rng: &mut R,
) -> Result<ProbeResult> {
    let snap = Snapshot {
        bs,
        ris,
        users: users.to_vec(),
        eve,
    };
    let los = CascadeSet::from_channels(&line_of_sight(&snap, &sim.params)?)?;
    let mut probes: Vec<Vec<f64>> = los
        .users
        .iter()
        .map(|c| conjugation_phases(c, sim))
        .collect();
    let centroid = Position3::centroid(users);
    let virt = Snapshot {
        users: vec![centroid],
        ..snap.clone()
    };
    let cv = CascadeSet::from_channels(&line_of_sight(&virt, &sim.params)?)?;
    probes.push(conjugation_phases(&cv.users[0], sim));
    let levels = sim.codebook.levels();
    for _ in 0..random_probes {
        probes.push(
            (0..los.ris_elements())
                .map(|_| sim.codebook.phase(rng.gen_range(0..levels)))
                .collect(),
        );
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in probes.iter().enumerate() {
        let s = min_user_sinr_db(&los, p, sim)?;
        if best.map_or(true, |(b, _)| s > b) {
            best = Some((s, i));
        }
    }
    let (s_probe, idx) = best.ok_or_else(|| Error::DegenerateChannel("empty probe set".into()))?;
    Ok(ProbeResult {
        phases: probes.swap_remove(idx),
        s_probe,
        evaluated: probes.len() + 1,
    })
}

/// Min-max normalization onto `[0, 1]`; a constant input maps to zeros.
pub fn normalize_min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

/// `(1 − ω)·CVaR + ω·S_probe`.
pub fn blend_score(cvar_pre: f64, s_probe_norm: f64, omega: f64) -> f64 {
    (1.0 - omega) * cvar_pre + omega * s_probe_norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateScore {
    pub id: usize,
    pub position: Position3,
    pub s_probe: f64,
    pub s_probe_norm: f64,
    pub cvar_pre: f64,
    pub score: f64,
    pub phases: Vec<f64>,
}

/// Shared inputs of the Stage-1 routines for one trial.
#[derive(Debug, Clone, Copy)]
pub struct Stage1Context<'a> {
    pub cfg: &'a SystemConfig,
    pub sim: &'a Simulator,
    pub scenario: &'a Scenario,
    /// Trial seed; every candidate derives its own streams from it.
    pub seed: u64,
}

/// Stream id of candidate-specific simulations.
pub fn candidate_stream(id: usize) -> u64 {
    1_000 + id as u64
}

impl<'a> Stage1Context<'a> {
    pub fn probe(&self, c: &Candidate) -> Result<ProbeResult> {
        let mut rng = keyed_rng(self.seed, &[Stream::Probe as u64, c.id as u64]);
        probe_candidate(
            c.position,
            self.scenario.bs,
            self.scenario.initial_users(),
            self.scenario.eve,
            self.sim,
            self.cfg.stage1.probe_random,
            &mut rng,
        )
    }

    /// CVaR of realized SSE over the presample window with fixed phases and the
    /// best closed-form MRT precoder per slot.
    pub fn presample_cvar(&self, c: &Candidate, phases: &[f64]) -> Result<f64> {
        let out = self.sim.run(
            self.scenario,
            c.position,
            0..self.cfg.stage1.presamples,
            &Beamformer::FixedPhaseMrt(phases.to_vec()),
            phases,
            self.seed,
            candidate_stream(c.id),
            false,
        )?;
        cvar(&out.sse, self.cfg.dro.risk_level)
    }

    /// Probe, presample and blend every candidate of `grid`.
    pub fn surrogate_scores(&self, grid: &CandidateGrid) -> Result<Vec<SurrogateScore>> {
        let raw = grid
            .candidates
            .par_iter()
            .map(|c| {
                let probe = self
                    .probe(c)
                    .map_err(|e| e.context(format!("candidate {}", c.id)))?;
                let cv = self
                    .presample_cvar(c, &probe.phases)
                    .map_err(|e| e.context(format!("candidate {}", c.id)))?;
                Ok((probe, cv))
            })
            .collect::<Result<Vec<_>>>()?;
        let probes: Vec<f64> = raw.iter().map(|(p, _)| p.s_probe).collect();
        let norm = normalize_min_max(&probes);
        let omega = self.cfg.stage1.omega;
        Ok(grid
            .candidates
            .iter()
            .zip(raw)
            .zip(norm)
            .map(|((c, (probe, cv)), n)| SurrogateScore {
                id: c.id,
                position: c.position,
                s_probe: probe.s_probe,
                s_probe_norm: n,
                cvar_pre: cv,
                score: blend_score(cv, n, omega),
                phases: probe.phases,
            })
            .collect())
    }

    /// Surrogate scoring followed by Top-K_c selection.
    pub fn coarse_screen(&self, grid: &CandidateGrid) -> Result<Vec<SurrogateScore>> {
        let k = self.cfg.stage1.top_k;
        if grid.len() < k {
            return Err(Error::NotEnoughCandidates {
                have: grid.len(),
                need: k,
            });
        }
        Ok(select_top(self.surrogate_scores(grid)?, k))
    }

    /// Realized SSE of every shortlisted candidate over the fine window, the
    /// warm-up slots removed.
    pub fn fine_evaluate(
        &self,
        shortlist: &[SurrogateScore],
        settings: &AoSettings,
    ) -> Result<Vec<FineEvaluation>> {
        let s1 = &self.cfg.stage1;
        shortlist
            .par_iter()
            .map(|c| {
                let out = self
                    .sim
                    .run(
                        self.scenario,
                        c.position,
                        0..s1.fine_slots,
                        &Beamformer::Ao(settings.clone()),
                        &c.phases,
                        self.seed,
                        candidate_stream(c.id),
                        false,
                    )
                    .map_err(|e| e.context(format!("candidate {}", c.id)))?;
                let skip = s1.warm_start_slots.min(out.sse.len().saturating_sub(1));
                Ok(FineEvaluation {
                    id: c.id,
                    position: c.position,
                    phases: c.phases.clone(),
                    sse: out.sse[skip..].to_vec(),
                })
            })
            .collect()
    }
}

/// The `k` highest scores, ties broken by the lower candidate id.
pub fn select_top(mut scores: Vec<SurrogateScore>, k: usize) -> Vec<SurrogateScore> {
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    scores.truncate(k);
    scores
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineEvaluation {
    pub id: usize,
    pub position: Position3,
    pub phases: Vec<f64>,
    pub sse: Vec<f64>,
}

/// How fine-stage SSE samples are reduced to a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FineStatistic {
    Cvar { alpha: f64 },
    Mean,
}

impl FineStatistic {
    pub fn score(&self, sse: &[f64]) -> Result<f64> {
        match *self {
            FineStatistic::Cvar { alpha } => cvar(sse, alpha),
            FineStatistic::Mean => {
                if sse.is_empty() {
                    return Err(Error::EmptySamples);
                }
                Ok(sse.iter().sum::<f64>() / sse.len() as f64)
            }
        }
    }
}

/// Index into `evals` of the best-scoring candidate; ties go to the earlier entry.
pub fn fine_select(evals: &[FineEvaluation], statistic: FineStatistic) -> Result<usize> {
    if evals.is_empty() {
        return Err(Error::NotEnoughCandidates { have: 0, need: 1 });
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, e) in evals.iter().enumerate() {
        let s = statistic.score(&e.sse)?;
        if s > best.0 {
            best = (s, i);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScoreRow {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub s_probe: f64,
    pub cvar_pre: f64,
    pub score: f64,
    pub fine_cvar: Option<f64>,
}

pub fn candidate_rows(
    scores: &[SurrogateScore],
    fine: &[FineEvaluation],
    alpha: f64,
) -> Result<Vec<CandidateScoreRow>> {
    scores
        .iter()
        .map(|s| {
            let fine_cvar = match fine.iter().find(|f| f.id == s.id) {
                Some(f) => Some(cvar(&f.sse, alpha)?),
                None => None,
            };
            Ok(CandidateScoreRow {
                id: s.id,
                x: s.position.x,
                y: s.position.y,
                z: s.position.z,
                s_probe: s.s_probe,
                cvar_pre: s.cvar_pre,
                score: s.score,
                fine_cvar,
            })
        })
        .collect()
}

pub fn write_candidate_scores(path: &Path, rows: &[CandidateScoreRow]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Full Stage-1 result of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub id: usize,
    pub position: Position3,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Outcome {
    pub scores: Vec<SurrogateScore>,
    pub shortlist: Vec<usize>,
    pub fine: Vec<FineEvaluation>,
    /// CVaR-selected deployment.
    pub selected: Deployment,
}

impl<'a> Stage1Context<'a> {
    /// Coarse screening, fine evaluation of the shortlist and CVaR selection.
    pub fn run(&self, grid: &CandidateGrid, settings: &AoSettings) -> Result<Stage1Outcome> {
        let k = self.cfg.stage1.top_k;
        if grid.len() < k {
            return Err(Error::NotEnoughCandidates {
                have: grid.len(),
                need: k,
            });
        }
        let scores = self.surrogate_scores(grid)?;
        let shortlist = select_top(scores.clone(), k);
        let fine = self.fine_evaluate(&shortlist, settings)?;
        let idx = fine_select(
            &fine,
            FineStatistic::Cvar {
                alpha: self.cfg.dro.risk_level,
            },
        )?;
        let f = &fine[idx];
        let selected = Deployment {
            id: f.id,
            position: f.position,
            phases: f.phases.clone(),
        };
        Ok(Stage1Outcome {
            scores,
            shortlist: shortlist.iter().map(|s| s.id).collect(),
            fine,
            selected,
        })
    }
}
