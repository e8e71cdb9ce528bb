//! Comparison schemes: two alternative deployment rules and three alternative
//! per-slot beamformers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CascadeSet;
use crate::config::SystemConfig;
use crate::error::{ConfigError, Error, Result};
use crate::geometry::Position3;
use crate::impairments::unit_vector;
use crate::metrics::Precoder;
use crate::simulation::Beamformer;
use crate::stage1::{fine_select, Candidate, CandidateGrid, FineEvaluation, FineStatistic};
use crate::stage2::{best_mrt, solve_slot, AoSettings, AoTrace, SlotOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SchemeId {
    DroCvar,
    DeployAvgSse,
    DeployGeoCenter,
    BfScaNominal,
    BfSaaPlain,
    BfMrtRandomPhase,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::DroCvar,
        SchemeId::DeployAvgSse,
        SchemeId::DeployGeoCenter,
        SchemeId::BfScaNominal,
        SchemeId::BfSaaPlain,
        SchemeId::BfMrtRandomPhase,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::DroCvar => "DRO_CVAR",
            SchemeId::DeployAvgSse => "DEPLOY_AVG_SSE",
            SchemeId::DeployGeoCenter => "DEPLOY_GEO_CENTER",
            SchemeId::BfScaNominal => "BF_SCA_NOMINAL",
            SchemeId::BfSaaPlain => "BF_SAA_PLAIN",
            SchemeId::BfMrtRandomPhase => "BF_MRT_RANDOM_PHASE",
        }
    }

    /// Whether the scheme differs from DRO-CVaR in where the RIS hovers
    /// (and not in how it beamforms).
    pub fn is_deployment(&self) -> bool {
        matches!(self, SchemeId::DeployAvgSse | SchemeId::DeployGeoCenter)
    }

    /// Per-slot beamformer. Deployment baselines beamform like DRO-CVaR.
    pub fn beamformer(&self, cfg: &SystemConfig) -> Beamformer {
        match self {
            SchemeId::DroCvar | SchemeId::DeployAvgSse | SchemeId::DeployGeoCenter => {
                Beamformer::Ao(AoSettings::dro(cfg))
            }
            SchemeId::BfScaNominal => Beamformer::Ao(AoSettings::nominal(cfg)),
            SchemeId::BfSaaPlain => Beamformer::Ao(AoSettings::saa(cfg)),
            SchemeId::BfMrtRandomPhase => Beamformer::RandomPhaseMrt,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Validation(format!("unknown scheme `{s}`")).into())
    }
}

/// Index of the fine-stage candidate with the highest mean SSE.
pub fn deploy_avg_sse(evals: &[FineEvaluation]) -> Result<usize> {
    fine_select(evals, FineStatistic::Mean)
}

/// Candidate nearest to the point halfway between the BS and the user
/// centroid, at the median feasible altitude. Ties go to the lower index.
pub fn deploy_geo_center(
    grid: &CandidateGrid,
    users: &[Position3],
    bs: Position3,
    altitude: f64,
) -> Result<Candidate> {
    if users.is_empty() {
        return Err(Error::DegenerateGeometry("no users".into()));
    }
    let c = Position3::centroid(users);
    let target = Position3::new(0.5 * (bs.x + c.x), 0.5 * (bs.y + c.y), altitude);
    let mut best: Option<(f64, &Candidate)> = None;
    for cand in &grid.candidates {
        let d = cand.position.distance(&target);
        if best.map_or(true, |(b, _)| d < b) {
            best = Some((d, cand));
        }
    }
    best.map(|(_, c)| *c)
        .ok_or(Error::NotEnoughCandidates { have: 0, need: 1 })
}

/// Median of the configured altitude band.
pub fn median_altitude(cfg: &SystemConfig) -> f64 {
    0.5 * (cfg.geometry.uav_altitude_m[0] + cfg.geometry.uav_altitude_m[1])
}

/// The AO loop on the nominal estimate only: one zero sample, SSE objective.
pub fn bf_sca_nominal<R: Rng + ?Sized>(
    estimates: &CascadeSet,
    precoder: Option<&Precoder>,
    phases: &[f64],
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SlotOutcome> {
    solve_slot(estimates, precoder, phases, &AoSettings::nominal(cfg), rng)
}

/// The AO loop on isotropic samples with the sample-mean objective.
pub fn bf_saa_plain<R: Rng + ?Sized>(
    estimates: &CascadeSet,
    precoder: Option<&Precoder>,
    phases: &[f64],
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SlotOutcome> {
    solve_slot(estimates, precoder, phases, &AoSettings::saa(cfg), rng)
}

/// Uniformly random codebook phases with the best closed-form MRT precoder on
/// the estimate; no iterations.
pub fn bf_mrt_random_phase<R: Rng + ?Sized>(
    estimates: &CascadeSet,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<SlotOutcome> {
    let settings = AoSettings::dro(cfg);
    let levels = settings.codebook.levels();
    let phases: Vec<f64> = (0..estimates.ris_elements())
        .map(|_| settings.codebook.phase(rng.gen_range(0..levels)))
        .collect();
    let (gu, ge) = estimates.effective_all(&unit_vector(&phases));
    let precoder = best_mrt(&gu, &ge, &settings)?;
    let sse = settings.model.sse(&gu, &ge, &precoder);
    Ok(SlotOutcome {
        precoder,
        phases,
        trace: AoTrace {
            values: vec![sse],
            ..AoTrace::default()
        },
        objective: sse,
        epigraph: None,
        nominal_sse: sse,
        worst_sample_sse: sse,
        samples_in_ball: true,
    })
}
