//! Per-slot robust beamforming: sampled CVaR (or mean) secrecy objective
//! maximized by alternating precoder, RIS-phase and epigraph updates.

mod epigraph;
mod objective;
mod precoder;
mod ris;
mod sampler;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use epigraph::{epigraph_update, EpigraphState};
pub use objective::{logistic, softplus, Objective, PrecoderCache, SampledProblem};
pub use precoder::{
    threat_aware_mrt, threat_aware_precoder, threat_aware_zf, PowerLimits, PrecoderFamily,
    StreamPower,
};
pub use ris::{ris_wirtinger_step, LineSearch, RisStep};
pub use sampler::{adversarial_sample, SamplerParams, UncertaintySample};

use crate::channel::CascadeSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::impairments::{unit_vector, CsiErrorParams, RisCodebook};
use crate::linalg::C64;
use crate::metrics::{Precoder, SinrModel};

/// Everything the AO loop needs besides the channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoSettings {
    pub objective: Objective,
    pub sampler: SamplerParams,
    pub zeta_grid: Vec<f64>,
    pub families: Vec<PrecoderFamily>,
    /// Also try serving a single user with the full power.
    pub single_stream: bool,
    pub max_iters: usize,
    pub tolerance: f64,
    pub sharpness: f64,
    pub search: LineSearch,
    pub limits: PowerLimits,
    pub codebook: RisCodebook,
    pub model: SinrModel,
}

impl AoSettings {
    /// Adversarially sampled CVaR objective.
    pub fn dro(cfg: &SystemConfig) -> Self {
        let d = &cfg.dro;
        let csi = CsiErrorParams::from_config(&cfg.impairments);
        Self {
            objective: Objective::Cvar {
                alpha: d.risk_level,
            },
            sampler: SamplerParams {
                count: d.samples,
                radius: d.wasserstein_radius,
                steps: d.adversary_steps,
                user_radius_sq: csi.user_radius_sq(),
                eve_radius_sq: csi.eve_radius_sq(),
                sharpness: d.softplus_sharpness,
            },
            zeta_grid: d.zeta_grid.clone(),
            families: vec![PrecoderFamily::Mrt],
            single_stream: d.single_stream,
            max_iters: d.ao_max_iters,
            tolerance: d.ao_tolerance,
            sharpness: d.softplus_sharpness,
            search: LineSearch {
                max_halvings: d.max_halvings,
            },
            limits: PowerLimits {
                total: cfg.system.p_max_w,
                per_antenna: cfg.system.per_antenna_w,
            },
            codebook: RisCodebook::new(cfg.impairments.phase_bits),
            model: SinrModel::from_config(cfg),
        }
    }

    /// Nominal-CSI variant: a single zero sample, SSE objective.
    pub fn nominal(cfg: &SystemConfig) -> Self {
        let mut s = Self::dro(cfg);
        s.objective = Objective::Mean;
        s.sampler.count = 1;
        s.sampler.steps = 0;
        s
    }

    /// Risk-neutral SAA: isotropic samples, mean objective.
    pub fn saa(cfg: &SystemConfig) -> Self {
        let mut s = Self::dro(cfg);
        s.objective = Objective::Mean;
        s.sampler.steps = 0;
        s
    }

    /// Every `(family, power split, ζ)` the precoder block evaluates.
    pub fn precoder_grid(&self, users: usize) -> Vec<(PrecoderFamily, StreamPower, f64)> {
        let mut powers = vec![StreamPower::Equal];
        if self.single_stream && users > 1 {
            powers.extend((0..users).map(StreamPower::Single));
        }
        let mut out = Vec::new();
        for &f in &self.families {
            for &p in &powers {
                for &z in &self.zeta_grid {
                    out.push((f, p, z));
                }
            }
        }
        out
    }

    /// The sampled objective over `cascades` and `samples` with these settings.
    pub fn problem<'a>(
        &self,
        cascades: &'a CascadeSet,
        samples: &'a [UncertaintySample],
    ) -> SampledProblem<'a> {
        SampledProblem {
            cascades,
            samples,
            model: self.model,
            objective: self.objective,
            sharpness: self.sharpness,
        }
    }
}

/// Per-iteration history of one AO run. Entry 0 is the warm start.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AoTrace {
    pub values: Vec<f64>,
    pub precoder_accepted: Vec<bool>,
    pub ris_accepted: Vec<bool>,
    pub step_sizes: Vec<f64>,
}

impl AoTrace {
    /// Whether `J^(i+1) ≥ J^(i) − tol` for every iteration.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.values.windows(2).all(|p| p[1] >= p[0] - tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub precoder: Precoder,
    /// Intended codebook phases.
    pub phases: Vec<f64>,
    pub trace: AoTrace,
    /// Final sampled objective `J`.
    pub objective: f64,
    /// Final epigraph variables (CVaR objective only).
    pub epigraph: Option<EpigraphState>,
    /// SSE on the estimated channels.
    pub nominal_sse: f64,
    /// Smallest SSE over the sample set.
    pub worst_sample_sse: f64,
    /// Whether every sample respected its error ball when drawn.
    pub samples_in_ball: bool,
}

/// Compact per-slot log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub trace_len: usize,
    pub final_j: f64,
    pub nominal_sse: f64,
    pub worst_sample_sse: f64,
    pub realized_sse: f64,
    pub elapsed_us: u64,
}

impl SlotRecord {
    pub fn new(slot: usize, outcome: &SlotOutcome, realized_sse: f64, elapsed_us: u64) -> Self {
        Self {
            slot,
            trace_len: outcome.trace.values.len(),
            final_j: outcome.objective,
            nominal_sse: outcome.nominal_sse,
            worst_sample_sse: outcome.worst_sample_sse,
            realized_sse,
            elapsed_us,
        }
    }
}

fn check_warm_start(
    cascades: &CascadeSet,
    precoder: Option<&Precoder>,
    phases: &[f64],
    settings: &AoSettings,
) -> Result<()> {
    if phases.len() != cascades.ris_elements() {
        return Err(Error::DimensionMismatch {
            expected: cascades.ris_elements(),
            found: phases.len(),
        });
    }
    if let Some(bad) = phases.iter().find(|&&p| !settings.codebook.contains(p)) {
        return Err(Error::Infeasible(format!(
            "warm-start phase {bad} is not a codebook value"
        )));
    }
    if let Some(w) = precoder {
        if w.streams() != cascades.users_count() || w.antennas() != cascades.bs_antennas() {
            return Err(Error::Infeasible(
                "warm-start precoder has the wrong shape".into(),
            ));
        }
        if !w.is_feasible(settings.limits.total, settings.limits.per_antenna) {
            return Err(Error::Infeasible(
                "warm-start precoder violates the power limits".into(),
            ));
        }
    }
    Ok(())
}

/// Draw the sample set once, then run the alternating optimization until both
/// the objective and its smoothed surrogate change by less than the tolerance,
/// or the iteration cap is hit.
///
/// Without a warm-start precoder the loop starts from plain MRT at `phases`.
pub fn solve_slot<R: Rng + ?Sized>(
    cascades: &CascadeSet,
    precoder: Option<&Precoder>,
    phases: &[f64],
    settings: &AoSettings,
    rng: &mut R,
) -> Result<SlotOutcome> {
    check_warm_start(cascades, precoder, phases, settings)?;
    let (g_users, g_eve) = cascades.effective_all(&unit_vector(phases));
    let mut w = match precoder {
        Some(w) => w.clone(),
        None => threat_aware_mrt(&g_users, &g_eve, 0.0, &settings.limits)?,
    };
    let samples = adversarial_sample(
        &g_users,
        &g_eve,
        &w,
        &settings.model,
        &settings.sampler,
        rng,
    );
    let samples_in_ball = samples.iter().all(|s| {
        s.within_balls(
            &g_users,
            &g_eve,
            settings.sampler.user_radius_sq,
            settings.sampler.eve_radius_sq,
        )
    });
    let problem = settings.problem(cascades, &samples);

    let mut phases = phases.to_vec();
    let mut cache = problem.cache(&w)?;
    let mut values = problem.sample_values(&cache, &phases);
    let mut j = settings.objective.evaluate(&values)?;
    let mut tau = tau_of(&settings.objective, &values)?;
    let mut smooth = problem.smooth_value(&cache, &phases, tau);
    let mut trace = AoTrace {
        values: vec![j],
        ..AoTrace::default()
    };

    for _ in 0..settings.max_iters {
        // Precoder block: best (family, split, ζ) by exact objective, with
        // the surrogate breaking ties; kept only if it beats the incumbent.
        let (gu, ge) = cascades.effective_all(&unit_vector(&phases));
        let mut best: Option<(f64, f64, Precoder, PrecoderCache)> = None;
        let mut bar = (j, smooth);
        for (family, power, zeta) in settings.precoder_grid(gu.len()) {
            let cand = match threat_aware_precoder(family, power, &gu, &ge, zeta, &settings.limits)
            {
                Ok(c) => c,
                Err(Error::DegenerateChannel(_)) => continue,
                Err(e) => return Err(e),
            };
            let c = problem.cache(&cand)?;
            let val = problem.value(&c, &phases)?;
            if val < bar.0 {
                continue;
            }
            let sm = problem.smooth_value(&c, &phases, tau);
            if val > bar.0 || sm > bar.1 {
                bar = (val, sm);
                best = Some((val, sm, cand, c));
            }
        }
        let mut current = j;
        let w_accepted = best.is_some();
        if let Some((val, sm, cand, c)) = best {
            current = val;
            smooth = sm;
            w = cand;
            cache = c;
        }

        // RIS block.
        let step = ris_wirtinger_step(
            &problem,
            &cache,
            &phases,
            current,
            tau,
            &settings.codebook,
            &settings.search,
        )?;
        if step.accepted {
            phases = step.phases;
        }

        // Epigraph block.
        values = problem.sample_values(&cache, &phases);
        let j_new = settings.objective.evaluate(&values)?;
        tau = tau_of(&settings.objective, &values)?;
        trace.values.push(j_new);
        trace.precoder_accepted.push(w_accepted);
        trace.ris_accepted.push(step.accepted);
        trace.step_sizes.push(step.step);
        // The exact objective is flat wherever every rate gap is clipped, so
        // the surrogate must have settled too.
        let smooth_new = problem.smooth_value(&cache, &phases, tau);
        let settled = (j_new - j).abs() < settings.tolerance
            && (smooth_new - smooth).abs() < settings.tolerance;
        j = j_new;
        smooth = smooth_new;
        if settled {
            break;
        }
    }

    let epigraph = match settings.objective {
        Objective::Cvar { alpha } => Some(epigraph_update(&values, alpha)?),
        Objective::Mean => None,
    };
    let nominal_sse = {
        let (gu, ge) = cascades.effective_all(&unit_vector(&phases));
        settings.model.sse(&gu, &ge, &w)
    };
    let worst_sample_sse = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SlotOutcome {
        precoder: w,
        phases,
        trace,
        objective: j,
        epigraph,
        nominal_sse,
        worst_sample_sse,
        samples_in_ball,
    })
}

/// The MRT-family candidate of `settings` with the highest SSE on the given
/// channels. Ties keep the earlier grid entry.
pub fn best_mrt(g_users: &[Vec<C64>], g_eve: &[C64], settings: &AoSettings) -> Result<Precoder> {
    let mut best: Option<(f64, Precoder)> = None;
    for (family, power, zeta) in settings.precoder_grid(g_users.len()) {
        if family != PrecoderFamily::Mrt {
            continue;
        }
        let w = match threat_aware_precoder(family, power, g_users, g_eve, zeta, &settings.limits) {
            Ok(w) => w,
            Err(Error::DegenerateChannel(_)) => continue,
            Err(e) => return Err(e),
        };
        let v = settings.model.sse(g_users, g_eve, &w);
        if best.as_ref().map_or(true, |b| v > b.0) {
            best = Some((v, w));
        }
    }
    match best {
        Some((_, w)) => Ok(w),
        None => threat_aware_mrt(g_users, g_eve, 0.0, &settings.limits),
    }
}

fn tau_of(objective: &Objective, values: &[f64]) -> Result<f64> {
    match *objective {
        Objective::Cvar { alpha } => Ok(epigraph_update(values, alpha)?.tau),
        Objective::Mean => Ok(0.0),
    }
}
