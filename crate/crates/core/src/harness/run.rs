//! Seeded multi-trial execution of the three experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{deploy_avg_sse, deploy_geo_center, median_altitude, SchemeId};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::geometry::Position3;
use crate::metrics::{cvar, outage_probability, percentile};
use crate::simulation::{derive_seed, keyed_rng, Feasibility, Scenario, Simulator, Stream};
use crate::stage1::{CandidateGrid, Stage1Context};
use crate::stage2::{AoSettings, SlotRecord};

use super::results::{ResultRow, ResultTable, SCHEMA_VERSION};
use super::spec::{Experiment, ExperimentSpec, SweepPoint};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub parallel: Option<usize>,
    /// Keep per-slot solver records.
    pub slot_log: bool,
}

/// Where a scheme hovered in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub scheme: SchemeId,
    pub sweep: String,
    pub trial: usize,
    pub candidate: usize,
    pub position: Position3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotLogEntry {
    pub experiment: String,
    pub scheme: SchemeId,
    pub sweep: String,
    pub trial: usize,
    #[serde(flatten)]
    pub record: SlotRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub deployments: Vec<DeploymentRecord>,
    pub slot_log: Vec<SlotLogEntry>,
}

/// Seed of trial `t`; every stream of the trial derives from it.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, &[Stream::Trial as u64, t as u64])
}

/// Schemes of `spec` that take part in `experiment`, in canonical order.
pub fn experiment_schemes(experiment: Experiment, spec: &ExperimentSpec) -> Vec<SchemeId> {
    SchemeId::ALL
        .iter()
        .copied()
        .filter(|s| spec.schemes.contains(s))
        .filter(|s| match experiment {
            Experiment::Deploy => *s == SchemeId::DroCvar || s.is_deployment(),
            Experiment::Robust | Experiment::Sweep => !s.is_deployment(),
        })
        .collect()
}

struct SchemeRun {
    scheme: SchemeId,
    sse: Vec<f64>,
    feasibility: Feasibility,
    records: Vec<SlotRecord>,
    deployment: DeploymentRecord,
}

fn run_trial(
    cfg: &SystemConfig,
    spec: &ExperimentSpec,
    experiment: Experiment,
    schemes: &[SchemeId],
    trial: usize,
    sweep: &str,
    log: bool,
) -> Result<Vec<SchemeRun>> {
    let seed = trial_seed(spec.seed, trial);
    let slots = spec.slots_for(experiment, cfg);
    let scenario = Scenario::generate(cfg, seed, slots)?;
    let grid = CandidateGrid::generate(cfg, &mut keyed_rng(seed, &[Stream::Grid as u64]));
    let sim = Simulator::new(cfg);
    let ctx = Stage1Context {
        cfg,
        sim: &sim,
        scenario: &scenario,
        seed,
    };
    let stage1 = ctx.run(&grid, &AoSettings::dro(cfg))?;
    let eval_slots = spec.eval_slots(experiment);

    let mut out = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let (id, position, phases) = match scheme {
            SchemeId::DeployAvgSse => {
                let f = &stage1.fine[deploy_avg_sse(&stage1.fine)?];
                (f.id, f.position, f.phases.clone())
            }
            SchemeId::DeployGeoCenter => {
                let c = deploy_geo_center(&grid, scenario.initial_users(), scenario.bs, median_altitude(cfg))?;
                (c.id, c.position, ctx.probe(&c)?.phases)
            }
            _ => (stage1.selected.id, stage1.selected.position, stage1.selected.phases.clone()),
        };
        let run = sim
            .run(&scenario, position, 0..eval_slots, &scheme.beamformer(cfg), &phases, seed, 0, log)
            .map_err(|e| e.context(format!("scheme {scheme}")))?;
        out.push(SchemeRun {
            scheme,
            sse: run.sse,
            feasibility: run.feasibility,
            records: run.records,
            deployment: DeploymentRecord {
                scheme,
                sweep: sweep.to_string(),
                trial,
                candidate: id,
                position,
            },
        });
    }
    Ok(out)
}

/// Summary statistics of one SSE sample set, in [`super::results::STATISTICS`] order.
pub fn statistics(sse: &[f64], violations: usize, alpha: f64, threshold: f64) -> Result<Vec<(&'static str, f64)>> {
    if sse.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = sse.len() as f64;
    let mean = sse.iter().sum::<f64>() / n;
    let sd = (sse.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    // An all-zero sample has no spread to normalize.
    let cv = if mean > 0.0 { sd / mean } else { 0.0 };
    Ok(vec![
        ("p10", percentile(sse, 0.10)?),
        ("p20", percentile(sse, 0.20)?),
        ("p50", percentile(sse, 0.50)?),
        ("mean", mean),
        ("cv", cv),
        ("cvar", cvar(sse, alpha)?),
        ("outage", outage_probability(sse, threshold)),
        ("violations", violations as f64),
    ])
}

/// Run `experiment` for every trial (and sweep point) and tabulate the results.
///
/// Work is spread over trials; the table is assembled in a fixed order, so
/// the output depends only on the configuration and the master seed.
pub fn run_experiment(
    experiment: Experiment,
    cfg: &SystemConfig,
    spec: &ExperimentSpec,
    options: RunOptions,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    spec.validate()?;
    let schemes = experiment_schemes(experiment, spec);
    if schemes.is_empty() {
        return Err(crate::error::ConfigError::Validation(format!(
            "no configured scheme takes part in the {} experiment",
            experiment.as_str()
        ))
        .into());
    }
    let points: Vec<Option<SweepPoint>> = match experiment {
        Experiment::Sweep => spec.sweep.points().into_iter().map(Some).collect(),
        _ => vec![None],
    };
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();

    let work = || -> Result<Vec<Vec<SchemeRun>>> {
        jobs.par_iter()
            .map(|&(p, t)| {
                let (c, label) = match &points[p] {
                    Some(pt) => (pt.apply(cfg), pt.label()),
                    None => (cfg.clone(), String::new()),
                };
                run_trial(&c, spec, experiment, &schemes, t, &label, options.slot_log)
                    .map_err(|e| e.context(format!("{} trial {t}", experiment.as_str())))
            })
            .collect()
    };
    let runs = match options.parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Infeasible(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let alpha = cfg.dro.risk_level;
    let name = experiment.as_str().to_string();
    let mut out = ExperimentOutput::default();
    let row = |scheme, sweep: &str, trial, slot, statistic: &str, value| ResultRow {
        schema: SCHEMA_VERSION,
        experiment: name.clone(),
        scheme,
        sweep: sweep.to_string(),
        trial,
        slot,
        statistic: statistic.to_string(),
        value,
    };
    for (p, point) in points.iter().enumerate() {
        let label = point.map(|pt| pt.label()).unwrap_or_default();
        for (si, &scheme) in schemes.iter().enumerate() {
            let mut pooled = Vec::new();
            let mut pooled_violations = 0;
            for t in 0..spec.trials {
                let idx = jobs.iter().position(|&j| j == (p, t)).expect("job exists");
                let r = &runs[idx][si];
                debug_assert_eq!(r.scheme, scheme);
                for (slot, &v) in r.sse.iter().enumerate() {
                    out.table.rows.push(row(scheme, &label, Some(t), Some(slot), "sse", v));
                }
                let violations = r.feasibility.violations();
                for (stat, v) in statistics(&r.sse, violations, alpha, spec.outage_threshold)? {
                    out.table.rows.push(row(scheme, &label, Some(t), None, stat, v));
                }
                pooled.extend_from_slice(&r.sse);
                pooled_violations += violations;
                out.deployments.push(r.deployment.clone());
                out.slot_log.extend(r.records.iter().map(|rec| SlotLogEntry {
                    experiment: name.clone(),
                    scheme,
                    sweep: label.clone(),
                    trial: t,
                    record: rec.clone(),
                }));
            }
            if spec.trials > 1 {
                for (stat, v) in statistics(&pooled, pooled_violations, alpha, spec.outage_threshold)? {
                    out.table.rows.push(row(scheme, &label, None, None, stat, v));
                }
            }
        }
    }
    Ok(out)
}
