//! Quick invariant checks run by the `selftest` command.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::Result;
use crate::impairments::{quantize_phase, sample_von_mises, RisCodebook};
use crate::metrics::cvar;
use crate::simulation::keyed_rng;
use crate::stage2::epigraph_update;

use super::results::encode;
use super::run::{run_experiment, RunOptions};
use super::spec::{Experiment, ExperimentSpec};
use super::Format;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Modified Bessel function of the first kind by power series.
fn bessel_i(order: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200 {
        term *= (x / 2.0).powi(2) / (m as f64 * (m + order) as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Run the invariant suite; `seed` drives every random draw.
pub fn run_selftest(cfg: &SystemConfig, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = keyed_rng(seed, &[0x5e1f]);

    let cb = RisCodebook::new(2);
    let q = [
        quantize_phase(0.1, &cb),
        quantize_phase(FRAC_PI_4, &cb),
        quantize_phase(3.0, &cb),
    ];
    let ok = q[0] == 0.0 && q[1] == 0.0 && (q[2] - PI).abs() < 1e-12;
    out.push(check("quantize_phase", ok, format!("{q:?}")));

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=12);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let a = rng.gen_range(0.05..0.95);
        let closed = cvar(&xs, a)?;
        let brute = xs
            .iter()
            .map(|&t| t - xs.iter().map(|&r| (t - r).max(0.0)).sum::<f64>() / (a * n as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let e = epigraph_update(&xs, a)?;
        worst = worst.max((closed - brute).abs()).max((e.objective() - closed).abs());
    }
    out.push(check("cvar_epigraph", worst < 1e-9, format!("max deviation {worst:.2e}")));

    let kappa = 5.0;
    let n = 20_000;
    let (mut c, mut s) = (0.0, 0.0);
    for _ in 0..n {
        let x = sample_von_mises(0.0, kappa, &mut rng);
        c += x.cos();
        s += x.sin();
    }
    let mrl = (c * c + s * s).sqrt() / n as f64;
    let want = bessel_i(1, kappa) / bessel_i(0, kappa);
    let rel = (mrl - want).abs() / want;
    out.push(check("von_mises_resultant_length", rel < 0.02, format!("{mrl:.4} vs {want:.4}")));

    let spec = ExperimentSpec {
        trials: 1,
        robust_slots: 20,
        seed,
        ..ExperimentSpec::default()
    };
    let mut small = cfg.clone();
    small.stage1.candidates = small.stage1.candidates.min(8);
    small.stage1.top_k = small.stage1.top_k.min(2);
    small.stage1.fine_slots = small.stage1.fine_slots.min(20);
    small.stage1.presamples = small.stage1.presamples.min(12);
    let a = run_experiment(Experiment::Robust, &small, &spec, RunOptions::default())?;
    let b = run_experiment(Experiment::Robust, &small, &spec, RunOptions { parallel: Some(1), slot_log: false })?;
    let violations: f64 = a
        .table
        .rows
        .iter()
        .filter(|r| r.statistic == "violations")
        .map(|r| r.value)
        .sum();
    out.push(check("feasibility", violations == 0.0, format!("{violations} violations")));
    let same = encode(&a.table, Format::Csv)? == encode(&b.table, Format::Csv)?;
    out.push(check("determinism", same, format!("{} rows", a.table.rows.len())));
    Ok(out)
}
