use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::impairments::{quantize_phase, RisCodebook};

use super::objective::{PrecoderCache, SampledProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub max_halvings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisStep {
    pub phases: Vec<f64>,
    pub accepted: bool,
    /// Step length of the accepted move (or the last one tried).
    pub step: f64,
    /// Exact objective at the returned phases.
    pub value: f64,
}

/// One projected gradient ascent step on the RIS phases.
///
/// Candidates are the codebook projections of `φ̂ + t∇` for
/// `t = π / max|∇| · 2^-i`, and once those collapse onto `φ̂`, one-level moves
/// along `sign(∇)` on the `m` largest-gradient elements for halving `m`.
/// Among candidates that do not lower the exact objective `current` and raise
/// the surrogate, the best exact value (surrogate as tie-break) is kept.
pub fn ris_wirtinger_step(
    problem: &SampledProblem<'_>,
    cache: &PrecoderCache,
    phases: &[f64],
    current: f64,
    tau: f64,
    codebook: &RisCodebook,
    search: &LineSearch,
) -> Result<RisStep> {
    let (smooth0, grad) = problem.smooth_gradient(cache, phases, tau);
    let peak = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut out = RisStep {
        phases: phases.to_vec(),
        accepted: false,
        step: 0.0,
        value: current,
    };
    if !(peak > 0.0) || !peak.is_finite() {
        return Ok(out);
    }
    let mut best_smooth = smooth0;
    let mut consider = |projected: Vec<f64>, step: f64, out: &mut RisStep| -> Result<()> {
        let value = problem.value(cache, &projected)?;
        let smooth = problem.smooth_value(cache, &projected, tau);
        let better = value > out.value || (value == out.value && smooth > best_smooth);
        if value >= current && smooth > smooth0 && better {
            *out = RisStep {
                phases: projected,
                accepted: true,
                step,
                value,
            };
            best_smooth = smooth;
        }
        Ok(())
    };

    let mut step = std::f64::consts::PI / peak;
    let mut last: Option<Vec<f64>> = None;
    let mut halvings = 0;
    while halvings <= search.max_halvings {
        let projected: Vec<f64> = phases
            .iter()
            .zip(&grad)
            .map(|(&p, &g)| quantize_phase(p + step * g, codebook))
            .collect();
        if projected.iter().zip(phases).all(|(a, b)| a == b) {
            break;
        }
        if last.as_ref() != Some(&projected) {
            last = Some(projected.clone());
            consider(projected, step, &mut out)?;
        }
        step *= 0.5;
        halvings += 1;
    }

    let mut order: Vec<usize> = (0..grad.len()).filter(|&n| grad[n] != 0.0).collect();
    order.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()).then(a.cmp(&b)));
    let mut support = order.len() / 2;
    while support >= 1 {
        let mut projected = phases.to_vec();
        for &n in &order[..support] {
            let shift = if grad[n] > 0.0 {
                codebook.step()
            } else {
                -codebook.step()
            };
            projected[n] = quantize_phase(phases[n] + shift, codebook);
        }
        if last.as_ref() != Some(&projected) {
            last = Some(projected.clone());
            consider(projected, codebook.step() / grad[order[0]].abs(), &mut out)?;
        }
        support /= 2;
    }
    if !out.accepted {
        out.step = step;
    }
    Ok(out)
}
