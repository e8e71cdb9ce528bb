#![allow(dead_code)]

use arisdro::simulation::{Scenario, SlotChannels, Simulator};
use arisdro::{Position3, SystemConfig};

/// Hover point halfway between the BS and the user centroid.
pub fn midpoint_ris(scenario: &Scenario, altitude: f64) -> Position3 {
    let c = Position3::centroid(scenario.initial_users());
    Position3::new(0.5 * (scenario.bs.x + c.x), 0.5 * (scenario.bs.y + c.y), altitude)
}

/// True and estimated cascades of slot 0 for trial `seed`.
pub fn slot_channels(cfg: &SystemConfig, seed: u64) -> (Simulator, SlotChannels) {
    let scenario = Scenario::generate(cfg, seed, 1).expect("scenario");
    let sim = Simulator::new(cfg);
    let snap = scenario.snapshot(0, midpoint_ris(&scenario, 105.0));
    let mut state = Vec::new();
    let ch = sim.slot_channels(&snap, seed, 0, 0, &mut state).expect("channels");
    (sim, ch)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
