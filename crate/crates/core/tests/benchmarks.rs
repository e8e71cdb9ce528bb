mod common;

use arisdro::benchmarks::{
    bf_mrt_random_phase, bf_saa_plain, bf_sca_nominal, deploy_avg_sse, deploy_geo_center, median_altitude,
};
use arisdro::metrics::percentile;
use arisdro::simulation::{keyed_rng, Beamformer, Scenario, Simulator};
use arisdro::stage1::{fine_select, CandidateGrid, FineEvaluation, FineStatistic};
use arisdro::stage2::{Objective, UncertaintySample};
use arisdro::{AoSettings, Position3, SchemeId, SystemConfig};

fn eval(id: usize, sse: Vec<f64>) -> FineEvaluation {
    FineEvaluation {
        id,
        position: Position3::new(id as f64, 0.0, 100.0),
        phases: vec![],
        sse,
    }
}

#[test]
fn heavy_tail_candidate_splits_mean_and_cvar() {
    // Bimodal: high mean, 30% of the slots in deep fade.
    let bimodal: Vec<f64> = (0..100).map(|i| if i % 10 < 3 { 0.2 } else { 5.0 }).collect();
    let stable: Vec<f64> = (0..100).map(|i| 3.0 + 0.01 * (i % 3) as f64).collect();
    let evals = [eval(0, bimodal), eval(1, stable)];
    assert_eq!(deploy_avg_sse(&evals).unwrap(), 0);
    assert_eq!(fine_select(&evals, FineStatistic::Cvar { alpha: 0.2 }).unwrap(), 1);

    let sym_a: Vec<f64> = (0..101).map(|i| 2.0 + (i as f64 - 50.0) / 50.0).collect();
    let sym_b: Vec<f64> = (0..101).map(|i| 3.0 + (i as f64 - 50.0) / 50.0).collect();
    let evals = [eval(0, sym_a), eval(1, sym_b)];
    assert_eq!(
        deploy_avg_sse(&evals).unwrap(),
        fine_select(&evals, FineStatistic::Cvar { alpha: 0.2 }).unwrap()
    );
}

#[test]
fn geometric_center_examples() {
    let cfg = SystemConfig::default();
    let z = median_altitude(&cfg);
    assert_eq!(z, 105.0);
    let bs = Position3::new(0.0, 0.0, 30.0);
    let d = 80.0;
    let grid = CandidateGrid::from_positions(vec![
        Position3::new(0.0, 0.0, z),
        Position3::new(d / 2.0 + 1.0, 0.5, z),
        Position3::new(d, 0.0, z),
        Position3::new(d / 2.0, 0.0, 150.0),
    ]);
    let c = deploy_geo_center(&grid, &[Position3::new(d, 0.0, 0.0)], bs, z).unwrap();
    assert_eq!(c.id, 1);

    let users = [Position3::new(40.0, 30.0, 0.0), Position3::new(40.0, -30.0, 0.0)];
    let tie = CandidateGrid::from_positions(vec![
        Position3::new(20.0, 10.0, z),
        Position3::new(20.0, -10.0, z),
    ]);
    assert_eq!(deploy_geo_center(&tie, &users, bs, z).unwrap().id, 0);
    assert!(deploy_geo_center(&tie, &[], bs, z).is_err());
}

#[test]
fn baseline_degeneracies_and_dominance() {
    let cfg = SystemConfig::default();
    for seed in 0..10 {
        let (_, ch) = common::slot_channels(&cfg, seed);
        let phases = vec![0.0; ch.estimate.ris_elements()];
        let mut one = cfg.clone();
        one.dro.samples = 1;
        let saa = bf_saa_plain(&ch.estimate, None, &phases, &one, &mut keyed_rng(seed, &[1])).unwrap();
        let sca = bf_sca_nominal(&ch.estimate, None, &phases, &cfg, &mut keyed_rng(seed, &[1])).unwrap();
        assert_eq!(saa.precoder, sca.precoder);
        assert_eq!(saa.phases, sca.phases);
        assert!(sca.trace.is_monotone(1e-9) && saa.trace.is_monotone(1e-9));

        let rnd = bf_mrt_random_phase(&ch.estimate, &cfg, &mut keyed_rng(seed, &[2])).unwrap();
        assert!(rnd.precoder.is_feasible(2.0, 0.1));
        assert!(rnd.phases.iter().all(|&p| AoSettings::dro(&cfg).codebook.contains(p)));
        assert!(rnd.nominal_sse >= 0.0);
    }
    let xs = [0.3, 4.0, 2.2, 1.1, 5.0, 0.0, 2.9];
    assert!(Objective::Mean.evaluate(&xs).unwrap() >= Objective::Cvar { alpha: 0.2 }.evaluate(&xs).unwrap());
    assert!(UncertaintySample::zero(2, 4).is_zero());
}

fn paired(cfg: &SystemConfig, a: SchemeId, b: SchemeId, slots: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let scenario = Scenario::generate(cfg, seed, slots).unwrap();
    let sim = Simulator::new(cfg);
    let ris = common::midpoint_ris(&scenario, 105.0);
    let phases = vec![0.0; cfg.system.ris_elements()];
    let run = |s: SchemeId| {
        sim.run(&scenario, ris, 0..slots, &s.beamformer(cfg), &phases, seed, 0, false)
            .unwrap()
            .sse
    };
    (run(a), run(b))
}

#[test]
fn without_csi_error_robustness_is_free() {
    let mut cfg = SystemConfig::default();
    cfg.impairments.csi_error_user = 0.0;
    cfg.impairments.csi_error_eve = 0.0;
    cfg.impairments.csi_error_br = 0.0;
    let (dro, nominal) = paired(&cfg, SchemeId::DroCvar, SchemeId::BfScaNominal, 200, 0);
    let (md, mn) = (percentile(&dro, 0.5).unwrap(), percentile(&nominal, 0.5).unwrap());
    assert!((md - mn).abs() <= 0.05 * mn.max(md), "median {md} vs {mn}");
}

#[test]
fn random_phase_floor_is_below_the_robust_beamformer() {
    let cfg = SystemConfig::default();
    // Seed 0 places the eavesdropper where a secrecy link exists at the midpoint hover.
    let (dro, rnd) = paired(&cfg, SchemeId::DroCvar, SchemeId::BfMrtRandomPhase, 200, 0);
    assert!(percentile(&rnd, 0.5).unwrap() < percentile(&dro, 0.5).unwrap());
    let wins = dro.iter().zip(&rnd).filter(|(d, r)| d > r).count();
    let losses = dro.iter().zip(&rnd).filter(|(d, r)| d < r).count();
    // One-sided sign test at the 90% level: wins must exceed n/2 + 1.28·√n/2.
    let n = (wins + losses) as f64;
    assert!(wins as f64 > n / 2.0 + 1.2816 * n.sqrt() / 2.0, "{wins} wins, {losses} losses");
}

#[test]
fn scheme_ids_round_trip() {
    for s in SchemeId::ALL {
        assert_eq!(s.as_str().parse::<SchemeId>().unwrap(), s);
        assert_eq!(s.is_deployment(), matches!(s, SchemeId::DeployAvgSse | SchemeId::DeployGeoCenter));
        let expected_ao = !matches!(s, SchemeId::BfMrtRandomPhase);
        assert_eq!(matches!(s.beamformer(&SystemConfig::default()), Beamformer::Ao(_)), expected_ao);
    }
    assert!("NOPE".parse::<SchemeId>().is_err());
}

