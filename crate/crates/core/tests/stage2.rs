mod common;

use std::f64::consts::PI;

use arisdro::channel::{line_of_sight, CascadeSet};
use arisdro::config::ImpairmentConfig;
use arisdro::impairments::unit_vector;
use arisdro::metrics::{cvar, Precoder};
use arisdro::simulation::keyed_rng;
use arisdro::stage2::{
    adversarial_sample, epigraph_update, ris_wirtinger_step, solve_slot, threat_aware_mrt, threat_aware_precoder,
    AoSettings, Objective, PowerLimits, PrecoderFamily, SamplerParams, StreamPower,
};
use arisdro::{benchmarks, Position3, SystemConfig, C64};
use num_complex::ComplexFloat;
use rand::Rng;

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn random_phases<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
}

#[test]
fn wirtinger_gradient_matches_central_differences() {
    let cfg = SystemConfig::default();
    let settings = AoSettings::dro(&cfg);
    let mut rng = keyed_rng(11, &[1]);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for point in 0..50u64 {
        let (_, ch) = common::slot_channels(&cfg, point);
        let phases = random_phases(ch.estimate.ris_elements(), &mut rng);
        let (gu, ge) = ch.estimate.effective_all(&unit_vector(&phases));
        let zeta = rng.gen_range(0.0..1.0);
        let w = threat_aware_mrt(&gu, &ge, zeta, &settings.limits).unwrap();
        let samples = adversarial_sample(&gu, &ge, &w, &settings.model, &settings.sampler, &mut rng);
        let problem = settings.problem(&ch.estimate, &samples);
        let cache = problem.cache(&w).unwrap();
        let tau = epigraph_update(&problem.sample_values(&cache, &phases), 0.2).unwrap().tau;
        let (_, grad) = problem.smooth_gradient(&cache, &phases, tau);
        let peak = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if peak < 1e-8 {
            continue;
        }
        let h = 1e-6;
        let mut err = 0.0f64;
        for n in 0..phases.len() {
            let mut p = phases.clone();
            p[n] += h;
            let up = problem.smooth_value(&cache, &p, tau);
            p[n] -= 2.0 * h;
            let down = problem.smooth_value(&cache, &p, tau);
            let fd = (up - down) / (2.0 * h);
            err = err.max((fd - grad[n]).abs());
        }
        worst = worst.max(err / peak);
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} points with a nonzero gradient");
    assert!(worst < 1e-5, "max relative error {worst:e}");
}

#[test]
fn zeta_zero_is_mrt_and_zeta_one_nulls_the_eavesdropper() {
    let cfg = SystemConfig::default();
    let limits = PowerLimits {
        total: 2.0,
        per_antenna: 0.1,
    };
    for seed in 0..10 {
        let (_, ch) = common::slot_channels(&cfg, seed);
        let (gu, ge) = ch.estimate.effective_all(&unit_vector(&vec![0.0; ch.estimate.ris_elements()]));
        let w0 = threat_aware_mrt(&gu, &ge, 0.0, &limits).unwrap();
        for (k, g) in gu.iter().enumerate() {
            let c = dot_conj(g, &w0.streams[k]).abs() / (norm(g) * norm(&w0.streams[k]));
            assert!((c - 1.0).abs() < 1e-10);
        }
        let w1 = threat_aware_mrt(&gu, &ge, 1.0, &limits).unwrap();
        for wk in &w1.streams {
            assert!(dot_conj(&ge, wk).abs() < 1e-10 * norm(&ge) * norm(wk));
        }
        for w in [&w0, &w1] {
            assert!(w.is_feasible(2.0, 0.1));
        }
    }
}

#[test]
fn stream_power_allocation() {
    let cfg = SystemConfig::default();
    let limits = PowerLimits {
        total: 2.0,
        per_antenna: 0.1,
    };
    let (_, ch) = common::slot_channels(&cfg, 3);
    let (gu, ge) = ch.estimate.effective_all(&unit_vector(&vec![0.0; ch.estimate.ris_elements()]));
    let eq = threat_aware_precoder(PrecoderFamily::Mrt, StreamPower::Equal, &gu, &ge, 0.5, &limits).unwrap();
    let p: Vec<f64> = eq.streams.iter().map(|w| w.iter().map(|x| x.norm_sqr()).sum()).collect();
    assert!(common::rel_close(p[0], p[1], 1e-12));
    let single = threat_aware_precoder(PrecoderFamily::Mrt, StreamPower::Single(1), &gu, &ge, 0.5, &limits).unwrap();
    assert_eq!(norm(&single.streams[0]), 0.0);
    assert!(norm(&single.streams[1]) > 0.0);
    assert!(single.is_feasible(2.0, 0.1));
    assert!(threat_aware_precoder(PrecoderFamily::Mrt, StreamPower::Single(2), &gu, &ge, 0.5, &limits).is_err());
    let zf = threat_aware_precoder(PrecoderFamily::ZeroForcing, StreamPower::Equal, &gu, &ge, 0.0, &limits).unwrap();
    assert!(dot_conj(&gu[1], &zf.streams[0]).abs() < 1e-9 * norm(&gu[1]) * norm(&zf.streams[0]));
}

#[test]
fn zero_channel_is_degenerate() {
    let limits = PowerLimits {
        total: 2.0,
        per_antenna: 0.1,
    };
    let z = vec![C64::new(0.0, 0.0); 4];
    let g = vec![C64::new(1.0, 0.0); 4];
    let err = threat_aware_mrt(&[z, g.clone()], &g, 0.0, &limits).unwrap_err();
    assert!(err.to_string().contains("degenerate channel"), "{err}");
}

#[test]
fn epigraph_examples() {
    let e = epigraph_update(&[2.5; 7], 0.2).unwrap();
    assert_eq!(e.tau, 2.5);
    assert!(e.slacks.iter().all(|&s| s == 0.0));
    assert_eq!(e.objective(), 2.5);

    let r = [1.0, 2.0, 3.0, 4.0, 5.0];
    let e = epigraph_update(&r, 0.2).unwrap();
    assert_eq!(e.tau, 1.0);
    assert!((e.objective() - 1.0).abs() < 1e-12);
    let brute = (0..=60_000)
        .map(|i| i as f64 * 1e-4)
        .map(|t| t - r.iter().map(|&x| (t - x).max(0.0)).sum::<f64>() / (0.2 * 5.0))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((brute - 1.0).abs() < 1e-9);

    let mut rng = keyed_rng(5, &[2]);
    for _ in 0..100 {
        let n = rng.gen_range(1..=30);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..6.0)).collect();
        let alpha = rng.gen_range(0.01..0.99);
        let e = epigraph_update(&xs, alpha).unwrap();
        assert!(e.satisfies(&xs));
        assert!((e.objective() - cvar(&xs, alpha).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn sampler_contracts() {
    let cfg = SystemConfig::default();
    let settings = AoSettings::dro(&cfg);
    let mut rng = keyed_rng(9, &[3]);
    let zero = SamplerParams {
        radius: 0.0,
        user_radius_sq: 0.0,
        eve_radius_sq: 0.0,
        ..settings.sampler
    };
    let mut below = 0;
    let instances = 200;
    for i in 0..instances {
        let (_, ch) = common::slot_channels(&cfg, 1000 + i);
        let phases = random_phases(ch.estimate.ris_elements(), &mut rng);
        let (gu, ge) = ch.estimate.effective_all(&unit_vector(&phases));
        let w = threat_aware_mrt(&gu, &ge, 0.0, &settings.limits).unwrap();
        if i < 20 {
            let s = adversarial_sample(&gu, &ge, &w, &settings.model, &zero, &mut rng);
            assert_eq!(s.len(), settings.sampler.count);
            assert!(s.iter().all(|x| x.is_zero()));
        }
        let samples = adversarial_sample(&gu, &ge, &w, &settings.model, &settings.sampler, &mut rng);
        assert!(samples[0].is_zero());
        for s in &samples {
            assert!(s.within_balls(&gu, &ge, settings.sampler.user_radius_sq, settings.sampler.eve_radius_sq));
        }
        let nominal = settings.model.sse(&gu, &ge, &w);
        let perturbed: Vec<f64> = samples[1..]
            .iter()
            .map(|s| {
                let pu: Vec<Vec<C64>> = gu
                    .iter()
                    .zip(&s.users)
                    .map(|(g, d)| g.iter().zip(d).map(|(a, b)| a + b).collect())
                    .collect();
                let pe: Vec<C64> = ge.iter().zip(&s.eve).map(|(a, b)| a + b).collect();
                settings.model.sse(&pu, &pe, &w)
            })
            .collect();
        let mean = perturbed.iter().sum::<f64>() / perturbed.len() as f64;
        if mean <= nominal {
            below += 1;
        }
    }
    assert!(below as f64 >= 0.8 * instances as f64, "{below}/{instances} below nominal");
}

#[test]
fn ris_step_stays_in_codebook_and_never_descends() {
    let cfg = SystemConfig::default();
    let settings = AoSettings::dro(&cfg);
    let mut rng = keyed_rng(21, &[4]);
    let levels = settings.codebook.levels();
    for seed in 0..20 {
        let (_, ch) = common::slot_channels(&cfg, seed);
        let phases: Vec<f64> = (0..ch.estimate.ris_elements())
            .map(|_| settings.codebook.phase(rng.gen_range(0..levels)))
            .collect();
        let (gu, ge) = ch.estimate.effective_all(&unit_vector(&phases));
        let w = threat_aware_mrt(&gu, &ge, 0.0, &settings.limits).unwrap();
        let samples = adversarial_sample(&gu, &ge, &w, &settings.model, &settings.sampler, &mut rng);
        let problem = settings.problem(&ch.estimate, &samples);
        let cache = problem.cache(&w).unwrap();
        let j0 = problem.value(&cache, &phases).unwrap();
        let tau = epigraph_update(&problem.sample_values(&cache, &phases), 0.2).unwrap().tau;
        let step = ris_wirtinger_step(&problem, &cache, &phases, j0, tau, &settings.codebook, &settings.search).unwrap();
        assert!(step.phases.iter().all(|&p| settings.codebook.contains(p)));
        assert!(step.value >= j0);
        assert!((problem.value(&cache, &step.phases).unwrap() - step.value).abs() < 1e-12);
        if !step.accepted {
            assert_eq!(step.phases, phases);
        }
    }
}

#[test]
fn ao_is_monotone_feasible_and_deterministic() {
    let cfg = SystemConfig::default();
    let settings = AoSettings::dro(&cfg);
    for seed in 0..20 {
        let (_, ch) = common::slot_channels(&cfg, seed);
        let phases = vec![0.0; ch.estimate.ris_elements()];
        let a = solve_slot(&ch.estimate, None, &phases, &settings, &mut keyed_rng(seed, &[5])).unwrap();
        let b = solve_slot(&ch.estimate, None, &phases, &settings, &mut keyed_rng(seed, &[5])).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.is_monotone(1e-9), "{:?}", a.trace.values);
        assert!(a.trace.values.len() <= settings.max_iters + 1);
        assert!(a.precoder.is_feasible(2.0, 0.1));
        assert!(a.phases.iter().all(|&p| settings.codebook.contains(p)));
        assert!(a.samples_in_ball);
        assert!(a.nominal_sse >= 0.0 && a.worst_sample_sse >= 0.0);
        let e = a.epigraph.as_ref().expect("cvar objective keeps epigraph variables");
        assert!((e.objective() - a.objective).abs() < 1e-9);

        let warm = solve_slot(&ch.estimate, Some(&a.precoder), &a.phases, &settings, &mut keyed_rng(seed, &[6])).unwrap();
        assert!(warm.trace.is_monotone(1e-9));
    }
}

#[test]
fn infeasible_warm_start_is_rejected() {
    let cfg = SystemConfig::default();
    let settings = AoSettings::dro(&cfg);
    let (_, ch) = common::slot_channels(&cfg, 0);
    let n = ch.estimate.ris_elements();
    let mut rng = keyed_rng(0, &[7]);
    assert!(solve_slot(&ch.estimate, None, &vec![0.3; n], &settings, &mut rng).is_err());
    let hot = Precoder::new(vec![vec![C64::new(1.0, 0.0); 32]; 2]);
    assert!(solve_slot(&ch.estimate, Some(&hot), &vec![0.0; n], &settings, &mut rng).is_err());
}

#[test]
fn los_single_user_beats_random_phase_mrt() {
    let mut cfg = SystemConfig::default();
    cfg.system.users = 1;
    cfg.impairments = ImpairmentConfig::ideal();
    let mut settings = AoSettings::dro(&cfg);
    settings.sampler.radius = 0.0;
    settings.sampler.count = 1;
    let mut wins = 0;
    for seed in 0..50u64 {
        let scenario = arisdro::Scenario::generate(&cfg, seed, 1).unwrap();
        let sim = arisdro::Simulator::new(&cfg);
        let snap = scenario.snapshot(0, common::midpoint_ris(&scenario, 105.0));
        let los = CascadeSet::from_channels(&line_of_sight(&snap, &sim.params).unwrap()).unwrap();
        let mut rng = keyed_rng(seed, &[8]);
        let phases = vec![0.0; los.ris_elements()];
        let ao = solve_slot(&los, None, &phases, &settings, &mut rng).unwrap();
        let random = benchmarks::bf_mrt_random_phase(&los, &cfg, &mut rng).unwrap();
        if ao.nominal_sse >= random.nominal_sse {
            wins += 1;
        }
    }
    assert!(wins >= 48, "{wins}/50");
}

#[test]
fn objective_conventions() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mean = Objective::Mean.evaluate(&xs).unwrap();
    let tail = Objective::Cvar { alpha: 0.2 }.evaluate(&xs).unwrap();
    assert_eq!(mean, 3.0);
    assert_eq!(tail, 1.0);
    assert!(Objective::Cvar { alpha: 0.0 }.evaluate(&xs).is_err());
    let _ = Position3::new(0.0, 0.0, 0.0);
}
