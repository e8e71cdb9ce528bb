mod common;

use arisdro::channel::{line_of_sight, CascadeSet, Snapshot};
use arisdro::config::ImpairmentConfig;
use arisdro::simulation::{keyed_rng, Scenario, Simulator, Stream};
use arisdro::stage1::{
    blend_score, candidate_rows, conjugation_phases, fine_select, min_user_sinr_db, normalize_min_max,
    probe_candidate, select_top, write_candidate_scores, CandidateGrid, FineEvaluation, FineStatistic,
    Stage1Context, SurrogateScore,
};
use arisdro::{AoSettings, Position3, SystemConfig};
use rand::Rng;

fn small_cfg() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.stage1.candidates = 8;
    cfg.stage1.top_k = 3;
    cfg.stage1.presamples = 12;
    cfg.stage1.fine_slots = 20;
    cfg
}

fn score(id: usize, s: f64) -> SurrogateScore {
    SurrogateScore {
        id,
        position: Position3::new(0.0, 0.0, 100.0),
        s_probe: 0.0,
        s_probe_norm: 0.0,
        cvar_pre: s,
        score: s,
        phases: vec![],
    }
}

#[test]
fn conjugation_probe_dominates_random_probes_for_one_user() {
    let mut cfg = SystemConfig::default();
    cfg.system.users = 1;
    cfg.impairments = ImpairmentConfig::ideal();
    let sim = Simulator::new(&cfg);
    for seed in 0..10 {
        let scenario = Scenario::generate(&cfg, seed, 1).unwrap();
        let snap = Snapshot {
            bs: scenario.bs,
            ris: common::midpoint_ris(&scenario, 105.0),
            users: scenario.initial_users().to_vec(),
            eve: scenario.eve,
        };
        let los = CascadeSet::from_channels(&line_of_sight(&snap, &sim.params).unwrap()).unwrap();
        let conj = conjugation_phases(&los.users[0], &sim);
        let best = min_user_sinr_db(&los, &conj, &sim).unwrap();
        let mut rng = keyed_rng(seed, &[1]);
        for _ in 0..20 {
            let random: Vec<f64> = (0..los.ris_elements()).map(|_| sim.codebook.phase(rng.gen_range(0..4))).collect();
            assert!(best >= min_user_sinr_db(&los, &random, &sim).unwrap());
        }

        let r = probe_candidate(snap.ris, snap.bs, &snap.users, snap.eve, &sim, 0, &mut rng).unwrap();
        assert_eq!(r.evaluated, 2);
        assert!(r.phases.iter().all(|&p| sim.codebook.contains(p)));
        assert!((r.s_probe - best).abs() < 1e-9);

        let r = probe_candidate(snap.ris, snap.bs, &snap.users, snap.eve, &sim, 8, &mut rng).unwrap();
        assert_eq!(r.evaluated, 10);
        assert!(r.s_probe >= best - 1e-12);
    }
}

#[test]
fn blend_is_a_convex_combination() {
    assert_eq!(blend_score(2.0, 0.4, 1.0), 0.4);
    assert_eq!(blend_score(2.0, 0.4, 0.0), 2.0);
    let mut rng = keyed_rng(3, &[2]);
    for _ in 0..100 {
        let (c, s, w) = (rng.gen_range(0.0..5.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let b = blend_score(c, s, w);
        assert!(b >= c.min(s) - 1e-12 && b <= c.max(s) + 1e-12);
    }
    assert_eq!(normalize_min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    assert_eq!(normalize_min_max(&[4.0, 4.0]), vec![0.0, 0.0]);
}

#[test]
fn omega_extremes_select_a_single_term() {
    for omega in [0.0, 1.0] {
        let mut cfg = small_cfg();
        cfg.stage1.omega = omega;
        let scenario = Scenario::generate(&cfg, 4, cfg.stage1.fine_slots).unwrap();
        let sim = Simulator::new(&cfg);
        let ctx = Stage1Context {
            cfg: &cfg,
            sim: &sim,
            scenario: &scenario,
            seed: 4,
        };
        let grid = CandidateGrid::generate(&cfg, &mut keyed_rng(4, &[Stream::Grid as u64]));
        for s in ctx.surrogate_scores(&grid).unwrap() {
            let want = if omega == 0.0 { s.cvar_pre } else { s.s_probe_norm };
            assert_eq!(s.score, want);
        }
    }
}

#[test]
fn top_k_selection() {
    let picked: Vec<usize> = select_top(vec![score(0, 3.0), score(1, 1.0), score(2, 2.0)], 2)
        .iter()
        .map(|s| s.id)
        .collect();
    assert_eq!(picked, vec![0, 2]);
    let all: Vec<usize> = select_top(vec![score(0, 1.0), score(1, 1.0), score(2, 5.0)], 3)
        .iter()
        .map(|s| s.id)
        .collect();
    assert_eq!(all, vec![2, 0, 1]);
}

#[test]
fn coarse_screen_is_permutation_invariant_and_counts_work() {
    let cfg = small_cfg();
    let scenario = Scenario::generate(&cfg, 6, cfg.stage1.fine_slots).unwrap();
    let sim = Simulator::new(&cfg);
    let ctx = Stage1Context {
        cfg: &cfg,
        sim: &sim,
        scenario: &scenario,
        seed: 6,
    };
    let grid = CandidateGrid::generate(&cfg, &mut keyed_rng(6, &[Stream::Grid as u64]));
    assert!(grid.is_feasible(&cfg));
    let mut shuffled = grid.clone();
    shuffled.candidates.reverse();
    shuffled.candidates.swap(0, 3);
    let a: Vec<usize> = ctx.coarse_screen(&grid).unwrap().iter().map(|s| s.id).collect();
    let b: Vec<usize> = ctx.coarse_screen(&shuffled).unwrap().iter().map(|s| s.id).collect();
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.stage1.top_k);

    let out = ctx.run(&grid, &AoSettings::dro(&cfg)).unwrap();
    assert_eq!(out.scores.len(), grid.len());
    assert_eq!(out.fine.len(), cfg.stage1.top_k);
    assert_eq!(grid.len() - out.fine.len(), 5);
    assert_eq!(out.shortlist, a);
    let chosen = grid.get(out.selected.id).expect("selected candidate is in the grid");
    assert_eq!(chosen.position, out.selected.position);
    assert!(out.shortlist.contains(&out.selected.id));
    assert!(out.fine.iter().all(|f| f.sse.len() == cfg.stage1.fine_slots - cfg.stage1.warm_start_slots));

    let small = CandidateGrid {
        candidates: grid.candidates[..2].to_vec(),
    };
    assert!(ctx.coarse_screen(&small).is_err());

    let rows = candidate_rows(&out.scores, &out.fine, 0.2).unwrap();
    assert_eq!(rows.iter().filter(|r| r.fine_cvar.is_some()).count(), cfg.stage1.top_k);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    write_candidate_scores(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("id,x,y,z,s_probe,cvar_pre,score,fine_cvar\n"));
    assert_eq!(text.lines().count(), grid.len() + 1);
}

#[test]
fn fine_select_bookkeeping() {
    let e = |id, sse: Vec<f64>| FineEvaluation {
        id,
        position: Position3::new(0.0, 0.0, 100.0),
        phases: vec![],
        sse,
    };
    let one = [e(7, vec![1.0, 2.0])];
    assert_eq!(fine_select(&one, FineStatistic::Cvar { alpha: 0.2 }).unwrap(), 0);
    assert!(fine_select(&[], FineStatistic::Mean).is_err());
    let two = [e(0, vec![1.0, 1.0]), e(1, vec![1.0, 1.0])];
    assert_eq!(fine_select(&two, FineStatistic::Mean).unwrap(), 0);
}

#[test]
fn fine_selection_prefers_the_dominant_candidate() {
    let mut cfg = SystemConfig::default();
    cfg.impairments = ImpairmentConfig::ideal();
    cfg.geometry.area_x_m = [-1500.0, 1500.0];
    cfg.geometry.area_y_m = [-1500.0, 1500.0];
    let sim = Simulator::new(&cfg);
    let settings = AoSettings::dro(&cfg);
    let mut near_wins = 0;
    for seed in 0..3u64 {
        let scenario = Scenario::generate(&cfg, seed, cfg.stage1.fine_slots).unwrap();
        let near = common::midpoint_ris(&scenario, 105.0);
        let c = Position3::centroid(scenario.initial_users());
        let far = Position3::new(10.0 * c.x, 10.0 * c.y, 150.0);
        let grid = CandidateGrid::from_positions(vec![far, near]);
        let ctx = Stage1Context {
            cfg: &cfg,
            sim: &sim,
            scenario: &scenario,
            seed,
        };
        let scores = ctx.surrogate_scores(&grid).unwrap();
        let fine = ctx.fine_evaluate(&scores, &settings).unwrap();
        let idx = fine_select(&fine, FineStatistic::Cvar { alpha: 0.2 }).unwrap();
        if fine[idx].id == 1 {
            near_wins += 1;
        }
    }
    assert!(near_wins >= 2, "{near_wins}/3");
}
