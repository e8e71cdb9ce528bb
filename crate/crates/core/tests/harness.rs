use std::path::Path;

use arisdro::harness::{
    config_hash, decode, emit_results, encode, load_config, parse_config, read_results, run_experiment,
    run_selftest, Experiment, ExperimentSpec, Format, ResultRow, ResultTable, RunManifest, RunOptions,
    SCHEMA_VERSION, STATISTICS,
};
use arisdro::{ConfigError, Error, SchemeId, SystemConfig};

fn tiny() -> (SystemConfig, ExperimentSpec) {
    let mut cfg = SystemConfig::default();
    cfg.stage1.candidates = 6;
    cfg.stage1.top_k = 2;
    cfg.stage1.presamples = 8;
    cfg.stage1.fine_slots = 12;
    let spec = ExperimentSpec {
        trials: 2,
        robust_slots: 10,
        deploy_eval_slots: 10,
        sweep_slots: 6,
        ..ExperimentSpec::default()
    };
    (cfg, spec)
}

#[test]
fn empty_overrides_give_the_published_defaults() {
    let (cfg, spec) = parse_config("").unwrap();
    assert_eq!(cfg, SystemConfig::default());
    assert_eq!(spec, ExperimentSpec::default());
    let s = &cfg.system;
    assert_eq!((s.bs_antennas, s.ris_elements(), s.users, s.eavesdroppers), (32, 64, 2, 1));
    assert_eq!((s.p_max_w, s.per_antenna_w, s.carrier_hz), (2.0, 0.1, 28e9));
    let i = &cfg.impairments;
    assert_eq!((i.phase_bits, i.jitter_kappa, i.amplitude_error_std), (2, 5.0, 0.15));
    assert_eq!((i.beta_min, i.beta_max, i.csi_correlation), (0.4, 0.8, 0.75));
    assert_eq!((i.csi_error_user, i.csi_error_eve, i.csi_error_br), (0.10, 0.12, 0.05));
    assert_eq!((i.evm_bs, i.evm_user, i.extra_phase_noise_std), (0.08, 0.10, 0.3));
    let c = &cfg.channel;
    assert_eq!((c.kappa_br_db, c.kappa_ru_db, c.kappa_re_db), (10.0, 3.0, 5.0));
    assert_eq!((c.ple_br, c.ple_ru, c.ple_re), (2.5, 3.5, 3.2));
    let d = &cfg.dro;
    assert_eq!((d.samples, d.wasserstein_radius, d.risk_level, d.ao_max_iters), (10, 0.03, 0.2, 15));
    assert_eq!((cfg.stage1.candidates, cfg.stage1.top_k, cfg.stage1.presamples, cfg.stage1.fine_slots), (50, 12, 48, 200));
    assert_eq!(cfg.geometry.uav_altitude_m, [60.0, 150.0]);
    assert_eq!((spec.trials, spec.robust_slots, spec.deploy_eval_slots, spec.outage_threshold), (3, 1500, 1000, 2.5));
}

#[test]
fn config_errors_are_distinct_and_descriptive() {
    let err = parse_config("[system]\np_max_w = -1.0\n").unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("power must be positive"), "{err}");

    let err = parse_config("[system]\nfoo = 1\n").unwrap_err();
    assert!(matches!(err, Error::Config(ConfigError::Parse(_))));
    assert!(err.to_string().contains("foo"), "{err}");
    let err = parse_config("foo = 1\n").unwrap_err();
    assert!(err.to_string().contains("foo"), "{err}");

    let err = parse_config("[system\n").unwrap_err();
    assert!(matches!(err, Error::Config(ConfigError::Parse(_))));

    let err = parse_config("[experiment]\ntrials = 0\n").unwrap_err();
    assert!(matches!(err, Error::Config(ConfigError::Validation(_))));

    let err = load_config(Path::new("/nonexistent/arisdro.toml")).unwrap_err();
    assert!(matches!(err, Error::Config(ConfigError::NotFound(_))));
    assert!(err.is_validation());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[experiment]\nseed = 7\nschemes = [\"DRO_CVAR\"]\n[dro]\nsamples = 4\n").unwrap();
    let (cfg, spec) = load_config(&path).unwrap();
    assert_eq!((spec.seed, cfg.dro.samples), (7, 4));
    assert_eq!(spec.schemes, vec![SchemeId::DroCvar]);
}

fn sample_table() -> ResultTable {
    let row = |scheme, trial, slot, statistic: &str, value| ResultRow {
        schema: SCHEMA_VERSION,
        experiment: "robust".into(),
        scheme,
        sweep: "kappa=2;rho=0.5".into(),
        trial,
        slot,
        statistic: statistic.into(),
        value,
    };
    ResultTable {
        rows: vec![
            row(SchemeId::DroCvar, Some(0), Some(0), "sse", 1.0 / 3.0),
            row(SchemeId::DroCvar, Some(0), None, "p10", 0.1),
            row(SchemeId::BfSaaPlain, None, None, "cv", 1e-300),
            row(SchemeId::BfSaaPlain, None, None, "mean", 12345.678901234567),
        ],
    }
}

#[test]
fn emit_round_trips_in_both_formats() {
    let empty = encode(&ResultTable::default(), Format::Csv).unwrap();
    assert_eq!(
        String::from_utf8(empty).unwrap(),
        "schema,experiment,scheme,sweep,trial,slot,statistic,value\n"
    );
    let t = sample_table();
    let csv = encode(&t, Format::Csv).unwrap();
    let json = encode(&t, Format::Json).unwrap();
    assert_eq!(decode(&csv, Format::Csv).unwrap(), t);
    assert_eq!(decode(&json, Format::Json).unwrap(), t);
    assert_eq!(decode(&csv, Format::Csv).unwrap(), decode(&json, Format::Json).unwrap());
    assert_eq!(csv, encode(&t, Format::Csv).unwrap());

    let dir = tempfile::tempdir().unwrap();
    for f in [Format::Csv, Format::Json] {
        let p = dir.path().join(format!("r.{}", f.extension()));
        emit_results(&t, f, &p).unwrap();
        assert_eq!(read_results(&p, f).unwrap(), t);
    }
    let err = emit_results(&t, Format::Csv, &dir.path().join("missing/r.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
    assert!("xml".parse::<Format>().is_err());
}

#[test]
fn single_trial_bookkeeping() {
    let (cfg, mut spec) = tiny();
    spec.trials = 1;
    spec.schemes = vec![SchemeId::BfMrtRandomPhase];
    let out = run_experiment(Experiment::Robust, &cfg, &spec, RunOptions::default()).unwrap();
    let t = &out.table;
    assert_eq!(t.slot_sse(SchemeId::BfMrtRandomPhase, "", Some(0)).len(), 10);
    for stat in STATISTICS {
        let n = t.rows.iter().filter(|r| r.statistic == stat).count();
        assert_eq!(n, 1, "{stat}");
    }
    assert_eq!(t.rows.len(), 10 + STATISTICS.len());
    assert!(t.rows.iter().all(|r| r.trial == Some(0)));
}

#[test]
fn tables_are_complete_and_deterministic() {
    let (cfg, spec) = tiny();
    for experiment in [Experiment::Robust, Experiment::Deploy] {
        let a = run_experiment(experiment, &cfg, &spec, RunOptions { parallel: Some(1), slot_log: true }).unwrap();
        let b = run_experiment(experiment, &cfg, &spec, RunOptions { parallel: Some(3), slot_log: false }).unwrap();
        assert_eq!(encode(&a.table, Format::Csv).unwrap(), encode(&b.table, Format::Csv).unwrap());
        let schemes = a.table.schemes();
        let expected = match experiment {
            Experiment::Deploy => 3,
            _ => 4,
        };
        assert_eq!(schemes.len(), expected);
        for s in &schemes {
            for trial in [Some(0), Some(1), None] {
                for stat in STATISTICS {
                    assert!(a.table.get(*s, "", trial, stat).is_some(), "{s} {trial:?} {stat}");
                }
            }
            assert_eq!(a.table.get(*s, "", None, "violations"), Some(0.0));
        }
        assert_eq!(a.deployments.len(), expected * spec.trials);
        assert!(!a.slot_log.is_empty() && b.slot_log.is_empty());
    }
}

#[test]
fn sweep_covers_the_grid() {
    let (cfg, mut spec) = tiny();
    spec.trials = 1;
    spec.sweep.jitter_kappa = vec![2.0, 10.0];
    spec.sweep.csi_correlation = vec![0.5];
    spec.schemes = vec![SchemeId::DroCvar, SchemeId::BfScaNominal];
    let out = run_experiment(Experiment::Sweep, &cfg, &spec, RunOptions::default()).unwrap();
    assert_eq!(out.table.sweeps(), vec!["kappa=2;rho=0.5".to_string(), "kappa=10;rho=0.5".to_string()]);
    for sweep in out.table.sweeps() {
        assert!(out.table.get(SchemeId::DroCvar, &sweep, Some(0), "p10").is_some());
        assert!(out.table.get(SchemeId::BfScaNominal, &sweep, Some(0), "p10").is_some());
    }
}

#[test]
fn unusable_scheme_selection_is_a_validation_error() {
    let (cfg, mut spec) = tiny();
    spec.schemes = vec![SchemeId::DeployGeoCenter];
    let err = run_experiment(Experiment::Robust, &cfg, &spec, RunOptions::default()).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn manifest_hash_tracks_the_configuration() {
    let (cfg, spec) = tiny();
    let h = config_hash(&cfg, &spec).unwrap();
    assert_eq!(h.len(), 64);
    assert_eq!(h, config_hash(&cfg, &spec).unwrap());
    let mut other = spec.clone();
    other.seed += 1;
    assert_ne!(h, config_hash(&cfg, &other).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let m = RunManifest::new("robust", &cfg, &spec, 1.5, Path::new("r.csv"), vec![]).unwrap();
    let p = dir.path().join("m.json");
    m.write(&p).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.config_sha256, h);
}

#[test]
fn selftest_passes_on_defaults() {
    let checks = run_selftest(&SystemConfig::default(), 42).unwrap();
    assert!(checks.len() >= 5);
    for c in checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}
