use chainhydro::harness::*;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.simulate.n = 8;
    cfg.simulate.replicas = 4;
    cfg.simulate.horizon = 0.05;
    cfg.simulate.snapshot_times = vec![0.025, 0.05];
    cfg.simulate.windows = vec![[0.025, 0.05]];
    cfg
}

fn read_dir(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn rerun_gives_byte_identical_files() {
    let cfg = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let (_, out) = simulate_experiment(&cfg).unwrap();
        emit(&out, &cfg, d).unwrap();
    }
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert_eq!(fa, fb);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for required in ["summary.json", "manifest.json", "config.toml", "pairings.csv", "ledger.csv"] {
        assert!(names.contains(&required), "{names:?}");
    }
}

#[test]
fn manifest_records_hash_seed_and_versions() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let out = gibbs_table(&cfg).unwrap();
    emit(&out, &cfg, dir.path()).unwrap();
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], cfg.hash());
    assert_eq!(m["seed"], cfg.seed);
    assert!(m["versions"].as_object().unwrap().len() >= 6);
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(s["verdicts"].as_object().unwrap().values().all(|v| v.is_boolean()));
}

#[test]
fn seed_changes_results_but_not_shape() {
    let mut cfg = small();
    let (a, _) = simulate_experiment(&cfg).unwrap();
    cfg.seed += 1;
    let (b, _) = simulate_experiment(&cfg).unwrap();
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    assert_ne!(a.snapshots[0].pairings[0].mean, b.snapshots[0].pairings[0].mean);
}

#[test]
fn hash_follows_parameters() {
    let a = small();
    let mut b = small();
    b.hydro.cells += 1;
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash(), small().hash());
}

#[test]
fn config_file_round_trips() {
    let cfg = small();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg.hash(), back.hash());
}
