use std::process::Command;

fn chainhydro() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chainhydro"))
}

#[test]
fn gibbs_table_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = chainhydro()
            .args(["--out", out.to_str().unwrap(), "--set", "gibbs_table.knots=9", "gibbs-table"])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("gibbs-table").join("gibbs_table.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("beta,tau,gibbs_potential"));
    assert_eq!(text.lines().count(), 1 + 5 * 9);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 7\n[model]\npotential = \"harmonic-cosine\"\n").unwrap();
    let out = chainhydro()
        .args(["--config", cfg.to_str().unwrap(), "--seed", "9", "--print-config", "pde"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 9"));
    assert!(text.contains("harmonic-cosine"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let out = chainhydro().args(["--set", "pde.cfl=2.0", "pde"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = chainhydro().args(["--config", "/nonexistent.toml", "pde"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.toml"));
}
