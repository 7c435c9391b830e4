//! Experiment orchestration: configuration, the experiments that turn the
//! limit theorems into convergence studies, and CSV/JSON emission.

mod config;
mod experiments;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::*;
pub use experiments::*;

use crate::error::{Error, Result};

/// One CSV file worth of results.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |e: csv::Error| Error::Config(format!("csv {}: {e}", self.name));
        w.write_record(&self.header).map_err(wrap)?;
        for r in &self.rows {
            w.write_record(r).map_err(wrap)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv {}: {e}", self.name)))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Result of one experiment: named boolean verdicts, metrics and tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub passed: bool,
    pub verdicts: BTreeMap<String, bool>,
    pub metrics: serde_json::Value,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn new(experiment: &str, verdicts: BTreeMap<String, bool>, metrics: serde_json::Value, tables: Vec<Table>) -> Self {
        Self {
            experiment: experiment.into(),
            passed: verdicts.values().all(|&v| v),
            verdicts,
            metrics,
            notes: Vec::new(),
            tables,
        }
    }

    pub fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes = notes;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub files: Vec<String>,
}

pub fn versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION").to_string();
    ["chainhydro", "potentials", "gibbs", "microsim", "pde", "hypoco", "harness"]
        .iter()
        .map(|m| (m.to_string(), v.clone()))
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `<table>.csv`, `summary.json`, `config.toml` and `manifest.json`
/// into `dir`. Output is a pure function of the outcome and configuration.
pub fn emit(outcome: &Outcome, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    for t in &outcome.tables {
        let p = dir.join(format!("{}.csv", t.name));
        write(&p, &t.to_csv()?)?;
        files.push(p);
    }
    let summary = dir.join("summary.json");
    write(&summary, &(serde_json::to_string_pretty(outcome).expect("outcome serializes") + "\n"))?;
    files.push(summary);
    let config = dir.join("config.toml");
    write(&config, &cfg.to_toml())?;
    files.push(config);
    let manifest = Manifest {
        experiment: outcome.experiment.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        versions: versions(),
        files: files
            .iter()
            .map(|p| p.file_name().expect("file").to_string_lossy().into_owned())
            .collect(),
    };
    let mp = dir.join("manifest.json");
    write(&mp, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    files.push(mp);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_csv() {
        let mut t = Table::new("demo", &["t", "value"]);
        t.push([0.5, 1.25]);
        t.push(["x".to_string(), "y,z".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "t,value\n0.5,1.25\nx,\"y,z\"\n");
    }

    #[test]
    fn emission_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let mut t = Table::new("numbers", &["a"]);
        t.push([1.0]);
        let o = Outcome::new("demo", BTreeMap::from([("ok".into(), true)]), serde_json::json!({"x": 1}), vec![t]);
        let files = emit(&o, &cfg, dir.path()).unwrap();
        let first: Vec<String> = files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect();
        emit(&o, &cfg, dir.path()).unwrap();
        let second: Vec<String> = files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect();
        assert_eq!(first, second);
        let manifest: serde_json::Value = serde_json::from_str(&second[3]).unwrap();
        assert_eq!(manifest["config_hash"], cfg.hash());
        assert_eq!(manifest["seed"], cfg.seed);
        let summary: serde_json::Value = serde_json::from_str(&second[1]).unwrap();
        assert_eq!(summary["verdicts"]["ok"], true);
    }
}
