use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chainhydro::harness::{self, ExperimentConfig, Outcome};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainhydro", version, about = "Thermostatted chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (a subdirectory per experiment is created).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Interaction potential: harmonic, harmonic-cosine, power-alpha.
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Override any config value, e.g. `--set hydro.replicas=50`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Gibbs potential, stretch, free energy and entropy on a (τ, β) grid.
    GibbsTable,
    /// Microscopic chain: pairings, block averages, local observables, ledger.
    Simulate,
    /// Hydrodynamic equation with free-energy ledger and Clausius report.
    Pde,
    /// Transition between steady states, microscopic vs macroscopic work.
    Ness,
    /// ε-rescaled transformations and the Clausius equality.
    Quasistatic,
    /// L² contraction of antiderivatives for random pairs of initial data.
    Contraction,
    /// Entropy and Fisher-information bounds on the Gaussian chain.
    HypocoScan,
    /// Convergence of empirical pairings to the PDE as n grows.
    HydroCompare,
    /// Local-equilibrium averages against the PDE and the bath temperature.
    LocalEq,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::GibbsTable => "gibbs-table",
            Self::Simulate => "simulate",
            Self::Pde => "pde",
            Self::Ness => "ness",
            Self::Quasistatic => "quasistatic",
            Self::Contraction => "contraction",
            Self::HypocoScan => "hypoco-scan",
            Self::HydroCompare => "hydro-compare",
            Self::LocalEq => "local-eq",
        }
    }
}

/// Applies `a.b.c=value` to the serialized config. Values are parsed as
/// TOML and fall back to plain strings.
fn apply_set(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("`--set {assignment}` is not KEY=VALUE"))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().context("empty key")?;
    let mut table = doc;
    for p in parts {
        table = table
            .entry(p)
            .or_insert_with(|| toml::Value::Table(Default::default()))
            .as_table_mut()
            .with_context(|| format!("`{p}` in `{key}` is not a section"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn effective_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(p) = &c.potential {
        cfg.model.potential = p.clone();
    }
    if !c.sets.is_empty() {
        let mut doc: toml::Table = toml::from_str(&cfg.to_toml())?;
        for s in &c.sets {
            apply_set(&mut doc, s)?;
        }
        cfg = ExperimentConfig::from_toml(&toml::to_string(&doc)?)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    Ok(match command {
        Command::GibbsTable => harness::gibbs_table(cfg)?,
        Command::Simulate => harness::simulate_experiment(cfg)?.1,
        Command::Pde => harness::pde_experiment(cfg)?.outcome(),
        Command::Ness => harness::ness_transition(cfg)?.outcome(),
        Command::Quasistatic => harness::quasistatic_suite(cfg)?.outcome(),
        Command::Contraction => harness::contraction_experiment(cfg)?.outcome(),
        Command::HypocoScan => harness::hypoco_experiment(cfg)?.outcome(),
        Command::HydroCompare => harness::hydro_compare(cfg)?.outcome(),
        Command::LocalEq => harness::local_equilibrium_check(cfg)?.outcome(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let cfg = effective_config(&cli.common)?;
    if cli.common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(true);
    }
    let name = cli.command.name();
    let outcome = run(cli.command, &cfg)?;
    let dir = cfg.output_dir.join(name);
    let files = harness::emit(&outcome, &cfg, &dir)?;
    for (k, v) in &outcome.verdicts {
        println!("{:<4} {k}", if *v { "ok" } else { "FAIL" });
    }
    for n in &outcome.notes {
        println!("note {n}");
    }
    if files.is_empty() {
        bail!("nothing written to {}", dir.display());
    }
    println!("{name}: {} ({} files in {})", if outcome.passed { "PASS" } else { "FAIL" }, files.len(), dir.display());
    Ok(outcome.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_overrides_nested_values() {
        let mut doc: toml::Table = toml::from_str(&ExperimentConfig::default().to_toml()).unwrap();
        apply_set(&mut doc, "hydro.replicas=7").unwrap();
        apply_set(&mut doc, "model.potential=harmonic-cosine").unwrap();
        apply_set(&mut doc, "hydro.n_list=[8, 16]").unwrap();
        let cfg = ExperimentConfig::from_toml(&toml::to_string(&doc).unwrap()).unwrap();
        assert_eq!(cfg.hydro.replicas, 7);
        assert_eq!(cfg.hydro.n_list, vec![8, 16]);
        assert_eq!(cfg.model.potential, "harmonic-cosine");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut doc: toml::Table = toml::from_str(&ExperimentConfig::default().to_toml()).unwrap();
        apply_set(&mut doc, "hydro.replica=7").unwrap();
        assert!(ExperimentConfig::from_toml(&toml::to_string(&doc).unwrap()).is_err());
    }

    #[test]
    fn malformed_assignment() {
        let mut doc = toml::Table::new();
        assert!(apply_set(&mut doc, "novalue").is_err());
    }

    #[test]
    fn subcommand_names_parse() {
        for name in [
            "gibbs-table",
            "simulate",
            "pde",
            "ness",
            "quasistatic",
            "contraction",
            "hypoco-scan",
            "hydro-compare",
            "local-eq",
        ] {
            let cli = Cli::try_parse_from(["chainhydro", name]).unwrap();
            assert_eq!(cli.command.name(), name);
        }
    }
}
