use chainhydro::gibbs::GibbsSolver;
use chainhydro::microsim::*;
use chainhydro::potentials::Potential;
use chainhydro::profiles::{TemperatureProfile, TensionSchedule};

fn constant(n: usize, pot: Potential<f64>, temperature: f64, tau: f64) -> ChainSetup<f64> {
    ChainSetup::new(n, pot, TemperatureProfile::Constant { temperature }, TensionSchedule::Constant { tau })
}

fn window_plan(setup: ChainSetup<f64>, tau0: f64, warm: f64, horizon: f64, replicas: usize) -> SimulationPlan<f64> {
    let n = setup.n;
    let mut plan = SimulationPlan::new(setup, horizon);
    plan.initial = InitialLaw::UniformTension(tau0);
    plan.local_points = (1..=n).map(|i| i as f64 / n as f64).collect();
    plan.windows = vec![Window { start: warm, end: horizon }];
    plan.replicas = replicas;
    plan.seed = 2024;
    plan
}

#[test]
fn single_site_thermalizes_to_bath_temperature() {
    let plan = window_plan(constant(1, Potential::Harmonic, 0.7, 0.0), 0.0, 5.0, 100.0, 32);
    let rep = simulate(&plan).unwrap();
    let kinetic = rep.window_averages[0][1][0];
    assert!(kinetic.within(0.7, 3.0), "{kinetic:?}");
}

#[test]
fn single_site_tension_matches_boundary_force() {
    let plan = window_plan(constant(1, Potential::Harmonic, 1.0, 0.5), 0.0, 5.0, 100.0, 32);
    let rep = simulate(&plan).unwrap();
    let tension = rep.window_averages[0][0][0];
    assert!(tension.within(0.5, 3.0), "{tension:?}");
    assert!((tension.mean - 0.5).abs() < 0.05);
}

#[test]
fn stationary_tension_is_flat_under_temperature_gradient() {
    let mut setup = constant(16, Potential::HarmonicCosine, 1.0, 0.3);
    setup.profile = TemperatureProfile::default();
    let plan = window_plan(setup, 0.3, 0.2, 2.0, 24);
    let rep = simulate(&plan).unwrap();
    for (j, m) in rep.window_averages[0][0].iter().enumerate() {
        assert!(m.within(0.3, 3.0), "site {}: {m:?}", j + 1);
    }
    let betas: Vec<f64> = plan.setup.site_betas();
    for (j, m) in rep.window_averages[0][1].iter().enumerate() {
        assert!(m.within(1.0 / betas[j], 3.0), "site {}: {m:?}", j + 1);
    }
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn fixed_site_law_matches_direct_gibbs_samples() {
    let (n, replicas) = (8, 400);
    let setup = constant(n, Potential::HarmonicCosine, 0.8, 0.4);
    // Start away from the target tension and let the chain relax.
    let mut plan = SimulationPlan::new(setup.clone(), 4.0);
    plan.initial = InitialLaw::UniformTension(0.2);
    plan.local_points = vec![0.5];
    plan.replicas = replicas;
    plan.seed = 99;
    let rep = simulate(&plan).unwrap();
    let sim_len: Vec<f64> = rep.records.iter().map(|r| r.snapshots[0].length).collect();
    let sim_tension: Vec<f64> = rep.records.iter().map(|r| r.snapshots[0].local[0][0]).collect();
    let sim_kinetic: Vec<f64> = rep.records.iter().map(|r| r.snapshots[0].local[1][0]).collect();

    let sampler = LocalGibbsSampler::new(&setup.potential, &vec![0.4; n], &setup.site_betas()).unwrap();
    let mut rng = replica_rng(12345, 0);
    let direct: Vec<ChainState<f64>> = (0..replicas).map(|_| sampler.sample(&setup.potential, &mut rng).unwrap()).collect();
    let i = plan.local_sites()[0] - 1;
    let dir_tension: Vec<f64> = direct.iter().map(|s| setup.potential.derivative(s.r[i])).collect();
    let dir_kinetic: Vec<f64> = direct.iter().map(|s| s.p[i] * s.p[i]).collect();
    let m = replicas as f64;
    let critical = 1.628 * ((m + m) / (m * m)).sqrt();
    let d_r = ks_statistic(sim_tension, dir_tension);
    let d_p = ks_statistic(sim_kinetic, dir_kinetic);
    assert!(d_r < critical, "stretch KS {d_r} ≥ {critical}");
    assert!(d_p < critical, "velocity KS {d_p} ≥ {critical}");

    // Sanity: the simulated chain length matches n·𝔯(τ, β).
    let mean_r = GibbsSolver::new(setup.potential).mean_stretch(0.4, 1.25).unwrap();
    let len = MeanSe::from_samples(&sim_len);
    assert!(len.within(n as f64 * mean_r, 3.0), "{len:?} vs {}", n as f64 * mean_r);
}

fn standard(n: usize, pot: Potential<f64>) -> ChainSetup<f64> {
    ChainSetup::new(n, pot, TemperatureProfile::default(), TensionSchedule::default())
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let mut plan = SimulationPlan::new(standard(12, Potential::HarmonicCosine), 0.05);
    plan.snapshot_times = vec![0.02, 0.05];
    plan.block_points = vec![0.5];
    plan.block_eps = 0.1;
    plan.local_points = vec![0.25, 0.75];
    plan.windows = vec![Window { start: 0.01, end: 0.03 }];
    plan.replicas = 6;
    plan.seed = 7;
    let a = simulate(&plan).unwrap();
    let b = simulate(&plan).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.snapshots, b.snapshots);
    plan.seed = 8;
    let c = simulate(&plan).unwrap();
    assert_ne!(a.snapshots, c.snapshots);
    assert_eq!(a.snapshots.len(), 2);
    assert!(a.blown.is_empty());
}

#[test]
fn energy_ledger_closes_on_every_path() {
    for pot in [Potential::Harmonic, Potential::HarmonicCosine, Potential::power_alpha(1.5).unwrap()] {
        let mut plan = SimulationPlan::new(standard(32, pot), 0.25);
        plan.replicas = 4;
        plan.seed = 1;
        let rep = simulate(&plan).unwrap();
        assert!(rep.max_ledger_violation <= 1e-8, "{}: {}", pot.name(), rep.max_ledger_violation);
        let s = &rep.snapshots[0];
        assert!(s.work.mean > 0.0);
    }
}

#[test]
fn halving_the_step_leaves_pairings_unchanged_within_noise() {
    let run = |c_delta: f64| {
        let mut setup = standard(16, Potential::HarmonicCosine);
        setup.c_delta = c_delta;
        let mut plan = SimulationPlan::new(setup, 0.1);
        plan.replicas = 200;
        plan.seed = 31;
        simulate(&plan).unwrap()
    };
    let coarse = run(0.1);
    let fine = run(0.05);
    for k in 0..4 {
        let (a, b) = (coarse.snapshots[0].pairings[k], fine.snapshots[0].pairings[k]);
        let se = (a.se * a.se + b.se * b.se).sqrt();
        assert!((a.mean - b.mean).abs() <= 3.0 * se, "k={k}: {a:?} vs {b:?}");
    }
}

#[test]
fn work_estimate_is_reproducible_across_seeds() {
    let run = |seed| {
        let mut plan = SimulationPlan::new(standard(16, Potential::Harmonic), 0.25);
        plan.replicas = 100;
        plan.seed = seed;
        simulate(&plan).unwrap().snapshots[0].work
    };
    let (a, b) = (run(1), run(2));
    let se = (a.se * a.se + b.se * b.se).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} vs {b:?}");
}
