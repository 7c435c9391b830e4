mod common;

use chainhydro::pde::{cell_center, cosine_test_function, HydroModel, IntegrateOptions, StrainField};
use chainhydro::potentials::Potential;
use chainhydro::profiles::{TemperatureProfile, TensionSchedule};
use proptest::prelude::*;

fn cosine_model(cells: usize) -> HydroModel<f64> {
    HydroModel::new(Potential::HarmonicCosine, TemperatureProfile::default(), cells, 1.0, -1.0, 1.0).unwrap()
}

#[test]
fn harmonic_pairings_match_the_series() {
    let model = HydroModel::new(Potential::Harmonic, TemperatureProfile::default(), 200, 1.0, 0.0, 0.5).unwrap();
    let start = model.stationary_profile(0.0).unwrap();
    let traj = model.integrate(&start, &TensionSchedule::default(), 0.25, &IntegrateOptions::default()).unwrap();
    let m = model.cells();
    for k in 0..4 {
        let num: f64 = traj
            .final_field
            .r
            .iter()
            .enumerate()
            .map(|(j, r)| cosine_test_function(k, cell_center::<f64>(j, m)) * r / m as f64)
            .sum();
        let exact = common::heat_series_pairing(k, 0.25, 1.0, 0.0, 0.0, 0.5, 0.1);
        assert!((num - exact).abs() < 1e-5, "k={k}: {num} vs {exact}");
    }
}

#[test]
fn weak_residuals_shrink_quadratically() {
    let res = |m: usize| {
        let model = cosine_model(m);
        let start = model.stationary_profile(0.0).unwrap();
        let opts = IntegrateOptions {
            weak_tests: 4,
            ..Default::default()
        };
        let t = model.integrate(&start, &TensionSchedule::default(), 0.1, &opts).unwrap();
        t.weak_residuals.iter().map(|r| r.abs()).fold(0.0, f64::max)
    };
    let (a, b) = (res(50), res(100));
    let order = (a / b).log2();
    assert!(order > 1.7, "residuals {a:.3e} → {b:.3e}, order {order:.2}");
}

#[test]
fn free_energy_identity_holds_along_the_ramp() {
    let model = cosine_model(100);
    let start = model.stationary_profile(0.0).unwrap();
    let opts = IntegrateOptions {
        snapshot_times: vec![0.05, 0.1, 0.2],
        ..Default::default()
    };
    let traj = model.integrate(&start, &TensionSchedule::default(), 0.2, &opts).unwrap();
    for s in &traj.snapshots {
        assert!(s.ledger.identity_residual().abs() < 1e-8, "t={}: {}", s.t, s.ledger.identity_residual());
        assert!(s.ledger.dissipation >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stationary_profiles_are_fixed_points(tau in -0.6f64..0.6) {
        let model = cosine_model(40);
        let start = model.stationary_profile(tau).unwrap();
        let traj = model
            .integrate(&start, &TensionSchedule::Constant { tau }, 0.5, &IntegrateOptions::default())
            .unwrap();
        prop_assert!(traj.steps >= 1000);
        let drift = start.r.iter().zip(&traj.final_field.r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Round-off budget only: a few ulps per step.
        let scale = start.r.iter().fold(1.0f64, |m, r| m.max(r.abs()));
        let budget = 4.0 * f64::EPSILON * scale * traj.steps as f64;
        prop_assert!(drift <= budget, "drift {drift:e} over {} steps", traj.steps);
    }

    #[test]
    fn ordered_data_stay_ordered(a in prop::collection::vec(-0.4f64..0.4, 4), shift in 0.0f64..0.2) {
        let model = cosine_model(32);
        let lo = model.field_from_tension(|x: f64| a.iter().enumerate().map(|(k, c)| c * ((k as f64 + 0.5) * std::f64::consts::PI * x).cos()).sum::<f64>() * 0.5).unwrap();
        let hi = StrainField { r: lo.r.iter().map(|r| r + shift).collect(), t: 0.0 };
        let sched = TensionSchedule::default();
        let x = model.integrate(&lo, &sched, 0.02, &IntegrateOptions::default()).unwrap().final_field;
        let y = model.integrate(&hi, &sched, 0.02, &IntegrateOptions::default()).unwrap().final_field;
        for (p, q) in x.r.iter().zip(&y.r) {
            prop_assert!(*p <= *q + 1e-10);
        }
    }

    #[test]
    fn antiderivative_distance_never_grows(a in prop::collection::vec(-0.4f64..0.4, 3), b in prop::collection::vec(-0.4f64..0.4, 3)) {
        let model = cosine_model(40);
        let field = |c: Vec<f64>| model.field_from_tension(move |x: f64| c[0] + c[1] * (std::f64::consts::PI * x).cos() + c[2] * x).unwrap();
        let series = model.contraction_check(&field(a), &field(b), &TensionSchedule::default(), 0.05, 0.4).unwrap();
        for w in series.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * series[0]);
        }
    }
}
