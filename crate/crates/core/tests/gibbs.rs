use chainhydro::gibbs::GibbsSolver;
use chainhydro::potentials::Potential;
use proptest::prelude::*;

fn families() -> [Potential<f64>; 3] {
    [Potential::Harmonic, Potential::HarmonicCosine, Potential::power_alpha(1.5).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stretch_is_strictly_increasing_in_tension(fam in 0usize..3, tau in -1.5f64..1.5, dtau in 1e-3f64..0.5, beta in 0.5f64..2.0) {
        let s = GibbsSolver::new(families()[fam]);
        let a = s.mean_stretch(tau, beta).unwrap();
        let b = s.mean_stretch(tau + dtau, beta).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn inversion_round_trips(fam in 0usize..3, tau in -1.0f64..1.0, beta in 0.5f64..2.0) {
        let s = GibbsSolver::new(families()[fam]);
        let r = s.mean_stretch(tau, beta).unwrap();
        prop_assert!((s.tension(r, beta).unwrap() - tau).abs() <= 1e-8);
    }

    #[test]
    fn free_energy_derivative_is_the_tension(fam in 0usize..3, tau in -1.0f64..1.0, beta in 0.5f64..2.0) {
        let s = GibbsSolver::new(families()[fam]);
        let r = s.mean_stretch(tau, beta).unwrap();
        let h = 1e-4;
        let fd = (s.free_energy(r + h, beta).unwrap() - s.free_energy(r - h, beta).unwrap()) / (2.0 * h);
        prop_assert!((fd - tau).abs() <= 1e-5 * (1.0 + tau.abs()), "{fd} vs {tau}");
    }

    #[test]
    fn harmonic_closed_forms(tau in -2.0f64..2.0, beta in 0.25f64..4.0) {
        let s = GibbsSolver::new(Potential::<f64>::Harmonic);
        let m = s.moments(tau, beta).unwrap();
        // G(τ, β) = log(2π/β) + βτ²/2
        let g = (2.0 * std::f64::consts::PI / beta).ln() + beta * tau * tau / 2.0;
        prop_assert!((m.gibbs_potential() - g).abs() <= 1e-9);
        prop_assert!((m.mean_r - tau).abs() <= 1e-9);
        prop_assert!((m.var_r - 1.0 / beta).abs() <= 1e-9);
        prop_assert!((m.mean_energy() - (1.0 / beta + tau * tau / 2.0)).abs() <= 1e-9);
    }
}

#[test]
fn entropy_is_temperature_derivative_of_free_energy() {
    // ∂_T F = −S at fixed r, i.e. S = β²∂_βF.
    let s = GibbsSolver::new(Potential::<f64>::HarmonicCosine);
    for &(r, beta) in &[(0.0, 1.0), (0.4, 0.7), (-0.3, 1.6)] {
        let h = 1e-4;
        let dfdb = (s.free_energy(r, beta + h).unwrap() - s.free_energy(r, beta - h).unwrap()) / (2.0 * h);
        let ent = s.entropy(r, beta).unwrap();
        assert!((ent - beta * beta * dfdb).abs() < 1e-6, "{ent} vs {}", beta * beta * dfdb);
    }
}
