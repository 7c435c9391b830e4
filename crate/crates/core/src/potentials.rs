//! Nearest-neighbour interaction potentials `V(r)`.
//!
//! Every shipped family is nonnegative, smooth, has bounded curvature and
//! grows superlinearly. Those properties are certified empirically on a grid
//! by [`check_admissible`] rather than proved symbolically.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential<T> {
    /// `r²/2`
    Harmonic,
    /// `r²/2 + cos r − 1`
    HarmonicCosine,
    /// `(1 + r²)^{α/2} − 1`, admissible for `α ∈ (1, 2]`.
    PowerAlpha { alpha: T },
}

/// Declared growth constants: `|V'| ≤ c0 + c2|r|`, `V'² ≤ c1(1 + V)`, `|V''| ≤ c2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> Potential<T> {
    pub fn power_alpha(alpha: T) -> Result<Self> {
        if !(alpha > T::one() && alpha <= c(2.0)) {
            return Err(Error::Domain(format!(
                "power-alpha exponent {alpha} outside (1, 2]"
            )));
        }
        Ok(Self::PowerAlpha { alpha })
    }

    /// Looks a family up by its config name.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match name {
            "harmonic" => Ok(Self::Harmonic),
            "harmonic-cosine" => Ok(Self::HarmonicCosine),
            "power-alpha" => {
                let alpha = params.get("alpha").copied().ok_or_else(|| {
                    Error::Config("power-alpha needs parameter `alpha`".into())
                })?;
                Self::power_alpha(T::lit(alpha))
            }
            other => Err(Error::Config(format!("unknown potential `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Harmonic => "harmonic",
            Self::HarmonicCosine => "harmonic-cosine",
            Self::PowerAlpha { .. } => "power-alpha",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn constants(&self) -> GrowthConstants<T> {
        match *self {
            Self::Harmonic => GrowthConstants {
                c0: T::zero(),
                c1: c(2.0),
                c2: T::one(),
            },
            // sup (r − sin r)² / (1 + V) ≈ 3.09
            Self::HarmonicCosine => GrowthConstants {
                c0: T::one(),
                c1: c(3.2),
                c2: c(2.0),
            },
            Self::PowerAlpha { alpha } => GrowthConstants {
                c0: T::zero(),
                c1: alpha * alpha,
                c2: alpha,
            },
        }
    }

    #[inline]
    pub fn energy(&self, r: T) -> T {
        match *self {
            Self::Harmonic => r * r * c(0.5),
            Self::HarmonicCosine => {
                // r²/2 + cos r − 1 = r²/2 − 2 sin²(r/2), stable near 0
                let s = (r * c(0.5)).sin();
                r * r * c(0.5) - s * s * c(2.0)
            }
            Self::PowerAlpha { alpha } => {
                // (1 + r²)^{α/2} − 1 = expm1(α/2 · ln1p(r²))
                (alpha * c(0.5) * (r * r).ln_1p()).exp_m1()
            }
        }
    }

    #[inline]
    pub fn derivative(&self, r: T) -> T {
        match *self {
            Self::Harmonic => r,
            Self::HarmonicCosine => r - r.sin(),
            Self::PowerAlpha { alpha } => {
                alpha * r * (T::one() + r * r).powf(alpha * c(0.5) - T::one())
            }
        }
    }

    #[inline]
    pub fn curvature(&self, r: T) -> T {
        match *self {
            Self::Harmonic => T::one(),
            Self::HarmonicCosine => {
                let s = (r * c(0.5)).sin();
                s * s * c(2.0)
            }
            Self::PowerAlpha { alpha } => {
                let q = T::one() + r * r;
                alpha * q.powf(alpha * c(0.5) - c(2.0)) * (T::one() + (alpha - T::one()) * r * r)
            }
        }
    }

    /// Discrete gradient `(V(b) − V(a)) / (b − a)`, evaluated without
    /// cancellation and equal to `V'(a)` when `a == b`.
    #[inline]
    pub fn secant(&self, a: T, b: T) -> T {
        let d = b - a;
        if d == T::zero() {
            return self.derivative(a);
        }
        let m = (a + b) * c(0.5);
        match *self {
            Self::Harmonic => m,
            Self::HarmonicCosine => {
                // (cos b − cos a)/d = −sin(m)·sin(d/2)/(d/2)
                let h = d * c(0.5);
                m - m.sin() * sinc(h)
            }
            Self::PowerAlpha { alpha } => {
                // V(b) − V(a) = qa^{α/2} · expm1(α/2 · ln1p((b² − a²)/qa))
                let qa = T::one() + a * a;
                let p = alpha * c(0.5);
                qa.powf(p) * (p * (d * (a + b) / qa).ln_1p()).exp_m1() / d
            }
        }
    }
}

#[inline]
fn sinc<T: Real>(x: T) -> T {
    // Taylor series up to x¹²; remainder below 1e-20 on |x| < 1/4.
    if x.abs() < c(0.25) {
        let x2 = x * x;
        let one = T::one();
        let mut acc = x2 * c(1.0 / 156.0);
        acc = (one - acc) * x2 * c(1.0 / 110.0);
        acc = (one - acc) * x2 * c(1.0 / 72.0);
        acc = (one - acc) * x2 * c(1.0 / 42.0);
        acc = (one - acc) * x2 * c(1.0 / 20.0);
        acc = (one - acc) * x2 * c(1.0 / 6.0);
        one - acc
    } else {
        x.sin() / x
    }
}

fn finite<T: Real>(r: T) -> Result<T> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::Domain(format!("non-finite stretch {r}")))
    }
}

pub fn v<T: Real>(pot: &Potential<T>, r: T) -> Result<T> {
    Ok(pot.energy(finite(r)?))
}

pub fn dv<T: Real>(pot: &Potential<T>, r: T) -> Result<T> {
    Ok(pot.derivative(finite(r)?))
}

pub fn d2v<T: Real>(pot: &Potential<T>, r: T) -> Result<T> {
    Ok(pot.curvature(finite(r)?))
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport<T> {
    pub declared: GrowthConstants<T>,
    /// Tightest `c1` seen on the grid.
    pub c1_hat: T,
    /// Tightest `c2` seen on the grid.
    pub c2_hat: T,
    pub min_energy: T,
    pub growth_ratios: Vec<(T, T)>,
    pub nonnegative: bool,
    pub superlinear: bool,
    pub c1_ok: bool,
    pub c2_ok: bool,
}

impl<T> AdmissibilityReport<T> {
    pub fn passed(&self) -> bool {
        self.nonnegative && self.superlinear && self.c1_ok && self.c2_ok
    }
}

/// Symmetric grid on `[−10⁴, 10⁴]`: uniform spacing 10⁻² on `[−20, 20]`
/// plus geometric spacing beyond.
pub fn default_grid<T: Real>() -> Vec<T> {
    let mut pos: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
    let mut x = 20.0f64;
    while x < 1e4 {
        x *= 1.01;
        pos.push(x.min(1e4));
    }
    for m in [10.0, 100.0, 1000.0, 10000.0] {
        pos.push(m);
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pos.dedup();
    let mut grid: Vec<T> = pos.iter().rev().filter(|v| **v > 0.0).map(|v| T::lit(-v)).collect();
    grid.extend(pos.iter().map(|v| T::lit(*v)));
    grid
}

pub fn check_admissible<T: Real>(pot: &Potential<T>, grid: &[T]) -> AdmissibilityReport<T> {
    let declared = pot.constants();
    let mut c1_hat = T::zero();
    let mut c2_hat = T::zero();
    let mut min_energy = T::infinity();
    let mut all_finite = true;
    for &r in grid {
        let v = pot.energy(r);
        let d = pot.derivative(r);
        let d2 = pot.curvature(r);
        if !(v.is_finite() && d.is_finite() && d2.is_finite()) {
            all_finite = false;
            continue;
        }
        min_energy = min_energy.min(v);
        c1_hat = c1_hat.max(d * d / (T::one() + v));
        c2_hat = c2_hat.max(d2.abs());
    }
    let growth_ratios: Vec<(T, T)> = [10.0, 1e2, 1e3, 1e4]
        .iter()
        .map(|&m| {
            let r = T::lit(m);
            let ratio = pot.energy(r).min(pot.energy(-r)) / r;
            (r, ratio)
        })
        .collect();
    let superlinear = growth_ratios.windows(2).all(|w| w[1].1 > w[0].1);
    let slack = T::one() + c(1e-9);
    AdmissibilityReport {
        declared,
        c1_hat,
        c2_hat,
        min_energy,
        growth_ratios,
        nonnegative: all_finite && min_energy >= T::zero(),
        superlinear,
        c1_ok: all_finite && c1_hat <= declared.c1 * slack,
        c2_ok: all_finite && c2_hat <= declared.c2 * slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn families() -> Vec<Potential<f64>> {
        vec![
            Potential::Harmonic,
            Potential::HarmonicCosine,
            Potential::power_alpha(1.5).unwrap(),
            Potential::power_alpha(1.1).unwrap(),
            Potential::power_alpha(2.0).unwrap(),
        ]
    }

    #[test]
    fn values_at_origin() {
        let h = Potential::<f64>::Harmonic;
        assert_eq!((h.energy(0.0), h.derivative(0.0), h.curvature(0.0)), (0.0, 0.0, 1.0));
        let hc = Potential::<f64>::HarmonicCosine;
        assert_eq!((hc.energy(0.0), hc.derivative(0.0), hc.curvature(0.0)), (0.0, 0.0, 0.0));
        let pa = Potential::<f64>::power_alpha(1.5).unwrap();
        assert_eq!(pa.energy(0.0), 0.0);
        assert_eq!(pa.derivative(0.0), 0.0);
        assert!((pa.curvature(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_is_domain_error() {
        let h = Potential::<f64>::Harmonic;
        assert!(matches!(v(&h, f64::NAN), Err(Error::Domain(_))));
        assert!(dv(&h, f64::INFINITY).is_err());
        assert!(d2v(&h, f64::NEG_INFINITY).is_err());
        assert_eq!(dv(&h, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn shipped_families_are_admissible() {
        let grid = default_grid::<f64>();
        assert!(grid[0] <= -1e4 && *grid.last().unwrap() >= 1e4);
        for pot in families() {
            let rep = check_admissible(&pot, &grid);
            assert!(rep.passed(), "{} failed: {rep:?}", pot.name());
        }
        let h = check_admissible(&Potential::<f64>::Harmonic, &grid);
        assert!((h.c2_hat - 1.0).abs() < 1e-15);
        let hc = check_admissible(&Potential::<f64>::HarmonicCosine, &grid);
        assert!(hc.c2_hat <= 2.0);
    }

    #[test]
    fn steep_power_law_is_rejected() {
        let pot = Potential::PowerAlpha { alpha: 2.5f64 };
        let rep = check_admissible(&pot, &default_grid());
        assert!(!rep.c2_ok);
        assert!(!rep.passed());
        assert!(Potential::power_alpha(2.5f64).is_err());
        assert!(Potential::power_alpha(1.0f64).is_err());
    }

    #[test]
    fn config_lookup() {
        let mut params = BTreeMap::new();
        params.insert("alpha".to_string(), 1.5);
        assert_eq!(
            Potential::<f64>::from_name("power-alpha", &params).unwrap(),
            Potential::PowerAlpha { alpha: 1.5 }
        );
        assert!(Potential::<f64>::from_name("power-alpha", &BTreeMap::new()).is_err());
        assert!(Potential::<f64>::from_name("fpu", &BTreeMap::new()).is_err());
    }

    #[test]
    fn secant_matches_divided_difference() {
        for pot in families() {
            for &(a, b) in &[(0.3, 0.7), (-2.0, 5.0), (1.0, 1.0 + 1e-9), (4.0, 4.0), (-1e-8, 1e-8)] {
                let s = pot.secant(a, b);
                let expect = if a == b {
                    pot.derivative(a)
                } else if (b - a).abs() > 1e-3 {
                    (pot.energy(b) - pot.energy(a)) / (b - a)
                } else {
                    pot.derivative(0.5 * (a + b))
                };
                assert!((s - expect).abs() < 1e-9 * (1.0 + expect.abs()), "{} {a} {b}: {s} vs {expect}", pot.name());
            }
        }
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(r in -50.0f64..50.0, which in 0usize..3) {
            let pot = families()[which];
            let h = 1e-5;
            let fd1 = (pot.energy(r + h) - pot.energy(r - h)) / (2.0 * h);
            let d1 = pot.derivative(r);
            prop_assert!((d1 - fd1).abs() <= 1e-6 * (1.0 + d1.abs()));
            let fd2 = (pot.derivative(r + h) - pot.derivative(r - h)) / (2.0 * h);
            let d2 = pot.curvature(r);
            prop_assert!((d2 - fd2).abs() <= 1e-6 * (1.0 + d2.abs()));
        }

        #[test]
        fn secant_is_exact_energy_increment(a in -30.0f64..30.0, d in -2.0f64..2.0, which in 0usize..3) {
            let pot = families()[which];
            let b = a + d;
            let lhs = pot.secant(a, b) * (b - a);
            let rhs = pot.energy(b) - pot.energy(a);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + pot.energy(a).abs() + pot.energy(b).abs()));
        }
    }
}
