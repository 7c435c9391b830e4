//! Macroscopic temperature profiles `β(x)` and boundary tension schedules `τ̄(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Inverse temperature profile on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TemperatureProfile {
    /// `T(x) = temperature`
    Constant { temperature: f64 },
    /// `T(x) = t0 + (t1 − t0)x`
    LinearInT { t0: f64, t1: f64 },
    /// `β(x) = b0 + (b1 − b0)x`
    LinearInBeta { b0: f64, b1: f64 },
}

impl Default for TemperatureProfile {
    /// `T(x) = 1 + x/2`.
    fn default() -> Self {
        Self::LinearInT { t0: 1.0, t1: 1.5 }
    }
}

impl TemperatureProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { temperature } => temperature > 0.0 && temperature.is_finite(),
            Self::LinearInT { t0, t1 } => t0 > 0.0 && t1 > 0.0 && t0.is_finite() && t1.is_finite(),
            Self::LinearInBeta { b0, b1 } => b0 > 0.0 && b1 > 0.0 && b0.is_finite() && b1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("temperature profile {self:?} not strictly positive")))
        }
    }

    #[inline]
    pub fn beta<T: Real>(&self, x: T) -> T {
        match *self {
            Self::Constant { temperature } => T::lit(temperature).recip(),
            Self::LinearInT { t0, t1 } => (T::lit(t0) + T::lit(t1 - t0) * x).recip(),
            Self::LinearInBeta { b0, b1 } => T::lit(b0) + T::lit(b1 - b0) * x,
        }
    }

    #[inline]
    pub fn temperature<T: Real>(&self, x: T) -> T {
        self.beta(x).recip()
    }

    /// Lower bound `β₋` of the profile on `[0, 1]` (profiles are monotone).
    pub fn beta_min<T: Real>(&self) -> T {
        self.beta::<T>(T::zero()).min(self.beta(T::one()))
    }

    pub fn beta_max<T: Real>(&self) -> T {
        self.beta::<T>(T::zero()).max(self.beta(T::one()))
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Self::Constant { .. } => true,
            Self::LinearInT { t0, t1 } => t0 == t1,
            Self::LinearInBeta { b0, b1 } => b0 == b1,
        }
    }

    /// Site values `β_i = β(i/n)`, `i = 1..=n`.
    pub fn sites<T: Real>(&self, n: usize) -> Vec<T> {
        let nf = T::from_usize_lossy(n);
        (1..=n).map(|i| self.beta(T::from_usize_lossy(i) / nf)).collect()
    }

    /// Smoothness proxy `max_i n|β_{i+1} − β_i|`.
    pub fn lipschitz_proxy<T: Real>(&self, n: usize) -> T {
        let b = self.sites::<T>(n);
        let nf = T::from_usize_lossy(n);
        b.windows(2)
            .map(|w| (w[1] - w[0]).abs() * nf)
            .fold(T::zero(), T::max)
    }
}

/// Boundary tension `τ̄(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TensionSchedule {
    Constant { tau: f64 },
    /// `τ0 + (τ1 − τ0)·s((t − start)/t1)` with the cubic smoothstep
    /// `s(u) = 3u² − 2u³`, held at `τ0` before `start`.
    Smoothstep {
        tau0: f64,
        tau1: f64,
        t1: f64,
        #[serde(default)]
        start: f64,
    },
}

impl Default for TensionSchedule {
    fn default() -> Self {
        Self::Smoothstep {
            tau0: 0.0,
            tau1: 0.5,
            t1: 0.1,
            start: 0.0,
        }
    }
}

impl TensionSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { tau } if tau.is_finite() => Ok(()),
            Self::Smoothstep { tau0, tau1, t1, start } if tau0.is_finite() && tau1.is_finite() && t1 > 0.0 && start >= 0.0 => {
                Ok(())
            }
            _ => Err(Error::Config(format!("invalid tension schedule {self:?}"))),
        }
    }

    #[inline]
    pub fn tau<T: Real>(&self, t: T) -> T {
        match *self {
            Self::Constant { tau } => T::lit(tau),
            Self::Smoothstep { tau0, tau1, t1, start } => {
                let u = ((t - T::lit(start)) / T::lit(t1)).max(T::zero()).min(T::one());
                T::lit(tau0) + T::lit(tau1 - tau0) * u * u * (c::<T>(3.0) - c::<T>(2.0) * u)
            }
        }
    }

    #[inline]
    pub fn dtau<T: Real>(&self, t: T) -> T {
        match *self {
            Self::Constant { .. } => T::zero(),
            Self::Smoothstep { tau0, tau1, t1, start } => {
                let u = (t - T::lit(start)) / T::lit(t1);
                if u <= T::zero() || u >= T::one() {
                    T::zero()
                } else {
                    T::lit(tau1 - tau0) * c::<T>(6.0) * u * (T::one() - u) / T::lit(t1)
                }
            }
        }
    }

    pub fn initial(&self) -> f64 {
        match *self {
            Self::Constant { tau } => tau,
            Self::Smoothstep { tau0, .. } => tau0,
        }
    }

    pub fn terminal(&self) -> f64 {
        match *self {
            Self::Constant { tau } => tau,
            Self::Smoothstep { tau1, .. } => tau1,
        }
    }

    /// `K_τ̄ = sup_t (|τ̄| + |τ̄'|)`.
    pub fn k_tau(&self) -> f64 {
        match *self {
            Self::Constant { tau } => tau.abs(),
            Self::Smoothstep { tau0, tau1, t1, .. } => {
                tau0.abs().max(tau1.abs()) + 1.5 * (tau1 - tau0).abs() / t1
            }
        }
    }

    /// Range of tensions the schedule visits.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = (self.initial(), self.terminal());
        (a.min(b), a.max(b))
    }

    /// Same schedule played `1/ε` times slower.
    pub fn slowed(&self, epsilon: f64) -> Self {
        match *self {
            Self::Constant { tau } => Self::Constant { tau },
            Self::Smoothstep { tau0, tau1, t1, start } => Self::Smoothstep {
                tau0,
                tau1,
                t1: t1 / epsilon,
                start: start / epsilon,
            },
        }
    }

    /// Time at which the boundary tension stops changing.
    pub fn settle_time(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Smoothstep { t1, start, .. } => start + t1,
        }
    }

    /// Same schedule with the ramp delayed by `by`.
    pub fn delayed(&self, by: f64) -> Self {
        match *self {
            Self::Constant { tau } => Self::Constant { tau },
            Self::Smoothstep { tau0, tau1, t1, start } => Self::Smoothstep {
                tau0,
                tau1,
                t1,
                start: start + by,
            },
        }
    }
}
