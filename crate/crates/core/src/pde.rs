//! Finite-volume solver for the macroscopic strain equation
//!
//! ```text
//! ∂t r = (εγ)⁻¹ ∂x² 𝝉(r, β(x)),   ∂x𝝉 = 0 at x = 0,   𝝉 = τ̄(t) at x = 1
//! ```
//!
//! on `M` cells of width `Δx = 1/M`, written in flux form so that total
//! strain and the free-energy balance hold at the semi-discrete level.
//! `ε = 1` is the plain hydrodynamic equation; smaller `ε` gives the
//! quasi-static family. Time stepping is classical RK4, with the work and
//! the squared tension gradient integrated as extra ODE components.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gibbs::{build_table, GibbsSolver, GibbsTable, TableSpec};
use crate::potentials::Potential;
use crate::profiles::{TemperatureProfile, TensionSchedule};
use crate::scalar::{c, Real};

/// Cell-averaged strain profile.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField<T> {
    pub r: Vec<T>,
    pub t: T,
}

impl<T: Real> StrainField<T> {
    pub fn cells(&self) -> usize {
        self.r.len()
    }

    pub fn total_length(&self) -> T {
        let dx = T::from_usize_lossy(self.r.len()).recip();
        pairwise_sum(&self.r) * dx
    }

    /// Cumulative strain `R(x_{j+½}) = Σ_{k≤j} r_k Δx` at the right faces.
    pub fn antiderivative(&self) -> Vec<T> {
        let dx = T::from_usize_lossy(self.r.len()).recip();
        let mut acc = T::zero();
        self.r
            .iter()
            .map(|&r| {
                acc = acc + r * dx;
                acc
            })
            .collect()
    }
}

/// Pairwise summation keeps reductions reproducible and accurate.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    if xs.len() <= 16 {
        xs.iter().copied().fold(T::zero(), |a, b| a + b)
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Cell center `x_j = (j − ½)/M` for zero-based `j`.
#[inline]
pub fn cell_center<T: Real>(j: usize, m: usize) -> T {
    (T::from_usize_lossy(j) + c(0.5)) / T::from_usize_lossy(m)
}

/// Geometry, constitutive law and boundary data of one macroscopic problem.
#[derive(Debug, Clone)]
pub struct HydroModel<T> {
    pub table: Arc<GibbsTable<T>>,
    pub profile: TemperatureProfile,
    pub gamma: T,
    /// Time-scale factor `ε ∈ (0, 1]`.
    pub epsilon: T,
    pub beta: Vec<T>,
    cols: Vec<usize>,
}

impl<T: Real> HydroModel<T> {
    /// Uses a table that already holds one column per cell temperature.
    pub fn with_table(table: Arc<GibbsTable<T>>, profile: TemperatureProfile, cells: usize, gamma: T) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Config("need at least two cells".into()));
        }
        if !(gamma > T::zero()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        profile.validate()?;
        let beta: Vec<T> = (0..cells).map(|j| profile.beta(cell_center::<T>(j, cells))).collect();
        let cols = beta
            .iter()
            .map(|&b| {
                table.column_index(b).ok_or_else(|| {
                    Error::Config(format!("table has no column for beta = {b}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table,
            profile,
            gamma,
            epsilon: T::one(),
            beta,
            cols,
        })
    }

    /// Builds the table for the cell temperatures and tensions in
    /// `[tau_lo, tau_hi]` (widened by 1.5).
    pub fn new(
        potential: Potential<T>,
        profile: TemperatureProfile,
        cells: usize,
        gamma: T,
        tau_lo: T,
        tau_hi: T,
    ) -> Result<Self> {
        profile.validate()?;
        let beta: Vec<T> = (0..cells).map(|j| profile.beta(cell_center::<T>(j, cells))).collect();
        let solver = GibbsSolver::new(potential);
        let spec = TableSpec::covering(tau_lo, tau_hi, c(0.5), c(0.01));
        let table = build_table(&solver, &beta, spec, c::<T>(1e-6).max(T::tol_floor()))?;
        Self::with_table(table, profile, cells, gamma)
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon <= T::one()) {
            return Err(Error::Config(format!("epsilon {epsilon} outside (0, 1]")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.beta.len()
    }

    pub fn dx(&self) -> T {
        T::from_usize_lossy(self.cells()).recip()
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.cells()).map(|j| cell_center(j, self.cells())).collect()
    }

    /// Effective diffusion prefactor `(εγ)⁻¹`.
    pub fn rate(&self) -> T {
        (self.epsilon * self.gamma).recip()
    }

    pub fn tension_profile(&self, field: &StrainField<T>) -> Result<Vec<T>> {
        self.check_len(field)?;
        field
            .r
            .iter()
            .zip(&self.cols)
            .map(|(&r, &col)| self.table.tension_col(col, r))
            .collect()
    }

    fn check_len(&self, field: &StrainField<T>) -> Result<()> {
        if field.r.len() != self.cells() {
            return Err(Error::Config(format!(
                "field has {} cells, model {}",
                field.r.len(),
                self.cells()
            )));
        }
        Ok(())
    }

    /// `r_j = 𝔯(τ, β_j)`.
    pub fn stationary_profile(&self, tau: T) -> Result<StrainField<T>> {
        let r = self
            .cols
            .iter()
            .map(|&col| self.table.stretch_for_tension_col(col, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(StrainField { r, t: T::zero() })
    }

    /// Field whose tension equals `tau(x_j)` in every cell.
    pub fn field_from_tension(&self, tau: impl Fn(T) -> T) -> Result<StrainField<T>> {
        let m = self.cells();
        let r = self
            .cols
            .iter()
            .enumerate()
            .map(|(j, &col)| self.table.stretch_for_tension_col(col, tau(cell_center(j, m))))
            .collect::<Result<Vec<_>>>()?;
        Ok(StrainField { r, t: T::zero() })
    }

    /// `F̃ = Σ F(r_j, β_j) Δx`.
    pub fn free_energy_functional(&self, field: &StrainField<T>) -> Result<T> {
        self.check_len(field)?;
        let f = field
            .r
            .iter()
            .zip(&self.cols)
            .map(|(&r, &col)| self.table.free_energy_col(col, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&f) * self.dx())
    }

    /// `Ũ = Σ u(𝝉(r_j, β_j), β_j) Δx`.
    pub fn energy_functional(&self, field: &StrainField<T>) -> Result<T> {
        self.check_len(field)?;
        let u = field
            .r
            .iter()
            .zip(&self.cols)
            .map(|(&r, &col)| {
                let tau = self.table.tension_col(col, r)?;
                self.table.mean_energy_col(col, tau)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&u) * self.dx())
    }

    /// `Σ β_j⁻¹ S(r_j, β_j) Δx`.
    pub fn heat_entropy_functional(&self, field: &StrainField<T>) -> Result<T> {
        self.check_len(field)?;
        let s = field
            .r
            .iter()
            .zip(&self.cols)
            .zip(&self.beta)
            .map(|((&r, &col), &b)| Ok(self.table.entropy_col(col, r)? / b))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum(&s) * self.dx())
    }

    /// Time derivative of the strain field at boundary tension `tau_bar`.
    pub fn rhs(&self, field: &StrainField<T>, tau_bar: T) -> Result<Vec<T>> {
        self.check_len(field)?;
        let mut tau = vec![T::zero(); self.cells()];
        let mut out = vec![T::zero(); self.cells()];
        let mut hints = vec![usize::MAX; self.cells()];
        self.eval(&field.r, tau_bar, &mut tau, &mut out, &mut hints)?;
        Ok(out)
    }

    /// Fills `out` with the strain derivative and returns
    /// `(boundary flux at x = 1, ∫(∂x𝝉)² dx)`.
    fn eval(&self, r: &[T], tau_bar: T, tau: &mut [T], out: &mut [T], hints: &mut [usize]) -> Result<(T, T)> {
        let m = r.len();
        for j in 0..m {
            tau[j] = self.table.tension_hinted(self.cols[j], r[j], &mut hints[j])?;
        }
        let dx = self.dx();
        let inv_dx = dx.recip();
        let k = self.rate();
        let mut left_flux = T::zero();
        let mut grad_sq = T::zero();
        for j in 0..m {
            let right_flux = if j + 1 < m {
                (tau[j + 1] - tau[j]) * inv_dx
            } else {
                // ghost τ_{M+1} = 2τ̄ − τ_M
                (tau_bar - tau[j]) * c::<T>(2.0) * inv_dx
            };
            let w = if j + 1 < m { dx } else { dx * c(0.5) };
            grad_sq = grad_sq + right_flux * right_flux * w;
            out[j] = k * (right_flux - left_flux) * inv_dx;
            left_flux = right_flux;
        }
        Ok((left_flux, grad_sq))
    }

    /// Stable step `cfl·Δx²·εγ / sup ∂r𝝉`.
    pub fn stable_dt(&self, cfl: T) -> Result<T> {
        if !(cfl > T::zero() && cfl <= c(0.4)) {
            return Err(Error::Config(format!("cfl {cfl} outside (0, 0.4]")));
        }
        let mut cols = self.cols.clone();
        cols.dedup();
        let slope = cols
            .iter()
            .map(|&col| self.table.max_tension_slope_col(col))
            .fold(T::zero(), T::max);
        Ok(cfl * self.dx() * self.dx() / (slope * self.rate()))
    }
}

/// Work, dissipation and free-energy bookkeeping of one macroscopic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroLedger<T> {
    pub t: T,
    /// `F̃(0)` and `F̃(t)`
    pub free_energy_start: T,
    pub free_energy: T,
    /// `∫ τ̄ dL`
    pub work: T,
    /// `(εγ)⁻¹ ∫∫ (∂x𝝉)²`
    pub dissipation: T,
    /// `∫∫ (∂x𝝉)²`, the finite-dissipation class quantity.
    pub grad_sq_integral: T,
    pub length_start: T,
    pub length: T,
    /// `Ũ(0)` and `Ũ(t)`
    pub energy_start: T,
    pub energy: T,
}

impl<T: Real> MacroLedger<T> {
    pub fn delta_free_energy(&self) -> T {
        self.free_energy - self.free_energy_start
    }

    /// `ΔF̃ − W + D`, zero up to discretization error.
    pub fn identity_residual(&self) -> T {
        self.delta_free_energy() - self.work + self.dissipation
    }

    /// Heat as the complement of work: `Q = ΔŨ − W`.
    pub fn heat(&self) -> T {
        self.energy - self.energy_start - self.work
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub t: T,
    pub r: Vec<T>,
    pub tau: Vec<T>,
    pub ledger: MacroLedger<T>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub ledger: MacroLedger<T>,
    pub final_field: StrainField<T>,
    pub steps: usize,
    pub dt: T,
    /// `Σ_j G_k(x_j)(r_j(t) − r_j(0))Δx − (εγ)⁻¹∫[∫G_k''𝝉 − G_k'(1)τ̄] ds`
    /// for the cosine test family.
    pub weak_residuals: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions<T> {
    pub cfl: T,
    pub snapshot_times: Vec<T>,
    /// Number of cosine test functions whose weak-form residual is tracked.
    pub weak_tests: usize,
    /// Step-doubling stability probe period, in steps (0 disables).
    pub probe_every: usize,
}

impl<T: Real> Default for IntegrateOptions<T> {
    fn default() -> Self {
        Self {
            cfl: c(0.4),
            snapshot_times: Vec::new(),
            weak_tests: 0,
            probe_every: 500,
        }
    }
}

/// Test functions `G_k(x) = cos((k + ½)πx)`, with `G_k(1) = 0`, `G_k'(0) = 0`.
pub fn cosine_test_function<T: Real>(k: usize, x: T) -> T {
    (wavenumber::<T>(k) * x).cos()
}

#[inline]
pub fn wavenumber<T: Real>(k: usize) -> T {
    (T::from_usize_lossy(k) + c(0.5)) * T::PI()
}

/// Augmented RK4 state: strain, work, `∫(∂x𝝉)²`, `∫τ̄`, weak-form sums.
struct Stepper<'a, T> {
    model: &'a HydroModel<T>,
    schedule: &'a TensionSchedule,
    tau: Vec<T>,
    hints: Vec<usize>,
    weak_g2: Vec<Vec<T>>,
    k: [Vec<T>; 4],
    tmp: Vec<T>,
}

const EXTRA: usize = 3;

impl<'a, T: Real> Stepper<'a, T> {
    fn new(model: &'a HydroModel<T>, schedule: &'a TensionSchedule, weak_tests: usize) -> Self {
        let m = model.cells();
        let n = m + EXTRA + weak_tests;
        let weak_g2 = (0..weak_tests)
            .map(|k| {
                let kk = wavenumber::<T>(k);
                (0..m)
                    .map(|j| -kk * kk * cosine_test_function(k, cell_center::<T>(j, m)))
                    .collect()
            })
            .collect();
        Self {
            model,
            schedule,
            tau: vec![T::zero(); m],
            hints: vec![usize::MAX; m],
            weak_g2,
            k: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
            tmp: vec![T::zero(); n],
        }
    }

    fn deriv(&mut self, t: T, y: &[T], which: usize) -> Result<()> {
        let m = self.model.cells();
        let tau_bar = self.schedule.tau(t);
        let out = &mut self.k[which];
        let (flux, grad_sq) = self.model.eval(&y[..m], tau_bar, &mut self.tau, &mut out[..m], &mut self.hints)?;
        let rate = self.model.rate();
        out[m] = tau_bar * rate * flux;
        out[m + 1] = grad_sq;
        out[m + 2] = tau_bar;
        let dx = self.model.dx();
        for (i, g2) in self.weak_g2.iter().enumerate() {
            let s: T = g2.iter().zip(&self.tau).map(|(&g, &t)| g * t).sum();
            out[m + EXTRA + i] = s * dx;
        }
        Ok(())
    }

    fn step(&mut self, t: T, dt: T, y: &mut [T]) -> Result<()> {
        let half = dt * c(0.5);
        let n = y.len();
        self.deriv(t, y, 0)?;
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k[0][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.deriv(t + half, &tmp, 1)?;
        self.tmp = tmp;
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k[1][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.deriv(t + half, &tmp, 2)?;
        self.tmp = tmp;
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k[2][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.deriv(t + dt, &tmp, 3)?;
        self.tmp = tmp;
        let sixth = dt / c(6.0);
        for i in 0..n {
            y[i] = y[i] + sixth * (self.k[0][i] + c::<T>(2.0) * (self.k[1][i] + self.k[2][i]) + self.k[3][i]);
        }
        Ok(())
    }
}

impl<T: Real> HydroModel<T> {
    fn ledger_at(&self, field: &StrainField<T>, start: &MacroLedger<T>, y: &[T]) -> Result<MacroLedger<T>> {
        let m = self.cells();
        let grad = y[m + 1];
        Ok(MacroLedger {
            t: field.t,
            free_energy_start: start.free_energy_start,
            free_energy: self.free_energy_functional(field)?,
            work: y[m],
            dissipation: grad * self.rate(),
            grad_sq_integral: grad,
            length_start: start.length_start,
            length: field.total_length(),
            energy_start: start.energy_start,
            energy: self.energy_functional(field)?,
        })
    }

    /// Integrates from `field.t` to `t_end` with a fixed stable step
    /// (shortened to land on snapshot times).
    pub fn integrate(
        &self,
        field: &StrainField<T>,
        schedule: &TensionSchedule,
        t_end: T,
        opts: &IntegrateOptions<T>,
    ) -> Result<Trajectory<T>> {
        let mut stepper = Stepper::new(self, schedule, opts.weak_tests);
        let mut steps = 0usize;
        let mut traj_snaps = Vec::new();
        self.run(field, schedule, t_end, opts, &mut stepper, |_, _| Ok(()), &mut steps, &mut traj_snaps)
    }

    #[allow(clippy::too_many_arguments)]
    fn run<F>(
        &self,
        field: &StrainField<T>,
        schedule: &TensionSchedule,
        t_end: T,
        opts: &IntegrateOptions<T>,
        stepper: &mut Stepper<'_, T>,
        mut on_step: F,
        steps: &mut usize,
        snaps: &mut Vec<Snapshot<T>>,
    ) -> Result<Trajectory<T>>
    where
        F: FnMut(T, &[T]) -> Result<()>,
    {
        self.check_len(field)?;
        schedule.validate()?;
        let m = self.cells();
        let dt_max = self.stable_dt(opts.cfl)?;
        let start = MacroLedger {
            t: field.t,
            free_energy_start: self.free_energy_functional(field)?,
            free_energy: T::zero(),
            work: T::zero(),
            dissipation: T::zero(),
            grad_sq_integral: T::zero(),
            length_start: field.total_length(),
            length: T::zero(),
            energy_start: self.energy_functional(field)?,
            energy: T::zero(),
        };
        let mut y = vec![T::zero(); m + EXTRA + opts.weak_tests];
        y[..m].copy_from_slice(&field.r);
        let r0 = field.r.clone();
        let mut t = field.t;
        let mut stops: Vec<T> = opts
            .snapshot_times
            .iter()
            .copied()
            .filter(|&s| s >= t && s <= t_end)
            .collect();
        stops.push(t_end);
        stops.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot time"));
        stops.dedup();

        let mut probe_buf = vec![T::zero(); y.len()];
        let mut probe_half = vec![T::zero(); y.len()];
        for &stop in &stops {
            while t < stop {
                let remaining = stop - t;
                let nsteps = (remaining / dt_max).ceil().max(T::one());
                let dt = remaining / nsteps;
                if opts.probe_every > 0 && (*steps).is_multiple_of(opts.probe_every) {
                    probe_buf.copy_from_slice(&y);
                    probe_half.copy_from_slice(&y);
                    stepper.step(t, dt, &mut probe_buf)?;
                    let h = dt * c(0.5);
                    stepper.step(t, h, &mut probe_half)?;
                    stepper.step(t + h, h, &mut probe_half)?;
                    let mut err = T::zero();
                    let mut change = T::zero();
                    for j in 0..m {
                        err = err.max((probe_buf[j] - probe_half[j]).abs());
                        change = change.max((probe_buf[j] - y[j]).abs());
                    }
                    if err > change * c(0.5) + T::epsilon() * c(1e3) {
                        return Err(Error::Stability(format!(
                            "step doubling error {err} vs change {change} at t = {t}, dt = {dt}"
                        )));
                    }
                }
                stepper.step(t, dt, &mut y)?;
                *steps += 1;
                // Avoid drift in t across many steps.
                t = if remaining <= dt * c(1.000001) { stop } else { t + dt };
                if let Some(j) = y[..m].iter().position(|v| !v.is_finite()) {
                    return Err(Error::BlowUp {
                        site: j,
                        t: t.to_f64_lossy(),
                    });
                }
                on_step(t, &y)?;
            }
            if opts.snapshot_times.contains(&stop) {
                let f = StrainField { r: y[..m].to_vec(), t };
                let ledger = self.ledger_at(&f, &start, &y)?;
                snaps.push(Snapshot {
                    t,
                    tau: self.tension_profile(&f)?,
                    r: f.r,
                    ledger,
                });
            }
        }
        let final_field = StrainField { r: y[..m].to_vec(), t };
        let ledger = self.ledger_at(&final_field, &start, &y)?;
        let dx = self.dx();
        let rate = self.rate();
        let weak_residuals = (0..opts.weak_tests)
            .map(|k| {
                let lhs: T = (0..m)
                    .map(|j| cosine_test_function(k, cell_center::<T>(j, m)) * (y[j] - r0[j]))
                    .sum::<T>()
                    * dx;
                // G_k'(1) = −(k+½)π sin((k+½)π)
                let kk = wavenumber::<T>(k);
                let g1 = -kk * kk.sin();
                lhs - rate * (y[m + EXTRA + k] - g1 * y[m + 2])
            })
            .collect();
        Ok(Trajectory {
            snapshots: std::mem::take(snaps),
            ledger,
            final_field,
            steps: *steps,
            dt: dt_max,
            weak_residuals,
        })
    }

    /// `∫₀ᵗ∫₀¹(∂x𝝉)² dx ds` of a finished run.
    pub fn regularity_monitor(traj: &Trajectory<T>) -> T {
        traj.ledger.grad_sq_integral
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClausiusReport<T> {
    /// `F̃_ss(τ₁) − F̃_ss(τ₀)`
    pub delta_free_energy_ss: T,
    pub delta_free_energy: T,
    pub work: T,
    pub dissipation: T,
    pub identity_residual: T,
    /// Work up to the terminal steady state: once `τ̄ ≡ τ₁` the rest is
    /// `τ₁(L_ss(τ₁) − L(t))`. `None` while the schedule is still moving.
    pub work_to_steady: Option<T>,
    /// `W_∞ − ΔF̃_ss`, the total dissipation of the transformation.
    pub dissipation_to_steady: Option<T>,
    /// `ΔF̃_ss ≤ W_∞` (or `≤ W` when the schedule has not settled).
    pub inequality_holds: bool,
}

impl<T: Real> HydroModel<T> {
    pub fn clausius_report(&self, schedule: &TensionSchedule, ledger: &MacroLedger<T>) -> Result<ClausiusReport<T>> {
        let f0 = self.free_energy_functional(&self.stationary_profile(T::lit(schedule.initial()))?)?;
        let ss1 = self.stationary_profile(T::lit(schedule.terminal()))?;
        let dfss = self.free_energy_functional(&ss1)? - f0;
        let work_to_steady = (ledger.t >= T::lit(schedule.settle_time()))
            .then(|| ledger.work + T::lit(schedule.terminal()) * (ss1.total_length() - ledger.length));
        let total = work_to_steady.unwrap_or(ledger.work);
        Ok(ClausiusReport {
            delta_free_energy_ss: dfss,
            delta_free_energy: ledger.delta_free_energy(),
            work: ledger.work,
            dissipation: ledger.dissipation,
            identity_residual: ledger.identity_residual(),
            work_to_steady,
            dissipation_to_steady: work_to_steady.map(|w| w - dfss),
            inequality_holds: dfss <= total,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasistaticReport<T> {
    pub epsilon: T,
    pub work: T,
    pub dissipation: T,
    pub delta_free_energy_ss: T,
    pub identity_residual: T,
    /// `(t, sup_j |𝝉(r_j, β_j) − τ̄(t)|)`
    pub tension_gap: Vec<(T, T)>,
    /// `ΔŨ − W`
    pub heat_ledger: T,
    /// `∫β⁻¹(S(r_ss(τ₁)) − S(r_ss(τ₀)))dx`
    pub heat_entropy: T,
    pub steps: usize,
}

impl<T: Real> HydroModel<T> {
    /// Runs the `ε`-rescaled equation from the stationary profile at
    /// `τ̄(0)` to `t_end` (rescaled time).
    pub fn quasistatic_run(
        &self,
        epsilon: T,
        schedule: &TensionSchedule,
        t_end: T,
        opts: &IntegrateOptions<T>,
    ) -> Result<QuasistaticReport<T>> {
        let model = self.clone().with_epsilon(epsilon)?;
        let start = model.stationary_profile(T::lit(schedule.initial()))?;
        let traj = model.integrate(&start, schedule, t_end, opts)?;
        let tension_gap = traj
            .snapshots
            .iter()
            .map(|s| {
                let tb = schedule.tau(s.t);
                (s.t, s.tau.iter().map(|&x| (x - tb).abs()).fold(T::zero(), T::max))
            })
            .collect();
        let clausius = model.clausius_report(schedule, &traj.ledger)?;
        let end = model.stationary_profile(T::lit(schedule.terminal()))?;
        let heat_entropy = model.heat_entropy_functional(&end)? - model.heat_entropy_functional(&start)?;
        Ok(QuasistaticReport {
            epsilon,
            work: traj.ledger.work,
            dissipation: traj.ledger.dissipation,
            delta_free_energy_ss: clausius.delta_free_energy_ss,
            identity_residual: traj.ledger.identity_residual(),
            tension_gap,
            heat_ledger: traj.ledger.heat(),
            heat_entropy,
            steps: traj.steps,
        })
    }

    /// Evolves two fields in lockstep and records
    /// `∫₀¹(R_a − R_b)² dx` after every step, with `R` the cumulative
    /// strain at cell faces (trapezoid weight ½ at `x = 1`, `R(0) = 0`).
    pub fn contraction_check(
        &self,
        a: &StrainField<T>,
        b: &StrainField<T>,
        schedule: &TensionSchedule,
        t_end: T,
        cfl: T,
    ) -> Result<Vec<T>> {
        self.check_len(a)?;
        self.check_len(b)?;
        let m = self.cells();
        let dt_max = self.stable_dt(cfl)?;
        let mut sa = Stepper::new(self, schedule, 0);
        let mut sb = Stepper::new(self, schedule, 0);
        let mut ya = vec![T::zero(); m + EXTRA];
        let mut yb = vec![T::zero(); m + EXTRA];
        ya[..m].copy_from_slice(&a.r);
        yb[..m].copy_from_slice(&b.r);
        let metric = |ya: &[T], yb: &[T]| {
            let dx = self.dx();
            let mut acc = T::zero();
            let mut sum = T::zero();
            for j in 0..m {
                acc = acc + (ya[j] - yb[j]) * dx;
                let w = if j + 1 < m { dx } else { dx * c(0.5) };
                sum = sum + acc * acc * w;
            }
            sum
        };
        let mut series = vec![metric(&ya, &yb)];
        let mut t = a.t;
        let nsteps = ((t_end - t) / dt_max).ceil().to_usize().unwrap_or(0).max(1);
        let dt = (t_end - t) / T::from_usize_lossy(nsteps);
        for _ in 0..nsteps {
            sa.step(t, dt, &mut ya)?;
            sb.step(t, dt, &mut yb)?;
            t = t + dt;
            series.push(metric(&ya, &yb));
        }
        Ok(series)
    }
}
