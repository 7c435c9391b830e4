//! Exact Gaussian law of the harmonic chain and its entropy / Fisher
//! information functionals.
//!
//! For `V(r) = r²/2` the chain SDE is linear, so a Gaussian initial law
//! stays Gaussian. The state is ordered `x = (r_1..r_n, p_1..p_n)`; the
//! reference measure is the zero-tension inhomogeneous Gibbs law
//! `ν = N(0, Σ)`, `Σ = diag(β_i⁻¹)` on both blocks. For `f = dμ/dν` every
//! directional derivative `w·∇ log f = wᵀ(Σ⁻¹ − C⁻¹)x + wᵀC⁻¹m` is affine,
//! so each functional is an exact quadratic form in `(m, C)`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::profiles::{TemperatureProfile, TensionSchedule};
use crate::scalar::{c, Real};

/// Sparse drift `ẋ = A x + b(t)` plus diagonal noise covariance.
#[derive(Debug, Clone)]
pub struct LinearModel<T> {
    pub n: usize,
    pub gamma: T,
    pub betas: Vec<T>,
    pub schedule: TensionSchedule,
    rows: Vec<Vec<(usize, T)>>,
    noise: Vec<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn build(n: usize, gamma: T, profile: &TemperatureProfile, schedule: TensionSchedule) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("chain needs at least one site".into()));
        }
        profile.validate()?;
        schedule.validate()?;
        let betas: Vec<T> = profile.sites(n);
        let nf = T::from_usize_lossy(n);
        let s = nf * nf;
        let mut rows = vec![Vec::with_capacity(3); 2 * n];
        for i in 0..n {
            // dr_i = n²(p_i − p_{i−1})
            rows[i].push((n + i, s));
            if i > 0 {
                rows[i].push((n + i - 1, -s));
            }
            // dp_i = n²(r_{i+1} − r_i) − γn²p_i ; the r_{n+1} slot is the boundary force
            if i + 1 < n {
                rows[n + i].push((i + 1, s));
            }
            rows[n + i].push((i, -s));
            rows[n + i].push((n + i, -gamma * s));
        }
        let mut noise = vec![T::zero(); 2 * n];
        for i in 0..n {
            noise[n + i] = c::<T>(2.0) * gamma * s / betas[i];
        }
        Ok(Self {
            n,
            gamma,
            betas,
            schedule,
            rows,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn drift_matrix(&self) -> Matrix<T> {
        let mut a = Matrix::zeros(self.dim());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                a[(i, j)] = v;
            }
        }
        a
    }

    /// Affine drift `b(t) = n²τ̄(t) e_{p_n}`.
    pub fn forcing(&self, t: T) -> Vec<T> {
        let mut b = vec![T::zero(); self.dim()];
        let nf = T::from_usize_lossy(self.n);
        b[self.dim() - 1] = nf * nf * self.schedule.tau(t);
        b
    }

    pub fn noise_diagonal(&self) -> &[T] {
        &self.noise
    }

    /// Row-sum norm `‖A‖_∞`.
    pub fn norm_inf(&self) -> T {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest admissible RK4 step, `0.1/‖A‖_∞`.
    pub fn max_dt(&self) -> T {
        c::<T>(0.1) / self.norm_inf()
    }

    /// Reference covariance `Σ = diag(β⁻¹, β⁻¹)`.
    pub fn reference_variances(&self) -> Vec<T> {
        self.betas.iter().chain(&self.betas).map(|b| b.recip()).collect()
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    /// `A C + C Aᵀ + N` for symmetric `C`.
    pub fn lyapunov(&self, cov: &Matrix<T>, out: &mut Matrix<T>) {
        let d = self.dim();
        // out ← A C (rows of A are sparse)
        for i in 0..d {
            for j in 0..d {
                let mut s = T::zero();
                for &(k, v) in &self.rows[i] {
                    s = s + v * cov[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        for i in 0..d {
            let v = out[(i, i)];
            out[(i, i)] = v + v + self.noise[i];
            for j in 0..i {
                let s = out[(i, j)] + out[(j, i)];
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
    }

    pub fn lyapunov_residual(&self, cov: &Matrix<T>) -> T {
        let mut out = Matrix::zeros(self.dim());
        self.lyapunov(cov, &mut out);
        out.max_abs()
    }
}

/// Mean and covariance of a Gaussian law on `(r, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

impl<T: Real> GaussianMoments<T> {
    /// The reference measure itself.
    pub fn reference(betas: &[T]) -> Self {
        let var: Vec<T> = betas.iter().chain(betas).map(|b| b.recip()).collect();
        Self {
            mean: vec![T::zero(); var.len()],
            cov: Matrix::diagonal(&var),
        }
    }

    /// Inhomogeneous Gibbs state tilted by site tensions `τ_i`: stretch means
    /// `τ_i` and velocity means `(β_{i+1}τ_{i+1} − β_iτ_i)/β_i` (`0` at the
    /// last site), covariance of the reference measure.
    pub fn tilted_gibbs(betas: &[T], taus: &[T]) -> Self {
        let n = betas.len();
        let mut g = Self::reference(betas);
        for i in 0..n {
            g.mean[i] = taus[i];
            if i + 1 < n {
                g.mean[n + i] = (betas[i + 1] * taus[i + 1] - betas[i] * taus[i]) / betas[i];
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.mean.len() / 2
    }
}

/// Functionals of `f = dμ/dν` for `μ = N(m, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct FisherReport<T> {
    /// Relative entropy `H_n`.
    pub entropy: T,
    pub dp: T,
    pub dp_tilde: T,
    pub dr: T,
    pub i_n: T,
    pub cross: T,
}

/// Evaluates bilinear forms `E_μ[(u·∇log f)(v·∇log f)]`.
struct Forms<T> {
    p: Vec<T>,
    pm: Vec<T>,
    cov: Matrix<T>,
    inv: Matrix<T>,
}

impl<T: Real> Forms<T> {
    fn new(g: &GaussianMoments<T>, betas: &[T]) -> Result<(Self, T)> {
        let n = betas.len();
        if g.mean.len() != 2 * n || g.cov.dim() != 2 * n {
            return Err(Error::Config(format!("moments of dimension {} for {} sites", g.mean.len(), n)));
        }
        let chol = g.cov.cholesky()?;
        let p: Vec<T> = betas.iter().chain(betas).copied().collect();
        let pm: Vec<T> = p.iter().zip(&g.mean).map(|(&a, &b)| a * b).collect();
        let inv = chol.inverse();
        // H = ½[tr(Σ⁻¹C) + mᵀΣ⁻¹m − 2n − log det C + log det Σ]
        let tr: T = (0..2 * n).map(|i| p[i] * g.cov[(i, i)]).sum();
        let mm: T = pm.iter().zip(&g.mean).map(|(&a, &b)| a * b).sum();
        let log_det_sigma: T = -p.iter().map(|x| x.ln()).sum::<T>();
        let h = (tr + mm - T::from_usize_lossy(2 * n) - chol.log_det() + log_det_sigma) * c(0.5);
        Ok((
            Self {
                p,
                pm,
                cov: g.cov.clone(),
                inv,
            },
            h,
        ))
    }

    /// `B(u, v) = uᵀΣ⁻¹CΣ⁻¹v − 2uᵀΣ⁻¹v + uᵀC⁻¹v + (uᵀΣ⁻¹m)(vᵀΣ⁻¹m)` for sparse `u, v`.
    fn form(&self, u: &[(usize, T)], v: &[(usize, T)]) -> T {
        let mut s = T::zero();
        for &(i, a) in u {
            for &(j, b) in v {
                let mut k = self.p[i] * self.cov[(i, j)] * self.p[j] + self.inv[(i, j)];
                if i == j {
                    k = k - c::<T>(2.0) * self.p[i];
                }
                s = s + a * b * k;
            }
        }
        let um: T = u.iter().map(|&(i, a)| a * self.pm[i]).sum();
        let vm: T = v.iter().map(|&(j, b)| b * self.pm[j]).sum();
        s + um * vm
    }
}

fn dir_p<T: Real>(n: usize, i: usize) -> Vec<(usize, T)> {
    vec![(n + i, T::one())]
}

/// `∂_{q_i} = ∂_{r_i} − ∂_{r_{i+1}}` for `i < n` (0-based `i ≤ n − 2`).
fn dir_q<T: Real>(i: usize) -> Vec<(usize, T)> {
    vec![(i, T::one()), (i + 1, -T::one())]
}

/// `H_n = ∫ f log f dν`
pub fn relative_entropy<T: Real>(g: &GaussianMoments<T>, betas: &[T]) -> Result<T> {
    Ok(Forms::new(g, betas)?.1)
}

pub fn fisher_functionals<T: Real>(g: &GaussianMoments<T>, betas: &[T]) -> Result<FisherReport<T>> {
    let n = betas.len();
    let (forms, entropy) = Forms::new(g, betas)?;
    let mut r = FisherReport {
        entropy,
        ..Default::default()
    };
    for i in 0..n {
        let w = betas[i].recip();
        let dp = dir_p::<T>(n, i);
        let bpp = forms.form(&dp, &dp);
        r.dp = r.dp + w * bpp;
        if i + 1 < n {
            let dq = dir_q::<T>(i);
            let bqq = forms.form(&dq, &dq);
            let bqp = forms.form(&dq, &dp);
            let mut mixed = dp.clone();
            mixed.extend_from_slice(&dq);
            r.dp_tilde = r.dp_tilde + w * bpp;
            r.dr = r.dr + w * bqq;
            r.cross = r.cross + w * bqp;
            r.i_n = r.i_n + w * forms.form(&mixed, &mixed);
        }
    }
    Ok(r)
}

/// `I_n` of the tilted inhomogeneous Gibbs state for site tensions `τ_i`.
pub fn tilted_gibbs_in<T: Real>(betas: &[T], taus: &[T]) -> Result<T> {
    Ok(fisher_functionals(&GaussianMoments::tilted_gibbs(betas, taus), betas)?.i_n)
}

/// RK4 integrator for `ṁ = Am + b(t)`, `Ċ = AC + CAᵀ + N`.
pub struct MomentEvolver<'a, T> {
    model: &'a LinearModel<T>,
    k_mean: [Vec<T>; 4],
    k_cov: [Matrix<T>; 4],
    stage_mean: Vec<T>,
    stage_cov: Matrix<T>,
    pub max_dt: T,
}

impl<'a, T: Real> MomentEvolver<'a, T> {
    pub fn new(model: &'a LinearModel<T>) -> Self {
        let d = model.dim();
        let zm = || vec![T::zero(); d];
        let zc = || Matrix::zeros(d);
        Self {
            model,
            k_mean: [zm(), zm(), zm(), zm()],
            k_cov: [zc(), zc(), zc(), zc()],
            stage_mean: zm(),
            stage_cov: zc(),
            max_dt: model.max_dt(),
        }
    }

    fn derivative(&mut self, stage: usize, t: T) {
        let b = self.model.forcing(t);
        let mut out = std::mem::take(&mut self.k_mean[stage]);
        self.model.apply(&self.stage_mean, &mut out);
        for (o, bi) in out.iter_mut().zip(b) {
            *o = *o + bi;
        }
        self.k_mean[stage] = out;
        let mut cov = std::mem::replace(&mut self.k_cov[stage], Matrix::zeros(0));
        self.model.lyapunov(&self.stage_cov, &mut cov);
        self.k_cov[stage] = cov;
    }

    fn set_stage(&mut self, g: &GaussianMoments<T>, stage: usize, h: T) {
        for (s, (&m, &k)) in self.stage_mean.iter_mut().zip(g.mean.iter().zip(&self.k_mean[stage])) {
            *s = m + h * k;
        }
        let dst = self.stage_cov.as_mut_slice();
        for (s, (&m, &k)) in dst.iter_mut().zip(g.cov.as_slice().iter().zip(self.k_cov[stage].as_slice())) {
            *s = m + h * k;
        }
    }

    pub fn step(&mut self, g: &mut GaussianMoments<T>, t: T, dt: T) {
        let half = dt * c(0.5);
        self.stage_mean.copy_from_slice(&g.mean);
        self.stage_cov.as_mut_slice().copy_from_slice(g.cov.as_slice());
        self.derivative(0, t);
        self.set_stage(g, 0, half);
        self.derivative(1, t + half);
        self.set_stage(g, 1, half);
        self.derivative(2, t + half);
        self.set_stage(g, 2, dt);
        self.derivative(3, t + dt);
        let w = dt / c(6.0);
        let two = c::<T>(2.0);
        for i in 0..g.mean.len() {
            let k = &self.k_mean;
            g.mean[i] = g.mean[i] + w * (k[0][i] + two * (k[1][i] + k[2][i]) + k[3][i]);
        }
        let k: Vec<&[T]> = self.k_cov.iter().map(|m| m.as_slice()).collect();
        for (i, x) in g.cov.as_mut_slice().iter_mut().enumerate() {
            *x = *x + w * (k[0][i] + two * (k[1][i] + k[2][i]) + k[3][i]);
        }
    }

    /// Advances from `t` to `t_end` with equal steps no larger than `max_dt`.
    pub fn advance(&mut self, g: &mut GaussianMoments<T>, t: T, t_end: T) -> Result<()> {
        if t_end <= t {
            return Ok(());
        }
        let steps = ((t_end - t) / self.max_dt).ceil().to_usize().unwrap_or(1).max(1);
        let dt = (t_end - t) / T::from_usize_lossy(steps);
        for k in 0..steps {
            self.step(g, t + dt * T::from_usize_lossy(k), dt);
        }
        if g.mean.iter().chain(g.cov.as_slice()).any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("moment equations diverged before t = {t_end}")));
        }
        Ok(())
    }
}

/// Moments at each of `times` (sorted, starting at or after 0).
pub fn evolve_moments<T: Real>(model: &LinearModel<T>, initial: &GaussianMoments<T>, times: &[T]) -> Result<Vec<GaussianMoments<T>>> {
    let mut ev = MomentEvolver::new(model);
    let mut g = initial.clone();
    let mut t = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for &s in times {
        if s < t {
            return Err(Error::Config("evaluation times must be sorted".into()));
        }
        ev.advance(&mut g, t, s)?;
        t = s;
        g.cov.cholesky().map_err(|_| Error::Numeric(format!("covariance lost positive definiteness at t = {t}")))?;
        out.push(g.clone());
    }
    Ok(out)
}

/// Initial law and driving of a scan.
#[derive(Debug, Clone)]
pub struct ScanProtocol<T> {
    pub gamma: T,
    pub profile: TemperatureProfile,
    pub schedule: TensionSchedule,
    pub horizon: T,
    /// `I_n` supremum is taken over `t ≥ burn_in`.
    pub burn_in: T,
    /// Uniform initial tension of the tilted Gibbs start.
    pub initial_tension: T,
    /// Evaluation points on the uniform part of the time grid.
    pub samples: usize,
    /// Allowed max/min ratio of each scaled column across `n`.
    pub slack: T,
}

impl<T: Real> ScanProtocol<T> {
    /// Tension quench `0 → 0.5` with the default temperature ramp.
    pub fn quench() -> Self {
        let schedule = TensionSchedule::default();
        Self {
            gamma: T::one(),
            profile: TemperatureProfile::default(),
            initial_tension: T::lit(schedule.initial()),
            schedule,
            horizon: c(0.25),
            burn_in: c(0.01),
            samples: 250,
            slack: c(4.0),
        }
    }

    /// Uniform grid on `[0, horizon]` refined geometrically near `t = 0` down
    /// to the microscopic time `1/n²`, where the functionals move fastest.
    pub fn times(&self, n: usize) -> Vec<T> {
        let nf = T::from_usize_lossy(n);
        let h = self.horizon / T::from_usize_lossy(self.samples);
        let mut ts: Vec<T> = (0..=self.samples).map(|k| h * T::from_usize_lossy(k)).collect();
        let mut s = c::<T>(0.01) / (nf * nf);
        while s < h {
            ts.push(s);
            s = s * c(1.5);
        }
        if !ts.contains(&self.burn_in) && self.burn_in <= self.horizon {
            ts.push(self.burn_in);
        }
        ts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SeriesPoint<T> {
    pub t: T,
    #[serde(flatten)]
    pub report: FisherReport<T>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScanRow<T> {
    pub n: usize,
    pub sup_entropy_per_site: T,
    /// `n ∫₀ᵗ Dp ds`
    pub scaled_dp_integral: T,
    /// `n sup_{t ≥ t₀} I_n`
    pub scaled_sup_in: T,
    /// `Dr ≤ 2 Dp̃ + 2 I_n` at every evaluation time.
    pub young_bound_holds: bool,
    /// Fraction of intervals with `I_n` above twice its late-time level on
    /// which `I_n` decreases (`None` when no interval qualifies).
    pub drift_decrease_fraction: Option<f64>,
    pub series: Vec<SeriesPoint<T>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ColumnVerdict<T> {
    pub name: &'static str,
    pub min: T,
    pub max: T,
    pub ratio: T,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScanReport<T> {
    pub rows: Vec<ScanRow<T>>,
    pub verdicts: Vec<ColumnVerdict<T>>,
}

impl<T: Real> ScanReport<T> {
    pub fn all_bounded(&self) -> bool {
        self.verdicts.iter().all(|v| v.bounded)
    }
}

fn trapezoid<T: Real>(ts: &[T], ys: &[T]) -> T {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| (t[1] - t[0]) * (y[0] + y[1]) * c(0.5))
        .sum()
}

pub fn scan_one<T: Real>(protocol: &ScanProtocol<T>, n: usize) -> Result<ScanRow<T>> {
    let model = LinearModel::build(n, protocol.gamma, &protocol.profile, protocol.schedule)?;
    let taus = vec![protocol.initial_tension; n];
    let start = GaussianMoments::tilted_gibbs(&model.betas, &taus);
    let times = protocol.times(n);
    let states = evolve_moments(&model, &start, &times)?;
    let series = times
        .iter()
        .zip(&states)
        .map(|(&t, g)| Ok(SeriesPoint { t, report: fisher_functionals(g, &model.betas)? }))
        .collect::<Result<Vec<_>>>()?;
    let nf = T::from_usize_lossy(n);
    let sup_h = series.iter().map(|s| s.report.entropy).fold(T::zero(), T::max) / nf;
    let dps: Vec<T> = series.iter().map(|s| s.report.dp).collect();
    let int_dp = trapezoid(&times, &dps) * nf;
    let late: Vec<&SeriesPoint<T>> = series.iter().filter(|s| s.t >= protocol.burn_in).collect();
    let sup_in = late.iter().map(|s| s.report.i_n).fold(T::zero(), T::max) * nf;
    let slack = c::<T>(1e-10);
    let young = series.iter().all(|s| {
        let r = &s.report;
        r.dr <= (r.dp_tilde + r.i_n) * c(2.0) + slack * (T::one() + r.dr.abs())
    });
    let mut tail: Vec<T> = late[late.len() / 2..].iter().map(|s| s.report.i_n).collect();
    tail.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let level = tail.get(tail.len() / 2).copied().unwrap_or(T::zero()) * c(2.0);
    let (mut qualifying, mut decreasing) = (0usize, 0usize);
    for w in series.windows(2) {
        if w[0].report.i_n > level + w[0].report.dp_tilde / (nf * nf) {
            qualifying += 1;
            if w[1].report.i_n < w[0].report.i_n {
                decreasing += 1;
            }
        }
    }
    Ok(ScanRow {
        n,
        sup_entropy_per_site: sup_h,
        scaled_dp_integral: int_dp,
        scaled_sup_in: sup_in,
        young_bound_holds: young,
        drift_decrease_fraction: (qualifying > 0).then(|| decreasing as f64 / qualifying as f64),
        series,
    })
}

/// Runs the protocol for each `n` and checks that each scaled column stays
/// within a factor `slack` across `n`.
pub fn bound_scan<T: Real>(protocol: &ScanProtocol<T>, n_list: &[usize]) -> Result<ScanReport<T>> {
    use rayon::prelude::*;
    let rows = n_list
        .par_iter()
        .map(|&n| scan_one(protocol, n))
        .collect::<Result<Vec<_>>>()?;
    let column = |name: &'static str, f: &dyn Fn(&ScanRow<T>) -> T| {
        let vals: Vec<T> = rows.iter().map(f).collect();
        let min = vals.iter().copied().fold(T::infinity(), T::min);
        let max = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let negligible = max <= c(1e-12);
        let ratio = if negligible { T::one() } else { max / min };
        ColumnVerdict {
            name,
            min,
            max,
            ratio,
            bounded: negligible || (min > T::zero() && ratio <= protocol.slack),
        }
    };
    let verdicts = vec![
        column("sup_entropy_per_site", &|r| r.sup_entropy_per_site),
        column("scaled_dp_integral", &|r| r.scaled_dp_integral),
        column("scaled_sup_in", &|r| r.scaled_sup_in),
    ];
    Ok(ScanReport { rows, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> LinearModel<f64> {
        LinearModel::build(n, 1.0, &TemperatureProfile::Constant { temperature: 1.0 }, TensionSchedule::Constant { tau: 0.0 }).unwrap()
    }

    #[test]
    fn single_site_model() {
        let m = LinearModel::build(1, 0.7, &TemperatureProfile::Constant { temperature: 2.0 }, TensionSchedule::Constant { tau: 0.3 }).unwrap();
        let a = m.drift_matrix();
        assert_eq!(a.as_slice(), &[0.0, 1.0, -1.0, -0.7]);
        assert_eq!(m.forcing(0.0), vec![0.0, 0.3]);
        assert_eq!(m.noise_diagonal(), &[0.0, 2.0 * 0.7 * 2.0]);
    }

    #[test]
    fn rows_transcribe_the_chain() {
        let n = 4;
        let m = LinearModel::build(n, 1.5, &TemperatureProfile::default(), TensionSchedule::Constant { tau: 0.2 }).unwrap();
        let a = m.drift_matrix();
        let x: Vec<f64> = (0..2 * n).map(|k| (k as f64 * 0.37).sin()).collect();
        let ax = a.matvec(&x);
        let s = (n * n) as f64;
        let (r, p) = x.split_at(n);
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { p[i - 1] };
            assert!((ax[i] - s * (p[i] - left)).abs() < 1e-12);
            let next = if i + 1 < n { r[i + 1] } else { 0.0 };
            assert!((ax[n + i] - (s * (next - r[i]) - 1.5 * s * p[i])).abs() < 1e-12);
        }
        // the first stretch row has no p₀ entry
        assert_eq!((0..2 * n).filter(|&j| a[(0, j)] != 0.0).count(), 1);
        assert_eq!(m.norm_inf(), 3.5 * s);
    }

    #[test]
    fn hamiltonian_part_preserves_energy_form() {
        let n = 5;
        let m = LinearModel::build(n, 0.0, &TemperatureProfile::Constant { temperature: 1.0 }, TensionSchedule::Constant { tau: 0.0 }).unwrap();
        let a = m.drift_matrix();
        let e = Matrix::<f64>::identity(2 * n);
        let s = a.transpose().matmul(&e);
        let t = e.matmul(&a);
        for i in 0..2 * n {
            for j in 0..2 * n {
                assert!((s[(i, j)] + t[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let m = uniform(6);
        let g0 = GaussianMoments::reference(&m.betas);
        assert!(m.lyapunov_residual(&g0.cov) < 1e-12);
        let g = evolve_moments(&m, &g0, &[0.01, 0.05]).unwrap();
        for gi in &g {
            assert!(gi.mean.iter().all(|x| x.abs() < 1e-10));
            for (x, y) in gi.cov.as_slice().iter().zip(g0.cov.as_slice()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        let f = fisher_functionals(&g[1], &m.betas).unwrap();
        assert!(f.entropy.abs() < 1e-10 && f.dp.abs() < 1e-10 && f.i_n.abs() < 1e-10);
    }

    #[test]
    fn single_site_relaxes_to_bath() {
        let m = LinearModel::build(1, 1.0, &TemperatureProfile::Constant { temperature: 0.5 }, TensionSchedule::Constant { tau: 0.0 }).unwrap();
        let g0 = GaussianMoments {
            mean: vec![1.0, 0.0],
            cov: Matrix::<f64>::identity(2),
        };
        let g = evolve_moments(&m, &g0, &[40.0]).unwrap().pop().unwrap();
        assert!((g.cov[(1, 1)] - 0.5).abs() < 1e-8);
        assert!(m.lyapunov_residual(&g.cov) < 1e-8);
    }

    #[test]
    fn entropy_closed_forms() {
        let g = GaussianMoments::<f64> {
            mean: vec![0.0, 0.6],
            cov: Matrix::identity(2),
        };
        assert!((relative_entropy(&g, &[1.0]).unwrap() - 0.18).abs() < 1e-15);
        assert!(relative_entropy(&GaussianMoments::<f64>::reference(&[2.0, 3.0]), &[2.0, 3.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn shifted_velocity_by_hand() {
        let mp = 0.8;
        let mut g = GaussianMoments::<f64>::reference(&[1.0, 1.0]);
        g.mean[2] = mp;
        let f = fisher_functionals(&g, &[1.0, 1.0]).unwrap();
        assert!((f.dp_tilde - mp * mp).abs() < 1e-14);
        assert!(f.dr.abs() < 1e-14);
        assert!((f.i_n - mp * mp).abs() < 1e-14);
        assert!((f.dp - mp * mp).abs() < 1e-14);
    }

    #[test]
    fn tilted_gibbs_has_zero_fisher_information() {
        let n = 16;
        let betas: Vec<f64> = TemperatureProfile::default().sites(n);
        let taus: Vec<f64> = (1..=n).map(|i| (i as f64 / n as f64 * 2.0).sin() * 0.7).collect();
        assert!(tilted_gibbs_in(&betas, &taus).unwrap().abs() < 1e-12);
        // without the velocity tilt the gradient of βτ shows up
        let mut g = GaussianMoments::tilted_gibbs(&betas, &taus);
        g.mean[n..].iter_mut().for_each(|x| *x = 0.0);
        assert!(fisher_functionals(&g, &betas).unwrap().i_n > 1e-6);
        // constant βτ needs no tilt
        let flat: Vec<f64> = betas.iter().map(|b| 0.3 / b).collect();
        let mut g = GaussianMoments::tilted_gibbs(&betas, &flat);
        assert!(g.mean[n..].iter().all(|x| x.abs() < 1e-15));
        g.mean[n..].iter_mut().for_each(|x| *x = 0.0);
        assert!(fisher_functionals(&g, &betas).unwrap().i_n.abs() < 1e-12);
    }

    #[test]
    fn decomposition_and_cauchy_schwarz() {
        let n = 5;
        let m = LinearModel::build(n, 1.0, &TemperatureProfile::default(), TensionSchedule::default()).unwrap();
        let g0 = GaussianMoments::tilted_gibbs(&m.betas, &vec![0.2; n]);
        let g = evolve_moments(&m, &g0, &[0.003, 0.05]).unwrap();
        for gi in &g {
            let f: FisherReport<f64> = fisher_functionals(gi, &m.betas).unwrap();
            let sum = f.dp_tilde + f.dr + 2.0 * f.cross;
            assert!((f.i_n - sum).abs() <= 1e-12 * f.i_n.abs().max(1e-300) + 1e-15, "{f:?}");
            assert!(f.cross * f.cross <= f.dp_tilde * f.dr * (1.0 + 1e-10));
            assert!(f.entropy > 0.0 && f.dp > 0.0 && f.dr >= 0.0 && f.i_n >= 0.0);
        }
    }

    #[test]
    fn quench_scan_is_bounded() {
        let mut p = ScanProtocol::<f64>::quench();
        p.samples = 60;
        let rep = bound_scan(&p, &[4, 8]).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!(rep.rows.iter().all(|r| r.young_bound_holds));
        assert!(rep.rows[0].sup_entropy_per_site > 0.0);
    }

    #[test]
    fn equilibrium_scan_is_trivial() {
        let mut p = ScanProtocol::<f64>::quench();
        p.profile = TemperatureProfile::Constant { temperature: 1.0 };
        p.schedule = TensionSchedule::Constant { tau: 0.0 };
        p.initial_tension = 0.0;
        p.samples = 10;
        p.horizon = 0.02;
        let rep = bound_scan(&p, &[4, 8]).unwrap();
        assert!(rep.all_bounded());
        for r in &rep.rows {
            assert!(r.scaled_sup_in < 1e-12 && r.sup_entropy_per_site < 1e-12);
        }
    }
}
