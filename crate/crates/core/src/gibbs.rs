//! Single-site Gibbs thermostatics of the tilted measure
//! `e^{−β(V(r) − τr)} dr`.
//!
//! Everything is computed from one vector-valued quadrature of the tilted
//! density ([`SiteMoments`]); derivatives in `τ` come from covariance
//! identities, never from differencing. [`GibbsTable`] caches the results on
//! a `(β, τ)` grid for the PDE solver.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::scalar::{c, Real};

/// Moments of the normalized tilted density at one `(τ, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMoments<T> {
    pub tau: T,
    pub beta: T,
    /// `log ∫ e^{−β(V − τr)} dr`
    pub log_partition: T,
    pub mean_r: T,
    pub var_r: T,
    /// `⟨V⟩`
    pub mean_v: T,
    /// `Cov(V, r)`
    pub cov_vr: T,
}

impl<T: Real> SiteMoments<T> {
    /// `G(τ, β) = log √(2π/β) + log ∫ e^{−β(V − τr)} dr`
    pub fn gibbs_potential(&self) -> T {
        c::<T>(0.5) * (T::TAU() / self.beta).ln() + self.log_partition
    }

    /// `u = 1/(2β) + ⟨V⟩`
    pub fn mean_energy(&self) -> T {
        (c::<T>(2.0) * self.beta).recip() + self.mean_v
    }
}

#[derive(Debug, Clone)]
pub struct GibbsSolver<T> {
    pub potential: Potential<T>,
    pub quadrature: QuadratureOptions<T>,
    /// Multiplies the automatically chosen integration half-widths.
    pub domain_scale: T,
    /// Log-depth of the tail cut: the integrand at the ends is below
    /// `e^{−tail_depth}` times its maximum.
    pub tail_depth: T,
    pub inversion_tol: T,
}

impl<T: Real> GibbsSolver<T> {
    pub fn new(potential: Potential<T>) -> Self {
        Self {
            potential,
            quadrature: QuadratureOptions::default(),
            domain_scale: T::one(),
            tail_depth: c(40.0),
            inversion_tol: c::<T>(1e-11).max(T::epsilon() * c(1e3)),
        }
    }

    fn check_args(tau: T, beta: T) -> Result<()> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if !tau.is_finite() {
            return Err(Error::Domain(format!("non-finite tension {tau}")));
        }
        Ok(())
    }

    /// Solves `V'(r) = τ` for the mode of the tilted density.
    fn mode(&self, tau: T) -> Result<T> {
        let pot = &self.potential;
        let g = |r: T| pot.derivative(r) - tau;
        let mut lo = -T::one();
        let mut hi = T::one();
        let mut iters = 0;
        while g(lo) > T::zero() {
            lo = lo * c(2.0);
            iters += 1;
            if iters > 200 {
                return Err(Error::Domain(format!("cannot bracket mode for tau = {tau}")));
            }
        }
        while g(hi) < T::zero() {
            hi = hi * c(2.0);
            iters += 1;
            if iters > 200 {
                return Err(Error::Domain(format!("cannot bracket mode for tau = {tau}")));
            }
        }
        for _ in 0..200 {
            let mid = (lo + hi) * c(0.5);
            if !(mid > lo && mid < hi) {
                break;
            }
            if g(mid) < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) * c(0.5))
    }

    /// Quadrature of the tilted density and its first moments.
    pub fn moments(&self, tau: T, beta: T) -> Result<SiteMoments<T>> {
        Self::check_args(tau, beta)?;
        let pot = self.potential;
        let center = self.mode(tau)?;
        let phi = |r: T| beta * (pot.energy(r) - tau * r);
        let phi0 = phi(center);
        let v0 = pot.energy(center);

        let reach = |dir: T| -> Result<T> {
            let mut l = (beta.recip()).sqrt().max(c(0.5));
            for _ in 0..80 {
                let x = center + dir * l;
                if phi(x) - phi0 > self.tail_depth && phi(center + dir * l * c(2.0)) - phi0 > self.tail_depth {
                    return Ok(l);
                }
                l = l * c(2.0);
            }
            Err(Error::Quadrature(format!(
                "tilted density does not decay (tau = {tau}, beta = {beta})"
            )))
        };
        let left = reach(-T::one())? * self.domain_scale;
        let right = reach(T::one())? * self.domain_scale;

        let integrand = |r: T| -> [T; 5] {
            let w = (phi0 - phi(r)).exp();
            let d = r - center;
            let dv = pot.energy(r) - v0;
            [w, w * d, w * d * d, w * dv, w * dv * d]
        };
        let mut opts = self.quadrature;
        let mut result = integrate(integrand, center - left, center + right, &opts);
        // One retry with a finer initial partition before giving up.
        if result.is_err() {
            opts.initial_segments *= 8;
            opts.max_segments *= 4;
            result = integrate(integrand, center - left, center + right, &opts);
        }
        let q = result.map_err(|e| {
            Error::Quadrature(format!("tau = {tau}, beta = {beta}, window [{}, {}]: {e}", center - left, center + right))
        })?;
        let [z, s1, s2, sv, svd] = q.value;
        let m1 = s1 / z;
        let m2 = s2 / z;
        let mv = sv / z;
        Ok(SiteMoments {
            tau,
            beta,
            log_partition: z.ln() - phi0,
            mean_r: center + m1,
            var_r: (m2 - m1 * m1).max(T::zero()),
            mean_v: v0 + mv,
            cov_vr: svd / z - mv * m1,
        })
    }

    pub fn gibbs_potential(&self, tau: T, beta: T) -> Result<T> {
        Ok(self.moments(tau, beta)?.gibbs_potential())
    }

    /// Equilibrium mean stretch `𝔯(τ, β)`.
    pub fn mean_stretch(&self, tau: T, beta: T) -> Result<T> {
        Ok(self.moments(tau, beta)?.mean_r)
    }

    pub fn mean_energy(&self, tau: T, beta: T) -> Result<T> {
        Ok(self.moments(tau, beta)?.mean_energy())
    }

    /// Inverts `𝔯(·, β)`: returns the tension `τ` with `𝔯(τ, β) = r`
    /// together with the moments at that tension.
    pub fn tension_moments(&self, r: T, beta: T) -> Result<SiteMoments<T>> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("non-finite stretch {r}")));
        }
        Self::check_args(T::zero(), beta)?;
        let limit = c::<T>(1e6);
        let mut tau = self.potential.derivative(r).max(-limit).min(limit);
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        let mut step = T::one();
        for _ in 0..200 {
            let m = self.moments(tau, beta)?;
            let resid = m.mean_r - r;
            if resid.abs() <= self.inversion_tol * (T::one() + r.abs()).min(c(10.0)) {
                return Ok(m);
            }
            if resid < T::zero() {
                lo = lo.max(tau);
            } else {
                hi = hi.min(tau);
            }
            let slope = beta * m.var_r;
            let newton = tau - resid / slope;
            let next = if slope > T::zero() && newton.is_finite() && newton > lo && newton < hi {
                newton
            } else if lo.is_finite() && hi.is_finite() {
                (lo + hi) * c(0.5)
            } else if lo.is_finite() {
                step = step * c(2.0);
                lo + step
            } else {
                step = step * c(2.0);
                hi - step
            };
            if next.abs() > limit {
                return Err(Error::Inversion(format!(
                    "bracket for r = {r}, beta = {beta} escapes |tau| <= 1e6"
                )));
            }
            if lo.is_finite() && hi.is_finite() && hi - lo <= T::epsilon() * (T::one() + tau.abs()) * c(4.0) {
                return Ok(m);
            }
            tau = next;
        }
        Err(Error::Inversion(format!("no convergence for r = {r}, beta = {beta}")))
    }

    /// Tension `𝝉(r, β) = ∂_r F(r, β)`.
    pub fn tension(&self, r: T, beta: T) -> Result<T> {
        Ok(self.tension_moments(r, beta)?.tau)
    }

    /// `F(r, β) = τ*r − β⁻¹G(τ*, β)`
    pub fn free_energy(&self, r: T, beta: T) -> Result<T> {
        let m = self.tension_moments(r, beta)?;
        Ok(m.tau * r - m.gibbs_potential() / beta)
    }

    /// Thermodynamic entropy `S(r, β) = β(u − F)`.
    pub fn entropy(&self, r: T, beta: T) -> Result<T> {
        let m = self.tension_moments(r, beta)?;
        let f = m.tau * r - m.gibbs_potential() / beta;
        Ok(beta * (m.mean_energy() - f))
    }
}

/// Cached thermostatics for one inverse temperature.
#[derive(Debug, Clone)]
pub struct GibbsColumn<T> {
    pub beta: T,
    /// `G` and `∂_τ G = β𝔯`
    pub g: Vec<T>,
    pub dg: Vec<T>,
    /// `𝔯` and `∂_τ𝔯 = β Var(r)`
    pub r: Vec<T>,
    pub dr: Vec<T>,
    /// `u` and `∂_τ u = β Cov(V, r)`
    pub u: Vec<T>,
    pub du: Vec<T>,
}

/// Tension/β grid of thermostatic values with cubic Hermite interpolation
/// in `τ` (and in `r` for the inverse map) and linear interpolation across
/// β columns.
#[derive(Debug, Clone)]
pub struct GibbsTable<T> {
    pub potential: Potential<T>,
    pub tau_min: T,
    pub tau_step: T,
    pub knots: usize,
    pub columns: Vec<GibbsColumn<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSpec<T> {
    pub tau_min: T,
    pub tau_max: T,
    pub knots: usize,
}

impl<T: Real> TableSpec<T> {
    /// Covers `[lo, hi]` widened by a factor 1.5 about its center, with a
    /// minimum half-width `min_half` and knot spacing at most `h`.
    pub fn covering(lo: T, hi: T, min_half: T, h: T) -> Self {
        let center = (lo + hi) * c(0.5);
        let half = ((hi - lo) * c(0.75)).max(min_half);
        let knots = ((half * c(2.0) / h).ceil().to_usize().unwrap_or(2) + 1).max(4);
        Self {
            tau_min: center - half,
            tau_max: center + half,
            knots,
        }
    }
}

#[inline]
fn hermite<T: Real>(t: T, h: T, y0: T, y1: T, d0: T, d1: T) -> T {
    let t2 = t * t;
    let t3 = t2 * t;
    let two = c::<T>(2.0);
    let three = c::<T>(3.0);
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

#[inline]
fn hermite_slope<T: Real>(t: T, h: T, y0: T, y1: T, d0: T, d1: T) -> T {
    let t2 = t * t;
    let six = c::<T>(6.0);
    let d00 = six * t2 - six * t;
    let d10 = c::<T>(3.0) * t2 - c::<T>(4.0) * t + T::one();
    let d01 = six * t - six * t2;
    let d11 = c::<T>(3.0) * t2 - c::<T>(2.0) * t;
    (d00 * y0 + d01 * y1) / h + d10 * d0 + d11 * d1
}

impl<T: Real> GibbsTable<T> {
    /// Builds one column per distinct β (sorted ascending).
    pub fn build(solver: &GibbsSolver<T>, betas: &[T], spec: TableSpec<T>) -> Result<Self> {
        if spec.knots < 4 || !(spec.tau_max > spec.tau_min) {
            return Err(Error::Config(format!("bad table spec {spec:?}")));
        }
        let mut bs: Vec<T> = betas.to_vec();
        bs.sort_by(|a, b| a.partial_cmp(b).expect("finite beta"));
        bs.dedup();
        let step = (spec.tau_max - spec.tau_min) / T::from_usize_lossy(spec.knots - 1);
        let taus: Vec<T> = (0..spec.knots)
            .map(|k| spec.tau_min + step * T::from_usize_lossy(k))
            .collect();
        let columns = bs
            .par_iter()
            .map(|&beta| -> Result<GibbsColumn<T>> {
                let mut col = GibbsColumn {
                    beta,
                    g: Vec::with_capacity(spec.knots),
                    dg: Vec::with_capacity(spec.knots),
                    r: Vec::with_capacity(spec.knots),
                    dr: Vec::with_capacity(spec.knots),
                    u: Vec::with_capacity(spec.knots),
                    du: Vec::with_capacity(spec.knots),
                };
                for &tau in &taus {
                    let m = solver.moments(tau, beta)?;
                    col.g.push(m.gibbs_potential());
                    col.dg.push(beta * m.mean_r);
                    col.r.push(m.mean_r);
                    col.dr.push(beta * m.var_r);
                    col.u.push(m.mean_energy());
                    col.du.push(beta * m.cov_vr);
                }
                Ok(col)
            })
            .collect::<Result<Vec<_>>>()?;
        let table = Self {
            potential: solver.potential,
            tau_min: spec.tau_min,
            tau_step: step,
            knots: spec.knots,
            columns,
        };
        if let Some((k, col)) = table.first_non_monotone() {
            return Err(Error::Numeric(format!(
                "mean stretch not increasing at knot {k} of column beta = {}",
                table.columns[col].beta
            )));
        }
        Ok(table)
    }

    pub fn tau_max(&self) -> T {
        self.tau_min + self.tau_step * T::from_usize_lossy(self.knots - 1)
    }

    pub fn tau_at(&self, k: usize) -> T {
        self.tau_min + self.tau_step * T::from_usize_lossy(k)
    }

    fn first_non_monotone(&self) -> Option<(usize, usize)> {
        for (ci, col) in self.columns.iter().enumerate() {
            for k in 0..self.knots - 1 {
                if !(col.r[k + 1] > col.r[k]) {
                    return Some((k, ci));
                }
            }
        }
        None
    }

    /// Index of the column whose β equals `beta` up to round-off.
    pub fn column_index(&self, beta: T) -> Option<usize> {
        let idx = self
            .columns
            .partition_point(|col| col.beta < beta - beta.abs() * c(1e-12));
        (idx < self.columns.len()
            && (self.columns[idx].beta - beta).abs() <= beta.abs() * c(1e-12))
        .then_some(idx)
    }

    fn locate_tau(&self, tau: T) -> Result<(usize, T)> {
        let hi = self.tau_max();
        if !(tau >= self.tau_min && tau <= hi) {
            return Err(Error::TableMiss {
                what: "tau",
                value: tau.to_f64_lossy(),
                lo: self.tau_min.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        let s = (tau - self.tau_min) / self.tau_step;
        let k = s.floor().to_usize().unwrap_or(0).min(self.knots - 2);
        Ok((k, s - T::from_usize_lossy(k)))
    }

    fn interp_tau(&self, col: usize, tau: T, y: impl Fn(&GibbsColumn<T>) -> (&[T], &[T])) -> Result<T> {
        let (k, t) = self.locate_tau(tau)?;
        let (v, d) = y(&self.columns[col]);
        Ok(hermite(t, self.tau_step, v[k], v[k + 1], d[k], d[k + 1]))
    }

    pub fn mean_stretch_col(&self, col: usize, tau: T) -> Result<T> {
        self.interp_tau(col, tau, |c| (&c.r, &c.dr))
    }

    pub fn gibbs_potential_col(&self, col: usize, tau: T) -> Result<T> {
        self.interp_tau(col, tau, |c| (&c.g, &c.dg))
    }

    pub fn mean_energy_col(&self, col: usize, tau: T) -> Result<T> {
        self.interp_tau(col, tau, |c| (&c.u, &c.du))
    }

    /// `𝝉(r, β_col)` by Hermite interpolation of the inverse map on the
    /// stretch knots.
    #[inline]
    pub fn tension_col(&self, col: usize, r: T) -> Result<T> {
        Ok(self.tension_slope_col(col, r)?.0)
    }

    /// `(𝝉, ∂_r𝝉)` at `(r, β_col)`.
    pub fn tension_slope_col(&self, col: usize, r: T) -> Result<(T, T)> {
        let mut hint = usize::MAX;
        self.tension_slope_hinted(col, r, &mut hint)
    }

    /// Like [`Self::tension_col`], starting the knot search at `hint` (the
    /// interval found by the previous call for this cell).
    #[inline]
    pub fn tension_hinted(&self, col: usize, r: T, hint: &mut usize) -> Result<T> {
        Ok(self.tension_slope_hinted(col, r, hint)?.0)
    }

    pub fn tension_slope_hinted(&self, col: usize, r: T, hint: &mut usize) -> Result<(T, T)> {
        let cdat = &self.columns[col];
        let n = self.knots;
        if !(r >= cdat.r[0] && r <= cdat.r[n - 1]) {
            return Err(Error::TableMiss {
                what: "r",
                value: r.to_f64_lossy(),
                lo: cdat.r[0].to_f64_lossy(),
                hi: cdat.r[n - 1].to_f64_lossy(),
            });
        }
        let k = if *hint < n - 1 && cdat.r[*hint] <= r && r <= cdat.r[*hint + 1] {
            *hint
        } else {
            cdat.r.partition_point(|&x| x <= r).clamp(1, n - 1) - 1
        };
        *hint = k;
        let h = cdat.r[k + 1] - cdat.r[k];
        let t = (r - cdat.r[k]) / h;
        let (t0, t1) = (self.tau_at(k), self.tau_at(k + 1));
        let (s0, s1) = (cdat.dr[k].recip(), cdat.dr[k + 1].recip());
        Ok((hermite(t, h, t0, t1, s0, s1), hermite_slope(t, h, t0, t1, s0, s1)))
    }

    /// Stretch whose interpolated tension [`Self::tension_col`] is exactly
    /// `tau`. The forward interpolant [`Self::mean_stretch_col`] agrees with
    /// it only to interpolation accuracy, so it serves as the Newton start.
    pub fn stretch_for_tension_col(&self, col: usize, tau: T) -> Result<T> {
        let (lo, hi) = self.stretch_range_col(col);
        let mut r = self.mean_stretch_col(col, tau)?;
        let mut hint = usize::MAX;
        for _ in 0..20 {
            let (t, slope) = self.tension_slope_hinted(col, r, &mut hint)?;
            let next = (r - (t - tau) / slope).max(lo).min(hi);
            let step = (next - r).abs();
            r = next;
            if step <= c::<T>(4.0) * T::epsilon() * (T::one() + r.abs()) {
                break;
            }
        }
        Ok(r)
    }

    /// `F(r, β_col) = τr − G(τ)/β`.
    pub fn free_energy_col(&self, col: usize, r: T) -> Result<T> {
        let tau = self.tension_col(col, r)?;
        Ok(tau * r - self.gibbs_potential_col(col, tau)? / self.columns[col].beta)
    }

    /// `S(r, β_col) = β(u − F)`.
    pub fn entropy_col(&self, col: usize, r: T) -> Result<T> {
        let tau = self.tension_col(col, r)?;
        let beta = self.columns[col].beta;
        let f = tau * r - self.gibbs_potential_col(col, tau)? / beta;
        Ok(beta * (self.mean_energy_col(col, tau)? - f))
    }

    /// Upper bound on `∂_r𝝉` over the column's range, from knot slopes and
    /// knot-to-knot differences.
    pub fn max_tension_slope_col(&self, col: usize) -> T {
        let cdat = &self.columns[col];
        let mut s = T::zero();
        for k in 0..self.knots {
            s = s.max(cdat.dr[k].recip());
            if k + 1 < self.knots {
                s = s.max(self.tau_step / (cdat.r[k + 1] - cdat.r[k]));
            }
        }
        s
    }

    /// Stretch range covered by a column.
    pub fn stretch_range_col(&self, col: usize) -> (T, T) {
        let cdat = &self.columns[col];
        (cdat.r[0], cdat.r[self.knots - 1])
    }

    /// Linear-in-β blend of a column query, exact when β is a column.
    pub fn blend<F>(&self, beta: T, f: F) -> Result<T>
    where
        F: Fn(usize) -> Result<T>,
    {
        if let Some(i) = self.column_index(beta) {
            return f(i);
        }
        let n = self.columns.len();
        let hi = self.columns.partition_point(|col| col.beta < beta);
        if hi == 0 || hi >= n {
            return Err(Error::TableMiss {
                what: "beta",
                value: beta.to_f64_lossy(),
                lo: self.columns[0].beta.to_f64_lossy(),
                hi: self.columns[n - 1].beta.to_f64_lossy(),
            });
        }
        let (b0, b1) = (self.columns[hi - 1].beta, self.columns[hi].beta);
        let w = (beta - b0) / (b1 - b0);
        Ok(f(hi - 1)? * (T::one() - w) + f(hi)? * w)
    }

    pub fn tension(&self, r: T, beta: T) -> Result<T> {
        self.blend(beta, |i| self.tension_col(i, r))
    }

    pub fn mean_stretch(&self, tau: T, beta: T) -> Result<T> {
        self.blend(beta, |i| self.mean_stretch_col(i, tau))
    }

    /// Largest deviation between the interpolated `𝔯` and direct quadrature
    /// at knot midpoints, over the given columns.
    pub fn midpoint_audit(&self, solver: &GibbsSolver<T>, columns: &[usize]) -> Result<T> {
        let mut worst = T::zero();
        for &ci in columns {
            let beta = self.columns[ci].beta;
            for k in 0..self.knots - 1 {
                let tau = self.tau_at(k) + self.tau_step * c(0.5);
                let direct = solver.mean_stretch(tau, beta)?;
                let interp = self.mean_stretch_col(ci, tau)?;
                worst = worst.max((direct - interp).abs());
            }
        }
        Ok(worst)
    }
}

/// Builds a table for the site or cell inverse temperatures `betas` and
/// audits it on its first, middle and last columns.
pub fn build_table<T: Real>(
    solver: &GibbsSolver<T>,
    betas: &[T],
    spec: TableSpec<T>,
    audit_tol: T,
) -> Result<Arc<GibbsTable<T>>> {
    let table = GibbsTable::build(solver, betas, spec)?;
    let n = table.columns.len();
    let mut cols = vec![0, n / 2, n - 1];
    cols.dedup();
    let worst = table.midpoint_audit(solver, &cols)?;
    if worst > audit_tol {
        return Err(Error::Numeric(format!(
            "table interpolation error {worst} exceeds {audit_tol}; increase resolution"
        )));
    }
    Ok(Arc::new(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn harmonic() -> GibbsSolver<f64> {
        GibbsSolver::new(Potential::Harmonic)
    }

    fn cosine() -> GibbsSolver<f64> {
        GibbsSolver::new(Potential::HarmonicCosine)
    }

    /// Plain trapezoid rule on [-30, 30] with 600k panels.
    fn trapezoid_moments(pot: Potential<f64>, tau: f64, beta: f64) -> (f64, f64, f64) {
        let n = 600_000;
        let (a, b) = (-30.0, 30.0);
        let h = (b - a) / n as f64;
        let (mut z, mut zr, mut zv) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let r = a + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let e = (-beta * (pot.energy(r) - tau * r)).exp() * w;
            z += e;
            zr += e * r;
            zv += e * pot.energy(r);
        }
        ((0.5 * (TAU / beta).ln()) + (z * h).ln(), zr / z, zv / z)
    }

    #[test]
    fn harmonic_gibbs_potential_closed_form() {
        let s = harmonic();
        assert!((s.gibbs_potential(0.0, 1.0).unwrap() - TAU.ln()).abs() < 1e-12);
        assert!((s.gibbs_potential(0.5, 1.0).unwrap() - (TAU.ln() + 0.125)).abs() < 1e-12);
        for &(tau, beta) in &[(0.3, 2.0), (-1.2, 0.5), (3.0, 1.7)] {
            let g = s.gibbs_potential(tau, beta).unwrap();
            let expect = (TAU / beta).ln() + beta * tau * tau / 2.0;
            assert!((g - expect).abs() < 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn cosine_gibbs_potential_against_trapezoid() {
        let (g, _, _) = trapezoid_moments(Potential::HarmonicCosine, 0.0, 1.0);
        let got = cosine().gibbs_potential(0.0, 1.0).unwrap();
        assert!((got - g).abs() < 1e-8, "{got} vs {g}");
    }

    #[test]
    fn mean_stretch_cases() {
        for beta in [0.5, 1.0, 3.0] {
            assert!((harmonic().mean_stretch(0.7, beta).unwrap() - 0.7).abs() < 1e-12);
        }
        assert!(cosine().mean_stretch(0.0, 1.3).unwrap().abs() < 1e-12);
        let s = cosine();
        let h = 1e-4;
        let fd = (s.gibbs_potential(0.3 + h, 2.0).unwrap() - s.gibbs_potential(0.3 - h, 2.0).unwrap()) / (2.0 * h) / 2.0;
        assert!((s.mean_stretch(0.3, 2.0).unwrap() - fd).abs() < 1e-6);
    }

    #[test]
    fn tension_inversion() {
        assert!((harmonic().tension(-0.4, 3.0).unwrap() + 0.4).abs() < 1e-10);
        assert!(cosine().tension(0.0, 1.0).unwrap().abs() < 1e-10);
        for pot in [Potential::<f64>::Harmonic, Potential::HarmonicCosine, Potential::PowerAlpha { alpha: 1.5 }] {
            let s = GibbsSolver::new(pot);
            for tau0 in [-1.0, 0.0, 1.0] {
                for beta in [0.5, 1.0, 2.0] {
                    let r = s.mean_stretch(tau0, beta).unwrap();
                    let m = s.tension_moments(r, beta).unwrap();
                    assert!((m.tau - tau0).abs() < 1e-8, "{} tau0 {tau0} beta {beta}: {}", pot.name(), m.tau);
                    assert!((m.mean_r - r).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn tension_equals_mean_force() {
        // E[V'(r)] = τ under the tilted law, by quadrature of V' directly.
        let s = cosine();
        let beta = 1.4;
        let m = s.tension_moments(0.8, beta).unwrap();
        let pot = Potential::HarmonicCosine;
        let opts = QuadratureOptions::default();
        let [z, f] = integrate(
            |r: f64| {
                let w = (-beta * (pot.energy(r) - m.tau * r)).exp();
                [w, w * pot.derivative(r)]
            },
            -40.0,
            40.0,
            &opts,
        )
        .unwrap()
        .value;
        assert!((f / z - m.tau).abs() < 1e-10);
    }

    #[test]
    fn free_energy_and_entropy() {
        let h = harmonic();
        for r in [-1.0, 0.0, 0.4, 2.0] {
            let f = h.free_energy(r, 1.0).unwrap();
            assert!((f - (r * r / 2.0 - TAU.ln())).abs() < 1e-10);
        }
        assert!((h.entropy(0.0, 1.0).unwrap() - (1.0 + TAU.ln())).abs() < 1e-10);

        let s = cosine();
        let (tau, beta) = (0.4, 1.5);
        let m = s.moments(tau, beta).unwrap();
        let f = s.free_energy(m.mean_r, beta).unwrap();
        assert!((f + m.gibbs_potential() / beta - tau * m.mean_r).abs() < 1e-9);
        let s_r = s.entropy(m.mean_r, beta).unwrap();
        let s_tau = beta * (m.mean_energy() - (tau * m.mean_r - m.gibbs_potential() / beta));
        assert!((s_r - s_tau).abs() < 1e-8);
    }

    #[test]
    fn entropy_temperature_identity() {
        // ∂S/∂u = β at fixed r, by differencing in β.
        let s = cosine();
        let r = 0.6;
        let beta = 1.2;
        let db = 1e-4;
        let (s1, s2) = (s.entropy(r, beta - db).unwrap(), s.entropy(r, beta + db).unwrap());
        let u = |b: f64| s.mean_energy(s.tension(r, b).unwrap(), b).unwrap();
        let ratio = (s2 - s1) / (u(beta + db) - u(beta - db));
        assert!((ratio - beta).abs() < 1e-4 * beta, "{ratio}");
    }

    #[test]
    fn mean_energy_cases() {
        let h = harmonic();
        assert!((h.mean_energy(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((h.mean_energy(1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let (_, _, mv) = trapezoid_moments(Potential::HarmonicCosine, 0.0, 1.0);
        assert!((cosine().mean_energy(0.0, 1.0).unwrap() - (0.5 + mv)).abs() < 1e-8);
    }

    #[test]
    fn domain_doubling_is_stable() {
        for pot in [Potential::<f64>::Harmonic, Potential::HarmonicCosine, Potential::PowerAlpha { alpha: 1.2 }] {
            let mut s = GibbsSolver::new(pot);
            let g1 = s.gibbs_potential(0.3, 0.7).unwrap();
            s.domain_scale = 2.0;
            let g2 = s.gibbs_potential(0.3, 0.7).unwrap();
            assert!((g1 - g2).abs() <= 1e-12, "{}: {g1} vs {g2}", pot.name());
        }
    }

    #[test]
    fn bad_arguments() {
        assert!(matches!(harmonic().gibbs_potential(0.0, 0.0), Err(Error::Domain(_))));
        assert!(harmonic().tension(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn legendre_duality_by_differencing() {
        let s = cosine();
        let beta = 0.8;
        for r in [-1.0, 0.3, 1.5] {
            let h = 1e-4;
            let fd = (s.free_energy(r + h, beta).unwrap() - s.free_energy(r - h, beta).unwrap()) / (2.0 * h);
            let tau = s.tension(r, beta).unwrap();
            assert!((fd - tau).abs() <= 1e-5 * tau.abs().max(1e-2), "r {r}: {fd} vs {tau}");
        }
    }

    #[test]
    fn harmonic_table_is_exact() {
        let betas: Vec<f64> = (0..5).map(|i| 1.0 / (1.0 + 0.125 * i as f64)).collect();
        let spec = TableSpec::covering(-1.0, 1.0, 0.5, 0.05);
        let t = build_table(&harmonic(), &betas, spec, 1e-6).unwrap();
        for ci in 0..t.columns.len() {
            for k in 0..40 {
                let r = -1.2 + 0.06 * k as f64;
                assert!((t.tension_col(ci, r).unwrap() - r).abs() < 1e-8);
            }
        }
        // between columns too
        assert!((t.tension(0.3, 0.95).unwrap() - 0.3).abs() < 1e-8);
    }

    #[test]
    fn cosine_table_audit_and_monotone() {
        let betas = [0.6, 0.8, 1.0];
        let spec = TableSpec::covering(-0.5, 1.0, 0.5, 0.02);
        let s = cosine();
        let t = build_table(&s, &betas, spec, 1e-6).unwrap();
        assert!(t.midpoint_audit(&s, &[0, 1, 2]).unwrap() <= 1e-6);
        for col in &t.columns {
            assert!(col.r.windows(2).all(|w| w[1] > w[0]));
        }
        // inverse map agrees with direct inversion
        for r in [-0.5, 0.0, 0.35, 0.9] {
            let direct = s.tension(r, 0.8).unwrap();
            assert!((t.tension_col(1, r).unwrap() - direct).abs() < 1e-6);
            let fd = s.free_energy(r, 0.8).unwrap();
            assert!((t.free_energy_col(1, r).unwrap() - fd).abs() < 1e-6);
        }
        // exact inverse of the tension interpolant
        for tau in [-0.45, -0.1, 0.33, 0.97] {
            let r = t.stretch_for_tension_col(2, tau).unwrap();
            assert!((t.tension_col(2, r).unwrap() - tau).abs() < 1e-14);
            assert!((r - t.mean_stretch_col(2, tau).unwrap()).abs() < 1e-6);
        }
        assert!(matches!(t.tension_col(0, 50.0), Err(Error::TableMiss { .. })));
        assert!(matches!(t.mean_stretch_col(0, 7.0), Err(Error::TableMiss { .. })));
        let _ = PI;
    }
}
