//! Langevin-thermostatted oscillator chain under diffusive scaling.
//!
//! ```text
//! dr_i = n²(p_i − p_{i−1}) dt                                  (p_0 ≡ 0)
//! dp_i = n²(V'(r_{i+1}) − V'(r_i)) dt − γn²p_i dt + n√(2γ/β_i) dw_i
//! dp_n = n²(τ̄(t) − V'(r_n)) dt − γn²p_n dt + n√(2γ/β_n) dw_n
//! ```
//!
//! One step is `OU(dt/2) ∘ H(dt) ∘ OU(dt/2)`. The thermostat halves are
//! sampled exactly. The Hamiltonian part is a discrete-gradient
//! (average-vector-field) step, which changes the chain energy by exactly
//! the boundary work `n²dt·τ̄·p̄_n`, so `ΔU = W + Q` holds on every path to
//! round-off when `Q` collects the kinetic energy change of the OU halves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gibbs::GibbsSolver;
use crate::potentials::Potential;
use crate::profiles::{TemperatureProfile, TensionSchedule};
use crate::scalar::{c, Real};

/// Static description of a chain experiment.
#[derive(Debug, Clone)]
pub struct ChainSetup<T> {
    pub n: usize,
    pub gamma: T,
    pub potential: Potential<T>,
    pub profile: TemperatureProfile,
    pub schedule: TensionSchedule,
    /// `dt = c_Δ / n²` in macroscopic time.
    pub c_delta: T,
    /// `false` switches the thermostat noise off (pure damping).
    pub noise: bool,
}

impl<T: Real> ChainSetup<T> {
    pub fn new(n: usize, potential: Potential<T>, profile: TemperatureProfile, schedule: TensionSchedule) -> Self {
        Self {
            n,
            gamma: T::one(),
            potential,
            profile,
            schedule,
            c_delta: c(0.1),
            noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("chain needs at least one site".into()));
        }
        if !(self.gamma > T::zero()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.c_delta > T::zero() && self.c_delta <= T::one()) {
            return Err(Error::Config(format!("c_delta {} outside (0, 1]", self.c_delta)));
        }
        self.profile.validate()?;
        self.schedule.validate()
    }

    pub fn dt(&self) -> T {
        let nf = T::from_usize_lossy(self.n);
        self.c_delta / (nf * nf)
    }

    pub fn site_betas(&self) -> Vec<T> {
        self.profile.sites(self.n)
    }
}

/// Pathwise energy bookkeeping, normalized by `1/n`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger<T> {
    pub initial_energy: T,
    pub work: T,
    pub heat: T,
    /// `Q` minus its drift part `−γnΣ∫(p_j² − β_j⁻¹)ds` (left Riemann sum).
    pub martingale_part: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T> {
    pub r: Vec<T>,
    pub p: Vec<T>,
    pub t: T,
    pub ledger: EnergyLedger<T>,
}

impl<T: Real> ChainState<T> {
    pub fn new(r: Vec<T>, p: Vec<T>, potential: &Potential<T>) -> Result<Self> {
        if r.len() != p.len() || r.is_empty() {
            return Err(Error::Config(format!("stretch/velocity lengths {} / {}", r.len(), p.len())));
        }
        let mut s = Self {
            r,
            p,
            t: T::zero(),
            ledger: EnergyLedger::default(),
        };
        s.ledger.initial_energy = s.internal_energy(potential);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    /// `U = (1/n) Σ (p_i²/2 + V(r_i))`
    pub fn internal_energy(&self, potential: &Potential<T>) -> T {
        let total: T = self
            .r
            .iter()
            .zip(&self.p)
            .map(|(&r, &p)| p * p * c(0.5) + potential.energy(r))
            .sum();
        total / T::from_usize_lossy(self.n())
    }

    /// `U(t) − U(0) − W − Q`
    pub fn ledger_residual(&self, potential: &Potential<T>) -> T {
        self.internal_energy(potential) - self.ledger.initial_energy - self.ledger.work - self.ledger.heat
    }

    /// Position of the last particle `q_n = Σ r_i`.
    pub fn length(&self) -> T {
        self.r.iter().copied().sum()
    }
}

/// Counter-based stream for replica `replica` of master seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[inline]
fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// Inverse-CDF sampler for one site's tilted Gibbs marginal
/// `e^{−β(V(r) − τr)}`, with a piecewise-linear density on a fine grid.
#[derive(Debug, Clone)]
pub enum SiteSampler<T> {
    Gaussian { mean: T, sd: T },
    Tabulated { grid: Vec<T>, density: Vec<T>, cdf: Vec<T> },
}

impl<T: Real> SiteSampler<T> {
    pub fn new(potential: &Potential<T>, tau: T, beta: T) -> Result<Self> {
        if let Potential::Harmonic = potential {
            return Ok(Self::Gaussian {
                mean: tau,
                sd: beta.recip().sqrt(),
            });
        }
        let solver = GibbsSolver::new(*potential);
        let m = solver.moments(tau, beta)?;
        let sd = m.var_r.sqrt();
        let phi = |r: T| beta * (potential.energy(r) - tau * r);
        // Bracket the mass: expand from the mean until the log-density has
        // fallen by 40 relative to its grid maximum.
        let phi_min = {
            let mut best = phi(m.mean_r);
            for k in -200..=200 {
                let x = m.mean_r + sd * T::lit(k as f64 * 0.05);
                best = best.min(phi(x));
            }
            best
        };
        let reach = |dir: T| {
            let mut l = sd * c(2.0);
            for _ in 0..60 {
                if phi(m.mean_r + dir * l) - phi_min > c(40.0) {
                    return Ok(l);
                }
                l = l * c(1.5);
            }
            Err(Error::Sampling(format!("tilted density at tau = {tau}, beta = {beta} does not decay")))
        };
        let lo = m.mean_r - reach(-T::one())?;
        let hi = m.mean_r + reach(T::one())?;
        let points = 8193;
        let h = (hi - lo) / T::from_usize_lossy(points - 1);
        let grid: Vec<T> = (0..points).map(|k| lo + h * T::from_usize_lossy(k)).collect();
        let density: Vec<T> = grid.iter().map(|&x| (phi_min - phi(x)).exp()).collect();
        let mut cdf = Vec::with_capacity(points);
        let mut acc = T::zero();
        cdf.push(acc);
        for k in 1..points {
            acc = acc + (density[k - 1] + density[k]) * h * c(0.5);
            cdf.push(acc);
        }
        if !(acc > T::zero() && acc.is_finite()) {
            return Err(Error::Sampling(format!("degenerate density at tau = {tau}, beta = {beta}")));
        }
        Ok(Self::Tabulated { grid, density, cdf })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> T {
        match self {
            Self::Gaussian { mean, sd } => *mean + *sd * normal::<T, R>(rng),
            Self::Tabulated { grid, density, cdf } => {
                let total = *cdf.last().expect("nonempty");
                let u = T::lit(rng.random::<f64>()) * total;
                let k = cdf.partition_point(|&x| x <= u).clamp(1, cdf.len() - 1) - 1;
                let h = grid[k + 1] - grid[k];
                let (f0, f1) = (density[k], density[k + 1]);
                let need = u - cdf[k];
                // Solve f0·s + (f1 − f0)s²/(2h) = need for s ∈ [0, h].
                let a = (f1 - f0) / (h * c(2.0));
                let s = if a.abs() <= T::epsilon() * f0.max(f1) / h {
                    need / f0.max(T::min_positive_value())
                } else {
                    let disc = (f0 * f0 + c::<T>(4.0) * a * need).max(T::zero());
                    c::<T>(2.0) * need / (f0 + disc.sqrt())
                };
                grid[k] + s.max(T::zero()).min(h)
            }
        }
    }
}

/// Per-site samplers for the product local Gibbs law with site tensions
/// `τ_i` and inverse temperatures `β_i`.
#[derive(Debug, Clone)]
pub struct LocalGibbsSampler<T> {
    sites: Vec<SiteSampler<T>>,
    betas: Vec<T>,
}

impl<T: Real> LocalGibbsSampler<T> {
    pub fn new(potential: &Potential<T>, taus: &[T], betas: &[T]) -> Result<Self> {
        if taus.len() != betas.len() {
            return Err(Error::Config("tension and temperature site counts differ".into()));
        }
        let sites = taus
            .iter()
            .zip(betas)
            .map(|(&t, &b)| SiteSampler::new(potential, t, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sites,
            betas: betas.to_vec(),
        })
    }

    /// Site tensions from a macroscopic tension profile `τ(x)`.
    pub fn from_tension_profile(setup: &ChainSetup<T>, tau: impl Fn(T) -> T) -> Result<Self> {
        let nf = T::from_usize_lossy(setup.n);
        let taus: Vec<T> = (1..=setup.n).map(|i| tau(T::from_usize_lossy(i) / nf)).collect();
        Self::new(&setup.potential, &taus, &setup.site_betas())
    }

    /// Site tensions `τ_i = 𝝉(r₀(i/n), β_i)` from a strain profile.
    pub fn from_strain_profile(setup: &ChainSetup<T>, r0: impl Fn(T) -> T) -> Result<Self> {
        let solver = GibbsSolver::new(setup.potential);
        let nf = T::from_usize_lossy(setup.n);
        let betas = setup.site_betas();
        let taus = (1..=setup.n)
            .map(|i| solver.tension(r0(T::from_usize_lossy(i) / nf), betas[i - 1]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&setup.potential, &taus, &betas)
    }

    pub fn sample<R: Rng>(&self, potential: &Potential<T>, rng: &mut R) -> Result<ChainState<T>> {
        let r: Vec<T> = self.sites.iter().map(|s| s.sample(rng)).collect();
        let p: Vec<T> = self
            .betas
            .iter()
            .map(|&b| b.recip().sqrt() * normal::<T, R>(rng))
            .collect();
        if let Some(i) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Sampling(format!("non-finite draw at site {}", i + 1)));
        }
        ChainState::new(r, p, potential)
    }
}

/// Samples the product local Gibbs state for a tension profile.
pub fn init_local_gibbs<T: Real, R: Rng>(
    setup: &ChainSetup<T>,
    tau: impl Fn(T) -> T,
    rng: &mut R,
) -> Result<ChainState<T>> {
    LocalGibbsSampler::from_tension_profile(setup, tau)?.sample(&setup.potential, rng)
}

/// Reusable integrator for one replica.
#[derive(Debug, Clone)]
pub struct ChainIntegrator<T> {
    setup: ChainSetup<T>,
    betas: Vec<T>,
    dt: T,
    ou_decay: T,
    ou_sd: Vec<T>,
    r_new: Vec<T>,
    p_new: Vec<T>,
    grad: Vec<T>,
    pub max_iterations: usize,
}

impl<T: Real> ChainIntegrator<T> {
    pub fn new(setup: &ChainSetup<T>) -> Result<Self> {
        setup.validate()?;
        let mut s = Self {
            setup: setup.clone(),
            betas: setup.site_betas(),
            dt: T::zero(),
            ou_decay: T::zero(),
            ou_sd: Vec::new(),
            r_new: vec![T::zero(); setup.n],
            p_new: vec![T::zero(); setup.n],
            grad: vec![T::zero(); setup.n],
            max_iterations: 100,
        };
        s.set_dt(setup.dt());
        Ok(s)
    }

    pub fn setup(&self) -> &ChainSetup<T> {
        &self.setup
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Changes the step (coefficients of the exact OU half-steps included).
    pub fn set_dt(&mut self, dt: T) {
        let nf = T::from_usize_lossy(self.setup.n);
        let rate = self.setup.gamma * nf * nf * dt;
        self.dt = dt;
        self.ou_decay = (-rate * c(0.5)).exp();
        let var_factor = -(-rate).exp_m1();
        self.ou_sd = self
            .betas
            .iter()
            .map(|&b| {
                if self.setup.noise {
                    (var_factor / b).sqrt()
                } else {
                    T::zero()
                }
            })
            .collect();
    }

    fn ou_half<R: Rng>(&self, state: &mut ChainState<T>, rng: &mut R) {
        let nf = T::from_usize_lossy(self.setup.n);
        let mut dk = T::zero();
        let mut drift = T::zero();
        for i in 0..state.p.len() {
            let p = state.p[i];
            let q = self.ou_decay * p + self.ou_sd[i] * normal::<T, R>(rng);
            dk = dk + (q * q - p * p) * c(0.5);
            let temp = if self.setup.noise { self.betas[i].recip() } else { T::zero() };
            drift = drift + (p * p - temp);
            state.p[i] = q;
        }
        let dq = dk / nf;
        state.ledger.heat = state.ledger.heat + dq;
        let drift_part = -self.setup.gamma * nf * drift * self.dt * c(0.5);
        state.ledger.martingale_part = state.ledger.martingale_part + dq - drift_part;
    }

    /// Discrete-gradient Hamiltonian step with boundary force `tau_bar`.
    fn hamiltonian(&mut self, state: &mut ChainState<T>, tau_bar: T) -> Result<()> {
        let n = state.r.len();
        let nf = T::from_usize_lossy(n);
        let h = nf * nf * self.dt;
        let half = c::<T>(0.5);
        let pot = self.setup.potential;
        let (r, p) = (&state.r, &state.p);

        // Explicit predictor.
        for i in 0..n {
            self.grad[i] = pot.derivative(r[i]);
        }
        for i in 0..n {
            let next = if i + 1 < n { self.grad[i + 1] } else { tau_bar };
            self.p_new[i] = p[i] + h * (next - self.grad[i]);
        }
        for i in 0..n {
            let left = if i == 0 { T::zero() } else { self.p_new[i - 1] };
            self.r_new[i] = r[i] + h * (self.p_new[i] - left);
        }

        let mut prev_change = T::infinity();
        let mut converged = false;
        for it in 0..self.max_iterations {
            let mut change = T::zero();
            let mut scale = T::one();
            let mut left_bar = T::zero();
            for i in 0..n {
                let bar = (p[i] + self.p_new[i]) * half;
                let rn = r[i] + h * (bar - left_bar);
                change = change.max((rn - self.r_new[i]).abs());
                scale = scale.max(rn.abs());
                self.r_new[i] = rn;
                left_bar = bar;
                self.grad[i] = pot.secant(r[i], rn);
            }
            for i in 0..n {
                let next = if i + 1 < n { self.grad[i + 1] } else { tau_bar };
                let pn = p[i] + h * (next - self.grad[i]);
                change = change.max((pn - self.p_new[i]).abs());
                scale = scale.max(pn.abs());
                self.p_new[i] = pn;
            }
            if change <= T::epsilon() * scale * c(4.0) || (it > 4 && change >= prev_change && change <= T::epsilon() * scale * c(1e3)) {
                converged = true;
                break;
            }
            prev_change = change;
        }
        if !converged {
            if let Some(i) = self.r_new.iter().chain(&self.p_new).position(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    site: i % n + 1,
                    t: state.t.to_f64_lossy(),
                });
            }
            return Err(Error::Numeric(format!(
                "implicit step did not converge at t = {} (dt too large?)",
                state.t
            )));
        }
        let p_bar_n = (p[n - 1] + self.p_new[n - 1]) * half;
        state.ledger.work = state.ledger.work + nf * tau_bar * p_bar_n * self.dt;
        state.r.copy_from_slice(&self.r_new);
        state.p.copy_from_slice(&self.p_new);
        Ok(())
    }

    /// Advances one step of length `dt`.
    pub fn step<R: Rng>(&mut self, state: &mut ChainState<T>, rng: &mut R) -> Result<()> {
        let tau_bar = self.setup.schedule.tau(state.t + self.dt * c(0.5));
        self.ou_half(state, rng);
        self.hamiltonian(state, tau_bar)?;
        self.ou_half(state, rng);
        state.t = state.t + self.dt;
        if let Some(i) = state.r.iter().chain(&state.p).position(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                site: i % state.n() + 1,
                t: state.t.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Steps until `state.t == t_end`, shortening the step so the end time is
    /// hit exactly; `each` runs after every step.
    pub fn advance_to<R: Rng, F>(&mut self, state: &mut ChainState<T>, t_end: T, rng: &mut R, mut each: F) -> Result<usize>
    where
        F: FnMut(&ChainState<T>),
    {
        let base = self.setup.dt();
        let remaining = t_end - state.t;
        if remaining <= T::zero() {
            return Ok(0);
        }
        let steps = (remaining / base).ceil().to_usize().unwrap_or(1).max(1);
        self.set_dt(remaining / T::from_usize_lossy(steps));
        for k in 0..steps {
            self.step(state, rng)?;
            if k + 1 == steps {
                state.t = t_end;
            }
            each(state);
        }
        self.set_dt(base);
        Ok(steps)
    }
}

/// `(1/n) Σ G(i/n) r_i`
pub fn empirical_pairing<T: Real>(state: &ChainState<T>, g: impl Fn(T) -> T) -> T {
    let nf = T::from_usize_lossy(state.n());
    state
        .r
        .iter()
        .enumerate()
        .map(|(i, &r)| g(T::from_usize_lossy(i + 1) / nf) * r)
        .sum::<T>()
        / nf
}

/// `(2w + 1)⁻¹ Σ_{|j−i| ≤ w} r_j` with `w = ⌊nε⌋`, for `nε < i < n(1 − ε)`
/// (sites are 1-based).
pub fn block_average<T: Real>(state: &ChainState<T>, i: usize, eps: T) -> Result<T> {
    let n = state.n();
    let nf = T::from_usize_lossy(n);
    let w = (nf * eps).floor().to_usize().unwrap_or(0);
    let fi = T::from_usize_lossy(i);
    if !(fi > nf * eps && fi < nf * (T::one() - eps)) || i < 1 || i + w > n || i <= w {
        return Err(Error::Range {
            index: i,
            lo: (nf * eps).to_f64_lossy(),
            hi: (nf * (T::one() - eps)).to_f64_lossy(),
        });
    }
    let sum: T = state.r[i - 1 - w..i + w].iter().copied().sum();
    Ok(sum / T::from_usize_lossy(2 * w + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalKind {
    /// `V'(r_i)`
    Tension,
    /// `p_i²`
    Kinetic,
    /// `p_i²/2 + V(r_i)`
    Energy,
}

impl LocalKind {
    pub const ALL: [LocalKind; 3] = [LocalKind::Tension, LocalKind::Kinetic, LocalKind::Energy];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Tension => "tension",
            Self::Kinetic => "kinetic",
            Self::Energy => "energy",
        }
    }
}

pub fn local_observable<T: Real>(state: &ChainState<T>, potential: &Potential<T>, kind: LocalKind) -> Vec<T> {
    match kind {
        LocalKind::Tension => state.r.iter().map(|&r| potential.derivative(r)).collect(),
        LocalKind::Kinetic => state.p.iter().map(|&p| p * p).collect(),
        LocalKind::Energy => state
            .r
            .iter()
            .zip(&state.p)
            .map(|(&r, &p)| p * p * c(0.5) + potential.energy(r))
            .collect(),
    }
}

/// Initial product law.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw<T> {
    /// Same tension at every site.
    UniformTension(T),
    /// One tension per site.
    SiteTensions(Vec<T>),
}

/// Averaging window `[start, end]` for per-site time averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub start: T,
    pub end: T,
}

/// What to run and what to record.
#[derive(Debug, Clone)]
pub struct SimulationPlan<T> {
    pub setup: ChainSetup<T>,
    pub initial: InitialLaw<T>,
    pub horizon: T,
    pub snapshot_times: Vec<T>,
    /// Number of test functions `cos((k + ½)πx)`.
    pub test_functions: usize,
    /// Macroscopic positions of block averages.
    pub block_points: Vec<T>,
    pub block_eps: T,
    /// Macroscopic positions `x` of local observables (site `⌊xn⌋`).
    pub local_points: Vec<T>,
    pub windows: Vec<Window<T>>,
    pub replicas: usize,
    pub seed: u64,
}

impl<T: Real> SimulationPlan<T> {
    pub fn new(setup: ChainSetup<T>, horizon: T) -> Self {
        Self {
            initial: InitialLaw::UniformTension(T::lit(setup.schedule.initial())),
            setup,
            horizon,
            snapshot_times: vec![horizon],
            test_functions: 4,
            block_points: Vec::new(),
            block_eps: c(0.05),
            local_points: Vec::new(),
            windows: Vec::new(),
            replicas: 1,
            seed: 0,
        }
    }

    pub fn local_sites(&self) -> Vec<usize> {
        self.local_sites_for(&self.local_points)
    }

    fn block_sites(&self) -> Vec<usize> {
        self.local_sites_for(&self.block_points)
    }

    fn local_sites_for(&self, xs: &[T]) -> Vec<usize> {
        let nf = T::from_usize_lossy(self.setup.n);
        xs.iter()
            .map(|&x| (x * nf).floor().to_usize().unwrap_or(1).clamp(1, self.setup.n))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.setup.validate()?;
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if !(self.horizon > T::zero()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        let mut last = T::zero();
        for &t in &self.snapshot_times {
            if t < last || t > self.horizon {
                return Err(Error::Config(format!("snapshot time {t} not sorted within [0, horizon]")));
            }
            last = t;
        }
        for w in &self.windows {
            if !(w.start <= w.end && w.start >= T::zero() && w.end <= self.horizon) {
                return Err(Error::Config(format!("averaging window [{}, {}] outside [0, horizon]", w.start, w.end)));
            }
        }
        if let InitialLaw::SiteTensions(v) = &self.initial {
            if v.len() != self.setup.n {
                return Err(Error::Config(format!("{} site tensions for {} sites", v.len(), self.setup.n)));
            }
        }
        for &x in self.block_points.iter().chain(&self.local_points) {
            if !(x > T::zero() && x <= T::one()) {
                return Err(Error::Config(format!("observation point {x} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<LocalGibbsSampler<T>> {
        let betas = self.setup.site_betas();
        let taus = match &self.initial {
            InitialLaw::UniformTension(t) => vec![*t; self.setup.n],
            InitialLaw::SiteTensions(v) => v.clone(),
        };
        LocalGibbsSampler::new(&self.setup.potential, &taus, &betas)
    }
}

/// Observables of one replica at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSnapshot<T> {
    pub t: T,
    pub pairings: Vec<T>,
    pub blocks: Vec<T>,
    /// `[kind][point]` in `LocalKind::ALL` order.
    pub local: Vec<Vec<T>>,
    pub sum_squares: T,
    pub length: T,
    pub work: T,
    pub heat: T,
    pub energy_change: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRecord<T> {
    pub replica: usize,
    pub snapshots: Vec<ReplicaSnapshot<T>>,
    /// `[window][kind][point]`
    pub window_averages: Vec<Vec<Vec<T>>>,
    /// Largest `|ΔU − W − Q| / (1 + |W| + |Q|)` seen at any step.
    pub max_ledger_violation: T,
    pub steps: usize,
}

/// Replica mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct MeanSe<T> {
    pub mean: T,
    pub se: T,
}

impl<T: Real> MeanSe<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: T::nan(),
                se: T::nan(),
            };
        }
        let nf = T::from_usize_lossy(n);
        let mean = crate::pde::pairwise_sum(xs) / nf;
        if n == 1 {
            return Self { mean, se: T::zero() };
        }
        let dev: Vec<T> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        let var = crate::pde::pairwise_sum(&dev) / (nf - T::one());
        Self {
            mean,
            se: (var / nf).sqrt(),
        }
    }

    /// `|mean − target| ≤ k·se`
    pub fn within(&self, target: T, k: T) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AggregateSnapshot<T> {
    pub t: T,
    pub pairings: Vec<MeanSe<T>>,
    pub blocks: Vec<MeanSe<T>>,
    pub local: Vec<Vec<MeanSe<T>>>,
    pub sum_squares: MeanSe<T>,
    pub length: MeanSe<T>,
    pub work: MeanSe<T>,
    pub heat: MeanSe<T>,
    pub energy_change: MeanSe<T>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BlownReplica {
    pub replica: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport<T> {
    pub snapshots: Vec<AggregateSnapshot<T>>,
    /// `[window][kind][point]`
    pub window_averages: Vec<Vec<Vec<MeanSe<T>>>>,
    pub local_sites: Vec<usize>,
    pub max_ledger_violation: T,
    pub completed: usize,
    pub blown: Vec<BlownReplica>,
    pub records: Vec<ReplicaRecord<T>>,
}

impl<T: Real> SimulationReport<T> {
    pub fn blown_fraction(&self) -> f64 {
        self.blown.len() as f64 / (self.blown.len() + self.completed).max(1) as f64
    }
}

/// Runs one replica of `plan`.
pub fn run_replica<T: Real>(plan: &SimulationPlan<T>, sampler: &LocalGibbsSampler<T>, replica: usize) -> Result<ReplicaRecord<T>> {
    let setup = &plan.setup;
    let pot = setup.potential;
    let mut rng = replica_rng(plan.seed, replica as u64);
    let mut state = sampler.sample(&pot, &mut rng)?;
    let mut integrator = ChainIntegrator::new(setup)?;
    let local_sites = plan.local_sites();
    let block_sites = plan.block_sites();
    let nk = LocalKind::ALL.len();
    let mut sums = vec![vec![vec![T::zero(); local_sites.len()]; nk]; plan.windows.len()];
    let mut counts = vec![0usize; plan.windows.len()];
    let mut worst = T::zero();
    let mut steps = 0;

    let sample_windows = |state: &ChainState<T>, sums: &mut Vec<Vec<Vec<T>>>, counts: &mut Vec<usize>| {
        for (w, win) in plan.windows.iter().enumerate() {
            if state.t >= win.start && state.t <= win.end {
                counts[w] += 1;
                for (k, kind) in LocalKind::ALL.iter().enumerate() {
                    for (j, &site) in local_sites.iter().enumerate() {
                        sums[w][k][j] = sums[w][k][j] + site_value(state, &pot, *kind, site);
                    }
                }
            }
        }
    };
    sample_windows(&state, &mut sums, &mut counts);

    let mut snapshots = Vec::with_capacity(plan.snapshot_times.len());
    let mut stops: Vec<T> = plan.snapshot_times.clone();
    if stops.last().is_none_or(|&t| t < plan.horizon) {
        stops.push(plan.horizon);
    }
    let mut snap_iter = plan.snapshot_times.iter().peekable();
    for &stop in &stops {
        steps += integrator.advance_to(&mut state, stop, &mut rng, |s| {
            sample_windows(s, &mut sums, &mut counts);
            let res = s.ledger_residual(&pot).abs() / (T::one() + s.ledger.work.abs() + s.ledger.heat.abs());
            worst = worst.max(res);
        })?;
        while snap_iter.peek().is_some_and(|&&t| t <= state.t) {
            let t = *snap_iter.next().expect("peeked");
            snapshots.push(snapshot(plan, &state, t, &local_sites, &block_sites)?);
        }
    }
    let window_averages = sums
        .into_iter()
        .zip(&counts)
        .map(|(per_kind, &cnt)| {
            let denom = T::from_usize_lossy(cnt.max(1));
            per_kind
                .into_iter()
                .map(|v| v.into_iter().map(|x| x / denom).collect())
                .collect()
        })
        .collect();
    Ok(ReplicaRecord {
        replica,
        snapshots,
        window_averages,
        max_ledger_violation: worst,
        steps,
    })
}

fn site_value<T: Real>(state: &ChainState<T>, pot: &Potential<T>, kind: LocalKind, site: usize) -> T {
    let (r, p) = (state.r[site - 1], state.p[site - 1]);
    match kind {
        LocalKind::Tension => pot.derivative(r),
        LocalKind::Kinetic => p * p,
        LocalKind::Energy => p * p * c(0.5) + pot.energy(r),
    }
}

fn snapshot<T: Real>(
    plan: &SimulationPlan<T>,
    state: &ChainState<T>,
    t: T,
    local_sites: &[usize],
    block_sites: &[usize],
) -> Result<ReplicaSnapshot<T>> {
    let pot = plan.setup.potential;
    let pairings = (0..plan.test_functions)
        .map(|k| empirical_pairing(state, |x| crate::pde::cosine_test_function(k, x)))
        .collect();
    let blocks = block_sites
        .iter()
        .map(|&i| block_average(state, i, plan.block_eps))
        .collect::<Result<Vec<_>>>()?;
    let local = LocalKind::ALL
        .iter()
        .map(|&kind| local_sites.iter().map(|&i| site_value(state, &pot, kind, i)).collect())
        .collect();
    let sum_squares = state.r.iter().chain(&state.p).map(|&x| x * x).sum();
    Ok(ReplicaSnapshot {
        t,
        pairings,
        blocks,
        local,
        sum_squares,
        length: state.length(),
        work: state.ledger.work,
        heat: state.ledger.heat,
        energy_change: state.internal_energy(&pot) - state.ledger.initial_energy,
    })
}

/// Runs every replica of `plan` (in parallel) and aggregates in replica
/// order, so the report is a pure function of the plan and its seed.
pub fn simulate<T: Real>(plan: &SimulationPlan<T>) -> Result<SimulationReport<T>> {
    use rayon::prelude::*;
    plan.validate()?;
    let sampler = plan.sampler()?;
    let outcomes: Vec<Result<ReplicaRecord<T>>> = (0..plan.replicas)
        .into_par_iter()
        .map(|k| run_replica(plan, &sampler, k))
        .collect();
    let mut records = Vec::new();
    let mut blown = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e @ (Error::BlowUp { .. } | Error::Numeric(_))) => blown.push(BlownReplica {
                replica: k,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(aggregate(plan, records, blown))
}

fn aggregate<T: Real>(plan: &SimulationPlan<T>, records: Vec<ReplicaRecord<T>>, blown: Vec<BlownReplica>) -> SimulationReport<T> {
    let collect = |f: &dyn Fn(&ReplicaRecord<T>) -> T| -> MeanSe<T> {
        let xs: Vec<T> = records.iter().map(f).collect();
        MeanSe::from_samples(&xs)
    };
    let nk = LocalKind::ALL.len();
    let nl = plan.local_points.len();
    let snapshots = plan
        .snapshot_times
        .iter()
        .enumerate()
        .map(|(s, &t)| AggregateSnapshot {
            t,
            pairings: (0..plan.test_functions).map(|k| collect(&|r| r.snapshots[s].pairings[k])).collect(),
            blocks: (0..plan.block_points.len()).map(|b| collect(&|r| r.snapshots[s].blocks[b])).collect(),
            local: (0..nk)
                .map(|k| (0..nl).map(|j| collect(&|r| r.snapshots[s].local[k][j])).collect())
                .collect(),
            sum_squares: collect(&|r| r.snapshots[s].sum_squares),
            length: collect(&|r| r.snapshots[s].length),
            work: collect(&|r| r.snapshots[s].work),
            heat: collect(&|r| r.snapshots[s].heat),
            energy_change: collect(&|r| r.snapshots[s].energy_change),
        })
        .collect();
    let window_averages = (0..plan.windows.len())
        .map(|w| {
            (0..nk)
                .map(|k| (0..nl).map(|j| collect(&|r| r.window_averages[w][k][j])).collect())
                .collect()
        })
        .collect();
    let max_ledger_violation = records.iter().map(|r| r.max_ledger_violation).fold(T::zero(), T::max);
    SimulationReport {
        snapshots,
        window_averages,
        local_sites: plan.local_sites(),
        max_ledger_violation,
        completed: records.len(),
        blown,
        records,
    }
}
