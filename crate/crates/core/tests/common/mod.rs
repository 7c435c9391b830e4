//! Independent oracles shared by the integration suites.
#![allow(dead_code, clippy::too_many_arguments)]

use std::f64::consts::PI;

/// `∫₀ᵗ e^{−λ(t−s)} τ̄'(s) ds` for the cubic smoothstep ramp, by exact
/// integration by parts of exponential × quadratic.
fn ramp_convolution(lambda: f64, t: f64, dtau: f64, t1: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let a = 6.0 * dtau / t1;
    let p = |s: f64| a * (s / t1 - s * s / (t1 * t1));
    let dp = |s: f64| a * (1.0 / t1 - 2.0 * s / (t1 * t1));
    let ddp = -2.0 * a / (t1 * t1);
    let prim = |s: f64| p(s) / lambda - dp(s) / (lambda * lambda) + ddp / (lambda * lambda * lambda);
    let upper = t.min(t1);
    (-lambda * (t - upper)).exp() * prim(upper) - (-lambda * t).exp() * prim(0.0)
}

/// Eigenfunction series for `∂t r = γ⁻¹ ∂x² r`, `r_x(0) = 0`, `r(1) = τ̄(t)`,
/// `r(x, 0) = r0`, with `τ̄` the smoothstep from `tau0` to `tau1` over `t1`.
pub fn heat_series(x: f64, t: f64, gamma: f64, r0: f64, tau0: f64, tau1: f64, t1: f64, terms: usize) -> f64 {
    let tau_bar = if t >= t1 {
        tau1
    } else {
        let u = t / t1;
        tau0 + (tau1 - tau0) * u * u * (3.0 - 2.0 * u)
    };
    let mut w = 0.0;
    for k in 0..terms {
        let kk = (k as f64 + 0.5) * PI;
        let lambda = kk * kk / gamma;
        let ck = 2.0 * if k % 2 == 0 { 1.0 } else { -1.0 } / kk;
        let wk = (-lambda * t).exp() * (r0 - tau0) * ck - ck * ramp_convolution(lambda, t, tau1 - tau0, t1);
        w += wk * (kk * x).cos();
    }
    tau_bar + w
}

/// Series values of `∫₀¹ G_k r dx` for `G_k = cos((k+½)πx)`.
pub fn heat_series_pairing(k: usize, t: f64, gamma: f64, r0: f64, tau0: f64, tau1: f64, t1: f64) -> f64 {
    // ∫ G_k τ̄ = τ̄ (−1)^k / κ_k ; ∫ G_k φ_j = δ_jk / 2
    let tau_bar = if t >= t1 {
        tau1
    } else {
        let u = t / t1;
        tau0 + (tau1 - tau0) * u * u * (3.0 - 2.0 * u)
    };
    let kk = (k as f64 + 0.5) * PI;
    let lambda = kk * kk / gamma;
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let ck = 2.0 * sign / kk;
    let wk = (-lambda * t).exp() * (r0 - tau0) * ck - ck * ramp_convolution(lambda, t, tau1 - tau0, t1);
    tau_bar * sign / kk + 0.5 * wk
}
