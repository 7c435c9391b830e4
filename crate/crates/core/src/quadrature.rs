//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! integrands.
//!
//! All components share the same subdivision; the error estimate of a
//! segment is the worst component error relative to the running scale of
//! that component.

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights attached to XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions<T> {
    pub rel_tol: T,
    pub initial_segments: usize,
    pub max_segments: usize,
}

impl<T: Real> Default for QuadratureOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: c::<T>(1e-13).max(T::tol_floor()),
            initial_segments: 16,
            max_segments: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult<T, const K: usize> {
    pub value: [T; K],
    pub error: [T; K],
    pub segments: usize,
}

#[derive(Clone, Copy)]
struct Segment<T, const K: usize> {
    a: T,
    b: T,
    value: [T; K],
    error: [T; K],
}

fn gk15<T: Real, const K: usize, F>(f: &F, a: T, b: T) -> Segment<T, K>
where
    F: Fn(T) -> [T; K],
{
    let half = (b - a) * c(0.5);
    let mid = (a + b) * c(0.5);
    let mut kron = [T::zero(); K];
    let mut gauss = [T::zero(); K];

    let fc = f(mid);
    for k in 0..K {
        kron[k] = fc[k] * c(WGK[7]);
        gauss[k] = fc[k] * c(WG[3]);
    }
    for j in 0..7 {
        let dx = half * c(XGK[j]);
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] = kron[k] + s * c(WGK[j]);
            if j % 2 == 1 {
                gauss[k] = gauss[k] + s * c(WG[j / 2]);
            }
        }
    }
    let mut value = [T::zero(); K];
    let mut error = [T::zero(); K];
    for k in 0..K {
        value[k] = kron[k] * half;
        error[k] = ((kron[k] - gauss[k]) * half).abs();
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: Real, const K: usize, F>(
    f: F,
    a: T,
    b: T,
    opts: &QuadratureOptions<T>,
) -> Result<QuadratureResult<T, K>>
where
    F: Fn(T) -> [T; K],
{
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::Domain(format!(
            "bad quadrature interval [{a}, {b}]"
        )));
    }
    let n0 = opts.initial_segments.max(1);
    let width = (b - a) / T::from_usize_lossy(n0);
    let mut segs: Vec<Segment<T, K>> = (0..n0)
        .map(|i| {
            let lo = a + width * T::from_usize_lossy(i);
            let hi = if i + 1 == n0 { b } else { lo + width };
            gk15(&f, lo, hi)
        })
        .collect();

    loop {
        let mut total = [T::zero(); K];
        let mut abs_total = [T::zero(); K];
        let mut err = [T::zero(); K];
        for s in &segs {
            for k in 0..K {
                total[k] = total[k] + s.value[k];
                abs_total[k] = abs_total[k] + s.value[k].abs();
                err[k] = err[k] + s.error[k];
            }
        }
        let scale: [T; K] = std::array::from_fn(|k| abs_total[k].max(T::min_positive_value()));
        let converged = (0..K).all(|k| err[k] <= opts.rel_tol * scale[k]);
        if converged {
            return Ok(QuadratureResult {
                value: total,
                error: err,
                segments: segs.len(),
            });
        }
        if segs.len() >= opts.max_segments {
            return Err(Error::Quadrature(format!(
                "{} segments on [{a}, {b}], error {:?} vs scale {:?}",
                segs.len(),
                err,
                scale
            )));
        }
        // Bisect the segment with the largest scaled error.
        let worst = segs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let e = (0..K)
                    .map(|k| s.error[k] / scale[k])
                    .fold(T::zero(), T::max);
                (i, e)
            })
            .fold((0, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        let s = segs.swap_remove(worst);
        let m = (s.a + s.b) * c(0.5);
        if !(m > s.a && m < s.b) {
            return Err(Error::Quadrature(format!(
                "segment [{}, {}] cannot be bisected further",
                s.a, s.b
            )));
        }
        segs.push(gk15(&f, s.a, m));
        segs.push(gk15(&f, m, s.b));
    }
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<T: Real, F>(f: F, a: T, b: T, opts: &QuadratureOptions<T>) -> Result<T>
where
    F: Fn(T) -> T,
{
    Ok(integrate(|x| [f(x)], a, b, opts)?.value[0])
}
