//! Adaptive Gauss–Kronrod quadrature and monotone bisection.
//!
//! Both routines are used on smooth (piecewise) integrands over finite
//! intervals; callers split at known kinks and handle infinite tails
//! analytically.

use crate::error::{Error, Result};

// 15-point Kronrod nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        // Gauss nodes sit at the odd Kronrod indices.
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: (f64, f64),
    abs_tol: f64,
    rel_tol: f64,
    depth: u32,
) -> (f64, f64, bool) {
    let (value, err) = whole;
    let converged = err <= abs_tol.max(rel_tol * value.abs());
    if converged || depth >= MAX_DEPTH || b - a <= f64::EPSILON * a.abs().max(1.0) {
        return (value, err, converged);
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    let (lv, le, lok) = adapt(f, a, mid, left, 0.5 * abs_tol, rel_tol, depth + 1);
    let (rv, re, rok) = adapt(f, mid, b, right, 0.5 * abs_tol, rel_tol, depth + 1);
    (lv + rv, le + re, lok && rok)
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// The endpoints are never evaluated, so integrable endpoint singularities
/// are tolerated (convergence is slow near them, so callers should subtract
/// the singular part analytically where they can).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("quadrature limits must be finite"));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let whole = gk15(&f, lo, hi);
    let (value, abs_err, _) = adapt(&f, lo, hi, whole, abs_tol, rel_tol, 0);
    if !value.is_finite() {
        return Err(Error::NoConvergence {
            what: "adaptive quadrature",
            iterations: MAX_DEPTH as usize,
        });
    }
    Ok(Integral {
        value: sign * value,
        abs_err,
    })
}

/// Integrates over `[a, b]` split at every interior breakpoint.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    let share = abs_tol / (cuts.len() - 1) as f64;
    let mut total = Integral {
        value: 0.0,
        abs_err: 0.0,
    };
    for w in cuts.windows(2) {
        let piece = integrate(&f, w[0], w[1], share, rel_tol)?;
        total.value += piece.value;
        total.abs_err += piece.abs_err;
    }
    Ok(total)
}

/// `a + s, a + 2s, a + 4s, …` below `b`, so that adaptive panels resolve
/// features near `a` on the scale `s`.
pub(crate) fn doubling_breaks(a: f64, b: f64, s: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut w = s;
    while a + w < b && out.len() < 64 {
        out.push(a + w);
        w *= 2.0;
    }
    out
}

pub(crate) const BISECTION_CAP: usize = 200;

/// Finds a root of a monotone `f` on `[lo, hi]` where `f(lo)` and `f(hi)`
/// have opposite signs (zero counts as either). Iterates until the bracket
/// collapses to machine precision or `|f| <= f_tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, f_tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let f_hi = f(hi);
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket("bisection"));
    }
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid.abs() <= f_tol {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "bisection",
        iterations: BISECTION_CAP,
    })
}
