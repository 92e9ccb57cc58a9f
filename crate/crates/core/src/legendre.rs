//! Legendre polynomials, fully normalized associated Legendre functions and
//! the Bessel function J0.
//!
//! The associated functions are normalized so that the real spherical
//! harmonics `p_m(cos θ) cos(mφ)` and `p_m(cos θ) sin(mφ)` form an
//! orthonormal basis with respect to the probability measure on the sphere.
//! With that convention `Σ_m p_m² = 2n + 1` at every point.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Largest degree accepted by [`legendre_p`].
pub const MAX_DEGREE: usize = 1_000_000;

const DOMAIN_SLACK: f64 = 1e-12;
const RESCALE_THRESHOLD: f64 = 1e100;
const BESSEL_SERIES_LIMIT: f64 = 12.0;

fn check_argument(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain { x });
    }
    Ok(x.clamp(-1.0, 1.0))
}

fn check_degree(n: usize) -> Result<()> {
    if n > MAX_DEGREE {
        return Err(Error::DegreeOverflow { n, max: MAX_DEGREE });
    }
    Ok(())
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> Result<f64> {
    check_degree(n)?;
    let x = check_argument(x)?;
    Ok(legendre_pair(n, x).0)
}

/// `P_n(x)` together with `P_n'(x)`.
pub fn legendre_p_with_derivative(n: usize, x: f64) -> Result<(f64, f64)> {
    check_degree(n)?;
    let x = check_argument(x)?;
    let (p, p_prev) = legendre_pair(n, x);
    if n == 0 {
        return Ok((p, 0.0));
    }
    let nf = n as f64;
    let one_minus = 1.0 - x * x;
    let dp = if one_minus < 1e-14 {
        // P_n'(±1) = (±1)^(n+1) n(n+1)/2
        let sign = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        sign * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p_prev - x * p) / one_minus
    };
    Ok((p, dp))
}

/// Returns `(P_n(x), P_{n-1}(x))`, with `P_{-1} := 0`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// All orders `m = 0..=n` of the normalized associated Legendre functions of
/// degree `n` at one argument, with their derivatives in the colatitude.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreRow {
    pub degree: usize,
    pub x: f64,
    pub values: Vec<f64>,
    pub dvalues: Vec<f64>,
}

/// Normalized associated Legendre row at `x = cos θ`.
pub fn assoc_legendre_row(n: usize, x: f64) -> Result<LegendreRow> {
    check_degree(n)?;
    let x = check_argument(x)?;
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut values = vec![0.0; n + 1];
    let mut dvalues = vec![0.0; n + 1];
    fill_row(n, x, s, &mut values, &mut dvalues);
    Ok(LegendreRow {
        degree: n,
        x,
        values,
        dvalues,
    })
}

/// Same as [`assoc_legendre_row`] but parameterized by the colatitude, which
/// keeps full relative precision of `sin θ` near the poles.
pub fn assoc_legendre_row_theta(n: usize, theta: f64) -> LegendreRow {
    let mut values = vec![0.0; n + 1];
    let mut dvalues = vec![0.0; n + 1];
    let (s, c) = theta.sin_cos();
    fill_row(n, c, s.abs(), &mut values, &mut dvalues);
    LegendreRow {
        degree: n,
        x: c,
        values,
        dvalues,
    }
}

/// Fills `values[m]` and `dvalues[m]` for `m = 0..=n` given `cos θ` and `sin θ`.
///
/// Each order starts from the sectoral value carried as a natural logarithm
/// and is pushed up in degree with a mantissa that is rescaled whenever it
/// exceeds `1e100`; the accumulated scale is applied once at the end.
#[allow(clippy::needless_range_loop)]
pub(crate) fn fill_row(n: usize, cos_t: f64, sin_t: f64, values: &mut [f64], dvalues: &mut [f64]) {
    debug_assert_eq!(values.len(), n + 1);
    debug_assert_eq!(dvalues.len(), n + 1);
    let ln_sin = if sin_t > 0.0 {
        sin_t.ln()
    } else {
        f64::NEG_INFINITY
    };
    let ln_rescale = RESCALE_THRESHOLD.ln();
    // log of the sectoral prefactor without the sin^m factor
    let mut ln_sectoral = 0.0;
    for m in 0..=n {
        if m == 1 {
            ln_sectoral += 0.5 * 3f64.ln();
        } else if m >= 2 {
            let mf = m as f64;
            ln_sectoral += 0.5 * ((2.0 * mf + 1.0) / (2.0 * mf)).ln();
        }
        if m > 0 && sin_t == 0.0 {
            values[m] = 0.0;
            continue;
        }
        let mut scale = ln_sectoral + if m > 0 { m as f64 * ln_sin } else { 0.0 };
        let mf = m as f64;
        let mut p_prev = 0.0;
        let mut p_cur = 1.0;
        for l in (m + 1)..=n {
            let lf = l as f64;
            let a = (((2.0 * lf - 1.0) * (2.0 * lf + 1.0)) / ((lf - mf) * (lf + mf))).sqrt();
            let b = if l >= m + 2 {
                (((2.0 * lf + 1.0) * (lf + mf - 1.0) * (lf - mf - 1.0))
                    / ((lf - mf) * (lf + mf) * (2.0 * lf - 3.0)))
                    .sqrt()
            } else {
                0.0
            };
            let p_next = a * cos_t * p_cur - b * p_prev;
            p_prev = p_cur;
            p_cur = p_next;
            if p_cur.abs() > RESCALE_THRESHOLD {
                p_cur /= RESCALE_THRESHOLD;
                p_prev /= RESCALE_THRESHOLD;
                scale += ln_rescale;
            }
        }
        values[m] = if p_cur == 0.0 {
            0.0
        } else {
            p_cur * scale.exp()
        };
    }
    derivatives_from_values(n, values, dvalues);
}

/// θ-derivatives of a normalized row from the row itself.
fn derivatives_from_values(n: usize, values: &[f64], dvalues: &mut [f64]) {
    let nf = n as f64;
    if n == 0 {
        dvalues[0] = 0.0;
        return;
    }
    dvalues[0] = -(nf * (nf + 1.0) / 2.0).sqrt() * values[1];
    for m in 1..=n {
        let mf = m as f64;
        let lower_norm = if m == 1 {
            std::f64::consts::SQRT_2
        } else {
            1.0
        };
        let lower = lower_norm * ((nf + mf) * (nf - mf + 1.0)).sqrt() * values[m - 1];
        let upper = if m < n {
            ((nf + mf + 1.0) * (nf - mf)).sqrt() * values[m + 1]
        } else {
            0.0
        };
        dvalues[m] = 0.5 * (lower - upper);
    }
}

/// Bessel function of the first kind of order zero.
///
/// Power series up to `|x| = 12`, Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= BESSEL_SERIES_LIMIT {
        j0_series(ax)
    } else {
        j0_asymptotic(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-3) {
            break;
        }
        k += 1.0;
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // |a_k| = ((2k-1)!!)^2 / (k! 8^k); P = a0 - a2/x² + ..., Q = -a1/x + a3/x³ - ...
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    let mut k = 0usize;
    loop {
        let term = a / x.powi(k as i32);
        if term > last || term < 1e-18 {
            break;
        }
        last = term;
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            p += sign * term;
        } else {
            q -= sign * term;
        }
        let kf = (k + 1) as f64;
        a *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (8.0 * kf);
        k += 1;
    }
    let phase = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() - q * phase.sin())
}

/// Colatitudes of the zeros of `P_n`, increasing in `(0, π)`.
///
/// Each zero is bracketed by the interlacing bounds
/// `(2ν-1)π/(2n+1) < θ_ν < 2νπ/(2n+1)`, isolated by bisection and polished
/// with Newton steps.
pub fn legendre_zeros(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "legendre_zeros needs n >= 1".into(),
        ));
    }
    check_degree(n)?;
    let denom = (2 * n + 1) as f64;
    let g = |theta: f64| legendre_pair(n, theta.cos()).0;
    let mut zeros = Vec::with_capacity(n);
    for nu in 1..=n {
        let mut lo = (2 * nu - 1) as f64 * PI / denom;
        let mut hi = (2 * nu) as f64 * PI / denom;
        let mut g_lo = g(lo);
        let g_hi = g(hi);
        if g_lo == 0.0 {
            zeros.push(lo);
            continue;
        }
        if g_lo.signum() == g_hi.signum() {
            return Err(Error::Convergence { n, index: nu });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo < 1e-9 {
                break;
            }
            let g_mid = g(mid);
            if g_mid.signum() == g_lo.signum() {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
            }
        }
        let mut theta = 0.5 * (lo + hi);
        for _ in 0..8 {
            let (c, s) = (theta.cos(), theta.sin());
            let (p, dp) = legendre_p_with_derivative(n, c)?;
            // d/dθ P_n(cos θ) = -sin θ P_n'(cos θ)
            let slope = -s * dp;
            if slope == 0.0 {
                break;
            }
            let step = p / slope;
            let next = theta - step;
            if !(next > lo - 1e-9 && next < hi + 1e-9) {
                break;
            }
            theta = next;
            if step.abs() < 1e-16 {
                break;
            }
        }
        zeros.push(theta);
    }
    Ok(zeros)
}

/// Value and θ-derivative of the zonal harmonic `√(2n+1) P_n(cos θ)`.
pub fn zonal(n: usize, theta: f64) -> (f64, f64) {
    let norm = ((2 * n + 1) as f64).sqrt();
    let (c, s) = (theta.cos(), theta.sin());
    let (p, dp) = legendre_pair_with_derivative(n, c);
    (norm * p, -norm * s * dp)
}

fn legendre_pair_with_derivative(n: usize, x: f64) -> (f64, f64) {
    legendre_p_with_derivative(n, x.clamp(-1.0, 1.0)).expect("argument clamped")
}
