//! Real-order special functions used by the CEV density, the atom at zero and the MGFs.
//!
//! `erf`, `erfc` and the gamma function come from `libm`; the regularized incomplete gamma
//! functions come from `statrs`. The modified Bessel function
//! of the first kind and the scaled complementary error function are implemented here,
//! with a target accuracy of about 1e-12 relative on the ranges the model needs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: I_{nu}({x}) exceeds f64 range; use BesselScaling::ExpScaled")]
    Overflow { nu: f64, x: f64 },
}

/// Output scaling for [`bessel_i`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselScaling {
    Unscaled,
    /// Returns `e^{-x} I_nu(x)`.
    ExpScaled,
}

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Modified Bessel function of the first kind, `I_nu(x)`, for `nu > -3/2` and `x >= 0`.
/// Orders in `(-3/2, -1]` go through `I_nu = I_{nu+2} + 2(nu+1)/x I_{nu+1}` and may be negative.
pub fn bessel_i(nu: f64, x: f64, scaling: BesselScaling) -> Result<f64, SpecfunError> {
    if nu <= -1.0 && nu > -1.5 {
        check_bessel_args(nu + 1.0, x)?;
        if x == 0.0 {
            return Err(SpecfunError::Domain("I_nu(0) is infinite for nu < 0".into()));
        }
        let a = ln_bessel_i_scaled_unchecked(nu + 2.0, x);
        let b = ln_bessel_i_scaled_unchecked(nu + 1.0, x);
        let m = a.max(b);
        let scaled = (a - m).exp() + 2.0 * (nu + 1.0) / x * (b - m).exp();
        return match scaling {
            BesselScaling::ExpScaled => Ok(scaled * m.exp()),
            BesselScaling::Unscaled => {
                let v = scaled * (m + x).exp();
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(SpecfunError::Overflow { nu, x })
                }
            }
        };
    }
    check_bessel_args(nu, x)?;
    if x == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    let ln_scaled = ln_bessel_i_scaled_unchecked(nu, x);
    match scaling {
        BesselScaling::ExpScaled => Ok(ln_scaled.exp()),
        BesselScaling::Unscaled => {
            let v = (ln_scaled + x).exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SpecfunError::Overflow { nu, x })
            }
        }
    }
}

/// `ln(e^{-x} I_nu(x))` for `nu > -1`, `x > 0`. Finite for every positive finite `x`.
pub fn ln_bessel_i_scaled(nu: f64, x: f64) -> Result<f64, SpecfunError> {
    check_bessel_args(nu, x)?;
    if x == 0.0 {
        return Err(SpecfunError::Domain("ln I_nu(0) is not finite".into()));
    }
    Ok(ln_bessel_i_scaled_unchecked(nu, x))
}

fn check_bessel_args(nu: f64, x: f64) -> Result<(), SpecfunError> {
    if !(nu > -1.0) || !nu.is_finite() {
        return Err(SpecfunError::Domain(format!("Bessel order must exceed -1, got {nu}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SpecfunError::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    if x == 0.0 && nu < 0.0 {
        return Err(SpecfunError::Domain("I_nu(0) is infinite for nu < 0".into()));
    }
    Ok(())
}

pub(crate) fn ln_bessel_i_scaled_unchecked(nu: f64, x: f64) -> f64 {
    if x >= 20.0 {
        if let Some(v) = ln_bessel_i_scaled_hankel(nu, x) {
            return v;
        }
    }
    ln_bessel_i_series(nu, x) - x
}

/// Power series `(x/2)^nu sum (x^2/4)^k / (k! Gamma(k+nu+1))`. Every term is positive for
/// `nu > -1`; the running sum is rescaled to stay in range for large `x`.
fn ln_bessel_i_series(nu: f64, x: f64) -> f64 {
    const RESCALE: f64 = 1e200;
    let q = 0.25 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut ln_offset = 0.0_f64;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu));
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_offset += RESCALE.ln();
        }
        // terms decrease once k(k+nu) > q
        if term < sum * 1e-17 && k * (k + nu) > q {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + sum.ln() + ln_offset
}

/// Large-argument expansion `e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum (-1)^k a_k(nu) / x^k`.
/// Returns `None` when the asymptotic series stops decreasing before reaching full precision.
fn ln_bessel_i_scaled_hankel(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut prev_abs = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        let a = term.abs();
        if a > prev_abs {
            return None;
        }
        sum += term;
        if a < 1e-17 * sum.abs() {
            return Some(sum.ln() - 0.5 * (2.0 * PI * x).ln());
        }
        prev_abs = a;
    }
    None
}

/// Regularized lower incomplete gamma `P(n, x)`.
pub fn lower_gamma_reg(n: f64, x: f64) -> Result<f64, SpecfunError> {
    check_gamma_args(n, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_lr(n, x))
}

/// Regularized upper incomplete gamma `Q(n, x) = 1 - P(n, x)`, accurate when it is small.
pub fn upper_gamma_reg(n: f64, x: f64) -> Result<f64, SpecfunError> {
    check_gamma_args(n, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_ur(n, x))
}

fn check_gamma_args(n: f64, x: f64) -> Result<(), SpecfunError> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(SpecfunError::Domain(format!("incomplete gamma shape must be > 0, got {n}")));
    }
    if !(x >= 0.0) {
        return Err(SpecfunError::Domain(format!("incomplete gamma argument must be >= 0, got {x}")));
    }
    Ok(())
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn erf(z: f64) -> f64 {
    libm::erf(z)
}

pub fn erfc(z: f64) -> f64 {
    libm::erfc(z)
}

/// Scaled complementary error function `e^{z^2} erfc(z)`.
pub fn erfcx(z: f64) -> f64 {
    if z < 0.0 {
        if z < -26.7 {
            return f64::INFINITY;
        }
        return 2.0 * (z * z).exp() - erfcx(-z);
    }
    if z < 0.5 {
        return (z * z).exp() * erfc(z);
    }
    if z < 26.0 {
        // exp(z^2) * erfc(z) with the product split to avoid overflow of exp(z^2)
        let zh = (z * 4096.0).floor() / 4096.0;
        let d = z - zh;
        return ((zh * zh).exp() * erfc(z)) * ((z + zh) * d).exp();
    }
    // asymptotic: 1/(z sqrt(pi)) * sum (-1)^n (2n-1)!! / (2 z^2)^n
    let w = 1.0 / (2.0 * z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..12 {
        term *= -((2 * n - 1) as f64) * w;
        sum += term;
    }
    sum / (z * PI.sqrt())
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `ln N(z)`, finite far into the lower tail.
pub fn ln_norm_cdf(z: f64) -> f64 {
    if z > -5.0 {
        norm_cdf(z).ln()
    } else {
        let u = -z * FRAC_1_SQRT_2;
        (0.5 * erfcx(u)).ln() - u * u
    }
}

/// Mills-type ratio `M(z) = N(z) / n(z)`, with `n` the standard normal density.
pub(crate) fn mills(z: f64) -> f64 {
    (PI / 2.0).sqrt() * erfcx(-z * FRAC_1_SQRT_2)
}
