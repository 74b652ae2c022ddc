//! Prices under the mixture model: calls, puts, digitals, smiles, strike derivatives and
//! the maturity-spread hedge ratio. Every price is `intrinsic + ∫ TV(k, yτ) ζ(y) dy`, so the
//! atom at zero only enters through the intrinsic value and never has to be integrated.

use thiserror::Error;

use crate::bsm::{self, BsError};
use crate::cev_dist::CevModel;
use crate::mixture::{integrate_against_density, LogIntegral, TailWeight};
use crate::specfun::{ln_norm_cdf, norm_cdf, LN_SQRT_2PI};

pub use crate::mixture::QuadratureConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid quadrature configuration: {0}")]
    Config(String),
    #[error("tolerance not met: error estimate {abs_error:e} after {subdivisions} subdivisions")]
    ToleranceNotMet { abs_error: f64, subdivisions: usize },
    #[error("degenerate integral: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Domain(String),
    #[error(transparent)]
    Bs(#[from] BsError),
    #[error("point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<PricingError>,
    },
}

/// A price together with its time value kept in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceDetail {
    pub price: f64,
    /// `ln(price - intrinsic)`, accurate even when the difference underflows.
    pub ln_time_value: f64,
    pub abs_error: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    pub k: f64,
    pub tau: f64,
    pub price: f64,
    pub implied_vol: f64,
}

/// `∂_k C` and `∂_kk C`. Left and right values differ only at `k = 0` when the atom is
/// present; `∂_kk` then excludes the Dirac mass the kink of the atom's payoff puts at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewConvexity {
    pub dk_left: f64,
    pub dk_right: f64,
    pub dkk_left: f64,
    pub dkk_right: f64,
}

fn check_tau(tau: f64) -> Result<(), PricingError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(PricingError::Domain(format!("tau must be positive, got {tau}")))
    }
}

fn check_k(k: f64) -> Result<(), PricingError> {
    if k.is_nan() {
        Err(PricingError::Domain("k is NaN".into()))
    } else {
        Ok(())
    }
}

/// `∫ TV(k, yτ) ζ(y) dy`, where TV is the out-of-the-money option value.
pub fn time_value_integral(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<LogIntegral, PricingError> {
    check_tau(tau)?;
    check_k(k)?;
    let g = |s: f64| (bsm::ln_otm_value(k, s.exp() * tau), 1.0);
    integrate_against_density(model, g, TailWeight { ln_gmax: k.min(0.0), r: 0.0 }, cfg)
}

pub fn call_price_detail(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<PriceDetail, PricingError> {
    let tv = time_value_integral(model, k, tau, cfg)?;
    Ok(PriceDetail { price: bsm::intrinsic(k) + tv.value(), ln_time_value: tv.ln_abs(), abs_error: tv.abs_error(), y_max: tv.y_max })
}

pub fn call_price(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<f64, PricingError> {
    Ok(call_price_detail(model, k, tau, cfg)?.price)
}

pub fn put_price(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<f64, PricingError> {
    let tv = time_value_integral(model, k, tau, cfg)?;
    let put_intrinsic = if k > 0.0 { k.exp_m1() } else { 0.0 };
    Ok(put_intrinsic + tv.value())
}

/// `P(Z_τ <= k)`.
pub fn digital_price(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<f64, PricingError> {
    check_tau(tau)?;
    check_k(k)?;
    let tail = TailWeight { ln_gmax: 0.0, r: 0.0 };
    if k < 0.0 {
        let g = |s: f64| {
            let v = s.exp() * tau;
            (ln_norm_cdf((k + 0.5 * v) / v.sqrt()), 1.0)
        };
        Ok(integrate_against_density(model, g, tail, cfg)?.value())
    } else {
        let g = |s: f64| {
            let v = s.exp() * tau;
            (ln_norm_cdf(-(k + 0.5 * v) / v.sqrt()), 1.0)
        };
        Ok(1.0 - integrate_against_density(model, g, tail, cfg)?.value())
    }
}

/// Call prices and implied volatilities, in input order.
pub fn smile(model: &CevModel, ks: &[f64], tau: f64, cfg: &QuadratureConfig) -> Result<Vec<SmilePoint>, PricingError> {
    ks.iter()
        .enumerate()
        .map(|(index, &k)| {
            let at = |e: PricingError| PricingError::AtPoint { index, source: Box::new(e) };
            let d = call_price_detail(model, k, tau, cfg).map_err(at)?;
            let iv = bsm::implied_vol_from_ln_tv(d.ln_time_value, k, tau).map_err(|e| at(e.into()))?;
            Ok(SmilePoint { k, tau, price: d.price, implied_vol: iv })
        })
        .collect()
}

pub fn skew_convexity_integrals(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<SkewConvexity, PricingError> {
    check_tau(tau)?;
    check_k(k)?;
    // B = ∫ e^k N(d-) ζ dy = -∫ ∂_k BS ζ dy
    let g_b = |s: f64| {
        let v = s.exp() * tau;
        let sv = v.sqrt();
        (k + ln_norm_cdf(-k / sv - 0.5 * sv), 1.0)
    };
    let b = integrate_against_density(model, g_b, TailWeight { ln_gmax: k, r: 0.0 }, cfg)?.value();
    // A = ∫ n(d+) / sqrt(yτ) ζ dy
    let g_a = |s: f64| {
        let v = s.exp() * tau;
        let sv = v.sqrt();
        let dp = -k / sv + 0.5 * sv;
        (-0.5 * dp * dp - LN_SQRT_2PI - sv.ln(), 1.0)
    };
    let a = integrate_against_density(model, g_a, TailWeight { ln_gmax: -LN_SQRT_2PI - (0.5 * tau.ln()), r: -0.5 }, cfg)?.value();
    let m = model.mass_at_zero();
    let (atom_left, atom_right) = if k < 0.0 {
        (-m * k.exp(), -m * k.exp())
    } else if k > 0.0 {
        (0.0, 0.0)
    } else {
        (-m, 0.0)
    };
    Ok(SkewConvexity {
        dk_left: -b + atom_left,
        dk_right: -b + atom_right,
        dkk_left: a - b + atom_left,
        dkk_right: a - b + atom_right,
    })
}

/// Number of longer-dated calls (maturity `big_t`) that replicates the `tau`-call's exposure
/// to the driving Brownian motion, at spot `s` and strike `e^k`. The atom at zero is not
/// treated separately: it carries no exposure.
pub fn hedge_ratio(model: &CevModel, s: f64, k: f64, tau: f64, big_t: f64, cfg: &QuadratureConfig) -> Result<f64, PricingError> {
    check_tau(tau)?;
    check_k(k)?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(PricingError::Domain(format!("spot must be positive, got {s}")));
    }
    if !(big_t >= tau && big_t.is_finite()) {
        return Err(PricingError::Domain(format!("hedge maturity {big_t} must be at least tau = {tau}")));
    }
    let kappa = k - s.ln();
    let weighted_delta = |mat: f64| -> Result<LogIntegral, PricingError> {
        let g = move |sy: f64| {
            let v = sy.exp() * mat;
            let sv = v.sqrt();
            (ln_norm_cdf(-kappa / sv + 0.5 * sv) + 0.5 * sy, 1.0)
        };
        integrate_against_density(model, g, TailWeight { ln_gmax: 0.0, r: 0.5 }, cfg)
    };
    let num = weighted_delta(tau)?;
    let den = if big_t == tau { num } else { weighted_delta(big_t)? };
    if !(den.scaled > 0.0) || den.ln_abs() == f64::NEG_INFINITY {
        return Err(PricingError::Degenerate("hedge-instrument exposure vanishes".into()));
    }
    Ok((num.ln_abs() - den.ln_abs()).exp())
}

/// `∂_s` of the spot-scaled Black-Scholes call: `N(d+)`.
pub fn bs_spot_delta(s: f64, k: f64, y: f64, tau: f64) -> f64 {
    let v = y * tau;
    norm_cdf(-(k - s.ln()) / v.sqrt() + 0.5 * v.sqrt())
}
