//! Closed-form small- and large-maturity expansions of prices and implied volatilities,
//! the at-the-money level, skew and convexity, and the large-deviation speed and rate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::bsm::{self, BsError};
use crate::cev_dist::{BoundaryBehaviour, CevModel, DistError, Moment};
use crate::pricer::PricingError;
use crate::quadrature::{self, Panel, QuadOptions};
use crate::specfun::ln_gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("k = 0 is excluded from the small-maturity expansions; use atm_level")]
    AtTheMoney,
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("regime not supported: {0}")]
    RegimeNotSupported(String),
    #[error("integral did not settle: {0}")]
    Divergent(String),
    #[error("required moment E(V^{0}) is infinite")]
    InfiniteMoment(f64),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Bs(#[from] BsError),
}

/// Which form of the small-maturity constants applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallTimeRegime {
    BelowOne,
    One,
    AboveOne,
}

impl SmallTimeRegime {
    pub fn of(p: f64) -> Self {
        if (p - 1.0).abs() < crate::cev_dist::P_ONE_TOL {
            SmallTimeRegime::One
        } else if p < 1.0 {
            SmallTimeRegime::BelowOne
        } else {
            SmallTimeRegime::AboveOne
        }
    }
}

/// The functions `f0, f1, g0, g1` whose stationary points drive the small-maturity expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeFunctions {
    pub k: f64,
    pub p: f64,
    pub y0: f64,
    /// `xi^2 t`
    pub var_scale: f64,
}

impl RegimeFunctions {
    pub fn new(model: &CevModel, k: f64) -> Self {
        RegimeFunctions { k, p: model.p(), y0: model.y0(), var_scale: model.var_scale() }
    }

    fn q(&self) -> f64 {
        1.0 - self.p
    }

    pub fn f0(&self, y: f64) -> f64 {
        let q = self.q();
        self.k * self.k / (2.0 * y) + y.powf(2.0 * q) / (2.0 * self.var_scale * q * q)
    }

    pub fn f0_prime(&self, y: f64) -> f64 {
        let q = self.q();
        -self.k * self.k / (2.0 * y * y) + y.powf(2.0 * q - 1.0) / (self.var_scale * q)
    }

    pub fn f0_second(&self, y: f64) -> f64 {
        let q = self.q();
        self.k * self.k / (y * y * y) + (2.0 * q - 1.0) * y.powf(2.0 * q - 2.0) / (self.var_scale * q)
    }

    pub fn f1(&self, y: f64) -> f64 {
        let q = self.q();
        (y * self.y0).powf(q) / (self.var_scale * q * q)
    }

    pub fn f1_prime(&self, y: f64) -> f64 {
        let q = self.q();
        self.y0.powf(q) * y.powf(q - 1.0) / (self.var_scale * q)
    }

    pub fn g0(&self, y: f64) -> f64 {
        self.k * self.k / (2.0 * y) + y.ln() / self.var_scale
    }

    pub fn g0_prime(&self, y: f64) -> f64 {
        -self.k * self.k / (2.0 * y * y) + 1.0 / (self.var_scale * y)
    }

    pub fn g0_second(&self, y: f64) -> f64 {
        self.k * self.k / (y * y * y) - 1.0 / (self.var_scale * y * y)
    }

    pub fn g1(&self, y: f64) -> f64 {
        y.ln() / self.var_scale
    }

    pub fn g1_prime(&self, y: f64) -> f64 {
        1.0 / (self.var_scale * y)
    }
}

/// Small-maturity constants for a given model and `k != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallTimeConstants {
    pub regime: SmallTimeRegime,
    pub k: f64,
    pub beta_p: Option<f64>,
    pub ybar_p: Option<f64>,
    pub y_star: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `c5` in closed form, without the `p = 1` correction.
    pub c5: f64,
    pub ln_c5: f64,
    /// For `p = 1`, the second closed form of `c5`.
    pub c5_alt: Option<f64>,
    /// For `p = 1`, `-(ln y*)^2 / (2 xi^2 t)`: the Laplace expansion of the lognormal
    /// exponent leaves this factor out of `c5`. Zero otherwise.
    pub ln_c5_correction: f64,
    /// For `p > 1`, `J^{2p}(k)`.
    pub j_integral: Option<f64>,
    pub remainder_order: &'static str,
}

impl SmallTimeConstants {
    pub fn h1(&self, tau: f64) -> f64 {
        match self.regime {
            SmallTimeRegime::BelowOne => tau.powf(self.beta_p.unwrap() - 1.0),
            SmallTimeRegime::One => {
                let l = tau.ln();
                (l + (-l).ln()).powi(2)
            }
            SmallTimeRegime::AboveOne => 0.0,
        }
    }

    pub fn h2(&self, tau: f64) -> f64 {
        match self.regime {
            SmallTimeRegime::BelowOne => tau.powf(0.5 * (self.beta_p.unwrap() - 1.0)),
            SmallTimeRegime::One => {
                let l = tau.ln().abs();
                l.ln().powi(2) / l
            }
            SmallTimeRegime::AboveOne => 0.0,
        }
    }

    /// `ln` of the expansion's time value without `ln_c5_correction`.
    pub fn ln_time_value_uncorrected(&self, tau: f64) -> f64 {
        -self.c1 * self.h1(tau) + self.c2 * self.h2(tau) + self.c3 * tau.ln() + self.c4 * tau.ln().abs().ln() + self.ln_c5
    }

    pub fn ln_time_value(&self, tau: f64) -> f64 {
        self.ln_time_value_uncorrected(tau) + self.ln_c5_correction
    }
}

fn check_k(k: f64) -> Result<(), AsymptoticsError> {
    if k == 0.0 {
        Err(AsymptoticsError::AtTheMoney)
    } else if !k.is_finite() {
        Err(AsymptoticsError::Domain(format!("k must be finite, got {k}")))
    } else {
        Ok(())
    }
}

fn check_small_tau(tau: f64) -> Result<(), AsymptoticsError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(AsymptoticsError::Domain(format!("small-maturity expansions need 0 < tau < 1, got {tau}")))
    }
}

pub fn small_time_constants(model: &CevModel, k: f64) -> Result<SmallTimeConstants, AsymptoticsError> {
    check_k(k)?;
    let f = RegimeFunctions::new(model, k);
    let p = model.p();
    let (xi, t, y0) = (model.xi(), model.t(), model.y0());
    let vs = model.var_scale();
    let regime = SmallTimeRegime::of(p);
    let c = match regime {
        SmallTimeRegime::BelowOne => {
            let q = 1.0 - p;
            let beta = 1.0 / (3.0 - 2.0 * p);
            let yb = (k * k * vs * q / 2.0).powf(beta);
            let f0pp = f.f0_second(yb);
            let f1p = f.f1_prime(yb);
            let ln_c5 = 0.5 * p * y0.ln() + 1.5 * q * yb.ln() + k / 2.0 - y0.powf(2.0 * q) / (2.0 * vs * q * q) + f1p * f1p / (2.0 * f0pp)
                - (k * k * xi).ln()
                - 0.5 * (2.0 * PI * f0pp * t).ln();
            SmallTimeConstants {
                regime,
                k,
                beta_p: Some(beta),
                ybar_p: Some(yb),
                y_star: None,
                c1: f.f0(yb),
                c2: f.f1(yb),
                c3: (6.0 - 5.0 * p) / (6.0 - 4.0 * p),
                c4: 0.0,
                c5: ln_c5.exp(),
                ln_c5,
                c5_alt: None,
                ln_c5_correction: 0.0,
                j_integral: None,
                remainder_order: "O(tau^((1-beta_p)/2))",
            }
        }
        SmallTimeRegime::One => {
            let mu = model.constants().mu;
            let ys = k * k * vs / 2.0;
            let common = k / 2.0 - mu * mu / (2.0 * vs) + mu * ys.ln() / vs;
            let ln_c5 = (k.abs() * xi.powi(3) * t.powf(1.5)).ln() + common - (4.0 * PI.sqrt()).ln();
            let c5_alt = (ys.sqrt() * common.exp()) / (k * k * xi * (2.0 * PI * t).sqrt() * f.g0_second(ys).sqrt());
            SmallTimeConstants {
                regime,
                k,
                beta_p: None,
                ybar_p: None,
                y_star: Some(ys),
                c1: 1.0 / (2.0 * vs),
                c2: 1.0 / (2.0 * vs),
                c3: f.g0(ys) - mu / vs,
                c4: f.g1(ys) - mu / vs - 2.0,
                c5: ln_c5.exp(),
                ln_c5,
                c5_alt: Some(c5_alt),
                ln_c5_correction: -ys.ln().powi(2) / (2.0 * vs),
                j_integral: None,
                remainder_order: "O(1/|log tau|)",
            }
        }
        SmallTimeRegime::AboveOne => {
            let q = 1.0 - p;
            let eta = 0.5 / (p - 1.0);
            let j = jp_integral_cached(2.0 * p, k)?;
            let ln_c5 = (2.0 * (p - 1.0)).ln() - y0.powf(2.0 * q) / (2.0 * vs * q * q) + j.ln()
                - (eta + 1.0) * (2.0 * q * q * vs).ln()
                - ln_gamma(eta + 1.0);
            SmallTimeConstants {
                regime,
                k,
                beta_p: None,
                ybar_p: None,
                y_star: None,
                c1: 0.0,
                c2: 0.0,
                c3: 2.0 * p - 1.0,
                c4: 0.0,
                c5: ln_c5.exp(),
                ln_c5,
                c5_alt: None,
                ln_c5_correction: 0.0,
                j_integral: Some(j),
                remainder_order: "O(tau^(p-1))",
            }
        }
    };
    Ok(c)
}

/// `J^p(k) = ∫ BS(k, y/T, T) y^{-p} dy` for `k > 0`, with the put-form integrand for `k < 0`.
pub fn jp_integral(p: f64, k: f64, big_t: f64) -> Result<f64, AsymptoticsError> {
    check_k(k)?;
    if !(p > 1.0) {
        return Err(AsymptoticsError::Domain(format!("J^p needs p > 1, got {p}")));
    }
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(AsymptoticsError::Domain(format!("T must be positive, got {big_t}")));
    }
    // in s = ln(y/T) the integrand is TV(k, e^s T) (e^s T)^{1-p}
    let ln_t = big_t.ln();
    let ln_h = |s: f64| bsm::ln_otm_value(k, s.exp() * big_t) + (1.0 - p) * (s + ln_t);
    let centre = (k * k).ln() - ln_t;
    let (mut s_peak, mut l_peak) = (centre, f64::NEG_INFINITY);
    let mut s = centre - 40.0;
    while s <= centre + 40.0 {
        let l = ln_h(s);
        if l > l_peak {
            s_peak = s;
            l_peak = l;
        }
        s += 0.25;
    }
    if !l_peak.is_finite() {
        return Err(AsymptoticsError::Divergent("integrand has no finite peak".into()));
    }
    let mut pts: Vec<f64> = [-30.0, -12.0, -6.0, -3.0, -1.5, -0.5, 0.0, 0.5, 1.5, 3.0, 6.0, 12.0, 30.0].iter().map(|d| s_peak + d).collect();
    pts.sort_by(f64::total_cmp);
    let mut panels = vec![Panel::LowerInf(pts[0])];
    panels.extend(pts.windows(2).map(|w| Panel::Finite(w[0], w[1])));
    panels.push(Panel::UpperInf(*pts.last().unwrap()));
    let res = quadrature::integrate(
        |s: f64| {
            let v = ln_h(s) - l_peak;
            if v.is_nan() {
                0.0
            } else {
                v.exp()
            }
        },
        &panels,
        &QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_subdivisions: 2000 },
    );
    if !res.converged || !(res.value > 0.0) || !res.value.is_finite() {
        return Err(AsymptoticsError::Divergent(format!("J^{p}({k}) error estimate {:e}", res.abs_error)));
    }
    Ok(res.value * l_peak.exp())
}

fn jp_integral_cached(p: f64, k: f64) -> Result<f64, AsymptoticsError> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (p.to_bits(), k.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = jp_integral(p, k, 1.0)?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

/// `ln(C - intrinsic)` from the small-maturity expansion.
pub fn ln_time_value_small_tau(model: &CevModel, k: f64, tau: f64) -> Result<f64, AsymptoticsError> {
    check_small_tau(tau)?;
    Ok(small_time_constants(model, k)?.ln_time_value(tau))
}

/// Leading-order small-maturity call price.
pub fn call_small_tau(model: &CevModel, k: f64, tau: f64) -> Result<f64, AsymptoticsError> {
    Ok(bsm::intrinsic(k) + ln_time_value_small_tau(model, k, tau)?.exp())
}

/// Leading-order small-maturity implied variance `sigma_tau^2(k)`.
pub fn implied_vol_small_tau(model: &CevModel, k: f64, tau: f64) -> Result<f64, AsymptoticsError> {
    check_k(k)?;
    check_small_tau(tau)?;
    let p = model.p();
    let vs = model.var_scale();
    Ok(match SmallTimeRegime::of(p) {
        SmallTimeRegime::BelowOne => {
            let beta = 1.0 / (3.0 - 2.0 * p);
            (1.0 - beta) * (k * k * vs * (1.0 - p) / (2.0 * tau)).powf(beta)
        }
        SmallTimeRegime::One => k * k * vs / (tau * tau.ln().powi(2)),
        SmallTimeRegime::AboveOne => k * k / (2.0 * (2.0 * p - 1.0) * tau * tau.ln().abs()),
    })
}

/// `E(sqrt V)`, the small-maturity limit of the at-the-money implied volatility.
pub fn atm_level(model: &CevModel) -> Result<f64, AsymptoticsError> {
    moment_finite(model, 0.5)
}

fn moment_finite(model: &CevModel, r: f64) -> Result<f64, AsymptoticsError> {
    match model.moment(r)? {
        Moment::Finite(v) => Ok(v),
        Moment::Infinite => Err(AsymptoticsError::InfiniteMoment(r)),
    }
}

fn moment_or_inf(model: &CevModel, r: f64) -> Result<f64, AsymptoticsError> {
    Ok(model.moment(r)?.finite().unwrap_or(f64::INFINITY))
}

/// Small-maturity at-the-money skew and convexity of `k -> sigma_tau^2(k)`.
/// Terms whose moments are infinite come out as `±inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmSkewConvexity {
    pub skew_left: f64,
    pub skew_right: f64,
    pub convexity: f64,
}

pub fn atm_skew_convexity_small_tau(model: &CevModel, tau: f64) -> Result<AtmSkewConvexity, AsymptoticsError> {
    if !(tau > 0.0) {
        return Err(AsymptoticsError::Domain(format!("tau must be positive, got {tau}")));
    }
    let m = model.mass_at_zero();
    if !(m < 1.0) {
        return Err(AsymptoticsError::Domain("mass at zero must be below one".into()));
    }
    let e_half = atm_level(model)?;
    let e_three_halves = moment_or_inf(model, 1.5)?;
    let e_minus_half = moment_or_inf(model, -0.5)?;
    let smooth = -e_half / 48.0 * (e_three_halves - e_half.powi(3)) * tau;
    let atom = m * e_half * PI.sqrt() / (2.0 * tau).sqrt();
    let convexity = e_half / tau * (e_minus_half - (1.0 - m * m * PI.sqrt() / 8.0) / e_half);
    Ok(AtmSkewConvexity { skew_left: smooth - atom, skew_right: smooth + atom, convexity })
}

/// `𝔐(e)` with `e` standing for `eta` or `-eta`.
pub fn m_frak(model: &CevModel, e: f64) -> f64 {
    let p = model.p();
    ln_m_frak_without_gamma(model, e).exp() * crate::specfun::gamma(0.5 - 2.0 * p)
}

fn ln_m_frak_without_gamma(model: &CevModel, e: f64) -> f64 {
    let p = model.p();
    let q = 1.0 - p;
    let vs = model.var_scale();
    (3.0 - 6.0 * p - e) * std::f64::consts::LN_2 - 0.5 * PI.ln() - ln_gamma(1.0 + e) - (2.0 * e + 1.0) * q.abs().ln() - (e + 1.0) * vs.ln()
        - model.y0().powf(2.0 * q) / (2.0 * vs * q * q)
}

/// Large-maturity expansion, split into its constant and its decaying correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeTimePrice {
    pub price: f64,
    pub constant_term: f64,
    /// The subtracted term, so that `price = constant_term - correction`.
    pub correction: f64,
}

fn large_time_boundary(model: &CevModel) -> Result<BoundaryBehaviour, AsymptoticsError> {
    let p = model.p();
    match model.effective_boundary() {
        Some(BoundaryBehaviour::Absorbing) if p < 0.75 => Ok(BoundaryBehaviour::Absorbing),
        Some(BoundaryBehaviour::Reflecting) if p < 0.25 => Ok(BoundaryBehaviour::Reflecting),
        _ => Err(AsymptoticsError::RegimeNotSupported(format!(
            "large-maturity expansions need p < 3/4 absorbing or p < 1/4 reflecting (p = {p}, boundary {:?})",
            model.boundary()
        ))),
    }
}

pub fn call_large_tau(model: &CevModel, k: f64, tau: f64) -> Result<LargeTimePrice, AsymptoticsError> {
    if !(tau > 0.0) {
        return Err(AsymptoticsError::Domain(format!("tau must be positive, got {tau}")));
    }
    let p = model.p();
    let eta = model.constants().eta.expect("p != 1 in the supported regimes");
    match large_time_boundary(model)? {
        BoundaryBehaviour::Absorbing => {
            let m = model.mass_at_zero();
            let constant_term = 1.0 - m + m * bsm::intrinsic(k);
            // (1/2 - 2p) Gamma(1/2 - 2p) = Gamma(3/2 - 2p), finite at p = 1/4
            let ln_corr = (8.0 * model.y0()).ln() + k / 2.0 + ln_m_frak_without_gamma(model, -eta) - (2.0 - 2.0 * p) * tau.ln();
            let correction = ln_corr.exp() * crate::specfun::gamma(1.5 - 2.0 * p);
            Ok(LargeTimePrice { price: constant_term - correction, constant_term, correction })
        }
        BoundaryBehaviour::Reflecting => {
            let correction = (k / 2.0).exp() * m_frak(model, eta) * tau.powf(-(1.0 - 2.0 * p));
            Ok(LargeTimePrice { price: 1.0 - correction, constant_term: 1.0, correction })
        }
    }
}

/// Large-maturity implied variance `8 (1 - 2p) log(tau) / tau`, reflecting `p < 1/4` only.
pub fn implied_vol_large_tau(model: &CevModel, k: f64, tau: f64) -> Result<f64, AsymptoticsError> {
    let _ = k;
    if !(tau > 1.0) {
        return Err(AsymptoticsError::Domain(format!("large-maturity expansions need tau > 1, got {tau}")));
    }
    if large_time_boundary(model)? != BoundaryBehaviour::Reflecting {
        return Err(AsymptoticsError::RegimeNotSupported("implied volatility expansion needs a reflecting origin with p < 1/4".into()));
    }
    Ok(8.0 * (1.0 - 2.0 * model.p()) * tau.ln() / tau)
}

/// Speed `h*(tau, p)` and rate `Λ*_p(k)` of the small-maturity large deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpSpeedRate {
    pub speed: f64,
    pub rate: f64,
}

pub fn ldp_speed_rate(model: &CevModel, k: f64, tau: f64) -> Result<LdpSpeedRate, AsymptoticsError> {
    check_small_tau(tau)?;
    let p = model.p();
    let l = tau.ln();
    Ok(match SmallTimeRegime::of(p) {
        SmallTimeRegime::BelowOne => {
            let beta = 1.0 / (3.0 - 2.0 * p);
            let rate = if k == 0.0 { 0.0 } else { small_time_constants(model, k)?.c1 };
            LdpSpeedRate { speed: tau.powf(1.0 - beta), rate }
        }
        SmallTimeRegime::One => LdpSpeedRate { speed: 1.0 / (l * l), rate: 1.0 / (2.0 * model.var_scale()) },
        SmallTimeRegime::AboveOne => LdpSpeedRate { speed: 1.0 / l.abs(), rate: 2.0 * p - 1.0 },
    })
}
