//! Terminal law of the CEV variance driver `dY = xi Y^p dB` at time `t`: the density on
//! `(0, inf)`, the atom at the origin, and moments.

use std::f64::consts::PI;

use thiserror::Error;

use crate::mixture::{self, QuadratureConfig, TailWeight};
use crate::pricer::PricingError;
use crate::specfun::{self, ln_gamma};

/// `|p - 1|` below this is treated as the lognormal case `p = 1`.
pub const P_ONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryBehaviour {
    Absorbing,
    Reflecting,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("reflecting boundary requires p < 1/2 (got p = {0}); the origin is absorbing for p in [1/2, 1)")]
    InadmissibleBoundary(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Which closed form the density takes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `p = 1`: lognormal with parameters `(mu, xi^2 t)`.
    Lognormal,
    /// `phi_nu`: `nu = -eta` for absorbing `p < 1`, `nu = eta` for `p > 1` or reflecting `p < 1/2`.
    Bessel { nu: f64 },
}

/// Derived constants `eta = 1/(2(p-1))` (absent at `p = 1`) and `mu = ln y0 - xi^2 t / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CevConstants {
    pub eta: Option<f64>,
    pub mu: f64,
}

/// Parameters of the randomized-variance model. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CevModel {
    y0: f64,
    xi: f64,
    t: f64,
    p: f64,
    boundary: BoundaryBehaviour,
}

/// A moment that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

impl CevModel {
    pub fn new(y0: f64, xi: f64, t: f64, p: f64, boundary: BoundaryBehaviour) -> Result<Self, ModelError> {
        for (name, v) in [("y0", y0), ("xi", xi), ("t", t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !p.is_finite() {
            return Err(ModelError::InvalidParameter(format!("p must be finite, got {p}")));
        }
        if boundary == BoundaryBehaviour::Reflecting && (0.5..1.0).contains(&p) {
            return Err(ModelError::InadmissibleBoundary(p));
        }
        Ok(CevModel { y0, xi, t, p, boundary })
    }

    /// `xi = c * y0^{1/2 - p}`, the convention that keeps the ATM level comparable across `p`.
    pub fn with_xi_auto(y0: f64, c: f64, t: f64, p: f64, boundary: BoundaryBehaviour) -> Result<Self, ModelError> {
        if !(y0 > 0.0) {
            return Err(ModelError::InvalidParameter(format!("y0 must be positive, got {y0}")));
        }
        Self::new(y0, c * y0.powf(0.5 - p), t, p, boundary)
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn boundary(&self) -> BoundaryBehaviour {
        self.boundary
    }

    pub fn is_lognormal(&self) -> bool {
        (self.p - 1.0).abs() < P_ONE_TOL
    }

    /// Boundary that actually applies: absorbing for `p` in `[1/2, 1)`, irrelevant (reported
    /// as `None`) for `p >= 1`.
    pub fn effective_boundary(&self) -> Option<BoundaryBehaviour> {
        if self.is_lognormal() || self.p > 1.0 {
            None
        } else if self.p >= 0.5 {
            Some(BoundaryBehaviour::Absorbing)
        } else {
            Some(self.boundary)
        }
    }

    pub fn constants(&self) -> CevConstants {
        let eta = if self.is_lognormal() { None } else { Some(0.5 / (self.p - 1.0)) };
        CevConstants { eta, mu: self.y0.ln() - 0.5 * self.xi * self.xi * self.t }
    }

    pub fn regime(&self) -> Regime {
        if self.is_lognormal() {
            return Regime::Lognormal;
        }
        let eta = 0.5 / (self.p - 1.0);
        match self.effective_boundary() {
            Some(BoundaryBehaviour::Absorbing) => Regime::Bessel { nu: -eta },
            _ => Regime::Bessel { nu: eta },
        }
    }

    /// `xi^2 t`
    pub fn var_scale(&self) -> f64 {
        self.xi * self.xi * self.t
    }

    /// Probability that the variance is exactly zero.
    pub fn mass_at_zero(&self) -> f64 {
        if self.effective_boundary() != Some(BoundaryBehaviour::Absorbing) {
            return 0.0;
        }
        let q = 1.0 - self.p;
        let z = self.y0.powf(2.0 * q) / (2.0 * self.var_scale() * q * q);
        // 1 - P(-eta, z) evaluated as Q(-eta, z) so that tiny atoms keep their digits
        specfun::upper_gamma_reg(0.5 / q, z).expect("shape 1/(2(1-p)) is positive for p < 1")
    }

    pub fn density(&self, y: f64) -> Result<f64, DistError> {
        Ok(self.log_density(y)?.exp())
    }

    pub fn log_density(&self, y: f64) -> Result<f64, DistError> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(DistError::Domain(format!("density needs finite y > 0, got {y}")));
        }
        Ok(self.ln_density_at_ln_y(y.ln()))
    }

    /// `ln zeta(e^s)`, total over the whole real line (returns `-inf` where the density
    /// underflows any representation).
    pub(crate) fn ln_density_at_ln_y(&self, s: f64) -> f64 {
        let vs = self.var_scale();
        match self.regime() {
            Regime::Lognormal => {
                let mu = self.constants().mu;
                let d = s - mu;
                -d * d / (2.0 * vs) - s - 0.5 * (2.0 * PI * vs).ln()
            }
            Regime::Bessel { nu } => {
                let q = 1.0 - self.p;
                let c = vs * q * q;
                let ln_y0 = self.y0.ln();
                let a = (q * s).exp();
                let b = (q * ln_y0).exp();
                let gauss = -(a - b) * (a - b) / (2.0 * c);
                if !gauss.is_finite() {
                    return f64::NEG_INFINITY;
                }
                let ln_x = q * s + q * ln_y0 - c.ln();
                0.5 * ln_y0 + (0.5 - 2.0 * self.p) * s - (q.abs() * vs).ln() + gauss + ln_bessel_scaled_from_ln_x(nu, ln_x)
            }
        }
    }

    /// Upper bound on `ln int_Y^inf y^r zeta(y) dy` with `ln_big_y = ln Y`, from the density
    /// bounds used in the tail estimates. `+inf` when no bound is available at that `Y`.
    pub fn ln_tail_bound(&self, ln_big_y: f64, r: f64) -> f64 {
        let vs = self.var_scale();
        match self.regime() {
            Regime::Lognormal => {
                let mu = self.constants().mu;
                let sig = vs.sqrt();
                let z = (ln_big_y - mu - r * vs) / sig;
                r * mu + 0.5 * r * r * vs + specfun::ln_norm_cdf(-z)
            }
            Regime::Bessel { nu } if self.p > 1.0 => {
                let p = self.p;
                if r >= 2.0 * p - 1.0 {
                    return f64::INFINITY;
                }
                let q = 1.0 - p;
                let c = vs * q * q;
                let eta = nu;
                let ln_chi = -(q.abs() * vs).ln() - ln_gamma(1.0 + eta) - eta * (2.0 * c).ln() - self.y0.powf(2.0 * q) / (2.0 * c);
                let big_m = self.y0.powf(2.0 - 2.0 * p) / (2.0 * c);
                let t1 = (r + 1.0 - 2.0 * p) * ln_big_y - (2.0 * p - 1.0 - r).ln();
                let t2 = big_m - (2.0 * c).ln() + (r + 3.0 - 4.0 * p) * ln_big_y - (4.0 * p - 3.0 - r).ln();
                let t3 = big_m - c.ln() + q * self.y0.ln() + (r + 2.0 - 3.0 * p) * ln_big_y - (3.0 * p - 2.0 - r).ln();
                ln_chi + log_sum_exp(&[t1, t2, t3])
            }
            Regime::Bessel { nu } => {
                let p = self.p;
                let q = 1.0 - p;
                let c = vs * q * q;
                let b = self.y0.powf(q);
                let (ln_cnu, m) = if nu >= -0.5 {
                    (-ln_gamma(nu + 1.0), 1.0)
                } else {
                    ((nu + 2.0).ln() - ln_gamma(nu + 2.0), 2.0)
                };
                let ln_k = 0.5 * self.y0.ln() + ln_cnu + nu * (b / (2.0 * c)).ln() - (q * q * vs).ln();
                let gamma = (0.5 - p + r) / q + nu;
                let big_a = (q * ln_big_y).exp();
                let centre = m * b;
                if !(big_a > centre) {
                    return f64::INFINITY;
                }
                let ln_tail = if gamma <= 0.0 {
                    let u = (big_a - centre) / (2.0 * c).sqrt();
                    gamma * big_a.ln() + (0.5 * PI * c).sqrt().ln() + specfun::erfcx(u).ln() - u * u
                } else {
                    let dpsi = gamma / big_a - (big_a - centre) / c;
                    if dpsi >= 0.0 {
                        return f64::INFINITY;
                    }
                    gamma * big_a.ln() - (big_a - centre).powi(2) / (2.0 * c) - (-dpsi).ln()
                };
                ln_k + (m * m - 1.0) * b * b / (2.0 * c) + ln_tail
            }
        }
    }

    /// Lower and upper bounds on `zeta(y / tau)` for `p > 1`, the sandwich around
    /// `chi(tau, p) y^{-2p}`. `None` for `p <= 1`.
    pub fn density_bounds_p_gt_1(&self, y: f64, tau: f64) -> Option<(f64, f64)> {
        if self.p <= 1.0 || self.is_lognormal() {
            return None;
        }
        let p = self.p;
        let c = self.var_scale() * (1.0 - p) * (1.0 - p);
        let chi = self.chi(tau);
        let base = chi / y.powf(2.0 * p);
        let lo = base * (1.0 - (tau / y).powf(2.0 * p - 2.0) / (2.0 * c));
        let big_m = self.y0.powf(2.0 - 2.0 * p) / (2.0 * c);
        let hi = base * (1.0 + big_m.exp() * ((tau / y).powf(2.0 * p - 2.0) / (2.0 * c) + (tau / (y * self.y0)).powf(p - 1.0) / c));
        Some((lo, hi))
    }

    /// `chi(tau, p)` for `p > 1`.
    pub fn chi(&self, tau: f64) -> f64 {
        let p = self.p;
        let eta = (0.5 / (p - 1.0)).abs();
        let vs = self.var_scale();
        let c = vs * (1.0 - p) * (1.0 - p);
        (2.0 * p * tau.ln() - ((1.0 - p).abs() * vs).ln() - ln_gamma(1.0 + eta) - eta * (2.0 * c).ln() - self.y0.powf(2.0 * (1.0 - p)) / (2.0 * c)).exp()
    }

    /// `E(V^r)`, including the atom, with the default quadrature settings.
    pub fn moment(&self, r: f64) -> Result<Moment, DistError> {
        self.moment_with(r, &QuadratureConfig::default())
    }

    pub fn moment_with(&self, r: f64, cfg: &QuadratureConfig) -> Result<Moment, DistError> {
        if r == 0.0 {
            return Ok(Moment::Finite(1.0));
        }
        if r < 0.0 && self.mass_at_zero() > 0.0 {
            return Ok(Moment::Infinite);
        }
        if self.is_lognormal() {
            let mu = self.constants().mu;
            return Ok(Moment::Finite((r * mu + 0.5 * r * r * self.var_scale()).exp()));
        }
        self.moment_quadrature(r, cfg)
    }

    /// Quadrature route for `E(V^r)` in every regime, the atom contributing zero for `r > 0`.
    pub fn moment_quadrature(&self, r: f64, cfg: &QuadratureConfig) -> Result<Moment, DistError> {
        if !self.moment_integrable(r) {
            return Ok(Moment::Infinite);
        }
        let res = mixture::integrate_against_density(self, |s| (r * s, 1.0), TailWeight { ln_gmax: 0.0, r }, cfg)?;
        Ok(Moment::Finite(res.value()))
    }

    /// Whether `int y^r zeta(y) dy` converges at both ends.
    pub(crate) fn moment_integrable(&self, r: f64) -> bool {
        if self.is_lognormal() {
            return true;
        }
        if self.p > 1.0 {
            return r < 2.0 * self.p - 1.0;
        }
        // near zero zeta ~ y^{1-2p} (absorbing) or y^{-2p} (reflecting)
        let alpha = match self.effective_boundary() {
            Some(BoundaryBehaviour::Reflecting) => -2.0 * self.p,
            _ => 1.0 - 2.0 * self.p,
        };
        r + 1.0 + alpha > 0.0
    }
}

/// `ln(e^{-x} I_nu(x))` given `ln x`, exact in the leading term when `x` underflows.
fn ln_bessel_scaled_from_ln_x(nu: f64, ln_x: f64) -> f64 {
    if ln_x < -300.0 {
        return nu * (ln_x - std::f64::consts::LN_2) - ln_gamma(nu + 1.0);
    }
    let x = ln_x.exp();
    if !x.is_finite() {
        return -0.5 * (2.0 * PI).ln() - 0.5 * ln_x;
    }
    specfun::ln_bessel_i_scaled_unchecked(nu, x)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
