//! Cumulant generating functions of the variance for `p = 0` (both boundaries) and
//! `p = 1/2`, the bridge to the log-price, and the implied-variance wing slopes.

use thiserror::Error;

use crate::cev_dist::{BoundaryBehaviour, CevModel};
use crate::mixture::{integrate_with_upper, QuadratureConfig, Upper};
use crate::pricer::PricingError;
use crate::specfun::ln_norm_cdf;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MgfError {
    #[error("u = {u} is outside the effective domain ({lower}, {upper})")]
    Domain { u: f64, lower: f64, upper: f64 },
    #[error("closed form only for p = 0 or p = 1/2, got p = {0}")]
    Unsupported(f64),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Effective domain of `u -> ln E(e^{uV})`; both ends open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfDomain {
    pub lower: f64,
    pub upper: f64,
}

impl MgfDomain {
    pub fn contains(&self, u: f64) -> bool {
        u > self.lower && u < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Closed {
    ZeroAbsorbing,
    ZeroReflecting,
    Half,
}

const P_TOL: f64 = 1e-12;

fn closed(model: &CevModel) -> Result<Closed, MgfError> {
    let p = model.p();
    if p.abs() < P_TOL {
        Ok(match model.boundary() {
            BoundaryBehaviour::Absorbing => Closed::ZeroAbsorbing,
            BoundaryBehaviour::Reflecting => Closed::ZeroReflecting,
        })
    } else if (p - 0.5).abs() < P_TOL {
        Ok(Closed::Half)
    } else {
        Err(MgfError::Unsupported(p))
    }
}

pub fn domain(model: &CevModel) -> Result<MgfDomain, MgfError> {
    Ok(match closed(model)? {
        Closed::Half => MgfDomain { lower: f64::NEG_INFINITY, upper: 2.0 / model.var_scale() },
        _ => MgfDomain { lower: f64::NEG_INFINITY, upper: f64::INFINITY },
    })
}

/// `ln E(e^{uV})`, the atom at zero included.
pub fn lambda_v(model: &CevModel, u: f64) -> Result<f64, MgfError> {
    if u.is_nan() {
        return Err(MgfError::Input("u is NaN".into()));
    }
    let kind = closed(model)?;
    let dom = domain(model)?;
    if !dom.contains(u) {
        return Err(MgfError::Domain { u, lower: dom.lower, upper: dom.upper });
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let y0 = model.y0();
    let vs = model.var_scale();
    let s = vs.sqrt();
    // V = y0 + xi B_t reflected or killed at zero:
    // E e^{uV} 1{V>0} = e^{u y0 + u^2 s^2/2} N((y0 + u s^2)/s) -+ e^{-u y0 + u^2 s^2/2} N((u s^2 - y0)/s)
    let a = u * y0 + 0.5 * u * u * vs + ln_norm_cdf((y0 + u * vs) / s);
    let b = -u * y0 + 0.5 * u * u * vs + ln_norm_cdf((u * vs - y0) / s);
    Ok(match kind {
        Closed::Half => 2.0 * y0 * u / (2.0 - u * vs),
        Closed::ZeroReflecting => {
            let m = a.max(b);
            m + ((a - m).exp() + (b - m).exp()).ln()
        }
        Closed::ZeroAbsorbing => {
            let cont = a + (-(b - a).exp()).ln_1p();
            let atom = model.mass_at_zero().ln();
            let m = cont.max(atom);
            m + ((cont - m).exp() + (atom - m).exp()).ln()
        }
    })
}

/// `ln E(e^{u Z_tau}) = lambda_v(u (u - 1) tau / 2)`.
pub fn lambda_z(model: &CevModel, u: f64, tau: f64) -> Result<f64, MgfError> {
    if !(tau >= 0.0) {
        return Err(MgfError::Input(format!("tau must be non-negative, got {tau}")));
    }
    lambda_v(model, 0.5 * u * (u - 1.0) * tau)
}

/// `∫ e^{zy} ζ(y) dy + m_t` by quadrature, for any `p`.
pub fn mgf_quadrature(model: &CevModel, z: f64, cfg: &QuadratureConfig) -> Result<f64, MgfError> {
    let g = |s: f64| (z * s.exp(), 1.0);
    let cont = integrate_with_upper(model, g, Upper::Infinite, cfg, None)?;
    Ok(cont.value() + model.mass_at_zero())
}

/// `psi(u) = 2 - 4 (sqrt(u (u + 1)) - u)`, evaluated without cancellation.
pub fn psi(u: f64) -> f64 {
    if u == 0.0 {
        return 2.0;
    }
    if u == f64::INFINITY {
        return 0.0;
    }
    let r = (1.0 + 1.0 / u).sqrt();
    2.0 / (u * (r + 1.0) * (r + 1.0))
}

/// Critical moments and wing slopes of the implied total variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeeWings {
    pub u_plus: f64,
    pub u_minus: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

pub fn lee_wings(model: &CevModel, tau: f64) -> Result<LeeWings, MgfError> {
    if !(tau > 0.0) {
        return Err(MgfError::Input(format!("tau must be positive, got {tau}")));
    }
    match closed(model)? {
        Closed::Half => {
            let root = (1.0 + 16.0 / (model.var_scale() * tau)).sqrt();
            let u_plus = 0.5 + 0.5 * root;
            let u_minus = 0.5 * root - 0.5;
            Ok(LeeWings { u_plus, u_minus, beta_plus: psi(u_plus - 1.0), beta_minus: psi(u_minus) })
        }
        _ => Ok(LeeWings { u_plus: f64::INFINITY, u_minus: f64::INFINITY, beta_plus: 0.0, beta_minus: 0.0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half() -> CevModel {
        CevModel::new(0.07, 0.2, 0.5, 0.5, BoundaryBehaviour::Absorbing).unwrap()
    }

    fn zero(b: BoundaryBehaviour) -> CevModel {
        CevModel::with_xi_auto(0.07, 0.2, 0.5, 0.0, b).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let m = half();
        assert_eq!(lambda_v(&m, 0.0).unwrap(), 0.0);
        assert_relative_eq!(lambda_v(&m, 1.0).unwrap(), 0.14 / 1.98, max_relative = 1e-15);
        let pole = domain(&m).unwrap().upper;
        assert_relative_eq!(pole, 100.0, max_relative = 1e-15);
        assert!(lambda_v(&m, pole * (1.0 - 1e-12)).unwrap() > 1e9);
        assert!(matches!(lambda_v(&m, pole), Err(MgfError::Domain { .. })));
        for u in [-3.0, 0.3, 2.5] {
            assert_relative_eq!(lambda_z(&m, u, 0.7).unwrap(), lambda_z(&m, 1.0 - u, 0.7).unwrap(), max_relative = 1e-14);
        }
        assert_eq!(lambda_z(&m, 1.0, 3.0).unwrap(), 0.0);
        let q = CevModel::new(0.07, 0.2, 0.5, 0.3, BoundaryBehaviour::Absorbing).unwrap();
        assert!(matches!(lambda_v(&q, 1.0), Err(MgfError::Unsupported(_))));
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cfg = QuadratureConfig::default();
        for m in [half(), zero(BoundaryBehaviour::Absorbing), zero(BoundaryBehaviour::Reflecting)] {
            for z in [-40.0, -2.0, 0.5, 10.0] {
                let q = mgf_quadrature(&m, z, &cfg).unwrap();
                assert_relative_eq!(lambda_v(&m, z).unwrap().exp(), q, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn convexity_of_lambda_v() {
        for m in [half(), zero(BoundaryBehaviour::Absorbing), zero(BoundaryBehaviour::Reflecting)] {
            let h = 0.5;
            let mut z = -30.0;
            while z < 90.0 {
                let d2 = lambda_v(&m, z + h).unwrap() - 2.0 * lambda_v(&m, z).unwrap() + lambda_v(&m, z - h).unwrap();
                assert!(d2 >= -1e-10, "z={z} d2={d2}");
                z += 1.0;
            }
        }
    }

    #[test]
    fn wing_slopes() {
        let m = half();
        let w = lee_wings(&m, 1.0).unwrap();
        assert_relative_eq!(w.u_plus, (1.0 + 801f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(w.u_minus, (801f64.sqrt() - 1.0) / 2.0, max_relative = 1e-15);
        let x: f64 = 0.02;
        let closed = 2.0 / x.sqrt() * x / ((x + 16.0).sqrt() + 4.0);
        assert_relative_eq!(w.beta_plus, closed, max_relative = 1e-12);
        assert_eq!(w.beta_plus, w.beta_minus);
        assert!((w.beta_plus - 0.035344).abs() < 1e-6);
        let mut prev = (0.0, 0.0);
        for i in 0..40 {
            let tau = 10f64.powf(-3.0 + 0.25 * i as f64);
            let b = lee_wings(&m, tau).unwrap().beta_plus;
            assert!(b > prev.0 && b < 2.0);
            if i > 0 {
                // concave in tau: slopes between consecutive points decrease
                let slope = (b - prev.0) / (tau - prev.1);
                let next_tau = 10f64.powf(-3.0 + 0.25 * (i + 1) as f64);
                let nb = lee_wings(&m, next_tau).unwrap().beta_plus;
                assert!((nb - b) / (next_tau - tau) <= slope * (1.0 + 1e-9));
            }
            prev = (b, tau);
        }
        assert!(lee_wings(&m, 1e6).unwrap().beta_plus > 1.9);
        let z = lee_wings(&zero(BoundaryBehaviour::Reflecting), 1.0).unwrap();
        assert_eq!((z.beta_plus, z.beta_minus), (0.0, 0.0));
    }

    #[test]
    fn psi_range() {
        let mut prev = psi(0.0);
        assert_eq!(prev, 2.0);
        for i in 1..200 {
            let v = psi(i as f64 * 0.37);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn rescaled_limit_dichotomy() {
        let m = half();
        let edge = 2.0 / (m.xi() * m.t().sqrt());
        for &tau in &[1e-8f64, 1e-10] {
            let inside = tau.sqrt() * lambda_z(&m, 0.9 * edge / tau.sqrt(), tau).unwrap();
            assert!(inside < 1e-2, "tau={tau} {inside}");
            assert!(lambda_z(&m, 1.1 * edge / tau.sqrt(), tau).is_err());
        }
        // the inside values still shrink like sqrt(tau) at moderate maturities
        let a = 1e-4f64.sqrt() * lambda_z(&m, 0.9 * edge / 1e-2, 1e-4).unwrap();
        let b = 1e-6f64.sqrt() * lambda_z(&m, 0.9 * edge / 1e-3, 1e-6).unwrap();
        assert_relative_eq!(a / b, 10.0, max_relative = 0.05);
    }
}
