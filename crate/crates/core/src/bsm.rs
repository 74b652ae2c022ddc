//! Black-Scholes kernel `BS(k, w, tau)` with spot 1, strike `e^k`, variance rate `w` and no
//! rates, plus Greeks, the small- and large-maturity leading terms and implied volatility.
//!
//! Out-of-the-money values are computed so that `ln(C - intrinsic)` keeps full relative
//! accuracy far into the wings: an exact Laplace-type integral evaluated by Gauss-Laguerre
//! when `k^2/(2 w tau) >= 5`, and a Taylor expansion of the Mills ratio when the total
//! variance is small and the option is near the money.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::quadrature::gauss_laguerre;
use crate::specfun::{erf, ln_norm_cdf, mills, norm_cdf, norm_pdf, LN_SQRT_2PI};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no-arbitrage violation: price {price} outside [{lower}, 1) for k = {k}")]
    NoArbitrage { price: f64, lower: f64, k: f64 },
    #[error("implied volatility above the bracket cap {cap} for price {price}")]
    AboveCap { price: f64, cap: f64 },
}

/// A single Black-Scholes quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsQuote {
    pub k: f64,
    pub w: f64,
    pub tau: f64,
}

impl BsQuote {
    pub fn price(&self) -> Result<f64, BsError> {
        bs_call(self.k, self.w, self.tau)
    }
}

/// Partial derivatives of `BS(k, w, tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsPartials {
    pub dk: f64,
    pub dw: f64,
    pub dkk: f64,
    pub dkw: f64,
    pub dww: f64,
}


const LAGUERRE_SWITCH: f64 = 5.0;
const LAGUERRE_NODES: usize = 40;

fn laguerre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_laguerre(LAGUERRE_NODES))
}

pub fn intrinsic(k: f64) -> f64 {
    if k < 0.0 {
        -k.exp_m1()
    } else {
        0.0
    }
}

/// Call price `N(d+) - e^k N(d-)`, `d+- = -k/sqrt(w tau) +- sqrt(w tau)/2`.
pub fn bs_call(k: f64, w: f64, tau: f64) -> Result<f64, BsError> {
    check(k, w, tau)?;
    Ok(intrinsic(k) + otm_value(k, w * tau))
}

/// Put price `e^k N(-d-) - N(-d+)`.
pub fn bs_put(k: f64, w: f64, tau: f64) -> Result<f64, BsError> {
    check(k, w, tau)?;
    let tv = otm_value(k, w * tau);
    Ok(if k >= 0.0 { k.exp_m1() + tv } else { tv })
}

fn check(k: f64, w: f64, tau: f64) -> Result<(), BsError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(BsError::Domain(format!("tau must be positive, got {tau}")));
    }
    if !(w >= 0.0) {
        return Err(BsError::Domain(format!("w must be non-negative, got {w}")));
    }
    if k.is_nan() {
        return Err(BsError::Domain("k is NaN".into()));
    }
    Ok(())
}

/// Time value `BS(k, v, 1) - (1 - e^k)^+` as a function of total variance `v = w tau`.
pub fn otm_value(k: f64, v: f64) -> f64 {
    let l = ln_otm_value(k, v);
    if l == f64::NEG_INFINITY {
        0.0
    } else {
        l.exp()
    }
}

/// `ln(BS - intrinsic)` at total variance `v`: the out-of-the-money option value.
pub fn ln_otm_value(k: f64, v: f64) -> f64 {
    if k >= 0.0 {
        ln_otm_call(k, v)
    } else {
        // put-call symmetry: P(k) = e^k C(-k)
        k + ln_otm_call(-k, v)
    }
}

/// `ln BS(k, v, 1)` for `k >= 0`.
fn ln_otm_call(k: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if v.is_infinite() {
        return 0.0;
    }
    if k == 0.0 {
        return erf(v.sqrt() / (2.0 * std::f64::consts::SQRT_2)).ln();
    }
    let x = k * k / (2.0 * v);
    if x >= LAGUERRE_SWITCH {
        // C = e^{k/2 - x} / (2 sqrt(2 pi)) int_0^inf e^{-r} (sqrt v / x) (1 + r/x)^{-3/2} e^{-u/8} dr,
        // u = v / (1 + r/x)
        let (nodes, weights) = laguerre();
        let mut sum = 0.0;
        for (r, wt) in nodes.iter().zip(weights) {
            let z = 1.0 + r / x;
            sum += wt * z.powf(-1.5) * (-v / (8.0 * z)).exp();
        }
        return k / 2.0 - x + (sum * v.sqrt() / (2.0 * x)).ln() - LN_SQRT_2PI;
    }
    let sv = v.sqrt();
    let h = -k / sv;
    let t = 0.5 * sv;
    if v <= 1.0 {
        // C = n(d+) [M(h + t) - M(h - t)] with M = N / n, expanded around h
        let m0 = mills(h);
        let mut d_prev = m0;
        let mut d_cur = 1.0 + h * m0;
        let mut diff = 0.0;
        let mut tp = t;
        let mut fact = 1.0;
        for n in 1..120 {
            if n % 2 == 1 {
                let term = d_cur * tp / fact;
                diff += term;
                if term.abs() < 1e-17 * diff.abs() {
                    break;
                }
            }
            let next = h * d_cur + n as f64 * d_prev;
            d_prev = d_cur;
            d_cur = next;
            tp *= t;
            fact *= (n + 1) as f64;
        }
        let dp = h + t;
        return -0.5 * dp * dp - LN_SQRT_2PI + (2.0 * diff).ln();
    }
    let dp = h + t;
    let dm = h - t;
    let c = norm_cdf(dp) - k.exp() * norm_cdf(dm);
    if c > 0.0 {
        c.ln()
    } else {
        ln_norm_cdf(dp) + (-(k.exp() * (ln_norm_cdf(dm) - ln_norm_cdf(dp)).exp()).ln_1p()).max(f64::MIN)
    }
}

/// Analytic partials of `BS(k, w, tau)` for `w > 0`.
pub fn bs_partials(k: f64, w: f64, tau: f64) -> Result<BsPartials, BsError> {
    check(k, w, tau)?;
    if !(w > 0.0) {
        return Err(BsError::Domain("partials need w > 0".into()));
    }
    let v = w * tau;
    let sv = v.sqrt();
    let dp = -k / sv + 0.5 * sv;
    let dm = dp - sv;
    let n_dp = norm_pdf(dp);
    let dk = -k.exp() * norm_cdf(dm);
    let dkk = dk + n_dp / sv;
    let dv = n_dp / (2.0 * sv);
    let ddp_dv = k / (2.0 * v * sv) + 1.0 / (4.0 * sv);
    let ddm_dv = k / (2.0 * v * sv) - 1.0 / (4.0 * sv);
    // e^k n(d-) = n(d+)
    let dkv = -n_dp * ddm_dv;
    let dvv = dv * (-dp * ddp_dv - 1.0 / (2.0 * v));
    Ok(BsPartials { dk, dw: tau * dv, dkk, dkw: tau * dkv, dww: tau * tau * dvv })
}

/// Small-maturity leading term of `BS(k, y/ttau, tau)` for `k > 0`:
/// `y^{3/2} / (k^2 sqrt(2 pi)) (tau/ttau)^{3/2} exp(-k^2 ttau / (2 y tau) + k/2)`.
/// Relative error is `O(tau/ttau)`.
pub fn bs_small_time(k: f64, y: f64, ttau: f64, tau: f64) -> f64 {
    ln_bs_small_time(k, y, ttau, tau).exp()
}

pub fn ln_bs_small_time(k: f64, y: f64, ttau: f64, tau: f64) -> f64 {
    let r = tau / ttau;
    1.5 * (y * r).ln() - 2.0 * k.ln() - LN_SQRT_2PI - k * k / (2.0 * y * r) + k / 2.0
}

/// Large-maturity leading term `1 - 4/sqrt(2 pi tau y) exp(-y tau/8 + k/2)`.
pub fn bs_large_time(k: f64, y: f64, tau: f64) -> f64 {
    1.0 - 4.0 / (2.0 * PI * tau * y).sqrt() * (-y * tau / 8.0 + k / 2.0).exp()
}

/// `1 - BS(k, w, tau)`, accurate when the call is worth almost the whole spot.
pub fn bs_call_complement(k: f64, w: f64, tau: f64) -> Result<f64, BsError> {
    check(k, w, tau)?;
    let v = w * tau;
    if v == 0.0 {
        return Ok(1.0 - intrinsic(k));
    }
    let sv = v.sqrt();
    let dp = -k / sv + 0.5 * sv;
    Ok(norm_cdf(-dp) + k.exp() * norm_cdf(dp - sv))
}

/// `ln(1 - BS(k, v, 1))` at total variance `v > 0`.
pub fn ln_call_complement(k: f64, v: f64) -> f64 {
    let sv = v.sqrt();
    let dp = -k / sv + 0.5 * sv;
    let a = ln_norm_cdf(-dp);
    let b = k + ln_norm_cdf(dp - sv);
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `1 - bs_large_time(k, y, tau)`.
pub fn bs_large_time_complement(k: f64, y: f64, tau: f64) -> f64 {
    4.0 / (2.0 * PI * tau * y).sqrt() * (-y * tau / 8.0 + k / 2.0).exp()
}

/// Implied volatility `sigma` with `BS(k, sigma^2, tau) = price`, to 1e-10 in `sigma`.
pub fn implied_vol(price: f64, k: f64, tau: f64) -> Result<f64, BsError> {
    if !(tau > 0.0) {
        return Err(BsError::Domain(format!("tau must be positive, got {tau}")));
    }
    let lower = intrinsic(k);
    if !(price >= lower && price < 1.0) {
        return Err(BsError::NoArbitrage { price, lower, k });
    }
    if price == lower {
        return Ok(0.0);
    }
    implied_vol_from_ln_tv((price - lower).ln(), k, tau)
}

/// Implied volatility from `ln(C - intrinsic)`, for time values too small to subtract.
pub fn implied_vol_from_ln_tv(ln_tv: f64, k: f64, tau: f64) -> Result<f64, BsError> {
    if ln_tv == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_max_tv = k.min(0.0);
    if !(ln_tv < ln_max_tv) {
        return Err(BsError::NoArbitrage { price: intrinsic(k) + ln_tv.exp(), lower: intrinsic(k), k });
    }
    let cap = 1e4 / tau.sqrt().min(1.0);
    // prices within a few ulps of the upper bound do not determine sigma
    if ln_max_tv - ln_tv < 8.0 * f64::EPSILON {
        return Err(BsError::AboveCap { price: intrinsic(k) + ln_tv.exp(), cap });
    }
    let f = |sig: f64| ln_otm_value(k, sig * sig * tau) - ln_tv;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > cap {
            return Err(BsError::AboveCap { price: intrinsic(k) + ln_tv.exp(), cap });
        }
    }
    let mut lo = 0.5 * hi;
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    Ok(brent(f, lo, hi, 1e-12))
}

/// Brent root finder on a bracket with `f(a) <= 0 <= f(b)`.
fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}
