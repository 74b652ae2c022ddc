//! Integration of `g(y) zeta(y)` over `(0, inf)` in the variable `s = ln y`.
//!
//! The log-integrand is scanned for its peak, the peak is refined by golden section, and
//! panel breakpoints are laid out on a ladder of multiples of the peak width. The integrand
//! is shifted by its peak value, so integrals far below `f64::MIN_POSITIVE` keep their
//! digits. The upper end is truncated at the smallest `Y` whose tail bound falls below
//! `min(tail_mass_tol, 1e-3 * rel_tol * |I|)`; the lower end is mapped onto a finite interval.

use crate::cev_dist::CevModel;
use crate::pricer::PricingError;
use crate::quadrature::{self, Panel, QuadOptions};

/// Tolerances and truncation policy for every integral against the variance law.
///
/// `abs_tol` applies to the integral divided by its peak integrand value, so that it keeps
/// its meaning for prices of any magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub tail_mass_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { rel_tol: 1e-10, abs_tol: 1e-13, max_subdivisions: 2000, tail_mass_tol: 1e-14 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), PricingError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.rel_tol) && pos(self.abs_tol) && pos(self.tail_mass_tol)) {
            return Err(PricingError::Config("all tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(PricingError::Config("max_subdivisions must be at least 10".into()));
        }
        Ok(())
    }
}

/// Envelope of the weight in the upper tail: `|g(y)| <= e^{ln_gmax} y^r` for large `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWeight {
    pub ln_gmax: f64,
    pub r: f64,
}

/// How the upper end of the integral is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Upper {
    /// Truncate at `Y_max` from the density tail bound with this weight envelope.
    Bounded(TailWeight),
    /// Integrate to infinity through a mapped panel.
    Infinite,
}

/// An integral stored as `value * e^{ln_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegral {
    pub ln_scale: f64,
    pub scaled: f64,
    pub scaled_error: f64,
    /// Upper truncation point in `y` (infinite when the tail was integrated exactly).
    pub y_max: f64,
}

impl LogIntegral {
    pub fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            0.0
        } else {
            self.scaled * self.ln_scale.exp()
        }
    }

    pub fn abs_error(&self) -> f64 {
        self.scaled_error * self.ln_scale.exp()
    }

    /// `ln |I|`
    pub fn ln_abs(&self) -> f64 {
        self.ln_scale + self.scaled.abs().ln()
    }
}

const SCAN_STEP: f64 = 0.25;
const SCAN_HALF_WIDTH: f64 = 60.0;
const DROP: f64 = 60.0;

pub(crate) fn integrate_against_density<G>(model: &CevModel, g: G, tail: TailWeight, cfg: &QuadratureConfig) -> Result<LogIntegral, PricingError>
where
    G: Fn(f64) -> (f64, f64),
{
    integrate_with_upper(model, g, Upper::Bounded(tail), cfg, None)
}

/// `g(s)` returns `(ln |g(e^s)|, sign)` with sign in `{-1, 0, 1}`.
pub(crate) fn integrate_with_upper<G>(model: &CevModel, g: G, upper: Upper, cfg: &QuadratureConfig, fixed_y_max: Option<f64>) -> Result<LogIntegral, PricingError>
where
    G: Fn(f64) -> (f64, f64),
{
    cfg.validate()?;
    let ln_h = |s: f64| -> f64 {
        let (lg, sign) = g(s);
        if sign == 0.0 || lg == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let v = lg + model.ln_density_at_ln_y(s) + s;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let centre = match model.regime() {
        crate::cev_dist::Regime::Lognormal => model.constants().mu,
        _ => model.y0().ln(),
    };
    let (grid, best) = scan(&ln_h, centre)?;
    let (s_star, l_star) = golden_max(&ln_h, grid[best].0 - SCAN_STEP, grid[best].0 + SCAN_STEP, grid[best].1);
    let width = peak_width(&ln_h, s_star, l_star);

    let mut pts: Vec<f64> = vec![s_star];
    for dir in [-1.0, 1.0] {
        let mut m = 0.5;
        loop {
            let s = s_star + dir * m * width;
            pts.push(s);
            if ln_h(s) < l_star - DROP || m * width > 4.0 * SCAN_HALF_WIDTH {
                break;
            }
            m *= if m < 4.0 { 2.0 } else { 1.5 };
        }
    }
    // secondary humps seen by the scan
    let mut last_kept = f64::NEG_INFINITY;
    for &(s, l) in &grid {
        if l > l_star - DROP && s - last_kept >= 0.5 {
            pts.push(s);
            last_kept = s;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    let s_lo = pts[0];
    let s_hi = *pts.last().unwrap();

    let scaled = |s: f64| -> f64 {
        let (lg, sign) = g(s);
        if sign == 0.0 {
            return 0.0;
        }
        let v = lg + model.ln_density_at_ln_y(s) + s - l_star;
        if v.is_nan() {
            0.0
        } else {
            sign * v.exp()
        }
    };
    let opts = QuadOptions { abs_tol: cfg.abs_tol, rel_tol: cfg.rel_tol, max_subdivisions: cfg.max_subdivisions };

    let mut panels: Vec<Panel> = vec![Panel::LowerInf(s_lo)];
    panels.extend(pts.windows(2).map(|w| Panel::Finite(w[0], w[1])));

    let y_max;
    match upper {
        Upper::Infinite => {
            panels.push(Panel::UpperInf(s_hi));
            y_max = f64::INFINITY;
        }
        Upper::Bounded(tw) => {
            let ln_ymax = match fixed_y_max {
                Some(y) => y.ln().max(s_hi),
                None => {
                    let core = quadrature::integrate(&scaled, &panels, &QuadOptions { rel_tol: 1e-6, max_subdivisions: 200, ..opts });
                    let ln_target = (1e-3 * cfg.rel_tol * core.value.abs()).ln() + l_star;
                    let ln_target = ln_target.min(cfg.tail_mass_tol.ln());
                    truncation_point(model, tw, s_hi, ln_target)
                }
            };
            if ln_ymax > s_hi {
                let mut a = s_hi;
                while a < ln_ymax {
                    let b = (a + 4.0).min(ln_ymax);
                    panels.push(Panel::Finite(a, b));
                    a = b;
                }
            }
            y_max = ln_ymax.exp();
        }
    }

    let res = quadrature::integrate(&scaled, &panels, &opts);
    if !res.converged || !res.value.is_finite() {
        return Err(PricingError::ToleranceNotMet { abs_error: res.abs_error * l_star.exp(), subdivisions: res.subdivisions });
    }
    Ok(LogIntegral { ln_scale: l_star, scaled: res.value, scaled_error: res.abs_error, y_max })
}

fn scan<H: Fn(f64) -> f64>(ln_h: &H, centre: f64) -> Result<(Vec<(f64, f64)>, usize), PricingError> {
    let mut lo = centre - SCAN_HALF_WIDTH;
    let mut hi = centre + SCAN_HALF_WIDTH;
    for _ in 0..12 {
        let n = ((hi - lo) / SCAN_STEP).round() as usize;
        let grid: Vec<(f64, f64)> = (0..=n).map(|i| {
            let s = lo + i as f64 * SCAN_STEP;
            (s, ln_h(s))
        }).collect();
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &(_, l)) in grid.iter().enumerate() {
            if l > best.1 {
                best = (i, l);
            }
        }
        if best.1 == f64::NEG_INFINITY {
            return Err(PricingError::Degenerate("integrand vanishes on the whole scan range".into()));
        }
        if best.1 == f64::INFINITY {
            return Err(PricingError::Degenerate("integrand is infinite on the scan range".into()));
        }
        if best.0 == 0 {
            lo -= 2.0 * SCAN_HALF_WIDTH;
        } else if best.0 == n {
            hi += 2.0 * SCAN_HALF_WIDTH;
        } else {
            return Ok((grid, best.0));
        }
    }
    Err(PricingError::Degenerate("could not bracket the integrand peak".into()))
}

fn golden_max<H: Fn(f64) -> f64>(f: &H, mut a: f64, mut b: f64, f_grid: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() < 1e-10 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    let v = f(s);
    if v >= f_grid {
        (s, v)
    } else {
        (s, f_grid.max(v))
    }
}

fn peak_width<H: Fn(f64) -> f64>(f: &H, s: f64, l: f64) -> f64 {
    let mut d = SCAN_STEP / 4.0;
    let mut w = SCAN_STEP;
    for _ in 0..40 {
        let c2 = (f(s + d) - 2.0 * l + f(s - d)) / (d * d);
        w = if c2 < 0.0 && c2.is_finite() { 1.0 / (-c2).sqrt() } else { SCAN_STEP };
        if d <= 0.25 * w {
            break;
        }
        d = 0.25 * w;
        if d < 1e-9 {
            break;
        }
    }
    w.clamp(1e-8, SCAN_STEP)
}

/// Smallest `ln Y >= s_from` whose tail bound `e^{ln_gmax} int_Y^inf y^r zeta` is below
/// `e^{ln_target}`.
fn truncation_point(model: &CevModel, tw: TailWeight, s_from: f64, ln_target: f64) -> f64 {
    let ok = |s: f64| tw.ln_gmax + model.ln_tail_bound(s, tw.r) <= ln_target;
    if ok(s_from) {
        return s_from;
    }
    let mut step = 1.0;
    let mut lo = s_from;
    let mut hi = s_from + step;
    while !ok(hi) {
        lo = hi;
        step *= 2.0;
        hi += step;
        if hi > s_from + 4000.0 {
            return hi;
        }
    }
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cev_dist::BoundaryBehaviour;
    use approx::assert_relative_eq;

    #[test]
    fn normalization_all_regimes() {
        let cfg = QuadratureConfig::default();
        for (p, b) in [(0.125, BoundaryBehaviour::Absorbing), (0.125, BoundaryBehaviour::Reflecting), (0.5, BoundaryBehaviour::Absorbing), (1.0, BoundaryBehaviour::Absorbing), (1.5, BoundaryBehaviour::Absorbing), (0.0, BoundaryBehaviour::Reflecting)] {
            let m = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, b).unwrap();
            let r = integrate_against_density(&m, |_| (0.0, 1.0), TailWeight { ln_gmax: 0.0, r: 0.0 }, &cfg).unwrap();
            assert_relative_eq!(r.value() + m.mass_at_zero(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn tiny_integrands_keep_relative_accuracy() {
        let m = CevModel::with_xi_auto(0.07, 0.2, 0.5, 1.0, BoundaryBehaviour::Absorbing).unwrap();
        let shift = -800.0;
        let r = integrate_against_density(&m, |_| (shift, 1.0), TailWeight { ln_gmax: shift, r: 0.0 }, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(r.ln_abs(), shift, epsilon = 1e-10);
    }
}
