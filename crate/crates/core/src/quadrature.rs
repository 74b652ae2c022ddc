//! Global adaptive Gauss-Kronrod (10/21-point) quadrature over a set of panels.
//!
//! Panels may be finite or semi-infinite. Semi-infinite panels are mapped onto `(0, 1]`
//! with `x = a +/- (1 - t)/t`. All panels share one priority queue ordered by error,
//! so refinement effort goes where the error is largest across the whole domain.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_931_996,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances for [`integrate`]. Convergence means `error <= max(abs_tol, rel_tol * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_subdivisions: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

/// One piece of the integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Panel {
    Finite(f64, f64),
    /// `(-inf, b]`
    LowerInf(f64),
    /// `[a, +inf)`
    UpperInf(f64),
}

#[derive(Clone, Copy)]
struct Segment {
    panel: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// 21-point Kronrod estimate on `[a, b]` with its embedded 10-point Gauss error estimate.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
    (res_k * half, err)
}

fn mapped<F: FnMut(f64) -> f64>(f: &mut F, panel: Panel, t: f64) -> f64 {
    match panel {
        Panel::Finite(..) => f(t),
        Panel::LowerInf(b) => {
            let x = b - (1.0 - t) / t;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (t * t)
            }
        }
        Panel::UpperInf(a) => {
            let x = a + (1.0 - t) / t;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (t * t)
            }
        }
    }
}

fn panel_range(panel: Panel) -> (f64, f64) {
    match panel {
        Panel::Finite(a, b) => (a, b),
        Panel::LowerInf(_) | Panel::UpperInf(_) => (0.0, 1.0),
    }
}

/// Integrates `f` over the union of `panels` with global adaptive bisection.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, panels: &[Panel], opts: &QuadOptions) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (i, &p) in panels.iter().enumerate() {
        let (lo, hi) = panel_range(p);
        if lo == hi {
            continue;
        }
        let (v, e) = gk21(&mut |t| mapped(&mut f, p, t), lo, hi);
        total += v;
        total_err += e;
        heap.push(Segment { panel: i, lo, hi, value: v, error: e });
    }
    let mut subdivisions = heap.len();
    let mut frozen: Vec<Segment> = Vec::new();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            return QuadResult { value: total, abs_error: total_err, subdivisions, converged: true };
        }
        if subdivisions >= opts.max_subdivisions || heap.is_empty() {
            break;
        }
        let seg = heap.pop().unwrap();
        let mid = 0.5 * (seg.lo + seg.hi);
        if !(mid > seg.lo && mid < seg.hi) || (seg.hi - seg.lo).abs() <= 1e3 * f64::EPSILON * mid.abs().max(1e-300) {
            // cannot resolve further at machine precision
            frozen.push(seg);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let p = panels[seg.panel];
        let (v1, e1) = gk21(&mut |t| mapped(&mut f, p, t), seg.lo, mid);
        let (v2, e2) = gk21(&mut |t| mapped(&mut f, p, t), mid, seg.hi);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { panel: seg.panel, lo: seg.lo, hi: mid, value: v1, error: e1 });
        heap.push(Segment { panel: seg.panel, lo: mid, hi: seg.hi, value: v2, error: e2 });
        subdivisions += 1;
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = heap.iter().chain(&frozen).map(|s| s.value).sum::<f64>();
    let err = heap.iter().chain(&frozen).map(|s| s.error).sum::<f64>();
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
    QuadResult { value, abs_error: err, subdivisions, converged: err <= tol }
}

/// Gauss-Laguerre nodes and weights for `int_0^inf e^{-x} f(x) dx`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (z - x[i - 2])
            }
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (p1 - p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs() {
                break;
            }
        }
        // w_i = 1 / (x_i L_n'(x_i)^2)
        x[i] = z;
        w[i] = 1.0 / (z * pp * pp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk21_is_exact_for_degree_31_polynomials() {
        let (v, _) = gk21(&mut |x: f64| x.powi(30) + 3.0 * x.powi(7), -1.0, 2.0);
        let exact = (2f64.powi(31) + 1.0) / 31.0 + 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert_relative_eq!(v, exact, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks_and_infinite_tails() {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-12, max_subdivisions: 500 };
        let r = integrate(|x| (-x * x).exp(), &[Panel::LowerInf(-1.0), Panel::Finite(-1.0, 1.0), Panel::UpperInf(1.0)], &opts);
        assert!(r.converged);
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), max_relative = 1e-12);

        let w = 1e-4;
        let panels = [Panel::Finite(0.0, 0.299), Panel::Finite(0.299, 0.3), Panel::Finite(0.3, 0.301), Panel::Finite(0.301, 1.0)];
        let r = integrate(|x| (-(x - 0.3).powi(2) / (2.0 * w * w)).exp(), &panels, &opts);
        assert_relative_eq!(r.value, w * (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-11);

        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[Panel::Finite(0.0, 1.0)], &QuadOptions { max_subdivisions: 2000, ..opts });
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-14, max_subdivisions: 12 };
        let r = integrate(|x: f64| (1.0 / x).sin(), &[Panel::Finite(1e-3, 1.0)], &opts);
        assert!(!r.converged);
    }

    #[test]
    fn laguerre_integrates_polynomials_and_exponentials() {
        let (x, w) = gauss_laguerre(32);
        let s: f64 = w.iter().sum();
        assert_relative_eq!(s, 1.0, max_relative = 1e-13);
        let m5: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(5)).sum();
        assert_relative_eq!(m5, 120.0, max_relative = 1e-12);
        let e: f64 = x.iter().zip(&w).map(|(x, w)| w * (-0.5 * x).exp()).sum();
        assert_relative_eq!(e, 2.0 / 3.0, max_relative = 1e-13);
    }
}
