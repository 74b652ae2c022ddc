//! Monte-Carlo oracle: samplers for the terminal variance and mixing estimates of option
//! prices. Given the variance the call price is exactly Black-Scholes, so only the variance
//! is simulated.
//!
//! Samples are produced in fixed-size chunks, each driven by its own ChaCha8 stream
//! (`seed`, stream = chunk index). Chunks may run on several threads; results are merged in
//! chunk order, so output does not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

use crate::bsm;
use crate::cev_dist::{BoundaryBehaviour, CevModel};

pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha), one stream per chunk of 65536 samples";
const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("exact sampler needs p = 1/2 with an absorbing origin, got p = {0}")]
    WrongRegime(f64),
    #[error("invalid input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Exact,
    Euler { steps: usize },
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Exact => "exact",
            Sampler::Euler { .. } => "euler",
        }
    }
}

pub const DEFAULT_EULER_STEPS: usize = 2000;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Fills `n` samples chunk by chunk; `fill(rng, out)` writes one chunk.
fn chunked<F>(n: usize, seed: u64, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; n];
    let chunks: Vec<(usize, &mut [f64])> = out.chunks_mut(CHUNK).enumerate().collect();
    let threads = std::thread::available_parallelism().map(|t| t.get()).unwrap_or(1).min(chunks.len().max(1));
    if threads <= 1 {
        for (i, c) in chunks {
            fill(&mut chunk_rng(seed, i), c);
        }
        return out;
    }
    let mut buckets: Vec<Vec<(usize, &mut [f64])>> = (0..threads).map(|_| Vec::new()).collect();
    for (j, item) in chunks.into_iter().enumerate() {
        buckets[j % threads].push(item);
    }
    std::thread::scope(|s| {
        for bucket in buckets {
            let fill = &fill;
            s.spawn(move || {
                for (i, c) in bucket {
                    fill(&mut chunk_rng(seed, i), c);
                }
            });
        }
    });
    out
}

/// Exact draws for `p = 1/2`, absorbing: `X = 4V/xi^2` is a zero-dimensional squared
/// Bessel process, whose time-`t` law is a Poisson(`2 y0/(xi^2 t)`) mixture of
/// Gamma(`N`, scale `2t`) laws with an exact zero when `N = 0`.
pub fn sample_exact_half(model: &CevModel, n: usize, seed: u64) -> Result<Vec<f64>, McError> {
    if (model.p() - 0.5).abs() > 1e-12 || model.effective_boundary() != Some(BoundaryBehaviour::Absorbing) {
        return Err(McError::WrongRegime(model.p()));
    }
    let xi2 = model.xi() * model.xi();
    let t = model.t();
    let poisson = Poisson::new(2.0 * model.y0() / (xi2 * t)).map_err(|e| McError::Input(e.to_string()))?;
    Ok(chunked(n, seed, |rng, out| {
        for v in out.iter_mut() {
            let k: f64 = poisson.sample(rng);
            *v = if k == 0.0 { 0.0 } else { Gamma::new(k, 2.0 * t).unwrap().sample(rng) * xi2 / 4.0 };
        }
    }))
}

/// Euler-Maruyama with full truncation, `Y <- Y + xi max(Y, 0)^p sqrt(dt) Z`. The absorbing
/// variant freezes a path at zero once it crosses; the reflecting variant takes `|Y|`.
pub fn sample_euler(model: &CevModel, n: usize, steps: usize, seed: u64) -> Result<Vec<f64>, McError> {
    if steps < 100 {
        return Err(McError::Input(format!("Euler needs at least 100 steps, got {steps}")));
    }
    let p = model.p();
    let dt = model.t() / steps as f64;
    let vol = model.xi() * dt.sqrt();
    let y0 = model.y0();
    let reflecting = model.effective_boundary() == Some(BoundaryBehaviour::Reflecting);
    let pow: fn(f64, f64) -> f64 = if p == 0.5 {
        |y, _| y.sqrt()
    } else if p == 1.0 {
        |y, _| y
    } else if p == 1.5 {
        |y, _| y * y.sqrt()
    } else if p == 0.0 {
        |_, _| 1.0
    } else {
        f64::powf
    };
    Ok(chunked(n, seed, |rng, out| {
        for v in out.iter_mut() {
            let mut y = y0;
            for _ in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                y += vol * pow(y, p) * z;
                if y <= 0.0 {
                    if reflecting {
                        y = -y;
                    } else {
                        y = 0.0;
                        break;
                    }
                }
            }
            *v = y;
        }
    }))
}

pub fn sample(model: &CevModel, n: usize, seed: u64, sampler: Sampler) -> Result<Vec<f64>, McError> {
    match sampler {
        Sampler::Exact => sample_exact_half(model, n, seed),
        Sampler::Euler { steps } => sample_euler(model, n, steps, seed),
    }
}

/// Mean and standard error of `f` over the samples.
pub fn estimate<F: Fn(f64) -> f64>(samples: &[f64], f: F) -> McEstimate {
    let n = samples.len();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut zeros = 0usize;
    let shift = samples.first().map(|&v| f(v)).unwrap_or(0.0);
    for &v in samples {
        if v == 0.0 {
            zeros += 1;
        }
        let x = f(v) - shift;
        sum += x;
        sum_sq += x * x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { (sum_sq - nf * mean * mean) / (nf - 1.0) } else { 0.0 };
    McEstimate { value: shift + mean, std_error: (var.max(0.0) / nf).sqrt(), n, zero_fraction: zeros as f64 / nf }
}

/// Average of `BS(k, V_i, tau)` over sampled variances.
pub fn mc_call_price(model: &CevModel, k: f64, tau: f64, n: usize, seed: u64, sampler: Sampler) -> Result<McEstimate, McError> {
    if !(tau > 0.0) {
        return Err(McError::Input(format!("tau must be positive, got {tau}")));
    }
    if n < 2 {
        return Err(McError::Input("need at least two samples".into()));
    }
    let samples = sample(model, n, seed, sampler)?;
    let intrinsic = bsm::intrinsic(k);
    Ok(estimate(&samples, |v| intrinsic + bsm::otm_value(k, v * tau)))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value of the two-sample statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    1.628 * ((na + nb) / (na * nb)).sqrt()
}

/// Euler step count for `p = 1/2` absorbing, doubled from `steps` until the Euler law passes
/// the 1% KS test against the exact sampler (at most three doublings). Other models return
/// `steps` unchanged.
pub fn validated_euler_steps(model: &CevModel, n: usize, steps: usize, seed: u64) -> Result<usize, McError> {
    let exact = match sample_exact_half(model, n, seed ^ 0x5eed) {
        Ok(s) => s,
        Err(McError::WrongRegime(_)) => return Ok(steps),
        Err(e) => return Err(e),
    };
    let mut s = steps;
    for _ in 0..3 {
        let euler = sample_euler(model, n, s, seed)?;
        if ks_statistic(&euler, &exact) < ks_critical_1pct(n, n) {
            return Ok(s);
        }
        s *= 2;
    }
    Ok(s)
}
