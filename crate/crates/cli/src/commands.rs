use cevmix::asymptotics::{self, SmallTimeRegime};
use cevmix::mc_oracle::{self, Sampler};
use cevmix::{bsm, mgf, pricer, AsymptoticsError, CevModel, McError, MgfError, QuadratureConfig};

use crate::args::{AsymptoteCmd, Command, GridCmd, HedgeCmd, McCmd, SamplerKind, WingsCmd};
use crate::output::{fmt_g17, Cell, Table};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or config; exit code 2.
    Usage(String),
    /// The model is outside the regime a command covers; exit code 3.
    Unsupported(String),
}

pub fn run(cmd: &Command) -> Result<Table, Failure> {
    let common = cmd.common();
    let model = common.model().map_err(|e| Failure::Usage(e.to_string()))?;
    let cfg = common.quadrature();
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut table = match cmd {
        Command::Price(g) | Command::Smile(g) => prices(cmd.name(), &model, g, &cfg, false)?,
        Command::Digital(g) => prices(cmd.name(), &model, g, &cfg, true)?,
        Command::Asymptote(a) => asymptote(&model, a)?,
        Command::Wings(w) => wings(&model, w)?,
        Command::LargeTime(g) => large_time(&model, g, &cfg)?,
        Command::McCheck(m) => mc_check(&model, m, &cfg)?,
        Command::Hedge(h) => hedge(&model, h, &cfg)?,
    };
    let mut meta = vec![
        ("p".to_string(), fmt_g17(model.p())),
        ("y0".to_string(), fmt_g17(model.y0())),
        ("xi".to_string(), fmt_g17(model.xi())),
        ("t".to_string(), fmt_g17(model.t())),
        ("boundary".to_string(), format!("{:?}", model.boundary()).to_lowercase()),
        ("rel_tol".to_string(), fmt_g17(cfg.rel_tol)),
        ("abs_tol".to_string(), fmt_g17(cfg.abs_tol)),
        ("max_subdivisions".to_string(), cfg.max_subdivisions.to_string()),
        ("tail_mass_tol".to_string(), fmt_g17(cfg.tail_mass_tol)),
    ];
    meta.append(&mut table.metadata);
    table.metadata = meta;
    Ok(table)
}

/// Maps `f` over `items` on all available cores; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if threads <= 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn grid(g: &GridCmd) -> Result<Vec<(f64, f64)>, Failure> {
    let ks = g.ks().map_err(Failure::Usage)?;
    let taus = g.taus().map_err(Failure::Usage)?;
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Failure::Usage(format!("maturities must be positive, got {t}")));
    }
    Ok(taus.iter().flat_map(|&tau| ks.iter().map(move |&k| (k, tau))).collect())
}

fn empties(n: usize) -> Vec<Cell> {
    vec![Cell::Empty; n]
}

fn prices(name: &str, model: &CevModel, g: &GridCmd, cfg: &QuadratureConfig, digital: bool) -> Result<Table, Failure> {
    let pts = grid(g)?;
    let mut cols = vec!["k", "strike", "tau", "price", "implied_vol"];
    if digital {
        cols.push("digital");
    }
    let mut table = Table::new(name, &cols);
    let rows = par_map(&pts, |&(k, tau)| -> Result<Vec<Cell>, String> {
        let d = pricer::call_price_detail(model, k, tau, cfg).map_err(|e| e.to_string())?;
        let iv = bsm::implied_vol_from_ln_tv(d.ln_time_value, k, tau).map_err(|e| e.to_string())?;
        let mut row = vec![Cell::Num(d.price), Cell::Num(iv)];
        if digital {
            row.push(Cell::Num(pricer::digital_price(model, k, tau, cfg).map_err(|e| e.to_string())?));
        }
        Ok(row)
    });
    for (&(k, tau), r) in pts.iter().zip(rows) {
        let mut row = vec![Cell::Num(k), Cell::Num(k.exp()), Cell::Num(tau)];
        match r {
            Ok(mut v) => {
                row.append(&mut v);
                table.push(row, None);
            }
            Err(e) => {
                row.extend(empties(cols.len() - 3));
                table.push(row, Some(e));
            }
        }
    }
    Ok(table)
}

fn implied_var(model: &CevModel, k: f64, tau: f64, cfg: &QuadratureConfig) -> Result<f64, String> {
    let ln_tv = pricer::time_value_integral(model, k, tau, cfg).map_err(|e| e.to_string())?.ln_abs();
    let s = bsm::implied_vol_from_ln_tv(ln_tv, k, tau).map_err(|e| e.to_string())?;
    Ok(s * s)
}

fn asymptote(model: &CevModel, a: &AsymptoteCmd) -> Result<Table, Failure> {
    let cfg = a.grid.common.quadrature();
    let pts = grid(&a.grid)?;
    let regime = SmallTimeRegime::of(model.p());
    let cols = ["k", "tau", "sigma2_numeric", "sigma2_asymptote", "ratio", "j_integral"];
    let mut table = Table::new("asymptote", &cols);
    table.meta("t_role", if a.forward { "forward-start date" } else { "variance horizon" });
    table.meta("regime", format!("{regime:?}"));
    let rows = par_map(&pts, |&(k, tau)| -> Result<Vec<Cell>, String> {
        if k == 0.0 {
            return Err("k = 0 is not covered by the small-maturity expansion".into());
        }
        let asym = asymptotics::implied_vol_small_tau(model, k, tau).map_err(|e| e.to_string())?;
        let j = if regime == SmallTimeRegime::AboveOne {
            asymptotics::small_time_constants(model, k).map_err(|e| e.to_string())?.j_integral
        } else {
            None
        };
        let num = implied_var(model, k, tau, &cfg)?;
        Ok(vec![Cell::Num(num), Cell::Num(asym), Cell::Num(num / asym), j.into()])
    });
    for (&(k, tau), r) in pts.iter().zip(rows) {
        let mut row = vec![Cell::Num(k), Cell::Num(tau)];
        match r {
            Ok(mut v) => {
                row.append(&mut v);
                table.push(row, None);
            }
            Err(e) => {
                row.extend(empties(4));
                table.push(row, Some(e));
            }
        }
    }
    Ok(table)
}

fn wings(model: &CevModel, w: &WingsCmd) -> Result<Table, Failure> {
    if let Err(MgfError::Unsupported(p)) = mgf::domain(model) {
        return Err(Failure::Unsupported(format!("wing slopes are available for p = 0 and p = 1/2 only, got p = {p}")));
    }
    let mut table = Table::new("wings", &["tau", "u_plus", "u_minus", "beta_plus", "beta_minus"]);
    for &tau in &w.tau {
        match mgf::lee_wings(model, tau) {
            Ok(l) => table.push(vec![tau.into(), l.u_plus.into(), l.u_minus.into(), l.beta_plus.into(), l.beta_minus.into()], None),
            Err(e) => table.push(vec![tau.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty], Some(e.to_string())),
        }
    }
    Ok(table)
}

fn large_time(model: &CevModel, g: &GridCmd, cfg: &QuadratureConfig) -> Result<Table, Failure> {
    let pts = grid(g)?;
    if let Err(AsymptoticsError::RegimeNotSupported(msg)) = asymptotics::call_large_tau(model, pts[0].0, pts[0].1) {
        return Err(Failure::Unsupported(msg));
    }
    let cols = ["k", "tau", "price", "asymptote", "constant_term", "correction", "implied_var_numeric", "implied_var_asymptote"];
    let mut table = Table::new("large-time", &cols);
    let rows = par_map(&pts, |&(k, tau)| -> Result<Vec<Cell>, String> {
        let lt = asymptotics::call_large_tau(model, k, tau).map_err(|e| e.to_string())?;
        let price = pricer::call_price(model, k, tau, cfg).map_err(|e| e.to_string())?;
        let iv_num = implied_var(model, k, tau, cfg).ok();
        let iv_asym = asymptotics::implied_vol_large_tau(model, k, tau).ok();
        Ok(vec![price.into(), lt.price.into(), lt.constant_term.into(), lt.correction.into(), iv_num.into(), iv_asym.into()])
    });
    for (&(k, tau), r) in pts.iter().zip(rows) {
        let mut row = vec![Cell::Num(k), Cell::Num(tau)];
        match r {
            Ok(mut v) => {
                row.append(&mut v);
                table.push(row, None);
            }
            Err(e) => {
                row.extend(empties(6));
                table.push(row, Some(e));
            }
        }
    }
    Ok(table)
}

fn mc_check(model: &CevModel, m: &McCmd, cfg: &QuadratureConfig) -> Result<Table, Failure> {
    let pts = grid(&m.grid)?;
    if m.n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let sampler = match m.sampler {
        SamplerKind::Exact => Sampler::Exact,
        SamplerKind::Euler => Sampler::Euler { steps: m.steps },
    };
    let samples = match mc_oracle::sample(model, m.n, m.seed, sampler) {
        Ok(s) => s,
        Err(McError::WrongRegime(_)) => {
            return Err(Failure::Unsupported(format!("the exact sampler needs p = 1/2 with an absorbing origin, got p = {}", model.p())))
        }
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    let cols = ["k", "tau", "mc_price", "std_error", "quadrature", "z_score", "zero_fraction"];
    let mut table = Table::new("mc-check", &cols);
    table.meta("seed", m.seed);
    table.meta("n", m.n);
    table.meta("sampler", sampler.name());
    if let Sampler::Euler { steps } = sampler {
        table.meta("steps", steps);
    }
    table.meta("rng", mc_oracle::RNG_NAME);
    let rows = par_map(&pts, |&(k, tau)| -> Result<Vec<Cell>, String> {
        let intrinsic = bsm::intrinsic(k);
        let est = mc_oracle::estimate(&samples, |v| intrinsic + bsm::otm_value(k, v * tau));
        let q = pricer::call_price(model, k, tau, cfg).map_err(|e| e.to_string())?;
        Ok(vec![est.value.into(), est.std_error.into(), q.into(), ((est.value - q) / est.std_error).into(), est.zero_fraction.into()])
    });
    for (&(k, tau), r) in pts.iter().zip(rows) {
        let mut row = vec![Cell::Num(k), Cell::Num(tau)];
        match r {
            Ok(mut v) => {
                row.append(&mut v);
                table.push(row, None);
            }
            Err(e) => {
                row.extend(empties(5));
                table.push(row, Some(e));
            }
        }
    }
    Ok(table)
}

fn hedge(model: &CevModel, h: &HedgeCmd, cfg: &QuadratureConfig) -> Result<Table, Failure> {
    let pts = grid(&h.grid)?;
    let mut table = Table::new("hedge", &["k", "tau", "big_t", "spot", "theta"]);
    let rows = par_map(&pts, |&(k, tau)| pricer::hedge_ratio(model, h.spot, k, tau, h.big_t, cfg).map_err(|e| e.to_string()));
    for (&(k, tau), r) in pts.iter().zip(rows) {
        let row = vec![Cell::Num(k), Cell::Num(tau), Cell::Num(h.big_t), Cell::Num(h.spot)];
        match r {
            Ok(theta) => table.push([row, vec![theta.into()]].concat(), None),
            Err(e) => table.push([row, vec![Cell::Empty]].concat(), Some(e)),
        }
    }
    Ok(table)
}
