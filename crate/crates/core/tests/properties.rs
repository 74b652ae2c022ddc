use cevmix::asymptotics::{self, RegimeFunctions};
use cevmix::bsm;
use cevmix::mgf;
use cevmix::pricer;
use cevmix::specfun;
use cevmix::{BoundaryBehaviour, CevModel, QuadratureConfig};
use proptest::prelude::*;

fn p_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.125), Just(0.25), Just(0.5), Just(0.75), Just(1.0), Just(1.5), Just(2.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn erf_and_norm_cdf_symmetry(z in -8.0f64..8.0) {
        prop_assert_eq!(specfun::erf(-z), -specfun::erf(z));
        prop_assert!((specfun::norm_cdf(z) + specfun::norm_cdf(-z) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bessel_sandwich(nu in -0.499f64..12.0, x in 1e-3f64..50.0) {
        let ln_i = specfun::ln_bessel_i_scaled(nu, x).unwrap() + x;
        let base = nu * (x / 2.0).ln() - specfun::ln_gamma(nu + 1.0);
        prop_assert!(base <= ln_i + 1e-12 * (1.0 + ln_i.abs()));
        prop_assert!(ln_i <= base + x + 1e-12 * (1.0 + ln_i.abs()));
    }

    #[test]
    fn lower_gamma_monotone(n in 0.05f64..20.0, x in 0.0f64..40.0, dx in 1e-6f64..5.0) {
        prop_assert!(specfun::lower_gamma_reg(n, x).unwrap() <= specfun::lower_gamma_reg(n, x + dx).unwrap());
    }

    #[test]
    fn bs_parity_and_vega(k in -3.0f64..3.0, w in 1e-4f64..2.0, tau in 1e-3f64..10.0) {
        let c = bsm::bs_call(k, w, tau).unwrap();
        let p = bsm::bs_put(k, w, tau).unwrap();
        prop_assert!((c - p - (1.0 - k.exp())).abs() < 1e-12 * (1.0 + k.exp()));
        prop_assert!(bsm::bs_partials(k, w, tau).unwrap().dw > 0.0);
    }

    #[test]
    fn implied_vol_round_trip_from_time_value(k in -1.0f64..1.0, sigma in 0.05f64..1.5, tau in 0.01f64..5.0) {
        let ln_tv = bsm::ln_otm_value(k, sigma * sigma * tau);
        let s = bsm::implied_vol_from_ln_tv(ln_tv, k, tau).unwrap();
        prop_assert!((s / sigma - 1.0).abs() < 1e-8, "{} {}", s, sigma);
    }

    #[test]
    fn implied_vol_round_trip_from_price(k in -1.0f64..1.0, sigma in 0.05f64..1.5, tau in 0.01f64..5.0) {
        let c = bsm::bs_call(k, sigma * sigma, tau).unwrap();
        // the price pins sigma down only while the time value is resolvable next to it
        prop_assume!(bsm::otm_value(k, sigma * sigma * tau) > 1e-6 * c);
        let s = bsm::implied_vol(c, k, tau).unwrap();
        prop_assert!((s - sigma).abs() < 1e-8);
    }

    #[test]
    fn laplace_point_is_stationary(p in 0.05f64..0.95, k in 0.02f64..0.5) {
        let m = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Absorbing).unwrap();
        let c = asymptotics::small_time_constants(&m, k).unwrap();
        let f = RegimeFunctions::new(&m, k);
        let y = c.ybar_p.unwrap();
        prop_assert!((f.f0_prime(y) * y).abs() < 1e-9 * f.f0(y));
    }

    #[test]
    fn boundary_invariance_of_small_time_constants(p in 0.01f64..0.49, k in 0.02f64..0.5) {
        let a = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Absorbing).unwrap();
        let r = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Reflecting).unwrap();
        prop_assert_eq!(asymptotics::small_time_constants(&a, k).unwrap(), asymptotics::small_time_constants(&r, k).unwrap());
    }

    #[test]
    fn psi_in_range(u in 0.0f64..1e6) {
        let v = mgf::psi(u);
        prop_assert!(v > 0.0 && v <= 2.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn no_arbitrage_in_strike(p in p_value(), k in -0.4f64..0.4, tau in 0.02f64..2.0) {
        let m = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Absorbing).unwrap();
        let cfg = QuadratureConfig::default();
        // convexity holds in the strike e^k, not in k
        let h = 0.05;
        let big_k = k.exp();
        let c: Vec<f64> = [big_k - h, big_k, big_k + h].iter().map(|&x| pricer::call_price(&m, x.ln(), tau, &cfg).unwrap()).collect();
        prop_assert!(c[1] < c[0] && c[2] < c[1]);
        prop_assert!(c[0] - 2.0 * c[1] + c[2] > -1e-12);
        prop_assert!(c[1] >= bsm::intrinsic(k) && c[1] <= 1.0);
    }

    #[test]
    fn price_increases_with_maturity(p in p_value(), k in -0.3f64..0.3, tau in 0.02f64..1.0) {
        let m = CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Absorbing).unwrap();
        let cfg = QuadratureConfig::default();
        prop_assert!(pricer::call_price(&m, k, tau * 1.5, &cfg).unwrap() > pricer::call_price(&m, k, tau, &cfg).unwrap());
    }
}
