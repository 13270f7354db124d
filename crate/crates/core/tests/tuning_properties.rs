use fsl_core::tuning::{optimal_delta, optimal_l, theoretical_rate, RateModel};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Rate formula evaluated in exact rational arithmetic.
fn rate_oracle(m: &RateModel, delta: f64, l: f64) -> f64 {
    let two = BigRational::from_integer(BigInt::from(2));
    let (alpha, big_m, tau, kappa, c, beta) = (
        exact(m.alpha),
        exact(m.m),
        exact(m.tau),
        exact(m.kappa),
        exact(m.c_omega),
        exact(m.beta),
    );
    let l = exact(l);
    let flow = &two / &big_m + &two * &tau * &kappa / (&c * &c);
    let coupling = (&two - exact(delta)) * &alpha * &alpha / &beta;
    (&l / (&l + flow + coupling)).to_f64().unwrap()
}

/// `min{A/(2B), 2}` in exact arithmetic, with `A` and `B` formed literally.
fn delta_oracle(m: &RateModel) -> f64 {
    let two = BigRational::from_integer(BigInt::from(2));
    let (alpha, big_m, tau, kappa, c, beta) = (
        exact(m.alpha),
        exact(m.m),
        exact(m.tau),
        exact(m.kappa),
        exact(m.c_omega),
        exact(m.beta),
    );
    let b = &alpha * &alpha / &beta;
    let a = &two / &big_m + &two * &tau * &kappa / (&c * &c) + &two * &b;
    let d = a / (&two * b);
    if d > two {
        2.0
    } else {
        d.to_f64().unwrap()
    }
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

prop_compose! {
    fn rate_model()(
        alpha in 0.05f64..1.0,
        m in log_uniform(1e5, 1e17),
        tau in log_uniform(1e-3, 1e3),
        kappa in log_uniform(1e-20, 1e-5),
        c_omega in log_uniform(1e-2, 1e2),
        beta in log_uniform(1e6, 1e12),
        k_dr in log_uniform(1e6, 1e12),
    ) -> RateModel {
        RateModel { alpha, m, tau, kappa, c_omega, beta, k_dr }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn optimal_delta_and_l_stay_in_their_intervals(m in rate_model()) {
        let d = optimal_delta(&m).unwrap();
        prop_assert!((1.0..=2.0).contains(&d));
        let l = optimal_l(&m).unwrap();
        let a2 = m.alpha * m.alpha;
        prop_assert!(a2 / (2.0 * m.k_dr) <= l && l <= a2 / m.k_dr);
    }

    #[test]
    fn rate_matches_exact_arithmetic(m in rate_model(), delta in 0.01f64..=2.0, stretch in 1.0f64..10.0) {
        let l = m.l_for_delta(delta) * stretch;
        let r = theoretical_rate(&m, delta, l).unwrap();
        prop_assert!(rel(r, rate_oracle(&m, delta, l)) <= 1e-13);
        prop_assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn optimal_delta_matches_exact_min(m in rate_model()) {
        prop_assert!(rel(optimal_delta(&m).unwrap(), delta_oracle(&m)) <= 1e-14);
    }

    #[test]
    fn rate_increases_with_l(m in rate_model(), delta in 0.05f64..=2.0, s in 1.0001f64..100.0) {
        let l0 = m.l_for_delta(delta);
        let r0 = theoretical_rate(&m, delta, l0).unwrap();
        let r1 = theoretical_rate(&m, delta, l0 * s).unwrap();
        prop_assert!(r1 > r0);
    }

    #[test]
    fn optimum_beats_every_grid_delta(m in rate_model()) {
        let d = optimal_delta(&m).unwrap();
        let best = theoretical_rate(&m, d, optimal_l(&m).unwrap()).unwrap();
        for k in 1..=100 {
            let delta = 2.0 * k as f64 / 100.0;
            let r = theoretical_rate(&m, delta, m.l_for_delta(delta)).unwrap();
            prop_assert!(best <= r * (1.0 + 1e-12), "delta {delta}: {r} < {best}");
        }
    }

    #[test]
    fn rate_is_scale_invariant(m in rate_model(), delta in 0.05f64..=2.0, s in log_uniform(1e-3, 1e3)) {
        let l = m.l_for_delta(delta);
        let scaled = RateModel {
            m: m.m * s,
            beta: m.beta * s,
            k_dr: m.k_dr * s,
            kappa: m.kappa / s,
            ..m
        };
        let r = theoretical_rate(&m, delta, l).unwrap();
        let rs = theoretical_rate(&scaled, delta, scaled.l_for_delta(delta)).unwrap();
        prop_assert!(rel(rs, r) <= 1e-12);
    }
}

fn table1(kappa: f64, c_omega: f64) -> RateModel {
    let (mu, lambda) = (41.667e9, 27.778e9);
    let k_dr = 1.6 * mu + lambda;
    RateModel {
        alpha: 1.0,
        m: 1e11,
        tau: 0.1,
        kappa,
        c_omega,
        beta: k_dr,
        k_dr,
    }
}

#[test]
fn table1_rate_at_delta_two_matches_exact_formula() {
    let m = table1(1e-10, 0.2265);
    let l = m.alpha * m.alpha / (2.0 * m.k_dr);
    let r = theoretical_rate(&m, 2.0, l).unwrap();
    assert!(rel(r, rate_oracle(&m, 2.0, l)) <= 1e-14);
}

#[test]
fn table1_optimal_delta_simplification() {
    let m = table1(1e-15, 0.2265);
    let d = optimal_delta(&m).unwrap();
    assert!(d < 2.0);
    assert!(rel(d, delta_oracle(&m)) <= 1e-15);
    // 1 + (1/M + τκ/C²)·β/α², formed in exact arithmetic
    let flow = BigRational::one() / exact(m.m)
        + exact(m.tau) * exact(m.kappa) / (exact(m.c_omega) * exact(m.c_omega));
    let simplified = BigRational::one() + flow * exact(m.beta) / (exact(m.alpha) * exact(m.alpha));
    assert!(rel(d, simplified.to_f64().unwrap()) <= 1e-15);
}

#[test]
fn table1_smallest_permeability_gives_interior_l() {
    let m = table1(1e-15, 0.2265);
    let l = optimal_l(&m).unwrap();
    let phys = m.l_phys();
    assert!(phys / 2.0 < l && l < phys);
    let d = optimal_delta(&m).unwrap();
    assert!(rel(l, m.alpha * m.alpha / (d * m.k_dr)) <= 1e-15);
}

#[test]
fn exact_oracle_sanity() {
    assert!(BigRational::zero() < exact(1e-300));
}
