use std::f64::consts::PI;

use approx::assert_relative_eq;
use isoprofile::quad::{integrate, Tolerance};
use isoprofile::specfun::*;
use proptest::prelude::*;

// 30-digit mpmath values
const G_ONE: f64 = 0.841_344_746_068_542_948_585;
const P_THREE_HALVES_HALF: f64 = 0.198_748_043_098_799_197_574_804_705_393;

#[test]
fn gauss_cdf_values() {
    assert_eq!(gauss_cdf(0.0), 0.5);
    assert_eq!(gauss_cdf(f64::INFINITY), 1.0);
    assert_eq!(gauss_cdf(f64::NEG_INFINITY), 0.0);
    assert_relative_eq!(gauss_cdf(1.0), G_ONE, max_relative = 1e-15);
    assert_relative_eq!(gauss_sf(1.0), 1.0 - G_ONE, max_relative = 1e-14);
}

#[test]
fn gauss_quantile_values() {
    assert_eq!(gauss_quantile(0.5).unwrap(), 0.0);
    assert_relative_eq!(gauss_quantile(G_ONE).unwrap(), 1.0, max_relative = 1e-14);
    assert!((gauss_quantile(0.841344746).unwrap() - 1.0).abs() < 1e-8);
    assert!(gauss_quantile(1.5).is_err());
}

#[test]
fn incomplete_gamma_values() {
    assert_eq!(gamma_p(0.5, f64::INFINITY).unwrap(), 1.0);
    for x in [0.1, 1.0, 7.5] {
        assert_relative_eq!(gamma_p(1.0, x).unwrap(), 1.0 - (-x).exp(), max_relative = 1e-14);
    }
    assert_relative_eq!(gamma_p(1.5, 0.5).unwrap(), P_THREE_HALVES_HALF, max_relative = 1e-14);
}

#[test]
fn sphere_constants_small_n() {
    let c1 = sphere_constants(1).unwrap();
    assert_relative_eq!(c1.area, 2.0, max_relative = 1e-15);
    assert_relative_eq!(c1.volume, 2.0, max_relative = 1e-15);
    let c2 = sphere_constants(2).unwrap();
    assert_relative_eq!(c2.area, 2.0 * PI, max_relative = 1e-15);
    assert_relative_eq!(c2.volume, PI, max_relative = 1e-15);
    let c3 = sphere_constants(3).unwrap();
    assert_relative_eq!(c3.area, 4.0 * PI, max_relative = 1e-15);
    assert_relative_eq!(c3.volume, 4.0 * PI / 3.0, max_relative = 1e-15);
}

#[test]
fn sphere_constant_identities() {
    for n in 1..=20 {
        let c = sphere_constants(n).unwrap();
        assert_relative_eq!(c.area, n as f64 * c.volume, max_relative = 1e-12);
        if n >= 2 {
            let prev = sphere_constants(n - 1).unwrap();
            let b = beta(1.5, (n as f64 - 1.0) / 2.0).unwrap();
            assert_relative_eq!(c.volume / prev.area, b, max_relative = 1e-10);
        }
    }
}

#[test]
fn tail_check_cases() {
    assert!(gaussian_tail_check(10.0, 2, 0.9).unwrap());
    // for n = 2 the tail integral is exactly e^{−r²/2}, so every λ < 1 passes
    assert!(gaussian_tail_check(0.1, 2, 0.99).unwrap());
    // mpmath ratios 0.94661 and 1.05916 at r = 4
    assert!(gaussian_tail_check(4.0, 1, 0.9).unwrap());
    assert!(gaussian_tail_check(4.0, 3, 0.9).unwrap());
    assert!(!gaussian_tail_check(4.0, 1, 0.95).unwrap());
    // the n = 3 ratio at r = 0.1 is 12.59
    assert!(!gaussian_tail_check(0.1, 3, 0.99).unwrap());
    assert!(gaussian_tail_check(0.0, 2, 0.9).is_err());
    assert!(gaussian_tail_check(1.0, 2, 1.0).is_err());
}

#[test]
fn tail_check_eventually_true() {
    for lambda in [0.9, 0.99, 0.999] {
        assert!(gaussian_tail_check(40.0, 2, lambda).unwrap());
    }
}

#[test]
fn ball_mass_two_ways() {
    for n in [1usize, 2, 3, 5] {
        let c = sphere_constants(n).unwrap();
        let k = c.area * (2.0 * PI).powf(-(n as f64) / 2.0);
        for i in 0..=12 {
            let t = 0.5 * i as f64;
            let direct = if t == 0.0 {
                0.0
            } else {
                k * integrate(|s| (-0.5 * s * s).exp() * s.powi(n as i32 - 1), 0.0, t, Tolerance::new(1e-16, 1e-13)).unwrap().value
            };
            let via_gamma = gamma_p(n as f64 / 2.0, t * t / 2.0).unwrap();
            assert!((direct - via_gamma).abs() <= 1e-9, "n={n} t={t}: {direct} vs {via_gamma}");
        }
    }
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(x in -6.0f64..6.0) {
        let back = gauss_quantile(gauss_cdf(x)).unwrap();
        prop_assert!((back - x).abs() <= 1e-8);
    }

    #[test]
    fn gamma_inverse_round_trip(k in 0usize..4, x in 0.0f64..40.0) {
        let a = [0.5, 1.0, 1.5, 5.0][k];
        let (p, q) = gamma_pq(a, x).unwrap();
        // invert on the side that carries the information
        let back = if p <= 0.5 { gamma_p_inv(a, p).unwrap() } else { gamma_q_inv(a, q).unwrap() };
        prop_assert!((back - x).abs() <= 1e-10 * x.max(1.0), "a={} x={} back={}", a, x, back);
    }

    #[test]
    fn cdf_is_monotone(x in -10.0f64..10.0, dx in 0.0f64..1.0) {
        prop_assert!(gauss_cdf(x) <= gauss_cdf(x + dx));
    }

    #[test]
    fn ln_gamma_recurrence(x in 0.1f64..50.0) {
        prop_assert!((ln_gamma(x + 1.0) - ln_gamma(x) - x.ln()).abs() <= 1e-12 * ln_gamma(x + 1.0).abs().max(1.0));
    }
}
