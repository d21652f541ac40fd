use std::f64::consts::PI;
use std::io::Write;

use approx::assert_relative_eq;
use isoprofile::phiexp::{phi_p_density, PhiFunction};
use isoprofile::quad::{integrate, integrate_tail, Tolerance};
use isoprofile::radial::*;
use isoprofile::specfun::sphere_constants;
use proptest::prelude::*;

const G_ONE: f64 = 0.841_344_746_068_542_948_585;

fn builtins() -> Vec<RadialDensity> {
    vec![
        RadialDensity::gaussian(),
        RadialDensity::scaled_gaussian(0.5).unwrap(),
        RadialDensity::scaled_gaussian(2.0).unwrap(),
        RadialDensity::exp_power(0.5).unwrap(),
        RadialDensity::exp_power(1.0).unwrap(),
        RadialDensity::exp_power(3.0).unwrap(),
        RadialDensity::indicator(0.0, 1.0).unwrap(),
        phi_p_density(&PhiFunction::power(0.5).unwrap(), 2.0).unwrap(),
        phi_p_density(&PhiFunction::power(1.2).unwrap(), 3.0).unwrap(),
    ]
}

#[test]
fn normalizing_mass_examples() {
    for n in 1..=5 {
        let m = normalizing_mass(&RadialDensity::gaussian(), n).unwrap();
        assert_relative_eq!(m, (2.0 * PI).powf(n as f64 / 2.0), max_relative = 1e-12);
    }
    let m = normalizing_mass(&RadialDensity::indicator(0.0, 1.0).unwrap(), 1).unwrap();
    assert_relative_eq!(m, 2.0, max_relative = 1e-12);
    let m = normalizing_mass(&RadialDensity::exp_power(1.0).unwrap(), 2).unwrap();
    assert_relative_eq!(m, 2.0 * PI, max_relative = 1e-12);
}

#[test]
fn unit_mass_by_independent_quadrature() {
    for density in builtins() {
        for n in [1usize, 2, 3, 5] {
            let Ok(measure) = RadialMeasure::new(density.clone(), n) else { continue };
            let (lo, hi) = density.support();
            let g = |s: f64| density.eval(s) * s.powi(n as i32 - 1);
            let tol = Tolerance::new(0.0, 1e-12);
            let total = if hi.is_finite() {
                integrate(g, lo, hi, tol).unwrap().value
            } else {
                let mid = lo + 1.0;
                integrate(g, lo, mid, tol).unwrap().value + integrate_tail(g, mid, 1.0, tol).unwrap().value
            };
            let area = sphere_constants(n).unwrap().area;
            assert!((area * total / measure.mass() - 1.0).abs() <= 1e-8, "{} n={n}", density.label());
        }
    }
}

#[test]
fn cdf_examples() {
    let m = RadialMeasure::new(RadialDensity::gaussian(), 2).unwrap();
    assert_relative_eq!(m.cdf((2.0 * 2f64.ln()).sqrt()), 0.5, max_relative = 1e-12);
    let ind = RadialMeasure::new(RadialDensity::indicator(1.0, 2.0).unwrap(), 3).unwrap();
    assert_eq!(ind.cdf(0.5), 0.0);
    assert_eq!(ind.cdf(1.0), 0.0);
    assert_eq!(ind.cdf(2.0), 1.0);
    assert_eq!(ind.cdf(7.0), 1.0);
    // uniform on the shell 1 < |x| < 2: F(r) = (r³ − 1)/7
    assert_relative_eq!(ind.cdf(1.5), (1.5f64.powi(3) - 1.0) / 7.0, max_relative = 1e-12);
}

#[test]
fn cdf_1d_examples() {
    let m = RadialMeasure::new(RadialDensity::gaussian(), 1).unwrap();
    assert_relative_eq!(m.cdf_1d(0.0).unwrap(), 0.5, max_relative = 1e-15);
    assert_eq!(m.cdf_1d(f64::INFINITY).unwrap(), 1.0);
    assert_relative_eq!(m.cdf_1d(1.0).unwrap(), G_ONE, max_relative = 1e-12);
    assert_relative_eq!(m.sf_1d(1.0).unwrap(), 1.0 - G_ONE, max_relative = 1e-12);
    assert_relative_eq!(m.interval_mass_1d(-1.0, 1.0).unwrap(), 2.0 * G_ONE - 1.0, max_relative = 1e-12);
    let m2 = RadialMeasure::new(RadialDensity::gaussian(), 2).unwrap();
    assert!(matches!(m2.cdf_1d(0.0), Err(RadialError::DimensionMismatch { expected: 1, found: 2 })));
}

#[test]
fn condition_a_examples() {
    assert!(check_condition_a(&RadialDensity::gaussian()).passed);
    let shell = check_condition_a(&RadialDensity::indicator(1.0, 2.0).unwrap());
    assert!(!shell.passed);
    assert_eq!(shell.positivity_witness, Some(1.0));
    for (q, p) in [(0.5, 1.0), (0.5, 2.0), (1.2, 2.0), (1.5, 3.0)] {
        let d = phi_p_density(&PhiFunction::power(q).unwrap(), p).unwrap();
        assert!(check_condition_a(&d).passed, "q={q} p={p}");
    }
}

#[test]
fn table_from_csv() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "r,f").unwrap();
    for k in 0..=400 {
        let r = k as f64 * 0.02;
        writeln!(file, "{r},{}", (-0.5 * r * r).exp()).unwrap();
    }
    file.flush().unwrap();
    let d = RadialDensity::from_csv(file.path()).unwrap();
    let (lo, hi) = d.support();
    assert_eq!(lo, 0.0);
    assert!((hi - 8.0).abs() < 1e-12);
    let m = RadialMeasure::new(d, 2).unwrap();
    // piecewise-linear interpolation of the Gaussian profile
    assert!((m.cdf(1.0) - (1.0 - (-0.5f64).exp())).abs() < 1e-3);
}

#[test]
fn malformed_tables() {
    assert!(RadialDensity::tabulated(vec![0.0, 1.0], vec![1.0]).is_err());
    assert!(RadialDensity::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(RadialDensity::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    assert!(RadialDensity::from_csv(std::path::Path::new("/nonexistent/table.csv")).is_err());
}

#[test]
fn heavy_tails_diverge() {
    let q = phi_p_density(&PhiFunction::power(1.5).unwrap(), 1.0).unwrap();
    // f ~ r^{-2}, so r^{n-1} f is integrable only for n = 1
    assert!(RadialMeasure::new(q.clone(), 1).is_ok());
    for n in 2..=3 {
        assert!(matches!(RadialMeasure::new(q.clone(), n), Err(RadialError::DivergentMass)));
    }
}

proptest! {
    #[test]
    fn cdf_monotone_and_bounded(k in 0usize..9, n in 1usize..4, a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let d = builtins().swap_remove(k);
        let m = RadialMeasure::new(d, n).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (f1, f2) = (m.cdf(lo), m.cdf(hi));
        prop_assert!((0.0..=1.0).contains(&f1) && (0.0..=1.0).contains(&f2));
        prop_assert!(f1 <= f2);
        prop_assert!((m.cdf(lo) + m.tail(lo) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantile_round_trip(k in 0usize..9, n in 1usize..4, p in 1e-6f64..(1.0 - 1e-6)) {
        let d = builtins().swap_remove(k);
        let m = RadialMeasure::new(d, n).unwrap();
        let r = m.radius_at_cdf(p);
        prop_assert!((m.cdf(r) - p).abs() <= 1e-9, "r={} F={}", r, m.cdf(r));
    }

    #[test]
    fn tabulated_support_is_inferred(lo in 0.0f64..2.0, width in 0.5f64..3.0) {
        // the interpolant is positive strictly between the outer zero nodes
        let r = vec![lo, lo + 1.0, lo + 1.0 + width, lo + 2.0 + width];
        let d = RadialDensity::tabulated(r, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (a, b) = d.support();
        prop_assert_eq!(a, lo);
        prop_assert!((b - (lo + 2.0 + width)).abs() < 1e-12);
        prop_assert!(d.eval(lo + 0.5) > 0.0);
    }
}
