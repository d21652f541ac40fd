use std::f64::consts::E;
use std::io::Write;

use approx::assert_relative_eq;
use isoprofile::phiexp::*;
use isoprofile::radial::{RadialDensity, RadialMeasure};
use isoprofile::transport::build_transport;
use proptest::prelude::*;

fn builtins() -> Vec<PhiFunction> {
    vec![
        PhiFunction::identity(),
        PhiFunction::power(0.5).unwrap(),
        PhiFunction::power(0.8).unwrap(),
        PhiFunction::power(1.2).unwrap(),
        PhiFunction::power(2.0).unwrap(),
        PhiFunction::poly(vec![1.0, 1.0]).unwrap(),
        PhiFunction::poly(vec![0.0, 1.0, 1.0]).unwrap(),
    ]
}

#[test]
fn ln_phi_examples() {
    assert_relative_eq!(PhiFunction::identity().ln_phi(E), 1.0, max_relative = 1e-15);
    for phi in builtins() {
        assert!(phi.ln_phi(1.0).abs() < 1e-14, "{}", phi.label());
    }
    assert_relative_eq!(PhiFunction::power(2.0).unwrap().ln_phi(2.0), 0.5, max_relative = 1e-14);
    // ∫₁² ds/(s + s²) = ln(4/3)
    let poly = PhiFunction::poly(vec![0.0, 1.0, 1.0]).unwrap();
    assert_relative_eq!(poly.ln_phi(2.0), (4.0f64 / 3.0).ln(), max_relative = 1e-9);
}

#[test]
fn exp_phi_examples() {
    for phi in builtins() {
        assert!((phi.exp_phi(0.0) - 1.0).abs() < 1e-12, "{}", phi.label());
    }
    assert_relative_eq!(PhiFunction::power(2.0).unwrap().exp_phi(0.5), 2.0, max_relative = 1e-12);
    let half = PhiFunction::power(0.5).unwrap();
    // l_φ = −2 for q = 1/2
    assert_relative_eq!(half.l_phi(), -2.0, max_relative = 1e-15);
    assert_eq!(half.exp_phi(-2.0), 0.0);
    assert_eq!(half.exp_phi(-3.0), 0.0);
    // L_φ = 1 for q = 2: exp_φ blows up there
    assert_eq!(PhiFunction::power(2.0).unwrap().exp_phi(1.0), f64::INFINITY);
}

#[test]
fn exp_q_examples() {
    assert_relative_eq!(exp_q(1.0, 1.0), E, max_relative = 1e-15);
    assert_relative_eq!(exp_q(2.0, 0.5), 2.0, max_relative = 1e-15);
    for q in [0.3, 1.0, 1.7, 3.0] {
        assert_eq!(exp_q(q, 0.0), 1.0);
    }
    assert_eq!(exp_q(0.5, -2.0), 0.0);
}

#[test]
fn theta_delta_examples() {
    assert_eq!(PhiFunction::identity().theta_delta(), (1.0, 1.0));
    for q in [0.5, 1.5, 3.0] {
        assert_eq!(PhiFunction::power(q).unwrap().theta_delta(), (q, q));
    }
    let (theta, delta) = PhiFunction::poly(vec![0.0, 1.0, 1.0]).unwrap().theta_delta();
    assert_eq!((theta, delta), (2.0, 1.0));
}

#[test]
fn table_phi_matches_power() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "s,phi").unwrap();
    for k in -40..=40 {
        let s = 10f64.powf(k as f64 / 10.0);
        writeln!(file, "{s},{}", s.powf(0.5)).unwrap();
    }
    file.flush().unwrap();
    let table = PhiFunction::from_csv(file.path()).unwrap();
    let exact = PhiFunction::power(0.5).unwrap();
    for t in [0.01, 0.5, 2.0, 100.0] {
        assert!((table.ln_phi(t) - exact.ln_phi(t)).abs() < 1e-6, "t={t}");
    }
    let (theta, delta) = table.theta_delta();
    assert!((theta - 0.5).abs() < 1e-6 && (delta - 0.5).abs() < 1e-6);
}

#[test]
fn spec_strings() {
    assert!("identity".parse::<PhiFunction>().unwrap().is_identity());
    assert_eq!("power:q=1.5".parse::<PhiFunction>().unwrap().power_exponent(), Some(1.5));
    assert!("poly:0,1,1".parse::<PhiFunction>().is_ok());
    assert!("power:q=-1".parse::<PhiFunction>().is_err());
    assert!("cubic".parse::<PhiFunction>().is_err());
}

#[test]
fn phi_p_density_examples() {
    let g = phi_p_density(&PhiFunction::identity(), 2.0).unwrap();
    for r in [1e-6, 0.5, 2.0, 5.0] {
        assert_relative_eq!(g.eval(r), (-0.5 * r * r).exp(), max_relative = 1e-12);
    }
    // the support is open at the origin; the value there is the lim sup
    assert_relative_eq!(g.f0_limsup(), 1.0, max_relative = 1e-9);
    let compact = phi_p_density(&PhiFunction::power(0.5).unwrap(), 2.0).unwrap();
    let (_, big_r) = compact.support();
    assert_relative_eq!(big_r, 2.0, max_relative = 1e-12);
    assert_relative_eq!(r_phi(&PhiFunction::power(0.5).unwrap(), 2.0), 2.0, max_relative = 1e-12);
    let cauchy = phi_p_density(&PhiFunction::power(2.0).unwrap(), 2.0).unwrap();
    for r in [1e-6, 1.0, 3.0, 30.0] {
        assert_relative_eq!(cauchy.eval(r), 1.0 / (1.0 + r * r / 2.0), max_relative = 1e-12);
    }
    assert!(phi_p_density(&PhiFunction::identity(), 0.0).is_err());
}

#[test]
fn classify_examples() {
    let c = classify(&PhiFunction::power(0.5).unwrap(), 2.0, 2);
    assert!(c.integrable);
    assert_eq!(c.lipschitz, Tri::Yes);
    assert_eq!(c.clause, Clause::ThetaBelowOne);

    let c = classify(&PhiFunction::power(1.5).unwrap(), 2.0, 2);
    assert!(c.integrable);
    assert_eq!(c.lipschitz, Tri::No);

    for n in 1..=4 {
        let c = classify(&PhiFunction::identity(), 3.0, n);
        assert!(c.integrable);
        assert_eq!(c.lipschitz, Tri::Yes);
        assert_eq!(c.clause, Clause::IdentityRemark);
    }

    // θ = 2 ≥ (n + p)/n = 2 for n = 1, p = 1, and l_φ = −∞
    let c = classify(&PhiFunction::power(2.0).unwrap(), 1.0, 1);
    assert!(!c.integrable);
    assert_eq!(c.clause, Clause::NotIntegrable);
}

#[test]
fn classify_agrees_with_transport() {
    for q in [0.5, 0.8, 1.0, 1.2, 1.5] {
        let phi = PhiFunction::power(q).unwrap();
        for p in [1.0, 2.0, 3.0] {
            for n in 1..=3 {
                let c = classify(&phi, p, n);
                let density = phi_p_density(&phi, p).unwrap();
                match RadialMeasure::new(density, n) {
                    Err(_) => assert!(!c.integrable, "q={q} p={p} n={n}"),
                    Ok(measure) => {
                        assert!(c.integrable, "q={q} p={p} n={n}");
                        let finite = build_transport(measure).unwrap().lipschitz().is_finite();
                        match c.lipschitz {
                            Tri::Yes => assert!(finite, "q={q} p={p} n={n}"),
                            Tri::No => assert!(!finite, "q={q} p={p} n={n}"),
                            Tri::Inconclusive => {}
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn ot_monotone_ratios() {
    let grid: Vec<f64> = (0..=400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 400.0)).collect();
    for phi in builtins() {
        let (theta, delta) = phi.theta_delta();
        for w in grid.windows(2) {
            let up = |s: f64| s.powf(theta) / phi.eval(s);
            let down = |s: f64| s.powf(delta) / phi.eval(s);
            assert!(up(w[1]) >= up(w[0]) * (1.0 - 1e-12), "{} at {}", phi.label(), w[0]);
            assert!(down(w[1]) <= down(w[0]) * (1.0 + 1e-12), "{} at {}", phi.label(), w[0]);
        }
    }
}

#[test]
fn ot_domination() {
    for phi in builtins() {
        let (theta, _) = phi.theta_delta();
        let top = phi.big_l_phi().min(10.0);
        for i in 0..500 {
            let r = -10.0 + (top + 10.0) * i as f64 / 500.0;
            let lhs = phi.exp_phi(r);
            let rhs = exp_q(theta, phi.eval(1.0) * r);
            assert!(lhs <= rhs * (1.0 + 1e-9), "{} r={r}: {lhs} > {rhs}", phi.label());
        }
    }
}

#[test]
fn ot_compact_below_one() {
    for phi in builtins() {
        let (theta, _) = phi.theta_delta();
        if theta < 1.0 {
            assert!(phi.l_phi() > f64::NEG_INFINITY, "{}", phi.label());
        }
    }
}

#[test]
fn density_is_a_radial_density() {
    let d: RadialDensity = phi_p_density(&PhiFunction::power(1.2).unwrap(), 2.0).unwrap();
    let m = RadialMeasure::new(d, 2).unwrap();
    assert!(m.mass().is_finite() && m.mass() > 0.0);
}

proptest! {
    #[test]
    fn exp_inverts_ln(k in 0usize..7, lt in -6.0f64..6.0) {
        let phi = builtins().swap_remove(k);
        let t = 10f64.powf(lt);
        let back = phi.exp_phi(phi.ln_phi(t));
        prop_assert!((back / t - 1.0).abs() <= 1e-8, "{} t={} back={}", phi.label(), t, back);
    }

    #[test]
    fn exp_q_matches_power_phi(q in 0.2f64..3.0, tau in -3.0f64..0.3) {
        prop_assume!(q != 1.0);
        let phi = PhiFunction::power(q).unwrap();
        let a = phi.exp_phi(tau);
        let b = exp_q(q, tau);
        prop_assert!((a - b).abs() <= 1e-10 * b.max(1e-300) || (a == 0.0 && b == 0.0));
    }

    #[test]
    fn ln_phi_increasing(k in 0usize..7, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let phi = builtins().swap_remove(k);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(phi.ln_phi(lo) <= phi.ln_phi(hi));
    }
}
