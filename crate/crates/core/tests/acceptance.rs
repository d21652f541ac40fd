//! Acceptance criteria 1–7. They run sequentially inside a single test so the
//! wall-clock limits are measured without interference; each prints one
//! PASS/FAIL line.

use std::sync::Arc;
use std::time::{Duration, Instant};

use isoprofile::criteria::prop_lip_verdict;
use isoprofile::phiexp::{classify, exp_q, PhiFunction, Tri};
use isoprofile::poincare::{ks_critical_1pct, ks_statistic, l1_distance, limit_mass, sample_pushforward};
use isoprofile::profile::{bound_audit, bound_curve, gaussian_profile, half_line_slack};
use isoprofile::radial::{RadialDensity, RadialError, RadialMeasure};
use isoprofile::specfun::gauss_pdf;
use isoprofile::transport::{build_transport, TransportError, TransportMap, TransportOptions};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn transport(density: RadialDensity, n: usize) -> Result<TransportMap, String> {
    let label = density.label().to_string();
    let measure = RadialMeasure::new(density, n).map_err(|e| format!("{label} n={n}: {e}"))?;
    build_transport(measure).map_err(|e| format!("{label} n={n}: {e}"))
}

fn exp_power(p: f64) -> RadialDensity {
    RadialDensity::exp_power(p).unwrap()
}

fn gaussian_round_trip() -> Outcome {
    let mut worst_sigma = 0f64;
    let mut worst_l = 0f64;
    let mut worst_profile = 0f64;
    let mut half = 0.0;
    for n in 1..=3 {
        let map = transport(RadialDensity::gaussian(), n)?;
        for (r, s) in map.grid_r().iter().zip(map.grid_sigma()) {
            worst_sigma = worst_sigma.max((s - r).abs());
        }
        worst_l = worst_l.max((map.lipschitz_constant() - 1.0).abs());
        let curve = bound_curve(&map, 101);
        for p in &curve.points {
            worst_profile = worst_profile.max((p.bound - gaussian_profile(p.a).unwrap()).abs());
        }
        half = curve.at(0.5).unwrap().bound;
        check((half - 0.3989423).abs() <= 1e-6, || format!("n={n}: bound(1/2) = {half}"))?;
    }
    check(worst_sigma <= 1e-6, || format!("max |sigma(r) - r| = {worst_sigma:e}"))?;
    check(worst_l <= 1e-6, || format!("max |L - 1| = {worst_l:e}"))?;
    check(worst_profile <= 1e-6, || format!("max |bound - I| = {worst_profile:e}"))?;
    Ok(format!("max|sigma-r| = {worst_sigma:.1e}, max|L-1| = {worst_l:.1e}, bound(1/2) = {half:.9}"))
}

/// L1 distances for the Gaussian, n = 1, from a 40-digit evaluation that
/// splits the integral at the two crossings of the densities.
const L1_ORACLE: [(usize, f64); 3] = [(100, 7.08198707635576e-3), (1_000, 7.00943752168244e-4), (10_000, 7.00229332856779e-5)];

fn poincare_convergence() -> Outcome {
    let map = transport(RadialDensity::gaussian(), 1)?;
    let mut prev = f64::INFINITY;
    let mut parts = Vec::new();
    for (big_n, oracle) in L1_ORACLE {
        let d = l1_distance(&map, big_n).map_err(|e| e.to_string())?;
        check(d < prev, || format!("L1 at N={big_n} is {d:e}, not below {prev:e}"))?;
        check(((d - oracle) / oracle).abs() <= 1e-6, || format!("L1 at N={big_n} is {d:e}, oracle {oracle:e}"))?;
        prev = d;
        parts.push(format!("N={big_n}: {d:.6e}"));
    }
    check(prev <= 2e-4, || format!("L1 at N=1e4 is {prev:e}"))?;
    Ok(parts.join(", "))
}

fn monte_carlo() -> Outcome {
    let count = 100_000;
    let crit = ks_critical_1pct(count);
    let mut parts = Vec::new();
    for (density, seed) in [(RadialDensity::gaussian(), 7u64), (exp_power(3.0), 8)] {
        let label = density.label().to_string();
        let map = transport(density, 1)?;
        let batch = sample_pushforward(&map, 10_000, count, seed).map_err(|e| e.to_string())?;
        let ks = ks_statistic(&batch, map.measure()).map_err(|e| e.to_string())?;
        check(ks <= crit, || format!("{label}: KS {ks:e} above {crit:e}"))?;
        parts.push(format!("{label}: KS = {ks:.2e}"));
    }
    Ok(format!("{} (critical {crit:.2e})", parts.join(", ")))
}

fn lipschitz_dichotomy() -> Outcome {
    let mut cells = 0;
    for p in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        for n in 1..=3 {
            let map = transport(exp_power(p), n)?;
            let lip = map.lipschitz();
            if p >= 2.0 {
                check(lip.is_finite(), || format!("p={p} n={n}: L = {}", lip.value))?;
            } else {
                check(!lip.is_finite() && lip.unbounded.is_some(), || format!("p={p} n={n}: L = {} unflagged", lip.value))?;
            }
            let mut report = prop_lip_verdict(&exp_power(p), n, None).map_err(|e| format!("p={p} n={n}: {e}"))?;
            report.cross_validate(&map);
            let agrees = report.cross_check.as_ref().and_then(|c| c.agrees);
            check(agrees == Some(true), || format!("p={p} n={n}: verdict {} vs L = {}", report.verdict, lip.value))?;
            cells += 1;
        }
    }
    Ok(format!("{cells} cells, transport and criteria agree"))
}

fn classifier_grid() -> Outcome {
    let (mut decided, mut skipped) = (0, 0);
    for q in [0.5, 0.8, 1.2, 1.5] {
        let phi = PhiFunction::power(q).unwrap();
        for p in [1.0, 2.0, 3.0] {
            for n in 1..=3 {
                let c = classify(&phi, p, n);
                let density = isoprofile::phiexp::phi_p_density(&phi, p).map_err(|e| e.to_string())?;
                let built = RadialMeasure::new(density, n)
                    .map_err(TransportError::from)
                    .and_then(|m| TransportMap::build(Arc::new(m), TransportOptions::default()));
                let cell = format!("q={q} p={p} n={n}");
                match built {
                    Err(TransportError::Radial(RadialError::DivergentMass)) => {
                        check(!c.integrable, || format!("{cell}: classified integrable but the mass diverges"))?;
                        decided += 1;
                    }
                    Err(e) => return Err(format!("{cell}: {e}")),
                    Ok(map) => {
                        check(c.integrable, || format!("{cell}: classified non-integrable but the mass is finite"))?;
                        match c.lipschitz {
                            Tri::Inconclusive => skipped += 1,
                            t => {
                                let finite = map.lipschitz().is_finite();
                                check((t == Tri::Yes) == finite, || format!("{cell}: classify {t}, L = {}", map.lipschitz_constant()))?;
                                decided += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{decided} cells agree, {skipped} inconclusive"))
}

fn isoperimetric_audit() -> Outcome {
    let densities = [
        RadialDensity::gaussian(),
        RadialDensity::scaled_gaussian(0.5).unwrap(),
        RadialDensity::scaled_gaussian(2.0).unwrap(),
        exp_power(2.0),
        exp_power(3.0),
    ];
    let mut parts = Vec::new();
    for (k, density) in densities.into_iter().enumerate() {
        let label = density.label().to_string();
        let map = transport(density, 1)?;
        let report = bound_audit(map.measure(), &map, 10_000, 100 + k as u64).map_err(|e| format!("{label}: {e}"))?;
        check(report.violations == 0, || format!("{label}: {} violations", report.violations))?;
        if k == 0 {
            let tight = half_line_slack(map.measure(), &map, 199).map_err(|e| e.to_string())?;
            check(tight <= 1e-6, || format!("gaussian half-line slack {tight:e}"))?;
            parts.push(format!("gaussian half-line slack {tight:.1e}"));
        }
        parts.push(format!("{label}: min slack {:.1e}", report.min_slack));
    }
    Ok(format!("0 violations; {}", parts.join(", ")))
}

fn singular_values_fd(map: &TransportMap, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h = 1e-5 * x.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (fp, fm) = (map.apply_map(&plus), map.apply_map(&minus));
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let mut sv: Vec<f64> = jac.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.iter().map(|c| c * radius / norm).collect();
        }
    }
}

fn builtin_phis() -> Vec<PhiFunction> {
    let mut phis = vec![PhiFunction::identity()];
    for q in [0.5, 0.8, 1.2, 1.5] {
        phis.push(PhiFunction::power(q).unwrap());
    }
    phis.push(PhiFunction::poly(vec![1.0, 1.0]).unwrap());
    phis.push(PhiFunction::poly(vec![0.0, 1.0, 1.0]).unwrap());
    phis
}

fn structural_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut mass_err, mut inv_err, mut jac_err, mut rel_err) = (0f64, 0f64, 0f64, 0f64);
    let densities = || {
        vec![
            RadialDensity::gaussian(),
            RadialDensity::scaled_gaussian(2.0).unwrap(),
            exp_power(3.0),
            exp_power(4.0),
            isoprofile::phiexp::phi_p_density(&PhiFunction::power(0.5).unwrap(), 2.0).unwrap(),
        ]
    };
    for n in 1..=3 {
        for density in densities() {
            let label = density.label().to_string();
            let map = transport(density, n)?;
            let m = limit_mass(&map).map_err(|e| format!("{label}: {e}"))?;
            mass_err = mass_err.max((m - 1.0).abs());

            let (lo, hi) = map.u_range();
            let u_max = hi.min(6.0);
            for _ in 0..50 {
                let u = lo.max(1e-3) + rng.random::<f64>() * (u_max - lo.max(1e-3));
                let x = random_point(&mut rng, n, u);
                let back = map.apply_sigma_map(&map.apply_map(&x));
                let e = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / u.max(1.0);
                inv_err = inv_err.max(e);

                let spec = map.jacobian_spectrum(u).map_err(|e| e.to_string())?;
                let mut expected = vec![spec.radial.abs()];
                expected.extend(std::iter::repeat_n(spec.tangential.abs(), n - 1));
                expected.sort_by(f64::total_cmp);
                let fd = singular_values_fd(&map, &x);
                for (a, b) in fd.iter().zip(&expected) {
                    jac_err = jac_err.max((a - b).abs());
                }
            }

            if n == 1 {
                let rs = map.grid_r();
                for k in (rs.len() / 20..rs.len() - rs.len() / 20).step_by(7) {
                    let r = rs[k];
                    // σ′ by central differences of σ, independent of the stored σ′
                    let h = 1e-5 * r.min(map.measure().density().support().1 - r);
                    let ds = (map.sigma(r + h) - map.sigma(r - h)) / (2.0 * h);
                    let lhs = 2.0 * gauss_pdf(map.sigma(r)) * ds;
                    let rhs = map.measure().radial_pdf(r);
                    if rhs > 1e-250 {
                        rel_err = rel_err.max((lhs / rhs - 1.0).abs());
                    }
                }
            }
        }
    }
    check(mass_err <= 1e-6, || format!("limit density mass off by {mass_err:e}"))?;
    check(inv_err <= 1e-8, || format!("Sigma(s(x)) off by {inv_err:e}"))?;
    check(jac_err <= 1e-3, || format!("Jacobian singular values off by {jac_err:e}"))?;
    check(rel_err <= 1e-4, || format!("G'(sigma) sigma' vs F' relative error {rel_err:e}"))?;

    let mut ot_pairs = 0;
    for phi in builtin_phis() {
        let (theta, delta) = phi.theta_delta();
        let s: Vec<f64> = (0..=400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 400.0)).collect();
        for w in s.windows(2) {
            let up = |t: f64| t.powf(theta) / phi.eval(t);
            let down = |t: f64| t.powf(delta) / phi.eval(t);
            check(up(w[1]) >= up(w[0]) * (1.0 - 1e-12), || format!("{}: s^theta/phi decreases at {}", phi.label(), w[0]))?;
            check(down(w[1]) <= down(w[0]) * (1.0 + 1e-12), || format!("{}: s^delta/phi increases at {}", phi.label(), w[0]))?;
            ot_pairs += 1;
        }
        let top = phi.big_l_phi().min(10.0);
        let phi1 = phi.eval(1.0);
        for i in 0..400 {
            let r = -10.0 + (top + 10.0) * i as f64 / 400.0;
            let lhs = phi.exp_phi(r);
            let rhs = exp_q(theta, phi1 * r);
            check(lhs <= rhs * (1.0 + 1e-9), || format!("{}: exp_phi({r}) = {lhs:e} above {rhs:e}", phi.label()))?;
        }
    }
    Ok(format!(
        "mass {mass_err:.1e}, inverse {inv_err:.1e}, Jacobian {jac_err:.1e}, dist-rel {rel_err:.1e}, {ot_pairs} monotone pairs"
    ))
}

// custom harness so the PASS/FAIL lines show in plain `cargo test` output
fn main() {
    // honour a name filter the way the default harness does
    if let Some(filter) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance_criteria".contains(filter.as_str()) {
            return;
        }
    }
    let criteria: [(&str, fn() -> Outcome, u64); 7] = [
        ("1 gaussian round trip", gaussian_round_trip, 1),
        ("2 poincare convergence", poincare_convergence, 5),
        ("3 monte-carlo weak convergence", monte_carlo, 30),
        ("4 lipschitz dichotomy", lipschitz_dichotomy, 10),
        ("5 phi-family classifier", classifier_grid, 30),
        ("6 isoperimetric audit", isoperimetric_audit, 20),
        ("7 structural invariants", structural_invariants, 10),
    ];
    let mut failed = Vec::new();
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(limit) => Err(format!("{detail}; took {elapsed:.2?}, limit {limit} s")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name} [{elapsed:.2?}] {detail}"),
            Err(why) => {
                println!("FAIL {name} [{elapsed:.2?}] {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
