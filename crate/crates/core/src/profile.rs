//! The Gaussian isoperimetric profile I[γ₁](a) = G′(G⁻¹(a)), the lower bound
//! I[γ₁](a)/L for μ_n^f, and exact boundary measures of simple sets used to
//! audit that bound.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{integrate, integrate_tail, QuadError, Tolerance};
use crate::radial::{RadialError, RadialMeasure};
use crate::specfun::{gauss_pdf, gauss_quantile, sphere_constants, SpecialError};
use crate::transport::{TransportMap, Unbounded};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("probability {0} outside [0, 1]")]
    Domain(f64),
    #[error("intervals [{0}, {1}] and [{2}, {3}] overlap")]
    Overlap(f64, f64, f64, f64),
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("endpoint {0} lies outside (-R_f, R_f)")]
    OutsideSupport(f64),
    #[error("bound violated on {witness}: a = {a}, mu+ = {mu_plus}, bound = {bound}")]
    Violation { witness: IntervalSet, a: f64, mu_plus: f64, bound: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Slack below which the audit reports a violation.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// I[γ₁](a) = (2π)^{−1/2} exp(−G⁻¹(a)²/2), and 0 at a ∈ {0, 1}.
pub fn gaussian_profile(a: f64) -> Result<f64, ProfileError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(ProfileError::Domain(a));
    }
    if a == 0.0 || a == 1.0 {
        return Ok(0.0);
    }
    // evaluate on the lower half so that a and 1 − a give the same value
    let lower = a.min(1.0 - a);
    Ok(gauss_pdf(gauss_quantile(lower)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub a: f64,
    pub bound: f64,
    pub certified: bool,
}

/// I[γ₁](a)/L on a uniform grid of a.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileBound {
    pub n: usize,
    pub lipschitz: f64,
    pub unbounded: Option<Unbounded>,
    /// Whether a = 1/2 is covered (requires 0 < lim sup_{r↓0} f(r) < ∞).
    pub edge_case_half: bool,
    pub points: Vec<ProfilePoint>,
}

impl ProfileBound {
    /// Writes `a,bound,certified`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "a,bound,certified")?;
        for p in &self.points {
            writeln!(out, "{:e},{:e},{}", p.a, p.bound, u8::from(p.certified))?;
        }
        Ok(())
    }

    /// Bound at the grid point nearest to `a`.
    pub fn at(&self, a: f64) -> Option<ProfilePoint> {
        self.points.iter().copied().min_by(|p, q| (p.a - a).abs().total_cmp(&(q.a - a).abs()))
    }
}

/// Fraction of max f that lim sup_{r↓0} f(r) must reach for a = 1/2 to be certified.
const HALF_MARGIN: f64 = 0.1;

pub fn bound_curve(map: &TransportMap, grid_size: usize) -> ProfileBound {
    let m = grid_size.max(2);
    let lip = map.lipschitz();
    let density = map.measure().density();
    let f0 = density.f0_limsup();
    let edge_case_half = f0.is_finite() && f0 > HALF_MARGIN * density.approx_max();
    let finite = lip.is_finite();
    let points = (0..m)
        .map(|k| {
            let a = k as f64 / (m - 1) as f64;
            let bound = if finite { gaussian_profile(a).unwrap_or(0.0) / lip.value } else { 0.0 };
            let certified = finite && (a != 0.5 || edge_case_half);
            ProfilePoint { a, bound, certified }
        })
        .collect();
    ProfileBound { n: map.n(), lipschitz: lip.value, unbounded: lip.unbounded, edge_case_half, points }
}

/// A finite union of disjoint closed intervals on the line; endpoints may be ±∞.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    /// Sorts, merges intervals that touch, and rejects overlaps.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self, ProfileError> {
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(ProfileError::InvalidInterval(lo, hi));
            }
        }
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match out.last_mut() {
                Some(last) if lo < last.1 => return Err(ProfileError::Overlap(last.0, last.1, lo, hi)),
                Some(last) if lo == last.1 => last.1 = hi,
                _ => out.push((lo, hi)),
            }
        }
        Ok(IntervalSet { intervals: out })
    }

    pub fn empty() -> Self {
        IntervalSet { intervals: Vec::new() }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Finite endpoints, each once.
    pub fn boundary(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|&(lo, hi)| [lo, hi]).filter(|b| b.is_finite()).collect()
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.intervals.iter().map(|(lo, hi)| format!("[{lo}, {hi}]")).collect();
        f.write_str(&parts.join(" u "))
    }
}

fn check_endpoints(measure: &RadialMeasure, set: &IntervalSet) -> Result<(), ProfileError> {
    let big_r = measure.density().support().1;
    for b in set.boundary() {
        if b.abs() >= big_r {
            return Err(ProfileError::OutsideSupport(b));
        }
    }
    Ok(())
}

fn set_mass(measure: &RadialMeasure, set: &IntervalSet) -> Result<f64, ProfileError> {
    let mut a = 0.0;
    for &(lo, hi) in set.intervals() {
        a += measure.interval_mass_1d(lo, hi)?;
    }
    Ok(a.min(1.0))
}

/// f(r), with f(0⁺) standing in at r = 0 = r_f.
fn density_at(measure: &RadialMeasure, r: f64) -> f64 {
    let d = measure.density();
    if r == 0.0 && d.support().0 == 0.0 {
        d.f0_limsup()
    } else {
        d.eval(r)
    }
}

/// (μ[A], μ⁺[A]) for n = 1, with μ⁺ = Σ f(|b|)/M₁^f over the finite boundary points.
pub fn boundary_measure_1d(measure: &RadialMeasure, set: &IntervalSet) -> Result<(f64, f64), ProfileError> {
    if measure.n() != 1 {
        return Err(RadialError::DimensionMismatch { expected: 1, found: measure.n() }.into());
    }
    check_endpoints(measure, set)?;
    let a = set_mass(measure, set)?;
    let m = measure.mass();
    let mu_plus = set.boundary().iter().map(|b| density_at(measure, b.abs()) / m).sum();
    Ok((a, mu_plus))
}

/// (μ[A^ε] − μ[A])/ε, summing the masses added around each boundary point.
pub fn boundary_quotient_1d(measure: &RadialMeasure, set: &IntervalSet, eps: f64) -> Result<f64, ProfileError> {
    let iv = set.intervals();
    let mass = |lo: f64, hi: f64| measure.interval_mass_1d(lo, hi);
    let mut added = 0.0;
    if let Some(&(lo, _)) = iv.first() {
        if lo.is_finite() {
            added += mass(lo - eps, lo)?;
        }
    }
    for w in iv.windows(2) {
        let (h, l) = (w[0].1, w[1].0);
        if l - h <= 2.0 * eps {
            added += mass(h, l)?;
        } else {
            added += mass(h, h + eps)? + mass(l - eps, l)?;
        }
    }
    if let Some(&(_, hi)) = iv.last() {
        if hi.is_finite() {
            added += mass(hi, hi + eps)?;
        }
    }
    Ok(added / eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonCheck {
    pub eps: [f64; 3],
    pub quotients: [f64; 3],
    /// Richardson extrapolation from the two smallest ε.
    pub extrapolated: f64,
    /// Density-sum value of μ⁺.
    pub exact: f64,
    pub consistent: bool,
}

/// Compares the density-sum μ⁺ with difference quotients at ε ∈ {1e−3, 1e−4, 1e−5}.
pub fn richardson_check(measure: &RadialMeasure, set: &IntervalSet) -> Result<RichardsonCheck, ProfileError> {
    let (_, exact) = boundary_measure_1d(measure, set)?;
    let eps = [1e-3, 1e-4, 1e-5];
    let mut quotients = [0.0; 3];
    for (q, &e) in quotients.iter_mut().zip(&eps) {
        *q = boundary_quotient_1d(measure, set, e)?;
    }
    // the quotient error is first order in ε
    let extrapolated = (10.0 * quotients[2] - quotients[1]) / 9.0;
    let consistent = (extrapolated - exact).abs() <= 1e-6 * exact.max(1.0);
    Ok(RichardsonCheck { eps, quotients, extrapolated, exact, consistent })
}

/// Smallest slack found by the audit, with its set.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditWitness {
    pub set: IntervalSet,
    pub a: f64,
    pub mu_plus: f64,
    pub bound: f64,
}

impl AuditWitness {
    pub fn slack(&self) -> f64 {
        self.mu_plus - self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub trials: usize,
    pub lipschitz: f64,
    pub violations: usize,
    /// +∞ when no trial ran.
    pub min_slack: f64,
    pub witness: Option<AuditWitness>,
    /// Smallest slack among trials whose set is a single half-line.
    pub half_line_min_slack: f64,
}

/// x with μ₁^f[(−∞, x]] = u.
fn quantile_1d(measure: &RadialMeasure, u: f64) -> f64 {
    if u > 0.5 {
        measure.radius_at_tail(2.0 * (1.0 - u))
    } else {
        -measure.radius_at_tail(2.0 * u)
    }
}

fn random_set(measure: &RadialMeasure, rng: &mut ChaCha8Rng) -> Option<(IntervalSet, bool)> {
    let big_r = measure.density().support().1;
    let draw = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random_range(1e-9..1.0 - 1e-9);
        quantile_1d(measure, u)
    };
    if rng.random_bool(0.125) {
        let x = draw(rng);
        let iv = if rng.random_bool(0.5) { (f64::NEG_INFINITY, x) } else { (x, f64::INFINITY) };
        return IntervalSet::new(vec![iv]).ok().map(|s| (s, true));
    }
    let k = rng.random_range(1..=3usize);
    let mut pts: Vec<f64> = (0..2 * k).map(|_| draw(rng)).collect();
    pts.sort_by(f64::total_cmp);
    if rng.random_bool(0.25) {
        pts[0] = f64::NEG_INFINITY;
    }
    if rng.random_bool(0.25) {
        pts[2 * k - 1] = f64::INFINITY;
    }
    if pts.iter().any(|p| p.is_finite() && p.abs() >= big_r) {
        return None;
    }
    let iv = pts.chunks(2).map(|c| (c[0], c[1])).collect();
    // the whole line has no boundary and says nothing about the bound
    IntervalSet::new(iv).ok().filter(|s| !s.boundary().is_empty()).map(|s| (s, false))
}

/// Random unions of at most three intervals (some of them half-lines) checked
/// against μ⁺ ≥ I[γ₁](μ[A])/L. Trial i uses ChaCha8 keyed by `seed`, stream i.
pub fn bound_audit(measure: &RadialMeasure, map: &TransportMap, trials: usize, seed: u64) -> Result<AuditReport, ProfileError> {
    if measure.n() != 1 {
        return Err(RadialError::DimensionMismatch { expected: 1, found: measure.n() }.into());
    }
    let lip = map.lipschitz_constant();
    if !lip.is_finite() {
        return Err(ProfileError::Precondition("the transport is not Lipschitz (L = +inf)".into()));
    }
    let results = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let Some((set, half_line)) = random_set(measure, &mut rng) else {
                return Ok(None);
            };
            let (a, mu_plus) = boundary_measure_1d(measure, &set)?;
            let bound = gaussian_profile(a)? / lip;
            Ok(Some((AuditWitness { set, a, mu_plus, bound }, half_line)))
        })
        .collect::<Result<Vec<_>, ProfileError>>()?;

    let mut report = AuditReport {
        trials,
        lipschitz: lip,
        violations: 0,
        min_slack: f64::INFINITY,
        witness: None,
        half_line_min_slack: f64::INFINITY,
    };
    let mut first_violation = None;
    for (w, half_line) in results.into_iter().flatten() {
        let slack = w.slack();
        if slack < -AUDIT_TOLERANCE {
            report.violations += 1;
            first_violation.get_or_insert_with(|| w.clone());
        }
        if half_line {
            report.half_line_min_slack = report.half_line_min_slack.min(slack);
        }
        if slack < report.min_slack {
            report.min_slack = slack;
            report.witness = Some(w);
        }
    }
    if let Some(w) = first_violation {
        return Err(ProfileError::Violation { a: w.a, mu_plus: w.mu_plus, bound: w.bound, witness: w.set });
    }
    Ok(report)
}

/// Minimal slack μ⁺ − I[γ₁](a)/L over the half-lines (−∞, G_f⁻¹(a)], a on a
/// uniform interior grid. For the Gaussian this is ≈ 0: half-lines are optimal.
pub fn half_line_slack(measure: &RadialMeasure, map: &TransportMap, grid_size: usize) -> Result<f64, ProfileError> {
    let lip = map.lipschitz_constant();
    let m = grid_size.max(1);
    let mut best = f64::INFINITY;
    for k in 1..=m {
        let target = k as f64 / (m + 1) as f64;
        let x = quantile_1d(measure, target);
        let set = IntervalSet::new(vec![(f64::NEG_INFINITY, x)])?;
        let (a, mu_plus) = boundary_measure_1d(measure, &set)?;
        best = best.min(mu_plus - gaussian_profile(a)? / lip);
    }
    Ok(best)
}

/// Audit of balls B_r and half-spaces {x₁ ≥ t} in any dimension, where
/// measure and boundary measure reduce to radial integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeAudit {
    pub balls_min_slack: f64,
    pub half_spaces_min_slack: f64,
    pub violations: usize,
}

/// Density of the first coordinate x₁ under μ_n^f.
pub fn marginal_density(measure: &RadialMeasure, t: f64) -> Result<f64, ProfileError> {
    let n = measure.n();
    let density = measure.density();
    let m = measure.mass();
    let t = t.abs();
    if n == 1 {
        return Ok(density.eval(t) / m);
    }
    // A_{n−1} ∫₀^∞ f(√(t² + s²)) s^{n−2} ds / M
    let area = sphere_constants(n - 1)?.area;
    let g = |s: f64| density.eval((t * t + s * s).sqrt()) * s.powi(n as i32 - 2);
    let big_r = density.support().1;
    let v = if big_r.is_finite() {
        if t >= big_r {
            0.0
        } else {
            integrate(g, 0.0, (big_r * big_r - t * t).sqrt(), Tolerance::new(1e-300, 1e-10))?.value
        }
    } else {
        integrate_tail(g, 0.0, 1.0_f64.max(t), Tolerance::new(1e-300, 1e-10))?.value
    };
    Ok(area * v / m)
}

/// μ_n^f[{x₁ ≥ t}] for t ≥ 0.
fn half_space_mass(measure: &RadialMeasure, t: f64) -> Result<f64, ProfileError> {
    let big_r = measure.density().support().1;
    let p = |x: f64| marginal_density(measure, x).unwrap_or(f64::NAN);
    let v = if big_r.is_finite() {
        integrate(p, t, big_r, Tolerance::new(1e-300, 1e-9))?.value
    } else {
        integrate_tail(p, t, 1.0, Tolerance::new(1e-300, 1e-9))?.value
    };
    Ok(v)
}

/// Checks μ⁺ ≥ I[γ₁](a)/L for balls at the radial quantiles and for
/// half-spaces {x₁ ≥ t} on a grid of t.
pub fn shape_audit(map: &TransportMap, grid_size: usize) -> Result<ShapeAudit, ProfileError> {
    let measure = map.measure();
    let lip = map.lipschitz_constant();
    if !lip.is_finite() {
        return Err(ProfileError::Precondition("the transport is not Lipschitz (L = +inf)".into()));
    }
    let m = grid_size.max(1);
    let mut violations = 0;
    let mut balls = f64::INFINITY;
    let mut halves = f64::INFINITY;
    for k in 1..=m {
        let u = k as f64 / (m + 1) as f64;
        let r = measure.radius_at_cdf(u);
        let a = measure.cdf(r);
        let slack = measure.radial_pdf(r) - gaussian_profile(a)? / lip;
        balls = balls.min(slack);
        violations += usize::from(slack < -AUDIT_TOLERANCE);

        // half-space thresholds at the radial quantiles, t = r·u keeps them inside the support
        let t = r * u;
        let a = half_space_mass(measure, t)?;
        let slack = marginal_density(measure, t)? - gaussian_profile(a.clamp(0.0, 1.0))? / lip;
        halves = halves.min(slack);
        violations += usize::from(slack < -AUDIT_TOLERANCE);
    }
    Ok(ShapeAudit { balls_min_slack: balls, half_spaces_min_slack: halves, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_merges_touching() {
        let s = IntervalSet::new(vec![(1.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(s.intervals(), &[(0.0, 2.0)]);
        assert_eq!(s.boundary(), vec![0.0, 2.0]);
    }

    #[test]
    fn overlap_rejected() {
        assert!(matches!(IntervalSet::new(vec![(0.0, 2.0), (1.0, 3.0)]), Err(ProfileError::Overlap(..))));
    }

    #[test]
    fn profile_is_symmetric() {
        for k in 1..100 {
            let a = k as f64 / 100.0;
            let d = gaussian_profile(a).unwrap() - gaussian_profile(1.0 - a).unwrap();
            assert!(d.abs() < 1e-12);
        }
    }
}
