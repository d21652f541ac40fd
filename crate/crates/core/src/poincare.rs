//! The generalized Poincaré limit: the pushforward of the uniform measure on
//! the sphere S_N of radius √N under x ↦ s_n^ρ(x₁, …, x_n), its exact density
//! for finite N, the N → ∞ limit, and Monte-Carlo checks.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{integrate, QuadError, Tolerance};
use crate::radial::RadialMeasure;
use crate::specfun::{gamma_q, ln_gamma_ratio, sphere_constants, SpecialError};
use crate::transport::{norm, TransportMap};

#[derive(Debug, Error)]
pub enum PoincareError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate normal draw for sample {0}")]
    DegenerateDraw(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// A_{N−n}/(N^{n/2} A_N) = π^{−n/2} Γ(N/2)/Γ((N−n)/2) N^{−n/2}.
pub fn prefactor(n: usize, big_n: usize) -> f64 {
    ln_prefactor(n, big_n).exp()
}

fn ln_prefactor(n: usize, big_n: usize) -> f64 {
    let (nf, bn) = (n as f64, big_n as f64);
    ln_gamma_ratio(0.5 * bn, 0.5 * (bn - nf)) - 0.5 * nf * (PI.ln() + bn.ln())
}

/// (2π)^{−n/2}, the N → ∞ limit of the prefactor.
pub fn limit_prefactor(n: usize) -> f64 {
    (2.0 * PI).powf(-0.5 * n as f64)
}

fn check_dim(map: &TransportMap, x: &[f64]) -> Result<(), PoincareError> {
    if x.len() != map.n() {
        return Err(PoincareError::DimensionMismatch { expected: map.n(), found: x.len() });
    }
    Ok(())
}

/// f(0⁺)/M_n^f, the value of both densities' shared Jacobian factor at x = 0
/// divided by (2π)^{−n/2}.
fn origin_jacobian(map: &TransportMap) -> f64 {
    let m = map.measure();
    if m.density().support().0 > 0.0 {
        return 0.0;
    }
    limit_prefactor(m.n()).recip() * m.density().f0_limsup() / m.mass()
}

/// Density of ν_n^ρ at x:
/// (2π)^{−n/2} exp(−σ(|x|)²/2) (σ(|x|)/|x|)^{n−1} σ′(|x|) on the image of s_n^ρ.
pub fn limit_density(map: &TransportMap, x: &[f64]) -> Result<f64, PoincareError> {
    check_dim(map, x)?;
    Ok(limit_density_radial(map, norm(x)))
}

pub fn limit_density_radial(map: &TransportMap, u: f64) -> f64 {
    let n = map.n();
    let (a, b) = map.measure().density().support();
    if u == 0.0 {
        return limit_prefactor(n) * origin_jacobian(map);
    }
    if u <= a || u >= b {
        return 0.0;
    }
    let s = map.sigma(u);
    if !s.is_finite() {
        return 0.0;
    }
    (-0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * s * s + map.ln_jacobian(u, s)).exp()
}

/// Exact density of the pushforward of the uniform measure on S_N under
/// s_n^ρ ∘ P_{n,N}:
/// A_{N−n}/(N^{n/2}A_N) (1 − σ²/N)^{(N−n−2)/2} (σ/|x|)^{n−1} σ′ with σ = σ(|x|).
pub fn finite_n_density(map: &TransportMap, x: &[f64], big_n: usize) -> Result<f64, PoincareError> {
    check_dim(map, x)?;
    check_big_n(map.n(), big_n)?;
    Ok(finite_n_density_radial(map, norm(x), big_n))
}

fn check_big_n(n: usize, big_n: usize) -> Result<(), PoincareError> {
    if big_n < n + 1 {
        return Err(PoincareError::InvalidParameter(format!("N = {big_n} must be at least n + 1 = {}", n + 1)));
    }
    Ok(())
}

pub fn finite_n_density_radial(map: &TransportMap, u: f64, big_n: usize) -> f64 {
    let n = map.n();
    let (a, b) = map.measure().density().support();
    let lp = ln_prefactor(n, big_n);
    if u == 0.0 {
        return lp.exp() * origin_jacobian(map);
    }
    if u <= a || u >= b {
        return 0.0;
    }
    let s = map.sigma(u);
    let bn = big_n as f64;
    if !(s * s < bn) {
        return 0.0;
    }
    let power = 0.5 * (bn - n as f64 - 2.0);
    (lp + power * (-s * s / bn).ln_1p() + map.ln_jacobian(u, s)).exp()
}

/// Breakpoints for radial quadrature: every 64th transport grid radius, clipped to `hi`.
fn breakpoints(map: &TransportMap, hi: f64) -> Vec<f64> {
    let (a, _) = map.measure().density().support();
    let lo = a.max(0.0);
    let mut pts = vec![lo];
    pts.extend(map.grid_r().iter().step_by(64).copied().filter(|&r| r > lo && r < hi));
    pts.push(hi);
    pts
}

const RADIAL_TOL: Tolerance = Tolerance::new(1e-15, 1e-10);

/// A_n ∫ h(u) u^{n−1} du over [r_f, hi].
fn radial_quadrature<H: Fn(f64) -> f64>(map: &TransportMap, hi: f64, h: H) -> Result<f64, PoincareError> {
    let n = map.n();
    let area = sphere_constants(n)?.area;
    let pts = breakpoints(map, hi);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let q = integrate(|u| h(u) * u.powi(n as i32 - 1), w[0], w[1], RADIAL_TOL);
        total += match q {
            Ok(q) => q.value,
            Err(QuadError::NoConvergence { estimate, .. }) => estimate,
            Err(e) => return Err(e.into()),
        };
    }
    Ok(area * total)
}

/// s₁^ρ(√N), the largest radius reached from S_N. When the Gaussian mass
/// beyond √N underflows, the radius carrying tail mass 1e−200 stands in.
fn image_radius(map: &TransportMap, big_n: usize) -> f64 {
    let r = map.s1((big_n as f64).sqrt());
    if r.is_finite() {
        return r;
    }
    let far = map.measure().radius_at_tail(1e-200);
    if far.is_finite() {
        far
    } else {
        let grid = map.grid_r();
        grid[grid.len() - 1]
    }
}

/// ∫ finite_n_density over ℝⁿ by radial quadrature.
pub fn finite_n_mass(map: &TransportMap, big_n: usize) -> Result<f64, PoincareError> {
    check_big_n(map.n(), big_n)?;
    let hi = image_radius(map, big_n);
    radial_quadrature(map, hi, |u| finite_n_density_radial(map, u, big_n))
}

/// ∫ limit_density over ℝⁿ by radial quadrature.
pub fn limit_mass(map: &TransportMap) -> Result<f64, PoincareError> {
    let r = map.grid_r();
    let hi = r[r.len() - 1];
    let (_, t) = map.grid_cdf();
    // the mass beyond the last grid node is the stored tail value
    Ok(radial_quadrature(map, hi, |u| limit_density_radial(map, u))? + t[t.len() - 1])
}

/// L¹ distance between finite_n_density and limit_density.
pub fn l1_distance(map: &TransportMap, big_n: usize) -> Result<f64, PoincareError> {
    check_big_n(map.n(), big_n)?;
    let hi = image_radius(map, big_n);
    let inside = radial_quadrature(map, hi, |u| {
        (finite_n_density_radial(map, u, big_n) - limit_density_radial(map, u)).abs()
    })?;
    // only the limit density lives beyond s₁(√N)
    Ok(inside + map.measure().tail(hi))
}

/// The same distance computed on the Gaussian side, where the map drops out:
/// A_n ∫ |prefactor (1 − v²/N)₊^{(N−n−2)/2} − (2π)^{−n/2} e^{−v²/2}| v^{n−1} dv.
pub fn l1_distance_gaussian_side(n: usize, big_n: usize) -> Result<f64, PoincareError> {
    check_big_n(n, big_n)?;
    let area = sphere_constants(n)?.area;
    let (lp, lim) = (ln_prefactor(n, big_n), limit_prefactor(n));
    let bn = big_n as f64;
    let power = 0.5 * (bn - n as f64 - 2.0);
    let g = |v: f64| {
        let fin = if v * v < bn { (lp + power * (-v * v / bn).ln_1p()).exp() } else { 0.0 };
        (fin - lim * (-0.5 * v * v).exp()).abs() * v.powi(n as i32 - 1)
    };
    let top = bn.sqrt();
    let mut total = 0.0;
    let mut lo = 0.0;
    for k in 1..=64 {
        let hi = (0.25 * k as f64).min(top);
        total += integrate(g, lo, hi, Tolerance::new(1e-16, 1e-12))?.value;
        lo = hi;
        if hi >= top {
            break;
        }
    }
    // beyond v = lo the finite-N term is zero (v ≥ √N) or below e^{−128};
    // the Gaussian term contributes its own tail mass
    Ok(area * total + gamma_q(0.5 * n as f64, 0.5 * lo * lo)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub big_n: usize,
    pub sup_error: f64,
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Both error columns nonincreasing in N, allowing `slack` relative increase.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].sup_error <= w[0].sup_error * (1.0 + slack) && w[1].l1_error <= w[0].l1_error * (1.0 + slack)
        })
    }

    /// Writes `N,sup_error,l1_error`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "N,sup_error,l1_error")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e}", r.big_n, r.sup_error, r.l1_error)?;
        }
        Ok(())
    }
}

/// Sup over `grid` (radii |x|) and L¹ distance between the finite-N and limit densities.
pub fn convergence_diagnostic(map: &TransportMap, big_ns: &[usize], grid: &[f64]) -> Result<ConvergenceTable, PoincareError> {
    let limit: Vec<f64> = grid.iter().map(|&u| limit_density_radial(map, u.abs())).collect();
    let mut rows = Vec::with_capacity(big_ns.len());
    for &big_n in big_ns {
        check_big_n(map.n(), big_n)?;
        let sup_error = grid
            .iter()
            .zip(&limit)
            .map(|(&u, &l)| (finite_n_density_radial(map, u.abs(), big_n) - l).abs())
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow { big_n, sup_error, l1_error: l1_distance(map, big_n)? });
    }
    Ok(ConvergenceTable { rows })
}

/// Pushforward samples s_n^ρ(P_{n,N}(ξ)), ξ uniform on S_N.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub big_n: usize,
    pub count: usize,
    pub seed: u64,
    pub points: Vec<Vec<f64>>,
    pub radial_sorted: Vec<f64>,
}

impl SampleBatch {
    fn from_points(n: usize, big_n: usize, seed: u64, points: Vec<Vec<f64>>) -> Self {
        let mut radial_sorted: Vec<f64> = points.iter().map(|p| norm(p)).collect();
        radial_sorted.sort_by(f64::total_cmp);
        SampleBatch { n, big_n, count: points.len(), seed, points, radial_sorted }
    }

    /// Writes `x1,…,xn`, one point per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Generator for sample `index`: ChaCha8 keyed by `seed`, stream = index.
fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// First n coordinates of a uniform point on S_N.
fn sphere_projection(rng: &mut ChaCha8Rng, n: usize, big_n: usize, index: usize) -> Result<Vec<f64>, PoincareError> {
    for _ in 0..2 {
        let mut head = Vec::with_capacity(n);
        let mut sq = 0.0;
        for k in 0..big_n {
            let z: f64 = rng.sample(StandardNormal);
            if k < n {
                head.push(z);
            }
            sq += z * z;
        }
        let r = sq.sqrt();
        if r >= 1e-100 {
            let scale = (big_n as f64).sqrt() / r;
            return Ok(head.into_iter().map(|v| v * scale).collect());
        }
    }
    Err(PoincareError::DegenerateDraw(index))
}

pub fn sample_pushforward(map: &TransportMap, big_n: usize, count: usize, seed: u64) -> Result<SampleBatch, PoincareError> {
    let n = map.n();
    check_big_n(n, big_n)?;
    if count == 0 {
        return Err(PoincareError::InvalidParameter("count must be at least 1".into()));
    }
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let x = sphere_projection(&mut rng, n, big_n, i)?;
            Ok(map.apply_map(&x))
        })
        .collect::<Result<Vec<_>, PoincareError>>()?;
    Ok(SampleBatch::from_points(n, big_n, seed, points))
}

/// Exact draws from μ_n^f (inverse radial CDF times a uniform direction);
/// a reference batch for the statistics below. `big_n` is recorded as 0.
pub fn sample_target(measure: &RadialMeasure, count: usize, seed: u64) -> Result<SampleBatch, PoincareError> {
    let n = measure.n();
    if count == 0 {
        return Err(PoincareError::InvalidParameter("count must be at least 1".into()));
    }
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let u: f64 = rng.random();
            let r = measure.radius_at_cdf(u);
            let dir = sphere_projection(&mut rng, n, n, i)?;
            let scale = r / norm(&dir);
            Ok(dir.into_iter().map(|v| v * scale).collect())
        })
        .collect::<Result<Vec<_>, PoincareError>>()?;
    Ok(SampleBatch::from_points(n, 0, seed, points))
}

/// One-sample Kolmogorov–Smirnov distance between the radii and F_n.
pub fn ks_statistic(batch: &SampleBatch, measure: &RadialMeasure) -> Result<f64, PoincareError> {
    if batch.n != measure.n() {
        return Err(PoincareError::DimensionMismatch { expected: measure.n(), found: batch.n });
    }
    let m = batch.radial_sorted.len() as f64;
    let d = batch
        .radial_sorted
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = measure.cdf(r);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .reduce(|| 0.0, f64::max);
    Ok(d)
}

/// KS critical value at the 1% level.
pub fn ks_critical_1pct(count: usize) -> f64 {
    1.63 / (count as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthantTest {
    pub counts: Vec<usize>,
    pub statistic: f64,
    pub df: usize,
    /// χ² critical value at the 1% level.
    pub critical: f64,
    pub passed: bool,
}

/// χ² uniformity test of the sample directions over the 2ⁿ orthants.
pub fn orthant_chi2(batch: &SampleBatch) -> Result<OrthantTest, PoincareError> {
    let critical = match batch.n {
        1 => 6.635,
        2 => 11.345,
        3 => 18.475,
        k => return Err(PoincareError::InvalidParameter(format!("orthant test needs n ≤ 3, got {k}"))),
    };
    let bins = 1usize << batch.n;
    let mut counts = vec![0usize; bins];
    for p in &batch.points {
        let idx = p.iter().enumerate().fold(0, |acc, (k, &v)| acc | (usize::from(v >= 0.0) << k));
        counts[idx] += 1;
    }
    let expected = batch.points.len() as f64 / bins as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum::<f64>();
    Ok(OrthantTest { counts, statistic, df: bins - 1, critical, passed: statistic <= critical })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefactor_small_case() {
        assert!((prefactor(1, 3) - 0.288675134594812882).abs() < 1e-14);
    }

    #[test]
    fn streams_are_independent_of_order() {
        let mut a = sample_rng(7, 3);
        let mut b = sample_rng(7, 3);
        let _: f64 = sample_rng(7, 2).random();
        let (x, y): (u64, u64) = (a.random(), b.random());
        assert_eq!(x, y);
    }
}
