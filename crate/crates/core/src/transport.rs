//! The radial transport between γ_n and μ_n^f: σ solves
//! γ_n[B_{σ(r)}] = μ_n^f[B_r], s₁^ρ = σ⁻¹, ρ(u) = s₁^ρ(u)/u and
//! s_n^ρ(x) = ρ(|x|)x.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::quad::brent_max;
use crate::radial::{check_condition_a, RadialError, RadialMeasure};
use crate::specfun::{gamma_p_inv, gamma_pq, gamma_q_inv, SpecialError};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("support of f is disconnected: f vanishes on ({0}, {1})")]
    DisconnectedSupport(f64, f64),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("radius {0} lies outside the tabulated range [{1}, {2}]")]
    OutOfRange(f64, f64, f64),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Grid and divergence-test settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Total number of CDF-grid nodes.
    pub nodes: usize,
    /// Smallest CDF value (and smallest tail value) on the grid.
    pub cdf_floor: f64,
    /// L is reported as +∞ above this value.
    pub divergence_threshold: f64,
    /// Relative growth of 1/σ′ over the last grid decade that flags L = +∞.
    pub growth_threshold: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { nodes: 4096, cdf_floor: 1e-10, divergence_threshold: 1e8, growth_threshold: 1e-3 }
    }
}

/// Why a Lipschitz constant was reported as +∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unbounded {
    /// r_f > 0, so s₁^ρ(u) does not tend to 0 as u ↓ 0.
    NonzeroAtOrigin,
    /// f(0⁺) = 0, so (s₁^ρ)′ blows up at the origin.
    VanishingAtOrigin,
    /// sup 1/σ′ exceeded the divergence threshold.
    Threshold,
    /// 1/σ′ grows monotonically over the last grid decade toward R_f.
    TailGrowth,
}

impl fmt::Display for Unbounded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unbounded::NonzeroAtOrigin => "s1 does not vanish at 0 (r_f > 0)",
            Unbounded::VanishingAtOrigin => "f vanishes at 0",
            Unbounded::Threshold => "sup 1/sigma' above threshold",
            Unbounded::TailGrowth => "1/sigma' grows monotonically toward R_f",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    /// L, or +∞.
    pub value: f64,
    /// Largest value seen on the grid (finite even when `value` is +∞).
    pub grid_sup: f64,
    /// Radius r (target side) where the sup of 1/σ′ was attained.
    pub argmax: f64,
    pub unbounded: Option<Unbounded>,
}

impl Lipschitz {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Radial eigenvalues of the Jacobian of s_n^ρ at |x| = u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSpectrum {
    /// (s₁^ρ)′(u) = ρ′(u)u + ρ(u), multiplicity 1.
    pub radial: f64,
    /// ρ(u), multiplicity n − 1.
    pub tangential: f64,
    pub tangential_multiplicity: usize,
}

/// σ, σ′, s₁^ρ and ρ for one measure μ_n^f.
#[derive(Debug, Clone)]
pub struct TransportMap {
    measure: Arc<RadialMeasure>,
    n: usize,
    ln_scale: f64,
    r: Vec<f64>,
    sigma: Vec<f64>,
    sigma_prime: Vec<f64>,
    cdf: Vec<f64>,
    tail: Vec<f64>,
    lipschitz: Lipschitz,
    options: TransportOptions,
}

pub fn build_transport(measure: RadialMeasure) -> Result<TransportMap, TransportError> {
    TransportMap::build(Arc::new(measure), TransportOptions::default())
}

impl TransportMap {
    pub fn build(measure: Arc<RadialMeasure>, options: TransportOptions) -> Result<Self, TransportError> {
        if options.nodes < 16 {
            return Err(TransportError::InvalidOption(format!("grid of {} nodes", options.nodes)));
        }
        if !(options.cdf_floor > 0.0 && options.cdf_floor < 0.5) {
            return Err(TransportError::InvalidOption(format!("cdf floor {}", options.cdf_floor)));
        }
        if let Some(&(a, b)) = measure.density().support_gaps().first() {
            return Err(TransportError::DisconnectedSupport(a, b));
        }
        let n = measure.n();
        let half_n = 0.5 * n as f64;
        let ln_scale = half_n * (2.0 * PI).ln() - measure.mass().ln();

        let half = options.nodes / 2;
        let (lf, lh) = (options.cdf_floor.ln(), 0.5f64.ln());
        let mut rows: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(options.nodes);
        for k in 0..half {
            let p = (lf + (lh - lf) * k as f64 / (half - 1) as f64).exp();
            let r = measure.radius_at_cdf(p);
            let s = (2.0 * gamma_p_inv(half_n, p)?).sqrt();
            rows.push((r, s, p, 1.0 - p));
        }
        for k in (0..options.nodes - half).rev() {
            let q = (lf + (lh - lf) * k as f64 / (options.nodes - half - 1) as f64).exp();
            if k == options.nodes - half - 1 {
                continue; // the median is already on the lower half
            }
            let r = measure.radius_at_tail(q);
            let s = (2.0 * gamma_q_inv(half_n, q)?).sqrt();
            rows.push((r, s, 1.0 - q, q));
        }
        rows.dedup_by(|b, a| b.0 <= a.0 || b.1 <= a.1);

        let mut map = TransportMap {
            measure,
            n,
            ln_scale,
            r: rows.iter().map(|x| x.0).collect(),
            sigma: rows.iter().map(|x| x.1).collect(),
            sigma_prime: Vec::new(),
            cdf: rows.iter().map(|x| x.2).collect(),
            tail: rows.iter().map(|x| x.3).collect(),
            lipschitz: Lipschitz { value: f64::NAN, grid_sup: f64::NAN, argmax: f64::NAN, unbounded: None },
            options,
        };
        map.sigma_prime = map.r.iter().zip(&map.sigma).map(|(&r, &s)| map.rell(r, s)).collect();
        map.lipschitz = map.compute_lipschitz();
        Ok(map)
    }

    /// σ′ from the closed-form relation with f, evaluated in log space.
    fn rell(&self, r: f64, s: f64) -> f64 {
        let ln_f = self.measure.density().ln_eval(r);
        let m1 = (self.n - 1) as f64;
        let geo = if self.n == 1 { 0.0 } else { m1 * (r.ln() - s.ln()) };
        (self.ln_scale + ln_f + 0.5 * s * s + geo).exp()
    }

    pub fn measure(&self) -> &RadialMeasure {
        &self.measure
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> TransportOptions {
        self.options
    }

    /// Target-side grid radii r_k.
    pub fn grid_r(&self) -> &[f64] {
        &self.r
    }

    /// σ(r_k).
    pub fn grid_sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// σ′(r_k) from the closed-form relation.
    pub fn grid_sigma_prime(&self) -> &[f64] {
        &self.sigma_prime
    }

    /// F_n(r_k) and 1 − F_n(r_k) used to build the grid.
    pub fn grid_cdf(&self) -> (&[f64], &[f64]) {
        (&self.cdf, &self.tail)
    }

    /// [σ_min, σ_max] covered by the grid on the Gaussian side.
    pub fn u_range(&self) -> (f64, f64) {
        (self.sigma[0], self.sigma[self.sigma.len() - 1])
    }

    /// σ(r) for r ≥ 0.
    pub fn sigma(&self, r: f64) -> f64 {
        let (a, b) = self.measure.density().support();
        if r <= a {
            return 0.0;
        }
        if r >= b {
            return f64::INFINITY;
        }
        let (p, q) = self.measure.cdf_pair(r);
        let half_n = 0.5 * self.n as f64;
        let x = if p <= 0.5 { gamma_p_inv(half_n, p) } else { gamma_q_inv(half_n, q) };
        (2.0 * x.unwrap_or(f64::NAN)).sqrt()
    }

    /// σ′(r) by the closed-form relation.
    pub fn sigma_prime(&self, r: f64) -> f64 {
        let s = self.sigma(r);
        if s == 0.0 || !s.is_finite() {
            return f64::NAN;
        }
        self.rell(r, s)
    }

    /// (σ(r), σ′(r)) from a single CDF evaluation.
    pub fn sigma_with_prime(&self, r: f64) -> (f64, f64) {
        let s = self.sigma(r);
        if s == 0.0 || !s.is_finite() {
            return (s, f64::NAN);
        }
        (s, self.rell(r, s))
    }

    /// ln[(σ/r)^{n−1} σ′] at r given s = σ(r); by the closed-form relation
    /// this is ln((2π)^{n/2} f(r)/M_n^f) + s²/2.
    pub fn ln_jacobian(&self, r: f64, s: f64) -> f64 {
        self.ln_scale + self.measure.density().ln_eval(r) + 0.5 * s * s
    }

    /// s₁^ρ(u) = σ⁻¹(u) for u ≥ 0.
    pub fn s1(&self, u: f64) -> f64 {
        let (a, b) = self.measure.density().support();
        if u <= 0.0 {
            return a;
        }
        if u == f64::INFINITY {
            return b;
        }
        let (p, q) = gamma_pq(0.5 * self.n as f64, 0.5 * u * u).unwrap_or((f64::NAN, f64::NAN));
        if p <= 0.5 {
            self.measure.radius_at_cdf(p)
        } else {
            self.measure.radius_at_tail(q)
        }
    }

    /// (s₁^ρ)′(u) = 1/σ′(s₁^ρ(u)).
    pub fn s1_prime(&self, u: f64) -> f64 {
        let r = self.s1(u);
        1.0 / self.rell(r, u)
    }

    /// ρ(u) = s₁^ρ(u)/u, with the grid value at the smallest node standing in for u = 0.
    pub fn rho(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.rho_at_zero();
        }
        self.s1(u) / u
    }

    /// ρ(0⁺), extrapolated from the first grid node.
    pub fn rho_at_zero(&self) -> f64 {
        if self.measure.density().support().0 > 0.0 {
            return f64::INFINITY;
        }
        self.r[0] / self.sigma[0]
    }

    /// s_n^ρ(x) = ρ(|x|)x, and 0 at x = 0.
    pub fn apply_map(&self, x: &[f64]) -> Vec<f64> {
        let u = norm(x);
        if u == 0.0 {
            return vec![0.0; x.len()];
        }
        let scale = self.s1(u) / u;
        x.iter().map(|v| v * scale).collect()
    }

    /// Σ(y) = σ(|y|)y/|y| on the image of s_n^ρ, and 0 elsewhere.
    pub fn apply_sigma_map(&self, y: &[f64]) -> Vec<f64> {
        let v = norm(y);
        let (a, b) = self.measure.density().support();
        if v == 0.0 || v <= a || v >= b {
            return vec![0.0; y.len()];
        }
        let scale = self.sigma(v) / v;
        y.iter().map(|c| c * scale).collect()
    }

    pub fn jacobian_spectrum(&self, u: f64) -> Result<JacobianSpectrum, TransportError> {
        let (lo, hi) = self.u_range();
        if !(u >= lo && u <= hi) {
            return Err(TransportError::OutOfRange(u, lo, hi));
        }
        let r = self.s1(u);
        Ok(JacobianSpectrum {
            radial: 1.0 / self.rell(r, u),
            tangential: r / u,
            tangential_multiplicity: self.n - 1,
        })
    }

    pub fn lipschitz(&self) -> Lipschitz {
        self.lipschitz
    }

    /// L, or +∞ when flagged unbounded.
    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz.value
    }

    fn compute_lipschitz(&self) -> Lipschitz {
        let inv: Vec<f64> = self.sigma_prime.iter().map(|v| 1.0 / v).collect();
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (k, (&v, (&r, &s))) in inv.iter().zip(self.r.iter().zip(&self.sigma)).enumerate() {
            let cand = v.max(r / s);
            if cand.is_finite() && cand > best {
                best = cand;
                arg = k;
            }
        }
        let mut argmax = self.r[arg];
        if arg > 0 && arg + 1 < self.r.len() {
            let (lo, hi) = (self.r[arg - 1], self.r[arg + 1]);
            let (x, fx) = brent_max(|r| 1.0 / self.sigma_prime(r), lo, hi, 1e-12);
            if fx.is_finite() && fx > best {
                best = fx;
                argmax = x;
            }
        }
        let mut unbounded = None;
        let density = self.measure.density();
        if density.support().0 > 0.0 {
            unbounded = Some(Unbounded::NonzeroAtOrigin);
        } else if !check_condition_a(density).liminf_positive {
            unbounded = Some(Unbounded::VanishingAtOrigin);
        } else if best > self.options.divergence_threshold {
            unbounded = Some(Unbounded::Threshold);
        } else if self.tail_growth(&inv) > self.options.growth_threshold {
            unbounded = Some(Unbounded::TailGrowth);
        }
        Lipschitz {
            value: if unbounded.is_some() { f64::INFINITY } else { best },
            grid_sup: best,
            argmax,
            unbounded,
        }
    }

    /// Relative growth of 1/σ′ over the last tail decade of the grid when it
    /// is monotone there; 0 otherwise.
    fn tail_growth(&self, inv: &[f64]) -> f64 {
        let floor = self.options.cdf_floor;
        let start = self.tail.iter().position(|&t| t <= 10.0 * floor).unwrap_or(self.tail.len());
        let window: Vec<f64> = inv[start..].iter().copied().filter(|v| v.is_finite()).collect();
        if window.len() < 3 {
            return 0.0;
        }
        let monotone = window.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
        if !monotone {
            return 0.0;
        }
        window[window.len() - 1] / window[0] - 1.0
    }

    /// Writes `r,sigma,sigma_prime,rho` for every grid node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,sigma,sigma_prime,rho")?;
        for k in 0..self.r.len() {
            let (r, s, sp) = (self.r[k], self.sigma[k], self.sigma_prime[k]);
            writeln!(out, "{r:e},{s:e},{sp:e},{:e}", r / s)?;
        }
        Ok(())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialDensity;

    fn build(d: RadialDensity, n: usize) -> TransportMap {
        build_transport(RadialMeasure::new(d, n).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_is_identity() {
        let t = build(RadialDensity::gaussian(), 2);
        for (&r, &s) in t.grid_r().iter().zip(t.grid_sigma()) {
            assert!((r - s).abs() < 1e-9 * (1.0 + r), "r={r} s={s}");
        }
        assert!((t.lipschitz_constant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_gaussian_halves_sigma() {
        let t = build(RadialDensity::scaled_gaussian(2.0).unwrap(), 1);
        assert!((t.sigma(3.0) - 1.5).abs() < 1e-10);
        assert!((t.lipschitz_constant() - 2.0).abs() < 1e-8);
        let y = t.apply_map(&[1.0, 0.0][..1]);
        assert!((y[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_unbounded() {
        let t = build(RadialDensity::exp_power(1.0).unwrap(), 1);
        assert_eq!(t.lipschitz_constant(), f64::INFINITY);
        assert_eq!(t.lipschitz().unbounded, Some(Unbounded::TailGrowth));
    }

    #[test]
    fn shifted_support_unbounded() {
        let t = build(RadialDensity::indicator(1.0, 2.0).unwrap(), 2);
        assert_eq!(t.lipschitz().unbounded, Some(Unbounded::NonzeroAtOrigin));
    }

    #[test]
    fn disconnected_rejected() {
        let d = RadialDensity::tabulated(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let r = build_transport(RadialMeasure::new(d, 1).unwrap());
        assert!(matches!(r, Err(TransportError::DisconnectedSupport(..))));
    }

    #[test]
    fn origin_maps_to_origin() {
        let t = build(RadialDensity::exp_power(3.0).unwrap(), 3);
        assert_eq!(t.apply_map(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(t.apply_sigma_map(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
    }

    #[test]
    fn spectrum_out_of_range() {
        let t = build(RadialDensity::gaussian(), 1);
        assert!(t.jacobian_spectrum(1e3).is_err());
        assert!(t.jacobian_spectrum(1.0).is_ok());
    }
}
