//! φ-deformed logarithms and exponentials, the profiles
//! φ_p(r) = exp_φ(−r^p/p), and the classifier for their transports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::quad::{integrate, integrate_tail, newton_bracketed, QuadError, Tolerance};
use crate::radial::{RadialDensity, RadialError};

#[derive(Debug, Error)]
pub enum PhiError {
    #[error("invalid phi: {0}")]
    Invalid(String),
    #[error("cannot parse phi spec \"{0}\"")]
    Parse(String),
    #[error("cannot read phi table: {0}")]
    Io(String),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

pub type PhiFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Identity,
    /// s^q with q ≠ 1
    Power(f64),
    /// Σ c_k s^k
    Poly(Vec<f64>),
    /// log-log linear through (s_i, φ_i), power-law beyond the ends
    Table { ln_s: Vec<f64>, ln_phi: Vec<f64> },
    Custom(PhiFn),
}

const U_MAX: f64 = 40.0;
const U_STEP: f64 = 1.0 / 16.0;
const LN_TOL: Tolerance = Tolerance::new(0.0, 1e-13);

/// Cumulative ln_φ on the grid u_i = ln s_i, for the quadrature-backed kinds.
#[derive(Clone)]
struct LnTable {
    u: Vec<f64>,
    v: Vec<f64>,
}

/// A positive nondecreasing φ on (0, ∞) with its derived constants.
#[derive(Clone)]
pub struct PhiFunction {
    kind: Kind,
    label: String,
    l_phi: f64,
    big_l_phi: f64,
    theta: f64,
    delta: f64,
    table: Option<Arc<LnTable>>,
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction")
            .field("label", &self.label)
            .field("l_phi", &self.l_phi)
            .field("L_phi", &self.big_l_phi)
            .field("theta", &self.theta)
            .field("delta", &self.delta)
            .finish()
    }
}

impl PhiFunction {
    pub fn identity() -> Self {
        PhiFunction {
            kind: Kind::Identity,
            label: "identity".into(),
            l_phi: f64::NEG_INFINITY,
            big_l_phi: f64::INFINITY,
            theta: 1.0,
            delta: 1.0,
            table: None,
        }
    }

    /// φ(s) = s^q.
    pub fn power(q: f64) -> Result<Self, PhiError> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(PhiError::Invalid(format!("power exponent q = {q}")));
        }
        if q == 1.0 {
            return Ok(Self::identity());
        }
        let (l, big_l) = if q < 1.0 { (-1.0 / (1.0 - q), f64::INFINITY) } else { (f64::NEG_INFINITY, 1.0 / (q - 1.0)) };
        Ok(PhiFunction {
            kind: Kind::Power(q),
            label: format!("power:q={q}"),
            l_phi: l,
            big_l_phi: big_l,
            theta: q,
            delta: q,
            table: None,
        })
    }

    /// φ(s) = Σ c_k s^k with nonnegative coefficients, listed from degree 0.
    pub fn poly(coeffs: Vec<f64>) -> Result<Self, PhiError> {
        if coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(PhiError::Invalid("polynomial coefficients must be finite and nonnegative".into()));
        }
        let degs: Vec<usize> = coeffs.iter().enumerate().filter(|(_, c)| **c > 0.0).map(|(k, _)| k).collect();
        let (Some(&lo), Some(&hi)) = (degs.first(), degs.last()) else {
            return Err(PhiError::Invalid("polynomial is identically zero".into()));
        };
        let label = format!(
            "poly:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        Self::generic(Kind::Poly(coeffs), label, Some((hi as f64, lo as f64)))
    }

    /// Log-log linear interpolation of positive nondecreasing samples.
    pub fn table(s: Vec<f64>, phi: Vec<f64>) -> Result<Self, PhiError> {
        if s.len() != phi.len() || s.len() < 2 {
            return Err(PhiError::Invalid("phi table needs at least two rows".into()));
        }
        if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PhiError::Invalid("s must be positive and strictly increasing".into()));
        }
        if phi.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || phi.windows(2).any(|w| w[1] < w[0]) {
            return Err(PhiError::Invalid("phi must be positive and nondecreasing".into()));
        }
        let ln_s: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        let ln_phi: Vec<f64> = phi.iter().map(|v| v.ln()).collect();
        let slopes: Vec<f64> = (1..ln_s.len())
            .map(|i| (ln_phi[i] - ln_phi[i - 1]) / (ln_s[i] - ln_s[i - 1]))
            .collect();
        let theta = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let delta = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        let label = format!("table[{} rows]", s.len());
        Self::generic(Kind::Table { ln_s, ln_phi }, label, Some((theta, delta)))
    }

    /// Reads a CSV with header `s,phi`.
    pub fn from_csv(path: &Path) -> Result<Self, PhiError> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| PhiError::Io(e.to_string()))?;
        let headers = rd.headers().map_err(|e| PhiError::Io(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "s" || &headers[1] != "phi" {
            return Err(PhiError::Invalid("expected header \"s,phi\"".into()));
        }
        let (mut s, mut phi) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec.map_err(|e| PhiError::Io(e.to_string()))?;
            let parse = |x: &str| x.parse::<f64>().map_err(|_| PhiError::Parse(x.to_string()));
            s.push(parse(&rec[0])?);
            phi.push(parse(&rec[1])?);
        }
        Self::table(s, phi)
    }

    /// User-supplied φ; θ_φ and δ_φ are estimated numerically.
    pub fn custom<F>(label: impl Into<String>, f: F) -> Result<Self, PhiError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::generic(Kind::Custom(Arc::new(f)), label.into(), None)
    }

    fn generic(kind: Kind, label: String, coeffs: Option<(f64, f64)>) -> Result<Self, PhiError> {
        let mut phi = PhiFunction {
            kind,
            label,
            l_phi: f64::NAN,
            big_l_phi: f64::NAN,
            theta: f64::NAN,
            delta: f64::NAN,
            table: None,
        };
        let (theta, delta) = match coeffs {
            Some(td) => td,
            None => phi.estimate_theta_delta(),
        };
        phi.theta = theta;
        phi.delta = delta;
        let table = phi.build_table()?;
        let g = |u: f64| phi.integrand(u);
        let lower = tail_integral(|w| g(-w), U_MAX);
        let upper = tail_integral(g, U_MAX);
        phi.l_phi = table.v[0] - lower;
        phi.big_l_phi = table.v[table.v.len() - 1] + upper;
        phi.table = Some(Arc::new(table));
        Ok(phi)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True for φ = id (including s^q with q = 1).
    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// Exponent q if φ is a pure power (identity gives 1).
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Identity => Some(1.0),
            Kind::Power(q) => Some(q),
            _ => None,
        }
    }

    /// φ(s).
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Identity => s,
            Kind::Power(q) => s.powf(*q),
            Kind::Poly(c) => c.iter().rev().fold(0.0, |acc, ck| acc * s + ck),
            Kind::Table { .. } => self.ln_phi_of_ln(s.ln()).exp(),
            Kind::Custom(f) => f(s),
        }
    }

    /// ln φ(e^u), stable for large |u|.
    fn ln_phi_of_ln(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Identity => u,
            Kind::Power(q) => q * u,
            Kind::Poly(c) => {
                let terms: Vec<f64> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, ck)| **ck > 0.0)
                    .map(|(k, ck)| ck.ln() + k as f64 * u)
                    .collect();
                let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
            }
            Kind::Table { ln_s, ln_phi } => {
                let m = ln_s.len();
                let i = ln_s.partition_point(|&x| x <= u).clamp(1, m - 1);
                let slope = (ln_phi[i] - ln_phi[i - 1]) / (ln_s[i] - ln_s[i - 1]);
                ln_phi[i - 1] + slope * (u - ln_s[i - 1])
            }
            Kind::Custom(f) => f(u.exp()).ln(),
        }
    }

    /// d ln_φ(e^u)/du = e^u/φ(e^u).
    fn integrand(&self, u: f64) -> f64 {
        (u - self.ln_phi_of_ln(u)).exp()
    }

    fn build_table(&self) -> Result<LnTable, PhiError> {
        let m = (2.0 * U_MAX / U_STEP).round() as usize;
        let u: Vec<f64> = (0..=m).map(|i| -U_MAX + i as f64 * U_STEP).collect();
        let zero = m / 2;
        let mut v = vec![0.0; m + 1];
        for i in zero + 1..=m {
            v[i] = v[i - 1] + self.panel(u[i - 1], u[i])?;
        }
        for i in (0..zero).rev() {
            v[i] = v[i + 1] - self.panel(u[i], u[i + 1])?;
        }
        Ok(LnTable { u, v })
    }

    fn panel(&self, a: f64, b: f64) -> Result<f64, PhiError> {
        match integrate(|u| self.integrand(u), a, b, LN_TOL) {
            Ok(q) => Ok(q.value),
            Err(QuadError::NoConvergence { estimate, .. }) => Ok(estimate),
            Err(e) => Err(PhiError::Invalid(format!("1/phi not integrable on [{a}, {b}]: {e}"))),
        }
    }

    fn estimate_theta_delta(&self) -> (f64, f64) {
        let m = 2000;
        let (mut th, mut de) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..=m {
            let s = 10f64.powf(-8.0 + 16.0 * i as f64 / m as f64);
            let h = 1e-6 * s;
            let f0 = self.eval(s);
            let coef = s * (self.eval(s + h) - f0) / (h * f0);
            if coef.is_finite() {
                th = th.max(coef);
                de = de.min(coef);
            }
        }
        (th, de)
    }

    /// l_φ = lim_{t↓0} ln_φ(t).
    pub fn l_phi(&self) -> f64 {
        self.l_phi
    }

    /// L_φ = lim_{t↑∞} ln_φ(t).
    pub fn big_l_phi(&self) -> f64 {
        self.big_l_phi
    }

    /// (θ_φ, δ_φ).
    pub fn theta_delta(&self) -> (f64, f64) {
        (self.theta, self.delta)
    }

    /// ln_φ(t) = ∫_1^t ds/φ(s).
    pub fn ln_phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.l_phi;
        }
        if t == f64::INFINITY {
            return self.big_l_phi;
        }
        match &self.kind {
            Kind::Identity => t.ln(),
            Kind::Power(q) => ((1.0 - q) * t.ln()).exp_m1() / (1.0 - q),
            _ => self.ln_phi_generic(t.ln()),
        }
    }

    fn ln_phi_generic(&self, u: f64) -> f64 {
        let tab = self.table.as_ref().expect("generic phi carries a table");
        let m = tab.u.len();
        let i = if u <= tab.u[0] {
            0
        } else if u >= tab.u[m - 1] {
            m - 1
        } else {
            let k = ((u - tab.u[0]) / U_STEP).floor() as usize;
            k.min(m - 1)
        };
        tab.v[i] + self.panel(tab.u[i], u).unwrap_or(f64::NAN)
    }

    /// exp_φ(τ): 0 for τ ≤ l_φ, ln_φ⁻¹(τ) inside (l_φ, L_φ), ∞ for τ ≥ L_φ.
    pub fn exp_phi(&self, tau: f64) -> f64 {
        if tau <= self.l_phi {
            return 0.0;
        }
        if tau >= self.big_l_phi {
            return f64::INFINITY;
        }
        match &self.kind {
            Kind::Identity => tau.exp(),
            Kind::Power(q) => exp_q(*q, tau),
            _ => self.exp_phi_generic(tau),
        }
    }

    fn exp_phi_generic(&self, tau: f64) -> f64 {
        let tab = self.table.as_ref().expect("generic phi carries a table");
        let m = tab.v.len();
        let (lo, hi) = if tau < tab.v[0] {
            let mut lo = tab.u[0] - 1.0;
            while self.ln_phi_generic(lo) > tau && lo > -700.0 {
                lo = tab.u[0] - 2.0 * (tab.u[0] - lo);
            }
            (lo, tab.u[0])
        } else if tau > tab.v[m - 1] {
            let mut hi = tab.u[m - 1] + 1.0;
            while self.ln_phi_generic(hi) < tau && hi < 700.0 {
                hi = tab.u[m - 1] + 2.0 * (hi - tab.u[m - 1]);
            }
            (tab.u[m - 1], hi)
        } else {
            let i = tab.v.partition_point(|&x| x <= tau).clamp(1, m - 1);
            (tab.u[i - 1], tab.u[i])
        };
        let u = newton_bracketed(|u| (self.ln_phi_generic(u) - tau, self.integrand(u)), lo, hi, 1e-15)
            .unwrap_or(0.5 * (lo + hi));
        u.exp()
    }

    /// ln exp_φ(τ), accurate where exp_φ(τ) underflows.
    pub fn ln_exp_phi(&self, tau: f64) -> f64 {
        match &self.kind {
            Kind::Identity => tau,
            Kind::Power(q) => {
                let base = (1.0 - q) * tau;
                if base <= -1.0 {
                    if *q < 1.0 { f64::NEG_INFINITY } else { f64::INFINITY }
                } else {
                    base.ln_1p() / (1.0 - q)
                }
            }
            _ => self.exp_phi(tau).ln(),
        }
    }
}

fn tail_integral<G: Fn(f64) -> f64>(g: G, from: f64) -> f64 {
    match integrate_tail(g, from, 1.0, Tolerance::relative(1e-12)) {
        Ok(q) => q.value,
        Err(_) => f64::INFINITY,
    }
}

impl FromStr for PhiFunction {
    type Err = PhiError;

    /// `identity`, `power:q=<v>`, `poly:<c0>,<c1>,…` or `table:<file>`.
    fn from_str(s: &str) -> Result<Self, PhiError> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Self::identity());
        }
        if let Some(rest) = s.strip_prefix("power:") {
            let v = rest.strip_prefix("q=").ok_or_else(|| PhiError::Parse(s.into()))?;
            let q: f64 = v.parse().map_err(|_| PhiError::Parse(s.into()))?;
            return Self::power(q);
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coeffs: Result<Vec<f64>, _> = rest.split(',').map(|c| c.trim().parse::<f64>()).collect();
            return Self::poly(coeffs.map_err(|_| PhiError::Parse(s.into()))?);
        }
        if let Some(path) = s.strip_prefix("table:") {
            return Self::from_csv(Path::new(path));
        }
        Err(PhiError::Parse(s.into()))
    }
}

/// exp_q(τ) = [1 + (1−q)τ]₊^{1/(1−q)}, with exp_1 = exp and 0^a = ∞ for a < 0.
pub fn exp_q(q: f64, tau: f64) -> f64 {
    if q == 1.0 {
        return tau.exp();
    }
    let base = (1.0 - q) * tau;
    if base <= -1.0 {
        return if q < 1.0 { 0.0 } else { f64::INFINITY };
    }
    (base.ln_1p() / (1.0 - q)).exp()
}

/// The radial profile φ_p(r) = exp_φ(−r^p/p) on (0, R_φ), R_φ = (−p l_φ)^{1/p}.
pub fn phi_p_density(phi: &PhiFunction, p: f64) -> Result<RadialDensity, PhiError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(PhiError::Invalid(format!("exponent p = {p}")));
    }
    let r_phi = r_phi(phi, p);
    let label = format!("phi[{}]:p={p}", phi.label());
    let (a, b) = (phi.clone(), phi.clone());
    let d = RadialDensity::from_fn_with_ln(
        label,
        move |r: f64| a.exp_phi(-r.powf(p) / p),
        move |r: f64| b.ln_exp_phi(-r.powf(p) / p),
        0.0,
        r_phi,
    )?;
    Ok(d)
}

/// R_φ = (−p l_φ)^{1/p}.
pub fn r_phi(phi: &PhiFunction, p: f64) -> f64 {
    let l = phi.l_phi();
    if l == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (-p * l).powf(1.0 / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    Yes,
    No,
    Inconclusive,
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tri::Yes => "yes",
            Tri::No => "no",
            Tri::Inconclusive => "inconclusive",
        })
    }
}

/// Which clause of the classification fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// Neither l_φ > −∞ nor θ_φ < (n+p)/n.
    NotIntegrable,
    /// θ_φ < 1.
    ThetaBelowOne,
    /// 1 ≤ δ_φ, 1 < θ_φ < (n+p)/n, (θ_φ−δ_φ)/(θ_φ−1) ≤ 1/p.
    HeavyTail,
    /// φ = id: Lipschitz exactly when p ≥ 2.
    IdentityRemark,
    None,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::NotIntegrable => "not-integrable",
            Clause::ThetaBelowOne => "theta<1",
            Clause::HeavyTail => "heavy-tail",
            Clause::IdentityRemark => "identity:p>=2",
            Clause::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPClassification {
    pub integrable: bool,
    pub lipschitz: Tri,
    pub clause: Clause,
    pub r_phi: f64,
}

pub fn classify(phi: &PhiFunction, p: f64, n: usize) -> PhiPClassification {
    let (theta, delta) = phi.theta_delta();
    let bound = (n as f64 + p) / n as f64;
    let integrable = phi.l_phi() > f64::NEG_INFINITY || theta < bound;
    let r_phi = r_phi(phi, p);
    let (lipschitz, clause) = if !integrable {
        (Tri::Inconclusive, Clause::NotIntegrable)
    } else if phi.is_identity() {
        (if p >= 2.0 { Tri::Yes } else { Tri::No }, Clause::IdentityRemark)
    } else if theta < 1.0 {
        (Tri::Yes, Clause::ThetaBelowOne)
    } else if delta >= 1.0 && theta > 1.0 && theta < bound && (theta - delta) / (theta - 1.0) <= 1.0 / p {
        (Tri::No, Clause::HeavyTail)
    } else {
        (Tri::Inconclusive, Clause::None)
    };
    PhiPClassification { integrable, lipschitz, clause, r_phi }
}
