//! Conditions (a), (b1), (b2) on f and the log-concavity criterion, combined
//! into a verdict on whether the radial transport is Lipschitz.
//!
//! Limits toward R_f are read off a window of radii spanning the tail masses
//! 1 − F_n ∈ [1e−10, 1e−2]. Everything here is a numerical certificate.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::radial::{check_condition_a, ConditionAReport, RadialDensity, RadialError, RadialMeasure};
use crate::transport::{Lipschitz, TransportMap};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("finite differences of ln f are too noisy at r = {r} (relative discrepancy {discrepancy:e})")]
    NonSmooth { r: f64, discrepancy: f64 },
}

/// Tail masses bounding the window where limits toward R_f are estimated.
pub const WINDOW_TAILS: (f64, f64) = (1e-2, 1e-10);
const WINDOW_POINTS: usize = 64;
const SUB_WINDOWS: usize = 4;
const LAMBDA_RESOLUTION: f64 = 1e-3;
const B2_FLOOR: f64 = -1e6;
const B2_REL_CHANGE: f64 = 0.05;
/// Log-slope below which a quantity is read as settling to a finite limit.
const SLOPE_TOL: f64 = 0.05;
const FD_STEP: f64 = 1e-2;
const FD_NOISE: f64 = 1e-3;

/// A positive weight ψ on (R, R_f).
#[derive(Clone)]
pub struct Psi {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Psi {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Psi { label: label.into(), f: Arc::new(f) }
    }

    /// ψ(r) = r^e.
    pub fn power(e: f64) -> Self {
        Psi::new(format!("r^{e}"), move |r: f64| r.powf(e))
    }

    /// ψ(r) = 1/Φ′(r) with Φ = −ln f, by central differences.
    pub fn reciprocal_log_derivative(density: &RadialDensity) -> Self {
        let d = density.clone();
        Psi::new("1/Phi' (finite differences)", move |r| {
            let (p1, _) = phi_derivatives(&d, r, FD_STEP);
            1.0 / p1
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Psi").field(&self.label).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct B1Result {
    pub passed: bool,
    /// Largest λ (to resolution 1e−3) for which both sides of (b1) hold on the window.
    pub lambda: f64,
    pub psi: String,
    pub r_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct B2Result {
    pub passed: bool,
    /// Running infimum of ψ² ln(fψr^{n−1}) at the end of the window.
    pub liminf: f64,
    /// Running infimum at the end of each sub-window.
    pub running_inf: Vec<f64>,
}

/// Estimated limit of a quantity toward R_f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    /// Value at the outermost radius of the window.
    pub last: f64,
    /// d ln|X| / dt over the outer half of the window (t = ln r, or −ln(R_f − r)).
    pub slope: f64,
    /// 0, +∞, or `last` depending on the slope.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogcvxReport {
    /// lim Φ″ ∈ (0, ∞].
    pub second_derivative_positive: bool,
    pub second_derivative: LimitEstimate,
    /// lim Φ′ = ∞.
    pub first_derivative_infinite: bool,
    pub first_derivative: LimitEstimate,
    /// lim sup Φ″/Φ′² < ∞.
    pub ratio_bounded: bool,
    pub ratio: LimitEstimate,
    pub r_range: (f64, f64),
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Lipschitz,
    NotLipschitz,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Lipschitz => "LIPSCHITZ",
            Verdict::NotLipschitz => "NOT_LIPSCHITZ",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiSource {
    Logcvx,
    User,
    FiniteDifference,
}

/// One radius of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusDiagnostic {
    pub r: f64,
    /// 1 − F_n(r).
    pub tail: f64,
    pub psi: f64,
    /// ∫_r^{R_f} f s^{n−1} ds / (f ψ r^{n−1}).
    pub b1_ratio: f64,
    /// ψ² ln(f ψ r^{n−1}).
    pub b2_value: f64,
}

#[derive(Debug, Clone)]
pub struct CrossCheck {
    pub lipschitz: Lipschitz,
    /// None when the verdict is inconclusive.
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CriteriaReport {
    pub label: String,
    pub n: usize,
    pub cond_a: ConditionAReport,
    pub cond_b1: B1Result,
    pub cond_b2: B2Result,
    pub logcvx: Option<LogcvxReport>,
    /// Why the log-concavity check could not run, if it did not.
    pub logcvx_error: Option<String>,
    pub psi_source: PsiSource,
    pub verdict: Verdict,
    pub diagnostics: Vec<RadiusDiagnostic>,
    pub cross_check: Option<CrossCheck>,
}

impl CriteriaReport {
    /// Compares the verdict with the Lipschitz constant of a built transport.
    pub fn cross_validate(&mut self, map: &TransportMap) {
        let lip = map.lipschitz();
        let agrees = match self.verdict {
            Verdict::Lipschitz => Some(lip.is_finite()),
            Verdict::NotLipschitz => Some(!lip.is_finite()),
            Verdict::Inconclusive => None,
        };
        self.cross_check = Some(CrossCheck { lipschitz: lip, agrees });
    }

    /// Writes `r,tail,psi,b1_ratio,b2_value` for every window radius.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "r,tail,psi,b1_ratio,b2_value")?;
        for d in &self.diagnostics {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e}", d.r, d.tail, d.psi, d.b1_ratio, d.b2_value)?;
        }
        Ok(())
    }
}

impl fmt::Display for CriteriaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "density: {}  n = {}", self.label, self.n)?;
        let a = &self.cond_a;
        write!(f, "condition (a): {}", pass(a.passed))?;
        if let Some(w) = a.positivity_witness {
            write!(f, "  (f vanishes at r = {w:e})")?;
        }
        writeln!(f, "  lim inf f(0+) = {:e}", a.liminf_at_zero)?;
        match (&self.logcvx, &self.logcvx_error) {
            (Some(l), _) => writeln!(
                f,
                "log-concavity: {}  Phi'' -> {:e}, Phi' -> {:e}, Phi''/Phi'^2 -> {:e}",
                pass(l.passed),
                l.second_derivative.limit,
                l.first_derivative.limit,
                l.ratio.limit
            )?,
            (None, Some(e)) => writeln!(f, "log-concavity: not applicable ({e})")?,
            (None, None) => writeln!(f, "log-concavity: not run")?,
        }
        let b1 = &self.cond_b1;
        writeln!(
            f,
            "condition (b1): {}  psi = {}  lambda = {}  r in [{:e}, {:e}]",
            pass(b1.passed),
            b1.psi,
            b1.lambda,
            b1.r_range.0,
            b1.r_range.1
        )?;
        writeln!(f, "condition (b2): {}  lim inf = {:e}", pass(self.cond_b2.passed), self.cond_b2.liminf)?;
        writeln!(f, "verdict: {}", self.verdict)?;
        if let Some(c) = &self.cross_check {
            let agree = match c.agrees {
                Some(true) => "agrees",
                Some(false) => "DISAGREES",
                None => "n/a",
            };
            writeln!(f, "transport: L = {:e} ({agree})", c.lipschitz.value)?;
        }
        Ok(())
    }
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

/// Radii r with 1 − F_n(r) log-spaced over the window, increasing.
pub fn tail_window(measure: &RadialMeasure) -> Vec<f64> {
    let (hi, lo) = (WINDOW_TAILS.0.ln(), WINDOW_TAILS.1.ln());
    let (r_lo, r_hi) = measure.density().support();
    let mut rs: Vec<f64> = (0..WINDOW_POINTS)
        .map(|k| {
            let t = hi + (lo - hi) * k as f64 / (WINDOW_POINTS - 1) as f64;
            measure.radius_at_tail(t.exp())
        })
        .filter(|&r| r > r_lo && r < r_hi && r > 0.0)
        .collect();
    rs.dedup();
    rs
}

/// (b1) and (b2) for a given ψ over the tail window.
pub fn check_b(density: &RadialDensity, n: usize, psi: &Psi) -> Result<(B1Result, B2Result), CriteriaError> {
    let measure = RadialMeasure::new(density.clone(), n)?;
    let (b1, b2, _) = check_b_measure(&measure, psi);
    Ok((b1, b2))
}

pub fn check_b_measure(measure: &RadialMeasure, psi: &Psi) -> (B1Result, B2Result, Vec<RadiusDiagnostic>) {
    let rs = tail_window(measure);
    let density = measure.density();
    let n = measure.n();
    let ln_j = measure.radial_integral().ln();
    let mut diags = Vec::with_capacity(rs.len());
    for &r in &rs {
        let tail = measure.tail(r);
        let w = psi.eval(r);
        let ln_lhs = density.ln_eval(r) + w.ln() + (n - 1) as f64 * r.ln();
        let ratio = if w > 0.0 { (ln_j + tail.ln() - ln_lhs).exp() } else { f64::NAN };
        diags.push(RadiusDiagnostic { r, tail, psi: w, b1_ratio: ratio, b2_value: w * w * ln_lhs });
    }
    let r_range = (rs.first().copied().unwrap_or(f64::NAN), rs.last().copied().unwrap_or(f64::NAN));

    // λ ≤ q ≤ 1/λ holds exactly when λ ≤ min(q, 1/q)
    let mut lambda_star = if diags.is_empty() { 0.0 } else { f64::INFINITY };
    for d in &diags {
        let q = d.b1_ratio;
        let m = if q.is_finite() && q > 0.0 { q.min(1.0 / q) } else { 0.0 };
        lambda_star = lambda_star.min(m);
    }
    let steps = (1.0 / LAMBDA_RESOLUTION).round();
    let lambda = ((lambda_star * steps).floor().min(steps - 1.0)) / steps;
    let b1 = B1Result {
        passed: lambda >= LAMBDA_RESOLUTION,
        lambda: lambda.max(0.0),
        psi: psi.label().to_string(),
        r_range,
    };

    let mut running_inf = Vec::with_capacity(SUB_WINDOWS);
    let mut inf = f64::INFINITY;
    let chunk = diags.len().div_ceil(SUB_WINDOWS).max(1);
    for part in diags.chunks(chunk) {
        for d in part {
            let v = if d.b2_value.is_nan() { f64::NEG_INFINITY } else { d.b2_value };
            inf = inf.min(v);
        }
        running_inf.push(inf);
    }
    let passed = match running_inf.as_slice() {
        [.., prev, last] => {
            let stable = last.is_finite() && (last - prev).abs() <= B2_REL_CHANGE * prev.abs().max(1e-300);
            stable && *last > B2_FLOOR
        }
        _ => false,
    };
    let b2 = B2Result { passed, liminf: inf, running_inf };
    (b1, b2, diags)
}

/// Window coordinate t(r): ln r for R_f = ∞, −ln(R_f − r) otherwise.
fn to_t(b: f64, r: f64) -> f64 {
    if b.is_finite() {
        -(b - r).ln()
    } else {
        r.ln()
    }
}

fn from_t(b: f64, t: f64) -> f64 {
    if b.is_finite() {
        b - (-t).exp()
    } else {
        t.exp()
    }
}

/// (Φ′, Φ″) at r from central differences of Φ = −ln f in the window coordinate.
fn phi_derivatives(density: &RadialDensity, r: f64, h: f64) -> (f64, f64) {
    let (pt, ptt) = phi_t_derivatives(density, r, h);
    transform_derivatives(density.support().1, r, pt, ptt)
}

fn phi_t_derivatives(density: &RadialDensity, r: f64, h: f64) -> (f64, f64) {
    let b = density.support().1;
    let t = to_t(b, r);
    let phi = |t: f64| -density.ln_eval(from_t(b, t));
    let (fm, f0, fp) = (phi(t - h), phi(t), phi(t + h));
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

fn transform_derivatives(b: f64, r: f64, pt: f64, ptt: f64) -> (f64, f64) {
    if b.is_finite() {
        let u = b - r;
        (pt / u, (ptt + pt) / (u * u))
    } else {
        (pt / r, (ptt - pt) / (r * r))
    }
}

fn limit_estimate(ts: &[f64], xs: &[f64]) -> LimitEstimate {
    let m = xs.len();
    let last = xs[m - 1];
    let mid = m / 2;
    let (a, b) = (xs[mid].abs(), last.abs());
    let slope = if a > 0.0 && b > 0.0 { (b / a).ln() / (ts[m - 1] - ts[mid]) } else { 0.0 };
    let limit = if slope > SLOPE_TOL {
        f64::INFINITY
    } else if slope < -SLOPE_TOL {
        0.0
    } else {
        last
    };
    LimitEstimate { last, slope, limit }
}

/// Hypotheses of the log-concavity criterion for Φ = −ln f near R_f.
pub fn check_logcvx(density: &RadialDensity, n: usize) -> Result<LogcvxReport, CriteriaError> {
    let measure = RadialMeasure::new(density.clone(), n)?;
    check_logcvx_measure(&measure)
}

pub fn check_logcvx_measure(measure: &RadialMeasure) -> Result<LogcvxReport, CriteriaError> {
    let density = measure.density();
    let b = density.support().1;
    let rs = tail_window(measure);
    if rs.len() < 8 {
        return Err(CriteriaError::Precondition("tail window too short".into()));
    }
    let r_last = rs[rs.len() - 1];
    if !(density.eval(r_last) < 1e-3 * density.approx_max()) {
        return Err(CriteriaError::Precondition("f does not tend to 0 at R_f".into()));
    }
    let mut ts = Vec::with_capacity(rs.len());
    let (mut p1s, mut p2s, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for &r in &rs {
        let (pt, ptt) = phi_t_derivatives(density, r, FD_STEP);
        let (pt2, ptt2) = phi_t_derivatives(density, r, 0.5 * FD_STEP);
        let scale = ptt.abs().max(pt.abs());
        let disc = (ptt - ptt2).abs().max((pt - pt2).abs()) / scale;
        if !(disc <= FD_NOISE) {
            return Err(CriteriaError::NonSmooth { r, discrepancy: disc });
        }
        let (p1, p2) = transform_derivatives(b, r, pt2, ptt2);
        ts.push(to_t(b, r));
        p1s.push(p1);
        p2s.push(p2);
        ratios.push(p2 / (p1 * p1));
    }
    let second = limit_estimate(&ts, &p2s);
    let first = limit_estimate(&ts, &p1s);
    let ratio = limit_estimate(&ts, &ratios);
    let tail_half = rs.len() / 2;
    let second_ok = p2s[tail_half..].iter().all(|&v| v > 0.0) && second.limit > 0.0;
    let first_ok = p1s[tail_half..].iter().all(|&v| v > 0.0) && first.limit == f64::INFINITY;
    let ratio_ok = ratio.limit.is_finite();
    Ok(LogcvxReport {
        second_derivative_positive: second_ok,
        second_derivative: second,
        first_derivative_infinite: first_ok,
        first_derivative: first,
        ratio_bounded: ratio_ok,
        ratio,
        r_range: (rs[0], r_last),
        passed: second_ok && first_ok && ratio_ok,
    })
}

/// Conditions (a), (b1), (b2) combined into a verdict. ψ comes from the
/// log-concavity criterion when it passes, else from `user_psi`, else 1/Φ′.
pub fn prop_lip_verdict(density: &RadialDensity, n: usize, user_psi: Option<Psi>) -> Result<CriteriaReport, CriteriaError> {
    let f0 = density.f0_limsup();
    if !f0.is_finite() {
        return Err(CriteriaError::Precondition("lim sup of f at 0 is not finite".into()));
    }
    let measure = RadialMeasure::new(density.clone(), n)?;
    let cond_a = check_condition_a(density);
    let (logcvx, logcvx_error) = match check_logcvx_measure(&measure) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (psi, psi_source) = match (&logcvx, user_psi) {
        (Some(l), _) if l.passed => (Psi::reciprocal_log_derivative(density), PsiSource::Logcvx),
        (_, Some(p)) => (p, PsiSource::User),
        _ => (Psi::reciprocal_log_derivative(density), PsiSource::FiniteDifference),
    };
    let (cond_b1, cond_b2, diagnostics) = check_b_measure(&measure, &psi);
    let verdict = if cond_a.passed && cond_b1.passed && cond_b2.passed {
        Verdict::Lipschitz
    } else if !cond_a.passed || (cond_b1.passed && !cond_b2.passed) {
        Verdict::NotLipschitz
    } else {
        Verdict::Inconclusive
    };
    Ok(CriteriaReport {
        label: density.label().to_string(),
        n,
        cond_a,
        cond_b1,
        cond_b2,
        logcvx,
        logcvx_error,
        psi_source,
        verdict,
        diagnostics,
        cross_check: None,
    })
}
