//! Radial profiles f and the probability measures μ_n^f with density
//! f(|x|)/M_n^f on ℝⁿ.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::quad::{integrate, integrate_tail, newton_bracketed, QuadError, Tolerance};
use crate::specfun::{sphere_constants, DimConstants};

#[derive(Debug, Error)]
pub enum RadialError {
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("the mass integral of f(r) r^(n-1) diverges")]
    DivergentMass,
    #[error("the density has zero mass")]
    ZeroMass,
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("operation needs dimension {expected}, measure has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot read density table: {0}")]
    Io(String),
}

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    /// exp(-r²/(2c²))
    Gaussian { scale: f64 },
    /// exp(-r^p/p)
    ExpPower { p: f64 },
    Indicator { lo: f64, hi: f64 },
    /// piecewise linear through (r_i, f_i), zero outside the table
    Table { r: Vec<f64>, f: Vec<f64> },
    Function { f: ProfileFn, ln_f: Option<ProfileFn> },
}

/// A nonnegative radial profile f with support [r_f, R_f].
#[derive(Clone)]
pub struct RadialDensity {
    profile: Profile,
    label: String,
    r_lo: f64,
    r_hi: f64,
    f0_limsup: f64,
}

impl fmt::Debug for RadialDensity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("RadialDensity")
            .field("label", &self.label)
            .field("r_f", &self.r_lo)
            .field("R_f", &self.r_hi)
            .field("f0_limsup", &self.f0_limsup)
            .finish()
    }
}

fn positive_param(name: &str, v: f64) -> Result<(), RadialError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RadialError::InvalidDensity(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RadialDensity {
    fn with_profile(profile: Profile, label: String, r_lo: f64, r_hi: f64) -> Self {
        let mut d = RadialDensity { profile, label, r_lo, r_hi, f0_limsup: f64::NAN };
        d.f0_limsup = d.estimate_f0_limsup();
        d
    }

    /// The standard Gaussian profile e^{−r²/2}.
    pub fn gaussian() -> Self {
        Self::with_profile(Profile::Gaussian { scale: 1.0 }, "gaussian".into(), 0.0, f64::INFINITY)
    }

    /// e^{−r²/(2c²)}.
    pub fn scaled_gaussian(c: f64) -> Result<Self, RadialError> {
        positive_param("scale c", c)?;
        Ok(Self::with_profile(
            Profile::Gaussian { scale: c },
            format!("scaled-gaussian:c={c}"),
            0.0,
            f64::INFINITY,
        ))
    }

    /// e^{−r^p/p}.
    pub fn exp_power(p: f64) -> Result<Self, RadialError> {
        positive_param("exponent p", p)?;
        Ok(Self::with_profile(Profile::ExpPower { p }, format!("exp-power:p={p}"), 0.0, f64::INFINITY))
    }

    /// Indicator of the open interval (lo, hi).
    pub fn indicator(lo: f64, hi: f64) -> Result<Self, RadialError> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(RadialError::InvalidDensity(format!("indicator bounds ({lo}, {hi})")));
        }
        Ok(Self::with_profile(Profile::Indicator { lo, hi }, format!("indicator:{lo},{hi}"), lo, hi))
    }

    /// Piecewise-linear profile through the given nodes; zero outside them.
    pub fn tabulated(r: Vec<f64>, f: Vec<f64>) -> Result<Self, RadialError> {
        if r.len() != f.len() || r.len() < 2 {
            return Err(RadialError::InvalidDensity("table needs at least two (r, f) rows".into()));
        }
        if r[0] < 0.0 || r.iter().any(|v| !v.is_finite()) {
            return Err(RadialError::InvalidDensity("radii must be finite and nonnegative".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RadialError::InvalidDensity("radii must be strictly increasing".into()));
        }
        if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(RadialError::InvalidDensity("f values must be finite and nonnegative".into()));
        }
        let first = f.iter().position(|&v| v > 1e-300);
        let last = f.iter().rposition(|&v| v > 1e-300);
        let (Some(i0), Some(i1)) = (first, last) else {
            return Err(RadialError::InvalidDensity("table is identically zero".into()));
        };
        // the interpolant is positive from the node preceding the first positive value
        let r_lo = r[i0.saturating_sub(1)];
        let r_hi = r[(i1 + 1).min(r.len() - 1)];
        let label = format!("table[{} rows]", r.len());
        Ok(Self::with_profile(Profile::Table { r, f }, label, r_lo, r_hi))
    }

    /// Reads a CSV with header `r,f`.
    pub fn from_csv(path: &Path) -> Result<Self, RadialError> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| RadialError::Io(e.to_string()))?;
        let headers = rd.headers().map_err(|e| RadialError::Io(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "f" {
            return Err(RadialError::InvalidDensity(format!(
                "expected header \"r,f\", found \"{}\"",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut rs, mut fs) = (Vec::new(), Vec::new());
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| RadialError::Io(e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    RadialError::InvalidDensity(format!("row {}: cannot parse \"{s}\"", line + 2))
                })
            };
            rs.push(parse(&rec[0])?);
            fs.push(parse(&rec[1])?);
        }
        Self::tabulated(rs, fs)
    }

    /// Arbitrary profile with declared support.
    pub fn from_fn<F>(label: impl Into<String>, f: F, r_f: f64, big_r_f: f64) -> Result<Self, RadialError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(r_f >= 0.0 && big_r_f > r_f) || !r_f.is_finite() {
            return Err(RadialError::InvalidDensity(format!("support [{r_f}, {big_r_f}]")));
        }
        Ok(Self::with_profile(Profile::Function { f: Arc::new(f), ln_f: None }, label.into(), r_f, big_r_f))
    }

    /// Arbitrary profile with a separate closed form for ln f, used where f underflows.
    pub fn from_fn_with_ln<F, G>(
        label: impl Into<String>,
        f: F,
        ln_f: G,
        r_f: f64,
        big_r_f: f64,
    ) -> Result<Self, RadialError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut d = Self::from_fn(label, f, r_f, big_r_f)?;
        if let Profile::Function { ln_f: slot, .. } = &mut d.profile {
            *slot = Some(Arc::new(ln_f));
        }
        Ok(d)
    }

    /// Overrides the estimated lim sup of f at 0⁺.
    pub fn with_f0_limsup(mut self, v: f64) -> Self {
        self.f0_limsup = v;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// (r_f, R_f).
    pub fn support(&self) -> (f64, f64) {
        (self.r_lo, self.r_hi)
    }

    pub fn f0_limsup(&self) -> f64 {
        self.f0_limsup
    }

    /// Table nodes, if the profile is tabulated.
    pub fn table_nodes(&self) -> Option<(&[f64], &[f64])> {
        match &self.profile {
            Profile::Table { r, f } => Some((r, f)),
            _ => None,
        }
    }

    /// Whether the profile carries a closed form (smooth built-in).
    pub fn is_closed_form(&self) -> bool {
        matches!(self.profile, Profile::Gaussian { .. } | Profile::ExpPower { .. })
    }

    /// f(r); zero outside the open support.
    pub fn eval(&self, r: f64) -> f64 {
        if !(r > self.r_lo && r < self.r_hi) {
            return match &self.profile {
                // keep the node values of tables at their own endpoints
                Profile::Table { .. } if r == self.r_lo || r == self.r_hi => self.raw(r),
                _ => 0.0,
            };
        }
        self.raw(r)
    }

    /// ln f(r), exact for the closed-form built-ins even where f underflows.
    pub fn ln_eval(&self, r: f64) -> f64 {
        if !(r > self.r_lo && r < self.r_hi) {
            return self.eval(r).ln();
        }
        match &self.profile {
            Profile::Gaussian { scale } => -0.5 * (r / scale) * (r / scale),
            Profile::ExpPower { p } => -r.powf(*p) / p,
            Profile::Function { ln_f: Some(g), .. } => g(r),
            _ => self.raw(r).ln(),
        }
    }

    fn raw(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::Gaussian { scale } => (-0.5 * (r / scale) * (r / scale)).exp(),
            Profile::ExpPower { p } => (-r.powf(*p) / p).exp(),
            Profile::Indicator { lo, hi } => {
                if r > *lo && r < *hi {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Table { r: rs, f } => {
                if r < rs[0] || r > rs[rs.len() - 1] {
                    return 0.0;
                }
                let i = rs.partition_point(|&x| x <= r);
                if i == 0 {
                    return f[0];
                }
                if i >= rs.len() {
                    return f[rs.len() - 1];
                }
                let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                f[i - 1] + t * (f[i] - f[i - 1])
            }
            Profile::Function { f, .. } => f(r).max(0.0),
        }
    }

    fn estimate_f0_limsup(&self) -> f64 {
        (4..=40).map(|k| self.eval((-(k as f64)).exp2())).fold(0.0, f64::max)
    }

    /// Maximum of f over a log-spaced scan of the support.
    pub fn approx_max(&self) -> f64 {
        let hi = if self.r_hi.is_finite() { self.r_hi } else { 1e6 };
        let lo = self.r_lo.max(1e-12);
        let m = 4096;
        (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                let r = if lo > 0.0 { lo * (hi / lo).powf(t) } else { hi * t };
                self.eval(r)
            })
            .fold(self.f0_limsup.max(0.0), f64::max)
    }

    /// Maximal open intervals inside (r_f, R_f) on which f vanishes, found on
    /// the table nodes or on a dense scan.
    pub fn support_gaps(&self) -> Vec<(f64, f64)> {
        let mut gaps = Vec::new();
        match &self.profile {
            Profile::Table { r, f } => {
                let first = f.iter().position(|&v| v > 1e-300).unwrap_or(0);
                let last = f.iter().rposition(|&v| v > 1e-300).unwrap_or(0);
                let mut i = first;
                while i < last {
                    if f[i] <= 1e-300 && f[i + 1] <= 1e-300 {
                        let start = r[i];
                        while i < last && f[i + 1] <= 1e-300 {
                            i += 1;
                        }
                        gaps.push((start, r[i]));
                    }
                    i += 1;
                }
            }
            Profile::Gaussian { .. } | Profile::ExpPower { .. } | Profile::Indicator { .. } => {}
            Profile::Function { .. } => {
                let pts = self.scan_grid(16_384);
                let mut last_pos = None;
                let mut zero_start: Option<f64> = None;
                for &r in &pts {
                    if self.eval(r) > 0.0 {
                        if let (Some(z), Some(_)) = (zero_start, last_pos) {
                            gaps.push((z, r));
                        }
                        zero_start = None;
                        last_pos = Some(r);
                    } else if zero_start.is_none() {
                        zero_start = Some(r);
                    }
                }
            }
        }
        gaps
    }

    /// Geometric scan points inside (r_f, R_f), dense near both ends.
    pub(crate) fn scan_grid(&self, m: usize) -> Vec<f64> {
        let (a, b) = (self.r_lo, self.r_hi);
        let mut pts = Vec::with_capacity(2 * m + 2);
        if b.is_finite() {
            let mid = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for i in 0..m {
                let t = 1e-12f64.powf(i as f64 / m as f64);
                pts.push(a + h * t);
                pts.push(b - h * t);
            }
            pts.push(mid);
        } else {
            let lo = 1e-12f64;
            let hi = (a + 1.0) * 1e4;
            for i in 0..=2 * m {
                let t = i as f64 / (2 * m) as f64;
                pts.push(a + lo * (hi / lo).powf(t));
            }
        }
        pts.retain(|&r| r > a && r < b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Outcome of the check of condition (a): positivity on (0, R_f) and a
/// positive lim inf at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAReport {
    pub positive_on_support: bool,
    pub positivity_witness: Option<f64>,
    pub liminf_at_zero: f64,
    pub liminf_positive: bool,
    pub passed: bool,
}

pub fn check_condition_a(density: &RadialDensity) -> ConditionAReport {
    let (r_lo, r_hi) = density.support();
    let witness = if r_lo > 0.0 {
        Some(r_lo)
    } else {
        let pts = density.scan_grid(8192);
        // trailing zeros toward R_f are underflow, a zero before a positive value is a hole
        match pts.iter().rposition(|&r| density.eval(r) > 0.0) {
            Some(lp) => pts[..lp].iter().copied().find(|&r| density.eval(r) <= 0.0),
            None => pts.first().copied().or(Some(r_hi)),
        }
    };
    // lim inf at 0⁺ from the geometric grid 2^{-k}; a persistent power-law decay means 0
    let vals: Vec<f64> = (4..=40).map(|k| density.eval((-(k as f64)).exp2())).collect();
    let tail_min = vals[26..].iter().copied().fold(f64::INFINITY, f64::min);
    let f30 = density.eval((-30f64).exp2());
    let f40 = density.eval((-40f64).exp2());
    let slope = if f30 > 0.0 && f40 > 0.0 { (f30 / f40).ln() / (10.0 * std::f64::consts::LN_2) } else { f64::INFINITY };
    let liminf = if tail_min > 0.0 && slope <= 1e-3 { tail_min } else { 0.0 };
    let liminf_positive = liminf > 0.0;
    let positive = witness.is_none();
    ConditionAReport {
        positive_on_support: positive,
        positivity_witness: witness,
        liminf_at_zero: liminf,
        liminf_positive,
        passed: positive && liminf_positive,
    }
}

const NODES_PER_OCTAVE: f64 = 8.0;
const PANEL_TOL: Tolerance = Tolerance::new(0.0, 1e-13);

/// μ_n^f together with a two-sided cumulative table of ∫ f(s) s^{n−1} ds, so
/// that both F_n and 1 − F_n keep full relative accuracy in their tails.
#[derive(Clone)]
pub struct RadialMeasure {
    density: RadialDensity,
    n: usize,
    consts: DimConstants,
    integral: f64,
    nodes: Vec<f64>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl fmt::Debug for RadialMeasure {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("RadialMeasure")
            .field("density", &self.density)
            .field("n", &self.n)
            .field("mass", &self.mass())
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl RadialMeasure {
    pub fn new(density: RadialDensity, n: usize) -> Result<Self, RadialError> {
        let consts = sphere_constants(n)
            .map_err(|_| RadialError::InvalidDensity("dimension must be at least 1".into()))?;
        let (a, b) = density.support();
        let g = |s: f64| radial_integrand(&density, n, s);

        let mut stalled = 0.0;
        let mut panel = |lo: f64, hi: f64| -> Result<f64, RadialError> {
            let (v, e) = panel_integral(g, lo, hi)?;
            stalled += e;
            Ok(v)
        };
        let mut nodes = Vec::new();
        if b.is_finite() {
            let half = 0.5 * (b - a);
            let kmax = (NODES_PER_OCTAVE * 50.0) as i32;
            for k in (0..=kmax).rev() {
                nodes.push(a + half * (-(k as f64) / NODES_PER_OCTAVE).exp2());
            }
            for k in 1..=kmax {
                nodes.push(b - half * (-(k as f64) / NODES_PER_OCTAVE).exp2());
            }
        } else {
            // geometric in (r - r_f) from 2^-50 until the remaining tail is negligible
            let kmin = -(NODES_PER_OCTAVE * 50.0) as i32;
            let mut k = kmin;
            let mut running = 0.0;
            let mut prev = a;
            loop {
                let x = a + (k as f64 / NODES_PER_OCTAVE).exp2();
                if !x.is_finite() || x > 1e300 {
                    return Err(RadialError::DivergentMass);
                }
                if k > kmin {
                    running += panel(prev, x)?;
                }
                nodes.push(x);
                prev = x;
                if k >= 0 && running > 0.0 && g(x) * (x - a) <= 1e-18 * running {
                    break;
                }
                k += 1;
            }
        }
        if let Some((tr, _)) = density.table_nodes() {
            nodes.extend(tr.iter().copied().filter(|&r| r > a && r < b));
        }
        nodes.retain(|&r| r > a && r < b);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        if nodes.is_empty() {
            return Err(RadialError::InvalidDensity("empty support".into()));
        }

        let m = nodes.len();
        let mut panels = Vec::with_capacity(m.saturating_sub(1));
        for w in nodes.windows(2) {
            panels.push(panel(w[0], w[1])?);
        }
        let head = panel(a, nodes[0])?;
        let tail = if b.is_finite() {
            panel(nodes[m - 1], b)?
        } else {
            let x = nodes[m - 1];
            match integrate_tail(g, x, (x - a).max(1.0), Tolerance::relative(1e-13)) {
                Ok(q) => q.value,
                Err(QuadError::Divergent { .. } | QuadError::NonFinite(_)) => {
                    return Err(RadialError::DivergentMass)
                }
                Err(e) => return Err(e.into()),
            }
        };
        let mut below = vec![0.0; m];
        below[0] = head;
        for i in 1..m {
            below[i] = below[i - 1] + panels[i - 1];
        }
        let mut above = vec![0.0; m];
        above[m - 1] = tail;
        for i in (0..m - 1).rev() {
            above[i] = above[i + 1] + panels[i];
        }
        let integral = below[m - 1] + tail;
        if !integral.is_finite() {
            return Err(RadialError::DivergentMass);
        }
        if !(integral > 0.0) {
            return Err(RadialError::ZeroMass);
        }
        if stalled > 1e-10 * integral {
            return Err(QuadError::NoConvergence { estimate: integral, error: stalled }.into());
        }
        Ok(RadialMeasure { density, n, consts, integral, nodes, below, above })
    }

    pub fn density(&self) -> &RadialDensity {
        &self.density
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constants(&self) -> DimConstants {
        self.consts
    }

    /// ∫ f(r) r^{n−1} dr over the support.
    pub fn radial_integral(&self) -> f64 {
        self.integral
    }

    /// M_n^f = A_n ∫ f(r) r^{n−1} dr.
    pub fn mass(&self) -> f64 {
        self.consts.area * self.integral
    }

    /// Radial density of |X| under μ_n^f: A_n f(r) r^{n−1}/M_n^f.
    pub fn radial_pdf(&self, r: f64) -> f64 {
        self.g(r) / self.integral
    }

    fn g(&self, s: f64) -> f64 {
        radial_integrand(&self.density, self.n, s)
    }

    fn int_g(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        match integrate(|s| self.g(s), a, b, PANEL_TOL) {
            Ok(q) => q.value,
            Err(QuadError::NoConvergence { estimate, .. }) => estimate,
            Err(_) => f64::NAN,
        }
    }

    /// Unnormalized mass below r and above r, each accurate in its own tail.
    fn split(&self, r: f64) -> (f64, f64) {
        let (a, b) = self.density.support();
        if r <= a {
            return (0.0, self.integral);
        }
        if r >= b {
            return (self.integral, 0.0);
        }
        let m = self.nodes.len();
        let i = self.nodes.partition_point(|&x| x <= r);
        if i == 0 {
            let lo = self.int_g(a, r);
            return (lo, self.integral - lo);
        }
        if i == m {
            let hi = if b.is_finite() {
                self.int_g(r, b)
            } else {
                let last = self.nodes[m - 1];
                (self.above[m - 1] - self.int_g(last, r)).max(0.0)
            };
            if hi < 1e-3 * self.above[m - 1] && !b.is_finite() {
                let direct = integrate_tail(|s| self.g(s), r, (r - a).max(1.0), Tolerance::relative(1e-13))
                    .map(|q| q.value)
                    .unwrap_or(hi);
                return (self.integral - direct, direct);
            }
            return (self.integral - hi, hi);
        }
        let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
        if self.below[i - 1] <= self.above[i] {
            let lo = self.below[i - 1] + self.int_g(x0, r);
            (lo, self.integral - lo)
        } else {
            let hi = self.above[i] + self.int_g(r, x1);
            (self.integral - hi, hi)
        }
    }

    /// F_n(r) = μ_n^f[B_r(0)].
    pub fn cdf(&self, r: f64) -> f64 {
        (self.split(r).0 / self.integral).clamp(0.0, 1.0)
    }

    /// 1 − F_n(r), accurate when small.
    pub fn tail(&self, r: f64) -> f64 {
        (self.split(r).1 / self.integral).clamp(0.0, 1.0)
    }

    /// Both F_n(r) and 1 − F_n(r) from one evaluation.
    pub fn cdf_pair(&self, r: f64) -> (f64, f64) {
        let (lo, hi) = self.split(r);
        ((lo / self.integral).clamp(0.0, 1.0), (hi / self.integral).clamp(0.0, 1.0))
    }

    /// Radius r with F_n(r) = p.
    pub fn radius_at_cdf(&self, p: f64) -> f64 {
        let (a, b) = self.density.support();
        if p <= 0.0 {
            return a;
        }
        if p >= 1.0 {
            return b;
        }
        if p > 0.5 {
            return self.radius_at_tail(1.0 - p);
        }
        let c = p * self.integral;
        let i = self.below.partition_point(|&v| v <= c);
        let (lo, hi, base) = if i == 0 {
            (a, self.nodes[0], 0.0)
        } else if i < self.nodes.len() {
            (self.nodes[i - 1], self.nodes[i], self.below[i - 1])
        } else {
            return self.radius_at_tail(1.0 - p);
        };
        self.solve(lo, hi, |r| (base + self.int_g(lo, r) - c, self.g(r)))
    }

    /// Radius r with 1 − F_n(r) = q.
    pub fn radius_at_tail(&self, q: f64) -> f64 {
        let (a, b) = self.density.support();
        if q <= 0.0 {
            return b;
        }
        if q >= 1.0 {
            return a;
        }
        if q > 0.5 {
            return self.radius_at_cdf(1.0 - q);
        }
        let c = q * self.integral;
        let m = self.nodes.len();
        // above[] is decreasing
        let i = self.above.partition_point(|&v| v > c);
        if i == 0 {
            let x0 = self.nodes[0];
            return self.solve(a, x0, |r| (self.above[0] + self.int_g(r, x0) - c, -self.g(r)));
        }
        if i < m {
            let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
            return self.solve(x0, x1, |r| (self.above[i] + self.int_g(r, x1) - c, -self.g(r)));
        }
        let last = self.nodes[m - 1];
        let mut hi = if b.is_finite() { b } else { 2.0 * last - a };
        if !b.is_finite() {
            while self.split(hi).1 > c && hi < 1e300 {
                hi = 2.0 * hi - a;
            }
        }
        self.solve(last, hi, |r| (self.split(r).1 - c, -self.g(r)))
    }

    fn solve<H: FnMut(f64) -> (f64, f64)>(&self, lo: f64, hi: f64, h: H) -> f64 {
        match newton_bracketed(h, lo, hi, 1e-15) {
            Ok(r) => r,
            // bracket lost to rounding at a panel edge
            Err(_) => 0.5 * (lo + hi),
        }
    }

    /// F(α) = μ_1^f[(−∞, α]] for n = 1.
    pub fn cdf_1d(&self, alpha: f64) -> Result<f64, RadialError> {
        self.require_1d()?;
        let half_tail = 0.5 * self.tail(alpha.abs());
        Ok(if alpha >= 0.0 { 1.0 - half_tail } else { half_tail })
    }

    /// 1 − F(α) for n = 1, accurate in the right tail.
    pub fn sf_1d(&self, alpha: f64) -> Result<f64, RadialError> {
        self.cdf_1d(-alpha)
    }

    /// μ_1^f[[a, b]] for a ≤ b, computed from whichever tail keeps precision.
    pub fn interval_mass_1d(&self, a: f64, b: f64) -> Result<f64, RadialError> {
        self.require_1d()?;
        if b <= a {
            return Ok(0.0);
        }
        let half_tail = |x: f64| 0.5 * self.tail(x);
        let m = if a >= 0.0 {
            half_tail(a) - half_tail(b)
        } else if b <= 0.0 {
            half_tail(-b) - half_tail(-a)
        } else {
            1.0 - half_tail(-a) - half_tail(b)
        };
        Ok(m.max(0.0))
    }

    fn require_1d(&self) -> Result<(), RadialError> {
        if self.n != 1 {
            return Err(RadialError::DimensionMismatch { expected: 1, found: self.n });
        }
        Ok(())
    }

    /// Table nodes used internally (for diagnostics).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// f(s) s^{n−1}, falling back to logs where the product under- or overflows.
fn radial_integrand(density: &RadialDensity, n: usize, s: f64) -> f64 {
    let f = density.eval(s);
    if n == 1 {
        return f;
    }
    if f == 0.0 {
        if s > 1.0 && s < density.support().1 {
            return (density.ln_eval(s) + (n - 1) as f64 * s.ln()).exp();
        }
        return 0.0;
    }
    let v = f * s.powi(n as i32 - 1);
    if v.is_finite() && f >= 1e-280 {
        return v;
    }
    (density.ln_eval(s) + (n - 1) as f64 * s.ln()).exp()
}

/// Panel integral and its unresolved error. Panels whose error stalls at the
/// integrand's own rounding level (steep profiles at a compact edge) are kept
/// and their error is charged against the total mass by the caller.
fn panel_integral<G: FnMut(f64) -> f64>(g: G, a: f64, b: f64) -> Result<(f64, f64), RadialError> {
    match integrate(g, a, b, PANEL_TOL) {
        Ok(q) => Ok((q.value, 0.0)),
        Err(QuadError::NoConvergence { estimate, error }) => Ok((estimate, error)),
        Err(QuadError::NonFinite(_)) => Err(RadialError::DivergentMass),
        Err(e) => Err(e.into()),
    }
}

/// Standalone M_n^f.
pub fn normalizing_mass(density: &RadialDensity, n: usize) -> Result<f64, RadialError> {
    Ok(RadialMeasure::new(density.clone(), n)?.mass())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_mass() {
        for n in 1..=5 {
            let m = normalizing_mass(&RadialDensity::gaussian(), n).unwrap();
            let expect = (2.0 * PI).powf(n as f64 / 2.0);
            assert!((m / expect - 1.0).abs() < 1e-12, "n={n} {m} {expect}");
        }
    }

    #[test]
    fn indicator_mass() {
        let m = normalizing_mass(&RadialDensity::indicator(0.0, 1.0).unwrap(), 1).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        assert!(RadialDensity::exp_power(0.0).is_err());
        assert!(RadialDensity::scaled_gaussian(-1.0).is_err());
        assert!(RadialDensity::indicator(2.0, 1.0).is_err());
        assert!(RadialDensity::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RadialDensity::tabulated(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(RadialDensity::tabulated(vec![0.0, 1.0], vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn divergent_mass() {
        let d = RadialDensity::from_fn("cauchy-ish", |r: f64| 1.0 / (1.0 + r), 0.0, f64::INFINITY).unwrap();
        assert!(matches!(RadialMeasure::new(d, 1), Err(RadialError::DivergentMass)));
    }

    #[test]
    fn table_support_and_gaps() {
        let d = RadialDensity::tabulated(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        assert_eq!(d.support(), (0.0, 5.0));
        assert_eq!(d.support_gaps(), vec![(2.0, 3.0)]);
        let d = RadialDensity::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(d.support_gaps().is_empty());
    }

    #[test]
    fn tail_and_cdf_agree() {
        let m = RadialMeasure::new(RadialDensity::exp_power(1.0).unwrap(), 2).unwrap();
        for &r in &[0.01, 0.5, 1.0, 3.0, 10.0, 30.0] {
            let (f, t) = m.cdf_pair(r);
            assert!((f + t - 1.0).abs() < 1e-13);
            // closed form for e^{-r}, n = 2: tail = (1 + r) e^{-r}
            assert!((t / ((1.0 + r) * (-r).exp()) - 1.0).abs() < 1e-11, "r={r} t={t}");
        }
    }

    #[test]
    fn quantiles_invert_cdf() {
        let m = RadialMeasure::new(RadialDensity::gaussian(), 3).unwrap();
        for &p in &[1e-10, 1e-4, 0.3, 0.5, 0.9] {
            let r = m.radius_at_cdf(p);
            assert!((m.cdf(r) / p - 1.0).abs() < 1e-10, "p={p}");
        }
        for &q in &[1e-10, 1e-6, 0.2] {
            let r = m.radius_at_tail(q);
            assert!((m.tail(r) / q - 1.0).abs() < 1e-10, "q={q}");
        }
    }
}
