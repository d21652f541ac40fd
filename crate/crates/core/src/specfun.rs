//! Special functions: log-gamma, regularized incomplete gamma and its inverse,
//! beta, the standard normal distribution, and unit sphere/ball constants.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

use crate::quad::{integrate_tail, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("iteration failed to converge in {0}")]
    NoConvergence(&'static str),
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;
const SQRT_2PI: f64 = 2.506_628_274_631_000_502_415_765_284_811;
const LN_PI: f64 = 1.144_729_885_849_400_174_143_427_351_353;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    if x >= 30.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_tail(x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

fn stirling_tail(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

/// ln(Γ(a)/Γ(b)) without the cancellation of subtracting two large log-gammas.
pub fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a.min(b) >= 30.0 {
        let d = a - b;
        (a - 0.5) * (d / b).ln_1p() + d * b.ln() - d + stirling_tail(a) - stirling_tail(b)
    } else {
        ln_gamma(a) - ln_gamma(b)
    }
}

/// Γ(n/2), by exact half-integer recursion for moderate n.
pub fn gamma_half(n: usize) -> f64 {
    if n == 0 || n > 340 {
        return ln_gamma(n as f64 / 2.0).exp();
    }
    let (mut k, mut g) = if n % 2 == 0 { (2, 1.0) } else { (1, PI.sqrt()) };
    while k < n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

/// Euler beta function B(a, b).
pub fn beta(a: f64, b: f64) -> Result<f64, SpecialError> {
    if !(a > 0.0 && b > 0.0) {
        return Err(SpecialError::Domain(format!("beta({a}, {b})")));
    }
    Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

struct IncGamma {
    p: f64,
    q: f64,
    ln_p: f64,
    ln_q: f64,
}

fn check_gamma_args(a: f64, x: f64) -> Result<(), SpecialError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(SpecialError::Domain(format!("incomplete gamma shape {a}")));
    }
    if !(x >= 0.0) {
        return Err(SpecialError::Domain(format!("incomplete gamma argument {x}")));
    }
    Ok(())
}

fn inc_gamma(a: f64, x: f64) -> Result<IncGamma, SpecialError> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(IncGamma { p: 0.0, q: 1.0, ln_p: f64::NEG_INFINITY, ln_q: 0.0 });
    }
    if x == f64::INFINITY {
        return Ok(IncGamma { p: 1.0, q: 0.0, ln_p: 0.0, ln_q: f64::NEG_INFINITY });
    }
    let ln_pre = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecialError::NoConvergence("incomplete gamma series"));
        }
        let ln_p = ln_pre + sum.ln();
        let p = ln_p.exp();
        let q = 1.0 - p;
        Ok(IncGamma { p, q, ln_p, ln_q: (-p).ln_1p() })
    } else {
        // modified Lentz evaluation of the continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut converged = false;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecialError::NoConvergence("incomplete gamma continued fraction"));
        }
        let ln_q = ln_pre + h.ln();
        let q = ln_q.exp();
        let p = 1.0 - q;
        Ok(IncGamma { p, q, ln_p: (-q).ln_1p(), ln_q })
    }
}

/// (P(a, x), Q(a, x)), each accurate where it is small.
pub fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64), SpecialError> {
    let g = inc_gamma(a, x)?;
    Ok((g.p, g.q))
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(inc_gamma(a, x)?.p)
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x), accurate in the tail.
pub fn gamma_q(a: f64, x: f64) -> Result<f64, SpecialError> {
    Ok(inc_gamma(a, x)?.q)
}

fn ln_pdf_gamma(a: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() - x - ln_gamma(a)
}

/// Starting point for the inversion; takes both P and Q = 1 − P so that
/// neither is rebuilt by cancellation.
fn initial_guess(a: f64, p: f64, q: f64) -> f64 {
    if a > 1.0 {
        let pp = p.min(q);
        let t = (-2.0 * pp.max(1e-300).ln()).sqrt();
        let mut z = (2.307_53 + t * 0.270_61) / (1.0 + t * (0.992_29 + t * 0.044_81)) - t;
        if p < 0.5 {
            z = -z;
        }
        (a * (1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - (q / (1.0 - t)).ln()
        }
    }
}

/// Solves ln P(a, e^y) = target (lower) or ln Q(a, e^y) = target (upper) for y.
fn invert_log(a: f64, target: f64, upper: bool, x0: f64) -> Result<f64, SpecialError> {
    let h = |y: f64| -> Result<(f64, f64), SpecialError> {
        let x = y.exp();
        let g = inc_gamma(a, x)?;
        let ln_pdf = ln_pdf_gamma(a, x) + y;
        if upper {
            Ok((g.ln_q - target, -(ln_pdf - g.ln_q).exp()))
        } else {
            Ok((g.ln_p - target, (ln_pdf - g.ln_p).exp()))
        }
    };
    // h is increasing in y for the lower branch and decreasing for the upper one
    let sign = if upper { -1.0 } else { 1.0 };
    let y0 = x0.max(1e-300).ln();
    let mut step = 1.0;
    let (mut lo, mut hi) = (y0, y0);
    while sign * h(lo)?.0 > 0.0 {
        lo -= step;
        step *= 2.0;
        if lo < -1500.0 {
            return Ok(0.0);
        }
    }
    step = 1.0;
    while sign * h(hi)?.0 < 0.0 {
        hi += step;
        step *= 2.0;
        if hi > 710.0 {
            return Ok(f64::INFINITY);
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..300 {
        let (v, dv) = h(y)?;
        if v == 0.0 {
            return Ok(y.exp());
        }
        if sign * v < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let cand = y - v / dv;
        let next = if dv != 0.0 && cand.is_finite() && cand > lo && cand < hi {
            cand
        } else {
            0.5 * (lo + hi)
        };
        if (next - y).abs() <= 4.0 * f64::EPSILON * (1.0 + y.abs()) || hi - lo <= 1e-15 {
            return Ok(next.exp());
        }
        y = next;
    }
    Err(SpecialError::NoConvergence("inverse incomplete gamma"))
}

/// x such that P(a, x) = p.
pub fn gamma_p_inv(a: f64, p: f64) -> Result<f64, SpecialError> {
    check_gamma_args(a, 0.0)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(SpecialError::Domain(format!("probability {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let x0 = initial_guess(a, p, 1.0 - p);
    if p <= 0.5 {
        invert_log(a, p.ln(), false, x0)
    } else {
        invert_log(a, (-p).ln_1p(), true, x0)
    }
}

/// x such that Q(a, x) = q; keeps full relative accuracy for tiny q.
pub fn gamma_q_inv(a: f64, q: f64) -> Result<f64, SpecialError> {
    check_gamma_args(a, 0.0)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(SpecialError::Domain(format!("probability {q}")));
    }
    if q == 0.0 {
        return Ok(f64::INFINITY);
    }
    if q == 1.0 {
        return Ok(0.0);
    }
    let x0 = initial_guess(a, 1.0 - q, q);
    if q <= 0.5 {
        invert_log(a, q.ln(), true, x0)
    } else {
        invert_log(a, (-q).ln_1p(), false, x0)
    }
}

/// Standard normal density.
pub fn gauss_pdf(r: f64) -> f64 {
    (-0.5 * r * r).exp() / SQRT_2PI
}

/// Standard normal CDF G(r).
pub fn gauss_cdf(r: f64) -> f64 {
    if r.is_nan() {
        return f64::NAN;
    }
    if r == f64::INFINITY {
        return 1.0;
    }
    if r == f64::NEG_INFINITY {
        return 0.0;
    }
    let half_q = 0.5 * inc_gamma(0.5, 0.5 * r * r).map(|g| g.q).unwrap_or(0.0);
    if r < 0.0 {
        half_q
    } else {
        1.0 - half_q
    }
}

/// 1 − G(r), accurate for large r.
pub fn gauss_sf(r: f64) -> f64 {
    gauss_cdf(-r)
}

/// G⁻¹(a) for a ∈ (0, 1).
pub fn gauss_quantile(a: f64) -> Result<f64, SpecialError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(SpecialError::Domain(format!("normal quantile of {a}")));
    }
    if a > 0.5 {
        // 1 − a is exact here
        return Ok(-lower_quantile(1.0 - a));
    }
    Ok(lower_quantile(a))
}

/// G⁻¹(1 − q) computed from q directly.
pub fn gauss_quantile_upper(q: f64) -> Result<f64, SpecialError> {
    gauss_quantile(q).map(|x| -x)
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let mut x = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let e = gauss_cdf(x) - p;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Surface measure A_n and volume V_n of the unit ball in ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimConstants {
    pub n: usize,
    pub area: f64,
    pub volume: f64,
}

pub fn sphere_constants(n: usize) -> Result<DimConstants, SpecialError> {
    if n == 0 {
        return Err(SpecialError::Domain("dimension must be at least 1".into()));
    }
    let area = if n <= 340 {
        2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
    } else {
        ln_sphere_area(n as f64).exp()
    };
    Ok(DimConstants { n, area, volume: area / n as f64 })
}

/// ln A_n for real n > 0 (no overflow for large dimensions).
pub fn ln_sphere_area(n: f64) -> f64 {
    LN_2 + 0.5 * n * LN_PI - ln_gamma(0.5 * n)
}

/// Whether λ e^{−r²/2} r^{n−2} ≤ ∫_r^∞ e^{−s²/2} s^{n−1} ds ≤ λ⁻¹ e^{−r²/2} r^{n−2}.
pub fn gaussian_tail_check(r: f64, n: usize, lambda: f64) -> Result<bool, SpecialError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(SpecialError::Domain(format!("radius {r}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(SpecialError::Domain(format!("lambda {lambda}")));
    }
    if n == 0 {
        return Err(SpecialError::Domain("dimension must be at least 1".into()));
    }
    // factor e^{-r²/2} out: ∫_0^∞ e^{-rt - t²/2} (r + t)^{n-1} dt
    let m = (n - 1) as i32;
    let scaled = integrate_tail(
        |t: f64| (-r * t - 0.5 * t * t).exp() * (r + t).powi(m),
        0.0,
        1.0 / (1.0 + r),
        Tolerance::relative(1e-12),
    )
    .map_err(|_| SpecialError::NoConvergence("gaussian tail integral"))?
    .value;
    let reference = r.powi(n as i32 - 2);
    Ok(lambda * reference <= scaled && scaled <= reference / lambda)
}
