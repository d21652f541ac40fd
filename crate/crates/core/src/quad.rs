//! Numeric kernel: adaptive Gauss-Kronrod quadrature, semi-infinite integration
//! by geometric shells, safeguarded Newton root finding and Brent maximization.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    NoConvergence { estimate: f64, error: f64 },
    #[error("integral diverges (partial sum {partial:e} at t = {at:e})")]
    Divergent { partial: f64, at: f64 },
    #[error("integrand returned a non-finite value at t = {0:e}")]
    NonFinite(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("root not bracketed: f({lo:e}) = {flo:e}, f({hi:e}) = {fhi:e}")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("root search exhausted {0} iterations")]
    MaxIterations(usize),
}

/// Absolute and relative error targets; a result is accepted when
/// `error <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub const fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_638,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One 21-point Kronrod panel with the QUADPACK error heuristic.
/// Returns (value, error estimate).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let habs = half.abs();
    let value = resk * half;
    resabs *= habs;
    resasc *= habs;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_PANELS: usize = 4000;
const STALL_SPLITS: usize = 50;
const STALL_WINDOWS: usize = 4;

/// Globally adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Quadrature, QuadError> {
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evals: 0 });
    }
    let (value, error) = gk21(&mut f, a, b);
    let mut evals = 21;
    if !value.is_finite() {
        return Err(QuadError::NonFinite(0.5 * (a + b)));
    }
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    // rounding-limited integrands stop improving; give up after a few
    // windows of bisections without the error halving
    let mut checkpoint = total_err;
    let mut stalls = 0;
    let mut splits = 0usize;
    while total_err > tol.target(total) {
        if heap.len() >= MAX_PANELS || stalls >= STALL_WINDOWS {
            return Err(QuadError::NoConvergence { estimate: total, error: total_err });
        }
        splits += 1;
        if splits % STALL_SPLITS == 0 {
            stalls = if total_err > 0.5 * checkpoint { stalls + 1 } else { 0 };
            checkpoint = checkpoint.min(total_err);
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // panel can no longer be split in floating point
            heap.push(worst);
            return Err(QuadError::NoConvergence { estimate: total, error: total_err });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evals += 42;
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(QuadError::NonFinite(mid));
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation from the running totals
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature { value, error, evals })
}

const MAX_SHELLS: usize = 1100;

/// Integral of `f` over `[a, ∞)` by summing adaptive integrals over shells
/// `[a + w(2^k - 1), a + w(2^{k+1} - 1)]`. Divergence is reported when the
/// shell sums stop shrinking before the abscissa overflows.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    width: f64,
    tol: Tolerance,
) -> Result<Quadrature, QuadError> {
    let w = if width > 0.0 && width.is_finite() { width } else { 1.0 };
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    let mut lo = a;
    let mut prev = f64::INFINITY;
    let mut quiet = 0;
    for k in 0..MAX_SHELLS {
        let hi = a + w * ((k + 1) as f64).exp2() - w;
        if !hi.is_finite() {
            break;
        }
        let shell_tol = Tolerance::new(tol.abs * 0.5f64.powi(k as i32 + 1), tol.rel);
        let q = integrate(&mut f, lo, hi, shell_tol)?;
        evals += q.evals;
        sum += q.value;
        err += q.error;
        if !sum.is_finite() {
            return Err(QuadError::Divergent { partial: sum, at: hi });
        }
        let small = q.value.abs() <= tol.target(sum) * 1e-2 || q.value == 0.0 && sum == 0.0;
        if small && q.value.abs() <= prev {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 {
            return Ok(Quadrature { value: sum, error: err + q.value.abs(), evals });
        }
        // geometric decay of shell sums: add the remainder estimate and stop
        if k >= 6 && prev.is_finite() && prev > 0.0 && q.value > 0.0 {
            let ratio = q.value / prev;
            if ratio < 0.97 {
                let remainder = q.value * ratio / (1.0 - ratio);
                if remainder <= tol.target(sum) * 1e-2 {
                    return Ok(Quadrature { value: sum + remainder, error: err + remainder, evals });
                }
            }
        }
        prev = q.value.abs();
        lo = hi;
    }
    Err(QuadError::Divergent { partial: sum, at: lo })
}

/// Safeguarded Newton iteration for a root of `f` in `[lo, hi]`. `f` returns
/// the value and derivative. Falls back to bisection whenever the Newton step
/// leaves the bracket or fails to halve the bracket.
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> Result<f64, RootError> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(RootError::NotBracketed { lo, hi, flo, fhi });
    }
    // orient so that f(a) < 0 < f(b)
    let (mut a, mut b) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..200 {
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton_ok = dfx != 0.0 && dfx.is_finite() && {
            let step = fx / dfx;
            let cand = x - step;
            (cand - a) * (cand - b) < 0.0 && (2.0 * step).abs() <= dx_old.abs()
        };
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            let mid = 0.5 * (a + b);
            dx = x - mid;
            x = mid;
        }
        if dx.abs() <= xtol * (1.0 + x.abs()) || (a - b).abs() <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
        let r = f(x);
        fx = r.0;
        dfx = r.1;
    }
    Err(RootError::MaxIterations(200))
}

/// Bisection on a monotone predicate: returns the boundary between
/// `pred == false` at `lo` and `pred == true` at `hi` within `xtol`.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(mut pred: P, lo: f64, hi: f64, xtol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    while (b - a).abs() > xtol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Brent's method for the maximum of a unimodal function on `[a, b]`.
/// Returns (argmax, max).
pub fn brent_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let mut g = |x: f64| -f(x);
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = g(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let xm = 0.5 * (a + b);
        let tol1 = xtol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
        let q = integrate(|x| x.powi(8), -1.0, 1.0, Tolerance::default()).unwrap();
        assert!((q.value - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = integrate(f64::exp, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn tail_gaussian() {
        let q = integrate_tail(|x: f64| (-x * x / 2.0).exp(), 0.0, 1.0, Tolerance::relative(1e-13))
            .unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((q.value - exact).abs() < 1e-12);
    }

    #[test]
    fn tail_power_law() {
        let q = integrate_tail(|x: f64| x.powf(-1.5), 1.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn tail_divergence() {
        let r = integrate_tail(|x: f64| 1.0 / x, 1.0, 1.0, Tolerance::relative(1e-10));
        assert!(matches!(r, Err(QuadError::Divergent { .. })));
        let r = integrate_tail(|_| 1.0, 0.0, 1.0, Tolerance::relative(1e-10));
        assert!(matches!(r, Err(QuadError::Divergent { .. })));
    }

    #[test]
    fn newton_sqrt2() {
        let r = newton_bracketed(|x| (x * x - 2.0, 2.0 * x), 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        // decreasing function
        let r = newton_bracketed(|x| (1.0 - x, -1.0), 0.0, 3.0, 1e-15).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_without_bracket() {
        assert!(newton_bracketed(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn brent_parabola() {
        let (x, fx) = brent_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 4.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
