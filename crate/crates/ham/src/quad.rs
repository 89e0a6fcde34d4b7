//! Adaptive Gauss–Kronrod quadrature with endpoint power-law handling.
//!
//! The 21-point rule and its error rescaling follow QUADPACK. Subintervals are
//! kept in a max-heap keyed on their error estimate and the worst one is
//! bisected until the global estimate meets the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Absolute/relative tolerance pair plus a subdivision budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tol {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tol {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    /// Default for one-dimensional radial integrals.
    pub const RADIAL: Tol = Tol::new(1e-9, 1e-7);

    /// Default for the outer layer of nested two-dimensional integrals.
    pub const PLANAR: Tol = Tol::new(1e-12, 1e-5);

    pub fn with_budget(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tol {
    fn default() -> Self {
        Tol::RADIAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn zero() -> Self {
        Estimate {
            value: 0.0,
            error: 0.0,
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

impl std::ops::Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, s: f64) -> Estimate {
        Estimate {
            value: self.value * s,
            error: self.error * s.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}")]
    NotConverged { value: f64, error: f64 },
    #[error("integrand is not finite at x = {x:e}")]
    NonFinite { x: f64 },
}

impl QuadError {
    /// Best available estimate, if the failure still produced one.
    pub fn estimate(&self) -> Option<Estimate> {
        match *self {
            QuadError::NotConverged { value, error } => Some(Estimate { value, error }),
            QuadError::NonFinite { .. } => None,
        }
    }
}

pub type QuadResult = Result<Estimate, QuadError>;

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error.total_cmp(&o.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// One 21-point Kronrod panel: (value, error estimate), or the abscissa of a
/// non-finite sample.
pub fn gk21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> Result<(f64, f64), f64> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(center);
    }
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let absc = half * XGK[j];
        let x1 = center - absc;
        let x2 = center + absc;
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.is_finite() {
            return Err(x1);
        }
        if !f2.is_finite() {
            return Err(x2);
        }
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
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err))
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: Tol) -> QuadResult {
    if a == b {
        return Ok(Estimate::zero());
    }
    let (v, e) = gk21(f, a, b).map_err(|x| QuadError::NonFinite { x })?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let min_width = (b - a).abs() * 1e-14;
    while total_err > tol.target(total) {
        if heap.len() >= tol.max_intervals {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a).abs() < min_width {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid).map_err(|x| QuadError::NonFinite { x })?;
        let (v2, e2) = gk21(f, mid, worst.b).map_err(|x| QuadError::NonFinite { x })?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    if error <= tol.target(value) {
        Ok(Estimate { value, error })
    } else {
        Err(QuadError::NotConverged { value, error })
    }
}

/// Integral over `[a, b]` of an integrand behaving like `|x - a|^p` near `a`
/// (p > -1). The substitution `x = a + (b - a) w^{1/(p+1)}` flattens the
/// endpoint behaviour before adaptive integration.
pub fn power_weighted<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    p: f64,
    tol: Tol,
) -> QuadResult {
    power_weighted_offset(&|u: f64| f(a + u), a, b, p, tol)
}

/// As [`power_weighted`], but `f` receives the signed offset `x - a`, which
/// stays exact where `a + offset` would round back to `a`.
pub fn power_weighted_offset<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    p: f64,
    tol: Tol,
) -> QuadResult {
    assert!(p > -1.0, "endpoint exponent must exceed -1");
    if a == b {
        return Ok(Estimate::zero());
    }
    let len = b - a;
    if p == 0.0 {
        return adaptive(&|x: f64| f(x - a), a, b, tol);
    }
    let q = 1.0 / (p + 1.0);
    let g = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let s = w.powf(q);
        // dx/dw = len q w^{q-1} = len q s / w
        f(len * s) * len * q * s / w
    };
    adaptive(&g, 0.0, 1.0, tol)
}

/// Integral over `[a, b]` with power-law endpoint behaviour at both ends.
pub fn power_weighted_both<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    pa: f64,
    pb: f64,
    tol: Tol,
) -> QuadResult {
    let m = 0.5 * (a + b);
    Ok(power_weighted(f, a, m, pa, tol)? + power_weighted(f, b, m, pb, tol)? * -1.0)
}

/// Integral over `[a, ∞)` (a > 0) of an integrand decaying like `x^{-q}`
/// with q > 1, through `x = a / u`. Pass `f64::INFINITY` for integrands that
/// decay faster than any power.
pub fn semi_infinite<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, q: f64, tol: Tol) -> QuadResult {
    assert!(a > 0.0, "semi-infinite integrals start at a positive abscissa");
    assert!(q > 1.0, "tail must decay faster than 1/x");
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = a / u;
        f(x) * a / (u * u)
    };
    if q.is_infinite() {
        adaptive(&g, 0.0, 1.0, tol)
    } else {
        power_weighted(&g, 0.0, 1.0, q - 2.0, tol)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule on `[a, b]`.
pub fn gauss_fixed<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = adaptive(&|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, Tol::RADIAL).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn sqrt_singularity() {
        let r = power_weighted(&|x: f64| 1.0 / x.sqrt(), 0.0, 4.0, -0.5, Tol::RADIAL).unwrap();
        assert!((r.value - 4.0).abs() < 1e-12);
        let r = power_weighted(&|x: f64| (4.0 - x).powf(-0.25), 4.0, 0.0, -0.25, Tol::RADIAL).unwrap();
        // integral over [0, 4] taken with reversed orientation
        assert!((r.value + 4.0f64.powf(0.75) / 0.75).abs() < 1e-11);
    }

    #[test]
    fn tail_map() {
        let r = semi_infinite(&|x: f64| 1.0 / (x * x), 2.0, 2.0, Tol::RADIAL).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        let r = semi_infinite(&|x: f64| x.powf(-1.25), 1.0, 1.25, Tol::RADIAL).unwrap();
        assert!((r.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn legendre_rule() {
        let (x, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let v = gauss_fixed(&|t: f64| t.powi(12) + t.powi(3), -1.0, 1.0, &x, &w);
        assert!((v - 2.0 / 13.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tol::new(1e-15, 1e-15).with_budget(4);
        let r = adaptive(&|x: f64| (1.0 / x).sin(), 1e-3, 1.0, tol);
        match r {
            Err(QuadError::NotConverged { error, .. }) => assert!(error > 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
