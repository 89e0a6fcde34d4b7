//! Second moments of the Wiener chaos components of the solution, their upper
//! bounds and the resulting moment series.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::conditions::dalang_integral;
use crate::covariance::{SpatialMeasure, TemporalCovariance};
use crate::error::{HamError, Result};
use crate::quad::{adaptive, gauss_legendre, power_weighted, Estimate, Tol};
use crate::wave_kernel::{wave_fourier, Equation, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosMomentEstimate {
    pub n: usize,
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub imag_residual: f64,
    pub effective_sample_size: f64,
    /// Set when the effective sample size drops below 1% of the draws.
    pub low_ess: bool,
}

/// `∏_k ĝ(t_{k+1} - t_k, |ξ_1 + … + ξ_k|)` with `t_{n+1} = t`.
pub fn chaos_fourier_product(times: &[f64], xis: &[Vec<f64>], t: f64) -> Result<f64> {
    if times.len() != xis.len() {
        return Err(HamError::InvalidParameter(format!(
            "{} times but {} frequencies",
            times.len(),
            xis.len()
        )));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(HamError::InvalidParameter("times must be strictly increasing".into()));
    }
    if let (Some(first), Some(last)) = (times.first(), times.last()) {
        if !(*first > 0.0 && *last < t) {
            return Err(HamError::InvalidParameter(format!("times must lie in (0, {t})")));
        }
    }
    let d = xis.first().map_or(0, |x| x.len());
    if xis.iter().any(|x| x.len() != d) {
        return Err(HamError::InvalidParameter("frequencies of mixed dimension".into()));
    }
    let mut partial = vec![0.0; d];
    let mut out = 1.0;
    for k in 0..times.len() {
        for (p, x) in partial.iter_mut().zip(&xis[k]) {
            *p += x;
        }
        let next = if k + 1 < times.len() { times[k + 1] } else { t };
        out *= wave_fourier(next - times[k], partial.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(out)
}

/// `(C_N, D_N) = (∫_{|ξ|>N} |ξ|^{-2} μ(dξ), μ{|ξ| ≤ N})`.
pub fn cn_dn_split(mu: &SpatialMeasure, n_split: f64) -> Result<(f64, f64)> {
    if !(n_split >= 0.0) {
        return Err(HamError::InvalidParameter(format!("split radius N = {n_split} must be nonnegative")));
    }
    require_dalang(mu)?;
    let a = mu.alpha();
    let k = mu.radial_prefactor();
    if n_split == 0.0 {
        return Ok((f64::INFINITY, 0.0));
    }
    Ok((k * n_split.powf(a - 2.0) / (2.0 - a), k * n_split.powf(a) / a))
}

fn require_dalang(mu: &SpatialMeasure) -> Result<()> {
    let v = dalang_integral(mu)?;
    if !v.finite {
        return Err(HamError::Refused(format!(
            "the spectral measure fails the integrability condition: {}",
            v.divergence.unwrap_or_default()
        )));
    }
    Ok(())
}

/// `Γ_t^n n! (2π)^{-nd} 8^n Σ_{k=0}^n t^{n+2k}/k! D_N^k C_N^{n-k}`.
pub fn alpha_upper_bound(
    n: usize,
    t: f64,
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    n_split: f64,
) -> Result<f64> {
    let (c, d) = cn_dn_split(mu, n_split)?;
    if n == 0 {
        return Ok(1.0);
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let a = 8.0 * gamma.gamma_bar(t) * (2.0 * PI).powf(-(mu.dim() as f64));
    let lead = nf * a.ln() + ln_gamma(nf + 1.0);
    let mut sum = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let dk = if k == 0 { 0.0 } else { kf * d.ln() };
        let ck = if k == n { 0.0 } else { (nf - kf) * c.ln() };
        sum += (lead + (nf + 2.0 * kf) * t.ln() - ln_gamma(kf + 1.0) + dk + ck).exp();
    }
    Ok(sum)
}

/// Deterministic value of `α_n(t)` for n ∈ {1, 2}.
///
/// n = 1 works for any d and either kernel through closed-form pair kernels.
/// n = 2 is available for the wave kernel with white noise in d = 1, where
/// the spatial pairing has an exact real-space form.
pub fn alpha_n_quadrature(
    n: usize,
    t: f64,
    kernel: &KernelSpec,
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
) -> Result<Estimate> {
    if kernel.d != mu.dim() {
        return Err(HamError::InvalidParameter(format!(
            "kernel has d = {}, measure has d = {}",
            kernel.d,
            mu.dim()
        )));
    }
    require_dalang(mu)?;
    if !(t >= 0.0) {
        return Err(HamError::InvalidParameter(format!("t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(Estimate::zero());
    }
    match n {
        1 => linear_variance(t, kernel, mu, gamma),
        2 => {
            if kernel.equation != Equation::Wave || !(mu.dim() == 1 && mu.is_white()) {
                return Err(HamError::Unsupported(
                    "second-order quadrature needs the wave kernel with white noise in d = 1".into(),
                ));
            }
            second_order_white(t, mu.constant(), gamma)
        }
        _ => Err(HamError::Unsupported(format!("quadrature for chaos order {n}; use Monte Carlo"))),
    }
}

/// `I_t = 2 ∫_0^t γ(u) ∫_0^{t-u} Ψ(w+u, w) dw du` with the inner integral in
/// closed form.
fn linear_variance(t: f64, kernel: &KernelSpec, mu: &SpatialMeasure, gamma: &TemporalCovariance) -> Result<Estimate> {
    let alpha = mu.alpha();
    let pre = mu.radial_prefactor() * (2.0 * PI).powf(-(mu.dim() as f64));
    let inner: Box<dyn Fn(f64) -> f64 + Sync> = match kernel.equation {
        Equation::Wave => {
            let k = 2.0 - alpha;
            let kk = pre * crate::conditions::power_cosine_constant(alpha) / 2.0;
            Box::new(move |u: f64| {
                let l = t - u;
                kk * (((2.0 * l + u).powf(k + 1.0) - u.powf(k + 1.0)) / (2.0 * (k + 1.0)) - l * u.powf(k))
            })
        }
        Equation::Heat => {
            let e = 1.0 - alpha / 2.0;
            let kh = pre * 0.5 * statrs::function::gamma::gamma(alpha / 2.0) * 2f64.powf(alpha / 2.0);
            Box::new(move |u: f64| {
                let l = t - u;
                kh * ((2.0 * l + u).powf(e) - u.powf(e)) / (2.0 * e)
            })
        }
    };
    let f = |u: f64| 2.0 * gamma.gamma_eval(u) * inner(u);
    power_weighted(&f, 0.0, t, gamma.origin_exponent(), Tol::new(1e-14, 1e-11))
        .map_err(HamError::quad("first-order chaos quadrature"))
}

/// Spatial pairing of the second-order kernels for white noise in d = 1.
///
/// Same ordering of (t1, t2) and (s1, s2): the x-integrals factor into
/// `min(gap_t, gap_s) · min(t - t_late, t - s_late) / 4`. Opposite ordering:
/// `|{|x1| < P, |x2| < Q, |x1 - x2| < c}| / 16`.
fn psi2_white(t: f64, t1: f64, t2: f64, s1: f64, s2: f64) -> f64 {
    let t_late = t1.max(t2);
    let s_late = s1.max(s2);
    let gap_t = (t2 - t1).abs();
    let gap_s = (s2 - s1).abs();
    if (t1 < t2) == (s1 < s2) {
        gap_t.min(gap_s) * (t - t_late).min(t - s_late) / 4.0
    } else {
        let p = t - s_late;
        let q = t - t_late;
        let c = gap_t.min(gap_s);
        let sq = |x: f64| if x > 0.0 { x * x } else { 0.0 };
        let e = p + q - c;
        let corner = 0.5 * (sq(e) - sq(e - 2.0 * p) - sq(e - 2.0 * q) + sq(e - 2.0 * p - 2.0 * q));
        (4.0 * p * q - 2.0 * corner) / 16.0
    }
}

struct Gl3 {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Gl3 {
    fn new() -> Self {
        let (x, w) = gauss_legendre(3);
        Gl3 { x, w }
    }

    fn pieces<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let mut s = 0.0;
        for win in breaks.windows(2) {
            let (a, b) = (win[0], win[1]);
            if b <= a {
                continue;
            }
            let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
            for (x, w) in self.x.iter().zip(&self.w) {
                s += r * w * f(m + r * x);
            }
        }
        s
    }
}

fn sorted_breaks(lo: f64, hi: f64, cand: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v = vec![lo, hi];
    v.extend(cand.into_iter().filter(|x| *x > lo && *x < hi));
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

/// `∫∫ ψ2(t1, t2, t1-u1, t2-u2) dt1 dt2`, exact: ψ2 is quadratic on the cells
/// cut out by the lines below, and 3-point Gauss is exact on each.
fn psi2_gap_integral(t: f64, u1: f64, u2: f64, gl: &Gl3) -> f64 {
    let (a1, b1) = (u1.max(0.0), t.min(t + u1));
    let (a2, b2) = (u2.max(0.0), t.min(t + u2));
    if b1 <= a1 || b2 <= a2 {
        return 0.0;
    }
    let horizontals = [a2, b2, t + u1 / 2.0, t + u2 - u1 / 2.0];
    let diags = [
        0.0,
        u2 - u1,
        (u2 - u1) / 2.0,
        -u1 / 2.0,
        (u2 - 2.0 * u1) / 2.0,
        u2 / 2.0,
        (2.0 * u2 - u1) / 2.0,
    ];
    let mut vert = vec![t + u1 - u2 / 2.0, t + u2 / 2.0];
    for h in horizontals {
        for dg in diags {
            vert.push(h - dg);
        }
    }
    let outer = sorted_breaks(a1, b1, vert);
    gl.pieces(&outer, |t1| {
        let inner = sorted_breaks(a2, b2, horizontals.iter().copied().chain(diags.iter().map(|dg| t1 + dg)));
        gl.pieces(&inner, |t2| psi2_white(t, t1, t2, t1 - u1, t2 - u2))
    })
}

fn second_order_white(t: f64, c: f64, gamma: &TemporalCovariance) -> Result<Estimate> {
    let gl = Gl3::new();
    let p = gamma.origin_exponent();
    let inner_tol = Tol::new(1e-14, 1e-9);
    let outer_tol = Tol::new(1e-13, 1e-8);
    // J(u1, u2) = J(-u1, -u2): integrate u2 > 0 and double
    let row = |u1: f64| -> f64 {
        let f = |u2: f64| gamma.gamma_eval(u2) * psi2_gap_integral(t, u1, u2, &gl);
        let a = u1.abs();
        let br = sorted_breaks(0.0, t, [a / 2.0, a, 2.0 * a]);
        let mut s = 0.0;
        for (i, w) in br.windows(2).enumerate() {
            let r = if i == 0 {
                power_weighted(&f, w[0], w[1], p, inner_tol)
            } else {
                adaptive(&f, w[0], w[1], inner_tol)
            };
            s += match r {
                Ok(e) => e.value,
                Err(e) => match e.estimate() {
                    Some(e) => e.value,
                    None => return f64::NAN,
                },
            };
        }
        2.0 * gamma.gamma_eval(u1) * s
    };
    let right = power_weighted(&row, 0.0, t, p, outer_tol).map_err(HamError::quad("second-order chaos quadrature"))?;
    let left = power_weighted(&row, 0.0, -t, p, outer_tol).map_err(HamError::quad("second-order chaos quadrature"))?;
    // μ = c · Lebesgue contributes c² through the two spatial integrals
    Ok((right + left * -1.0) * (c * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub n_samples: u64,
    /// Fixed number of independent RNG streams; results do not depend on the
    /// worker count.
    pub batches: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 100_000,
            batches: 64,
        }
    }
}

/// Radial proposal `p(ξ) ∝ μ-density · min(N^{-2}, |ξ|^{-2})`.
struct Proposal {
    d: usize,
    alpha: f64,
    c: f64,
    n: f64,
    z: f64,
    p_inner: f64,
}

impl Proposal {
    fn new(mu: &SpatialMeasure, n: f64) -> Self {
        let alpha = mu.alpha();
        let k = mu.radial_prefactor();
        let cn = k * n.powf(alpha - 2.0) / (2.0 - alpha);
        let dn = k * n.powf(alpha) / alpha;
        let inner = dn / (n * n);
        Proposal {
            d: mu.dim(),
            alpha,
            c: mu.constant(),
            n,
            z: inner + cn,
            p_inner: inner / (inner + cn),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        let v = 1.0 - rng.random::<f64>();
        let r = if u < self.p_inner {
            self.n * v.powf(1.0 / self.alpha)
        } else {
            self.n * v.powf(-1.0 / (2.0 - self.alpha))
        };
        if self.d == 1 {
            out[0] = if rng.random::<bool>() { r } else { -r };
            return;
        }
        let mut s = 0.0;
        for o in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *o = g;
            s += g * g;
        }
        let scale = r / s.sqrt();
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    fn rho(&self, r: f64) -> f64 {
        let e = self.alpha - self.d as f64;
        if e == 0.0 {
            self.c
        } else {
            self.c * r.powf(e)
        }
    }

    fn density(&self, r: f64) -> f64 {
        let m = if r <= self.n { 1.0 / (self.n * self.n) } else { 1.0 / (r * r) };
        self.rho(r) * m / self.z
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    count: u64,
    sum: f64,
    sum2: f64,
    sum_abs: f64,
    sum_im: f64,
    sum_im2: f64,
}

fn norm_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One importance-sampling draw of the α_n integrand; returns (real, imag).
#[allow(clippy::too_many_arguments)]
fn draw_weight<R: Rng>(
    rng: &mut R,
    n: usize,
    t: f64,
    gamma: &TemporalCovariance,
    gbar: f64,
    prop: &Proposal,
    ts: &mut [f64],
    ss: &mut [f64],
    xi: &mut [f64],
    eta: &mut [f64],
    order_t: &mut [usize],
    order_s: &mut [usize],
) -> (f64, f64) {
    let d = prop.d;
    let mut time_w = 1.0;
    for j in 0..n {
        let u: f64 = rng.random();
        let mag = gamma.gap_quantile(t, u);
        let delta = if rng.random::<bool>() { mag } else { -mag };
        let len = t - mag;
        let lo = delta.max(0.0);
        ts[j] = lo + rng.random::<f64>() * len;
        ss[j] = ts[j] - delta;
        time_w *= gbar * len;
    }
    for (i, o) in order_t.iter_mut().enumerate() {
        *o = i;
    }
    order_t.sort_by(|a, b| ts[*a].partial_cmp(&ts[*b]).unwrap().then(a.cmp(b)));
    for (i, o) in order_s.iter_mut().enumerate() {
        *o = i;
    }
    order_s.sort_by(|a, b| ss[*a].partial_cmp(&ss[*b]).unwrap().then(a.cmp(b)));

    // mixture component: independent frequencies, or increments of a chain of
    // partial sums along the t- or s-ordering
    let comp = rng.random_range(0..3u32);
    for k in 0..n {
        prop.draw(rng, &mut eta[k * d..(k + 1) * d]);
    }
    match comp {
        0 => xi.copy_from_slice(eta),
        _ => {
            let order = if comp == 1 { &*order_t } else { &*order_s };
            for k in 0..n {
                let j = order[k];
                for c in 0..d {
                    let prev = if k == 0 { 0.0 } else { eta[(k - 1) * d + c] };
                    xi[j * d + c] = eta[k * d + c] - prev;
                }
            }
        }
    }

    let mut q_ind = 1.0;
    let mut rho_prod = 1.0;
    let mut total = vec![0.0; d];
    for j in 0..n {
        let r = norm_of(&xi[j * d..(j + 1) * d]);
        q_ind *= prop.density(r);
        rho_prod *= prop.rho(r);
        for c in 0..d {
            total[c] += xi[j * d + c];
        }
    }
    let chain = |order: &[usize], times: &[f64]| -> (f64, f64) {
        let mut partial = vec![0.0; d];
        let mut phi = 1.0;
        let mut q = 1.0;
        for k in 0..n {
            let j = order[k];
            for c in 0..d {
                partial[c] += xi[j * d + c];
            }
            let r = norm_of(&partial);
            let next = if k + 1 < n { times[order[k + 1]] } else { t };
            phi *= wave_fourier(next - times[j], r);
            q *= prop.density(r);
        }
        (phi, q)
    };
    let (phi_t, q_t) = chain(order_t, ts);
    let (phi_s, q_s) = chain(order_s, ss);
    let q = (q_ind + q_t + q_s) / 3.0;
    let w = (2.0 * PI).powf(-((n * d) as f64)) * time_w * phi_t * phi_s * rho_prod / q;
    // the spatial phase e^{-i Σξ·x} cancels between the two factors
    let theta: f64 = total.iter().enumerate().map(|(i, v)| v * (1.0 + i as f64)).sum();
    let z = Complex64::from_polar(1.0, -theta) * Complex64::from_polar(1.0, -theta).conj() * w;
    (z.re, z.im)
}

/// Importance-sampled Monte Carlo estimate of `α_n(t)` for the wave kernel.
pub fn alpha_n_mc(
    n: usize,
    t: f64,
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<ChaosMomentEstimate> {
    if n == 0 {
        return Err(HamError::InvalidParameter("chaos order must be at least 1".into()));
    }
    if cfg.batches == 0 || cfg.n_samples < 2 {
        return Err(HamError::InvalidParameter("need at least one batch and two samples".into()));
    }
    require_dalang(mu)?;
    if !(t >= 0.0) {
        return Err(HamError::InvalidParameter(format!("t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(ChaosMomentEstimate {
            n,
            t,
            estimate: 0.0,
            std_error: 0.0,
            n_samples: cfg.n_samples,
            imag_residual: 0.0,
            effective_sample_size: cfg.n_samples as f64,
            low_ess: false,
        });
    }
    let d = mu.dim();
    let prop = Proposal::new(mu, 1.0 / t);
    let gbar = gamma.gamma_bar(t);
    let per = cfg.n_samples / cfg.batches as u64;
    let extra = cfg.n_samples % cfg.batches as u64;
    let accs: Vec<Acc> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((n as u64) << 32) | b as u64);
            let count = per + u64::from((b as u64) < extra);
            let mut acc = Acc::default();
            let (mut ts, mut ss) = (vec![0.0; n], vec![0.0; n]);
            let (mut xi, mut eta) = (vec![0.0; n * d], vec![0.0; n * d]);
            let (mut ot, mut os) = (vec![0; n], vec![0; n]);
            for _ in 0..count {
                let (w, im) = draw_weight(
                    &mut rng, n, t, gamma, gbar, &prop, &mut ts, &mut ss, &mut xi, &mut eta, &mut ot, &mut os,
                );
                acc.count += 1;
                acc.sum += w;
                acc.sum2 += w * w;
                acc.sum_abs += w.abs();
                acc.sum_im += im;
                acc.sum_im2 += im * im;
            }
            acc
        })
        .collect();
    let mut tot = Acc::default();
    for a in accs {
        tot.count += a.count;
        tot.sum += a.sum;
        tot.sum2 += a.sum2;
        tot.sum_abs += a.sum_abs;
        tot.sum_im += a.sum_im;
        tot.sum_im2 += a.sum_im2;
    }
    let m = tot.count as f64;
    let mean = tot.sum / m;
    let var = ((tot.sum2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
    let ess = if tot.sum2 > 0.0 { tot.sum_abs * tot.sum_abs / tot.sum2 } else { m };
    if !mean.is_finite() || !var.is_finite() {
        return Err(HamError::Numerical(format!("Monte Carlo weights overflowed for n = {n}, t = {t}")));
    }
    Ok(ChaosMomentEstimate {
        n,
        t,
        estimate: mean,
        std_error: (var / m).sqrt(),
        n_samples: tot.count,
        imag_residual: tot.sum_im / m,
        effective_sample_size: ess,
        low_ess: ess < 0.01 * m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub t: f64,
    /// `α_n(t)/n!` for n = 0..=n_max (the n = 0 term is 1).
    pub terms: Vec<f64>,
    pub estimates: Vec<ChaosMomentEstimate>,
    /// `alpha_upper_bound(n, t, N)` for n = 0..=n_max.
    pub upper_bounds: Vec<f64>,
    pub partial_sum: f64,
    pub tail_bound: f64,
    pub n_split: f64,
    pub c_n: f64,
    pub d_n: f64,
    #[serde(skip)]
    pub mu: SpatialMeasure,
    #[serde(skip)]
    pub gamma: TemporalCovariance,
}

/// Geometric ratio `8 (2π)^{-d} Γ_t t C_N` and `y = t² D_N / C_N`.
fn series_ratios(t: f64, mu: &SpatialMeasure, gamma: &TemporalCovariance, n_split: f64) -> Result<(f64, f64, f64, f64)> {
    let (c, d) = cn_dn_split(mu, n_split)?;
    let x = 8.0 * (2.0 * PI).powf(-(mu.dim() as f64)) * gamma.gamma_bar(t) * t * c;
    Ok((x, t * t * d / c, c, d))
}

/// `Σ_{n>m} x^n Σ_{k≤n} y^k/k!` for x < 1.
fn series_tail(x: f64, y: f64, m: usize) -> f64 {
    let mut head = 0.0;
    let mut term = 1.0;
    for k in 0..=m + 1 {
        if k > 0 {
            term *= y / k as f64;
        }
        head += term;
    }
    // Σ_{k>m+1} (xy)^k/k!, summed directly
    let xy = x * y;
    let mut rest = 0.0;
    let mut term = 1.0;
    for k in 1..10_000 {
        term *= xy / k as f64;
        if k > m + 1 {
            rest += term;
            if term < rest * 1e-17 {
                break;
            }
        }
    }
    (x.powi(m as i32 + 1) * head + rest) / (1.0 - x)
}

/// Smallest power of two N ≥ 2^-20 with `8 (2π)^{-d} Γ_t t C_N < 1/2`.
pub fn default_split(t: f64, mu: &SpatialMeasure, gamma: &TemporalCovariance) -> Result<f64> {
    for e in -20..=60 {
        let n = 2f64.powi(e);
        let (x, ..) = series_ratios(t, mu, gamma, n)?;
        if x < 0.5 {
            return Ok(n);
        }
    }
    Err(HamError::Refused(format!(
        "no split radius up to 2^60 closes the moment series at t = {t}; the model is too rough for this horizon"
    )))
}

/// `Σ_{n≤n_max} α̂_n(t)/n!` with a rigorous bound on the remaining terms.
pub fn second_moment_series(
    t: f64,
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    n_max: usize,
    n_split: Option<f64>,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<SeriesSummary> {
    require_dalang(mu)?;
    if !(t >= 0.0) {
        return Err(HamError::InvalidParameter(format!("t = {t} must be nonnegative")));
    }
    let n_split = match n_split {
        Some(n) if !(n > 0.0) => {
            return Err(HamError::InvalidParameter(format!("split radius N = {n} must be positive")))
        }
        Some(n) => n,
        None if t == 0.0 => 1.0,
        None => default_split(t, mu, gamma)?,
    };
    let (x, y, c_n, d_n) = series_ratios(t, mu, gamma, n_split)?;
    if t > 0.0 && !(x < 1.0) {
        return Err(HamError::Refused(format!(
            "8 (2pi)^-d Gamma_t t C_N = {x} >= 1 at N = {n_split}; increase the split radius"
        )));
    }
    let mut terms = vec![1.0];
    let mut upper_bounds = vec![1.0];
    let mut estimates = Vec::with_capacity(n_max);
    let mut ln_fact = 0.0;
    for n in 1..=n_max {
        ln_fact += (n as f64).ln();
        let est = alpha_n_mc(n, t, mu, gamma, cfg, seed)?;
        terms.push(est.estimate / ln_fact.exp());
        upper_bounds.push(alpha_upper_bound(n, t, mu, gamma, n_split)?);
        estimates.push(est);
    }
    let tail_bound = if t == 0.0 { 0.0 } else { series_tail(x, y, n_max) };
    Ok(SeriesSummary {
        t,
        partial_sum: terms.iter().sum(),
        terms,
        estimates,
        upper_bounds,
        tail_bound,
        n_split,
        c_n,
        d_n,
        mu: *mu,
        gamma: *gamma,
    })
}

/// Bound on `Σ_{n>m} α_n(t)/n!` at the series' split radius.
pub fn series_tail_bound(series: &SeriesSummary, m: usize) -> Result<f64> {
    if series.t == 0.0 {
        return Ok(0.0);
    }
    let (x, y, ..) = series_ratios(series.t, &series.mu, &series.gamma, series.n_split)?;
    Ok(series_tail(x, y, m))
}

/// `Σ_n (p-1)^{n/2} (α̂_n/n!)^{1/2}` plus a bound on the omitted orders.
pub fn p_moment_bound(p: f64, series: &SeriesSummary) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(HamError::InvalidParameter(format!("p = {p} must be at least 2")));
    }
    let t = series.t;
    let head: f64 = series
        .terms
        .iter()
        .enumerate()
        .map(|(n, a)| (p - 1.0).powf(n as f64 / 2.0) * a.max(0.0).sqrt())
        .sum();
    if t == 0.0 {
        return Ok(head);
    }
    let m = series.terms.len() - 1;
    // α_n/n! ≤ x^n e^y, so the omitted orders sum to at most
    // e^{y/2} q^{m+1}/(1-q) with q = √((p-1) x); the split radius may grow
    let mut n_split = series.n_split;
    for _ in 0..200 {
        let (x, y, ..) = series_ratios(t, &series.mu, &series.gamma, n_split)?;
        let q = ((p - 1.0) * x).sqrt();
        if q < 0.5 {
            return Ok(head + (y / 2.0).exp() * q.powi(m as i32 + 1) / (1.0 - q));
        }
        n_split *= 2.0;
    }
    Err(HamError::Refused(format!("no split radius closes the p = {p} moment series")))
}

/// `∫_{0<t1<…<tn<t} ∏_{j<n} (t_{j+1}-t_j)^h (t-t_n)^h dt = Γ(1+h)^n/Γ(n(1+h)+1) t^{n(1+h)}`.
pub fn simplex_integral(n: usize, t: f64, h: f64) -> Result<f64> {
    if !(h > -1.0) {
        return Err(HamError::InvalidParameter(format!("h = {h} must exceed -1")));
    }
    if !(t > 0.0) {
        return Err(HamError::InvalidParameter(format!("t = {t} must be positive")));
    }
    if h == 0.0 {
        return Ok((1..=n).fold(1.0, |acc, k| acc * t / k as f64));
    }
    let nf = n as f64;
    Ok((nf * ln_gamma(1.0 + h) - ln_gamma(nf * (1.0 + h) + 1.0) + nf * (1.0 + h) * t.ln()).exp())
}

/// The same simplex integral by nested adaptive quadrature,
/// `F_k(τ) = ∫_0^τ (τ-s)^h F_{k-1}(s) ds`, `F_0 = 1`.
pub fn simplex_quadrature(n: usize, t: f64, h: f64) -> Result<f64> {
    fn level(k: usize, tau: f64, h: f64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let f = |s: f64| (tau - s).powf(h) * level(k - 1, s, h);
        let tol = Tol::new(1e-14, 1e-10);
        match power_weighted(&f, tau, 0.0, h, tol) {
            Ok(e) => -e.value,
            Err(e) => e.estimate().map_or(f64::NAN, |e| -e.value),
        }
    }
    if !(h > -1.0 && t > 0.0) {
        return Err(HamError::InvalidParameter(format!("need h > -1 and t > 0, got h = {h}, t = {t}")));
    }
    let v = level(n, t, h);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(HamError::Numerical("nested simplex quadrature failed".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaLbReport {
    pub a: f64,
    pub ratios: Vec<(u32, f64)>,
    pub min_ratio: f64,
    pub argmin: u32,
}

/// `Γ(an+1)/(n!)^a` over a range of n.
pub fn gamma_lb_check(a: f64, n_range: std::ops::RangeInclusive<u32>) -> Result<GammaLbReport> {
    if !(a > 1.0) {
        return Err(HamError::InvalidParameter(format!("a = {a} must exceed 1")));
    }
    let ratios: Vec<(u32, f64)> = n_range
        .map(|n| {
            let nf = n as f64;
            (n, (ln_gamma(a * nf + 1.0) - a * ln_gamma(nf + 1.0)).exp())
        })
        .collect();
    let (argmin, min_ratio) = ratios
        .iter()
        .copied()
        .fold((0, f64::INFINITY), |acc, (n, r)| if r < acc.1 { (n, r) } else { acc });
    Ok(GammaLbReport {
        a,
        ratios,
        min_ratio,
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::Normalization;

    fn golden() -> (SpatialMeasure, TemporalCovariance) {
        (
            SpatialMeasure::riesz(1.0, 1, Normalization::Unit).unwrap(),
            TemporalCovariance::fractional(0.75).unwrap(),
        )
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn fourier_product_examples() {
        let v = chaos_fourier_product(&[0.5], &[vec![2.0]], 1.0).unwrap();
        assert!((v - 1f64.sin() / 2.0).abs() < 1e-15);
        assert!((v - 0.420735).abs() < 1e-6);
        let v = chaos_fourier_product(&[0.2, 0.7], &[vec![1.3], vec![-1.3]], 1.0).unwrap();
        assert!((v - (0.5 * 1.3f64).sin() / 1.3 * 0.3).abs() < 1e-15);
        assert!(chaos_fourier_product(&[0.7, 0.2], &[vec![1.0], vec![1.0]], 1.0).is_err());
        assert!(chaos_fourier_product(&[0.2, 1.2], &[vec![1.0], vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn split_examples() {
        let (mu, _) = golden();
        assert_eq!(cn_dn_split(&mu, 1.0).unwrap(), (2.0, 2.0));
        assert_eq!(cn_dn_split(&mu, 0.0).unwrap().1, 0.0);
        let mut last = f64::INFINITY;
        for n in [0.5, 1.0, 4.0, 64.0, 1e6] {
            let (c, _) = cn_dn_split(&mu, n).unwrap();
            assert!(c < last);
            last = c;
        }
        assert!(last < 1e-5);
        // closed forms against the radial quadrature
        let m = SpatialMeasure::riesz(1.3, 3, Normalization::Classical).unwrap();
        let (c, d) = cn_dn_split(&m, 2.5).unwrap();
        let cq = m
            .radial_integral(&|r: f64| if r > 2.5 { 1.0 / (r * r) } else { 0.0 }, 2.0, Tol::RADIAL)
            .unwrap()
            .value;
        let dq = crate::quad::power_weighted(&|r: f64| r.powf(0.3), 0.0, 2.5, 0.3, Tol::RADIAL).unwrap().value
            * m.radial_prefactor();
        assert!(rel(c, cq) < 1e-6 && rel(d, dq) < 1e-9, "{c} {cq} {d} {dq}");
    }

    #[test]
    fn upper_bound_examples() {
        let (mu, g) = golden();
        let b = alpha_upper_bound(1, 1.0, &mu, &g, 1.0).unwrap();
        assert!((b - 1.5 * 8.0 / (2.0 * PI) * 4.0).abs() < 1e-12);
        assert!((b - 7.639437).abs() < 1e-6);
        assert_eq!(alpha_upper_bound(3, 0.0, &mu, &g, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_variance_golden_values() {
        let (mu, g) = golden();
        let w = KernelSpec::wave(1);
        let v = alpha_n_quadrature(1, 1.0, &w, &mu, &g).unwrap();
        assert!(rel(v.value, 0.2) < 1e-10, "{}", v.value);
        let e = TemporalCovariance::exponential(1.0).unwrap();
        let v = alpha_n_quadrature(1, 1.0, &w, &mu, &e).unwrap();
        assert!(rel(v.value, 0.5 * (1.0 - 2.0 / 1f64.exp())) < 1e-10);
        assert_eq!(alpha_n_quadrature(1, 0.0, &w, &mu, &g).unwrap().value, 0.0);
    }

    #[test]
    fn heat_linear_variance_against_direct_double_integral() {
        // white noise d = 1: Ψ(a, b) = 1/√(2π(a+b))
        let (mu, g) = golden();
        let v = alpha_n_quadrature(1, 1.0, &KernelSpec::heat(1), &mu, &g).unwrap().value;
        let t = 1.0;
        let outer = |u: f64| {
            let inner = adaptive(&|w: f64| 1.0 / (2.0 * PI * (2.0 * w + u)).sqrt(), 0.0, t - u, Tol::new(1e-14, 1e-12));
            2.0 * g.gamma_eval(u) * inner.unwrap().value
        };
        let direct = power_weighted(&outer, 0.0, t, -0.5, Tol::new(1e-13, 1e-10)).unwrap().value;
        assert!(rel(v, direct) < 1e-8, "{v} vs {direct}");
    }

    #[test]
    fn pair_kernel_against_spectral_integral() {
        // the closed form pair kernel behind the first-order value, checked
        // against ∫ sin(ar) sin(br) r^{α-3} dr by quadrature
        let m = SpatialMeasure::riesz(0.6, 2, Normalization::Unit).unwrap();
        let (a, b): (f64, f64) = (0.7, 0.3);
        let k = crate::conditions::power_cosine_constant(0.6);
        let closed = k / 2.0 * (a + b).powf(1.4) - k / 2.0 * (a - b).abs().powf(1.4);
        let f = |r: f64| (a * r).sin() * (b * r).sin() * r.powf(0.6 - 3.0);
        let tol = Tol::new(1e-13, 1e-10).with_budget(100000);
        let head = power_weighted(&f, 0.0, 1.0, 0.6 - 1.0, tol).unwrap().value;
        let mut body = 0.0;
        let mut x = 1.0;
        while x < 4000.0 {
            body += adaptive(&f, x, x + 10.0, tol).unwrap().value;
            x += 10.0;
        }
        assert!(rel(closed, head + body) < 1e-5, "{closed} vs {}", head + body);
        let _ = m;
    }

    #[test]
    fn small_time_exponent() {
        let w = KernelSpec::wave(1);
        let slope = |mu: &SpatialMeasure, g: &TemporalCovariance| {
            let ts = [0.1, 0.05, 0.025];
            let ys: Vec<f64> = ts
                .iter()
                .map(|t| alpha_n_quadrature(1, *t, &w, mu, g).unwrap().value.ln())
                .collect();
            (ys[0] - ys[2]) / (ts[0].ln() - ts[2].ln())
        };
        let (mu, g) = golden();
        // 2H + 2 - α
        assert!((slope(&mu, &g) - 2.5).abs() < 1e-6);
        let e = TemporalCovariance::exponential(1.0).unwrap();
        let m = SpatialMeasure::riesz(0.5, 1, Normalization::Unit).unwrap();
        // bounded γ: 4 - α, up to the O(λt) drift of e^{-λt} over the fit window
        assert!((slope(&m, &e) - 3.5).abs() < 0.03, "{}", slope(&m, &e));
    }

    #[test]
    fn psi2_matches_brute_area() {
        let t = 1.0;
        let cases = [
            (0.1, 0.6, 0.3, 0.2),
            (0.2, 0.5, 0.45, 0.1),
            (0.7, 0.1, 0.2, 0.9),
            (0.3, 0.35, 0.05, 0.95),
            (0.5, 0.8, 0.6, 0.65),
        ];
        for (t1, t2, s1, s2) in cases {
            // real-space second-order kernel at x = 0 for the time pair (a1, a2)
            let g = |x1: f64, x2: f64, a1: f64, a2: f64| -> f64 {
                let (xe, xl, e, l) = if a1 < a2 { (x1, x2, a1, a2) } else { (x2, x1, a2, a1) };
                if xl.abs() < t - l && (xl - xe).abs() < l - e {
                    0.25
                } else {
                    0.0
                }
            };
            let tol = Tol::new(1e-12, 1e-9).with_budget(20000);
            let outer = |x2: f64| {
                let f = |x1: f64| g(x1, x2, t1, t2) * g(x1, x2, s1, s2);
                let mut br = vec![-2.0, 2.0];
                for v in [t - t1, t - t2, t - s1, t - s2] {
                    br.push(v);
                    br.push(-v);
                }
                for v in [(t2 - t1).abs(), (s2 - s1).abs()] {
                    br.push(x2 + v);
                    br.push(x2 - v);
                }
                let br = sorted_breaks(-2.0, 2.0, br);
                br.windows(2).map(|w| adaptive(&f, w[0], w[1], tol).unwrap().value).sum::<f64>()
            };
            let mut br = vec![-2.0, 2.0];
            for v in [t - t1, t - t2, t - s1, t - s2] {
                br.push(v);
                br.push(-v);
            }
            let br = sorted_breaks(-2.0, 2.0, br);
            let brute: f64 = br.windows(2).map(|w| adaptive(&outer, w[0], w[1], tol).unwrap().value).sum();
            let exact = psi2_white(t, t1, t2, s1, s2);
            assert!((brute - exact).abs() < 1e-7, "{t1} {t2} {s1} {s2}: {brute} vs {exact}");
        }
    }

    #[test]
    fn gap_integral_matches_adaptive_double_integral() {
        let gl = Gl3::new();
        let t = 1.0;
        for (u1, u2) in [(0.3, 0.1), (-0.2, 0.5), (0.6, -0.25), (-0.1, -0.4), (0.15, 0.15)] {
            let exact = psi2_gap_integral(t, u1, u2, &gl);
            let tol = Tol::new(1e-13, 1e-10).with_budget(20000);
            let outer = |t1: f64| {
                let f = |t2: f64| psi2_white(t, t1, t2, t1 - u1, t2 - u2);
                adaptive(&f, u2.max(0.0), t.min(t + u2), tol).unwrap_or_else(|e| e.estimate().unwrap()).value
            };
            let brute = adaptive(&outer, u1.max(0.0), t.min(t + u1), tol).unwrap_or_else(|e| e.estimate().unwrap()).value;
            assert!((exact - brute).abs() < 1e-7 * exact.abs().max(1e-3), "{u1} {u2}: {exact} vs {brute}");
        }
    }

    #[test]
    fn second_order_scaling_and_bound() {
        let (mu, g) = golden();
        let w = KernelSpec::wave(1);
        let a1 = alpha_n_quadrature(2, 1.0, &w, &mu, &g).unwrap().value;
        let ah = alpha_n_quadrature(2, 0.5, &w, &mu, &g).unwrap().value;
        // α_n(ct) = c^{n(2H+1)} α_n(t)
        assert!(rel(ah, a1 * 0.5f64.powi(5)) < 1e-6, "{ah} vs {}", a1 * 0.5f64.powi(5));
        assert!(a1 > 0.0);
        let b = alpha_upper_bound(2, 1.0, &mu, &g, 1.0).unwrap();
        assert!(a1 <= b);
        assert!(matches!(
            alpha_n_quadrature(2, 1.0, &w, &SpatialMeasure::riesz(0.5, 1, Normalization::Unit).unwrap(), &g),
            Err(HamError::Unsupported(_))
        ));
    }

    #[test]
    fn mc_first_order_matches_quadrature() {
        let (mu, g) = golden();
        let cfg = SamplerConfig {
            n_samples: 200_000,
            batches: 16,
        };
        let e = alpha_n_mc(1, 1.0, &mu, &g, &cfg, 7).unwrap();
        assert!((e.estimate - 0.2).abs() < 3.0 * e.std_error, "{e:?}");
        assert!(e.imag_residual.abs() <= 3.0 * e.std_error + 1e-15);
        assert!(e.effective_sample_size > 0.05 * cfg.n_samples as f64);
        let zero = alpha_n_mc(1, 0.0, &mu, &g, &cfg, 7).unwrap();
        assert_eq!(zero.estimate, 0.0);
    }

    #[test]
    fn mc_other_models_match_quadrature() {
        let cfg = SamplerConfig {
            n_samples: 200_000,
            batches: 16,
        };
        let e = TemporalCovariance::exponential(2.0).unwrap();
        for mu in [
            SpatialMeasure::riesz(0.5, 1, Normalization::Unit).unwrap(),
            SpatialMeasure::riesz(1.4, 2, Normalization::Classical).unwrap(),
            SpatialMeasure::riesz(0.8, 3, Normalization::Unit).unwrap(),
        ] {
            let q = alpha_n_quadrature(1, 0.8, &KernelSpec::wave(mu.dim()), &mu, &e).unwrap().value;
            let m = alpha_n_mc(1, 0.8, &mu, &e, &cfg, 3).unwrap();
            assert!((m.estimate - q).abs() < 3.5 * m.std_error, "{mu:?}: {m:?} vs {q}");
        }
    }

    #[test]
    fn mc_deterministic_across_thread_counts() {
        let (mu, g) = golden();
        let cfg = SamplerConfig {
            n_samples: 20_000,
            batches: 8,
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| alpha_n_mc(2, 0.7, &mu, &g, &cfg, 11).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn series_examples() {
        let (mu, g) = golden();
        let cfg = SamplerConfig {
            n_samples: 20_000,
            batches: 8,
        };
        let s = second_moment_series(0.0, &mu, &g, 3, None, &cfg, 1).unwrap();
        assert_eq!(s.partial_sum, 1.0);
        assert_eq!(s.tail_bound, 0.0);
        assert_eq!(p_moment_bound(3.0, &s).unwrap(), 1.0);
        let s = second_moment_series(0.5, &mu, &g, 0, None, &cfg, 1).unwrap();
        assert_eq!(s.partial_sum, 1.0);
        assert!(s.tail_bound.is_finite() && s.tail_bound > 0.0);
        let (x, ..) = series_ratios(0.5, &mu, &g, s.n_split).unwrap();
        assert!(x < 0.5);
        assert!(second_moment_series(0.5, &mu, &g, 0, Some(1e-6), &cfg, 1).is_err());
    }

    #[test]
    fn series_tail_matches_term_sum() {
        let (x, y) = (0.3f64, 2.7f64);
        for m in [0usize, 1, 4, 9] {
            let mut direct = 0.0;
            for n in m + 1..400 {
                let mut inner = 0.0;
                let mut term = 1.0;
                for k in 0..=n {
                    if k > 0 {
                        term *= y / k as f64;
                    }
                    inner += term;
                }
                direct += x.powi(n as i32) * inner;
            }
            assert!(rel(series_tail(x, y, m), direct) < 1e-12);
        }
    }

    #[test]
    fn p_moment_ordering() {
        let (mu, g) = golden();
        let cfg = SamplerConfig {
            n_samples: 20_000,
            batches: 8,
        };
        let s = second_moment_series(0.5, &mu, &g, 3, None, &cfg, 5).unwrap();
        let p2 = p_moment_bound(2.0, &s).unwrap();
        let p4 = p_moment_bound(4.0, &s).unwrap();
        assert!(p2 >= (s.partial_sum).sqrt());
        assert!(p4 > p2);
        assert!(p_moment_bound(1.5, &s).is_err());
    }

    #[test]
    fn simplex_examples() {
        assert!((simplex_integral(2, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((simplex_integral(1, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        for n in 1..=3 {
            for h in [0.0, 0.5, 1.0, -0.4] {
                for t in [1.0, 2.0] {
                    let a = simplex_integral(n, t, h).unwrap();
                    let b = simplex_quadrature(n, t, h).unwrap();
                    assert!(rel(a, b) < 1e-8, "{n} {h} {t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gamma_lb_examples() {
        let r = gamma_lb_check(2.0, 1..=10).unwrap();
        for (n, v) in &r.ratios {
            let mut binom = 1.0;
            for k in 0..*n {
                binom *= (2 * n - k) as f64 / (k + 1) as f64;
            }
            assert!(rel(*v, binom) < 1e-10);
        }
        let r = gamma_lb_check(1.5, 0..=0).unwrap();
        assert!((r.ratios[0].1 - 1.0).abs() < 1e-12);
        let r = gamma_lb_check(1.5, 1..=20).unwrap();
        assert!(r.min_ratio > 0.0);
        assert!(gamma_lb_check(1.0, 1..=3).is_err());
    }

    #[test]
    fn basic_inequality() {
        // ∫∫ γ(r-s) φ(r) φ(s) ≤ Γ_t ∫ φ²
        let g = TemporalCovariance::fractional(0.7).unwrap();
        let t = 1.3;
        for phi in [|_: f64| 1.0, |x: f64| x] {
            let outer = |u: f64| {
                let inner = adaptive(&|w: f64| phi(w + u) * phi(w), 0.0, t - u, Tol::new(1e-14, 1e-12)).unwrap();
                2.0 * g.gamma_eval(u) * inner.value
            };
            let lhs = power_weighted(&outer, 0.0, t, g.origin_exponent(), Tol::new(1e-13, 1e-10)).unwrap().value;
            let l2 = adaptive(&|x: f64| phi(x) * phi(x), 0.0, t, Tol::new(1e-14, 1e-12)).unwrap().value;
            assert!(lhs <= g.gamma_bar(t) * l2 + 1e-6);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn simplex_zero_exponent(n in 0usize..12, t in 0.01f64..5.0) {
                let v = simplex_integral(n, t, 0.0).unwrap();
                let mut exact = 1.0;
                for k in 1..=n { exact *= t / k as f64; }
                prop_assert!((v - exact).abs() <= 4.0 * f64::EPSILON * exact);
            }

            #[test]
            fn product_bounded_by_gaps(raw in proptest::collection::vec((0.0f64..1.0, -20.0f64..20.0), 1..6), t in 0.1f64..3.0) {
                let mut ts: Vec<f64> = raw.iter().map(|(u, _)| t * (0.001 + 0.998 * u)).collect();
                ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                ts.dedup();
                let xis: Vec<Vec<f64>> = raw.iter().take(ts.len()).map(|(_, x)| vec![*x]).collect();
                let v = chaos_fourier_product(&ts, &xis, t).unwrap();
                let mut bound = 1.0;
                for k in 0..ts.len() {
                    let next = if k + 1 < ts.len() { ts[k + 1] } else { t };
                    bound *= next - ts[k];
                }
                prop_assert!(v.abs() <= bound * (1.0 + 1e-12));
            }

            #[test]
            fn upper_bound_monotone_in_t(t in 0.01f64..2.0, n in 1usize..5) {
                let mu = SpatialMeasure::riesz(0.7, 2, crate::covariance::Normalization::Unit).unwrap();
                let g = TemporalCovariance::fractional(0.6).unwrap();
                let a = alpha_upper_bound(n, t, &mu, &g, 1.0).unwrap();
                let b = alpha_upper_bound(n, t * 1.1, &mu, &g, 1.0).unwrap();
                prop_assert!(a >= 0.0 && b > a);
            }
        }
    }
}
