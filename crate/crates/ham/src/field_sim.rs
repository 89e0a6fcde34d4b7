//! Random-feature simulation of the linear wave solution as a Gaussian field.
//!
//! The field is `v(t,x) = Σ_k 2 Re(w_k a_k TF(t, τ_k, |ξ_k|) e^{iξ_k·x})`, one term per
//! ± pair of frequencies, with `a_k` standard complex Gaussians. Frequencies are drawn
//! by importance sampling from an envelope of `|TF|² ν μ` and the weights `w_k` undo the
//! sampling density, so the covariance is unbiased for the truncated spectral integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{SpatialMeasure, TemporalCovariance};
use crate::error::{HamError, Result};
use crate::wave_kernel::sinc;

/// Minimum share of the envelope mass the truncation must keep.
pub const REQUIRED_MASS: f64 = 0.99;
/// Replicates per RNG stream; fixed so results do not depend on the worker count.
const BATCH: usize = 128;
/// Probability of drawing τ from the resonance ridge `τ ≈ ±|ξ|`.
const RIDGE_WEIGHT: f64 = 0.5;
const SMALL_M: f64 = 0.05;

/// `∫_0^t u^n e^{iτu} du`.
fn power_moment(n: u32, tau: f64, t: f64) -> Complex64 {
    if (tau * t).abs() <= 1.0 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut p = Complex64::new(t.powi(n as i32 + 1), 0.0);
        for k in 0..60u32 {
            let term = p / (n + k + 1) as f64;
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
            p *= Complex64::new(0.0, tau * t) / (k + 1) as f64;
        }
        return sum;
    }
    let i_tau = Complex64::new(0.0, tau);
    let edge = Complex64::from_polar(1.0, tau * t);
    let mut m = (edge - 1.0) / i_tau;
    for j in 1..=n {
        m = (edge * t.powi(j as i32) - m * j as f64) / i_tau;
    }
    m
}

/// `∫_0^t e^{iau} du = t e^{iat/2} sinc(at/2)`, smooth through a = 0.
fn phase_integral(a: f64, t: f64) -> Complex64 {
    Complex64::from_polar(t * sinc(a * t / 2.0), a * t / 2.0)
}

/// `∫_0^t e^{-iτs} sin((t-s)m)/m ds`, the time integral of the wave kernel's transform
/// against a temporal plane wave.
pub fn time_factor(t: f64, tau: f64, m: f64) -> Complex64 {
    let outer = Complex64::from_polar(1.0, -tau * t);
    if m * t < SMALL_M {
        // sin(mu)/m = Σ (-m²)^j u^{2j+1}/(2j+1)!
        let mut sum = Complex64::new(0.0, 0.0);
        let mut c = 1.0;
        for j in 0..4u32 {
            sum += power_moment(2 * j + 1, tau, t) * c;
            c *= -m * m / ((2 * j + 2) as f64 * (2 * j + 3) as f64);
        }
        return outer * sum;
    }
    let diff = phase_integral(tau + m, t) - phase_integral(tau - m, t);
    outer * diff / Complex64::new(0.0, 2.0 * m)
}

/// Piecewise power-law density on `[0, hi]`.
#[derive(Debug, Clone)]
struct PowerLaw {
    pieces: Vec<Piece>,
    total: f64,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    coef: f64,
    exp: f64,
    mass: f64,
}

impl PowerLaw {
    /// `shape(mid)` gives `(coef, exponent)` of the segment containing `mid`.
    fn new<F: Fn(f64) -> (f64, f64)>(breaks: &[f64], shape: F) -> Self {
        let mut pieces = Vec::with_capacity(breaks.len());
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let (coef, exp) = shape(0.5 * (lo + hi));
            let e1 = exp + 1.0;
            let mass = if e1.abs() < 1e-12 {
                coef * (hi / lo).ln()
            } else {
                coef * (hi.powf(e1) - lo.powf(e1)) / e1
            };
            pieces.push(Piece { lo, hi, coef, exp, mass });
        }
        let total = pieces.iter().map(|p| p.mass).sum();
        PowerLaw { pieces, total }
    }

    fn density(&self, x: f64) -> f64 {
        for p in &self.pieces {
            if x >= p.lo && x <= p.hi {
                return p.coef * x.powf(p.exp) / self.total;
            }
        }
        0.0
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>() * self.total;
        let mut piece = self.pieces[self.pieces.len() - 1];
        for p in &self.pieces {
            if u < p.mass {
                piece = *p;
                break;
            }
            u -= p.mass;
        }
        // (0, 1] keeps x away from a singular origin
        let v = 1.0 - rng.random::<f64>();
        let Piece { lo, hi, exp, .. } = piece;
        let e1 = exp + 1.0;
        let x = if e1.abs() < 1e-12 {
            lo * (hi / lo).powf(v)
        } else {
            let (a, b) = (lo.powf(e1), hi.powf(e1));
            (a + v * (b - a)).powf(1.0 / e1)
        };
        x.clamp(lo, hi)
    }
}

/// Cauchy(center, scale) restricted to `[-cut, cut]`.
#[derive(Debug, Clone, Copy)]
struct Ridge {
    center: f64,
    scale: f64,
    cut: f64,
}

impl Ridge {
    fn cdf(&self, x: f64) -> f64 {
        0.5 + ((x - self.center) / self.scale).atan() / PI
    }

    fn mass(&self) -> f64 {
        self.cdf(self.cut) - self.cdf(-self.cut)
    }

    fn density(&self, x: f64) -> f64 {
        if x.abs() > self.cut {
            return 0.0;
        }
        let z = (x - self.center) / self.scale;
        1.0 / (PI * self.scale * (1.0 + z * z) * self.mass())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = self.cdf(-self.cut) + rng.random::<f64>() * self.mass();
        (self.center + self.scale * (PI * (u - 0.5)).tan()).clamp(-self.cut, self.cut)
    }
}

/// Spectral cutoffs `|τ| ≤ tau_max`, `|ξ| ≤ xi_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Truncation {
    pub tau_max: f64,
    pub xi_max: f64,
}

/// Shares of the envelopes `∫ min(t², |ξ|^{-2}) μ(dξ)` and `∫ min(t², τ^{-2}) ν(dτ)`
/// kept by a truncation, `t` being the grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    pub t_envelope: f64,
    pub tau_max: f64,
    pub xi_max: f64,
    pub xi_mass_fraction: f64,
    pub tau_mass_fraction: f64,
    /// Smallest radii reaching `REQUIRED_MASS` of each envelope.
    pub xi_required: f64,
    pub tau_required: f64,
}

/// Radial envelope mass of `min(t², r^{-2}) r^{α-1}` on `[0, r]`, without `ω_d C`.
fn xi_envelope_mass(alpha: f64, t: f64, r: f64) -> f64 {
    let knee = 1.0 / t;
    if r <= knee {
        t * t * r.powf(alpha) / alpha
    } else {
        t.powf(2.0 - alpha) / alpha + (t.powf(2.0 - alpha) - r.powf(alpha - 2.0)) / (2.0 - alpha)
    }
}

fn xi_envelope_total(alpha: f64, t: f64) -> f64 {
    t.powf(2.0 - alpha) * (1.0 / alpha + 1.0 / (2.0 - alpha))
}

/// One-sided `∫_T^∞ τ^{-2} ν(dτ)` for `T ≥ 1/t`.
fn tau_tail(gamma: &TemporalCovariance, big: f64) -> f64 {
    match *gamma {
        TemporalCovariance::Fractional { h } => {
            crate::covariance::fractional_spectral_constant(h) * big.powf(-2.0 * h) / (2.0 * h)
        }
        TemporalCovariance::Exponential { lambda } => {
            // (2/λ²)(x - atan x), x = λ/T
            let x = lambda / big;
            let gap = if x < 1e-2 {
                x * x * x * (1.0 / 3.0 - x * x / 5.0 + x.powi(4) / 7.0)
            } else {
                x - x.atan()
            };
            2.0 * gap / (lambda * lambda)
        }
    }
}

/// One-sided `t² ∫_0^{a} ν(dτ)` for `a ≤ 1/t`.
fn tau_head(gamma: &TemporalCovariance, t: f64, a: f64) -> f64 {
    match *gamma {
        TemporalCovariance::Fractional { h } => {
            let e = 2.0 - 2.0 * h;
            t * t * crate::covariance::fractional_spectral_constant(h) * a.powf(e) / e
        }
        TemporalCovariance::Exponential { lambda } => 2.0 * t * t * (a / lambda).atan(),
    }
}

fn tau_envelope_mass(gamma: &TemporalCovariance, t: f64, big: f64) -> f64 {
    let knee = 1.0 / t;
    if big <= knee {
        tau_head(gamma, t, big)
    } else {
        tau_head(gamma, t, knee) + tau_tail(gamma, knee) - tau_tail(gamma, big)
    }
}

fn tau_envelope_total(gamma: &TemporalCovariance, t: f64) -> f64 {
    let knee = 1.0 / t;
    tau_head(gamma, t, knee) + tau_tail(gamma, knee)
}

fn bisect_radius<F: Fn(f64) -> f64>(frac: F, lo: f64, target: f64) -> f64 {
    let (mut a, mut b) = (lo, lo);
    while frac(b) < target {
        b *= 2.0;
        if b > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let m = (a * b).sqrt();
        if frac(m) >= target {
            b = m;
        } else {
            a = m;
        }
        if b - a <= 1e-13 * b {
            break;
        }
    }
    b
}

/// Smallest radii holding `fraction` of each envelope. τ is at least ξ so that the
/// resonance ridge `|τ| = |ξ|` is not cut.
pub fn default_truncation(
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    t: f64,
    fraction: f64,
) -> Result<Truncation> {
    if !(t > 0.0) {
        return Err(HamError::InvalidParameter(format!("envelope time t = {t} must be positive")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HamError::InvalidParameter(format!(
            "truncation mass fraction {fraction} outside (0, 1)"
        )));
    }
    let r = required_radii(mu, gamma, t, fraction);
    Ok(Truncation {
        tau_max: r.1.max(r.0),
        xi_max: r.0,
    })
}

fn required_radii(mu: &SpatialMeasure, gamma: &TemporalCovariance, t: f64, fraction: f64) -> (f64, f64) {
    let a = mu.alpha();
    let xi_total = xi_envelope_total(a, t);
    let xi = ((1.0 - fraction) * (2.0 - a) * xi_total).powf(1.0 / (a - 2.0));
    let tau_total = tau_envelope_total(gamma, t);
    let tau = bisect_radius(|b| tau_envelope_mass(gamma, t, b) / tau_total, 1.0 / t, fraction);
    (xi.max(1.0 / t), tau)
}

/// Envelope shares kept by `trunc` at horizon `t`; refuses below `REQUIRED_MASS`.
pub fn check_truncation(
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    t: f64,
    trunc: Truncation,
) -> Result<TruncationReport> {
    if !(trunc.tau_max > 0.0 && trunc.xi_max > 0.0) {
        return Err(HamError::InvalidParameter(format!(
            "truncation radii must be positive, got tau_max = {}, xi_max = {}",
            trunc.tau_max, trunc.xi_max
        )));
    }
    let a = mu.alpha();
    let (xi_required, tau_required) = required_radii(mu, gamma, t, REQUIRED_MASS);
    let report = TruncationReport {
        t_envelope: t,
        tau_max: trunc.tau_max,
        xi_max: trunc.xi_max,
        xi_mass_fraction: xi_envelope_mass(a, t, trunc.xi_max) / xi_envelope_total(a, t),
        tau_mass_fraction: tau_envelope_mass(gamma, t, trunc.tau_max) / tau_envelope_total(gamma, t),
        xi_required,
        tau_required,
    };
    if report.xi_mass_fraction < REQUIRED_MASS || report.tau_mass_fraction < REQUIRED_MASS {
        return Err(HamError::Refused(format!(
            "truncation keeps {:.4} of the ξ envelope and {:.4} of the τ envelope; need {REQUIRED_MASS}: use xi_max >= {xi_required}, tau_max >= {tau_required}",
            report.xi_mass_fraction, report.tau_mass_fraction
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feature {
    pub tau: f64,
    pub xi: Vec<f64>,
    /// Amplitude weight w_k.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    /// Number of ± frequency pairs.
    pub n_features: usize,
    pub n_replicates: usize,
    pub seed: u64,
    /// Defaults to `default_truncation` at `REQUIRED_MASS`.
    pub truncation: Option<Truncation>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            n_features: 8192,
            n_replicates: 10_000,
            seed: 0,
            truncation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDiagnostics {
    pub truncation: TruncationReport,
    pub ridge_weight: f64,
    /// Exact variance of the feature field at each time, given the drawn features.
    pub feature_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub times: Vec<f64>,
    pub sites: Vec<Vec<f64>>,
    /// Replicate-major: `values[r * times.len() * sites.len() + it * sites.len() + is]`.
    pub values: Vec<f64>,
    pub n_replicates: usize,
    pub n_features: usize,
    pub truncation: Truncation,
    pub seed: u64,
    pub diagnostics: FieldDiagnostics,
}

impl FieldGrid {
    pub fn n_points(&self) -> usize {
        self.times.len() * self.sites.len()
    }

    pub fn value(&self, r: usize, it: usize, is: usize) -> f64 {
        self.values[r * self.n_points() + it * self.sites.len() + is]
    }

    /// All replicates at one grid point.
    pub fn column(&self, it: usize, is: usize) -> Vec<f64> {
        (0..self.n_replicates).map(|r| self.value(r, it, is)).collect()
    }
}

/// Finest scale the grid resolves: the smallest positive gap between grid times or
/// sites, capped at the final time. Truncation radii are set at this scale so that
/// increments between neighbouring grid points keep their high-frequency mass.
pub fn resolution_scale(times: &[f64], sites: &[Vec<f64>]) -> f64 {
    let mut scale = times.last().copied().unwrap_or(0.0);
    for w in times.windows(2) {
        if w[1] > w[0] {
            scale = scale.min(w[1] - w[0]);
        }
    }
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if d > 0.0 {
                scale = scale.min(d);
            }
        }
    }
    scale
}

fn radial_envelope(alpha: f64, t: f64, xi_max: f64) -> PowerLaw {
    let knee = 1.0 / t;
    PowerLaw::new(&[0.0, knee.min(xi_max), xi_max], |x| {
        if x < knee {
            (t * t, alpha - 1.0)
        } else {
            (1.0, alpha - 3.0)
        }
    })
}

/// `min(t², τ^{-2})` times a power-law profile of ν, on `[0, tau_max]`.
fn temporal_envelope(gamma: &TemporalCovariance, t: f64, tau_max: f64) -> PowerLaw {
    let knee = 1.0 / t;
    let mut breaks = vec![0.0, knee];
    if let TemporalCovariance::Exponential { lambda } = *gamma {
        breaks.push(lambda);
    }
    breaks.push(tau_max);
    breaks.retain(|&b| b <= tau_max);
    breaks.sort_by(f64::total_cmp);
    PowerLaw::new(&breaks, |x| {
        let (c_env, e_env) = if x < knee { (t * t, 0.0) } else { (1.0, -2.0) };
        let (c_nu, e_nu) = match *gamma {
            TemporalCovariance::Fractional { h } => (1.0, 1.0 - 2.0 * h),
            TemporalCovariance::Exponential { lambda } => {
                if x < lambda {
                    (1.0, 0.0)
                } else {
                    (lambda * lambda, -2.0)
                }
            }
        };
        (c_env * c_nu, e_env + e_nu)
    })
}

/// Equal-weight mixture of envelope densities.
fn mixture_sample<R: Rng>(parts: &[PowerLaw], rng: &mut R) -> f64 {
    parts[rng.random_range(0..parts.len())].sample(rng)
}

fn mixture_density(parts: &[PowerLaw], x: f64) -> f64 {
    parts.iter().map(|p| p.density(x)).sum::<f64>() / parts.len() as f64
}

/// Draws the feature table from stream 0. The importance density mixes envelopes at
/// each horizon in `scales` (the final time and the grid resolution), so that both
/// the variance and the finest increments are sampled efficiently.
pub fn sample_features(
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    scales: &[f64],
    trunc: Truncation,
    n_features: usize,
    seed: u64,
) -> Vec<Feature> {
    let d = mu.dim();
    let alpha = mu.alpha();
    let radial: Vec<PowerLaw> = scales.iter().map(|&t| radial_envelope(alpha, t, trunc.xi_max)).collect();
    let temporal: Vec<PowerLaw> = scales.iter().map(|&t| temporal_envelope(gamma, t, trunc.tau_max)).collect();
    let ridge_scale = 1.0 / scales[0];
    // ν μ / p in polar coordinates: μ(dξ) = C r^{α-1} dr dσ, p = p_r(r)/ω_d
    let mu_ratio = |r: f64| mu.radial_prefactor() * r.powf(alpha - 1.0) / mixture_density(&radial, r);
    let norm = (2.0 * PI).powi(-(d as i32) - 1) / (2.0 * n_features as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut out = Vec::with_capacity(n_features);
    while out.len() < n_features {
        let r = mixture_sample(&radial, &mut rng);
        let xi = direction(&mut rng, d).into_iter().map(|u| u * r).collect::<Vec<_>>();
        let ridges = [
            Ridge { center: r, scale: ridge_scale, cut: trunc.tau_max },
            Ridge { center: -r, scale: ridge_scale, cut: trunc.tau_max },
        ];
        let tau = if rng.random::<f64>() < RIDGE_WEIGHT {
            ridges[rng.random_range(0..2)].sample(&mut rng)
        } else {
            let a = mixture_sample(&temporal, &mut rng);
            if rng.random::<bool>() {
                a
            } else {
                -a
            }
        };
        let q = (1.0 - RIDGE_WEIGHT) * mixture_density(&temporal, tau.abs()) / 2.0
            + RIDGE_WEIGHT * 0.5 * (ridges[0].density(tau) + ridges[1].density(tau));
        let w2 = norm * gamma.nu_density(tau) * mu_ratio(r) / q;
        if !(w2.is_finite() && w2 >= 0.0) {
            continue;
        }
        out.push(Feature { tau, xi, weight: w2.sqrt() });
    }
    out
}

fn direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::covariance::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Simulates `n_replicates` independent copies of the feature field on `times × sites`.
pub fn simulate_field(
    mu: &SpatialMeasure,
    gamma: &TemporalCovariance,
    times: &[f64],
    sites: &[Vec<f64>],
    cfg: &FieldConfig,
) -> Result<FieldGrid> {
    mu.validate()?;
    gamma.validate()?;
    let d = mu.dim();
    if times.is_empty() || sites.is_empty() {
        return Err(HamError::InvalidParameter("time and site grids must be non-empty".into()));
    }
    if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(HamError::InvalidParameter(format!("grid time {bad} must be finite and >= 0")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(HamError::InvalidParameter("grid times must be sorted".into()));
    }
    if let Some(s) = sites.iter().find(|s| s.len() != d || s.iter().any(|x| !x.is_finite())) {
        return Err(HamError::InvalidParameter(format!(
            "site {s:?} is not a finite point of R^{d}"
        )));
    }
    if cfg.n_features == 0 || cfg.n_replicates == 0 {
        return Err(HamError::InvalidParameter("n_features and n_replicates must be positive".into()));
    }
    let t_env = times[times.len() - 1];
    if !(t_env > 0.0) {
        return Err(HamError::InvalidParameter("the time grid needs a positive time".into()));
    }
    let scale = resolution_scale(times, sites);
    let trunc = match cfg.truncation {
        Some(tr) => tr,
        None => default_truncation(mu, gamma, scale, REQUIRED_MASS)?,
    };
    let report = check_truncation(mu, gamma, scale, trunc)?;
    let scales: Vec<f64> = if scale < t_env { vec![t_env, scale] } else { vec![t_env] };
    let features = sample_features(mu, gamma, &scales, trunc, cfg.n_features, cfg.seed);

    // coefficient rows: v = Σ_k (Re c_k g1 - Im c_k g2), c_k = √2 w_k TF e^{iξ·x}
    let nt = times.len();
    let ns = sites.len();
    let k = features.len();
    let mut coef = vec![0.0; nt * ns * 2 * k];
    let mut feature_variance = vec![0.0; nt];
    for (it, &t) in times.iter().enumerate() {
        for (j, f) in features.iter().enumerate() {
            let tf = time_factor(t, f.tau, crate::covariance::norm(&f.xi));
            feature_variance[it] += 2.0 * f.weight * f.weight * tf.norm_sqr();
            for (is, x) in sites.iter().enumerate() {
                let phase: f64 = f.xi.iter().zip(x).map(|(a, b)| a * b).sum();
                let c = tf * Complex64::from_polar(2f64.sqrt() * f.weight, phase);
                let row = (it * ns + is) * 2 * k;
                coef[row + 2 * j] = c.re;
                coef[row + 2 * j + 1] = -c.im;
            }
        }
    }
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(HamError::Numerical("non-finite feature coefficient".into()));
    }

    let p = nt * ns;
    let batches = cfg.n_replicates.div_ceil(BATCH);
    let chunks: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64 + 1);
            let count = BATCH.min(cfg.n_replicates - b * BATCH);
            let mut g = vec![0.0; 2 * k];
            let mut out = Vec::with_capacity(count * p);
            for _ in 0..count {
                for v in g.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for row in coef.chunks_exact(2 * k) {
                    out.push(row.iter().zip(&g).map(|(c, z)| c * z).sum());
                }
            }
            out
        })
        .collect();
    let values: Vec<f64> = chunks.concat();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HamError::Numerical("non-finite field value".into()));
    }
    Ok(FieldGrid {
        times: times.to_vec(),
        sites: sites.to_vec(),
        values,
        n_replicates: cfg.n_replicates,
        n_features: k,
        truncation: trunc,
        seed: cfg.seed,
        diagnostics: FieldDiagnostics {
            truncation: report,
            ridge_weight: RIDGE_WEIGHT,
            feature_variance,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    /// (time index, site index) of each row/column.
    pub points: Vec<(usize, usize)>,
    pub cov: Vec<Vec<f64>>,
    /// Jackknife standard errors; infinite with two replicates.
    pub std_error: Vec<Vec<f64>>,
}

/// Unbiased sample covariance of `(x, y)` and its jackknife standard error.
fn cov_with_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (a - mx, b - my);
        sx += a;
        sy += b;
        sxy += a * b;
    }
    let cov = (sxy - sx * sy / n) / (n - 1.0);
    if x.len() < 3 {
        return (cov, f64::INFINITY);
    }
    let loo: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let (a, b) = (a - mx, b - my);
            ((sxy - a * b) - (sx - a) * (sy - b) / (n - 1.0)) / (n - 2.0)
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / n;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (n - 1.0) / n;
    (cov, var.sqrt())
}

pub fn empirical_covariance(grid: &FieldGrid, points: &[(usize, usize)]) -> Result<CovarianceMatrix> {
    if grid.n_replicates < 2 {
        return Err(HamError::InvalidParameter(
            "covariance needs at least 2 replicates".into(),
        ));
    }
    if let Some(p) = points
        .iter()
        .find(|(it, is)| *it >= grid.times.len() || *is >= grid.sites.len())
    {
        return Err(HamError::InvalidParameter(format!("grid point {p:?} out of range")));
    }
    let cols: Vec<Vec<f64>> = points.iter().map(|&(it, is)| grid.column(it, is)).collect();
    let n = points.len();
    let mut cov = vec![vec![0.0; n]; n];
    let mut se = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let (c, s) = cov_with_se(&cols[i], &cols[j]);
            cov[i][j] = c;
            cov[j][i] = c;
            se[i][j] = s;
            se[j][i] = s;
        }
    }
    Ok(CovarianceMatrix {
        points: points.to_vec(),
        cov,
        std_error: se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IncrementMode {
    Time,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementSample {
    pub scale: f64,
    pub moment: f64,
    pub std_error: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Empirical `E|Δv|²` for shifts of the base point `(times[it], sites[is])`. Space
/// shifts move along the first coordinate.
pub fn increment_samples(
    grid: &FieldGrid,
    mode: IncrementMode,
    base: (usize, usize),
    shifts: &[f64],
) -> Result<Vec<IncrementSample>> {
    let (it, is) = base;
    if it >= grid.times.len() || is >= grid.sites.len() {
        return Err(HamError::InvalidParameter(format!("base point {base:?} out of range")));
    }
    let locate = |h: f64| -> Result<(usize, usize)> {
        match mode {
            IncrementMode::Time => {
                let target = grid.times[it] + h;
                grid.times
                    .iter()
                    .position(|&t| close(t, target))
                    .map(|j| (j, is))
                    .ok_or_else(|| HamError::InvalidParameter(format!("grid lacks time {target}")))
            }
            IncrementMode::Space => {
                let mut target = grid.sites[is].clone();
                target[0] += h;
                grid.sites
                    .iter()
                    .position(|s| s.iter().zip(&target).all(|(a, b)| close(*a, *b)))
                    .map(|j| (it, j))
                    .ok_or_else(|| HamError::InvalidParameter(format!("grid lacks site {target:?}")))
            }
        }
    };
    let n = grid.n_replicates as f64;
    shifts
        .iter()
        .map(|&h| {
            let (jt, js) = locate(h)?;
            let sq: Vec<f64> = (0..grid.n_replicates)
                .map(|r| (grid.value(r, jt, js) - grid.value(r, it, is)).powi(2))
                .collect();
            let moment = sq.iter().sum::<f64>() / n;
            let std_error = if grid.n_replicates > 1 {
                (sq.iter().map(|v| (v - moment).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::INFINITY
            };
            Ok(IncrementSample {
                scale: h.abs(),
                moment,
                std_error,
            })
        })
        .collect()
}
