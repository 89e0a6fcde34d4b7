//! Spectral integrability conditions and the shift inequalities behind the
//! existence proof.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma as gamma_fn;

use crate::covariance::{norm, sphere_area, SpatialMeasure};
use crate::error::{HamError, Result};
use crate::quad::{adaptive, power_weighted, semi_infinite, Estimate, QuadError, QuadResult, Tol};

/// A possibly divergent integral with its quadrature diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralValue {
    pub value: f64,
    pub finite: bool,
    pub converged: bool,
    pub error: f64,
    /// Analytic reason for divergence, when `finite` is false.
    pub divergence: Option<String>,
}

impl IntegralValue {
    fn divergent(reason: String) -> Self {
        IntegralValue {
            value: f64::INFINITY,
            finite: false,
            converged: true,
            error: 0.0,
            divergence: Some(reason),
        }
    }

    fn from_quad(r: QuadResult) -> Result<Self> {
        match r {
            Ok(Estimate { value, error }) => Ok(IntegralValue {
                value,
                finite: true,
                converged: true,
                error,
                divergence: None,
            }),
            Err(QuadError::NotConverged { value, error }) => Ok(IntegralValue {
                value,
                finite: true,
                converged: false,
                error,
                divergence: None,
            }),
            Err(e) => Err(HamError::quad("spectral integral")(e)),
        }
    }
}

/// Divergence test for `∫ (1+|ξ|²)^{-β} μ(dξ)` from the density exponents.
fn beta_divergence(mu: &SpatialMeasure, beta: f64) -> Option<String> {
    let alpha = mu.alpha();
    if alpha <= 0.0 {
        return Some(format!("density exponent alpha - d = {} is not integrable at the origin", alpha - mu.dim() as f64));
    }
    if 2.0 * beta <= alpha {
        return Some(format!(
            "radial tail r^(alpha - 1 - 2 beta) = r^{} is not integrable at infinity",
            alpha - 1.0 - 2.0 * beta
        ));
    }
    None
}

fn beta_integral(mu: &SpatialMeasure, beta: f64) -> Result<IntegralValue> {
    if let Some(reason) = beta_divergence(mu, beta) {
        return Ok(IntegralValue::divergent(reason));
    }
    let r = mu.radial_integral(&|r: f64| (1.0 + r * r).powf(-beta), 2.0 * beta, Tol::RADIAL);
    IntegralValue::from_quad(r)
}

/// `∫ (1+|ξ|²)^{-1} μ(dξ)`.
pub fn dalang_integral(mu: &SpatialMeasure) -> Result<IntegralValue> {
    beta_integral(mu, 1.0)
}

/// `∫ (1+|ξ|²)^{-β} μ(dξ)` for β in (0, 1].
pub fn holder_integral(mu: &SpatialMeasure, beta: f64) -> Result<IntegralValue> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(HamError::InvalidParameter(format!("beta = {beta} outside (0, 1)")));
    }
    beta_integral(mu, beta)
}

/// `∫ g(|ξ + η|) μ(dξ)` for a smooth, non-oscillating radial profile `g`
/// decaying like `r^{-q}`.
fn shifted_smooth<G: Fn(f64) -> f64 + Sync>(
    mu: &SpatialMeasure,
    eta: &[f64],
    g: &G,
    q: f64,
    tol: Tol,
) -> QuadResult {
    let alpha = mu.alpha();
    let c = mu.constant();
    let s = norm(eta);
    if mu.dim() == 1 {
        // orient the shift so that the bump of g sits at ξ = -s ≤ 0
        let rho = |x: f64| c * x.abs().powf(alpha - 1.0);
        let f = |x: f64| rho(x) * g((x + s).abs());
        let half = s + 1.0;
        let lo = -s - half;
        let hi = -s + half;
        let mut total = Estimate::zero();
        // [lo, -s], [-s, 0] with the power at 0, [0, hi] with the power at 0
        total = total + adaptive(&f, lo, -s, tol)?;
        total = total + power_weighted(&f, 0.0, -s, alpha - 1.0, tol)? * -1.0;
        total = total + power_weighted(&f, 0.0, hi, alpha - 1.0, tol)?;
        let decay = q + 1.0 - alpha;
        total = total + semi_infinite(&f, hi, decay, tol)?;
        total = total + semi_infinite(&|x: f64| f(-x), -lo, decay, tol)?;
        return Ok(total);
    }
    let d = mu.dim();
    let df = d as f64;
    let sphere = sphere_area(d - 1);
    let inner_tol = Tol::new(tol.abs * 1e-3, tol.rel * 1e-3);
    let radial = |r: f64| -> f64 {
        if s == 0.0 {
            return sphere_area(d) * g(r);
        }
        let th = |theta: f64| {
            let w = (df - 2.0) as i32;
            let arg = (r * r + 2.0 * r * s * theta.cos() + s * s).max(0.0).sqrt();
            theta.sin().powi(w) * g(arg)
        };
        match adaptive(&th, 0.0, PI, inner_tol) {
            Ok(e) => sphere * e.value,
            Err(QuadError::NotConverged { value, .. }) => sphere * value,
            Err(_) => f64::NAN,
        }
    };
    let f = |r: f64| c * r.powf(alpha - 1.0) * radial(r);
    let mut total = Estimate::zero();
    let knee = if s > 0.0 { s } else { 1.0 };
    total = total + power_weighted(&f, 0.0, knee, alpha - 1.0, tol)?;
    total = total + adaptive(&f, knee, knee + 1.0, tol)?;
    total = total + semi_infinite(&f, knee + 1.0, q + 1.0 - alpha, tol)?;
    Ok(total)
}

/// `∫ (1+|ξ+η|²)^{-β} μ(dξ)`.
pub fn shifted_beta_integral(mu: &SpatialMeasure, beta: f64, eta: &[f64]) -> Result<IntegralValue> {
    if eta.len() != mu.dim() {
        return Err(HamError::InvalidParameter(format!(
            "shift has dimension {}, measure has d = {}",
            eta.len(),
            mu.dim()
        )));
    }
    if !(beta > 0.0) {
        return Err(HamError::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    if let Some(reason) = beta_divergence(mu, beta) {
        return Ok(IntegralValue::divergent(reason));
    }
    if norm(eta) == 0.0 {
        return beta_integral(mu, beta);
    }
    let tol = if mu.dim() == 1 {
        Tol::new(1e-12, 1e-10)
    } else {
        Tol::new(1e-12, 1e-8)
    };
    let r = shifted_smooth(mu, eta, &|u: f64| (1.0 + u * u).powf(-beta), 2.0 * beta, tol);
    IntegralValue::from_quad(r)
}

/// `∫ (1 - cos(ω|ξ+η|)) / |ξ+η|² μ(dξ)`.
///
/// In d = 1 the profile is half the Fourier transform of the triangle
/// `(ω - |k|)_+`, which turns the oscillatory integral over R into a compact
/// one: `2 C Γ(α) cos(πα/2) ∫_0^ω (ω-k) k^{-α} cos(k η) dk` (and `π C ω`
/// for α = 1). For d ≥ 2 only η = 0 is available, through the closed form
/// `ω_d C κ_α ω^{2-α}`.
pub fn cosine_gap_integral(mu: &SpatialMeasure, omega: f64, eta: &[f64]) -> Result<f64> {
    let omega = omega.abs();
    if omega == 0.0 {
        return Ok(0.0);
    }
    let alpha = mu.alpha();
    let c = mu.constant();
    let s = norm(eta);
    if s == 0.0 {
        return Ok(mu.radial_prefactor() * power_cosine_constant(alpha) * omega.powf(2.0 - alpha));
    }
    if mu.dim() != 1 {
        return Err(HamError::Unsupported(format!(
            "oscillatory shifted integrals with eta != 0 are implemented for d = 1 only (d = {})",
            mu.dim()
        )));
    }
    if alpha == 1.0 {
        return Ok(PI * c * omega);
    }
    let s = eta[0];
    let f = |k: f64| (omega - k) * k.powf(-alpha) * (k * s).cos();
    let tol = Tol::new(1e-13, 1e-11).with_budget(20000);
    let v = power_weighted(&f, 0.0, omega, -alpha, tol).map_err(HamError::quad("cosine gap integral"))?;
    Ok(2.0 * c * gamma_fn(alpha) * (PI * alpha / 2.0).cos() * v.value)
}

/// `κ_α = ∫_0^∞ m^{α-3}(1 - cos m) dm = π / (2 Γ(3-α) sin(πα/2))`.
pub fn power_cosine_constant(alpha: f64) -> f64 {
    PI / (2.0 * gamma_fn(3.0 - alpha) * (PI * alpha / 2.0).sin())
}

/// `∫ |FG(t,·)(ξ+η)|² μ(dξ)` for the wave kernel.
pub fn shifted_wave_energy(mu: &SpatialMeasure, t: f64, eta: &[f64]) -> Result<f64> {
    Ok(0.5 * cosine_gap_integral(mu, 2.0 * t, eta)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub beta: f64,
    pub base: f64,
    pub values: Vec<f64>,
    pub violations: usize,
    /// Largest relative excess `(I(η) - I(0)) / I(0)`, negative when every
    /// shift strictly decreases the integral.
    pub max_excess: f64,
    pub tolerance: f64,
}

/// Checks `I(η) ≤ I(0)` over a grid of shifts, with `I` the shifted β-integral.
pub fn max_principle_verify(mu: &SpatialMeasure, beta: f64, eta_grid: &[Vec<f64>]) -> Result<MaxPrincipleReport> {
    let tolerance = 1e-6;
    let base = shifted_beta_integral(mu, beta, &vec![0.0; mu.dim()])?;
    if !base.finite {
        return Err(HamError::Refused(format!(
            "the beta = {beta} integral diverges; the maximum principle is vacuous"
        )));
    }
    let values: Vec<Result<IntegralValue>> = eta_grid
        .par_iter()
        .map(|eta| shifted_beta_integral(mu, beta, eta))
        .collect();
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        out.push(v?.value);
    }
    let excesses: Vec<f64> = out.iter().map(|v| (v - base.value) / base.value).collect();
    let violations = excesses.iter().filter(|e| **e > tolerance).count();
    let max_excess = excesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxPrincipleReport {
        beta,
        base: base.value,
        values: out,
        violations,
        max_excess: if eta_grid.is_empty() { 0.0 } else { max_excess },
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupBoundRow {
    pub eta: Vec<f64>,
    pub lhs: f64,
    pub margin_scaled: f64,
    pub margin_dalang: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupBoundReport {
    pub t: f64,
    /// `4t² ∫ (1+t²|ξ|²)^{-1} μ(dξ)`.
    pub rhs_scaled: f64,
    /// `2(t² ∨ 1) ∫ (1+|ξ|²)^{-1} μ(dξ)`.
    pub rhs_dalang: f64,
    pub rows: Vec<SupBoundRow>,
    pub violations: usize,
}

/// Energy of the shifted wave kernel against both upper bounds.
pub fn sup_bound_check(mu: &SpatialMeasure, t: f64, eta_grid: &[Vec<f64>]) -> Result<SupBoundReport> {
    if !(t > 0.0) {
        return Err(HamError::InvalidParameter(format!("t = {t} must be positive")));
    }
    let dalang = dalang_integral(mu)?;
    if !dalang.finite {
        return Err(HamError::Refused("the spectral measure fails the integrability condition".into()));
    }
    let scaled = mu
        .radial_integral(&|r: f64| 1.0 / (1.0 + t * t * r * r), 2.0, Tol::RADIAL)
        .map_err(HamError::quad("scaled bound"))?;
    let rhs_scaled = 4.0 * t * t * scaled.value;
    let rhs_dalang = 2.0 * (t * t).max(1.0) * dalang.value;
    let rows: Vec<Result<SupBoundRow>> = eta_grid
        .par_iter()
        .map(|eta| {
            let lhs = shifted_wave_energy(mu, t, eta)?;
            Ok(SupBoundRow {
                eta: eta.clone(),
                lhs,
                margin_scaled: rhs_scaled - lhs,
                margin_dalang: rhs_dalang - lhs,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = rows
        .iter()
        .filter(|r| r.margin_scaled < 0.0 || r.margin_dalang < 0.0)
        .count();
    Ok(SupBoundReport {
        t,
        rhs_scaled,
        rhs_dalang,
        rows,
        violations,
    })
}

/// Default shift grid: `{0, ±0.5, ±1, ±2, ±5}` in d = 1, otherwise 8
/// directions in the first coordinate plane times radii `{0.5, 1, 2, 5}`.
pub fn default_eta_grid(d: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        return [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0]
            .iter()
            .map(|v| vec![*v])
            .collect();
    }
    let mut grid = Vec::new();
    for k in 0..8 {
        let a = k as f64 * PI / 4.0;
        for r in [0.5, 1.0, 2.0, 5.0] {
            let mut e = vec![0.0; d];
            e[0] = r * a.cos();
            e[1] = r * a.sin();
            grid.push(e);
        }
    }
    grid
}
