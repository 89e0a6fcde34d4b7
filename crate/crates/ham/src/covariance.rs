//! Temporal kernels γ/ν and radial spatial measures μ.
//!
//! Fourier convention: `Fφ(ξ) = ∫ e^{-iξ·x} φ(x) dx`, so that
//! `∫ φ γ = (2π)^{-1} ∫ Fφ ν(dτ)` and `∫ φ f = (2π)^{-d} ∫ Fφ μ(dξ)`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{HamError, Result};
use crate::quad::{adaptive, power_weighted, semi_infinite, Estimate, QuadResult, Tol};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalCovariance {
    /// `γ(t) = H(2H-1)|t|^{2H-2}`, H in (1/2, 1).
    Fractional { h: f64 },
    /// `γ(t) = e^{-λ|t|}`.
    Exponential { lambda: f64 },
}

impl TemporalCovariance {
    pub fn fractional(h: f64) -> Result<Self> {
        let m = TemporalCovariance::Fractional { h };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        let m = TemporalCovariance::Exponential { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TemporalCovariance::Fractional { h } => {
                if !(h > 0.5 && h < 1.0) {
                    return Err(HamError::InvalidParameter(format!(
                        "temporal.H = {h} outside the admissible interval (0.5, 1)"
                    )));
                }
            }
            TemporalCovariance::Exponential { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(HamError::InvalidParameter(format!(
                        "temporal.lambda = {lambda} must be positive and finite"
                    )));
                }
            }
        }
        Ok(())
    }

    /// γ(t); +∞ at the origin for the fractional kernel.
    pub fn gamma_eval(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            TemporalCovariance::Fractional { h } => {
                if a == 0.0 {
                    f64::INFINITY
                } else {
                    h * (2.0 * h - 1.0) * a.powf(2.0 * h - 2.0)
                }
            }
            TemporalCovariance::Exponential { lambda } => (-lambda * a).exp(),
        }
    }

    /// Density of ν with respect to dτ.
    pub fn nu_density(&self, tau: f64) -> f64 {
        let a = tau.abs();
        match *self {
            TemporalCovariance::Fractional { h } => {
                if a == 0.0 {
                    // exponent 1-2H < 0
                    f64::INFINITY
                } else {
                    fractional_spectral_constant(h) * a.powf(1.0 - 2.0 * h)
                }
            }
            TemporalCovariance::Exponential { lambda } => 2.0 * lambda / (lambda * lambda + a * a),
        }
    }

    /// Γ_t = ∫_{-t}^{t} γ(s) ds.
    pub fn gamma_bar(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            TemporalCovariance::Fractional { h } => 2.0 * h * t.powf(2.0 * h - 1.0),
            TemporalCovariance::Exponential { lambda } => 2.0 * (-(-lambda * t).exp_m1()) / lambda,
        }
    }

    /// Exponent p with γ(u) ~ u^p as u → 0+.
    pub fn origin_exponent(&self) -> f64 {
        match *self {
            TemporalCovariance::Fractional { h } => 2.0 * h - 2.0,
            TemporalCovariance::Exponential { .. } => 0.0,
        }
    }

    /// Exponent p with ν(τ) ~ τ^p as τ → 0+.
    pub fn spectral_origin_exponent(&self) -> f64 {
        match *self {
            TemporalCovariance::Fractional { h } => 1.0 - 2.0 * h,
            TemporalCovariance::Exponential { .. } => 0.0,
        }
    }

    /// Exponent q with ν(τ) ~ τ^{-q} as τ → ∞.
    pub fn spectral_decay(&self) -> f64 {
        match *self {
            TemporalCovariance::Fractional { h } => 2.0 * h - 1.0,
            TemporalCovariance::Exponential { .. } => 2.0,
        }
    }

    /// Inverse CDF of |Δ| for the density ∝ γ on [0, t], evaluated at u in [0, 1).
    pub fn gap_quantile(&self, t: f64, u: f64) -> f64 {
        match *self {
            TemporalCovariance::Fractional { h } => t * u.powf(1.0 / (2.0 * h - 1.0)),
            TemporalCovariance::Exponential { lambda } => {
                let mass = -(-lambda * t).exp_m1();
                -(-u * mass).ln_1p() / lambda
            }
        }
    }
}

/// c_H in ν(dτ) = c_H |τ|^{1-2H} dτ.
pub fn fractional_spectral_constant(h: f64) -> f64 {
    gamma_fn(2.0 * h + 1.0) * (PI * h).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Density `|ξ|^{α-d}`.
    Unit,
    /// Density scaled so that the kernel is exactly `|x|^{-α}`.
    Classical,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::Unit => "unit",
            Normalization::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialMeasure {
    /// μ(dξ) = C |ξ|^{α-d} dξ.
    Riesz {
        alpha: f64,
        d: usize,
        normalization: Normalization,
    },
}

/// Surface area of the unit sphere in R^d (ω_1 = 2).
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma_fn(h)
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl SpatialMeasure {
    pub fn riesz(alpha: f64, d: usize, normalization: Normalization) -> Result<Self> {
        let m = SpatialMeasure::Riesz {
            alpha,
            d,
            normalization,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let SpatialMeasure::Riesz {
            alpha,
            d,
            normalization,
        } = *self;
        if d == 0 {
            return Err(HamError::InvalidParameter("spatial.d must be at least 1".into()));
        }
        let df = d as f64;
        if !(alpha > 0.0 && alpha < 2.0 && alpha <= df) {
            return Err(HamError::InvalidParameter(format!(
                "spatial.alpha = {alpha} outside the admissible interval: 0 < alpha < min(2, d) = {} (alpha = d allowed with unit normalization)",
                df.min(2.0)
            )));
        }
        if alpha == df && normalization == Normalization::Classical {
            return Err(HamError::InvalidParameter(format!(
                "spatial.alpha = d = {d} has no classical kernel normalization; use \"unit\""
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        let SpatialMeasure::Riesz { d, .. } = *self;
        d
    }

    pub fn alpha(&self) -> f64 {
        let SpatialMeasure::Riesz { alpha, .. } = *self;
        alpha
    }

    /// True when μ is a multiple of Lebesgue measure (white noise in space).
    pub fn is_white(&self) -> bool {
        self.alpha() == self.dim() as f64
    }

    /// The constant C in front of `|ξ|^{α-d}`.
    pub fn constant(&self) -> f64 {
        let SpatialMeasure::Riesz {
            alpha,
            d,
            normalization,
        } = *self;
        match normalization {
            Normalization::Unit => 1.0,
            Normalization::Classical => classical_riesz_constant(alpha, d),
        }
    }

    /// Density at |ξ| = r.
    pub fn radial_density(&self, r: f64) -> f64 {
        let exponent = self.alpha() - self.dim() as f64;
        if exponent == 0.0 {
            return self.constant();
        }
        if r == 0.0 {
            return f64::INFINITY;
        }
        self.constant() * r.powf(exponent)
    }

    pub fn mu_density(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim());
        self.radial_density(norm(xi))
    }

    /// `ω_d C`, so that `∫ g(|ξ|) μ(dξ) = ω_d C ∫ r^{α-1} g(r) dr`.
    pub fn radial_prefactor(&self) -> f64 {
        sphere_area(self.dim()) * self.constant()
    }

    /// The spatial covariance kernel f at x. For α = d the kernel is a
    /// multiple of the Dirac mass: zero away from the origin.
    pub fn kernel_value(&self, x: &[f64]) -> f64 {
        let SpatialMeasure::Riesz { alpha, d, .. } = *self;
        let r = norm(x);
        if r == 0.0 {
            return f64::INFINITY;
        }
        if self.is_white() {
            return 0.0;
        }
        self.constant() / classical_riesz_constant(alpha, d) * r.powf(-alpha)
    }

    /// `∫ g(|ξ|) μ(dξ)` for an integrand with `g(r) ~ r^{-q}` at infinity.
    pub fn radial_integral<G: Fn(f64) -> f64>(&self, g: &G, q: f64, tol: Tol) -> QuadResult {
        let a = self.alpha();
        let inner = power_weighted(&|r: f64| r.powf(a - 1.0) * g(r), 0.0, 1.0, a - 1.0, tol)?;
        let outer = semi_infinite(&|r: f64| r.powf(a - 1.0) * g(r), 1.0, q + 1.0 - a, tol)?;
        Ok((inner + outer) * self.radial_prefactor())
    }
}

/// `C_{α,d} = 2^{d-α} π^{d/2} Γ((d-α)/2) / Γ(α/2)`, valid for 0 < α < d.
pub fn classical_riesz_constant(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    2f64.powf(df - alpha) * PI.powf(df / 2.0) * gamma_fn((df - alpha) / 2.0) / gamma_fn(alpha / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsevalCheck {
    pub time_side: Estimate,
    pub spectral_side: Estimate,
}

impl ParsevalCheck {
    pub fn relative_gap(&self) -> f64 {
        let t = self.time_side.value;
        if t == 0.0 {
            (self.spectral_side.value).abs()
        } else {
            (t - self.spectral_side.value).abs() / t.abs()
        }
    }
}

const PARSEVAL_PERIODS: usize = 64;

/// Both sides of the energy identity for the indicator of `[a, b]`:
/// `∫∫ γ(t-s) dt ds` versus `(2π)^{-1} ∫ |F1_{[a,b]}|² dν`.
pub fn parseval_check(model: &TemporalCovariance, a: f64, b: f64) -> Result<ParsevalCheck> {
    if !(a <= b) {
        return Err(HamError::InvalidParameter(format!("window [{a}, {b}] is reversed")));
    }
    let len = b - a;
    if len == 0.0 {
        return Ok(ParsevalCheck {
            time_side: Estimate::zero(),
            spectral_side: Estimate::zero(),
        });
    }
    let tol = Tol::new(1e-13, 1e-10);
    let time = power_weighted(
        &|u: f64| 2.0 * (len - u) * model.gamma_eval(u),
        0.0,
        len,
        model.origin_exponent(),
        tol,
    )
    .map_err(HamError::quad("parseval time side"))?;

    // (1/π) ∫_0^∞ 4 sin²(τL/2)/τ² ν(τ) dτ
    let integrand = |tau: f64| {
        let s = (0.5 * tau * len).sin();
        4.0 * s * s / (tau * tau) * model.nu_density(tau) / PI
    };
    let period = 2.0 * PI / len;
    let mut spectral = power_weighted(
        &integrand,
        0.0,
        period,
        model.spectral_origin_exponent(),
        tol,
    )
    .map_err(HamError::quad("parseval spectral side"))?;
    let chunk = 8;
    let mut k = 1;
    while k < PARSEVAL_PERIODS {
        let lo = k as f64 * period;
        let hi = ((k + chunk).min(PARSEVAL_PERIODS)) as f64 * period;
        spectral = spectral
            + adaptive(&integrand, lo, hi, tol).map_err(HamError::quad("parseval spectral side"))?;
        k += chunk;
    }
    // Tail: sin² = (1 - cos τL)/2. The non-oscillating half is integrated
    // directly; the cosine half is reduced by parts at a multiple of the
    // period to -g'(T)/L² with g = ν/τ².
    let cut = PARSEVAL_PERIODS as f64 * period;
    let g = |tau: f64| model.nu_density(tau) / (tau * tau);
    let smooth = semi_infinite(&|tau: f64| 2.0 * g(tau) / PI, cut, 2.0 + model.spectral_decay(), tol)
        .map_err(HamError::quad("parseval spectral tail"))?;
    let step = cut * 1e-4;
    let dg = (g(cut + step) - g(cut - step)) / (2.0 * step);
    let oscillating = -2.0 / PI * (-dg / (len * len));
    spectral = spectral + smooth;
    spectral.value += oscillating;
    spectral.error += oscillating.abs() * 1e-2;
    Ok(ParsevalCheck {
        time_side: time,
        spectral_side: spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn gamma_eval_examples() {
        let f = TemporalCovariance::fractional(0.75).unwrap();
        assert!(close(f.gamma_eval(1.0), 0.375, 1e-15));
        assert_eq!(f.gamma_eval(0.0), f64::INFINITY);
        let e = TemporalCovariance::exponential(1.0).unwrap();
        assert_eq!(e.gamma_eval(0.0), 1.0);
        assert_eq!(f.gamma_eval(-0.3), f.gamma_eval(0.3));
    }

    #[test]
    fn nu_density_exponential_inverts() {
        let e = TemporalCovariance::exponential(1.0).unwrap();
        assert_eq!(e.nu_density(0.0), 2.0);
        // γ(t) = (1/π) ∫_0^∞ cos(τt) ν(τ) dτ, checked at t = 0 and t = 0.7
        let at0 = adaptive(&|x: f64| e.nu_density(x) / PI, 0.0, 1.0, Tol::RADIAL).unwrap().value
            + semi_infinite(&|x: f64| e.nu_density(x) / PI, 1.0, 2.0, Tol::RADIAL).unwrap().value;
        assert!(close(at0, 1.0, 1e-9));
        let t = 0.7;
        let mut s = 0.0;
        let p = 2.0 * PI / t;
        for k in 0..400 {
            s += adaptive(
                &|x: f64| (x * t).cos() * e.nu_density(x) / PI,
                k as f64 * p,
                (k + 1) as f64 * p,
                Tol::new(1e-14, 1e-12),
            )
            .unwrap()
            .value;
        }
        assert!((s - (-t).exp()).abs() < 1e-5);
    }

    #[test]
    fn gamma_bar_closed_forms() {
        let f = TemporalCovariance::fractional(0.75).unwrap();
        assert!(close(f.gamma_bar(1.0), 1.5, 1e-15));
        let q = power_weighted(&|s: f64| 2.0 * f.gamma_eval(s), 0.0, 1.0, -0.5, Tol::RADIAL).unwrap();
        assert!(close(q.value, 1.5, 1e-9));
        let e = TemporalCovariance::exponential(2.0).unwrap();
        assert!(close(e.gamma_bar(1.0), 0.8646647167633873, 1e-14));
        let q = adaptive(&|s: f64| 2.0 * e.gamma_eval(s), 0.0, 1.0, Tol::RADIAL).unwrap();
        assert!(close(q.value, e.gamma_bar(1.0), 1e-12));
        assert_eq!(f.gamma_bar(0.0), 0.0);
        assert_eq!(e.gamma_bar(0.0), 0.0);
    }

    #[test]
    fn mu_density_examples() {
        let m = SpatialMeasure::riesz(1.0, 1, Normalization::Unit).unwrap();
        assert_eq!(m.mu_density(&[2.0]), 1.0);
        let m = SpatialMeasure::riesz(1.0, 2, Normalization::Unit).unwrap();
        assert!(close(m.mu_density(&[3.0, 4.0]), 0.2, 1e-15));
        let m = SpatialMeasure::riesz(0.5, 1, Normalization::Unit).unwrap();
        assert_eq!(m.mu_density(&[0.0]), f64::INFINITY);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(TemporalCovariance::fractional(0.5).is_err());
        assert!(TemporalCovariance::fractional(1.0).is_err());
        assert!(TemporalCovariance::exponential(0.0).is_err());
        assert!(SpatialMeasure::riesz(2.5, 3, Normalization::Unit).is_err());
        assert!(SpatialMeasure::riesz(1.5, 1, Normalization::Unit).is_err());
        assert!(SpatialMeasure::riesz(1.0, 1, Normalization::Classical).is_err());
        assert!(SpatialMeasure::riesz(1.0, 1, Normalization::Unit).is_ok());
    }

    #[test]
    fn parseval_windows() {
        let f = TemporalCovariance::fractional(0.75).unwrap();
        let c = parseval_check(&f, 0.0, 1.0).unwrap();
        assert!(close(c.time_side.value, 1.0, 1e-9));
        assert!(c.relative_gap() < 1e-3);
        let c = parseval_check(&f, 0.5, 2.0).unwrap();
        assert!(close(c.time_side.value, 1.5f64.powf(1.5), 1e-9));
        assert!(c.relative_gap() < 1e-3);
        let e = TemporalCovariance::exponential(1.0).unwrap();
        let c = parseval_check(&e, 0.0, 1.0).unwrap();
        assert!(close(c.time_side.value, 2.0 / std::f64::consts::E, 1e-9));
        assert!(c.relative_gap() < 1e-3);
        let c = parseval_check(&e, 0.5, 2.0).unwrap();
        assert!(c.relative_gap() < 1e-3);
        let c = parseval_check(&e, 0.3, 0.3).unwrap();
        assert_eq!((c.time_side.value, c.spectral_side.value), (0.0, 0.0));
    }

    #[test]
    fn parseval_other_hurst_values() {
        for h in [0.55, 0.65, 0.9] {
            let f = TemporalCovariance::fractional(h).unwrap();
            let c = parseval_check(&f, 0.0, 2.0).unwrap();
            assert!(close(c.time_side.value, 2f64.powf(2.0 * h), 1e-8), "H = {h}");
            assert!(c.relative_gap() < 1e-3, "H = {h}: {c:?}");
        }
    }

    #[test]
    fn classical_constant_matches_gaussian_pairing() {
        // ∫ e^{-|x|²/2} |x|^{-α} dx against (2π)^{-d} ∫ (2π)^{d/2} e^{-|ξ|²/2} μ(dξ)
        for (alpha, d) in [(0.5, 1), (0.3, 1), (1.0, 2), (1.5, 2), (0.7, 3), (1.9, 3)] {
            let m = SpatialMeasure::riesz(alpha, d, Normalization::Classical).unwrap();
            let df = d as f64;
            let w = sphere_area(d);
            let lhs = w
                * (power_weighted(
                    &|r: f64| r.powf(df - 1.0 - alpha) * (-r * r / 2.0).exp(),
                    0.0,
                    1.0,
                    df - 1.0 - alpha,
                    Tol::RADIAL,
                )
                .unwrap()
                .value
                    + adaptive(
                        &|r: f64| r.powf(df - 1.0 - alpha) * (-r * r / 2.0).exp(),
                        1.0,
                        40.0,
                        Tol::RADIAL,
                    )
                    .unwrap()
                    .value);
            let rhs = (2.0 * PI).powf(-df / 2.0)
                * m.radial_integral(&|r: f64| (-r * r / 2.0).exp(), f64::INFINITY, Tol::RADIAL).unwrap().value;
            assert!(close(lhs, rhs, 1e-7), "alpha {alpha} d {d}: {lhs} vs {rhs}");
            assert!(close(m.kernel_value(&[1.0; 3][..d]), df.powf(-alpha / 2.0), 1e-12));
        }
    }

    #[test]
    fn sphere_areas() {
        assert!(close(sphere_area(1), 2.0, 1e-15));
        assert!(close(sphere_area(2), 2.0 * PI, 1e-15));
        assert!(close(sphere_area(3), 4.0 * PI, 1e-13));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gamma_symmetric(h in 0.51f64..0.99, lambda in 0.01f64..10.0, t in -50.0f64..50.0) {
                let f = TemporalCovariance::Fractional { h };
                let e = TemporalCovariance::Exponential { lambda };
                prop_assert_eq!(f.gamma_eval(t), f.gamma_eval(-t));
                prop_assert_eq!(e.gamma_eval(t), e.gamma_eval(-t));
                prop_assert!(f.gamma_eval(t) >= 0.0 && e.gamma_eval(t) >= 0.0);
                prop_assert_eq!(f.nu_density(t), f.nu_density(-t));
                prop_assert_eq!(e.nu_density(t), e.nu_density(-t));
                prop_assert!(f.nu_density(t) >= 0.0 && e.nu_density(t) >= 0.0);
            }

            #[test]
            fn gamma_bar_increasing(h in 0.51f64..0.99, lambda in 0.01f64..10.0, t1 in 1e-3f64..20.0, dt in 1e-3f64..20.0) {
                let f = TemporalCovariance::Fractional { h };
                let e = TemporalCovariance::Exponential { lambda };
                prop_assert!(f.gamma_bar(t1) < f.gamma_bar(t1 + dt));
                prop_assert!(e.gamma_bar(t1) <= e.gamma_bar(t1 + dt));
                prop_assert!(f.gamma_bar(t1) > 0.0 && e.gamma_bar(t1) > 0.0);
            }

            #[test]
            fn mu_density_radial(alpha in 0.05f64..1.95, theta in 0.0f64..std::f64::consts::TAU, phi in 0.0f64..std::f64::consts::PI, r in 1e-3f64..1e3) {
                let m = SpatialMeasure::Riesz { alpha, d: 3, normalization: Normalization::Unit };
                let a = m.mu_density(&[r, 0.0, 0.0]);
                let b = m.mu_density(&[r * phi.sin() * theta.cos(), r * phi.sin() * theta.sin(), r * phi.cos()]);
                prop_assert!((a - b).abs() <= 1e-14 * a);
                let m2 = SpatialMeasure::Riesz { alpha: alpha.min(1.9), d: 2, normalization: Normalization::Unit };
                let a = m2.mu_density(&[r, 0.0]);
                let b = m2.mu_density(&[r * theta.cos(), r * theta.sin()]);
                prop_assert!((a - b).abs() <= 1e-14 * a);
            }
        }
    }
}
