//! Fundamental solutions of the wave and heat equations.

use std::f64::consts::PI;

use crate::covariance::norm;
use crate::error::{HamError, Result};
use crate::quad::{adaptive, power_weighted, Tol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Wave,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    pub equation: Equation,
    pub d: usize,
}

impl KernelSpec {
    pub fn wave(d: usize) -> Self {
        KernelSpec {
            equation: Equation::Wave,
            d,
        }
    }

    pub fn heat(d: usize) -> Self {
        KernelSpec {
            equation: Equation::Heat,
            d,
        }
    }
}

const TAYLOR_CUTOFF: f64 = 1e-4;

/// `sin(t r)/r`, continuous at r = 0 where it equals t.
pub fn wave_fourier(t: f64, r: f64) -> f64 {
    let x = t * r;
    if x.abs() < TAYLOR_CUTOFF {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / r
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < TAYLOR_CUTOFF {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Fourier transform of G(t, ·) at |ξ| = r.
pub fn g_fourier(spec: &KernelSpec, t: f64, r: f64) -> f64 {
    match spec.equation {
        Equation::Wave => wave_fourier(t, r),
        Equation::Heat => (-t * r * r / 2.0).exp(),
    }
}

/// Pointwise real-space kernel.
pub fn g_real(spec: &KernelSpec, t: f64, x: &[f64]) -> Result<f64> {
    if x.len() != spec.d {
        return Err(HamError::InvalidParameter(format!(
            "point has dimension {}, kernel has d = {}",
            x.len(),
            spec.d
        )));
    }
    if !(t > 0.0) {
        return Err(HamError::InvalidParameter(format!("time t = {t} must be positive")));
    }
    let r = norm(x);
    match (spec.equation, spec.d) {
        (Equation::Wave, 1) => Ok(if r < t { 0.5 } else { 0.0 }),
        (Equation::Wave, 2) => Ok(if r < t {
            1.0 / (2.0 * PI * (t * t - r * r).sqrt())
        } else {
            0.0
        }),
        (Equation::Wave, d) => Err(HamError::Unsupported(format!(
            "the wave kernel in d = {d} is a distribution; use the Fourier side"
        ))),
        (Equation::Heat, d) => {
            Ok((2.0 * PI * t).powf(-(d as f64) / 2.0) * (-r * r / (2.0 * t)).exp())
        }
    }
}

/// Bessel J0 through its integral representation (1/π)∫_0^π cos(x sin θ) dθ.
fn bessel_j0(x: f64) -> f64 {
    adaptive(&|th: f64| (x * th.sin()).cos(), 0.0, PI, Tol::new(1e-13, 1e-12))
        .map(|e| e.value / PI)
        .unwrap_or(f64::NAN)
}

/// Numerical Fourier transform of `g_real` at radius r, paired with `g_fourier`.
pub fn fourier_identity_check(spec: &KernelSpec, t: f64, r: f64) -> Result<(f64, f64)> {
    if spec.d > 2 {
        return Err(HamError::Unsupported(format!(
            "transform check needs d in {{1, 2}}, got {}",
            spec.d
        )));
    }
    let tol = Tol::new(1e-12, 1e-10);
    let reach = match spec.equation {
        Equation::Wave => t,
        Equation::Heat => (80.0 * t).sqrt(),
    };
    let direct = if spec.d == 1 {
        let f = |x: f64| 2.0 * (r * x).cos() * g_real(spec, t, &[x]).unwrap_or(f64::NAN);
        adaptive(&f, 0.0, reach, tol)
    } else {
        let f = |rho: f64| 2.0 * PI * rho * g_real(spec, t, &[rho, 0.0]).unwrap_or(f64::NAN) * bessel_j0(r * rho);
        match spec.equation {
            // inverse square-root edge at ρ = t
            Equation::Wave => power_weighted(&f, reach, 0.0, -0.5, tol).map(|e| e * -1.0),
            Equation::Heat => adaptive(&f, 0.0, reach, tol),
        }
    }
    .map_err(HamError::quad("kernel transform check"))?;
    Ok((direct.value, g_fourier(spec, t, r)))
}
