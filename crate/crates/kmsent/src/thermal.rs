//! Scalar building blocks of the thermal two-point function.
//!
//! Everything here is per-line data for the momentum-space expansion of a
//! massive scalar field in equilibrium at inverse temperature beta: the
//! on-shell Boltzmann-type weight, the detailed-balance residual of the
//! Fourier weight, the hyperbolic kernels produced by simplex integrals of
//! imaginary-time exponentials, and the single-line spectral density obtained
//! by collapsing the radial momentum integral onto the frequency axis.

use crate::error::{Error, Result};

/// Inverse temperature, mass and truncation order shared by all field-side
/// computations. The perturbative machinery is quadratic in the interaction,
/// so `lambda_order` must be at least 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    beta: f64,
    mass: f64,
    lambda_order: u32,
}

impl ThermalParams {
    pub fn new(beta: f64, mass: f64, lambda_order: u32) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        if lambda_order < 2 {
            return Err(Error::UnsupportedOrder(format!(
                "expansion order must be >= 2 (quadratic), got {lambda_order}"
            )));
        }
        Ok(Self { beta, mass, lambda_order })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn lambda_order(&self) -> u32 {
        self.lambda_order
    }
}

/// A point on the mass shell: signed frequency `nu` with |nu| >= mass and the
/// radial momentum `k = sqrt(nu^2 - mass^2)` that goes with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnShellPoint {
    frequency: f64,
    momentum_mag: f64,
}

impl OnShellPoint {
    pub fn from_frequency(nu: f64, params: &ThermalParams) -> Result<Self> {
        if !nu.is_finite() || nu.abs() < params.mass {
            return Err(Error::Domain(format!(
                "frequency {nu} is inside the mass gap (mass {})",
                params.mass
            )));
        }
        Ok(Self {
            frequency: nu,
            momentum_mag: (nu * nu - params.mass * params.mass).sqrt(),
        })
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn momentum_mag(&self) -> f64 {
        self.momentum_mag
    }
}

/// sinh(x)/x with a Taylor branch below `SINH_RATIO_EPS`.
///
/// The crossover is machine-eps^(1/4); both branches agree to ~1e-15 there
/// (the x^4 Taylor term is itself at machine precision).
const SINH_RATIO_EPS: f64 = 1.22e-4;

fn sinh_ratio(x: f64) -> f64 {
    if x.abs() < SINH_RATIO_EPS {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// On-shell per-line weight `e^{-beta w/2} / (2 w (1 - e^{-beta w}))`,
/// evaluated through the equivalent stable form `1 / (4 w sinh(beta w/2))`.
///
/// `w` is the on-shell energy, so anything below the mass is rejected.
pub fn boltzmann_weight(w: f64, params: &ThermalParams) -> Result<f64> {
    if !w.is_finite() || w < params.mass {
        return Err(Error::Domain(format!(
            "on-shell energy {w} below mass {}",
            params.mass
        )));
    }
    Ok(1.0 / (4.0 * w * (0.5 * params.beta * w).sinh()))
}

/// Fourier weight of the thermal two-point function on a fixed shell:
/// `W(p0) = sign(p0) / (1 - e^{-beta p0})`, positive on both branches.
fn fourier_weight(p0: f64, beta: f64) -> f64 {
    if p0 > 0.0 {
        1.0 / (1.0 - (-beta * p0).exp())
    } else {
        // sign(p0) = -1 and 1 - e^{-beta p0} = -(e^{beta|p0|} - 1)
        1.0 / (beta * p0.abs()).exp_m1()
    }
}

/// Detailed-balance defect `|W(p0) - e^{beta p0} W(-p0)|` of the Fourier
/// weight; exactly zero in real arithmetic, so the returned value is pure
/// floating-point noise. The magnitude of the spatial momentum is accepted
/// for call-site symmetry but the weight does not depend on it.
pub fn detailed_balance_residual(p0: f64, _pvec_mag: f64, params: &ThermalParams) -> Result<f64> {
    if !p0.is_finite() || p0 == 0.0 {
        return Err(Error::Domain(
            "detailed balance residual needs a nonzero frequency".into(),
        ));
    }
    let lhs = fourier_weight(p0, params.beta);
    let rhs = (params.beta * p0).exp() * fourier_weight(-p0, params.beta);
    Ok((lhs - rhs).abs())
}

/// Static kernel `beta * sinh(beta f / 2) / f`, the symmetrized double-simplex
/// integral of the imaginary-time exponential. Smooth through f = 0 where it
/// equals beta^2 / 2.
pub fn sinh_kernel(f: f64, params: &ThermalParams) -> f64 {
    let b = params.beta;
    0.5 * b * b * sinh_ratio(0.5 * b * f)
}

/// The two simplex integrals of `e^{-u a}` against the thermal length beta:
/// single line `int_0^beta e^{-u a + beta a/2} du = 2 sinh(beta a/2)/a`, and
/// the even part of the double simplex, `beta sinh(beta a/2)/a`. The odd
/// remainder of the double simplex cancels against even spectral densities
/// and is not represented.
pub fn simplex_exp_integrals(a: f64, beta: f64) -> Result<(f64, f64)> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if !a.is_finite() {
        return Err(Error::Domain("exponent rate must be finite".into()));
    }
    let r = sinh_ratio(0.5 * beta * a);
    Ok((beta * r, 0.5 * beta * beta * r))
}

/// Single-line spectral density on the frequency axis.
///
/// Collapsing `(2pi)^-3 d^3p` onto the shell at signed frequency `nu` (the
/// radial Jacobian `k^2 dk = k w dw` cancels the `2w` in the line weight)
/// leaves
///
/// ```text
/// rho(nu) = (2pi)^-3 * 4 pi k(nu) * e^{-beta|nu|/2} / (2 (1 - e^{-beta|nu|})) * ghat(k)^2
/// ```
///
/// supported on |nu| >= mass, even in nu, and zero inside the gap. `ghat` is
/// the radial momentum profile of the interaction vertex.
pub fn single_line_density<G: Fn(f64) -> f64>(nu: f64, ghat: G, params: &ThermalParams) -> f64 {
    let w = nu.abs();
    if w < params.mass {
        return 0.0;
    }
    let k = (w * w - params.mass * params.mass).sqrt();
    let g = ghat(k);
    let line = 1.0 / (4.0 * (0.5 * params.beta * w).sinh());
    (2.0 * std::f64::consts::PI).powi(-3) * 4.0 * std::f64::consts::PI * k * line * g * g
}
