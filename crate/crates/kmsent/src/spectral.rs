//! Sampled spectral densities on symmetric frequency grids and their
//! convolution powers.
//!
//! The l-th order contribution to any second-order quantity is an integral of
//! a smooth kernel against the l-fold convolution of the single-line density.
//! Densities are sampled on a uniform grid over [-R, R]; the l-fold
//! convolution lives on [-lR, lR] at the same step, computed by FFT with full
//! (untruncated) support so the trapezoid mass factorizes exactly.

use crate::error::{Error, Result};
use crate::functionals::MAX_ORDER;
use crate::quad;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Uniform symmetric sampling of a single-line spectral density.
///
/// `values[i]` is the density at `-half_range + i * step`; the point count is
/// odd so zero frequency is a grid point.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    half_range: f64,
    step: f64,
    values: Vec<f64>,
}

impl SpectralGrid {
    /// Sample `density` on [-half_range, half_range] with `n` panels
    /// (n + 1 points, n even).
    pub fn sample<F: Fn(f64) -> f64>(density: F, half_range: f64, n: usize) -> Result<Self> {
        if !(half_range.is_finite() && half_range > 0.0) {
            return Err(Error::Config(format!(
                "grid half range must be positive, got {half_range}"
            )));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "grid needs an even panel count >= 16, got {n}"
            )));
        }
        let step = 2.0 * half_range / n as f64;
        let values: Vec<f64> = (0..=n)
            .map(|i| density(-half_range + i as f64 * step))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("density produced a non-finite sample".into()));
        }
        if let Some(&v) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain(format!("density must be nonnegative, got {v}")));
        }
        let grid = Self { half_range, step, values };
        grid.check_even()?;
        Ok(grid)
    }

    /// Sample with a mass-stability check: the trapezoid mass at half the
    /// resolution must agree within `tol` relative, otherwise the grid is too
    /// coarse for the requested density.
    pub fn sample_checked<F: Fn(f64) -> f64>(
        density: F,
        half_range: f64,
        n: usize,
        tol: f64,
    ) -> Result<Self> {
        let coarse = Self::sample(&density, half_range, n / 2)?;
        let fine = Self::sample(&density, half_range, n)?;
        let (mc, mf) = (coarse.mass(), fine.mass());
        if (mc - mf).abs() > tol * mf.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Resolution(format!(
                "grid mass not stable under refinement: {mc:.12e} vs {mf:.12e}"
            )));
        }
        Ok(fine)
    }

    fn check_even(&self) -> Result<()> {
        let max = self.values.iter().cloned().fold(0.0_f64, f64::max);
        let n = self.values.len();
        for i in 0..n / 2 {
            if (self.values[i] - self.values[n - 1 - i]).abs() > 1e-12 * max {
                return Err(Error::Domain(format!(
                    "density is not even at |nu| = {}",
                    self.half_range - i as f64 * self.step
                )));
            }
        }
        Ok(())
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid mass of the sampled density.
    pub fn mass(&self) -> f64 {
        quad::trapezoid_sum(&self.values, self.step)
    }
}

/// l-fold convolution of a sampled density, on [-l R, l R] at the parent step.
#[derive(Debug, Clone)]
pub struct ConvolvedDensity {
    order: usize,
    half_range: f64,
    step: f64,
    values: Vec<f64>,
}

impl ConvolvedDensity {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequency(&self, i: usize) -> f64 {
        -self.half_range + i as f64 * self.step
    }

    /// Trapezoid integral of `kernel(f) * mu_l(f)` over the support.
    pub fn integrate<K: Fn(f64) -> f64>(&self, kernel: K) -> f64 {
        let n = self.values.len();
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * v * kernel(self.frequency(i));
        }
        acc * self.step
    }

    pub fn mass(&self) -> f64 {
        quad::trapezoid_sum(&self.values, self.step)
    }
}

/// Full linear convolution of two sampled functions (integral approximation:
/// the result is scaled by the step).
fn fft_convolve(a: &[f64], b: &[f64], step: f64) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(size, Complex64::new(0.0, 0.0));
    fb.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = step / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Build the l-fold convolution power of a sampled density.
///
/// The convolution of nonnegative data is nonnegative; FFT roundoff may leave
/// entries at the -1e-16-relative level, which are clamped to zero (anything
/// materially negative is reported, not clamped). The trapezoid mass must
/// factorize as mass(rho)^l within 0.1%.
pub fn convolve_density(grid: &SpectralGrid, order: usize) -> Result<ConvolvedDensity> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(format!(
            "convolution order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let mut values = grid.values().to_vec();
    for _ in 1..order {
        values = fft_convolve(&values, grid.values(), grid.step());
    }
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 * max {
                return Err(Error::Resolution(format!(
                    "convolution produced a materially negative value {v:.3e} (max {max:.3e})"
                )));
            }
            *v = 0.0;
        }
    }
    let out = ConvolvedDensity {
        order,
        half_range: order as f64 * grid.half_range(),
        step: grid.step(),
        values,
    };
    let expected = grid.mass().powi(order as i32);
    if (out.mass() - expected).abs() > 1e-3 * expected.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Resolution(format!(
            "convolution mass {:.9e} deviates from mass(rho)^{order} = {expected:.9e}",
            out.mass()
        )));
    }
    Ok(out)
}
