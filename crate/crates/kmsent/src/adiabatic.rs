//! Volume-normalized quantities: van Hove cutoff sequences, the per-unit-volume
//! relative entropy obtained in the infinite-volume (density) limit, and the
//! 1/t decay of the entropy production density toward the stationary state.
//!
//! The density mode replaces the squared cutoff Fourier factor `|h_hat(sum p)|^2`
//! divided by the cutoff volume with a momentum-conservation constraint
//! `sum_j p_j = 0`. At interaction order l = 1 that is a point evaluation at
//! zero momentum (total frequency +-m); at l = 2 it is a one-dimensional radial
//! integral over back-to-back momenta with total frequency in {+-2w(k), 0}.
//! `vanhove_density_series` keeps the finite-volume factor and verifies
//! numerically that the normalized sequence converges to the density-mode
//! value, which is the whole content of the volume limit at l = 1.

use crate::error::{Error, Result};
use crate::functionals::{combine, GaussianProfile, SharedProfileFunctional};
use crate::quad;
use crate::thermal::{sinh_kernel, ThermalParams};
use std::f64::consts::PI;

/// Ramp width used when no explicit value is given. Wide enough that the
/// smoothing visibly tames the Fourier tail (six orders of decay between
/// q = 1 and q = 20 at n = 3), narrow enough that the cutoff volume stays
/// within 15% of the plateau ball at n = 8.
pub const DEFAULT_RAMP_WIDTH: f64 = 0.5;

const RADIAL_PANELS: usize = 4096;
const VOLUME_RAMP_PANELS: usize = 1024;
const FOURIER_RAMP_PANELS: usize = 256;

/// Quintic step with vanishing first and second derivatives at both ends.
fn smootherstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

/// Radially symmetric cutoff: identically 1 inside radius `n`, a C^2 monotone
/// descent on `[n, n + ramp_width]`, identically 0 outside. `ramp_width` never
/// exceeds 1, so the support stays inside the ball of radius n + 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanHoveCutoff {
    n: u32,
    ramp_width: f64,
}

impl VanHoveCutoff {
    pub fn new(n: u32, ramp_width: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cutoff inner radius must be positive".into()));
        }
        if !(ramp_width > 0.0 && ramp_width <= 1.0) {
            return Err(Error::Domain(format!(
                "ramp width must lie in (0, 1], got {ramp_width}"
            )));
        }
        Ok(Self { n, ramp_width })
    }

    pub fn with_default_ramp(n: u32) -> Result<Self> {
        Self::new(n, DEFAULT_RAMP_WIDTH)
    }

    /// Degenerate sharp ball of radius n (no ramp). The discontinuity at the
    /// boundary makes this useless as an actual cutoff sequence; it exists
    /// because the ball has closed-form volume and Fourier transform, which
    /// the tests use as oracles.
    pub fn sharp_ball(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cutoff inner radius must be positive".into()));
        }
        Ok(Self { n, ramp_width: 0.0 })
    }

    pub fn inner_radius(&self) -> u32 {
        self.n
    }

    pub fn ramp_width(&self) -> f64 {
        self.ramp_width
    }

    pub fn outer_radius(&self) -> f64 {
        f64::from(self.n) + self.ramp_width
    }

    /// The radial profile h(r).
    pub fn profile(&self, r: f64) -> f64 {
        let n = f64::from(self.n);
        if r <= n {
            1.0
        } else if self.ramp_width == 0.0 || r >= n + self.ramp_width {
            0.0
        } else {
            1.0 - smootherstep((r - n) / self.ramp_width)
        }
    }
}

/// Simpson value of `integral_n^{n+w} r^2 (1 - step) dr`, split out so the
/// refinement test can double the panel count.
fn ramp_volume_integral(h: &VanHoveCutoff, panels: usize) -> f64 {
    if h.ramp_width == 0.0 {
        return 0.0;
    }
    let n = f64::from(h.n);
    quad::simpson(&|r| r * r * h.profile(r), n, n + h.ramp_width, panels)
}

/// I(h) = integral of h over R^3 = 4 pi integral_0^{n+1} r^2 h(r) dr.
/// The plateau contributes (4 pi / 3) n^3 exactly; the ramp is quadrature.
pub fn cutoff_volume(h: &VanHoveCutoff) -> f64 {
    let n = f64::from(h.n);
    4.0 * PI * (n * n * n / 3.0 + ramp_volume_integral(h, VOLUME_RAMP_PANELS))
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Radial Fourier transform h_hat(q) = (4 pi / q) integral r sin(qr) h(r) dr.
/// The plateau part is the ball transform in closed form (Taylor branch near
/// q n = 0), the ramp part is an oscillation-resolving Simpson rule.
fn cutoff_fourier(h: &VanHoveCutoff, q: f64) -> f64 {
    let n = f64::from(h.n);
    let x = q * n;
    let plateau = if x < 0.05 {
        // (sin x - x cos x)/q^3 expanded to avoid cancellation: the leading
        // terms of the series are x^3/3 - x^5/30 + x^7/840.
        n * n * n * (1.0 / 3.0 - x * x / 30.0 + x * x * x * x / 840.0)
    } else {
        (x.sin() - x * x.cos()) / (q * q * q)
    };
    let ramp = if h.ramp_width == 0.0 {
        0.0
    } else {
        let mut panels = FOURIER_RAMP_PANELS.max((q * h.ramp_width * 16.0 / PI).ceil() as usize);
        if panels % 2 == 1 {
            panels += 1;
        }
        quad::simpson(
            &|r| r * r * sinc(q * r) * h.profile(r),
            n,
            n + h.ramp_width,
            panels,
        )
    };
    4.0 * PI * (plateau + ramp)
}

/// |h_hat(q)|^2, the squared radial Fourier transform of the cutoff.
/// Even in q; at q = 0 it equals the squared volume I(h)^2.
pub fn cutoff_fourier_sq(h: &VanHoveCutoff, q: f64) -> f64 {
    let v = cutoff_fourier(h, q.abs());
    v * v
}

/// Per-line thermal weight 1/(4 w sinh(beta w / 2)). Same expression as
/// `thermal::boltzmann_weight` but without the on-shell domain check: here w
/// is on-shell by construction, and at q = 0 rounding in sqrt(q^2 + m^2) may
/// put it a hair below the mass.
fn line_weight(w: f64, params: &ThermalParams) -> f64 {
    1.0 / (4.0 * w * (0.5 * params.beta() * w).sinh())
}

/// B(w)^2 * 2 sinh_kernel(2w) in the overflow-free form beta/(8 w^3 tanh(beta w/2)).
/// The Boltzmann decay of the squared line weight cancels exactly against the
/// sinh growth of the kernel at total frequency 2w, leaving a slowly decaying
/// rational envelope; multiplying the factors separately would produce
/// 0 * inf once sinh overflows.
fn pair_osc_weight(w: f64, params: &ThermalParams) -> f64 {
    let beta = params.beta();
    beta / (8.0 * w * w * w * (0.5 * beta * w).tanh())
}

/// B(w)^2 * 2 sinh_kernel(0) = beta^2 / (16 w^2 sinh^2(beta w/2)); underflows
/// gracefully for large w.
fn pair_zero_weight(w: f64, params: &ThermalParams) -> f64 {
    let beta = params.beta();
    let s = (0.5 * beta * w).sinh();
    beta * beta / (16.0 * w * w * s * s)
}

/// Per-order coefficient combinations entering every density below:
/// `stat[l-1] = (c1_l - c3_l)^2` and `dynp[l-1] = 2 (c1_l - c2_l)(c3_l - c2_l)`,
/// the latter taken from raw products so vanishing cases stay exact.
struct DensityTerms {
    stat: Vec<f64>,
    dynp: Vec<f64>,
}

fn density_terms(
    k1: &SharedProfileFunctional,
    k2: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    max_supported: usize,
    what: &str,
) -> Result<DensityTerms> {
    let fc = combine(k1, k2, k3)?;
    if fc.order_count() > max_supported {
        return Err(Error::UnsupportedOrder(format!(
            "{what} supports interaction order up to {max_supported}, got {}",
            fc.order_count()
        )));
    }
    let stat = fc.diff_coeffs.iter().map(|b| b * b).collect();
    let dynp = (1..=fc.order_count())
        .map(|l| {
            2.0 * (k1.coefficient(l) - k2.coefficient(l)) * (k3.coefficient(l) - k2.coefficient(l))
        })
        .collect();
    Ok(DensityTerms { stat, dynp })
}

/// Kernel at total frequency f for one interaction order:
/// `sinh_kernel(f) * (stat + dynp * (1 - cos f t))`, with the removable f = 0
/// point handled by the Taylor branch of `sinh_kernel` and by
/// `1 - cos = 2 sin^2` evaluating to exactly zero.
fn order_kernel(f: f64, t: f64, stat: f64, dynp: f64, params: &ThermalParams) -> f64 {
    let s = (0.5 * f * t).sin();
    sinh_kernel(f, params) * (stat + dynp * 2.0 * s * s)
}

/// Radial momentum integral shared by every l = 2 density:
/// `(2 pi)^-3 4 pi integral k^2 ghat(k)^4 kernel(w) dk` with w = sqrt(k^2 + m^2),
/// where `kernel` already carries the squared line weight (see the stable
/// pair weights above). Because the thermal decay cancels inside those
/// weights, only the profile cuts the integrand: the range ends where
/// ghat^4 drops below ~1e-31 of its peak. `osc_rate` is the largest
/// d(phase)/dk of any oscillating factor in `kernel` (0 for static kernels);
/// the panel count keeps uniform sampling well above that frequency so the
/// aliasing error stays in the envelope's spectral tail.
fn radial_pair_integral<G: Fn(f64) -> f64>(
    kernel: G,
    profile: &GaussianProfile,
    params: &ThermalParams,
    osc_rate: f64,
    base_panels: usize,
) -> f64 {
    let m = params.mass();
    let kmax = 6.0 * profile.width();
    let mut panels = base_panels.max((kmax * osc_rate * 0.8).ceil() as usize);
    if panels % 2 == 1 {
        panels += 1;
    }
    let integrand = |k: f64| {
        let w = (k * k + m * m).sqrt();
        let gh = profile.eval(k);
        let gh2 = gh * gh;
        k * k * gh2 * gh2 * kernel(w)
    };
    (2.0 * PI).powi(-3) * 4.0 * PI * quad::simpson(&integrand, 0.0, kmax, panels)
}

fn rel_entropy_density_with(
    terms: &DensityTerms,
    profile: &GaussianProfile,
    t: f64,
    params: &ThermalParams,
    panels: usize,
) -> f64 {
    let m = params.mass();
    let g0 = profile.eval(0.0);
    // l = 1: momentum conservation pins the line to p = 0, total frequency
    // +-m; the two signs contribute equally.
    let mut total =
        2.0 * g0 * g0 * line_weight(m, params) * order_kernel(m, t, terms.stat[0], terms.dynp[0], params);
    if terms.stat.len() > 1 {
        // l = 2: back-to-back momenta, equal frequencies w, four sign choices
        // giving total frequency 2w twice and 0 twice; prefactor 1/2!.
        let (s2, d2) = (terms.stat[1], terms.dynp[1]);
        total += 0.5
            * radial_pair_integral(
                |w| {
                    let s = (w * t).sin();
                    pair_osc_weight(w, params) * (s2 + d2 * 2.0 * s * s)
                        + pair_zero_weight(w, params) * s2
                },
                profile,
                params,
                2.0 * t.abs(),
                panels,
            );
    }
    total
}

/// Per-unit-volume relative entropy at second order in the coupling, obtained
/// by replacing the finite-volume vertex factor with exact momentum
/// conservation. Supports interaction orders l = 1 and l = 2.
///
/// Nonnegative up to roundoff: the integrand is a pointwise nonnegative
/// multiple of the same quadratic form as the integrated functional.
pub fn rel_entropy_density(
    k1: &SharedProfileFunctional,
    k2: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    t: f64,
    params: &ThermalParams,
) -> Result<f64> {
    let terms = density_terms(k1, k2, k3, 2, "density mode")?;
    Ok(rel_entropy_density_with(&terms, k1.profile(), t, params, RADIAL_PANELS))
}

/// Convergence record of the finite-volume densities toward the density-mode
/// value.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DensityReport {
    pub n_values: Vec<u32>,
    /// Cutoff volumes I(h_n).
    pub volumes: Vec<f64>,
    /// Normalized entropies S(h_n)/I(h_n).
    pub densities: Vec<f64>,
    /// Intercept of a least-squares fit of density against 1/n over the tail
    /// of the sequence (the finite-size gap empirically scales like 1/n).
    pub limit_estimate: f64,
    /// The momentum-conservation value the sequence should approach.
    pub density_mode_value: f64,
}

/// Finite-volume density sequence S(h_n)/I(h_n) for n = 1..n_max at
/// interaction order l = 1, where the vertex integral is a one-dimensional
/// radial integral against |h_hat_n(q)|^2.
///
/// Fails with a diagnostic error if the gap to the density-mode value grows
/// for three consecutive steps with n >= 3.
pub fn vanhove_density_series(
    k1: &SharedProfileFunctional,
    k2: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    t: f64,
    n_max: u32,
    ramp_width: f64,
    params: &ThermalParams,
) -> Result<DensityReport> {
    let terms = density_terms(k1, k2, k3, 1, "the finite-volume vertex integral")?;
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let profile = k1.profile();
    let m = params.mass();
    let g0 = profile.eval(0.0);
    let (s1, d1) = (terms.stat[0], terms.dynp[0]);
    let density_mode_value =
        2.0 * g0 * g0 * line_weight(m, params) * order_kernel(m, t, s1, d1, params);

    // The thermal decay of the line weight cancels against the sinh growth of
    // the kernel (their product is beta/(4w^2) for the static part), so the q
    // integrand is cut only by the profile or by the ramp rolloff of
    // |h_hat|^2, whichever comes first: the smoothed cutoff transform is
    // negligible beyond q * ramp_width of about 12.
    let qmax = (8.5 * profile.width()).min(12.0 / ramp_width);
    let prefactor = (2.0 * PI).powi(-3) * 4.0 * PI;

    let mut n_values = Vec::with_capacity(n_max as usize);
    let mut volumes = Vec::with_capacity(n_max as usize);
    let mut densities = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let h = VanHoveCutoff::new(n, ramp_width)?;
        let volume = cutoff_volume(&h);
        let qmax = qmax.max(20.0 / h.outer_radius());
        // |h_hat|^2 oscillates at rate 2 (n + ramp) and the dynamic kernel at
        // rate up to |t|; resolve the faster of the two.
        let rate = 2.0 * h.outer_radius() + t.abs();
        let step_target = (2.0 * PI / (40.0 * rate)).min(0.01);
        let mut panels = (qmax / step_target).ceil() as usize;
        if panels % 2 == 1 {
            panels += 1;
        }
        let integrand = |q: f64| {
            let w = (q * q + m * m).sqrt();
            let gh = profile.eval(q);
            q * q
                * cutoff_fourier_sq(&h, q)
                * gh
                * gh
                * line_weight(w, params)
                * 2.0
                * order_kernel(w, t, s1, d1, params)
        };
        let value = prefactor * quad::simpson(&integrand, 0.0, qmax, panels) / volume;
        if !value.is_finite() {
            return Err(Error::Resolution(format!(
                "finite-volume density at n = {n} is not finite"
            )));
        }
        n_values.push(n);
        volumes.push(volume);
        densities.push(value);
    }

    // Non-convergence check: three consecutive gap increases once n >= 3.
    let mut rising = 0u32;
    for i in 1..densities.len() {
        if n_values[i] < 3 {
            continue;
        }
        let prev = (densities[i - 1] - density_mode_value).abs();
        let cur = (densities[i] - density_mode_value).abs();
        if cur > prev {
            rising += 1;
            if rising >= 3 {
                return Err(Error::Diagnostic(format!(
                    "finite-volume densities move away from the density-mode value \
                     for three consecutive steps ending at n = {}",
                    n_values[i]
                )));
            }
        } else {
            rising = 0;
        }
    }

    let limit_estimate = extrapolate_in_inverse_n(&n_values, &densities);
    Ok(DensityReport {
        n_values,
        volumes,
        densities,
        limit_estimate,
        density_mode_value,
    })
}

/// Least-squares intercept of `d = L + a/n` over the tail half of the
/// sequence; falls back to the last entry when there are too few points.
fn extrapolate_in_inverse_n(n_values: &[u32], densities: &[f64]) -> f64 {
    let count = densities.len();
    if count < 3 {
        return densities[count - 1];
    }
    let start = count / 2;
    let xs: Vec<f64> = n_values[start..].iter().map(|&n| 1.0 / f64::from(n)).collect();
    let ys = &densities[start..];
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return densities[count - 1];
    }
    let slope = sxy / sxx;
    my - slope * mx
}

/// Entropy production per unit volume toward the stationary state reached
/// under the perturbed dynamics (second perturbation zero): the ergodic mean
/// e(t) = density_dynamic(t)/t, which the balance identity makes exact at
/// second order. Decays like 1/t because the dynamic density is uniformly
/// bounded.
pub fn ness_entropy_production_density(
    k1: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    t: f64,
    params: &ThermalParams,
) -> Result<f64> {
    let terms = ness_terms(k1, k3)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "entropy production density needs t > 0, got {t}"
        )));
    }
    // Dynamic part only: the time-independent part of the density cancels in
    // density_dynamic(t) - density_dynamic(0).
    let dyn_terms = DensityTerms { stat: vec![0.0; terms.dynp.len()], dynp: terms.dynp };
    Ok(rel_entropy_density_with(&dyn_terms, k1.profile(), t, params, RADIAL_PANELS) / t)
}

fn ness_terms(k1: &SharedProfileFunctional, k3: &SharedProfileFunctional) -> Result<DensityTerms> {
    let zero = SharedProfileFunctional::zero_like(k1);
    density_terms(k1, &zero, k3, 2, "the stationary-state density")
}

/// Explicit uniform bound on |density_dynamic(t)|: every oscillating factor
/// (1 - cos f t) is replaced by 2 and each coefficient product by its absolute
/// value, so `|e(t)| <= bound / t` for all t > 0.
pub fn ness_production_density_bound(
    k1: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    params: &ThermalParams,
) -> Result<f64> {
    let terms = ness_terms(k1, k3)?;
    let profile = k1.profile();
    let m = params.mass();
    let g0 = profile.eval(0.0);
    let mut bound = 2.0
        * g0
        * g0
        * line_weight(m, params)
        * sinh_kernel(m, params)
        * 2.0
        * terms.dynp[0].abs();
    if terms.dynp.len() > 1 {
        let d2 = terms.dynp[1].abs();
        // Only the f = 2w branch oscillates; at f = 0 the dynamic kernel is
        // identically zero, so it contributes nothing to the supremum.
        bound += 0.5
            * radial_pair_integral(
                |w| pair_osc_weight(w, params) * 2.0 * d2,
                profile,
                params,
                0.0,
                RADIAL_PANELS,
            );
    }
    Ok(bound)
}

/// Direct route to the same ergodic mean: adaptive time quadrature of the
/// instantaneous production density (1/t) integral_0^t e_inst(s) ds, where
/// e_inst carries the kernel `sinh_kernel(f) * f * sin(f s)`. Retained as a
/// cross-check of the closed (1 - cos) form.
pub fn ness_density_direct(
    k1: &SharedProfileFunctional,
    k3: &SharedProfileFunctional,
    t: f64,
    params: &ThermalParams,
) -> Result<f64> {
    let terms = ness_terms(k1, k3)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "entropy production density needs t > 0, got {t}"
        )));
    }
    let profile = k1.profile();
    let m = params.mass();
    let g0 = profile.eval(0.0);
    let d1 = terms.dynp[0];
    let d2 = if terms.dynp.len() > 1 { terms.dynp[1] } else { 0.0 };
    let instantaneous = |s: f64| {
        let mut v =
            2.0 * g0 * g0 * line_weight(m, params) * sinh_kernel(m, params) * d1 * m * (m * s).sin();
        if d2 != 0.0 {
            v += 0.5
                * radial_pair_integral(
                    |w| pair_osc_weight(w, params) * d2 * 2.0 * w * (2.0 * w * s).sin(),
                    profile,
                    params,
                    2.0 * t,
                    RADIAL_PANELS,
                );
        }
        v
    };
    let scale = ness_production_density_bound(k1, k3, params)?;
    let integral = quad::adaptive(&instantaneous, 0.0, t, 1e-12 * (1.0 + scale))?;
    Ok(integral / t)
}

/// Power-law fit diagnostics for a decaying positive sequence.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual of the fit in log space.
    pub max_abs_residual: f64,
}

/// Least-squares fit of log|values| against log(ts). Points where the value
/// vanishes are rejected (the fit would be degenerate there).
pub fn fit_loglog_decay(ts: &[f64], values: &[f64]) -> Result<DecayFit> {
    if ts.len() != values.len() {
        return Err(Error::Domain(format!(
            "fit needs matching lengths, got {} abscissae and {} values",
            ts.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > 0.0 && v != 0.0 && v.is_finite())
        .map(|(&t, &v)| (t.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Domain(
            "fit needs at least two positive, nonzero points".into(),
        ));
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("fit abscissae are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = pts
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit { slope, intercept, max_abs_residual })
}
