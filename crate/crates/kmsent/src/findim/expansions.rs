//! Perturbative expansions with exact finite-dimensional coefficients.
//!
//! Three series in the coupling λ: the Heisenberg evolution under H+λP
//! around the free one, the perturbed thermal state, and the log of the
//! partition-function ratio.  Coefficients come out as iterated integrals
//! (simplex-ordered) which are evaluated with Gauss–Legendre rules or, for
//! the evolution, by integrating the cocycle hierarchy with RK4.  Everything
//! can be checked against derivatives of the exact λ-dependent quantity,
//! and `taylor_coefficient_with_step` provides that independent extraction.

use num_complex::Complex64;

use super::connected::connected_function;
use super::series::FormalSeries;
use super::{check_hermitian, evolution_operator, gibbs_state, hermitian_eigen, CMat};
use crate::{quad, Error, Result};

pub const MAX_EVOLUTION_ORDER: usize = 4;
pub const MAX_STATE_ORDER: usize = 3;

/// Gauss–Legendre points per simplex level.  The integrands are entire in
/// the integration variables, so two dozen points is already far below
/// rounding for the β ranges the module targets.
const SIMPLEX_GL_POINTS: usize = 24;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// k-th central difference of f at 0 with step h, normalized by h^k:
/// approximates f^(k)(0) with an even error series in h.
fn central_difference(f: &impl Fn(f64) -> f64, k: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0f64;
    for j in 0..=k {
        let x = (0.5 * k as f64 - j as f64) * h;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x);
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(k as i32)
}

/// k-th Taylor coefficient f^(k)(0)/k! by central differences at steps
/// h, h/2, h/4 with two Richardson eliminations.  The step has to balance
/// truncation against the 2^k/h^k roundoff amplification, which is why the
/// very small steps one would naively pick fail for k ≥ 3; steps in the
/// 0.05–0.1 range keep both error sources below ~1e-8 for functions whose
/// derivative scale is order one.
pub fn taylor_coefficient_with_step(f: &impl Fn(f64) -> f64, k: usize, h: f64) -> f64 {
    if k == 0 {
        return f(0.0);
    }
    let d0 = central_difference(f, k, h);
    let d1 = central_difference(f, k, 0.5 * h);
    let d2 = central_difference(f, k, 0.25 * h);
    let r0 = (4.0 * d1 - d0) / 3.0;
    let r1 = (4.0 * d2 - d1) / 3.0;
    ((16.0 * r1 - r0) / 15.0) / factorial(k)
}

/// Default extraction steps per derivative order; index 0 is unused.
const DEFAULT_TAYLOR_STEPS: [f64; 5] = [0.1, 0.08, 0.07, 0.06, 0.07];

fn default_step(k: usize) -> f64 {
    DEFAULT_TAYLOR_STEPS[k.min(DEFAULT_TAYLOR_STEPS.len() - 1)]
}

/// Taylor coefficients 0..=order of a scalar function, with the default
/// per-order steps.
pub fn taylor_coefficients(f: &impl Fn(f64) -> f64, order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| taylor_coefficient_with_step(f, k, default_step(k)))
        .collect()
}

/// Matrix-valued version of the same extraction (entrywise linearity).
pub fn taylor_matrix_coefficients(f: &impl Fn(f64) -> CMat, order: usize) -> Vec<CMat> {
    let proto = f(0.0);
    (0..=order)
        .map(|k| {
            if k == 0 {
                return proto.clone();
            }
            let h = default_step(k);
            let diff = |step: f64| -> CMat {
                let mut acc = CMat::zeros(proto.nrows(), proto.ncols());
                let mut binom = 1.0f64;
                for j in 0..=k {
                    let x = (0.5 * k as f64 - j as f64) * step;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    acc += f(x) * Complex64::new(sign * binom, 0.0);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                acc * Complex64::new(1.0 / step.powi(k as i32), 0.0)
            };
            let d0 = diff(h);
            let d1 = diff(0.5 * h);
            let d2 = diff(0.25 * h);
            let r0 = (&d1 * Complex64::new(4.0, 0.0) - &d0) * Complex64::new(1.0 / 3.0, 0.0);
            let r1 = (&d2 * Complex64::new(4.0, 0.0) - &d1) * Complex64::new(1.0 / 3.0, 0.0);
            (r1 * Complex64::new(16.0, 0.0) - r0) * Complex64::new(1.0 / (15.0 * factorial(k)), 0.0)
        })
        .collect()
}

/// Orders 0..=order of the Heisenberg evolution e^{it(H+λP)} A e^{-it(H+λP)}
/// as a series in λ.  The coefficients are built from the cocycle hierarchy
///
/// ```text
/// W₀ = 1,   Wₙ(t) = i ∫₀ᵗ Wₙ₋₁(s) P(s) ds,   P(s) = e^{isH} P e^{-isH},
/// ```
///
/// integrated with RK4, and assembled as Σ_{a+b=n} W_a α_t(A) W_b†.
pub fn dyson_evolution(h: &CMat, p: &CMat, a: &CMat, t: f64, order: usize) -> Result<FormalSeries<CMat>> {
    check_hermitian(h, "hamiltonian", 1e-13)?;
    check_hermitian(p, "perturbation", 1e-13)?;
    if order > MAX_EVOLUTION_ORDER {
        return Err(Error::UnsupportedOrder(format!(
            "evolution expansion supports order <= {MAX_EVOLUTION_ORDER}, got {order}"
        )));
    }
    let dim = h.nrows();
    if p.nrows() != dim || a.nrows() != dim || a.ncols() != dim {
        return Err(Error::Domain("operator dimensions must all match".into()));
    }
    if !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {t}")));
    }

    let (vals, vecs) = hermitian_eigen(h);
    let ptil = vecs.adjoint() * p * &vecs;
    // P(s) in the original basis, via phases in the eigenbasis
    let p_at = |s: f64| -> CMat {
        let mut m = ptil.clone();
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] *= Complex64::from_polar(1.0, s * (vals[i] - vals[j]));
            }
        }
        &vecs * m * vecs.adjoint()
    };

    let mut w: Vec<CMat> = vec![CMat::zeros(dim, dim); order];
    if order > 0 && t != 0.0 {
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let rate = (order as f64) * spread + p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() + 1.0;
        let steps = (t.abs() * rate * 96.0).ceil().max(800.0) as usize;
        let dt = t / steps as f64;
        let deriv = |state: &[CMat], ps: &CMat| -> Vec<CMat> {
            (0..order)
                .map(|n| {
                    let prev = if n == 0 { None } else { Some(&state[n - 1]) };
                    match prev {
                        None => ps * I,
                        Some(wp) => wp * ps * I,
                    }
                })
                .collect()
        };
        for step in 0..steps {
            let s0 = step as f64 * dt;
            let p0 = p_at(s0);
            let pm = p_at(s0 + 0.5 * dt);
            let p1 = p_at(s0 + dt);
            let k1 = deriv(&w, &p0);
            let w2: Vec<CMat> = (0..order).map(|n| &w[n] + &k1[n] * Complex64::new(0.5 * dt, 0.0)).collect();
            let k2 = deriv(&w2, &pm);
            let w3: Vec<CMat> = (0..order).map(|n| &w[n] + &k2[n] * Complex64::new(0.5 * dt, 0.0)).collect();
            let k3 = deriv(&w3, &pm);
            let w4: Vec<CMat> = (0..order).map(|n| &w[n] + &k3[n] * Complex64::new(dt, 0.0)).collect();
            let k4 = deriv(&w4, &p1);
            for n in 0..order {
                w[n] += (&k1[n] + &k2[n] * Complex64::new(2.0, 0.0) + &k3[n] * Complex64::new(2.0, 0.0) + &k4[n])
                    * Complex64::new(dt / 6.0, 0.0);
            }
        }
    }

    // e^{itH} A e^{-itH}
    let u_back = evolution_operator(&vals, &vecs, -t);
    let free = &u_back * a * u_back.adjoint();
    let full: Vec<CMat> = std::iter::once(CMat::identity(dim, dim)).chain(w).collect();
    let coeffs: Vec<CMat> = (0..=order)
        .map(|n| {
            let mut acc = CMat::zeros(dim, dim);
            for a_idx in 0..=n {
                acc += &full[a_idx] * &free * full[n - a_idx].adjoint();
            }
            acc
        })
        .collect();
    FormalSeries::new(coeffs)
}

/// ∫ over the ordered simplex 0 ≤ u₁ ≤ … ≤ uₙ ≤ β of the connected function
/// with `lead` in the first slots and P(u₁)…P(uₙ) after it, by nested
/// Gauss–Legendre.  `slots` is reused across the recursion; index 0 holds
/// the lead when present.
fn simplex_connected_integral(
    rho: &CMat,
    lead: Option<&CMat>,
    p_at: &impl Fn(f64) -> CMat,
    n: usize,
    beta: f64,
) -> Result<f64> {
    let offset = usize::from(lead.is_some());
    let dim = rho.nrows();
    let mut slots: Vec<CMat> = vec![CMat::zeros(dim, dim); offset + n];
    if let Some(m) = lead {
        slots[0] = m.clone();
    }
    let (nodes, weights) = quad::gauss_legendre(SIMPLEX_GL_POINTS);

    fn rec(
        rho: &CMat,
        slots: &mut Vec<CMat>,
        p_at: &impl Fn(f64) -> CMat,
        nodes: &[f64],
        weights: &[f64],
        offset: usize,
        level: usize,
        upper: f64,
    ) -> Result<f64> {
        let half = 0.5 * upper;
        let mut acc = 0.0;
        for (x, wgt) in nodes.iter().zip(weights) {
            let u = half * (x + 1.0);
            slots[offset + level - 1] = p_at(u);
            let inner = if level == 1 {
                connected_function(rho, slots)?.re
            } else {
                rec(rho, slots, p_at, nodes, weights, offset, level - 1, u)?
            };
            acc += wgt * half * inner;
        }
        Ok(acc)
    }

    rec(rho, &mut slots, p_at, &nodes, &weights, offset, n, beta)
}

/// Imaginary-time translate e^{-uH} P e^{uH} through the eigenbasis.
fn make_imaginary_translate<'a>(
    vals: &'a [f64],
    vecs: &'a CMat,
    p: &CMat,
) -> impl Fn(f64) -> CMat + 'a {
    let ptil = vecs.adjoint() * p * vecs;
    let dim = vals.len();
    move |u: f64| -> CMat {
        let mut m = ptil.clone();
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] *= Complex64::new((-u * (vals[i] - vals[j])).exp(), 0.0);
            }
        }
        vecs * m * vecs.adjoint()
    }
}

/// Expansion of the perturbed thermal expectation value
/// tr(e^{-β(H+λP)} A) / tr(e^{-β(H+λP)}) in powers of λ:
///
/// ```text
/// order n = (-1)ⁿ ∫_{0≤u₁≤…≤uₙ≤β} ωᶜ(A ⊗ P(u₁) ⊗ … ⊗ P(uₙ)) du,
/// ```
///
/// with P(u) = e^{-uH} P e^{uH} and ωᶜ the connected functions of the
/// unperturbed Gibbs state.  Dividing by the perturbed partition function is
/// exactly what turns moments into connected functions here.
pub fn perturbed_state_expansion(
    h: &CMat,
    p: &CMat,
    beta: f64,
    a: &CMat,
    order: usize,
) -> Result<FormalSeries<f64>> {
    check_hermitian(h, "hamiltonian", 1e-13)?;
    check_hermitian(p, "perturbation", 1e-13)?;
    check_hermitian(a, "observable", 1e-13)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    if order > MAX_STATE_ORDER {
        return Err(Error::UnsupportedOrder(format!(
            "state expansion supports order <= {MAX_STATE_ORDER}, got {order}"
        )));
    }
    if p.nrows() != h.nrows() || a.nrows() != h.nrows() {
        return Err(Error::Domain("operator dimensions must all match".into()));
    }
    let rho = gibbs_state(h, beta)?;
    let (vals, vecs) = hermitian_eigen(h);
    let p_at = make_imaginary_translate(&vals, &vecs, p);
    let mut coeffs = vec![(&rho * a).trace().re];
    for n in 1..=order {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(sign * simplex_connected_integral(&rho, Some(a), &p_at, n, beta)?);
    }
    FormalSeries::new(coeffs)
}

/// Expansion of log[tr e^{-β(H+λP)} / tr e^{-βH}]: same simplex integrals
/// without the observable slot.  The constant term is zero by construction.
pub fn log_partition_expansion(h: &CMat, p: &CMat, beta: f64, order: usize) -> Result<FormalSeries<f64>> {
    check_hermitian(h, "hamiltonian", 1e-13)?;
    check_hermitian(p, "perturbation", 1e-13)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    if order > MAX_STATE_ORDER {
        return Err(Error::UnsupportedOrder(format!(
            "log-partition expansion supports order <= {MAX_STATE_ORDER}, got {order}"
        )));
    }
    if p.nrows() != h.nrows() {
        return Err(Error::Domain("perturbation dimension must match the hamiltonian".into()));
    }
    let rho = gibbs_state(h, beta)?;
    let (vals, vecs) = hermitian_eigen(h);
    let p_at = make_imaginary_translate(&vals, &vecs, p);
    let mut coeffs = vec![0.0];
    for n in 1..=order {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        coeffs.push(sign * simplex_connected_integral(&rho, None, &p_at, n, beta)?);
    }
    FormalSeries::new(coeffs)
}
