//! Exact finite-dimensional thermal systems.
//!
//! Small dense matrix models (dimension up to 16) where every quantity the
//! perturbative field formulas approximate can be computed exactly: Gibbs
//! states, purification vectors with their normalizations, relative entropy
//! between density matrices, and entropy production along a perturbed time
//! evolution.  Nothing here knows about momentum integrals; the module
//! exists so the analytic machinery has an independent ground truth.
//!
//! All matrix functions go through Hermitian eigendecompositions — no Padé
//! approximants, no scaling-and-squaring — so errors stay at rounding level
//! and inverse functions (log after exp) are consistent by construction.

pub mod connected;
pub mod expansions;
pub mod series;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{quad, Error, Result};

pub type CMat = DMatrix<Complex64>;

pub const MAX_DIM: usize = 16;

/// Inputs are rejected beyond this hermiticity defect; states produced by
/// internal computations get a looser check since they carry rounding from
/// products of unitaries.
const INPUT_HERMITICITY_TOL: f64 = 1e-13;
const STATE_HERMITICITY_TOL: f64 = 1e-10;

/// Largest |m[i][j] - conj(m[j][i])| over all entries.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Random Hermitian matrix with entries of magnitude ~`scale`, exactly
/// Hermitian in floating point (built as (G + G†)/2).
pub fn random_hermitian<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    });
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and a unitary
/// whose columns are the eigenvectors.  Symmetrizes first so tiny defects
/// from matrix products cannot leak into complex eigenvalues.
pub(crate) fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// A scalar function applied spectrally to a Hermitian matrix:
/// U diag(f(λ)) U†.  This is the only route matrix functions take in this
/// module, so exp/log/sqrt stay mutually consistent.
pub fn apply_spectral(m: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (vals, vecs) = hermitian_eigen(m);
    spectral_assemble(&vals, &vecs, f)
}

pub(crate) fn spectral_assemble(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let diag = DVector::from_iterator(vals.len(), vals.iter().map(|&l| f(l)));
    vecs * CMat::from_diagonal(&diag) * vecs.adjoint()
}

/// e^{-itG} for the Hermitian G with eigensystem (vals, vecs).
pub(crate) fn evolution_operator(vals: &[f64], vecs: &CMat, t: f64) -> CMat {
    spectral_assemble(vals, vecs, |l| Complex64::from_polar(1.0, -t * l))
}

fn check_hermitian(m: &CMat, what: &str, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Domain(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain(format!("{what} has non-finite entries")));
    }
    let defect = hermiticity_defect(m);
    if defect > tol {
        return Err(Error::Domain(format!(
            "{what} is not Hermitian (defect {defect:.2e}, tolerance {tol:.0e})"
        )));
    }
    Ok(())
}

/// log tr e^{-βH}, evaluated with the usual max-shift so large β·spread
/// cannot overflow.
pub fn log_partition_function(h: &CMat, beta: f64) -> Result<f64> {
    check_hermitian(h, "hamiltonian", INPUT_HERMITICITY_TOL)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    let (vals, _) = hermitian_eigen(h);
    Ok(log_sum_exp_neg(&vals, beta))
}

/// ln Σ_i e^{-β λ_i} via the smallest eigenvalue shift.
fn log_sum_exp_neg(vals: &[f64], beta: f64) -> f64 {
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = vals.iter().map(|&l| (-beta * (l - lmin)).exp()).sum();
    -beta * lmin + sum.ln()
}

/// Thermal equilibrium state e^{-βH} / tr e^{-βH}.
pub fn gibbs_state(h: &CMat, beta: f64) -> Result<CMat> {
    check_hermitian(h, "hamiltonian", INPUT_HERMITICITY_TOL)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    let (vals, vecs) = hermitian_eigen(h);
    let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = vals.iter().map(|&l| (-beta * (l - lmin)).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(spectral_assemble(&vals, &vecs, |l| {
        Complex64::new((-beta * (l - lmin)).exp() / z, 0.0)
    }))
}

/// |ω(A·α_{iβ}(B)) - ω(BA)| for ω the Gibbs state of `h`: the detailed
/// balance condition a thermal state must satisfy exactly.
pub fn kms_residual(rho: &CMat, h: &CMat, beta: f64, a: &CMat, b: &CMat) -> f64 {
    let (vals, vecs) = hermitian_eigen(h);
    // e^{-βH} B e^{βH} computed entrywise in the eigenbasis
    let mut btil = vecs.adjoint() * b * &vecs;
    for i in 0..btil.nrows() {
        for j in 0..btil.ncols() {
            btil[(i, j)] *= Complex64::new((-beta * (vals[i] - vals[j])).exp(), 0.0);
        }
    }
    let evolved = &vecs * btil * vecs.adjoint();
    let lhs = (rho * a * evolved).trace();
    let rhs = (rho * b * a).trace();
    (lhs - rhs).norm()
}

/// A Hamiltonian with three perturbations sharing one inverse temperature:
/// the initial equilibrium is built from H+P₁, the dynamics runs with H+P₂,
/// and the reference equilibrium uses H+P₃.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    dim: usize,
    beta: f64,
    h: CMat,
    p1: CMat,
    p2: CMat,
    p3: CMat,
}

impl FiniteSystem {
    pub fn new(h: CMat, p1: CMat, p2: CMat, p3: CMat, beta: f64) -> Result<Self> {
        let dim = h.nrows();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Domain(format!(
                "dimension must be between 2 and {MAX_DIM}, got {dim}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
        }
        check_hermitian(&h, "hamiltonian", INPUT_HERMITICITY_TOL)?;
        for (m, what) in [(&p1, "perturbation 1"), (&p2, "perturbation 2"), (&p3, "perturbation 3")] {
            check_hermitian(m, what, INPUT_HERMITICITY_TOL)?;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Domain(format!(
                    "{what} is {}x{}, hamiltonian is {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(FiniteSystem { dim, beta, h, p1, p2, p3 })
    }

    /// Reproducible random system: unit-scale Hamiltonian, half-scale
    /// perturbations.
    pub fn random(dim: usize, beta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Domain(format!(
                "dimension must be between 2 and {MAX_DIM}, got {dim}"
            )));
        }
        let h = random_hermitian(dim, 1.0, &mut rng);
        let p1 = random_hermitian(dim, 0.5, &mut rng);
        let p2 = random_hermitian(dim, 0.5, &mut rng);
        let p3 = random_hermitian(dim, 0.5, &mut rng);
        FiniteSystem::new(h, p1, p2, p3, beta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn h(&self) -> &CMat {
        &self.h
    }
    pub fn p1(&self) -> &CMat {
        &self.p1
    }
    pub fn p2(&self) -> &CMat {
        &self.p2
    }
    pub fn p3(&self) -> &CMat {
        &self.p3
    }
}

/// Purification vectors in the Hilbert–Schmidt representation, where a
/// density matrix ρ is represented by the matrix Ω = ρ^{1/2} and states act
/// as ⟨Ω, A Ω⟩ = tr(Ω† A Ω).
///
/// `omega0` purifies the unperturbed Gibbs state; `omega1`/`omega3` purify
/// the states perturbed by P₁/P₃.  The normalizations satisfy
/// nᵢ² = Z(H+Pᵢ)/Z(H) and are computed from log-partition differences so no
/// partition function is ever formed directly.
#[derive(Debug, Clone)]
pub struct PurificationVectors {
    pub omega0: CMat,
    pub omega1: CMat,
    pub omega3: CMat,
    pub n1: f64,
    pub n3: f64,
}

/// The perturbed purification Ωᵢ could be defined as the normalized image
/// e^{-β(H+Pᵢ)/2} e^{βH/2} Ω₀ / nᵢ, but e^{βH/2} Ω₀ collapses to 1/√Z
/// analytically, so Ωᵢ is just the square root of the perturbed Gibbs
/// state.  Computing it that way avoids multiplying large exponentials
/// against small ones.
pub fn purification_vectors(sys: &FiniteSystem) -> PurificationVectors {
    let sqrt_gibbs = |h: &CMat| -> CMat {
        let (vals, vecs) = hermitian_eigen(h);
        let lmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = vals.iter().map(|&l| (-sys.beta * (l - lmin)).exp()).sum();
        spectral_assemble(&vals, &vecs, |l| {
            Complex64::new(((-sys.beta * (l - lmin)).exp() / z).sqrt(), 0.0)
        })
    };
    let logz = |h: &CMat| {
        let (vals, _) = hermitian_eigen(h);
        log_sum_exp_neg(&vals, sys.beta)
    };
    let h1 = &sys.h + &sys.p1;
    let h3 = &sys.h + &sys.p3;
    let logz0 = logz(&sys.h);
    PurificationVectors {
        omega0: sqrt_gibbs(&sys.h),
        omega1: sqrt_gibbs(&h1),
        omega3: sqrt_gibbs(&h3),
        n1: (0.5 * (logz(&h1) - logz0)).exp(),
        n3: (0.5 * (logz(&h3) - logz0)).exp(),
    }
}

/// Expectation ⟨Ω, A Ω⟩ in the Hilbert–Schmidt representation.
pub fn vector_state(omega: &CMat, a: &CMat) -> Complex64 {
    (omega.adjoint() * a * omega).trace()
}

/// Eigendecomposition of a density matrix with the checks a state must
/// pass: Hermitian, unit trace, no eigenvalue below -1e-10.
fn state_spectrum(m: &CMat, what: &str) -> Result<(Vec<f64>, CMat)> {
    check_hermitian(m, what, STATE_HERMITICITY_TOL)?;
    let tr = m.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-10 {
        return Err(Error::Domain(format!("{what} must have unit trace, got {tr}")));
    }
    let (vals, vecs) = hermitian_eigen(m);
    if let Some(&bad) = vals.iter().find(|&&l| l < -1e-10) {
        return Err(Error::Domain(format!(
            "{what} has a negative eigenvalue {bad:.3e}; not a state"
        )));
    }
    Ok((vals, vecs))
}

/// Relative entropy tr ρ(log ρ - log σ) between density matrices, from the
/// spectral trace formula.  σ must be faithful (no vanishing eigenvalues);
/// ρ may be singular, the p log p terms just drop out.
pub fn relative_entropy_exact(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.nrows() != sigma.nrows() {
        return Err(Error::Domain(format!(
            "state dimensions differ: {} vs {}",
            rho.nrows(),
            sigma.nrows()
        )));
    }
    let (p, _u) = state_spectrum(rho, "first state")?;
    let (q, v) = state_spectrum(sigma, "reference state")?;
    if q.iter().any(|&x| x <= 1e-14) {
        return Err(Error::Domain(
            "reference state is numerically singular; relative entropy diverges".into(),
        ));
    }
    let entropy_term: f64 = p.iter().filter(|&&pi| pi > 0.0).map(|&pi| pi * pi.ln()).sum();
    let log_sigma = spectral_assemble(&q, &v, |l| Complex64::new(l.ln(), 0.0));
    let cross = (rho * log_sigma).trace();
    Ok(entropy_term - cross.re)
}

/// Same quantity through the spectral overlap sum
/// Σᵢⱼ pᵢ |⟨uᵢ, vⱼ⟩|² (log pᵢ - log qⱼ) — the modular-operator form.  A
/// different floating-point path from `relative_entropy_exact`, kept as a
/// cross-check for small dimensions.
pub fn relative_entropy_modular(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.nrows() != sigma.nrows() {
        return Err(Error::Domain(format!(
            "state dimensions differ: {} vs {}",
            rho.nrows(),
            sigma.nrows()
        )));
    }
    let (p, u) = state_spectrum(rho, "first state")?;
    let (q, v) = state_spectrum(sigma, "reference state")?;
    if q.iter().any(|&x| x <= 1e-14) {
        return Err(Error::Domain(
            "reference state is numerically singular; relative entropy diverges".into(),
        ));
    }
    let overlap = u.adjoint() * &v;
    let mut total = 0.0;
    for i in 0..p.len() {
        if p[i] <= 0.0 {
            continue;
        }
        for j in 0..q.len() {
            total += p[i] * overlap[(i, j)].norm_sqr() * (p[i].ln() - q[j].ln());
        }
    }
    Ok(total)
}

/// Relative entropy between the time-evolved initial equilibrium and the
/// reference equilibrium, from the closed formula
///
/// ```text
/// S(t) = -β ω₁(P₁-P₂) + β ω₁(x(t)) + log Z₃ - log Z₁,
/// ```
///
/// where x(t) = e^{-it(H+P₂)} (P₃-P₂) e^{it(H+P₂)} and ω₁ is the Gibbs
/// state of H+P₁.  For density matrices this is an identity, not an
/// approximation: it equals tr ρ_ψ(log ρ_ψ - log ρ₃) with
/// ρ_ψ = e^{it(H+P₂)} ρ₁ e^{-it(H+P₂)}.
pub fn relative_entropy_formula(sys: &FiniteSystem, t: f64) -> f64 {
    let beta = sys.beta;
    let h1 = &sys.h + &sys.p1;
    let h2 = &sys.h + &sys.p2;
    let h3 = &sys.h + &sys.p3;
    let rho1 = gibbs_state(&h1, beta).expect("validated at construction");
    let (v2, u2) = hermitian_eigen(&h2);
    let w = evolution_operator(&v2, &u2, t);
    let x = &sys.p3 - &sys.p2;
    let xev = &w * x * w.adjoint();
    let first = (&rho1 * (&sys.p1 - &sys.p2)).trace().re;
    let second = (&rho1 * xev).trace().re;
    let (vals1, _) = hermitian_eigen(&h1);
    let (vals3, _) = hermitian_eigen(&h3);
    let logz1 = log_sum_exp_neg(&vals1, beta);
    let logz3 = log_sum_exp_neg(&vals3, beta);
    -beta * first + beta * second + logz3 - logz1
}

/// Instantaneous entropy production dS/dt, as the closed commutator
/// expression E(t) = -iβ tr(ρ₁ [P₂-P₁, x(t)]).  The H-part of the generator
/// drops because ρ₁ commutes with H+P₁.
pub fn entropy_production_exact(sys: &FiniteSystem, t: f64) -> f64 {
    let beta = sys.beta;
    let h1 = &sys.h + &sys.p1;
    let h2 = &sys.h + &sys.p2;
    let rho1 = gibbs_state(&h1, beta).expect("validated at construction");
    let (v2, u2) = hermitian_eigen(&h2);
    let w = evolution_operator(&v2, &u2, t);
    let x = &sys.p3 - &sys.p2;
    let xev = &w * x * w.adjoint();
    let gen = &sys.p2 - &sys.p1;
    let comm = &gen * &xev - &xev * gen;
    // commutator of Hermitian matrices is anti-Hermitian, so the trace
    // against a state is purely imaginary and -i·tr is real
    beta * (&rho1 * comm).trace().im
}

/// The same relative entropy computed the long way round: build the evolved
/// density matrix e^{+it(H+P₂)} ρ₁ e^{-it(H+P₂)} and feed it through the
/// spectral trace formula against the reference Gibbs state.  Independent of
/// `relative_entropy_formula`, which never forms the evolved state.
pub fn evolved_state_relative_entropy(sys: &FiniteSystem, t: f64) -> Result<f64> {
    let h2 = &sys.h + &sys.p2;
    let rho1 = gibbs_state(&(&sys.h + &sys.p1), sys.beta)?;
    let rho3 = gibbs_state(&(&sys.h + &sys.p3), sys.beta)?;
    let (v2, u2) = hermitian_eigen(&h2);
    let forward = evolution_operator(&v2, &u2, -t); // e^{+it(H+P₂)}
    let rho_psi = &forward * rho1 * forward.adjoint();
    relative_entropy_exact(&rho_psi, &rho3)
}

/// |S(t) - S(0) - ∫₀ᵗ E(s) ds|: how well the production integrates back to
/// the entropy change.  Zero up to quadrature error.
pub fn entropy_balance_residual(sys: &FiniteSystem, t: f64) -> Result<f64> {
    let s_t = relative_entropy_formula(sys, t);
    let s_0 = relative_entropy_formula(sys, 0.0);
    let (a, b, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
    let tol = 1e-12 * (1.0 + (s_t - s_0).abs());
    let integral = sign * quad::adaptive(&|s| entropy_production_exact(sys, s), a, b, tol)?;
    Ok((s_t - s_0 - integral).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(entries: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    fn max_entry_diff(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_state<R: Rng>(dim: usize, rng: &mut R) -> CMat {
        let g = CMat::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let w = &g * g.adjoint();
        let tr = w.trace().re;
        w * Complex64::new(1.0 / tr, 0.0)
    }

    #[test]
    fn system_construction_validates_inputs() {
        let h = diag(&[1.0, -1.0]);
        let z = CMat::zeros(2, 2);
        assert!(FiniteSystem::new(h.clone(), z.clone(), z.clone(), z.clone(), 1.0).is_ok());
        // dimension limits
        let one = diag(&[1.0]);
        assert!(matches!(
            FiniteSystem::new(one.clone(), one.clone(), one.clone(), one.clone(), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(FiniteSystem::random(17, 1.0, 0).is_err());
        // temperature
        assert!(FiniteSystem::new(h.clone(), z.clone(), z.clone(), z.clone(), 0.0).is_err());
        assert!(FiniteSystem::new(h.clone(), z.clone(), z.clone(), z.clone(), -2.0).is_err());
        assert!(FiniteSystem::new(h.clone(), z.clone(), z.clone(), z.clone(), f64::NAN).is_err());
        // non-Hermitian input
        let mut bad = h.clone();
        bad[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(
            FiniteSystem::new(bad, z.clone(), z.clone(), z.clone(), 1.0),
            Err(Error::Domain(_))
        ));
        // mismatched perturbation size
        let p3 = CMat::zeros(3, 3);
        assert!(FiniteSystem::new(h, z.clone(), z, p3, 1.0).is_err());
    }

    #[test]
    fn gibbs_of_zero_hamiltonian_is_maximally_mixed() {
        let rho = gibbs_state(&CMat::zeros(4, 4), 2.3).unwrap();
        assert!(max_entry_diff(&rho, &diag(&[0.25; 4])) < 1e-15);
    }

    #[test]
    fn gibbs_two_level_matches_closed_form() {
        let rho = gibbs_state(&diag(&[1.0, -1.0]), 1.0).unwrap();
        let e2 = (2.0f64).exp();
        // populations 1/(1+e²) and e²/(1+e²)
        assert!((rho[(0, 0)].re - 1.0 / (1.0 + e2)).abs() < 1e-15);
        assert!((rho[(1, 1)].re - e2 / (1.0 + e2)).abs() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-16);
    }

    #[test]
    fn gibbs_survives_large_spectral_spread() {
        // shift trick: β·spread = 400 must not overflow or produce NaN
        let rho = gibbs_state(&diag(&[0.0, 200.0]), 2.0).unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(rho[(1, 1)].re >= 0.0);
    }

    #[test]
    fn gibbs_satisfies_detailed_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b6d73);
        let h = random_hermitian(4, 1.0, &mut rng);
        let rho = gibbs_state(&h, 1.3).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let a = random_hermitian(4, 1.0, &mut rng);
            let b = random_hermitian(4, 1.0, &mut rng);
            worst = worst.max(kms_residual(&rho, &h, 1.3, &a, &b));
        }
        assert!(worst < 1e-11, "worst detailed-balance residual {worst:.3e}");
    }

    #[test]
    fn log_partition_matches_direct_sum() {
        let h = diag(&[0.3, -0.9, 1.7]);
        let direct = ((-0.6f64).exp() + (1.8f64).exp() + (-3.4f64).exp()).ln();
        assert!((log_partition_function(&h, 2.0).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn purification_reproduces_unperturbed_state_when_unperturbed() {
        let h = diag(&[0.5, -0.5, 1.5]);
        let z = CMat::zeros(3, 3);
        let sys = FiniteSystem::new(h.clone(), z.clone(), z.clone(), z, 1.1).unwrap();
        let pv = purification_vectors(&sys);
        assert!(max_entry_diff(&pv.omega0, &pv.omega1) < 1e-14);
        assert!((pv.n1 - 1.0).abs() < 1e-14);
        assert!((pv.n3 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn purification_vectors_induce_perturbed_gibbs_states() {
        let sys = FiniteSystem::random(4, 1.4, 0x70757269).unwrap();
        let pv = purification_vectors(&sys);
        let rho1 = gibbs_state(&(sys.h() + sys.p1()), sys.beta()).unwrap();
        let rho3 = gibbs_state(&(sys.h() + sys.p3()), sys.beta()).unwrap();
        // ΩΩ† is the induced density matrix
        assert!(max_entry_diff(&(&pv.omega1 * pv.omega1.adjoint()), &rho1) < 1e-12);
        assert!(max_entry_diff(&(&pv.omega3 * pv.omega3.adjoint()), &rho3) < 1e-12);
        // and expectations agree on a few observables
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let a = random_hermitian(4, 1.0, &mut rng);
            let lhs = vector_state(&pv.omega1, &a);
            let rhs = (&rho1 * &a).trace();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn purification_equals_normalized_interpolating_image() {
        // Ωᵢ must equal U Ω₀ / nᵢ with U = e^{-β(H+Pᵢ)/2} e^{βH/2}
        let sys = FiniteSystem::random(4, 1.2, 0x696d67).unwrap();
        let pv = purification_vectors(&sys);
        let beta = sys.beta();
        let grow = apply_spectral(sys.h(), |l| Complex64::new((0.5 * beta * l).exp(), 0.0));
        let h1 = sys.h() + sys.p1();
        let shrink = apply_spectral(&h1, |l| Complex64::new((-0.5 * beta * l).exp(), 0.0));
        let u = &shrink * &grow;
        let image = &u * &pv.omega0 * Complex64::new(1.0 / pv.n1, 0.0);
        assert!(max_entry_diff(&image, &pv.omega1) < 1e-10);
        // and n₁² is the expectation of U†U in the unperturbed state
        let rho = gibbs_state(sys.h(), beta).unwrap();
        let n1sq = (&rho * (u.adjoint() * &u)).trace().re;
        assert!((n1sq - pv.n1 * pv.n1).abs() < 1e-12 * n1sq.abs().max(1.0));
    }

    #[test]
    fn normalizations_match_partition_function_ratio() {
        let sys = FiniteSystem::random(5, 0.9, 0x7a7a).unwrap();
        let pv = purification_vectors(&sys);
        let z0 = log_partition_function(sys.h(), 0.9).unwrap();
        let z1 = log_partition_function(&(sys.h() + sys.p1()), 0.9).unwrap();
        let z3 = log_partition_function(&(sys.h() + sys.p3()), 0.9).unwrap();
        assert!((pv.n1 * pv.n1 - (z1 - z0).exp()).abs() < 1e-13);
        assert!((pv.n3 * pv.n3 - (z3 - z0).exp()).abs() < 1e-13);
    }

    #[test]
    fn relative_entropy_of_a_state_with_itself_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = random_state(4, &mut rng);
        assert!(relative_entropy_exact(&rho, &rho).unwrap().abs() < 1e-12);
        assert!(relative_entropy_modular(&rho, &rho).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_matches_classical_kullback_leibler() {
        let rho = diag(&[0.7, 0.3]);
        let sigma = diag(&[0.5, 0.5]);
        let expected = 0.7 * (0.7f64 / 0.5).ln() + 0.3 * (0.3f64 / 0.5).ln();
        assert!((relative_entropy_exact(&rho, &sigma).unwrap() - expected).abs() < 1e-14);
        assert!((relative_entropy_modular(&rho, &sigma).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_is_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            let rho = random_state(5, &mut rng);
            let sigma = random_state(5, &mut rng);
            let s = relative_entropy_exact(&rho, &sigma).unwrap();
            assert!(s >= -1e-12, "relative entropy {s} negative");
        }
    }

    #[test]
    fn relative_entropy_rejects_singular_reference() {
        let rho = diag(&[0.5, 0.5]);
        let sigma = diag(&[1.0, 0.0]);
        assert!(matches!(relative_entropy_exact(&rho, &sigma), Err(Error::Domain(_))));
        assert!(matches!(relative_entropy_modular(&rho, &sigma), Err(Error::Domain(_))));
        // singular first argument is fine
        assert!(relative_entropy_exact(&sigma, &rho).is_ok());
    }

    #[test]
    fn relative_entropy_rejects_non_states() {
        let not_normalized = diag(&[0.9, 0.3]);
        let ok = diag(&[0.5, 0.5]);
        assert!(relative_entropy_exact(&not_normalized, &ok).is_err());
        let negative = diag(&[1.2, -0.2]);
        assert!(relative_entropy_exact(&negative, &ok).is_err());
    }

    #[test]
    fn modular_route_agrees_with_trace_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for dim in [2, 3, 4] {
            for _ in 0..5 {
                let rho = random_state(dim, &mut rng);
                let sigma = random_state(dim, &mut rng);
                let a = relative_entropy_exact(&rho, &sigma).unwrap();
                let b = relative_entropy_modular(&rho, &sigma).unwrap();
                assert!((a - b).abs() < 1e-11, "trace {a} vs modular {b}");
            }
        }
    }

    /// The load-bearing identity: the closed formula equals the exact
    /// relative entropy between the evolved state and the reference.
    #[test]
    fn formula_equals_exact_relative_entropy() {
        let sys = FiniteSystem::random(3, 0.9, 0x666f726d).unwrap();
        for t in [0.0, 1.7, -2.4] {
            let formula = relative_entropy_formula(&sys, t);
            let h2 = sys.h() + sys.p2();
            let rho1 = gibbs_state(&(sys.h() + sys.p1()), sys.beta()).unwrap();
            let rho3 = gibbs_state(&(sys.h() + sys.p3()), sys.beta()).unwrap();
            let (v2, u2) = hermitian_eigen(&h2);
            let forward = evolution_operator(&v2, &u2, -t); // e^{+itH₂}
            let rho_psi = &forward * &rho1 * forward.adjoint();
            let exact = relative_entropy_exact(&rho_psi, &rho3).unwrap();
            assert!(
                (formula - exact).abs() < 1e-9,
                "t={t}: formula {formula} vs exact {exact}"
            );
            let modular = relative_entropy_modular(&rho_psi, &rho3).unwrap();
            assert!((formula - modular).abs() < 1e-9);
            let packaged = evolved_state_relative_entropy(&sys, t).unwrap();
            assert!((packaged - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn formula_vanishes_for_matching_endpoints_at_zero_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let h = random_hermitian(4, 1.0, &mut rng);
        let p = random_hermitian(4, 0.5, &mut rng);
        let q = random_hermitian(4, 0.5, &mut rng);
        let sys = FiniteSystem::new(h, p.clone(), q, p, 1.5).unwrap();
        assert!(relative_entropy_formula(&sys, 0.0).abs() < 1e-13);
    }

    #[test]
    fn entropy_stays_flat_when_dynamics_preserves_the_reference() {
        // P₂ = P₃: the evolution commutes with the reference equilibrium,
        // so S(t) is constant and production vanishes identically.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let h = random_hermitian(4, 1.0, &mut rng);
        let p1 = random_hermitian(4, 0.5, &mut rng);
        let p = random_hermitian(4, 0.5, &mut rng);
        let sys = FiniteSystem::new(h, p1, p.clone(), p, 1.0).unwrap();
        let s0 = relative_entropy_formula(&sys, 0.0);
        for t in [0.5, 1.0, 2.0, 3.0] {
            assert!((relative_entropy_formula(&sys, t) - s0).abs() < 1e-12);
            assert_eq!(entropy_production_exact(&sys, t), 0.0);
        }
    }

    #[test]
    fn production_vanishes_when_dynamics_matches_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let h = random_hermitian(3, 1.0, &mut rng);
        let p = random_hermitian(3, 0.5, &mut rng);
        let p3 = random_hermitian(3, 0.5, &mut rng);
        let sys = FiniteSystem::new(h, p.clone(), p, p3, 0.8).unwrap();
        for t in [0.3, 1.9] {
            assert_eq!(entropy_production_exact(&sys, t), 0.0);
        }
    }

    #[test]
    fn production_integrates_back_to_entropy_change() {
        let sys = FiniteSystem::random(4, 1.1, 0x62616c).unwrap();
        for t in [0.7, 2.3, -1.2] {
            let r = entropy_balance_residual(&sys, t).unwrap();
            assert!(r < 1e-9, "balance residual {r:.3e} at t={t}");
        }
    }

    #[test]
    fn production_with_free_dynamics_reduces_to_plain_commutator() {
        // P₂ = 0: E(t) = iβ tr(ρ₁ [P₁, e^{-itH} P₃ e^{itH}])
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let h = random_hermitian(4, 1.0, &mut rng);
        let p1 = random_hermitian(4, 0.5, &mut rng);
        let p3 = random_hermitian(4, 0.5, &mut rng);
        let beta = 1.3;
        let sys = FiniteSystem::new(h.clone(), p1.clone(), CMat::zeros(4, 4), p3.clone(), beta).unwrap();
        for t in [0.4, 1.8] {
            let e = entropy_production_exact(&sys, t);
            let (vals, vecs) = hermitian_eigen(&h);
            let w = evolution_operator(&vals, &vecs, t);
            let p3ev = &w * &p3 * w.adjoint();
            let comm = &p1 * &p3ev - &p3ev * &p1;
            let rho1 = gibbs_state(&(&h + &p1), beta).unwrap();
            // i·tr(ρ[...]) is real; compare real parts
            let reference = -beta * (&rho1 * comm).trace().im;
            assert!((e - reference).abs() < 1e-12, "{e} vs {reference}");
        }
    }

    #[test]
    fn production_is_time_derivative_of_the_formula() {
        let sys = FiniteSystem::random(4, 0.8, 0x646572).unwrap();
        let t = 1.3;
        let h = 1e-4;
        // five-point stencil for dS/dt
        let d = (relative_entropy_formula(&sys, t - 2.0 * h) - 8.0 * relative_entropy_formula(&sys, t - h)
            + 8.0 * relative_entropy_formula(&sys, t + h)
            - relative_entropy_formula(&sys, t + 2.0 * h))
            / (12.0 * h);
        assert!((entropy_production_exact(&sys, t) - d).abs() < 1e-9);
    }
}
