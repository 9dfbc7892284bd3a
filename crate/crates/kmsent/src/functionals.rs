//! Interaction functionals whose momentum kernels factorize over lines.
//!
//! All perturbations handled by the engine share one radial Gaussian profile
//! `ghat(k) = A exp(-k^2 / 2 s^2)`; the order-l kernel of a functional is
//! `c_l * prod_j ghat(|p_j|)`. With three functionals (state / evolution /
//! reference) every second-order quantity depends only on the per-order
//! scalar coefficients, which this module combines into the two quadratic
//! families used downstream.

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 3;

/// Radial Gaussian vertex profile `A exp(-k^2 / (2 s^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProfile {
    amplitude: f64,
    width: f64,
}

impl GaussianProfile {
    pub fn new(amplitude: f64, width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::Domain(format!(
                "profile amplitude must be positive, got {amplitude}"
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Domain(format!(
                "profile width must be positive, got {width}"
            )));
        }
        Ok(Self { amplitude, width })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn eval(&self, k: f64) -> f64 {
        self.amplitude * (-k * k / (2.0 * self.width * self.width)).exp()
    }
}

/// One interaction functional: per-order coefficients against the shared
/// profile. Order count is the vector length, at most `MAX_ORDER`; an
/// all-zero coefficient vector is the zero functional (V = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SharedProfileFunctional {
    coefficients: Vec<f64>,
    profile: GaussianProfile,
}

impl SharedProfileFunctional {
    pub fn new(coefficients: Vec<f64>, profile: GaussianProfile) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > MAX_ORDER {
            return Err(Error::Config(format!(
                "need between 1 and {MAX_ORDER} coefficients, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        Ok(Self { coefficients, profile })
    }

    /// The zero functional (V = 0) matching another functional's shape.
    pub fn zero_like(other: &Self) -> Self {
        Self {
            coefficients: vec![0.0; other.coefficients.len()],
            profile: other.profile,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, l: usize) -> f64 {
        self.coefficients.get(l - 1).copied().unwrap_or(0.0)
    }

    pub fn max_order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn profile(&self) -> &GaussianProfile {
        &self.profile
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
            profile: self.profile,
        }
    }
}

/// Self-adjointness of the perturbation in this representation reduces to the
/// coefficients being real and finite (the profile is real, even, and shared
/// across lines, so the kernel is invariant under conjugation combined with
/// momentum reflection).
pub fn validate_self_adjoint(k: &SharedProfileFunctional) -> Result<()> {
    if k.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain(
            "self-adjointness requires finite real coefficients".into(),
        ));
    }
    Ok(())
}

/// Per-order quadratic data of a (state, evolution, reference) triple:
/// `sum_coeff_l = c1_l + c3_l - 2 c2_l` multiplies the sin(ft/2) part of the
/// combined kernel and `diff_coeff_l = c1_l - c3_l` the cos(ft/2) part.
/// `order_count` is the common order count of the triple.
#[derive(Debug, Clone, PartialEq)]
pub struct FCoefficients {
    pub sum_coeffs: Vec<f64>,
    pub diff_coeffs: Vec<f64>,
}

impl FCoefficients {
    pub fn order_count(&self) -> usize {
        self.sum_coeffs.len()
    }
}

/// Combine a (state, evolution, reference) triple into `FCoefficients`.
///
/// The three functionals must share the profile exactly and have the same
/// order count; anything else is a configuration error.
pub fn combine(
    state: &SharedProfileFunctional,
    evolution: &SharedProfileFunctional,
    reference: &SharedProfileFunctional,
) -> Result<FCoefficients> {
    if state.profile != evolution.profile || state.profile != reference.profile {
        return Err(Error::Config(
            "functionals must share one vertex profile".into(),
        ));
    }
    if state.max_order() != evolution.max_order() || state.max_order() != reference.max_order() {
        return Err(Error::Config(format!(
            "order counts differ: {} / {} / {}",
            state.max_order(),
            evolution.max_order(),
            reference.max_order()
        )));
    }
    for k in [state, evolution, reference] {
        validate_self_adjoint(k)?;
    }
    let n = state.max_order();
    let mut sum_coeffs = Vec::with_capacity(n);
    let mut diff_coeffs = Vec::with_capacity(n);
    for l in 1..=n {
        let (c1, c2, c3) = (
            state.coefficient(l),
            evolution.coefficient(l),
            reference.coefficient(l),
        );
        sum_coeffs.push(c1 + c3 - 2.0 * c2);
        diff_coeffs.push(c1 - c3);
    }
    Ok(FCoefficients { sum_coeffs, diff_coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn profile() -> GaussianProfile {
        GaussianProfile::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn profile_validation_and_eval() {
        assert!(GaussianProfile::new(0.0, 1.0).is_err());
        assert!(GaussianProfile::new(1.0, f64::NAN).is_err());
        let g = GaussianProfile::new(2.0, 3.0).unwrap();
        assert_relative_eq!(g.eval(0.0), 2.0);
        assert_relative_eq!(g.eval(3.0), 2.0 * (-0.5_f64).exp(), max_relative = 1e-15);
        // even, positive, decreasing in |k|
        let mut prev = g.eval(0.0);
        for i in 1..40 {
            let k = i as f64 * 0.3;
            let v = g.eval(k);
            assert!(v > 0.0 && v < prev);
            assert_eq!(v, g.eval(-k));
            prev = v;
        }
    }

    #[test]
    fn functional_validation() {
        assert!(SharedProfileFunctional::new(vec![], profile()).is_err());
        assert!(SharedProfileFunctional::new(vec![1.0; 4], profile()).is_err());
        assert!(SharedProfileFunctional::new(vec![1.0, f64::INFINITY], profile()).is_err());
        let k = SharedProfileFunctional::new(vec![1.0, 0.5], profile()).unwrap();
        assert_eq!(k.max_order(), 2);
        assert_eq!(k.coefficient(1), 1.0);
        assert_eq!(k.coefficient(2), 0.5);
        assert_eq!(k.coefficient(3), 0.0);
        let z = SharedProfileFunctional::zero_like(&k);
        assert_eq!(z.coefficients(), &[0.0, 0.0]);
        assert!(validate_self_adjoint(&k).is_ok());
    }

    #[test]
    fn combine_rejects_mismatches() {
        let g1 = GaussianProfile::new(1.0, 1.0).unwrap();
        let g2 = GaussianProfile::new(1.0, 1.000_001).unwrap();
        let k1 = SharedProfileFunctional::new(vec![1.0], g1).unwrap();
        let k2 = SharedProfileFunctional::new(vec![0.5], g2).unwrap();
        let k3 = SharedProfileFunctional::new(vec![0.2], g1).unwrap();
        assert!(combine(&k1, &k2, &k3).is_err());
        let k2 = SharedProfileFunctional::new(vec![0.5, 0.1], g1).unwrap();
        assert!(combine(&k1, &k2, &k3).is_err());
    }

    #[test]
    fn combine_quadratic_identity() {
        // per order: sum^2 - diff^2 = 4 (c1 - c2)(c3 - c2); this is the
        // factorization that makes the static + dynamic split equal the
        // combined quadratic form.
        let g = profile();
        let k1 = SharedProfileFunctional::new(vec![1.0, -0.3, 0.8], g).unwrap();
        let k2 = SharedProfileFunctional::new(vec![0.4, 0.2, -0.1], g).unwrap();
        let k3 = SharedProfileFunctional::new(vec![-0.5, 0.9, 0.3], g).unwrap();
        let f = combine(&k1, &k2, &k3).unwrap();
        assert_eq!(f.order_count(), 3);
        for l in 1..=3 {
            let lhs = f.sum_coeffs[l - 1].powi(2) - f.diff_coeffs[l - 1].powi(2);
            let rhs = 4.0
                * (k1.coefficient(l) - k2.coefficient(l))
                * (k3.coefficient(l) - k2.coefficient(l));
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13, epsilon = 1e-14);
        }
    }

    #[test]
    fn combine_unit_vectors() {
        let g = profile();
        let k1 = SharedProfileFunctional::new(vec![1.0, 0.0], g).unwrap();
        let k2 = SharedProfileFunctional::new(vec![0.0, 0.0], g).unwrap();
        let k3 = SharedProfileFunctional::new(vec![0.0, 1.0], g).unwrap();
        let f = combine(&k1, &k2, &k3).unwrap();
        assert_eq!(f.sum_coeffs, vec![1.0, 1.0]);
        assert_eq!(f.diff_coeffs, vec![1.0, -1.0]);
    }

    #[test]
    fn swapping_outer_slots_negates_diff_and_fixes_sum() {
        let g = profile();
        let k1 = SharedProfileFunctional::new(vec![0.3, -1.1, 0.9], g).unwrap();
        let k2 = SharedProfileFunctional::new(vec![-0.2, 0.5, 0.0], g).unwrap();
        let k3 = SharedProfileFunctional::new(vec![1.4, 0.8, -0.6], g).unwrap();
        let f = combine(&k1, &k2, &k3).unwrap();
        let swapped = combine(&k3, &k2, &k1).unwrap();
        for l in 0..3 {
            assert_eq!(swapped.sum_coeffs[l], f.sum_coeffs[l]);
            assert_eq!(swapped.diff_coeffs[l], -f.diff_coeffs[l]);
        }
    }

    #[test]
    fn combine_zero_evolution_reduces_to_pair() {
        let g = profile();
        let k1 = SharedProfileFunctional::new(vec![0.7, 0.2], g).unwrap();
        let k3 = SharedProfileFunctional::new(vec![0.1, -0.4], g).unwrap();
        let z = SharedProfileFunctional::zero_like(&k1);
        let f = combine(&k1, &z, &k3).unwrap();
        for (got, want) in f.sum_coeffs.iter().zip([0.8, -0.2]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        for (got, want) in f.diff_coeffs.iter().zip([0.6, 0.6]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn combine_is_linear_under_common_scaling(
                c1 in -2.0_f64..2.0, c2 in -2.0_f64..2.0, c3 in -2.0_f64..2.0,
                s in -3.0_f64..3.0,
            ) {
                let g = GaussianProfile::new(1.0, 1.0).unwrap();
                let k1 = SharedProfileFunctional::new(vec![c1], g).unwrap();
                let k2 = SharedProfileFunctional::new(vec![c2], g).unwrap();
                let k3 = SharedProfileFunctional::new(vec![c3], g).unwrap();
                let f = combine(&k1, &k2, &k3).unwrap();
                let fs = combine(&k1.scaled(s), &k2.scaled(s), &k3.scaled(s)).unwrap();
                prop_assert!((fs.sum_coeffs[0] - s * f.sum_coeffs[0]).abs() <= 1e-12 * (1.0 + f.sum_coeffs[0].abs() * s.abs()));
                prop_assert!((fs.diff_coeffs[0] - s * f.diff_coeffs[0]).abs() <= 1e-12 * (1.0 + f.diff_coeffs[0].abs() * s.abs()));
            }
        }
    }
}
