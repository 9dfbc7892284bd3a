//! Truncated formal power series in a coupling constant.
//!
//! Coefficients are either plain reals or complex matrices; the series
//! itself never knows what the expansion parameter "is", it just tracks
//! coefficients up to a fixed truncation order and drops everything above.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// What a series coefficient must support.  `zero_like`/`one_like` take a
/// prototype so matrix coefficients can produce correctly sized zeros and
/// identities without the series carrying dimension information around.
pub trait SeriesElement: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;
    /// Largest absolute entry; used to decide whether a coefficient vanishes.
    fn max_abs(&self) -> f64;
}

impl SeriesElement for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl SeriesElement for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * factor
    }
    fn max_abs(&self) -> f64 {
        self.norm()
    }
}

impl SeriesElement for DMatrix<Complex64> {
    fn zero_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn one_like(&self) -> Self {
        DMatrix::identity(self.nrows(), self.ncols())
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        self * Complex64::new(factor, 0.0)
    }
    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Coefficients `c[0] + c[1] λ + … + c[N] λ^N`, truncated at order `N`.
#[derive(Debug, Clone)]
pub struct FormalSeries<T> {
    coeffs: Vec<T>,
}

impl<T: SeriesElement> FormalSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("series needs at least one coefficient".into()));
        }
        Ok(FormalSeries { coeffs })
    }

    /// Truncation order `N` (the highest retained power).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &T {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Sum, truncated to the shorter of the two operands.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeffs[k].add(&other.coeffs[k])).collect();
        FormalSeries { coeffs }
    }

    /// Cauchy product, truncated to the shorter operand.  The coefficient at
    /// order k only ever reads coefficients of order <= k from each factor.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.coeffs.len().min(other.coeffs.len());
        let zero = self.coeffs[0].zero_like();
        let mut coeffs = vec![zero; n];
        for k in 0..n {
            let mut acc = self.coeffs[0].zero_like();
            for a in 0..=k {
                acc = acc.add(&self.coeffs[a].mul(&other.coeffs[k - a]));
            }
            coeffs[k] = acc;
        }
        FormalSeries { coeffs }
    }

    pub fn scale(&self, factor: f64) -> Self {
        FormalSeries {
            coeffs: self.coeffs.iter().map(|c| c.scale(factor)).collect(),
        }
    }

    /// exp of a series with vanishing constant term.  With c[0] = 0 the
    /// argument is nilpotent at this truncation order, so the exponential is
    /// the finite sum `Σ_{n<=N} S^n / n!` — no transcendental matrix
    /// functions involved.
    pub fn exp(&self) -> Result<Self> {
        if self.coeffs[0].max_abs() > 1e-14 {
            return Err(Error::Config(
                "series exponential requires a vanishing constant term".into(),
            ));
        }
        let one = self.coeffs[0].one_like();
        let mut result = FormalSeries {
            coeffs: {
                let mut c = vec![self.coeffs[0].zero_like(); self.coeffs.len()];
                c[0] = one.clone();
                c
            },
        };
        // power = S^n / n!, built incrementally
        let mut power = result.clone();
        for n in 1..=self.order() {
            power = power.mul(self).scale(1.0 / n as f64);
            result = result.add(&power);
        }
        Ok(result)
    }

    /// Evaluate at a concrete coupling by Horner's rule.
    pub fn eval(&self, lambda: f64) -> T {
        let mut acc = self.coeffs[self.coeffs.len() - 1].clone();
        for k in (0..self.coeffs.len() - 1).rev() {
            acc = acc.scale(lambda).add(&self.coeffs[k]);
        }
        acc
    }
}
