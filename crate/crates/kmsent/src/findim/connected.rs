//! Connected (truncated) n-point functions of a density matrix.
//!
//! For a state ω(·) = tr(ρ ·) the connected functions are defined through
//! the moment–cumulant relation over set partitions,
//!
//! ```text
//! ω(A₁ ⋯ A_n) = Σ_{partitions P of {1..n}}  Π_{blocks I ∈ P} ωᶜ(I),
//! ```
//!
//! where each block keeps its operators in the original index order (the
//! operators do not commute, but each block value is a scalar, so the product
//! over blocks is unambiguous).  Inverting by conditioning on the block that
//! contains the lowest index gives the recursion used here:
//!
//! ```text
//! ωᶜ(M) = ω(M) − Σ_{S ⊊ M, S ∋ min(M)} ωᶜ(S) · ω-moment-sum(M∖S),
//! ```
//!
//! with all 2^n moments precomputed once.  Mixed cumulants with an identity
//! slot vanish for n ≥ 2, which is what makes logarithms of expectation
//! series truncate.

use num_complex::Complex64;

use super::CMat;
use crate::{Error, Result};

/// Largest tuple length supported.  The partition count (Bell numbers) and
/// the 2^n moment table both grow quickly; five slots is all the expansion
/// machinery ever needs.
pub const MAX_POINTS: usize = 5;

/// Moments m[mask] = tr(ρ · Π_{i ∈ mask, ascending} ops[i]) for every mask.
/// m[0] = 1 by convention (empty product).
fn moments(rho: &CMat, ops: &[CMat]) -> Vec<Complex64> {
    let n = ops.len();
    let dim = rho.nrows();
    // prod[mask] = ordered product of the selected operators
    let mut prod: Vec<CMat> = Vec::with_capacity(1 << n);
    prod.push(CMat::identity(dim, dim));
    for mask in 1usize..(1 << n) {
        let high = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let rest = mask & !(1 << high);
        prod.push(&prod[rest] * &ops[high]);
    }
    prod.iter().map(|p| (rho * p).trace()).collect()
}

/// All cumulants c[mask] for nonempty masks, via the lowest-element
/// recursion.  Entry 0 is unused.
fn cumulant_table(m: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); 1 << n];
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << low);
        let mut value = m[mask];
        // proper sub-blocks S containing the lowest element: S = {low} ∪ sub,
        // sub a proper subset of rest (subsets of mask are numerically
        // smaller, so c[s] is already filled in)
        if rest != 0 {
            let mut sub = rest;
            loop {
                sub = (sub - 1) & rest;
                let s = sub | (1 << low);
                value -= c[s] * m[mask & !s];
                if sub == 0 {
                    break;
                }
            }
        }
        c[mask] = value;
    }
    c
}

/// Connected function ωᶜ(A₁ ⊗ … ⊗ A_n) of the full tuple, with
/// ω(·) = tr(ρ ·).
pub fn connected_function(rho: &CMat, ops: &[CMat]) -> Result<Complex64> {
    let n = ops.len();
    if n == 0 {
        return Err(Error::Config("connected function needs at least one operator".into()));
    }
    if n > MAX_POINTS {
        return Err(Error::UnsupportedOrder(format!(
            "connected functions support up to {MAX_POINTS} slots, got {n}"
        )));
    }
    let dim = rho.nrows();
    for (i, op) in ops.iter().enumerate() {
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::Config(format!(
                "operator {i} is {}x{}, state is {dim}x{dim}",
                op.nrows(),
                op.ncols()
            )));
        }
    }
    let m = moments(rho, ops);
    let c = cumulant_table(&m, n);
    Ok(c[(1 << n) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::findim::{gibbs_state, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace_re(rho: &CMat, op: &CMat) -> Complex64 {
        (rho * op).trace()
    }

    fn test_state(dim: usize, seed: u64) -> (CMat, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(dim, 1.0, &mut rng);
        (gibbs_state(&h, 1.2).unwrap(), rng)
    }

    #[test]
    fn single_point_is_plain_expectation() {
        let (rho, mut rng) = test_state(4, 11);
        let a = random_hermitian(4, 1.0, &mut rng);
        let c = connected_function(&rho, &[a.clone()]).unwrap();
        assert!((c - trace_re(&rho, &a)).norm() < 1e-14);
    }

    #[test]
    fn pair_is_covariance() {
        let (rho, mut rng) = test_state(4, 12);
        let a = random_hermitian(4, 1.0, &mut rng);
        let b = random_hermitian(4, 1.0, &mut rng);
        let c = connected_function(&rho, &[a.clone(), b.clone()]).unwrap();
        let expected = trace_re(&rho, &(&a * &b)) - trace_re(&rho, &a) * trace_re(&rho, &b);
        assert!((c - expected).norm() < 1e-14);
    }

    #[test]
    fn identity_slot_kills_higher_cumulants() {
        let (rho, mut rng) = test_state(3, 13);
        let a = random_hermitian(3, 1.0, &mut rng);
        let b = random_hermitian(3, 1.0, &mut rng);
        let id = CMat::identity(3, 3);
        let c2 = connected_function(&rho, &[a.clone(), id.clone()]).unwrap();
        let c3a = connected_function(&rho, &[a.clone(), id.clone(), b.clone()]).unwrap();
        let c3b = connected_function(&rho, &[id.clone(), a.clone(), b.clone()]).unwrap();
        assert!(c2.norm() < 1e-13);
        assert!(c3a.norm() < 1e-13);
        assert!(c3b.norm() < 1e-13);
    }

    #[test]
    fn repeated_diagonal_operator_matches_classical_cumulant() {
        // Diagonal state and operator commute, so the third connected
        // function must reduce to the classical third cumulant
        // κ₃ = m₃ − 3 m₂ m₁ + 2 m₁³ of the induced random variable.
        let p = [0.5, 0.3, 0.2];
        let rho = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            p.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let vals = [0.7, -0.4, 1.3];
        let a = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            3,
            vals.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        let m1: f64 = p.iter().zip(&vals).map(|(pi, vi)| pi * vi).sum();
        let m2: f64 = p.iter().zip(&vals).map(|(pi, vi)| pi * vi * vi).sum();
        let m3: f64 = p.iter().zip(&vals).map(|(pi, vi)| pi * vi * vi * vi).sum();
        let kappa3 = m3 - 3.0 * m2 * m1 + 2.0 * m1 * m1 * m1;
        let c = connected_function(&rho, &[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!((c.re - kappa3).abs() < 1e-13, "{} vs {}", c.re, kappa3);
        assert!(c.im.abs() < 1e-15);
    }

    /// Enumerate all set partitions of {0..n-1} as lists of blocks, each
    /// block a sorted index list.  Independent of the bitmask recursion.
    fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
        let mut out = vec![];
        let mut current: Vec<Vec<usize>> = vec![];
        fn go(k: usize, n: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
            if k == n {
                out.push(current.clone());
                return;
            }
            for i in 0..current.len() {
                current[i].push(k);
                go(k + 1, n, current, out);
                current[i].pop();
            }
            current.push(vec![k]);
            go(k + 1, n, current, out);
            current.pop();
        }
        go(0, n, &mut current, &mut out);
        out
    }

    #[test]
    fn cumulants_resum_to_the_moment() {
        // Σ over all 15 partitions of four slots, blocks in index order,
        // must rebuild tr(ρ A₁A₂A₃A₄) exactly.
        let (rho, mut rng) = test_state(4, 14);
        let ops: Vec<CMat> = (0..4).map(|_| random_hermitian(4, 1.0, &mut rng)).collect();
        let parts = partitions(4);
        assert_eq!(parts.len(), 15);
        let mut total = Complex64::new(0.0, 0.0);
        for part in &parts {
            let mut term = Complex64::new(1.0, 0.0);
            for block in part {
                let sel: Vec<CMat> = block.iter().map(|&i| ops[i].clone()).collect();
                term *= connected_function(&rho, &sel).unwrap();
            }
            total += term;
        }
        let mut prod = CMat::identity(4, 4);
        for op in &ops {
            prod = &prod * op;
        }
        let moment = (&rho * &prod).trace();
        assert!((total - moment).norm() < 1e-11, "{total} vs {moment}");
    }

    #[test]
    fn five_points_work_six_do_not() {
        let (rho, mut rng) = test_state(2, 15);
        let ops: Vec<CMat> = (0..6).map(|_| random_hermitian(2, 1.0, &mut rng)).collect();
        assert!(connected_function(&rho, &ops[..5]).is_ok());
        assert!(matches!(
            connected_function(&rho, &ops),
            Err(Error::UnsupportedOrder(_))
        ));
    }
}
