//! Quasi-Newton search directions.
//!
//! [`two_loop_direction`] is the O(q·d) L-BFGS recursion used in training.
//! [`dense_bfgs_oracle`] materializes the same inverse-Hessian approximation
//! as a d×d matrix by applying the BFGS update pair by pair; it exists to
//! check the recursion and costs O(q·d³).

use crate::curvature::{CurvaturePair, CurvatureStore};
use crate::error::{Error, Result};
use crate::linalg::{axpy_into, dot_unchecked, ParamVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionResult {
    /// `−H⁻¹g`.
    pub direction: ParamVector,
    /// Scale of the initial inverse Hessian `γI`.
    pub gamma: f64,
}

/// `γ = (s·t)/(t·t)` from the newest pair, or 1 with no pairs.
pub fn initial_scaling(newest: Option<&CurvaturePair>) -> f64 {
    match newest {
        Some(p) => dot_unchecked(p.s(), p.t()) / dot_unchecked(p.t(), p.t()),
        None => 1.0,
    }
}

pub fn two_loop_direction(store: &CurvatureStore, g: &[f64]) -> Result<DirectionResult> {
    let pairs: Vec<&CurvaturePair> = store.pairs().collect();
    two_loop(&pairs, g)
}

fn two_loop(pairs: &[&CurvaturePair], g: &[f64]) -> Result<DirectionResult> {
    for (index, p) in pairs.iter().enumerate() {
        if !p.rho().is_finite() || p.rho() <= 0.0 {
            return Err(Error::CorruptStore { index, rho: p.rho() });
        }
        if p.s().len() != g.len() {
            return Err(Error::Dimension {
                expected: p.s().len(),
                actual: g.len(),
            });
        }
    }

    let mut q = g.to_vec();
    let mut alphas = vec![0.0; pairs.len()];
    for (i, p) in pairs.iter().enumerate().rev() {
        let a = p.rho() * dot_unchecked(p.s(), &q);
        alphas[i] = a;
        axpy_into(-a, p.t(), &mut q);
    }

    let gamma = initial_scaling(pairs.last().copied());
    for v in q.iter_mut() {
        *v *= gamma;
    }

    for (p, a) in pairs.iter().zip(&alphas) {
        let beta = p.rho() * dot_unchecked(p.t(), &q);
        axpy_into(a - beta, p.s(), &mut q);
    }

    for v in q.iter_mut() {
        *v = -*v;
    }
    let direction = ParamVector::from(q);
    if !direction.is_finite() {
        return Err(Error::NonFinite("search direction"));
    }
    Ok(DirectionResult { direction, gamma })
}

/// Row-major d×d inverse-Hessian approximation after applying
/// `H ← VᵀHV + ρssᵀ`, `V = I − ρtsᵀ`, oldest pair first, from `γI`.
pub fn dense_inverse_hessian(pairs: &[CurvaturePair], d: usize) -> Vec<f64> {
    let gamma = initial_scaling(pairs.last());
    let mut h = vec![0.0; d * d];
    for i in 0..d {
        h[i * d + i] = gamma;
    }
    for p in pairs {
        let (s, t, rho) = (p.s(), p.t(), p.rho());
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                v[i * d + j] = if i == j { 1.0 } else { 0.0 } - rho * t[i] * s[j];
            }
        }
        let hv = matmul(&h, &v, d);
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let vt_hv: f64 = (0..d).map(|k| v[k * d + i] * hv[k * d + j]).sum();
                next[i * d + j] = vt_hv + rho * s[i] * s[j];
            }
        }
        h = next;
    }
    h
}

/// `−H⁻¹g` with `H⁻¹` from [`dense_inverse_hessian`].
pub fn dense_bfgs_oracle(pairs: &[CurvaturePair], g: &[f64]) -> ParamVector {
    let d = g.len();
    let h = dense_inverse_hessian(pairs, d);
    (0..d)
        .map(|i| -(0..d).map(|j| h[i * d + j] * g[j]).sum::<f64>())
        .collect()
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::MemoryPolicy;

    fn store_with(pairs: &[CurvaturePair]) -> CurvatureStore {
        let mut store = CurvatureStore::new(MemoryPolicy::fixed(pairs.len().max(1))).unwrap();
        for p in pairs {
            store.admit_pair(p.clone());
        }
        store
    }

    #[test]
    fn empty_store_is_steepest_descent() {
        let store = store_with(&[]);
        let r = two_loop_direction(&store, &[3.0, -1.0]).unwrap();
        assert_eq!(r.direction.as_slice(), &[-3.0, 1.0]);
        assert_eq!(r.gamma, 1.0);
        assert_eq!(dense_bfgs_oracle(&[], &[3.0, -1.0]).as_slice(), &[-3.0, 1.0]);
    }

    #[test]
    fn one_pair_matches_explicit_update() {
        // s = [1, 0], t = [2, 1]: t·s = 2, ρ = 1/2, γ = 2/5
        let s: ParamVector = vec![1.0, 0.0].into();
        let t: ParamVector = vec![2.0, 1.0].into();
        let pair = CurvaturePair::try_new(s, t, 1e-10).unwrap().unwrap();
        let g = [0.3, -0.7];
        // V = I − ρ t sᵀ = [[0, 0], [−1/2, 1]]
        // H = Vᵀ(γI)V + ρ s sᵀ = γ·[[1/4, −1/2], [−1/2, 1]] + [[1/2, 0], [0, 0]]
        let gamma = 0.4;
        let h = [gamma * 0.25 + 0.5, -gamma * 0.5, -gamma * 0.5, gamma];
        let want = [-(h[0] * g[0] + h[1] * g[1]), -(h[2] * g[0] + h[3] * g[1])];

        let pairs = std::slice::from_ref(&pair);
        let got = two_loop_direction(&store_with(pairs), &g).unwrap();
        assert!((got.gamma - gamma).abs() < 1e-15);
        let dense = dense_bfgs_oracle(pairs, &g);
        for (i, w) in want.iter().enumerate() {
            assert!((got.direction[i] - w).abs() < 1e-12);
            assert!((dense[i] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let pair = CurvaturePair::try_new(vec![1.0, 0.0].into(), vec![1.0, 0.0].into(), 0.0)
            .unwrap()
            .unwrap();
        assert!(two_loop_direction(&store_with(&[pair]), &[1.0]).is_err());
    }
}
