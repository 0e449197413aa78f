//! Orthogonal projections onto spans of complex vectors.

use num_complex::Complex64;

/// Relative norm below which a Gram-Schmidt residual counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt with one
/// reorthogonalization pass. Dependent vectors are skipped.
pub fn orthonormal_basis<V: AsRef<[Complex64]>>(vectors: &[V]) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let v = v.as_ref();
        let scale = norm_sqr(v).sqrt();
        if scale == 0.0 {
            continue;
        }
        let mut w = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let nw = norm_sqr(&w).sqrt();
        if nw <= RANK_TOL * scale {
            continue;
        }
        for wi in &mut w {
            *wi /= nw;
        }
        basis.push(w);
    }
    basis
}

/// `‖P y‖²` for the projection onto the span of an orthonormal basis.
pub fn projected_energy(y: &[Complex64], basis: &[Vec<Complex64>]) -> f64 {
    basis.iter().map(|q| inner(q, y).norm_sqr()).sum()
}

/// `‖P_span(vectors) y‖²`.
pub fn span_energy<V: AsRef<[Complex64]>>(y: &[Complex64], vectors: &[V]) -> f64 {
    projected_energy(y, &orthonormal_basis(vectors))
}

/// `<a, b> = Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_normal;
    use crate::rng::RngStream;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_least_squares() {
        let mut rng = RngStream::new(4, 0).rng();
        for (n, k) in [(6usize, 2usize), (10, 4), (30, 7)] {
            let vs: Vec<Vec<Complex64>> = (0..k).map(|_| (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect()).collect();
            let y: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect();
            let a = DMatrix::from_fn(n, k, |i, j| vs[j][i]);
            let svd = a.clone().svd(true, true);
            let u = svd.u.unwrap();
            let yv = DVector::from_vec(y.clone());
            let oracle = (u.adjoint() * &yv).norm_squared();
            assert!((span_energy(&y, &vs) - oracle).abs() < 1e-10 * oracle.max(1.0));
        }
    }

    #[test]
    fn dependent_vectors_are_skipped() {
        let v = vec![Complex64::new(1.0, 2.0), Complex64::new(0.5, -1.0), Complex64::new(3.0, 0.0)];
        let w: Vec<Complex64> = v.iter().map(|x| x * Complex64::new(0.0, 2.0)).collect();
        assert_eq!(orthonormal_basis(&[v.clone(), w]).len(), 1);
        assert!((span_energy(&v, std::slice::from_ref(&v)) - norm_sqr(&v)).abs() < 1e-12);
    }
}
