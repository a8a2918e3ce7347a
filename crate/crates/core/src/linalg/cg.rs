//! Preconditioned conjugate gradients.

use super::{axpy, dot};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CgError {
    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("conjugate gradients did not converge: residual {rel_residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, rel_residual: f64 },
}

/// Solve `A x = b` from the initial guess already stored in `x`.
///
/// `apply(v, out)` computes `A v`, `precond(r, out)` an approximation of `A^{-1} r`.
pub fn pcg<T, A, M>(apply: A, precond: M, b: &[T], x: &mut [T], tol: f64, max_iter: usize) -> Result<CgStats, CgError>
where
    T: Real,
    A: Fn(&[T], &mut [T]),
    M: Fn(&[T], &mut [T]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt().as_f64();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgStats { iterations: 0, rel_residual: 0.0 });
    }
    let mut r = vec![T::zero(); n];
    apply(x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![T::zero(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut rel = dot(&r, &r).sqrt().as_f64() / bnorm;
    if rel <= tol {
        return Ok(CgStats { iterations: 0, rel_residual: rel });
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(CgError::Indefinite { iteration: it, curvature: pap.as_f64() });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rel = dot(&r, &r).sqrt().as_f64() / bnorm;
        if rel <= tol {
            return Ok(CgStats { iterations: it, rel_residual: rel });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(CgError::NoConvergence { iterations: max_iter, rel_residual: rel })
}

/// Jacobi preconditioner from a diagonal.
pub fn jacobi<T: Real>(diag: &[T]) -> impl Fn(&[T], &mut [T]) + '_ {
    move |r, z| {
        for ((zi, &ri), &di) in z.iter_mut().zip(r).zip(diag) {
            *zi = ri / di;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Csr;

    #[test]
    fn solves_spd_and_flags_indefinite() {
        let n = 50;
        let mut trip = vec![];
        for i in 0..n {
            trip.push((i, i, 2.5));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let a = Csr::from_triplets(n, n, trip);
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let b = a.mul(&xs);
        let d = a.diagonal();
        let mut x = vec![0.0; n];
        let st = pcg(|v, o| a.matvec(v, o), jacobi(&d), &b, &mut x, 1e-12, 500).unwrap();
        assert!(st.iterations > 0);
        assert!(x.iter().zip(&xs).all(|(p, q)| (p - q).abs() < 1e-9));

        let neg = |v: &[f64], o: &mut [f64]| {
            for (oi, vi) in o.iter_mut().zip(v) {
                *oi = -vi;
            }
        };
        let mut y = vec![0.0; n];
        let e = pcg(neg, |r: &[f64], z: &mut [f64]| z.copy_from_slice(r), &b, &mut y, 1e-10, 10);
        assert!(matches!(e, Err(CgError::Indefinite { .. })));
    }
}
