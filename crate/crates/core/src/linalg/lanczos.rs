//! Block Lanczos with full reorthogonalisation for the top of a symmetric spectrum.

use super::dense::{sym_eigen, Mat};
use super::{axpy, dot, norm2, scale};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LanczosResult<T> {
    /// Ritz values, descending
    pub values: Vec<T>,
    /// Ritz vectors as columns (n x k)
    pub vectors: Mat<T>,
    pub steps: usize,
    pub converged: bool,
}

fn pseudo_random<T: Real>(n: usize, salt: u64) -> Vec<T> {
    let mut state = 0x2545_F491_4F6C_DD1Du64 ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            T::lit((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}

/// Orthonormalise `w` against `basis` (twice) and return its norm before normalisation.
fn orthonormalize<T: Real>(w: &mut [T], basis: &[Vec<T>]) -> T {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
    let nrm = norm2(w);
    if nrm > T::zero() {
        scale(T::one() / nrm, w);
    }
    nrm
}

/// Largest `want` eigenpairs of the symmetric operator `apply`.
///
/// `block` start vectors are used so that eigenvalues of multiplicity up
/// to `block` are resolved. Convergence: Ritz residual <= `tol * |theta|`.
pub fn block_lanczos<T, F>(apply: F, n: usize, want: usize, block: usize, max_steps: usize, tol: f64) -> LanczosResult<T>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    let block = block.max(1).min(n);
    let want = want.min(n);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut salt = 1u64;
    for _ in 0..block {
        loop {
            let mut v = pseudo_random::<T>(n, salt);
            salt += 1;
            if orthonormalize(&mut v, &basis) > T::lit(1e-8) {
                basis.push(v);
                break;
            }
        }
    }
    // projected matrix accumulated explicitly: T = Qᵀ A Q
    let mut images: Vec<Vec<T>> = Vec::new();
    let mut tcols: Vec<Vec<T>> = Vec::new();
    let mut result = LanczosResult { values: vec![], vectors: Mat::zeros(n, 0), steps: 0, converged: false };
    let mut done = 0usize;
    let mut step = 0usize;
    while step < max_steps {
        step += 1;
        let start = done;
        let end = basis.len();
        for j in start..end {
            let mut w = vec![T::zero(); n];
            apply(&basis[j], &mut w);
            tcols.push((0..=j).map(|i| dot(&basis[i], &w)).collect());
            images.push(w);
        }
        done = end;
        let k = basis.len();
        let full = k >= n;
        let check = full || step % 4 == 0 || step == max_steps;
        if check && k >= want {
            let mut t = Mat::zeros(k, k);
            for (j, col) in tcols.iter().enumerate() {
                for (i, &v) in col.iter().enumerate() {
                    t[(i, j)] = v;
                    t[(j, i)] = v;
                }
            }
            let eig = sym_eigen(&t);
            let mut values = Vec::with_capacity(want);
            let mut vectors = Mat::zeros(n, want);
            let mut ok = true;
            for c in 0..want {
                let col = k - 1 - c;
                let theta = eig.values[col];
                let s = eig.vectors.col(col);
                let mut y = vec![T::zero(); n];
                let mut ay = vec![T::zero(); n];
                for (j, &sj) in s.iter().enumerate() {
                    axpy(sj, &basis[j], &mut y);
                    axpy(sj, &images[j], &mut ay);
                }
                axpy(-theta, &y, &mut ay);
                if norm2(&ay).as_f64() > tol * theta.abs().as_f64() {
                    ok = false;
                }
                values.push(theta);
                vectors.col_mut(c).copy_from_slice(&y);
            }
            result = LanczosResult { values, vectors, steps: step, converged: ok };
            if ok || full {
                result.converged = ok || full;
                return result;
            }
        }
        // next block from the images of the newest block
        let mut added = 0;
        for j in start..end {
            let mut w = images[j].clone();
            let nrm = orthonormalize(&mut w, &basis);
            if nrm > T::lit(1e-10) * norm2(&images[j]).max(T::min_positive_value()) {
                basis.push(w);
                added += 1;
            }
        }
        while added < block && basis.len() < n {
            let mut v = pseudo_random::<T>(n, salt);
            salt += 1;
            if orthonormalize(&mut v, &basis) > T::lit(1e-8) {
                basis.push(v);
                added += 1;
            }
        }
        if basis.len() == done {
            break;
        }
    }
    result.steps = step;
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_top_of_diagonal_with_multiplicity() {
        let n = 300;
        let mut d: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        d[n - 2] = d[n - 1];
        let apply = |v: &[f64], o: &mut [f64]| {
            for i in 0..n {
                o[i] = d[i] * v[i];
            }
        };
        let r = block_lanczos(apply, n, 3, 3, 200, 1e-10);
        assert!(r.converged);
        assert!((r.values[0] - d[n - 1]).abs() < 1e-10);
        assert!((r.values[1] - d[n - 1]).abs() < 1e-10);
        assert!((r.values[2] - d[n - 3]).abs() < 1e-10);
    }
}
