//! Symmetric tridiagonal matrices: solves, Sturm counts, eigenpairs.

use crate::scalar::Real;

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone)]
pub struct SymTridiag<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> SymTridiag<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert!(diag.is_empty() || off.len() + 1 == diag.len());
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    fn norm_bound(&self) -> T {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: T) -> usize {
        let tiny = T::min_positive_value().sqrt();
        let mut count = 0;
        let mut q = T::one();
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { T::zero() };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { T::zero() };
            if q == T::zero() {
                q = -tiny;
            }
            if q < T::zero() {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> T {
        let nb = self.norm_bound();
        let (mut lo, mut hi) = (-nb - T::one(), nb + T::one());
        let tol = T::lit(2.0) * T::EPS * nb.max(T::min_positive_value());
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if hi - lo <= tol || mid == lo || mid == hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.eigenvalue(k)).collect()
    }

    /// Full eigendecomposition by bisection plus inverse iteration.
    ///
    /// Eigenvectors are Euclidean-normalised and returned column-major
    /// (`n x n`), eigenvalues ascending.
    pub fn eigen(&self) -> (Vec<T>, Vec<T>) {
        let n = self.len();
        let values = self.eigenvalues();
        let nb = self.norm_bound();
        let cluster_gap = T::lit(1e-8) * nb;
        let mut vecs = vec![T::zero(); n * n];
        let mut cluster_start = 0;
        for k in 0..n {
            if k > 0 && values[k] - values[k - 1] > cluster_gap {
                cluster_start = k;
            }
            let v = self.inverse_iteration(values[k], k, &vecs[cluster_start * n..k * n], n);
            vecs[k * n..(k + 1) * n].copy_from_slice(&v);
        }
        (values, vecs)
    }

    fn inverse_iteration(&self, lambda: T, seed: usize, previous: &[T], n: usize) -> Vec<T> {
        let lu = TriLu::new(self, lambda);
        // deterministic pseudo-random start vector
        let mut x: Vec<T> = (0..n)
            .map(|i| {
                let h = ((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)) >> 11;
                T::lit(0.5 + (h as f64) / ((1u64 << 53) as f64))
            })
            .collect();
        for _ in 0..3 {
            lu.solve(&mut x);
            for p in previous.chunks(n) {
                let c = crate::linalg::dot(p, &x);
                crate::linalg::axpy(-c, p, &mut x);
            }
            let nrm = crate::linalg::norm2(&x);
            crate::linalg::scale(T::one() / nrm, &mut x);
        }
        x
    }

    /// Solve (self + shift I) x = rhs in place (partial pivoting).
    pub fn solve_shifted(&self, shift: T, rhs: &mut [T]) {
        TriLu::new(self, -shift).solve(rhs);
    }
}

/// LU factorisation of `T - lambda I` with partial pivoting.
struct TriLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: Real> TriLu<T> {
    fn new(t: &SymTridiag<T>, lambda: T) -> Self {
        let n = t.len();
        let mut d: Vec<T> = t.diag.iter().map(|&a| a - lambda).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let floor = T::EPS * t.norm_bound().max(T::min_positive_value());
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == T::zero() {
                    d[i] = floor;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == T::zero() {
            d[n - 1] = floor;
        }
        TriLu { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [T]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        if n == 0 {
            return;
        }
        b[n - 1] /= self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Pre-factorised solver for diagonally dominant symmetric tridiagonal systems.
#[derive(Debug, Clone)]
pub struct Thomas<T> {
    off: Vec<T>,
    inv_piv: Vec<T>,
    cprime: Vec<T>,
}

impl<T: Real> Thomas<T> {
    pub fn new(diag: &[T], off: &[T]) -> Self {
        let n = diag.len();
        let mut inv_piv = vec![T::zero(); n];
        let mut cprime = vec![T::zero(); n];
        let mut prev_c = T::zero();
        for i in 0..n {
            let sub = if i > 0 { off[i - 1] } else { T::zero() };
            let piv = diag[i] - sub * prev_c;
            inv_piv[i] = T::one() / piv;
            let sup = if i + 1 < n { off[i] } else { T::zero() };
            prev_c = sup * inv_piv[i];
            cprime[i] = prev_c;
        }
        Thomas { off: off.to_vec(), inv_piv, cprime }
    }

    /// Solve in place; `stride` addresses a strided vector inside `x`.
    #[inline]
    pub fn solve_strided(&self, x: &mut [T], offset: usize, stride: usize) {
        let n = self.inv_piv.len();
        let mut prev = T::zero();
        for i in 0..n {
            let p = offset + i * stride;
            let sub = if i > 0 { self.off[i - 1] } else { T::zero() };
            prev = (x[p] - sub * prev) * self.inv_piv[i];
            x[p] = prev;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let p = offset + i * stride;
            x[p] = x[p] - self.cprime[i] * x[p + stride];
        }
    }

    pub fn solve(&self, x: &mut [T]) {
        self.solve_strided(x, 0, 1);
    }
}
