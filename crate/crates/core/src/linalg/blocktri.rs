//! Symmetric block-tridiagonal matrices: inertia counts by block elimination.

use super::dense::{cholesky, cholesky_solve, sym_eigen, Mat};
use crate::scalar::Real;

/// `diag[k]` are the symmetric diagonal blocks, `upper[k]` couples block k to k+1.
#[derive(Debug, Clone)]
pub struct BlockTridiag<T> {
    pub diag: Vec<Mat<T>>,
    pub upper: Vec<Mat<T>>,
}

impl<T: Real> BlockTridiag<T> {
    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |d| d.rows)
    }

    pub fn dim(&self) -> usize {
        self.diag.len() * self.block_size()
    }

    /// Number of eigenvalues strictly below `shift`.
    ///
    /// Uses the additivity of inertia over the Schur complements
    /// `D_{k+1} = A_{k+1} - B_kᵀ D_k⁻¹ B_k`.
    pub fn count_below(&self, shift: T) -> usize {
        let m = self.block_size();
        let tiny = T::EPS.sqrt();
        let mut count = 0;
        let mut prev: Option<(Vec<T>, Mat<T>)> = None;
        for k in 0..self.diag.len() {
            let mut d = self.diag[k].clone();
            for i in 0..m {
                d[(i, i)] -= shift;
            }
            if let Some((vals, vecs)) = &prev {
                // B_{k-1}ᵀ D⁻¹ B_{k-1} with D = V Λ Vᵀ
                let b = &self.upper[k - 1];
                let vtb = vecs.tmatmul(b);
                let mut scaled = vtb.clone();
                let scale_ref = vals.iter().fold(T::zero(), |s, v| s.max(v.abs())).max(T::one());
                for j in 0..m {
                    for i in 0..m {
                        let lam = vals[i];
                        let lam = if lam.abs() < tiny * scale_ref { tiny * scale_ref * lam.signum() } else { lam };
                        scaled[(i, j)] = vtb[(i, j)] / lam;
                    }
                }
                let corr = vtb.tmatmul(&scaled);
                for j in 0..m {
                    for i in 0..m {
                        d[(i, j)] -= corr[(i, j)];
                    }
                }
                d.symmetrize();
            }
            let eig = sym_eigen(&d);
            count += eig.values.iter().filter(|&&v| v < T::zero()).count();
            prev = Some((eig.values, eig.vectors));
        }
        count
    }

    pub fn to_dense(&self) -> Mat<T> {
        let m = self.block_size();
        let n = self.dim();
        let mut a = Mat::zeros(n, n);
        for (k, d) in self.diag.iter().enumerate() {
            for j in 0..m {
                for i in 0..m {
                    a[(k * m + i, k * m + j)] = d[(i, j)];
                }
            }
        }
        for (k, b) in self.upper.iter().enumerate() {
            for j in 0..m {
                for i in 0..m {
                    a[(k * m + i, (k + 1) * m + j)] = b[(i, j)];
                    a[((k + 1) * m + j, k * m + i)] = b[(i, j)];
                }
            }
        }
        a
    }
}

/// Block LU of c₀I + c₁A for SPD block-tridiagonal systems.
#[derive(Debug, Clone)]
pub struct BlockThomas<T> {
    m: usize,
    chol: Vec<Mat<T>>,
    /// c₁B_k
    coupling: Vec<Mat<T>>,
    /// D̃_k⁻¹c₁B_k
    w: Vec<Mat<T>>,
}

impl<T: Real> BlockThomas<T> {
    /// `None` when a Schur complement is not positive definite.
    pub fn factor(a: &BlockTridiag<T>, c0: T, c1: T) -> Option<Self> {
        let m = a.block_size();
        let n = a.diag.len();
        let mut chol = Vec::with_capacity(n);
        let mut coupling: Vec<Mat<T>> = Vec::with_capacity(n);
        let mut w: Vec<Mat<T>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut d = a.diag[k].clone();
            for v in d.data.iter_mut() {
                *v *= c1;
            }
            for i in 0..m {
                d[(i, i)] += c0;
            }
            if k > 0 {
                let corr = coupling[k - 1].tmatmul(&w[k - 1]);
                for (x, &c) in d.data.iter_mut().zip(&corr.data) {
                    *x -= c;
                }
                d.symmetrize();
            }
            let l = cholesky(&d)?;
            if k + 1 < n {
                let mut b = a.upper[k].clone();
                for v in b.data.iter_mut() {
                    *v *= c1;
                }
                let mut wk = b.clone();
                for j in 0..m {
                    cholesky_solve(&l, wk.col_mut(j));
                }
                coupling.push(b);
                w.push(wk);
            }
            chol.push(l);
        }
        Some(BlockThomas { m, chol, coupling, w })
    }

    pub fn solve(&self, x: &mut [T]) {
        let m = self.m;
        let n = self.chol.len();
        for k in 0..n {
            if k > 0 {
                let (prev, cur) = x.split_at_mut(k * m);
                let yp = &prev[(k - 1) * m..];
                let b = &self.coupling[k - 1];
                for j in 0..m {
                    cur[j] -= b.col(j).iter().zip(yp).map(|(&a, &y)| a * y).sum::<T>();
                }
            }
            cholesky_solve(&self.chol[k], &mut x[k * m..(k + 1) * m]);
        }
        for k in (0..n.saturating_sub(1)).rev() {
            let (cur, next) = x.split_at_mut((k + 1) * m);
            let corr = self.w[k].matvec(&next[..m]);
            for (c, v) in cur[k * m..].iter_mut().zip(corr) {
                *c -= v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockTridiag<f64> {
        let m = 3;
        let nb = 6;
        let mut diag = vec![];
        let mut upper = vec![];
        for k in 0..nb {
            let mut d = Mat::<f64>::zeros(m, m);
            for i in 0..m {
                d[(i, i)] = 2.0 + (k * m + i) as f64 * 0.3;
            }
            d[(0, 1)] = 0.4;
            d[(1, 0)] = 0.4;
            diag.push(d);
            if k + 1 < nb {
                let mut b = Mat::zeros(m, m);
                for i in 0..m {
                    b[(i, i)] = -1.0;
                }
                b[(2, 0)] = 0.7;
                upper.push(b);
            }
        }
        BlockTridiag { diag, upper }
    }

    #[test]
    fn inertia_matches_dense_spectrum() {
        let bt = sample();
        let dense = sym_eigen(&bt.to_dense());
        for &s in &[0.0, 1.0, 2.5, 4.0, 6.0, 9.0] {
            let exact = dense.values.iter().filter(|&&v| v < s).count();
            assert_eq!(bt.count_below(s), exact, "shift {s}");
        }
    }

    #[test]
    fn block_thomas_solves() {
        let bt = sample();
        let a = bt.to_dense();
        let n = a.rows;
        let f = BlockThomas::factor(&bt, 3.0, 0.5).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let ax = a.matvec(&x);
        let mut b: Vec<f64> = ax.iter().zip(&x).map(|(&p, &q)| 0.5 * p + 3.0 * q).collect();
        f.solve(&mut b);
        for (p, q) in b.iter().zip(&x) {
            assert!((p - q).abs() < 1e-10);
        }
    }
}
