//! Banded Cholesky factorisation for sparse SPD matrices with narrow bandwidth.

use super::sparse::Csr;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct BandCholesky<T> {
    n: usize,
    p: usize,
    /// row i holds L[i, i-p ..= i] at offsets 0..=p
    l: Vec<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn bandwidth(a: &Csr<T>) -> usize {
        let mut p = 0;
        for r in 0..a.nrows {
            for &c in a.row(r).0 {
                p = p.max(r.abs_diff(c));
            }
        }
        p
    }

    /// Factor `a + shift I`; `None` if it is not positive definite.
    pub fn factor(a: &Csr<T>, shift: T) -> Option<Self> {
        let n = a.nrows;
        let p = Self::bandwidth(a);
        let w = p + 1;
        let mut l = vec![T::zero(); n * w];
        for r in 0..n {
            let (idx, val) = a.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                if c <= r {
                    l[r * w + (c + p - r)] = v;
                }
            }
            l[r * w + p] += shift;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(p));
                let mut s = l[i * w + (j + p - i)];
                for k in k0..j {
                    s -= l[i * w + (k + p - i)] * l[j * w + (k + p - j)];
                }
                if j == i {
                    if s <= T::zero() {
                        return None;
                    }
                    l[i * w + p] = s.sqrt();
                } else {
                    l[i * w + (j + p - i)] = s / l[j * w + p];
                }
            }
        }
        Some(BandCholesky { n, p, l })
    }

    pub fn solve(&self, b: &mut [T]) {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.l[i * w + (k + p - i)] * b[k];
            }
            b[i] = s / self.l[i * w + p];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + p + 1).min(n) {
                s -= self.l[k * w + (i + p - k)] * b[k];
            }
            b[i] = s / self.l[i * w + p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_band_system() {
        let n = 30;
        let mut trip = vec![];
        for i in 0..n {
            trip.push((i, i, 6.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
            if i + 5 < n {
                trip.push((i, i + 5, -2.0));
                trip.push((i + 5, i, -2.0));
            }
        }
        let a = Csr::from_triplets(n, n, trip);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul(&x);
        let f = BandCholesky::factor(&a, 0.0).unwrap();
        f.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
        assert!(BandCholesky::factor(&a, -20.0).is_none());
    }
}
