//! Straightened twisted operator H = −Δ′ − (∂₃ + θ̇∂τ)² as a Gram form.

use crate::eigen2d::{assemble_lap2d, eigenpairs_2d, EigenMethod};
use crate::geometry::{TubeGrid, TwistProfile};
use crate::linalg::{dot, Csr};
use crate::scalar::Real;
use crate::{LabError, Result};

/// Centred-difference rotation field ∂τ = x₁∂₂ − x₂∂₁ on the cross-section (zero extension).
pub fn assemble_tau<T: Real>(cs: &crate::geometry::CrossSection<T>) -> Csr<T> {
    let n = cs.len();
    let c = T::one() / (T::lit(2.0) * cs.h);
    let mut trip = Vec::with_capacity(4 * n);
    for i in 0..n {
        let [x1, x2] = cs.coords[i];
        for (di, dj, w) in [(0, 1, x1), (0, -1, -x1), (1, 0, -x2), (-1, 0, x2)] {
            if let Some(nb) = cs.neighbor(i, di, dj) {
                trip.push((i, nb, w * c));
            }
        }
    }
    Csr::from_triplets(n, n, trip)
}

/// θ̇ at the z-edge midpoints −L + (e + ½)h₃, e = 0..=n₃.
pub fn edge_theta_dot<T: Real>(grid: &TubeGrid<T>, profile: &TwistProfile<T>) -> Vec<T> {
    let half = T::lit(0.5);
    (0..=grid.n3).map(|e| profile.theta_dot(-grid.half_length + (T::of(e) + half) * grid.h3)).collect()
}

/// AᵀA for a sparse A, bitwise symmetric.
fn gram<T: Real>(a: &Csr<T>) -> Csr<T> {
    let mut trip = Vec::new();
    for r in 0..a.nrows {
        let (idx, val) = a.row(r);
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate() {
                trip.push((i, j, val[p] * val[q]));
            }
        }
    }
    Csr::from_triplets(a.ncols, a.ncols, trip)
}

/// H = GᵀG (+ V) on a tube grid, together with the shift E₁ʰ.
#[derive(Debug, Clone)]
pub struct TwistedOperator<T> {
    pub grid: TubeGrid<T>,
    pub profile: TwistProfile<T>,
    /// lowest eigenvalue of the 5-point operator on the same cross-grid
    pub e1h: T,
    pub h: Csr<T>,
    pub lap2d: Csr<T>,
    pub tau: Csr<T>,
    /// τᵀτ
    pub tau_gram: Csr<T>,
    /// θ̇ at the z-edge midpoints; edge e joins slices e−1 and e (e = 0..=n₃)
    pub edge_theta_dot: Vec<T>,
    /// nonnegative potential at the grid nodes
    pub potential: Option<Vec<T>>,
}

impl<T: Real> TwistedOperator<T> {
    pub fn new(grid: TubeGrid<T>, profile: TwistProfile<T>, potential: Option<Vec<T>>) -> Result<Self> {
        let e1h = eigenpairs_2d(&grid.cross, 1, EigenMethod::Auto)?.e1();
        Self::with_shift(grid, profile, potential, e1h)
    }

    pub fn with_shift(grid: TubeGrid<T>, profile: TwistProfile<T>, potential: Option<Vec<T>>, e1h: T) -> Result<Self> {
        if let Some(v) = &potential {
            if v.len() != grid.len() {
                return Err(LabError::Config(format!("potential has {} entries, grid has {}", v.len(), grid.len())));
            }
            if let Some(p) = v.iter().position(|&x| !(x >= T::zero())) {
                return Err(LabError::Config(format!("potential must be nonnegative (entry {p} is {})", v[p])));
            }
        }
        let cs = &grid.cross;
        let lap2d = assemble_lap2d(cs)?;
        let tau = assemble_tau(cs);
        let tau_gram = gram(&tau);
        let edge_theta_dot = edge_theta_dot(&grid, &profile);
        let mut op = TwistedOperator {
            grid,
            profile,
            e1h,
            h: Csr { nrows: 0, ncols: 0, indptr: vec![0], indices: vec![], values: vec![] },
            lap2d,
            tau,
            tau_gram,
            edge_theta_dot,
            potential,
        };
        op.h = op.assemble();
        Ok(op)
    }

    fn assemble(&self) -> Csr<T> {
        let n2 = self.grid.n2();
        let n3 = self.grid.n3;
        let inv = T::one() / (self.grid.h3 * self.grid.h3);
        let h3 = self.grid.h3;
        let quarter = T::lit(0.25);
        let half = T::lit(0.5);
        let mut trip: Vec<(usize, usize, T)> = Vec::with_capacity(n3 * (self.lap2d.nnz() + 3 * self.tau_gram.nnz() + 3 * n2));
        for k in 0..n3 {
            let base = k * n2;
            let (lo, hi) = (self.edge_theta_dot[k], self.edge_theta_dot[k + 1]);
            let alpha = (lo * lo + hi * hi) * quarter;
            for i in 0..n2 {
                let (idx, val) = self.lap2d.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    trip.push((base + i, base + j, v));
                }
                trip.push((base + i, base + i, T::lit(2.0) * inv));
                if let Some(v) = &self.potential {
                    trip.push((base + i, base + i, v[base + i]));
                }
            }
            if alpha != T::zero() {
                for i in 0..n2 {
                    let (idx, val) = self.tau_gram.row(i);
                    for (&j, &v) in idx.iter().zip(val) {
                        trip.push((base + i, base + j, alpha * v));
                    }
                }
            }
            if k + 1 < n3 {
                // H_{k,k+1} = (−I/h₃ + cτᵀ)(I/h₃ + cτ) with c = θ̇/2 on edge k+1
                let next = base + n2;
                let c = hi;
                let cc = c * c * quarter;
                for i in 0..n2 {
                    trip.push((base + i, next + i, -inv));
                    trip.push((next + i, base + i, -inv));
                }
                if c != T::zero() {
                    let a = c * half / h3;
                    for i in 0..n2 {
                        let (idx, val) = self.tau.row(i);
                        for (&j, &v) in idx.iter().zip(val) {
                            // −(c/h₃)τ + (c/h₃)τᵀ
                            trip.push((base + i, next + j, -a * v));
                            trip.push((next + j, base + i, -a * v));
                            trip.push((base + j, next + i, a * v));
                            trip.push((next + i, base + j, a * v));
                        }
                        let (idx, val) = self.tau_gram.row(i);
                        for (&j, &v) in idx.iter().zip(val) {
                            trip.push((base + i, next + j, cc * v));
                            trip.push((next + j, base + i, cc * v));
                        }
                    }
                }
            }
        }
        let n = self.grid.len();
        Csr::from_triplets(n, n, trip)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// out = H u
    pub fn apply(&self, u: &[T], out: &mut [T]) {
        self.h.matvec(u, out);
    }

    /// out = (H − E₁ʰ) u
    pub fn apply_shifted(&self, u: &[T], out: &mut [T]) {
        self.h.matvec(u, out);
        for (o, &x) in out.iter_mut().zip(u) {
            *o -= self.e1h * x;
        }
    }

    /// Gradient stack G u: cross-section edge differences, then twisted z-edge rows.
    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        let g = &self.grid;
        let cs = &g.cross;
        let (n2, n3) = (g.n2(), g.n3);
        let h = cs.h;
        let h3 = g.h3;
        let mut out = Vec::with_capacity(5 * g.len());
        for k in 0..n3 {
            for i in 0..n2 {
                let a = u[g.node(i, k)];
                for (di, dj) in [(1, 0), (0, 1)] {
                    let b = cs.neighbor(i, di, dj).map_or(T::zero(), |nb| u[g.node(nb, k)]);
                    out.push((b - a) / h);
                }
                for (di, dj) in [(-1, 0), (0, -1)] {
                    if cs.neighbor(i, di, dj).is_none() {
                        out.push(-a / h);
                    }
                }
            }
        }
        let tau_slice = |k: usize| -> Vec<T> {
            let mut t = vec![T::zero(); n2];
            self.tau.matvec(&u[k * n2..(k + 1) * n2], &mut t);
            t
        };
        let half = T::lit(0.5);
        for e in 0..=n3 {
            let c = self.edge_theta_dot[e] * half;
            let (tl, th) = if c != T::zero() {
                (if e > 0 { tau_slice(e - 1) } else { vec![T::zero(); n2] }, if e < n3 { tau_slice(e) } else { vec![T::zero(); n2] })
            } else {
                (vec![], vec![])
            };
            for i in 0..n2 {
                let lo = if e > 0 { u[g.node(i, e - 1)] } else { T::zero() };
                let hi = if e < n3 { u[g.node(i, e)] } else { T::zero() };
                let mut row = (hi - lo) / h3;
                if c != T::zero() {
                    row += c * (tl[i] + th[i]);
                }
                out.push(row);
            }
        }
        out
    }

    /// uᵀ H u
    pub fn form(&self, u: &[T]) -> T {
        let mut hu = vec![T::zero(); u.len()];
        self.apply(u, &mut hu);
        dot(u, &hu)
    }

    /// Lower bound c₀ in uᵀH_θu ≥ c₀ uᵀH₀u (H₀ the untwisted operator).
    ///
    /// With M = ‖θ̇‖∞ max|x′|, Young's inequality at ε = (√(M⁴+4M²) − M²)/2 gives c₀ = 1 − ε.
    pub fn form_lower_bound(&self) -> T {
        let max_td = self.edge_theta_dot.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let m = max_td * self.grid.cross.max_radius();
        let m2 = m * m;
        let eps = ((m2 * m2 + T::lit(4.0) * m2).sqrt() - m2) * T::lit(0.5);
        T::one() - eps
    }

    /// The same grid without twist or potential.
    pub fn untwisted(&self) -> Result<Self> {
        Self::with_shift(self.grid.clone(), TwistProfile::straight(), None, self.e1h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CrossSection, Shape, Usage};
    use rand::{Rng, SeedableRng};

    fn small(beta: f64) -> TwistedOperator<f64> {
        let cs = CrossSection::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let grid = TubeGrid::new(cs, 4.0, 0.25, 1.0).unwrap();
        TwistedOperator::new(grid, TwistProfile::new(beta, 1.0).unwrap(), None).unwrap()
    }

    #[test]
    fn tau_is_antisymmetric() {
        let op = small(3.0);
        let t = &op.tau;
        for i in 0..t.nrows {
            let (idx, val) = t.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                assert_eq!(t.get(j, i), -v);
            }
        }
    }

    #[test]
    fn gram_identity_and_symmetry() {
        let op = small(3.0);
        assert_eq!(op.h.asymmetry(), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let u: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = op.gradient(&u);
            let gg: f64 = g.iter().map(|v| v * v).sum();
            let f = op.form(&u);
            assert!((f - gg).abs() < 1e-10 * gg, "{f} {gg}");
        }
    }

    #[test]
    fn cross_terms_vanish_outside_support() {
        let op = small(3.0);
        let g = &op.grid;
        for e in 0..=g.n3 {
            let z = -g.half_length + (e as f64 + 0.5) * g.h3;
            if z.abs() >= 1.0 {
                assert_eq!(op.edge_theta_dot[e], 0.0);
            }
        }
        let straight = op.untwisted().unwrap();
        // slices far from the twist carry identical rows
        let n2 = g.n2();
        let r = n2 / 2;
        let (a, va) = op.h.row(r);
        let (b, vb) = straight.h.row(r);
        assert_eq!(a, b);
        assert_eq!(va, vb);
    }

    #[test]
    fn form_dominates_plain_laplacian() {
        let op = small(3.0);
        let plain = op.untwisted().unwrap();
        let c0 = op.form_lower_bound();
        assert!(c0 > 0.0 && c0 < 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for trial in 0..200 {
            let u: Vec<f64> = (0..op.len())
                .map(|i| {
                    let z = op.grid.point(i)[2];
                    // concentrate half the trials on the twist zone
                    if trial % 2 == 0 && z.abs() > 1.2 {
                        0.0
                    } else {
                        rng.random_range(-1.0..1.0)
                    }
                })
                .collect();
            assert!(op.form(&u) >= c0 * plain.form(&u));
        }
    }

    #[test]
    fn negative_potential_rejected() {
        let cs = CrossSection::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let grid = TubeGrid::new(cs, 4.0, 0.25, 1.0).unwrap();
        let mut v = vec![0.0; grid.len()];
        v[5] = -1.0;
        assert!(TwistedOperator::new(grid, TwistProfile::straight(), Some(v)).is_err());
    }
}
