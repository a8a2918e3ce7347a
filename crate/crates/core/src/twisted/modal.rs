//! Galerkin projection of H − E₁ʰ onto the lowest cross-section modes.
//!
//! The projected operator is block tridiagonal in x₃ with m × m blocks. It
//! reproduces the full grid exactly when m = n₂ and is used for long tubes,
//! direct time stepping and inertia counts. Potentials are functions of x₃ only.

use std::cell::RefCell;
use std::sync::Arc;

use super::evolve::{Evolver, StepPolicy, StepStats};
use super::operator::{assemble_tau, edge_theta_dot};
use crate::eigen2d::{eigenpairs_2d, EigenMethod};
use crate::geometry::{TubeGrid, TwistProfile};
use crate::linalg::{BlockThomas, BlockTridiag, Mat};
use crate::scalar::Real;
use crate::{LabError, Result};

#[derive(Debug, Clone)]
pub struct ModalOperator<T> {
    pub grid: TubeGrid<T>,
    pub profile: TwistProfile<T>,
    pub e1h: T,
    pub m: usize,
    /// cross-section eigenvalues λ₁ ≤ … ≤ λ_m
    pub values: Vec<T>,
    /// n₂ × m, Euclidean orthonormal
    pub phi: Arc<Mat<T>>,
    /// S = Φᵀ(H − E₁ʰ)Φ slice by slice
    pub blocks: BlockTridiag<T>,
}

impl<T: Real> ModalOperator<T> {
    /// `potential` holds one value per slice and may have either sign.
    pub fn new(grid: TubeGrid<T>, profile: TwistProfile<T>, potential: Option<&[T]>, m: usize) -> Result<Self> {
        let n2 = grid.n2();
        let n3 = grid.n3;
        if m == 0 || m > n2 {
            return Err(LabError::Config(format!("mode count {m} outside 1..={n2}")));
        }
        if let Some(v) = potential {
            if v.len() != n3 {
                return Err(LabError::Config(format!("slice potential has {} entries, grid has {n3} slices", v.len())));
            }
        }
        let basis = eigenpairs_2d(&grid.cross, m, EigenMethod::Auto)?;
        let phi = basis.orthonormal();
        let e1h = basis.e1();
        let tau = assemble_tau(&grid.cross);
        let mut tphi = Mat::zeros(n2, m);
        for j in 0..m {
            tau.matvec(phi.col(j), tphi.col_mut(j));
        }
        let k_mat = tphi.tmatmul(&tphi);
        let a_mat = phi.tmatmul(&tphi);
        let edges = edge_theta_dot(&grid, &profile);
        let inv = T::one() / (grid.h3 * grid.h3);
        let (quarter, half) = (T::lit(0.25), T::lit(0.5));
        let mut diag = Vec::with_capacity(n3);
        let mut upper = Vec::with_capacity(n3.saturating_sub(1));
        for k in 0..n3 {
            let (lo, hi) = (edges[k], edges[k + 1]);
            let alpha = (lo * lo + hi * hi) * quarter;
            let v = potential.map_or(T::zero(), |p| p[k]);
            let mut d = Mat::zeros(m, m);
            for j in 0..m {
                for i in 0..m {
                    d[(i, j)] = alpha * k_mat[(i, j)];
                }
                d[(j, j)] += basis.values[j] - e1h + T::lit(2.0) * inv + v;
            }
            d.symmetrize();
            diag.push(d);
            if k + 1 < n3 {
                let a = hi * half / grid.h3;
                let cc = hi * hi * quarter;
                let mut u = Mat::zeros(m, m);
                for j in 0..m {
                    for i in 0..m {
                        u[(i, j)] = -a * a_mat[(i, j)] + a * a_mat[(j, i)] + cc * k_mat[(i, j)];
                    }
                    u[(j, j)] -= inv;
                }
                upper.push(u);
            }
        }
        Ok(ModalOperator {
            grid,
            profile,
            e1h,
            m,
            values: basis.values[..m].to_vec(),
            phi: Arc::new(phi),
            blocks: BlockTridiag { diag, upper },
        })
    }

    pub fn len(&self) -> usize {
        self.m * self.grid.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// y = S x
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let m = self.m;
        let n3 = self.grid.n3;
        for k in 0..n3 {
            let out = &mut y[k * m..(k + 1) * m];
            let d = self.blocks.diag[k].matvec(&x[k * m..(k + 1) * m]);
            out.copy_from_slice(&d);
            if k > 0 {
                let b = self.blocks.upper[k - 1].tmatvec(&x[(k - 1) * m..k * m]);
                for (o, v) in out.iter_mut().zip(b) {
                    *o += v;
                }
            }
            if k + 1 < n3 {
                let b = self.blocks.upper[k].matvec(&x[(k + 1) * m..(k + 2) * m]);
                for (o, v) in out.iter_mut().zip(b) {
                    *o += v;
                }
            }
        }
    }

    /// Quadratic form xᵀSx.
    pub fn form(&self, x: &[T]) -> T {
        let mut y = vec![T::zero(); x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(&a, &b)| a * b).sum()
    }

    /// Number of eigenvalues of S strictly below `shift`.
    pub fn count_below(&self, shift: T) -> usize {
        self.blocks.count_below(shift)
    }

    /// Solve S x = b directly; error if S is not positive definite.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let f = BlockThomas::factor(&self.blocks, T::zero(), T::one())
            .ok_or_else(|| LabError::Solver("modal operator is not positive definite".into()))?;
        let mut x = b.to_vec();
        f.solve(&mut x);
        Ok(x)
    }

    pub fn project(&self, u: &[T]) -> Vec<T> {
        let n2 = self.grid.n2();
        u.chunks(n2).flat_map(|s| self.phi.tmatvec(s)).collect()
    }

    pub fn lift(&self, c: &[T]) -> Vec<T> {
        c.chunks(self.m).flat_map(|a| self.phi.matvec(a)).collect()
    }
}

/// Direct Crank–Nicolson stepper for a modal operator.
pub struct ModalPropagator<'a, T> {
    pub op: &'a ModalOperator<T>,
    pub policy: StepPolicy,
    cached: RefCell<Option<(u64, BlockThomas<T>)>>,
}

impl<'a, T: Real> ModalPropagator<'a, T> {
    pub fn new(op: &'a ModalOperator<T>, policy: StepPolicy) -> Self {
        ModalPropagator { op, policy, cached: RefCell::new(None) }
    }

    fn solve(&self, a: T, x: &mut [T]) -> Result<()> {
        let key = a.as_f64().to_bits();
        let mut cache = self.cached.borrow_mut();
        if cache.as_ref().is_none_or(|(k, _)| *k != key) {
            let f = BlockThomas::factor(&self.op.blocks, T::one(), a)
                .ok_or_else(|| LabError::Solver(format!("I + {a}·S is not positive definite")))?;
            *cache = Some((key, f));
        }
        cache.as_ref().unwrap().1.solve(x);
        Ok(())
    }

    fn step(&self, u: &mut [T], dt: T, implicit_euler: bool) -> Result<()> {
        if implicit_euler {
            return self.solve(dt, u);
        }
        let a = dt * T::lit(0.5);
        let mut su = vec![T::zero(); u.len()];
        self.op.apply(u, &mut su);
        for (x, s) in u.iter_mut().zip(&su) {
            *x -= a * *s;
        }
        self.solve(a, u)
    }

    pub fn advance(&self, u: &mut [T], from: f64, to: f64, fresh: bool, stats: &mut StepStats) -> Result<()> {
        if to <= from {
            return Ok(());
        }
        let mut dt_max = self.policy.fraction * to;
        if let Some(c) = self.policy.cap {
            dt_max = dt_max.min(c);
        }
        let n = ((to - from) / dt_max).ceil().max(1.0) as usize;
        let dt = (to - from) / n as f64;
        for s in 0..n {
            if s == 0 && fresh && self.policy.startup > 0 {
                let sub = dt / self.policy.startup as f64;
                for _ in 0..self.policy.startup {
                    self.step(u, T::lit(sub), true)?;
                    stats.steps += 1;
                }
            } else {
                self.step(u, T::lit(dt), false)?;
                stats.steps += 1;
            }
        }
        Ok(())
    }
}

impl<T: Real> Evolver<T> for ModalPropagator<'_, T> {
    fn grid(&self) -> &TubeGrid<T> {
        &self.op.grid
    }
    fn is_straight(&self) -> bool {
        self.op.profile.is_straight()
    }
    fn e1h(&self) -> T {
        self.op.e1h
    }
    fn delta(&self, node: usize) -> Vec<T> {
        let n2 = self.op.grid.n2();
        let m = self.op.m;
        let vol = self.op.grid.cell_volume();
        let (k, i) = (node / n2, node % n2);
        let mut c = vec![T::zero(); self.op.len()];
        for j in 0..m {
            c[k * m + j] = self.op.phi[(i, j)] / vol;
        }
        c
    }
    fn evolve_vector(&self, u0: Vec<T>, times: &[f64]) -> Result<(Vec<Vec<T>>, StepStats)> {
        let mut stats = StepStats::default();
        let mut u = u0;
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for (i, &target) in times.iter().enumerate() {
            if target < t {
                return Err(LabError::Config("time grid must be increasing".into()));
            }
            self.advance(&mut u, t, target, i == 0, &mut stats)?;
            t = target;
            out.push(u.clone());
        }
        Ok((out, stats))
    }
    fn lift(&self) -> Option<Arc<Mat<T>>> {
        Some(self.op.phi.clone())
    }
    fn project(&self, u: &[T]) -> Vec<T> {
        self.op.project(u)
    }
    fn slice_width(&self) -> usize {
        self.op.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CrossSection, Shape, Usage};
    use crate::twisted::evolve::{diag_via_l2, evolve, Propagator};
    use crate::twisted::{ModalPreconditioner, TwistedOperator};

    fn small_grid() -> TubeGrid<f64> {
        let cs = CrossSection::new_unchecked(Shape::Ellipse { a: 0.7, b: 0.5 }, 0.125);
        TubeGrid::new(cs, 4.0, 0.25, 1.0).unwrap()
    }

    #[test]
    fn complete_basis_reproduces_full_grid() {
        let grid = small_grid();
        let p = TwistProfile::new(3.0, 1.0).unwrap();
        let n2 = grid.n2();
        let modal = ModalOperator::new(grid.clone(), p.clone(), None, n2).unwrap();
        let full = TwistedOperator::new(grid, p, None).unwrap();
        let x: Vec<f64> = (0..full.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut hx = vec![0.0; x.len()];
        full.apply_shifted(&x, &mut hx);
        let c = modal.project(&x);
        let mut sc = vec![0.0; c.len()];
        modal.apply(&c, &mut sc);
        let back = modal.lift(&sc);
        let scale = hx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in back.iter().zip(&hx) {
            assert!((a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn few_modes_match_full_kernel() {
        let cs = CrossSection::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let grid = TubeGrid::new(cs, 8.0, 0.25, 1.0).unwrap();
        let p = TwistProfile::new(3.0, 1.0).unwrap();
        let full = TwistedOperator::new(grid.clone(), p.clone(), None).unwrap();
        let pre = ModalPreconditioner::new(&full).unwrap();
        let fp = Propagator::new(&full, &pre, StepPolicy::default());
        let modal = ModalOperator::new(grid.clone(), p, None, 10).unwrap();
        let mp = ModalPropagator::new(&modal, StepPolicy::default());
        let x0 = grid.nearest([0.0, 0.0, 0.0]).unwrap();
        let times = [0.25, 0.5, 1.0, 2.0];
        let a = evolve(&fp, x0, &times).unwrap();
        let b = evolve(&mp, x0, &times).unwrap();
        for i in 2..4 {
            let (da, db) = (diag_via_l2(&a, i), diag_via_l2(&b, i));
            assert!((da - db).abs() < 0.01 * da, "{da} {db}");
        }
        let y = grid.nearest([0.2, 0.1, 1.0]).unwrap();
        assert!((a.value(3, y) - b.value(3, y)).abs() < 0.02 * a.value(3, y));
    }

    #[test]
    fn straight_counts_separate_by_mode() {
        let grid = small_grid();
        let n3 = grid.n3;
        let v: Vec<f64> = (0..n3).map(|k| if grid.z(k).abs() <= 1.0 { -30.0 } else { 0.0 }).collect();
        let modal = ModalOperator::new(grid.clone(), TwistProfile::straight(), Some(&v), 6).unwrap();
        let dense = crate::linalg::sym_eigen(&modal.blocks.to_dense());
        let exact = dense.values.iter().filter(|&&x| x < -1e-6).count();
        assert_eq!(modal.count_below(-1e-6), exact);
        assert!(exact >= 1);
    }
}
