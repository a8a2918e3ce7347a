//! Solves with S = H − E₁ʰ on the full grid (PCG) or in a modal basis (direct).

use std::sync::Arc;

use super::modal::ModalOperator;
use super::operator::TwistedOperator;
use super::precond::ModalPreconditioner;
use crate::geometry::TubeGrid;
use crate::linalg::{pcg, BlockThomas, CgError, Mat};
use crate::scalar::Real;
use crate::{LabError, Result};

pub trait Elliptic<T: Real> {
    fn grid(&self) -> &TubeGrid<T>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn slice_width(&self) -> usize;
    /// y = S x
    fn apply(&self, x: &[T], y: &mut [T]);
    /// S x = b; returns x and the iteration count
    fn solve(&self, b: &[T]) -> Result<(Vec<T>, usize)>;
    fn delta(&self, node: usize) -> Vec<T>;
    fn lift(&self) -> Option<Arc<Mat<T>>>;
    fn project(&self, u: &[T]) -> Vec<T>;
}

pub struct FullElliptic<'a, T> {
    pub op: &'a TwistedOperator<T>,
    pub pre: &'a ModalPreconditioner<T>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a, T: Real> FullElliptic<'a, T> {
    pub fn new(op: &'a TwistedOperator<T>, pre: &'a ModalPreconditioner<T>) -> Self {
        FullElliptic { op, pre, tol: 1e-10, max_iter: 4000 }
    }
}

impl<T: Real> Elliptic<T> for FullElliptic<'_, T> {
    fn grid(&self) -> &TubeGrid<T> {
        &self.op.grid
    }
    fn len(&self) -> usize {
        self.op.len()
    }
    fn slice_width(&self) -> usize {
        self.op.grid.n2()
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.op.apply_shifted(x, y);
    }
    fn solve(&self, b: &[T]) -> Result<(Vec<T>, usize)> {
        let m = self.pre.affine(T::zero(), T::one());
        let mut x = vec![T::zero(); b.len()];
        let st = pcg(|v: &[T], o: &mut [T]| self.op.apply_shifted(v, o), |r: &[T], z: &mut [T]| m.apply(r, z), b, &mut x, self.tol, self.max_iter)
            .map_err(|e| match e {
                CgError::Indefinite { .. } => LabError::Solver(format!("H − E₁ʰ is not positive definite: {e}")),
                other => LabError::Cg(other),
            })?;
        Ok((x, st.iterations))
    }
    fn delta(&self, node: usize) -> Vec<T> {
        let mut u = vec![T::zero(); self.len()];
        u[node] = T::one() / self.op.grid.cell_volume();
        u
    }
    fn lift(&self) -> Option<Arc<Mat<T>>> {
        None
    }
    fn project(&self, u: &[T]) -> Vec<T> {
        u.to_vec()
    }
}

/// Modal operator with a cached direct factorisation of S.
pub struct ModalElliptic<'a, T> {
    pub op: &'a ModalOperator<T>,
    factor: BlockThomas<T>,
}

impl<'a, T: Real> ModalElliptic<'a, T> {
    pub fn new(op: &'a ModalOperator<T>) -> Result<Self> {
        let factor = BlockThomas::factor(&op.blocks, T::zero(), T::one())
            .ok_or_else(|| LabError::Solver("H − E₁ʰ is not positive definite in the modal basis".into()))?;
        Ok(ModalElliptic { op, factor })
    }
}

impl<T: Real> Elliptic<T> for ModalElliptic<'_, T> {
    fn grid(&self) -> &TubeGrid<T> {
        &self.op.grid
    }
    fn len(&self) -> usize {
        self.op.len()
    }
    fn slice_width(&self) -> usize {
        self.op.m
    }
    fn apply(&self, x: &[T], y: &mut [T]) {
        self.op.apply(x, y);
    }
    fn solve(&self, b: &[T]) -> Result<(Vec<T>, usize)> {
        let mut x = b.to_vec();
        self.factor.solve(&mut x);
        Ok((x, 1))
    }
    fn delta(&self, node: usize) -> Vec<T> {
        let n2 = self.op.grid.n2();
        let m = self.op.m;
        let vol = self.op.grid.cell_volume();
        let (k, i) = (node / n2, node % n2);
        let mut c = vec![T::zero(); self.len()];
        for j in 0..m {
            c[k * m + j] = self.op.phi[(i, j)] / vol;
        }
        c
    }
    fn lift(&self) -> Option<Arc<Mat<T>>> {
        Some(self.op.phi.clone())
    }
    fn project(&self, u: &[T]) -> Vec<T> {
        self.op.project(u)
    }
}

/// Multiply slice k of a state by f[k].
pub fn scale_slices<T: Real>(state: &mut [T], width: usize, f: &[T]) {
    for (block, &w) in state.chunks_mut(width).zip(f) {
        for v in block {
            *v *= w;
        }
    }
}
