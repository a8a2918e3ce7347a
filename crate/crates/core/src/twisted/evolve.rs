//! Crank–Nicolson evolution of heat-kernel columns of H − E₁ʰ.

use std::sync::Arc;

use serde::Serialize;

use super::operator::TwistedOperator;
use super::precond::{ModalPreconditioner, ModalSolver};
use crate::geometry::TubeGrid;
use crate::linalg::{pcg, CgError, Mat};
use crate::scalar::Real;
use crate::{LabError, Result};

/// Sub-step and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct StepPolicy {
    /// Δt ≤ fraction · t_target
    pub fraction: f64,
    /// optional absolute cap on Δt
    pub cap: Option<f64>,
    /// backward-Euler half-steps replacing the first Crank–Nicolson step
    pub startup: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy { fraction: 1.0 / 20.0, cap: None, startup: 2, cg_tol: 1e-10, cg_max_iter: 500 }
    }
}

impl StepPolicy {
    fn max_step(&self, target: f64) -> f64 {
        let dt = self.fraction * target;
        self.cap.map_or(dt, |c| dt.min(c))
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StepStats {
    pub steps: usize,
    pub cg_iterations: usize,
    pub max_rel_residual: f64,
}

/// Time stepper with a cached modal factorisation per step size.
pub struct Propagator<'a, T> {
    pub op: &'a TwistedOperator<T>,
    pre: &'a ModalPreconditioner<T>,
    pub policy: StepPolicy,
    cached: std::cell::RefCell<Option<(u64, ModalSolver<'a, T>)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    CrankNicolson,
    BackwardEuler,
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(op: &'a TwistedOperator<T>, pre: &'a ModalPreconditioner<T>, policy: StepPolicy) -> Self {
        Propagator { op, pre, policy, cached: std::cell::RefCell::new(None) }
    }

    fn solve(&self, a: T, rhs: &[T], x: &mut [T], stats: &mut StepStats) -> Result<()> {
        let key = a.as_f64().to_bits();
        let mut cache = self.cached.borrow_mut();
        if cache.as_ref().is_none_or(|(k, _)| *k != key) {
            *cache = Some((key, self.pre.solver(a)));
        }
        let solver = &cache.as_ref().unwrap().1;
        let n = rhs.len();
        let apply = |v: &[T], out: &mut [T]| {
            self.op.apply_shifted(v, out);
            for (o, &vi) in out.iter_mut().zip(v) {
                *o = vi + a * *o;
            }
        };
        debug_assert_eq!(x.len(), n);
        let st = pcg(apply, |r: &[T], z: &mut [T]| solver.apply(r, z), rhs, x, self.policy.cg_tol, self.policy.cg_max_iter)
            .map_err(|e| match e {
                CgError::NoConvergence { iterations, rel_residual } => LabError::Solver(format!(
                    "CG did not converge at step {} (a = {}): residual {rel_residual:e} after {iterations} iterations",
                    stats.steps + 1,
                    a
                )),
                other => LabError::Cg(other),
            })?;
        stats.cg_iterations += st.iterations;
        stats.max_rel_residual = stats.max_rel_residual.max(st.rel_residual);
        Ok(())
    }

    fn step(&self, u: &mut Vec<T>, dt: T, scheme: Scheme, stats: &mut StepStats) -> Result<()> {
        let n = u.len();
        let mut x = u.clone();
        match scheme {
            Scheme::CrankNicolson => {
                let a = dt * T::lit(0.5);
                let mut su = vec![T::zero(); n];
                self.op.apply_shifted(u, &mut su);
                let rhs: Vec<T> = u.iter().zip(&su).map(|(&ui, &si)| ui - a * si).collect();
                self.solve(a, &rhs, &mut x, stats)?;
            }
            Scheme::BackwardEuler => {
                self.solve(dt, u, &mut x, stats)?;
            }
        }
        *u = x;
        stats.steps += 1;
        Ok(())
    }

    /// Advance `u` from `from` to `to`; `fresh` requests the backward-Euler start.
    pub fn advance(&self, u: &mut Vec<T>, from: f64, to: f64, fresh: bool, stats: &mut StepStats) -> Result<()> {
        if to <= from {
            return Ok(());
        }
        let dt_max = self.policy.max_step(to);
        let n = ((to - from) / dt_max).ceil().max(1.0) as usize;
        let dt = (to - from) / n as f64;
        for s in 0..n {
            if s == 0 && fresh && self.policy.startup > 0 {
                let sub = dt / self.policy.startup as f64;
                for _ in 0..self.policy.startup {
                    self.step(u, T::lit(sub), Scheme::BackwardEuler, stats)?;
                }
            } else {
                self.step(u, T::lit(dt), Scheme::CrankNicolson, stats)?;
            }
        }
        Ok(())
    }

    /// Evolve an initial vector through the increasing time list.
    pub fn evolve_vector(&self, u0: Vec<T>, times: &[f64]) -> Result<(Vec<Vec<T>>, StepStats)> {
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
}

/// Common interface of the full-grid and modal time steppers.
///
/// States are either grid functions or per-slice modal coefficients; in both
/// cases the slice blocks are contiguous and ∫|u|² = vol·Σ state².
pub trait Evolver<T: Real> {
    fn grid(&self) -> &TubeGrid<T>;
    fn e1h(&self) -> T;
    /// state of δ_node / cell volume
    fn delta(&self, node: usize) -> Vec<T>;
    fn evolve_vector(&self, u0: Vec<T>, times: &[f64]) -> Result<(Vec<Vec<T>>, StepStats)>;
    /// n₂ × m Euclidean-orthonormal lift for modal states
    fn lift(&self) -> Option<Arc<Mat<T>>>;
    /// grid function → state
    fn project(&self, u: &[T]) -> Vec<T>;
    /// width of one slice block in the state
    fn slice_width(&self) -> usize;
    fn is_straight(&self) -> bool;
}

impl<T: Real> Evolver<T> for Propagator<'_, T> {
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
        let mut u = vec![T::zero(); self.op.len()];
        u[node] = T::one() / self.op.grid.cell_volume();
        u
    }
    fn evolve_vector(&self, u0: Vec<T>, times: &[f64]) -> Result<(Vec<Vec<T>>, StepStats)> {
        Propagator::evolve_vector(self, u0, times)
    }
    fn lift(&self) -> Option<Arc<Mat<T>>> {
        None
    }
    fn project(&self, u: &[T]) -> Vec<T> {
        u.to_vec()
    }
    fn slice_width(&self) -> usize {
        self.op.grid.n2()
    }
}

/// Heat-kernel columns u(t_k, ·) ≈ e^{−t_k(H−E₁ʰ)}(·, x₀).
#[derive(Debug, Clone)]
pub struct KernelField<T> {
    pub source: usize,
    pub times: Vec<f64>,
    pub columns: Vec<Vec<T>>,
    pub cell_volume: f64,
    pub e1h: f64,
    pub stats: StepStats,
    /// modal lift; `None` when the columns are grid functions
    pub lift: Option<Arc<Mat<T>>>,
    pub n2: usize,
}

impl<T: Real> KernelField<T> {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.max(1.0))
    }

    /// k(t_i, y, x₀)
    pub fn value(&self, i: usize, node: usize) -> f64 {
        state_value(&self.columns[i], self.lift.as_deref(), self.n2, node)
    }

    /// Column at t_i as a grid function.
    pub fn grid_column(&self, i: usize) -> Vec<f64> {
        match &self.lift {
            None => self.columns[i].iter().map(|v| v.as_f64()).collect(),
            Some(phi) => {
                let m = phi.cols;
                self.columns[i]
                    .chunks(m)
                    .flat_map(|a| phi.matvec(a).into_iter().map(|v| v.as_f64()))
                    .collect()
            }
        }
    }

    /// ∫ k(t_i, y, x₀) dy of the shifted kernel.
    pub fn mass(&self, i: usize) -> f64 {
        self.grid_column(i).iter().sum::<f64>() * self.cell_volume
    }

    /// Mass of the unshifted kernel e^{−E₁ʰt}∫k.
    pub fn unshifted_mass(&self, i: usize) -> f64 {
        (-self.e1h * self.times[i]).exp() * self.mass(i)
    }

    /// min u / max u at t_i (negative when Crank–Nicolson undershoots).
    pub fn undershoot(&self, i: usize) -> f64 {
        let col = self.grid_column(i);
        let max = col.iter().fold(f64::MIN, |m, &v| m.max(v));
        let min = col.iter().fold(f64::MAX, |m, &v| m.min(v));
        min / max
    }
}

/// Value of a (full or modal) state at a grid node.
pub fn state_value<T: Real>(state: &[T], lift: Option<&Mat<T>>, n2: usize, node: usize) -> f64 {
    match lift {
        None => state[node].as_f64(),
        Some(phi) => {
            let (k, i) = (node / n2, node % n2);
            let m = phi.cols;
            (0..m).map(|j| phi[(i, j)] * state[k * m + j]).sum::<T>().as_f64()
        }
    }
}

/// k(2t_i, x₀, x₀) = ∫ k(t_i, x₀, y)² dy.
pub fn diag_via_l2<T: Real>(field: &KernelField<T>, i: usize) -> f64 {
    field.columns[i].iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() * field.cell_volume
}

/// Evolve the column from source node `x0` through `times`.
pub fn evolve<T: Real, E: Evolver<T> + ?Sized>(prop: &E, x0: usize, times: &[f64]) -> Result<KernelField<T>> {
    let grid = prop.grid();
    if x0 >= grid.len() {
        return Err(LabError::Config(format!("source node {x0} outside the grid")));
    }
    let (columns, stats) = prop.evolve_vector(prop.delta(x0), times)?;
    Ok(KernelField {
        source: x0,
        times: times.to_vec(),
        columns,
        cell_volume: grid.cell_volume().as_f64(),
        e1h: prop.e1h().as_f64(),
        stats,
        lift: prop.lift(),
        n2: grid.n2(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CrossSection, Shape, TubeGrid, TwistProfile, Usage};

    #[test]
    fn straight_square_matches_separable_value() {
        let cs = CrossSection::<f64>::new_unchecked(Shape::unit_square(), 1.0 / 10.0);
        let grid = TubeGrid::new(cs, 16.0, 0.25, 1.0).unwrap();
        let op = TwistedOperator::new(grid, TwistProfile::straight(), None).unwrap();
        let pre = ModalPreconditioner::new(&op).unwrap();
        let prop = Propagator::new(&op, &pre, StepPolicy::default());
        let x0 = op.grid.nearest([0.0, 0.0, 0.0]).unwrap();
        let times = [0.0625, 0.25, 1.0, 2.5, 5.0, 10.0];
        let f = evolve(&prop, x0, &times).unwrap();
        let exact = 4.0 / (40.0 * std::f64::consts::PI).sqrt();
        let i10 = f.index_of(10.0).unwrap();
        let i5 = f.index_of(5.0).unwrap();
        assert!((f.value(i10, x0) - exact).abs() < 0.02 * exact, "{}", f.value(i10, x0));
        assert!((diag_via_l2(&f, i5) - exact).abs() < 0.02 * exact);
        for i in 0..f.times.len() {
            assert!(f.unshifted_mass(i) <= 1.0 + 1e-6);
        }
        assert!(f.stats.cg_iterations <= 3 * f.stats.steps);
    }

    #[test]
    fn twisted_column_symmetry() {
        let cs = CrossSection::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let grid = TubeGrid::new(cs, 4.0, 0.25, 1.0).unwrap();
        let op = TwistedOperator::new(grid, TwistProfile::new(3.0, 1.0).unwrap(), None).unwrap();
        let pre = ModalPreconditioner::new(&op).unwrap();
        let prop = Propagator::new(&op, &pre, StepPolicy::default());
        let a = op.grid.nearest([0.1, 0.05, -0.5]).unwrap();
        let b = op.grid.nearest([-0.2, 0.1, 0.5]).unwrap();
        let times = [0.05, 0.1, 0.2, 0.4, 0.8];
        let fa = evolve(&prop, a, &times).unwrap();
        let fb = evolve(&prop, b, &times).unwrap();
        let (x, y) = (fa.value(4, b), fb.value(4, a));
        assert!((x - y).abs() < 1e-6 * x.abs().max(y.abs()), "{x} {y}");
    }
}
