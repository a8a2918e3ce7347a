//! Reference operator A = −Δ + θ̇² − E₁ on the straight tube: tensor kernel and weights.

use serde::Serialize;

use crate::eigen2d::Basis2d;
use crate::geometry::TubeGrid;
use crate::longitudinal::{GroundStates, Kernel1d};
use crate::nash::gamma;
use crate::scalar::Real;

/// w_j(x) = ψ₁(x′) g_j(x₃) on a tube grid.
#[derive(Debug, Clone)]
pub struct WeightField<T> {
    pub j: usize,
    pub values: Vec<T>,
}

impl<T: Real> WeightField<T> {
    pub fn new(grid: &TubeGrid<T>, basis: &Basis2d<T>, gs: &GroundStates<T>, j: usize) -> Self {
        let n2 = grid.n2();
        let psi = basis.psi(0);
        let mut values = Vec::with_capacity(grid.len());
        for k in 0..grid.n3 {
            let g = gs.g(j, grid.z(k));
            values.extend(psi[..n2].iter().map(|&p| p * g));
        }
        WeightField { j, values }
    }

    pub fn all(grid: &TubeGrid<T>, basis: &Basis2d<T>, gs: &GroundStates<T>) -> [Self; 3] {
        [0, 1, 2].map(|j| Self::new(grid, basis, gs, j))
    }
}

/// Point of the straight tube addressed by cross-section node and x₃.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubePoint<T> {
    pub node: usize,
    pub x3: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefValue {
    pub value: f64,
    /// bound on the contribution of the discarded cross-section modes
    pub tail_bound: f64,
    /// tail bound above 1% of the value
    pub tail_warning: bool,
    pub valid: bool,
}

/// Tensor kernel of A truncated to the first `m` cross-section modes.
///
/// The tail uses Σⱼ ψⱼ(x′)² = h⁻² on the discrete cross-section.
pub fn ref_kernel<T: Real>(basis: &Basis2d<T>, k1: &Kernel1d<T>, t: T, x: TubePoint<T>, y: TubePoint<T>, m: usize) -> RefValue {
    let m = m.min(basis.len());
    let e1 = basis.e1();
    let mut cross = T::zero();
    for j in 0..m {
        cross += (t * (e1 - basis.values[j])).exp() * basis.psi(j)[x.node] * basis.psi(j)[y.node];
    }
    let q = k1.q(t, x.x3, y.x3);
    let value = cross.as_f64() * q.value;
    let tail_bound = if m < basis.len() {
        (t * (e1 - basis.values[m])).exp().as_f64() / (basis.h * basis.h).as_f64() * q.value.abs()
    } else {
        // spectrum beyond the computed modes is unknown
        f64::NAN
    };
    RefValue { value, tail_bound, tail_warning: !(tail_bound <= 0.01 * value.abs()), valid: q.valid }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefSample {
    pub t: f64,
    pub node: usize,
    pub x3: f64,
    pub value: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub tail_bound: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefEnvelopeReport {
    /// max of ratio and 1/ratio over valid samples
    pub c_emp: f64,
    /// max of the ratio alone (the upper bound is what the estimate asserts)
    pub c_upper: f64,
    pub samples: Vec<RefSample>,
    /// the envelope does not apply to the critical straight tube
    pub skipped: bool,
}

/// e^{−tA}(x,x) against w₀²(x) γ(t) on the given samples.
pub fn reference_envelope_check<T: Real>(
    basis: &Basis2d<T>,
    k1: &Kernel1d<T>,
    gs: &GroundStates<T>,
    times: &[f64],
    points: &[TubePoint<T>],
    m: usize,
) -> RefEnvelopeReport {
    if gs.critical || k1.critical {
        return RefEnvelopeReport { c_emp: f64::NAN, c_upper: f64::NAN, samples: vec![], skipped: true };
    }
    let mut samples = Vec::new();
    for &t in times {
        for p in points {
            let v = ref_kernel(basis, k1, T::lit(t), *p, *p, m);
            let w0 = (basis.psi(0)[p.node] * gs.g0(p.x3)).as_f64();
            let envelope = w0 * w0 * gamma(t);
            samples.push(RefSample {
                t,
                node: p.node,
                x3: p.x3.as_f64(),
                value: v.value,
                envelope,
                ratio: v.value / envelope,
                tail_bound: v.tail_bound,
                valid: v.valid,
            });
        }
    }
    let valid = samples.iter().filter(|s| s.valid);
    let c_upper = valid.clone().map(|s| s.ratio).fold(0.0, f64::max);
    let c_emp = valid.map(|s| s.ratio.max(1.0 / s.ratio)).fold(0.0, f64::max);
    RefEnvelopeReport { c_emp, c_upper, samples, skipped: false }
}

/// max over nodes and t of Σ_{j≤m} e^{t(E₁−Eⱼ)} ψⱼ²(x′) / ψ₁²(x′).
pub fn cross_ultracontractivity<T: Real>(basis: &Basis2d<T>, times: &[f64]) -> f64 {
    let e1 = basis.e1();
    let n = basis.vectors.rows;
    let mut worst = 0.0f64;
    for &t in times {
        let t = T::lit(t);
        for x in 0..n {
            let p1 = basis.psi(0)[x];
            let mut s = T::zero();
            for j in 0..basis.len() {
                let pj = basis.psi(j)[x];
                s += (t * (e1 - basis.values[j])).exp() * pj * pj;
            }
            worst = worst.max((s / (p1 * p1)).as_f64());
        }
    }
    worst
}
