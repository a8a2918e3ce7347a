//! Dirichlet eigenpairs of the cross-section (5-point finite differences).

use serde::Serialize;

use crate::geometry::CrossSection;
use crate::linalg::{block_lanczos, norm2, sym_eigen, BandCholesky, Csr, Mat};
use crate::scalar::Real;
use crate::{LabError, Result};

/// Sizes up to this use the dense eigensolver by default.
pub const DENSE_MAX: usize = 1000;

/// 5-point Dirichlet Laplacian with zero extension outside the mask.
pub fn assemble_lap2d<T: Real>(cs: &CrossSection<T>) -> Result<Csr<T>> {
    if !cs.is_connected() {
        return Err(LabError::Geometry("cross-section mask is empty or disconnected".into()));
    }
    let n = cs.len();
    let inv_h2 = T::one() / (cs.h * cs.h);
    let mut trip = Vec::with_capacity(5 * n);
    for k in 0..n {
        trip.push((k, k, T::lit(4.0) * inv_h2));
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if let Some(nb) = cs.neighbor(k, di, dj) {
                trip.push((k, nb, -inv_h2));
            }
        }
    }
    Ok(Csr::from_triplets(n, n, trip))
}

/// Lowest cross-sectional eigenpairs, ψⱼ normalised by h² Σ ψ² = 1.
#[derive(Debug, Clone)]
pub struct Basis2d<T> {
    pub values: Vec<T>,
    /// column j holds ψⱼ at the interior nodes
    pub vectors: Mat<T>,
    pub h: T,
    /// E₂ − E₁ > 1e−8 E₁
    pub simple_ground: bool,
}

impl<T: Real> Basis2d<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn e1(&self) -> T {
        self.values[0]
    }

    pub fn psi(&self, j: usize) -> &[T] {
        self.vectors.col(j)
    }

    /// Euclidean-orthonormal copy of the basis (ψ scaled by h).
    pub fn orthonormal(&self) -> Mat<T> {
        let mut m = self.vectors.clone();
        m.data.iter_mut().for_each(|v| *v *= self.h);
        m
    }

    pub fn truncate(&self, m: usize) -> Self {
        let m = m.min(self.len());
        let rows = self.vectors.rows;
        Basis2d {
            values: self.values[..m].to_vec(),
            vectors: Mat::from_col_major(rows, m, self.vectors.data[..rows * m].to_vec()),
            h: self.h,
            simple_ground: self.simple_ground,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Auto,
    Dense,
    Lanczos,
}

fn orient<T: Real>(v: &mut [T], reference: usize) {
    let mut s = v[reference];
    if s.abs() <= T::lit(1e-10) * norm2(v) {
        s = v.iter().fold(T::zero(), |acc, &x| if x.abs() > acc.abs() { x } else { acc });
    }
    if s < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Lowest `m` eigenpairs of the 5-point operator.
pub fn eigenpairs_2d<T: Real>(cs: &CrossSection<T>, m: usize, method: EigenMethod) -> Result<Basis2d<T>> {
    let a = assemble_lap2d(cs)?;
    let n = cs.len();
    let m = m.min(n).max(1);
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= DENSE_MAX,
    };
    let (values, mut vecs) = if dense || m * 3 > n {
        let eig = sym_eigen(&Mat::from_col_major(n, n, a.to_dense()));
        let vecs = Mat::from_col_major(n, m, eig.vectors.data[..n * m].to_vec());
        (eig.values[..m].to_vec(), vecs)
    } else {
        let chol = BandCholesky::factor(&a, T::zero())
            .ok_or_else(|| LabError::Eigen("Laplacian factorisation failed".into()))?;
        let apply = |v: &[T], out: &mut [T]| {
            out.copy_from_slice(v);
            chol.solve(out);
        };
        let block = 4.min(n);
        let res = block_lanczos(apply, n, m, block, (50 * m).max(20), 1e-12);
        if res.values.len() < m {
            return Err(LabError::Eigen("Lanczos produced too few Ritz pairs".into()));
        }
        let values: Vec<T> = res.values.iter().map(|&th| T::one() / th).collect();
        (values, res.vectors)
    };
    let origin = cs.origin_node();
    let mut out = Mat::zeros(n, m);
    for j in 0..m {
        let col = vecs.col_mut(j);
        let nrm = norm2(col);
        col.iter_mut().for_each(|x| *x /= nrm);
        orient(col, origin);
        // residual in the Euclidean normalisation
        let av = a.mul(col);
        let res = av.iter().zip(col.iter()).map(|(&p, &q)| (p - values[j] * q) * (p - values[j] * q)).sum::<T>().sqrt();
        let tol = (T::lit(1e-8) * values[j].abs()).max(T::lit(100.0) * T::EPS * a.gershgorin_max());
        if res > tol {
            return Err(LabError::Eigen(format!("eigenpair {j} residual {} exceeds tolerance", res)));
        }
        let inv_h = T::one() / cs.h;
        for (o, &v) in out.col_mut(j).iter_mut().zip(col.iter()) {
            *o = v * inv_h;
        }
    }
    let simple_ground = m < 2 || values[1] - values[0] > T::lit(1e-8) * values[0];
    Ok(Basis2d { values, vectors: out, h: cs.h, simple_ground })
}

/// Complete eigenbasis (dense); used by the separable preconditioner.
pub fn full_basis_2d<T: Real>(cs: &CrossSection<T>) -> Result<Basis2d<T>> {
    eigenpairs_2d(cs, cs.len(), EigenMethod::Dense)
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfReport {
    /// max of ratio and inverse ratio after median normalisation (∞ on sign change)
    pub c_emp: f64,
    pub sign_change: bool,
    pub nodes_used: usize,
}

/// Two-sided comparison of ψⱼ with the boundary distance.
///
/// Nodes adjacent to the exterior are excluded: there the zero-extension
/// boundary sits up to one cell away from the true curve.
pub fn hopf_ratio_check<T: Real>(cs: &CrossSection<T>, basis: &Basis2d<T>, j: usize) -> HopfReport {
    let psi = basis.psi(j);
    let n = cs.len();
    let pos = psi.iter().filter(|v| v.as_f64() > 0.0).count();
    if pos != n {
        return HopfReport { c_emp: f64::INFINITY, sign_change: true, nodes_used: 0 };
    }
    let mut ratios: Vec<f64> =
        (0..n).filter(|&k| cs.is_stencil_interior(k)).map(|k| psi[k].as_f64() / cs.dist[k].as_f64()).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if ratios.is_empty() {
        return HopfReport { c_emp: f64::INFINITY, sign_change: false, nodes_used: 0 };
    }
    let med = ratios[ratios.len() / 2];
    let hi = ratios[ratios.len() - 1] / med;
    let lo = med / ratios[0];
    HopfReport { c_emp: hi.max(lo), sign_change: false, nodes_used: ratios.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    #[test]
    fn tiny_stencils() {
        let one = CrossSection::<f64>::new_unchecked(Shape::Rectangle { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }, 1.0);
        assert_eq!(one.len(), 1);
        let a = assemble_lap2d(&one).unwrap();
        assert_eq!(a.to_dense(), vec![4.0]);
        let two = CrossSection::<f64>::new_unchecked(Shape::Rectangle { x0: -1.0, x1: 2.0, y0: -1.0, y1: 1.0 }, 1.0);
        let a = assemble_lap2d(&two).unwrap();
        assert_eq!(a.to_dense(), vec![4.0, -1.0, -1.0, 4.0]);
    }

    #[test]
    fn square_exact_discrete_spectrum() {
        let h = 1.0 / 16.0;
        let cs = CrossSection::<f64>::new_unchecked(Shape::unit_square(), h);
        let exact = |p: usize, q: usize| {
            let s = |k: usize| 4.0 / (h * h) * (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
            s(p) + s(q)
        };
        for method in [EigenMethod::Dense, EigenMethod::Lanczos] {
            let b = eigenpairs_2d(&cs, 4, method).unwrap();
            assert!((b.values[0] - exact(1, 1)).abs() < 1e-9 * exact(1, 1));
            assert!((b.values[1] - exact(1, 2)).abs() < 1e-9 * exact(1, 2));
            assert!((b.values[2] - exact(2, 1)).abs() < 1e-9 * exact(1, 2));
            assert!((b.values[3] - exact(2, 2)).abs() < 1e-9 * exact(2, 2));
            assert!(b.simple_ground);
            let s: f64 = b.psi(0).iter().map(|v| v * v).sum::<f64>() * h * h;
            assert!((s - 1.0).abs() < 1e-12);
            assert!(b.psi(0)[cs.origin_node()] > 0.0);
        }
    }

    #[test]
    fn single_precision_lanczos() {
        let cs = CrossSection::<f32>::new_unchecked(Shape::unit_square(), 1.0 / 16.0);
        let b = eigenpairs_2d(&cs, 1, EigenMethod::Dense).unwrap();
        let e = 2.0 * std::f32::consts::PI.powi(2);
        assert!((b.values[0] - e).abs() / e < 0.01);
    }

    #[test]
    fn disconnected_mask_rejected() {
        // rectangle narrower than one cell in y has no interior nodes at all
        let cs = CrossSection::<f64>::new_unchecked(Shape::Rectangle { x0: -1.0, x1: 1.0, y0: -0.2, y1: 0.2 }, 1.0);
        assert!(assemble_lap2d(&cs).is_err());
    }

    #[test]
    fn hopf_ratio_on_ellipse_and_sign_change() {
        let cs = CrossSection::<f64>::new(Shape::default_ellipse(), 0.05, crate::Usage::Twisted).unwrap();
        let b = eigenpairs_2d(&cs, 2, EigenMethod::Auto).unwrap();
        let r = hopf_ratio_check(&cs, &b, 0);
        assert!(r.c_emp.is_finite() && r.c_emp > 1.0 && !r.sign_change);
        let r2 = hopf_ratio_check(&cs, &b, 1);
        assert!(r2.sign_change && r2.c_emp.is_infinite());
    }
}

#[cfg(test)]
mod ellipse_oracle {
    use super::*;
    use crate::geometry::Shape;

    #[test]
    fn extrapolated_ground_value_matches_mathieu_value() {
        let e = |h: f64| {
            let cs = CrossSection::<f64>::new(Shape::default_ellipse(), h, crate::Usage::Twisted).unwrap();
            eigenpairs_2d(&cs, 1, EigenMethod::Lanczos).unwrap().values[0]
        };
        let (c, f) = (e(1.0 / 40.0), e(1.0 / 80.0));
        // staircase masks converge at first order in h
        let extrapolated = 2.0 * f - c;
        let exact = crate::mathieu::ellipse_ground_eigenvalue(0.7, 0.5);
        eprintln!("E1(1/40)={c} E1(1/80)={f} extrapolated={extrapolated} mathieu={exact}");
        assert!((extrapolated - exact).abs() / exact < 5e-3);
    }
}
