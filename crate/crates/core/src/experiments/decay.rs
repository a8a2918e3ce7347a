//! Weighted operator-norm decay, L¹–L^∞ rates and mixed-exponent off-diagonal envelopes.

use crate::geometry::TubeGrid;
use crate::twisted::elliptic::scale_slices;
use crate::twisted::evolve::{diag_via_l2, evolve, state_value, Evolver};
use crate::{LabError, Result};

use super::{fit_power_law, ExperimentReport};

/// Power-iteration settings for operator norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration { max_iter: 30, tol: 1e-6 }
    }
}

fn slice_weights(grid: &TubeGrid<f64>, exponent: f64) -> Vec<f64> {
    grid.z_nodes().iter().map(|z| (1.0 + z * z).powf(exponent)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ‖e^{−tS}‖ from L²((1+x₃²)^β) to L² with the iteration count; `v` is the warm start and
/// returns the top singular vector.
pub fn weighted_norm<E: Evolver<f64> + ?Sized>(prop: &E, beta: f64, t: f64, v: &mut Vec<f64>, it: PowerIteration) -> Result<(f64, usize)> {
    let w = slice_weights(prop.grid(), -0.5 * beta);
    let width = prop.slice_width();
    let mut lambda = 0.0;
    let nv = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    for i in 1..=it.max_iter {
        let mut y = v.clone();
        scale_slices(&mut y, width, &w);
        let (mut z, _) = prop.evolve_vector(y, &[2.0 * t])?;
        let mut z = z.pop().unwrap();
        scale_slices(&mut z, width, &w);
        let next = dot(v, &z);
        let nz = dot(&z, &z).sqrt();
        if !(nz > 0.0) {
            return Err(LabError::Numerical(format!("power iteration collapsed at t = {t}")));
        }
        *v = z.into_iter().map(|x| x / nz).collect();
        if (next - lambda).abs() <= it.tol * next.abs() {
            return Ok((next.max(0.0).sqrt(), i));
        }
        lambda = next;
    }
    Ok((lambda.max(0.0).sqrt(), it.max_iter))
}

/// Decay exponent of ‖e^{−t(H−E₁ʰ)}‖_{L²((1+x₃²)^β)→L²} over `times`.
///
/// Target −(1+κ)/4 for a twisted tube, −1/4 for a straight one.
pub fn weighted_decay_check<E: Evolver<f64> + ?Sized>(prop: &E, beta: f64, kappa: f64, times: &[f64], it: PowerIteration) -> Result<ExperimentReport> {
    if !(0.0..=2.0).contains(&kappa) {
        return Err(LabError::Config(format!("κ = {kappa} outside [0, 2]")));
    }
    if beta <= (1.0 + kappa) / 2.0 {
        return Err(LabError::Config(format!("hypothesis violated: β = {beta} ≤ (1+κ)/2 = {}", (1.0 + kappa) / 2.0)));
    }
    let straight = prop.is_straight();
    let target = if straight { -0.25 } else { -(1.0 + kappa) / 4.0 };
    let mut rep = ExperimentReport::new("weighted_decay", &["t", "norm", "iterations"]);
    rep.note("beta", beta);
    rep.note("kappa", kappa);
    rep.note("straight", straight);
    let grid = prop.grid();
    let width = prop.slice_width();
    let mut v = vec![0.0; grid.len() / grid.n2() * width];
    for block in v.chunks_mut(width) {
        block[0] = 1.0;
    }
    let mut samples = Vec::new();
    for &t in times {
        if !grid.within_validity(2.0 * t, 0.0) {
            rep.warn(format!("t = {t} outside the truncation-validity window, skipped"));
            continue;
        }
        let (norm, iters) = weighted_norm(prop, beta, t, &mut v, it)?;
        if iters == it.max_iter {
            rep.warn(format!("t = {t}: power iteration stopped at {iters} iterations"));
        }
        rep.push_row(vec![t, norm, iters as f64]);
        samples.push((t, norm));
    }
    let window = (times[0], times[times.len() - 1]);
    let fit = fit_power_law(&samples, window)?;
    rep.add_fit("norm", &fit, window);
    let name = if straight { "straight weighted decay".to_string() } else { format!("weighted decay κ={kappa}") };
    rep.check_slope(&name, "norm", target, 0.1);
    Ok(rep)
}

fn nearest_node(grid: &TubeGrid<f64>, cross: usize, x3: f64) -> Result<usize> {
    let k = grid.nearest_slice(x3).ok_or_else(|| LabError::Config(format!("x3 = {x3} outside the tube")))?;
    Ok(grid.node(cross, k))
}

/// sup_x (1+x₃²)^{−β}√k(2t,x,x) over sources on the cross node `cross` at the given x₃,
/// and the moving-source probe 1 + z(t)² = 2t; both fitted against t^{−1/4−β}.
pub fn l1_linf_decay_check<E: Evolver<f64> + ?Sized>(prop: &E, beta: f64, cross: usize, source_x3: &[f64], times: &[f64]) -> Result<ExperimentReport> {
    if prop.is_straight() {
        return Err(LabError::Config("the L¹–L^∞ rate check needs an active twist".into()));
    }
    if !(0.0..=0.5).contains(&beta) {
        return Err(LabError::Config(format!("β = {beta} outside [0, 1/2]")));
    }
    let grid = prop.grid();
    let target = -0.25 - beta;
    let mut rep = ExperimentReport::new("l1_linf_decay", &["t", "sup", "argsup_x3", "moving", "z", "fixed"]);
    rep.note("beta", beta);
    let mut sup = vec![0.0f64; times.len()];
    let mut arg = vec![f64::NAN; times.len()];
    let mut fixed = vec![f64::NAN; times.len()];
    let closest = source_x3.iter().cloned().fold(f64::INFINITY, |a, b| if b.abs() < a.abs() { b } else { a });
    for &z in source_x3 {
        let node = nearest_node(grid, cross, z)?;
        let x3 = grid.point(node)[2];
        let field = evolve(prop, node, times)?;
        for (i, &t) in times.iter().enumerate() {
            if !grid.within_validity(2.0 * t, x3) {
                continue;
            }
            let v = (1.0 + x3 * x3).powf(-beta) * diag_via_l2(&field, i).sqrt();
            if v > sup[i] {
                sup[i] = v;
                arg[i] = x3;
            }
            if z == closest {
                fixed[i] = v;
            }
        }
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut fixed_pts = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let z = (2.0 * t - 1.0).max(0.0).sqrt();
        let node = nearest_node(grid, cross, z)?;
        let x3 = grid.point(node)[2];
        let moving = if grid.within_validity(2.0 * t, x3) {
            let field = evolve(prop, node, &[t])?;
            (1.0 + x3 * x3).powf(-beta) * diag_via_l2(&field, 0).sqrt()
        } else {
            rep.warn(format!("t = {t}: moving source z = {z:.3} outside the validity window, clipped"));
            f64::NAN
        };
        rep.push_row(vec![t, sup[i], arg[i], moving, x3, fixed[i]]);
        if sup[i] > 0.0 {
            upper.push((t, sup[i]));
        }
        if moving.is_finite() {
            lower.push((t, moving));
        }
        if fixed[i].is_finite() {
            fixed_pts.push((t, fixed[i]));
        }
    }
    let window = (times[0], times[times.len() - 1]);
    let up = fit_power_law(&upper, window)?;
    let lo = fit_power_law(&lower, window)?;
    rep.add_fit("upper", &up, window);
    rep.add_fit("moving_source", &lo, window);
    if let Ok(f) = fit_power_law(&fixed_pts, window) {
        rep.add_fit("fixed_source", &f, window);
    }
    let ok = (up.slope - target).abs() <= 0.1 && (lo.slope - target).abs() <= 0.1;
    rep.check(
        &format!("L1-Linf rate β={beta}"),
        ok,
        format!("upper slope {:.4}, moving-source slope {:.4} (target {target} ± 0.1)", up.slope, lo.slope),
    );
    Ok(rep)
}

/// k(t,x,y) ≤ C ρ(x)ρ(y)(1+x₃²)^{μ/2}(1+y₃²)^{ν/2} t^{−(1+μ+ν)/2} over node pairs.
///
/// Also checks k(t,x,y)² ≤ k(t,x,x) k(t,y,y) with diagonals from columns at t/2.
pub fn mixed_offdiag_check<E: Evolver<f64> + ?Sized>(prop: &E, mu: f64, nu: f64, pairs: &[(usize, usize)], times: &[f64]) -> Result<ExperimentReport> {
    if prop.is_straight() {
        return Err(LabError::Config("the mixed off-diagonal bound needs an active twist".into()));
    }
    if !(0.0..=1.0).contains(&mu) || !(0.0..=1.0).contains(&nu) {
        return Err(LabError::Config(format!("μ = {mu}, ν = {nu} must lie in [0, 1]")));
    }
    if times.iter().any(|&t| t < 1.0) {
        return Err(LabError::Config("mixed off-diagonal bound needs t ≥ 1".into()));
    }
    let grid = prop.grid();
    let n2 = grid.n2();
    let mut all: Vec<f64> = times.iter().flat_map(|&t| [0.5 * t, t]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let idx = |t: f64| all.iter().position(|&s| s == t).unwrap();
    let mut rep = ExperimentReport::new("mixed_offdiag", &["t", "pair", "x3", "y3", "k", "envelope", "ratio", "cs_ratio"]);
    rep.note("mu", mu);
    rep.note("nu", nu);
    let mut c = 0.0f64;
    let mut cs = 0.0f64;
    let mut cache: std::collections::BTreeMap<usize, crate::twisted::KernelField<f64>> = Default::default();
    for (p, &(x, y)) in pairs.iter().enumerate() {
        for node in [x, y] {
            if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(node) {
                e.insert(evolve(prop, node, &all)?);
            }
        }
        let (px, py) = (grid.point(x), grid.point(y));
        let (rx, ry) = (grid.cross.dist[x % n2], grid.cross.dist[y % n2]);
        for &t in times {
            if !grid.within_validity(t, px[2]) || !grid.within_validity(t, py[2]) {
                continue;
            }
            let fy = &cache[&y];
            let k = state_value(&fy.columns[idx(t)], fy.lift.as_deref(), n2, x);
            let env = rx * ry * (1.0 + px[2] * px[2]).powf(0.5 * mu) * (1.0 + py[2] * py[2]).powf(0.5 * nu) * t.powf(-0.5 * (1.0 + mu + nu));
            let kxx = diag_via_l2(&cache[&x], idx(0.5 * t));
            let kyy = diag_via_l2(fy, idx(0.5 * t));
            let csr = k.abs() / (kxx * kyy).sqrt();
            rep.push_row(vec![t, p as f64, px[2], py[2], k, env, k / env, csr]);
            c = c.max(k / env);
            cs = cs.max(csr);
        }
    }
    rep.set_envelope("C_emp", c);
    rep.set_envelope("cauchy_schwarz", cs);
    rep.check(&format!("mixed off-diagonal μ={mu} ν={nu}"), c.is_finite() && c > 0.0, format!("C_emp = {c:.5e}"));
    rep.check("Cauchy-Schwarz diagonal bound", cs <= 1.0 + 1e-6, format!("max k(x,y)/√(k(x,x)k(y,y)) = {cs:.6}"));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CrossSection, Shape, TwistProfile};
    use crate::twisted::{ModalOperator, ModalPropagator, StepPolicy};

    fn modal(beta: f64, half_length: f64) -> ModalOperator<f64> {
        let cs = CrossSection::new_unchecked(Shape::default_ellipse(), 0.1);
        let grid = TubeGrid::new(cs, half_length, 0.25, 1.0).unwrap();
        ModalOperator::new(grid, TwistProfile::new(beta, 1.0).unwrap(), None, 4).unwrap()
    }

    #[test]
    fn hypothesis_is_enforced() {
        let op = modal(3.0, 8.0);
        let prop = ModalPropagator::new(&op, StepPolicy::default());
        let e = weighted_decay_check(&prop, 1.0, 2.0, &[1.0], PowerIteration::default()).unwrap_err();
        assert!(e.to_string().contains("hypothesis violated"));
    }

    #[test]
    fn unweighted_norm_is_contraction_of_ground_mode() {
        let op = modal(0.0, 8.0);
        let prop = ModalPropagator::new(&op, StepPolicy::default());
        let mut v = vec![1.0; op.len()];
        let (n, _) = weighted_norm(&prop, 0.0, 2.0, &mut v, PowerIteration { max_iter: 200, tol: 1e-12 }).unwrap();
        // top of e^{−tS} is e^{−tλ} with λ the lowest longitudinal Dirichlet level on (−L, L)
        let h = 0.25f64;
        let lam = 2.0 * (1.0 - (std::f64::consts::PI * h / 16.0).cos()) / (h * h);
        assert!((n - (-2.0 * lam).exp()).abs() < 2e-3, "{n}");
    }

    #[test]
    fn straight_weighted_decay_is_quarter() {
        let op = modal(0.0, 64.0);
        let prop = ModalPropagator::new(&op, StepPolicy::default());
        let rep = weighted_decay_check(&prop, 1.6, 2.0, &[2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0], PowerIteration::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
    }

    #[test]
    fn mixed_bound_is_symmetric_and_cauchy_schwarz() {
        let op = modal(3.0, 16.0);
        let prop = ModalPropagator::new(&op, StepPolicy::default());
        let g = &op.grid;
        let c = g.cross.origin_node();
        let x = nearest_node(g, c, 0.0).unwrap();
        let y = nearest_node(g, c, 3.0).unwrap();
        let a = mixed_offdiag_check(&prop, 1.0, 0.0, &[(x, y)], &[1.0, 2.0, 4.0]).unwrap();
        let b = mixed_offdiag_check(&prop, 0.0, 1.0, &[(y, x)], &[1.0, 2.0, 4.0]).unwrap();
        assert!(a.passed() && b.passed());
        for (r, s) in a.rows.iter().zip(&b.rows) {
            assert!((r[4] - s[4]).abs() < 1e-8 * r[4].abs());
            assert!((r[6] - s[6]).abs() < 1e-8 * r[6].abs());
        }
    }
}
