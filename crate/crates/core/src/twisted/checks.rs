//! Envelope checks on heat-kernel diagonals and off-diagonals.

use std::collections::BTreeMap;

use super::evolve::{diag_via_l2, evolve, Evolver, KernelField, Propagator, StepPolicy};
use super::operator::TwistedOperator;
use super::precond::ModalPreconditioner;
use crate::eigen2d::full_basis_2d;
use crate::experiments::{fit_power_law, two_sided_envelope, ExperimentReport};
use crate::geometry::{map_to_twisted, Bump, TubeGrid, TwistProfile};
use crate::scalar::Real;
use crate::Result;

/// ρ²(x) t^{−1/2} min{(1 + x₃²)/t, 1}
pub fn main_envelope(rho: f64, x3: f64, t: f64) -> f64 {
    rho * rho / t.sqrt() * ((1.0 + x3 * x3) / t).min(1.0)
}

/// min{ρ²(x)/t, 1} t^{−3/2}
pub fn small_time_envelope(rho: f64, t: f64) -> f64 {
    (rho * rho / t).min(1.0) * t.powf(-1.5)
}

fn rho_x3<T: Real>(grid: &TubeGrid<T>, node: usize) -> (f64, f64) {
    let n2 = grid.n2();
    (grid.cross.dist[node % n2].as_f64(), grid.z(node / n2).as_f64())
}

/// k(t, x₀, x₀) for each t from columns evolved to t/2.
pub fn diagonal_series<T: Real, E: Evolver<T> + ?Sized>(prop: &E, x0: usize, times: &[f64]) -> Result<(Vec<f64>, KernelField<T>)> {
    let half: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
    let field = evolve(prop, x0, &half)?;
    let diag = (0..times.len()).map(|i| diag_via_l2(&field, i)).collect();
    Ok((diag, field))
}

/// Two-sided envelope of k(t,x,x) against ρ²t^{−1/2}min{(1+x₃²)/t, 1} and fixed-x slopes.
///
/// Samples with t < 1 or outside the truncation-validity window are skipped.
/// `target` = (slope, tolerance) adds one slope check per source.
pub fn envelope_check_main<T: Real, E: Evolver<T> + ?Sized>(
    prop: &E,
    sources: &[usize],
    times: &[f64],
    window: (f64, f64),
    target: Option<(f64, f64)>,
) -> Result<ExperimentReport> {
    let grid = prop.grid();
    let mut rep = ExperimentReport::new("envelope_main", &["t", "source", "x3", "rho", "diag", "envelope", "ratio"]);
    let mut ratios = Vec::new();
    for (s, &x0) in sources.iter().enumerate() {
        let (rho, x3) = rho_x3(grid, x0);
        let (diag, _) = diagonal_series(prop, x0, times)?;
        let mut fit_samples = Vec::new();
        for (&t, &k) in times.iter().zip(&diag) {
            if t < 1.0 || !grid.within_validity(T::lit(t), T::lit(x3)) {
                continue;
            }
            let env = main_envelope(rho, x3, t);
            rep.push_row(vec![t, s as f64, x3, rho, k, env, k / env]);
            ratios.push(k / env);
            fit_samples.push((t, k));
        }
        let valid_max = fit_samples.iter().map(|p| p.0).fold(0.0, f64::max);
        let w = (window.0.max(1.0), window.1.min(valid_max));
        let name = format!("slope[{s}]");
        match fit_power_law(&fit_samples, w) {
            Ok(f) => rep.add_fit(&name, &f, w),
            Err(e) => rep.warn(format!("{name} (x3 = {x3}): {e}")),
        }
        if let Some((target, tol)) = target {
            rep.check_slope("diagonal slope", &name, target, tol);
        }
    }
    rep.set_envelope("c_emp", two_sided_envelope(ratios.iter().copied()));
    rep.set_envelope("c_upper", ratios.iter().copied().fold(0.0, f64::max));
    rep.set_envelope("c_lower", ratios.iter().map(|r| 1.0 / r).fold(0.0, f64::max));
    Ok(rep)
}

/// Small-time two-sided envelope of the unshifted kernel against min{ρ²/t, 1}t^{−3/2}.
pub fn small_time_check<T: Real, E: Evolver<T> + ?Sized>(prop: &E, sources: &[usize], times: &[f64]) -> Result<ExperimentReport> {
    let grid = prop.grid();
    let h = grid.cross.h.as_f64();
    let mut rep = ExperimentReport::new("small_time", &["t", "source", "x3", "rho", "diag", "envelope", "ratio", "free_ratio"]);
    let kept: Vec<f64> = times.iter().copied().filter(|&t| t >= 25.0 * h * h && t <= 1.0).collect();
    for &t in times {
        if !kept.contains(&t) {
            rep.warn(format!("t = {t} dropped (outside [25h², 1] with h = {h})"));
        }
    }
    let e1h = prop.e1h().as_f64();
    let mut ratios = Vec::new();
    if !kept.is_empty() {
        for (s, &x0) in sources.iter().enumerate() {
            let (rho, x3) = rho_x3(grid, x0);
            let (diag, _) = diagonal_series(prop, x0, &kept)?;
            for (&t, &k) in kept.iter().zip(&diag) {
                let k = (-e1h * t).exp() * k;
                let env = small_time_envelope(rho, t);
                let free = (4.0 * std::f64::consts::PI * t).powf(-1.5);
                rep.push_row(vec![t, s as f64, x3, rho, k, env, k / env, k / free]);
                ratios.push(k / env);
            }
        }
    }
    rep.set_envelope("c_emp", if ratios.is_empty() { f64::NAN } else { two_sided_envelope(ratios) });
    Ok(rep)
}

/// Minimal K with k(t,x,y) ≤ Kρ(x)ρ(y)min{√((1+x₃²)(1+y₃²))t^{−3/2}, t^{−1/2}}e^{−|x−y|²/(Ct)}.
///
/// Also records the Cauchy–Schwarz defect k(t,x,y) − √(k(t,x,x)k(t,y,y)).
pub fn offdiag_check<T: Real, E: Evolver<T> + ?Sized>(
    prop: &E,
    profile: &TwistProfile<T>,
    pairs: &[(usize, usize)],
    times: &[f64],
    c_gauss: f64,
) -> Result<ExperimentReport> {
    let grid = prop.grid();
    let mut fields: BTreeMap<usize, KernelField<T>> = BTreeMap::new();
    for &(x, y) in pairs {
        for n in [x, y] {
            if let std::collections::btree_map::Entry::Vacant(e) = fields.entry(n) {
                e.insert(evolve(prop, n, times)?);
            }
        }
    }
    let mut rep = ExperimentReport::new("offdiag", &["t", "x", "y", "x3", "y3", "k", "bound", "ratio", "cs_defect"]);
    let mut k_max = 0.0f64;
    let mut cs_worst = f64::NEG_INFINITY;
    for &(x, y) in pairs {
        let (rx, x3) = rho_x3(grid, x);
        let (ry, y3) = rho_x3(grid, y);
        let (px, py) = (map_to_twisted(profile, grid.point(x)), map_to_twisted(profile, grid.point(y)));
        let d2: f64 = (0..3).map(|i| (px[i] - py[i]).as_f64().powi(2)).sum();
        for (i, &t) in times.iter().enumerate() {
            if t < 1.0 {
                continue;
            }
            let kxy = fields[&x].value(i, y);
            let kxx = fields[&x].value(i, x);
            let kyy = fields[&y].value(i, y);
            let cs = kxy - (kxx * kyy).sqrt();
            let scale = kxx.max(kyy);
            cs_worst = cs_worst.max(cs / scale);
            let bound = rx * ry * (((1.0 + x3 * x3) * (1.0 + y3 * y3)).sqrt() * t.powf(-1.5)).min(t.powf(-0.5)) * (-d2 / (c_gauss * t)).exp();
            let ratio = kxy / bound;
            k_max = k_max.max(ratio);
            rep.push_row(vec![t, x as f64, y as f64, x3, y3, kxy, bound, ratio, cs]);
        }
    }
    rep.set_envelope("K", k_max);
    rep.set_envelope("cs_defect", cs_worst);
    rep.check("Cauchy-Schwarz", cs_worst <= 1e-8, format!("max relative defect {cs_worst:e}"));
    rep.check("off-diagonal bound finite", k_max.is_finite(), format!("K = {k_max}"));
    Ok(rep)
}

/// Straight tube with a nonnegative bump potential: the diagonal envelope with slope target −3/2.
pub fn perturbation_mode_check(
    grid: TubeGrid<f64>,
    bump: Bump,
    points: &[[f64; 3]],
    times: &[f64],
    window: (f64, f64),
    policy: StepPolicy,
) -> Result<ExperimentReport> {
    let v = bump.nodes(&grid);
    let op = TwistedOperator::new(grid, TwistProfile::straight(), Some(v))?;
    let pre = ModalPreconditioner::new(&op)?;
    let prop = Propagator::new(&op, &pre, policy);
    let sources = points
        .iter()
        .map(|&p| op.grid.nearest(p).ok_or_else(|| crate::LabError::Config(format!("point {p:?} outside the grid"))))
        .collect::<Result<Vec<_>>>()?;
    let target = if bump.amplitude > 0.0 { (-1.5, 0.15) } else { (-0.5, 0.1) };
    let mut rep = envelope_check_main(&prop, &sources, times, window, Some(target))?;
    rep.tag = "perturbation_mode".into();
    rep.note("bump_amplitude", bump.amplitude);
    Ok(rep)
}

/// Dirichlet image sum for the free kernel on (−L, L).
pub fn image_kernel_1d(t: f64, r: f64, s: f64, half_length: f64) -> f64 {
    let g = |x: f64| (-x * x / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt();
    let l4 = 4.0 * half_length;
    let reach = ((t.sqrt() * 12.0 + 2.0 * half_length) / l4).ceil() as i64 + 1;
    (-reach..=reach).map(|n| g(r - s - n as f64 * l4) - g(r + s - (4 * n + 2) as f64 * half_length)).sum()
}

/// Straight tube: full 3D diagonal against (2D eigen-expansion) × (1D image kernel).
pub fn straight_separability_check(op: &TwistedOperator<f64>, prop: &Propagator<'_, f64>, sources: &[usize], times: &[f64]) -> Result<ExperimentReport> {
    let basis = full_basis_2d(&op.grid.cross)?;
    let n2 = op.grid.n2();
    let l = op.grid.half_length;
    let mut rep = ExperimentReport::new("straight_separability", &["t", "source", "pde", "product", "rel_err"]);
    let mut worst = 0.0f64;
    for (s, &x0) in sources.iter().enumerate() {
        let (diag, _) = diagonal_series(prop, x0, times)?;
        let (i, x3) = (x0 % n2, op.grid.z(x0 / n2));
        for (&t, &k) in times.iter().zip(&diag) {
            let cross: f64 = (0..basis.len()).map(|j| (-t * (basis.values[j] - op.e1h)).exp() * basis.psi(j)[i].powi(2)).sum();
            let p = cross * image_kernel_1d(t, x3, x3, l);
            let err = (k - p).abs() / p;
            worst = worst.max(err);
            rep.push_row(vec![t, s as f64, k, p, err]);
        }
    }
    rep.set_envelope("max_rel_err", worst);
    rep.check("straight separability", worst <= 0.02, format!("max relative error {worst:.3e}"));
    Ok(rep)
}

/// Largest relative deviation |c_emp(a)/c_emp(b) − 1|.
pub fn relative_change(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}
