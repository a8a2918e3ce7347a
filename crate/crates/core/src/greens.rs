//! Green functions of H_θ − E₁ʰ and of the reference operator A, and harmonic profiles.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen2d::{eigenpairs_2d, full_basis_2d, EigenMethod};
use crate::experiments::{fit_power_law, two_sided_envelope, ExperimentReport};
use crate::geometry::{CrossSection, TubeGrid, TwistProfile};
use crate::linalg::pcg;
use crate::longitudinal::{GroundStates, Kernel1d, Line};
use crate::reference_kernel::{ref_kernel, TubePoint, WeightField};
use crate::scalar::Real;
use crate::twisted::{ModalPreconditioner, TwistedOperator};
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorTag {
    Twisted,
    Reference,
}

/// G(·, y) on the grid.
#[derive(Debug, Clone)]
pub struct GreenColumn<T> {
    pub tag: OperatorTag,
    pub source: usize,
    pub values: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> GreenColumn<T> {
    pub fn value(&self, node: usize) -> T {
        self.values[node]
    }
}

/// A = −Δ + θ̇²(x₃) on the straight tube, as a grid operator with the given shift.
pub fn reference_operator<T: Real>(grid: TubeGrid<T>, profile: &TwistProfile<T>, e1h: Option<T>) -> Result<TwistedOperator<T>> {
    let n2 = grid.n2();
    let v: Vec<T> = grid
        .z_nodes()
        .into_iter()
        .flat_map(|z| {
            let td = profile.theta_dot(z);
            std::iter::repeat_n(td * td, n2)
        })
        .collect();
    let straight = TwistProfile::straight();
    match e1h {
        Some(e) => TwistedOperator::with_shift(grid, straight, Some(v), e),
        None => TwistedOperator::new(grid, straight, Some(v)),
    }
}

/// Straight tube without a positive potential.
pub fn is_critical<T: Real>(op: &TwistedOperator<T>) -> bool {
    op.profile.is_straight() && op.potential.as_ref().is_none_or(|v| v.iter().all(|&x| x == T::zero()))
}

fn solve_shifted<T: Real>(op: &TwistedOperator<T>, pre: &ModalPreconditioner<T>, b: &[T]) -> Result<(Vec<T>, usize)> {
    let m = pre.affine(T::zero(), T::one());
    let mut x = vec![T::zero(); b.len()];
    let tol = if T::EPS.as_f64() > 1e-10 { 1e-5 } else { 1e-10 };
    let st = pcg(|v: &[T], o: &mut [T]| op.apply_shifted(v, o), |r: &[T], z: &mut [T]| m.apply(r, z), b, &mut x, tol, 5000)?;
    Ok((x, st.iterations))
}

/// Nonpositive values beyond a relative tolerance of 1e-10 are an error.
pub fn check_positive<T: Real>(values: &[T], what: &str) -> Result<()> {
    let top = values.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let floor = T::lit(-1e-10) * top;
    if let Some(i) = values.iter().position(|&v| !(v > floor)) {
        return Err(LabError::Numerical(format!("{what} is not positive at node {i} (value {})", values[i])));
    }
    Ok(())
}

fn column<T: Real>(op: &TwistedOperator<T>, pre: &ModalPreconditioner<T>, tag: OperatorTag, y: usize) -> Result<GreenColumn<T>> {
    let mut b = vec![T::zero(); op.len()];
    b[y] = T::one() / op.grid.cell_volume();
    let (values, iterations) = solve_shifted(op, pre, &b)?;
    check_positive(&values, "Green column")?;
    Ok(GreenColumn { tag, source: y, values, iterations })
}

/// Solve (H − E₁ʰ)G = δ_y/vol with zero data at the truncation ends.
pub fn green_solve<T: Real>(op: &TwistedOperator<T>, pre: &ModalPreconditioner<T>, tag: OperatorTag, y: usize) -> Result<GreenColumn<T>> {
    if is_critical(op) {
        return Err(LabError::Critical("Green function diverges with truncation".into()));
    }
    let l = op.grid.half_length;
    let y3 = op.grid.z(y / op.grid.n2());
    if l - y3.abs() < l / T::lit(4.0) {
        return Err(LabError::Config(format!("source x3 = {y3} is within L/4 of a truncation end")));
    }
    column(op, pre, tag, y)
}

/// Straight tube: G(x₀, y₀) for increasing L grows like L.
pub fn straight_growth_diagnostic(cross: &CrossSection<f64>, lengths: &[f64], h3: f64, x: [f64; 3], y: [f64; 3]) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("straight_green_growth", &["L", "G", "G_over_L"]);
    let mut pts = Vec::new();
    for &l in lengths {
        let grid = TubeGrid::new(cross.clone(), l, h3, 0.0)?;
        let op = TwistedOperator::new(grid, TwistProfile::straight(), None)?;
        let pre = ModalPreconditioner::new(&op)?;
        let (xi, yi) = (node_at(&op.grid, x)?, node_at(&op.grid, y)?);
        let g = column(&op, &pre, OperatorTag::Reference, yi)?.value(xi);
        rep.push_row(vec![l, g, g / l]);
        pts.push((l, g));
    }
    let lo = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lengths.iter().cloned().fold(0.0, f64::max);
    match fit_power_law(&pts, (lo, hi)) {
        Ok(fit) => {
            rep.add_fit("growth", &fit, (lo, hi));
            rep.check("linear growth", (fit.slope - 1.0).abs() < 0.2, format!("G ∝ L^{:.3}", fit.slope));
        }
        Err(_) => {
            let first = pts.first().map(|p| p.1).unwrap_or(f64::NAN);
            let last = pts.last().map(|p| p.1).unwrap_or(f64::NAN);
            let ratio = last / first;
            rep.note("growth_ratio", ratio);
            rep.check("linear growth", ratio > 1.5 && (ratio / (hi / lo) - 1.0).abs() < 0.2, format!("G grows by {ratio:.3} over L ratio {:.3}", hi / lo));
        }
    }
    Ok(rep)
}

fn node_at<T: Real>(grid: &TubeGrid<T>, p: [f64; 3]) -> Result<usize> {
    grid.nearest(p.map(T::lit)).ok_or_else(|| LabError::Config(format!("point {p:?} outside the grid")))
}

/// Pair of tube points in straightened coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

/// Sources at x₃ ∈ {−6, 0, 6} on the axis; targets on both sides of the twist at two cross positions.
pub fn default_pairs() -> Vec<PairSpec> {
    let sources = [-6.0, 0.0, 6.0];
    let targets = [-8.0, -6.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 6.0, 8.0];
    let cross = [[0.0, 0.0], [0.25, 0.15]];
    let mut out = Vec::new();
    for &s in &sources {
        for c in cross {
            for &t in &targets {
                out.push(PairSpec { x: [c[0], c[1], t], y: [0.0, 0.0, s] });
            }
        }
    }
    out
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Solve one column per distinct source for both operators and compare at the pairs.
///
/// Pairs closer than 2h (cross-section spacing or h₃, whichever is larger) are dropped.
pub fn green_ratio_check(
    theta: (&TwistedOperator<f64>, &ModalPreconditioner<f64>),
    reference: (&TwistedOperator<f64>, &ModalPreconditioner<f64>),
    pairs: &[PairSpec],
) -> Result<ExperimentReport> {
    let grid = &theta.0.grid;
    let h = grid.cross.h.max(grid.h3);
    let mut rep = ExperimentReport::new("green_ratio", &["x1", "x2", "x3", "y1", "y2", "y3", "g_theta", "g_a", "ratio"]);
    let mut kept = Vec::new();
    for p in pairs {
        let (xi, yi) = (node_at(grid, p.x)?, node_at(grid, p.y)?);
        let (xn, yn) = (grid.point(xi), grid.point(yi));
        if dist(xn, yn) < 2.0 * h {
            continue;
        }
        kept.push((xi, yi));
    }
    if kept.is_empty() {
        return Err(LabError::Config("no separated pairs".into()));
    }
    let sources: Vec<usize> = kept.iter().map(|p| p.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let tasks: Vec<(OperatorTag, usize)> = sources.iter().flat_map(|&s| [(OperatorTag::Twisted, s), (OperatorTag::Reference, s)]).collect();
    let cols = tasks
        .par_iter()
        .map(|&(tag, s)| {
            let (op, pre) = match tag {
                OperatorTag::Twisted => theta,
                OperatorTag::Reference => reference,
            };
            green_solve(op, pre, tag, s).map(|c| ((tag, s), c))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut ratios = Vec::new();
    let mut iters = 0;
    for c in cols.values() {
        iters = iters.max(c.iterations);
    }
    for &(xi, yi) in &kept {
        let gt = cols[&(OperatorTag::Twisted, yi)].value(xi);
        let ga = cols[&(OperatorTag::Reference, yi)].value(xi);
        let (xp, yp) = (grid.point(xi), grid.point(yi));
        let r = gt / ga;
        ratios.push(r);
        rep.push_row(vec![xp[0], xp[1], xp[2], yp[0], yp[1], yp[2], gt, ga, r]);
    }
    let c = two_sided_envelope(ratios.iter().copied());
    rep.set_envelope("C", c);
    rep.note("pairs", kept.len());
    rep.note("max_cg_iterations", iters);
    rep.check("Green ratio finite", c.is_finite(), format!("C = {c:.6} over {} pairs", kept.len()));
    Ok(rep)
}

/// Straight reference grid and twisted grid at one length, with both operators assembled.
pub struct GreenPair {
    pub theta: TwistedOperator<f64>,
    pub theta_pre: ModalPreconditioner<f64>,
    pub reference: TwistedOperator<f64>,
    pub reference_pre: ModalPreconditioner<f64>,
}

impl GreenPair {
    pub fn new(cross: &CrossSection<f64>, profile: &TwistProfile<f64>, half_length: f64, h3: f64) -> Result<Self> {
        let grid = TubeGrid::new(cross.clone(), half_length, h3, profile.radius)?;
        let theta = TwistedOperator::new(grid.clone(), profile.clone(), None)?;
        let theta_pre = ModalPreconditioner::new(&theta)?;
        let reference = reference_operator(grid, profile, Some(theta.e1h))?;
        let reference_pre = ModalPreconditioner::new(&reference)?;
        Ok(GreenPair { theta, theta_pre, reference, reference_pre })
    }

    pub fn ratio_check(&self, pairs: &[PairSpec]) -> Result<ExperimentReport> {
        green_ratio_check((&self.theta, &self.theta_pre), (&self.reference, &self.reference_pre), pairs)
    }
}

/// Green ratio envelope at L and scale·L; passes when finite and within 10%.
pub fn green_ratio_study(cross: &CrossSection<f64>, profile: &TwistProfile<f64>, half_length: f64, h3: f64, scale: f64, pairs: &[PairSpec]) -> Result<ExperimentReport> {
    let a = GreenPair::new(cross, profile, half_length, h3)?.ratio_check(pairs)?;
    let b = GreenPair::new(cross, profile, scale * half_length, h3)?.ratio_check(pairs)?;
    let (ca, cb) = (a.envelope("C").unwrap_or(f64::NAN), b.envelope("C").unwrap_or(f64::NAN));
    let mut rep = a.clone();
    rep.tag = "green_ratio_study".into();
    for row in &b.rows {
        rep.rows.push(row.clone());
    }
    rep.columns.insert(0, "L".into());
    let na = a.rows.len();
    for (i, row) in rep.rows.iter_mut().enumerate() {
        row.insert(0, if i < na { half_length } else { scale * half_length });
    }
    let drift = (cb - ca).abs() / ca;
    rep.set_envelope("C", ca);
    rep.set_envelope("C_scaled", cb);
    rep.set_envelope("drift", drift);
    let ta = a.column("g_theta").unwrap_or_default();
    let tb = b.column("g_theta").unwrap_or_default();
    let col_drift = ta.iter().zip(&tb).map(|(p, q)| (q - p).abs() / p).fold(0.0, f64::max);
    rep.note("g_theta_max_drift", col_drift);
    rep.check("Green ratio finite", ca.is_finite() && cb.is_finite(), format!("C = {ca:.6} (L = {half_length}), {cb:.6} (L = {})", scale * half_length));
    rep.check("Green ratio L-stable", drift < 0.10, format!("relative change {drift:.4} (limit 0.10)"));
    Ok(rep)
}

/// ∫₀^T e^{−tA}(x, y) dt by Simpson's rule in log t against the Green column of A.
///
/// Uses the complete cross-section basis, so both sides are the same discrete operator.
pub fn time_integral_check(cross: &CrossSection<f64>, profile: &TwistProfile<f64>, half_length: f64, h3: f64, x: [f64; 3], y: [f64; 3], t_max: f64) -> Result<ExperimentReport> {
    let basis = full_basis_2d(cross)?;
    let grid = TubeGrid::new(cross.clone(), half_length, h3, profile.radius)?;
    let op = reference_operator(grid, profile, Some(basis.e1()))?;
    let pre = ModalPreconditioner::new(&op)?;
    let line = Line::new(half_length, h3)?;
    let k1 = Kernel1d::new(profile, line);
    let (xi, yi) = (node_at(&op.grid, x)?, node_at(&op.grid, y)?);
    let n2 = op.grid.n2();
    let px = TubePoint { node: xi % n2, x3: op.grid.z(xi / n2) };
    let py = TubePoint { node: yi % n2, x3: op.grid.z(yi / n2) };
    let g = green_solve(&op, &pre, OperatorTag::Reference, yi)?.value(xi);
    let (s0, s1) = ((1e-6f64).ln(), t_max.ln());
    let n = 4000;
    let ds = (s1 - s0) / n as f64;
    let mut integral = 0.0;
    let mut rep = ExperimentReport::new("green_time_integral", &["t", "kernel"]);
    for i in 0..=n {
        let t = (s0 + i as f64 * ds).exp();
        let k = ref_kernel(&basis, &k1, t, px, py, basis.len()).value;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        integral += w * k * t;
        if i % 200 == 0 {
            rep.push_row(vec![t, k]);
        }
    }
    integral *= ds / 3.0;
    let rel = (integral - g).abs() / g;
    rep.set_envelope("green", g);
    rep.set_envelope("integral", integral);
    rep.set_envelope("rel_err", rel);
    rep.check("time integral matches Green column", rel < 0.03, format!("∫₀^{t_max} k dt = {integral:.6}, G = {g:.6}, rel {rel:.4}"));
    Ok(rep)
}

/// Solution of (H − E₁ʰ)v = 0 with v = w_j on the end planes x₃ = ±L.
pub fn harmonic_profile<T: Real>(op: &TwistedOperator<T>, pre: &ModalPreconditioner<T>, end_left: &[T], end_right: &[T]) -> Result<Vec<T>> {
    let n2 = op.grid.n2();
    let n3 = op.grid.n3;
    let c = T::one() / (op.grid.h3 * op.grid.h3);
    let mut b = vec![T::zero(); op.len()];
    for i in 0..n2 {
        b[i] += end_left[i] * c;
        b[(n3 - 1) * n2 + i] += end_right[i] * c;
    }
    let (v, _) = solve_shifted(op, pre, &b)?;
    check_positive(&v, "harmonic profile")?;
    Ok(v)
}

/// Envelope of v_j/w_j over |x₃| ≤ L/2 and the ratio at the axis point x₃ = 0.
pub fn harmonic_profile_check(op: &TwistedOperator<f64>, pre: &ModalPreconditioner<f64>, gs: &GroundStates<f64>, j: usize) -> Result<ExperimentReport> {
    let grid = &op.grid;
    let basis = eigenpairs_2d(&grid.cross, 1, EigenMethod::Auto)?;
    let psi = basis.psi(0);
    let l = grid.half_length;
    let left: Vec<f64> = psi.iter().map(|&p| p * gs.g(j, -l)).collect();
    let right: Vec<f64> = psi.iter().map(|&p| p * gs.g(j, l)).collect();
    let v = harmonic_profile(op, pre, &left, &right)?;
    let w = WeightField::new(grid, &basis, gs, j);
    let n2 = grid.n2();
    let origin = grid.cross.origin_node();
    let mut rep = ExperimentReport::new("harmonic_profile", &["x3", "min_ratio", "max_ratio"]);
    let mut all = Vec::new();
    let mut center = f64::NAN;
    let mut best = f64::INFINITY;
    for k in 0..grid.n3 {
        let z = grid.z(k);
        if z.abs() > l / 2.0 + 1e-12 {
            continue;
        }
        let r: Vec<f64> = (0..n2).map(|i| v[k * n2 + i] / w.values[k * n2 + i]).collect();
        if z.abs() < best {
            best = z.abs();
            center = r[origin];
        }
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(0.0, f64::max);
        rep.push_row(vec![z, lo, hi]);
        all.extend(r);
    }
    let c = two_sided_envelope(all.iter().copied());
    rep.note("j", j);
    rep.set_envelope("c_emp", c);
    rep.set_envelope("center", center);
    rep.check("harmonic ratio finite", c.is_finite(), format!("j = {j}: envelope {c:.6}, center ratio {center:.6}"));
    Ok(rep)
}

/// v_j/w_j envelopes for j = 0, 1, 2 at L and scale·L; passes when finite and within 5%.
pub fn harmonic_profile_study(cross: &CrossSection<f64>, profile: &TwistProfile<f64>, half_length: f64, h3: f64, scale: f64) -> Result<ExperimentReport> {
    let gs = GroundStates::new(profile, 1e-3)?;
    let mut rep = ExperimentReport::new("harmonic_profile_study", &["j", "L", "c_emp", "center"]);
    let mut per_l = Vec::new();
    for l in [half_length, scale * half_length] {
        let grid = TubeGrid::new(cross.clone(), l, h3, profile.radius)?;
        let op = TwistedOperator::new(grid, profile.clone(), None)?;
        let pre = ModalPreconditioner::new(&op)?;
        let mut row = Vec::new();
        for j in 0..3 {
            let r = harmonic_profile_check(&op, &pre, &gs, j)?;
            let (c, m) = (r.envelope("c_emp").unwrap_or(f64::NAN), r.envelope("center").unwrap_or(f64::NAN));
            rep.push_row(vec![j as f64, l, c, m]);
            row.push((c, m));
        }
        per_l.push(row);
    }
    for j in 0..3 {
        let ((ca, ma), (cb, mb)) = (per_l[0][j], per_l[1][j]);
        let dc = (cb - ca).abs() / ca;
        let dm = (mb - ma).abs() / ma;
        rep.set_envelope(&format!("c_emp[{j}]"), ca);
        rep.set_envelope(&format!("drift[{j}]"), dc);
        rep.set_envelope(&format!("center_drift[{j}]"), dm);
        rep.check(
            &format!("harmonic ratio j={j}"),
            ca.is_finite() && cb.is_finite() && dc < 0.05 && dm < 0.05,
            format!("envelope {ca:.5} → {cb:.5} (change {dc:.4}), center {ma:.5} → {mb:.5} (change {dm:.4}); limit 0.05"),
        );
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::longitudinal::green_1d;

    fn ellipse(h: f64) -> CrossSection<f64> {
        CrossSection::new_unchecked(Shape::default_ellipse(), h)
    }

    #[test]
    fn tent_function_in_one_dimension() {
        let line = Line::<f64>::new(4.0, 0.125).unwrap();
        let g = green_1d(&TwistProfile::straight(), &line, line.nearest(0.0).unwrap());
        for (k, &v) in g.iter().enumerate() {
            let r = line.r(k);
            assert!((v - (4.0 - r.abs()) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn straight_tube_is_critical() {
        let grid = TubeGrid::new(ellipse(0.1), 4.0, 0.25, 0.0).unwrap();
        let op = TwistedOperator::new(grid, TwistProfile::straight(), None).unwrap();
        let pre = ModalPreconditioner::new(&op).unwrap();
        let y = op.grid.nearest([0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(green_solve(&op, &pre, OperatorTag::Twisted, y), Err(LabError::Critical(_))));
    }

    #[test]
    fn identical_operators_give_unit_ratio() {
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let pair = GreenPair::new(&ellipse(0.1), &profile, 8.0, 0.25).unwrap();
        let pairs: Vec<PairSpec> = default_pairs().into_iter().filter(|p| p.x[2].abs() <= 4.0 && p.y[2] == 0.0).collect();
        let r = green_ratio_check((&pair.reference, &pair.reference_pre), (&pair.reference, &pair.reference_pre), &pairs).unwrap();
        assert!((r.envelope("C").unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn green_symmetry_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let pair = GreenPair::new(&ellipse(0.1), &profile, 6.0, 0.25).unwrap();
        let op = &pair.theta;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n2 = op.grid.n2();
        let inner: Vec<usize> = (0..op.len()).filter(|&i| op.grid.z(i / n2).abs() <= 3.0).collect();
        for _ in 0..5 {
            let a = inner[rng.random_range(0..inner.len())];
            let b = inner[rng.random_range(0..inner.len())];
            let ga = green_solve(op, &pair.theta_pre, OperatorTag::Twisted, a).unwrap();
            let gb = green_solve(op, &pair.theta_pre, OperatorTag::Twisted, b).unwrap();
            let (p, q) = (ga.value(b), gb.value(a));
            assert!((p - q).abs() <= 1e-6 * p.abs().max(q.abs()), "{p} vs {q}");
        }
    }

    #[test]
    fn straight_harmonic_profile_is_ground_mode() {
        let grid = TubeGrid::new(ellipse(0.1), 4.0, 0.25, 0.0).unwrap();
        let op = TwistedOperator::new(grid, TwistProfile::straight(), None).unwrap();
        let pre = ModalPreconditioner::new(&op).unwrap();
        let gs = GroundStates::new(&TwistProfile::straight(), 1e-3).unwrap();
        let r = harmonic_profile_check(&op, &pre, &gs, 0).unwrap();
        assert!((r.envelope("c_emp").unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn twisted_harmonic_profile_is_comparable() {
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let grid = TubeGrid::new(ellipse(0.1), 8.0, 0.25, 1.0).unwrap();
        let op = TwistedOperator::new(grid, profile.clone(), None).unwrap();
        let pre = ModalPreconditioner::new(&op).unwrap();
        let gs = GroundStates::new(&profile, 1e-3).unwrap();
        let r = harmonic_profile_check(&op, &pre, &gs, 1).unwrap();
        assert!(r.envelope("c_emp").unwrap().is_finite());
    }

    #[test]
    fn time_integral_reproduces_green_column() {
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let r = time_integral_check(&ellipse(0.1), &profile, 16.0, 0.25, [0.0, 0.0, 0.0], [0.0, 0.0, 0.5], 64.0).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn harmonic_drift_shrinks_with_truncation() {
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let drift = |l: f64| {
            let r = harmonic_profile_study(&ellipse(0.1), &profile, l, 0.25, 1.5).unwrap();
            r.envelope("center_drift[0]").unwrap()
        };
        let (near, far) = (drift(8.0), drift(32.0));
        assert!(far < 0.6 * near, "{near} {far}");
    }

    #[test]
    fn time_integral_converges_for_long_times() {
        let profile = TwistProfile::new(3.0, 1.0).unwrap();
        let r = time_integral_check(&ellipse(0.1), &profile, 8.0, 0.25, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 4000.0).unwrap();
        assert!(r.envelope("rel_err").unwrap() < 1e-6);
    }
}
