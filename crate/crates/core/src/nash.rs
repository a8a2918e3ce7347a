//! Envelope functions γ, Γ, the Nash families m_λ, μ_λ and their rate functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::TubeGrid;
use crate::reference_kernel::WeightField;
use crate::scalar::Real;
use crate::{LabError, Result};

/// γ(t) = t^{−5/2} on (0, 1], t^{−3/2} beyond.
pub fn gamma(t: f64) -> f64 {
    if t <= 1.0 {
        t.powf(-2.5)
    } else {
        t.powf(-1.5)
    }
}

/// Γ(t) = t^{−5/2} on (0, 1], t^{−1/2} beyond.
pub fn big_gamma(t: f64) -> f64 {
    if t <= 1.0 {
        t.powf(-2.5)
    } else {
        t.powf(-0.5)
    }
}

/// C¹ convex quadratic spline on [1/2, 1] with one knot at 3/4.
///
/// Interpolates values and slopes at both ends; the slope is piecewise
/// linear, so convexity holds whenever the knot slope lies between the end slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bridge {
    pub y0: f64,
    pub y1: f64,
    pub s0: f64,
    pub s1: f64,
    pub s_knot: f64,
}

const T0: f64 = 0.5;
const T1: f64 = 1.0;
const KNOT: f64 = 0.75;

impl Bridge {
    pub fn new(y0: f64, y1: f64, s0: f64, s1: f64) -> Result<Self> {
        let mbar = (y1 - y0) / (T1 - T0);
        let s_knot = 2.0 * mbar - 0.5 * (s0 + s1);
        if !(s0 < s_knot && s_knot < s1 && s1 < 0.0) {
            return Err(LabError::Numerical(format!("no decreasing convex C1 bridge: knot slope {s_knot} outside ({s0}, {s1})")));
        }
        Ok(Bridge { y0, y1, s0, s1, s_knot })
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= KNOT {
            let u = t - T0;
            let a = (self.s_knot - self.s0) / (KNOT - T0);
            self.y0 + self.s0 * u + 0.5 * a * u * u
        } else {
            let u = t - KNOT;
            let a = (self.s1 - self.s_knot) / (T1 - KNOT);
            let y_knot = self.y0 + 0.5 * (self.s0 + self.s_knot) * (KNOT - T0);
            y_knot + self.s_knot * u + 0.5 * a * u * u
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        if t <= KNOT {
            self.s0 + (self.s_knot - self.s0) * (t - T0) / (KNOT - T0)
        } else {
            self.s_knot + (self.s1 - self.s_knot) * (t - KNOT) / (T1 - KNOT)
        }
    }

    /// Inverse on [y1, y0] by bisection to 1e−12.
    pub fn inverse(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (T0, T1);
        for _ in 0..200 {
            if hi - lo <= 1e-12 * 0.5 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.value(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Monotonicity and convexity on a uniform sample.
    pub fn verify(&self, points: usize) -> bool {
        let ts: Vec<f64> = (0..=points).map(|i| T0 + (T1 - T0) * i as f64 / points as f64).collect();
        let v: Vec<f64> = ts.iter().map(|&t| self.value(t)).collect();
        let decreasing = v.windows(2).all(|w| w[1] < w[0]);
        let convex = v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12 * w[0].abs());
        decreasing && convex
    }
}

/// Large-time exponent of m_λ (3/2) or μ_λ (1/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    /// m_λ, rate ξ_λ
    M,
    /// μ_λ, rate ϑ_λ
    Mu,
}

impl Family {
    fn tail_exponent(self) -> f64 {
        match self {
            Family::M => 1.5,
            Family::Mu => 0.5,
        }
    }
}

/// λ·{t^{−5/2}, χ(t), t^{−a}} with its rate function −m′(m^{−1}(r)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashFamily {
    pub lambda: f64,
    pub family: Family,
    pub chi: Bridge,
}

impl NashFamily {
    pub fn new(family: Family, lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0) {
            return Err(LabError::Config(format!("lambda must be >= 1, got {lambda}")));
        }
        let y0 = 2f64.powf(2.5);
        let s0 = -2.5 * 2f64.powf(3.5);
        let chi = Bridge::new(y0, 1.0, s0, -family.tail_exponent())?;
        if !chi.verify(1000) {
            return Err(LabError::Numerical("interpolant is not decreasing and convex".into()));
        }
        Ok(NashFamily { lambda, family, chi })
    }

    /// m_λ(t) (or μ_λ).
    pub fn m(&self, t: f64) -> f64 {
        let a = self.family.tail_exponent();
        self.lambda
            * if t <= T0 {
                t.powf(-2.5)
            } else if t <= T1 {
                self.chi.value(t)
            } else {
                t.powf(-a)
            }
    }

    pub fn m_prime(&self, t: f64) -> f64 {
        let a = self.family.tail_exponent();
        self.lambda
            * if t <= T0 {
                -2.5 * t.powf(-3.5)
            } else if t <= T1 {
                self.chi.slope(t)
            } else {
                -a * t.powf(-a - 1.0)
            }
    }

    pub fn m_inverse(&self, r: f64) -> f64 {
        let a = self.family.tail_exponent();
        let y = r / self.lambda;
        if y <= 1.0 {
            y.powf(-1.0 / a)
        } else if y < self.chi.y0 {
            self.chi.inverse(y)
        } else {
            y.powf(-0.4)
        }
    }

    /// ξ_λ(r) (or ϑ_λ) from the closed-form branches.
    pub fn rate(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(LabError::Config(format!("rate argument must be positive, got {r}")));
        }
        let l = self.lambda;
        Ok(if r <= l {
            match self.family {
                Family::M => 1.5 * l.powf(-2.0 / 3.0) * r.powf(5.0 / 3.0),
                Family::Mu => 0.5 * l.powi(-2) * r.powi(3),
            }
        } else if r < 2f64.powf(2.5) * l {
            -l * self.chi.slope(self.chi.inverse(r / l))
        } else {
            2.5 * l.powf(-0.4) * r.powf(1.4)
        })
    }
}

pub fn xi_lambda(lambda: f64, r: f64) -> Result<f64> {
    NashFamily::new(Family::M, lambda)?.rate(r)
}

pub fn vartheta_lambda(lambda: f64, r: f64) -> Result<f64> {
    NashFamily::new(Family::Mu, lambda)?.rate(r)
}

#[derive(Debug, Clone, Serialize)]
pub struct CkappaRow {
    pub kappa: f64,
    pub lambda: f64,
    pub c_xi: f64,
    pub c_vartheta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CkappaReport {
    pub rows: Vec<CkappaRow>,
    /// per κ: max over λ / min over λ of the tabulated constants
    pub lambda_spread: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Tabulate max_r rate(κr)/rate(r) on a log grid of r.
pub fn ckappa_check(kappas: &[f64], lambdas: &[f64], rs: &[f64]) -> Result<CkappaReport> {
    let mut rows = Vec::new();
    for &kappa in kappas {
        for &lambda in lambdas {
            let xi = NashFamily::new(Family::M, lambda)?;
            let th = NashFamily::new(Family::Mu, lambda)?;
            let mut c_xi = 0.0f64;
            let mut c_th = 0.0f64;
            for &r in rs {
                c_xi = c_xi.max(xi.rate(kappa * r)? / xi.rate(r)?);
                c_th = c_th.max(th.rate(kappa * r)? / th.rate(r)?);
            }
            rows.push(CkappaRow { kappa, lambda, c_xi, c_vartheta: c_th });
        }
    }
    let mut spread = Vec::new();
    let mut pass = true;
    for &kappa in kappas {
        let sel: Vec<&CkappaRow> = rows.iter().filter(|r| r.kappa == kappa).collect();
        let s = |f: &dyn Fn(&CkappaRow) -> f64| {
            let hi = sel.iter().map(|r| f(r)).fold(0.0, f64::max);
            let lo = sel.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min);
            hi / lo
        };
        let sx = s(&|r| r.c_xi);
        let st = s(&|r| r.c_vartheta);
        pass &= sel.iter().all(|r| r.c_xi.is_finite() && r.c_vartheta.is_finite()) && sx <= 2.0 && st <= 2.0;
        spread.push((sx, st));
    }
    Ok(CkappaReport { rows, lambda_spread: spread, pass })
}

/// Discrete weighted norms and energy of a grid function on the straight tube.
///
/// The energy sums squared forward differences over every grid edge with
/// the edge weight (w²(a) + w²(b))/2; f and w vanish outside the grid.
pub fn weighted_quantities<T: Real>(grid: &TubeGrid<T>, w: &[T], f: &[T]) -> (f64, f64, f64) {
    let n2 = grid.n2();
    let cs = &grid.cross;
    let vol = grid.cell_volume().as_f64();
    let h = cs.h.as_f64();
    let h3 = grid.h3.as_f64();
    let (mut l1, mut l2, mut en) = (0.0, 0.0, 0.0);
    for k in 0..grid.n3 {
        for i in 0..n2 {
            let a = grid.node(i, k);
            let fa = f[a].as_f64();
            let wa2 = (w[a] * w[a]).as_f64();
            l1 += fa.abs() * wa2;
            l2 += fa * fa * wa2;
            for (di, dj) in [(1, 0), (0, 1)] {
                let (fb, wb2) = match cs.neighbor(i, di, dj) {
                    Some(nb) => {
                        let b = grid.node(nb, k);
                        (f[b].as_f64(), (w[b] * w[b]).as_f64())
                    }
                    None => (0.0, 0.0),
                };
                en += (fb - fa).powi(2) / (h * h) * 0.5 * (wa2 + wb2);
            }
            // edges towards exterior nodes on the negative side
            for (di, dj) in [(-1, 0), (0, -1)] {
                if cs.neighbor(i, di, dj).is_none() {
                    en += fa * fa / (h * h) * 0.5 * wa2;
                }
            }
            let (fb, wb2) = if k + 1 < grid.n3 {
                let b = grid.node(i, k + 1);
                (f[b].as_f64(), (w[b] * w[b]).as_f64())
            } else {
                (0.0, 0.0)
            };
            en += (fb - fa).powi(2) / (h3 * h3) * 0.5 * (wa2 + wb2);
            if k == 0 {
                en += fa * fa / (h3 * h3) * 0.5 * wa2;
            }
        }
    }
    (l1 * vol, l2 * vol, en * vol)
}

/// Random piecewise-trilinear function supported in a random box of the grid.
pub fn random_trilinear<T: Real>(grid: &TubeGrid<T>, rng: &mut impl Rng) -> Vec<T> {
    let cs = &grid.cross;
    let (nx, ny, nz) = (cs.nx as isize, cs.ny as isize, grid.n3 as isize);
    // coarse lattice spacing in grid cells, per axis
    let sx = rng.random_range(1..=4i64) as isize;
    let sz = rng.random_range(1..=12i64) as isize;
    let cx = rng.random_range(1..=4i64) as isize;
    let cz = rng.random_range(1..=6i64) as isize;
    let x0 = rng.random_range(0..(nx - sx * cx).max(1) as i64) as isize;
    let y0 = rng.random_range(0..(ny - sx * cx).max(1) as i64) as isize;
    let z0 = rng.random_range(0..(nz - sz * cz).max(1) as i64) as isize;
    let signed = rng.random_bool(0.25);
    let dims = ((cx + 1) as usize, (cx + 1) as usize, (cz + 1) as usize);
    let mut coarse = vec![0.0f64; dims.0 * dims.1 * dims.2];
    for a in 1..dims.0 - 1 {
        for b in 1..dims.1 - 1 {
            for c in 1..dims.2 - 1 {
                let v: f64 = rng.random_range(0.05..1.0);
                coarse[(c * dims.1 + b) * dims.0 + a] = if signed && rng.random_bool(0.5) { -v } else { v };
            }
        }
    }
    if dims.0 == 2 || dims.2 == 2 {
        // one coarse cell: a single tent
        coarse.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut f = vec![T::zero(); grid.len()];
    for k in 0..grid.n3 {
        let zc = (k as isize - z0) as f64 / sz as f64;
        if zc < 0.0 || zc > cz as f64 {
            continue;
        }
        for (i, &(ix, iy)) in cs.cells.iter().enumerate() {
            let xc = (ix as isize - x0) as f64 / sx as f64;
            let yc = (iy as isize - y0) as f64 / sx as f64;
            if xc < 0.0 || yc < 0.0 || xc > cx as f64 || yc > cx as f64 {
                continue;
            }
            let v = if dims.0 == 2 || dims.2 == 2 {
                let t = |u: f64, n: f64| 1.0 - (2.0 * u / n - 1.0).abs();
                t(xc, cx as f64) * t(yc, cx as f64) * t(zc, cz as f64)
            } else {
                trilinear(&coarse, dims, xc, yc, zc)
            };
            f[grid.node(i, k)] = T::lit(v);
        }
    }
    f
}

fn trilinear(c: &[f64], dims: (usize, usize, usize), x: f64, y: f64, z: f64) -> f64 {
    let cell = |u: f64, n: usize| {
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64)
    };
    let (i, fx) = cell(x, dims.0);
    let (j, fy) = cell(y, dims.1);
    let (k, fz) = cell(z, dims.2);
    let at = |a: usize, b: usize, cc: usize| c[(cc * dims.1 + b) * dims.0 + a];
    let mut v = 0.0;
    for (da, wa) in [(0, 1.0 - fx), (1, fx)] {
        for (db, wb) in [(0, 1.0 - fy), (1, fy)] {
            for (dc, wc) in [(0, 1.0 - fz), (1, fz)] {
                v += wa * wb * wc * at(i + da, j + db, k + dc);
            }
        }
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct NashSample {
    /// ‖f‖²_{L²(w²)} after L¹ normalisation
    pub l2: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub weight: usize,
    pub family: Family,
    pub trials: usize,
    pub lambda_star: Option<f64>,
    /// min over trials of energy − rate(‖f‖²) at λ*
    pub worst_margin: f64,
    pub samples: Vec<NashSample>,
}

/// Smallest λ ∈ {1, 2, …, 2¹⁰} with rate_λ(‖f‖²_{L²(w²)}) ≤ ∫|∇f|²w² on all trials.
pub fn nash_inequality_check<T: Real>(grid: &TubeGrid<T>, weight: &WeightField<T>, trials: usize, seed: u64) -> Result<NashReport> {
    let family = if weight.j == 0 { Family::M } else { Family::Mu };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    while samples.len() < trials {
        let f = random_trilinear(grid, &mut rng);
        let (l1, l2, en) = weighted_quantities(grid, &weight.values, &f);
        if l1 <= 0.0 {
            continue;
        }
        // normalise ‖f‖_{L¹(w²)} = 1
        samples.push(NashSample { l2: l2 / (l1 * l1), energy: en / (l1 * l1) });
    }
    nash_from_samples(weight.j, family, samples)
}

pub fn nash_from_samples(weight: usize, family: Family, samples: Vec<NashSample>) -> Result<NashReport> {
    for p in 0..=10 {
        let lambda = 2f64.powi(p);
        let fam = NashFamily::new(family, lambda)?;
        let mut worst = f64::INFINITY;
        for s in &samples {
            worst = worst.min(s.energy - fam.rate(s.l2)?);
        }
        if worst >= 0.0 {
            return Ok(NashReport { weight, family, trials: samples.len(), lambda_star: Some(lambda), worst_margin: worst, samples });
        }
    }
    let fam = NashFamily::new(family, 1024.0)?;
    let mut worst = f64::INFINITY;
    for s in &samples {
        worst = worst.min(s.energy - fam.rate(s.l2)?);
    }
    Ok(NashReport { weight, family, trials: samples.len(), lambda_star: None, worst_margin: worst, samples })
}

/// Mirror x₃ → −x₃ of a grid function.
pub fn mirror_x3<T: Real>(grid: &TubeGrid<T>, f: &[T]) -> Vec<T> {
    let n2 = grid.n2();
    let mut out = vec![T::zero(); f.len()];
    for k in 0..grid.n3 {
        let km = grid.n3 - 1 - k;
        out[km * n2..(km + 1) * n2].copy_from_slice(&f[k * n2..(k + 1) * n2]);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationSample {
    pub s: f64,
    pub l2: f64,
    pub energy: f64,
    pub rate: f64,
}

/// Dilation family f_s(x) = s³ f(s x′, s x₃) of a product tent profile.
pub fn dilation_sweep<T: Real>(grid: &TubeGrid<T>, weight: &WeightField<T>, scales: &[f64], lambda: f64) -> Result<Vec<DilationSample>> {
    let family = if weight.j == 0 { Family::M } else { Family::Mu };
    let fam = NashFamily::new(family, lambda)?;
    let mut out = Vec::new();
    for &s in scales {
        let f: Vec<T> = (0..grid.len())
            .map(|idx| {
                let p = grid.point(idx);
                let (x, y, z) = (p[0].as_f64() * s, p[1].as_f64() * s, p[2].as_f64() * s);
                let tent = |u: f64, w: f64| (1.0 - u.abs() / w).max(0.0);
                T::lit(s.powi(3) * tent(x, 0.5) * tent(y, 0.4) * tent(z, 2.0))
            })
            .collect();
        let (l1, l2, en) = weighted_quantities(grid, &weight.values, &f);
        if l1 <= 0.0 {
            continue;
        }
        let r = l2 / (l1 * l1);
        out.push(DilationSample { s, l2: r, energy: en / (l1 * l1), rate: fam.rate(r)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_pair() {
        assert_eq!(gamma(0.5), big_gamma(0.5));
        assert!((gamma(4.0) - 0.125).abs() < 1e-15 && (big_gamma(4.0) - 0.5).abs() < 1e-15);
        for i in 1..200 {
            let t = 0.05 * i as f64;
            assert!(gamma(t) <= big_gamma(t));
        }
    }

    #[test]
    fn bridges_match_branches() {
        for fam in [Family::M, Family::Mu] {
            let f = NashFamily::new(fam, 1.0).unwrap();
            let e = 1e-7;
            for t in [0.5, 1.0] {
                let left = (f.m(t) - f.m(t - e)) / e;
                let right = (f.m(t + e) - f.m(t)) / e;
                assert!((left - right).abs() < 1e-4 * left.abs(), "{fam:?} {t} {left} {right}");
                assert!((f.m_prime(t - 1e-12) - f.m_prime(t + 1e-12)).abs() < 1e-9);
            }
        }
        let f = NashFamily::new(Family::M, 1.0).unwrap();
        let mbar = 2.0 * (1.0 - 2f64.powf(2.5));
        assert!((f.chi.s_knot - (2.0 * mbar + 0.5 * (2.5 * 2f64.powf(3.5) + 1.5))).abs() < 1e-12);
        assert!(f.chi.s_knot < -3.7 && f.chi.s_knot > -3.8);
    }

    #[test]
    fn branch_values() {
        assert!((xi_lambda(1.0, 1.0).unwrap() - 1.5).abs() < 1e-12);
        let r = 2f64.powf(2.5);
        assert!((xi_lambda(1.0, r).unwrap() - 5.0 * 2f64.powf(2.5)).abs() < 1e-9);
        assert!((xi_lambda(4.0, 1.0).unwrap() - 1.5 * 4f64.powf(-2.0 / 3.0)).abs() < 1e-12);
        assert!((vartheta_lambda(1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((vartheta_lambda(1.0, 0.5).unwrap() - 1.0 / 16.0).abs() < 1e-12);
        assert!(xi_lambda(1.0, 0.0).is_err());
        assert!(vartheta_lambda(1.0, -1.0).is_err());
    }

    #[test]
    fn inverse_and_monotonicity() {
        for fam in [Family::M, Family::Mu] {
            let f = NashFamily::new(fam, 3.0).unwrap();
            let mut prev = 0.0;
            for i in 0..200 {
                let r = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
                let t = f.m_inverse(r);
                assert!((f.m(t) - r).abs() < 1e-10 * r.max(1.0), "{fam:?} r={r}");
                let v = f.rate(r).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn ckappa_tables() {
        let rs: Vec<f64> = (0..400).map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 399.0)).collect();
        let rep = ckappa_check(&[1.0, 0.5, 2.0, 10.0], &[1.0, 4.0, 16.0], &rs).unwrap();
        assert!(rep.pass);
        for row in rep.rows.iter().filter(|r| r.kappa == 1.0) {
            assert_eq!(row.c_xi, 1.0);
        }
        // power branches alone
        let small = ckappa_check(&[2.0], &[1.0], &[1e-3, 1e-2, 0.1]).unwrap();
        assert!((small.rows[0].c_xi - 2f64.powf(5.0 / 3.0)).abs() < 1e-12);
        let big = ckappa_check(&[2.0], &[1.0], &[100.0, 1000.0]).unwrap();
        assert!((big.rows[0].c_xi - 2f64.powf(1.4)).abs() < 1e-12);
    }
}
