//! One-dimensional operator P = −d²/dr² + θ̇²(r): ground states, kernel, envelopes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::TwistProfile;
use crate::linalg::{SymTridiag, Thomas};
use crate::scalar::Real;
use crate::{LabError, Result};

/// Uniform grid of interior nodes on (−L, L): r_k = −L + (k+1)h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line<T> {
    pub half_length: T,
    pub h: T,
    pub n: usize,
}

impl<T: Real> Line<T> {
    pub fn new(half_length: f64, h: f64) -> Result<Self> {
        let cells = 2.0 * half_length / h;
        if !(h > 0.0) || (cells - cells.round()).abs() > 1e-9 || cells.round() < 2.0 {
            return Err(LabError::Config(format!("2L/h must be an integer >= 2 (L={half_length}, h={h})")));
        }
        Ok(Line { half_length: T::lit(half_length), h: T::lit(h), n: cells.round() as usize - 1 })
    }

    pub fn r(&self, k: usize) -> T {
        -self.half_length + T::of(k + 1) * self.h
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|k| self.r(k)).collect()
    }

    pub fn nearest(&self, r: T) -> Option<usize> {
        let k = ((r + self.half_length) / self.h).round().to_isize()? - 1;
        (k >= 0 && (k as usize) < self.n).then_some(k as usize)
    }

    /// t ≤ (L − |r|)²/8.
    pub fn within_validity(&self, t: T, r: T) -> bool {
        let gap = self.half_length - r.abs();
        t <= gap * gap / T::lit(8.0)
    }
}

/// Three-point discretisation of P with zero data at ±L, plus an optional extra potential.
pub fn assemble_p<T: Real>(profile: &TwistProfile<T>, line: &Line<T>, extra: Option<&dyn Fn(T) -> T>) -> SymTridiag<T> {
    let inv = T::one() / (line.h * line.h);
    let diag = (0..line.n)
        .map(|k| {
            let r = line.r(k);
            let td = profile.theta_dot(r);
            T::lit(2.0) * inv + td * td + extra.map_or(T::zero(), |v| v(r))
        })
        .collect();
    SymTridiag::new(diag, vec![-inv; line.n.saturating_sub(1)])
}

/// Value of q together with the truncation-validity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QValue {
    pub value: f64,
    pub valid: bool,
}

/// Heat kernel of the discrete P from its full eigendecomposition.
#[derive(Debug, Clone)]
pub struct Kernel1d<T> {
    pub line: Line<T>,
    pub values: Vec<T>,
    /// column-major, Euclidean-normalised eigenvectors
    vectors: Vec<T>,
    pub critical: bool,
}

impl<T: Real> Kernel1d<T> {
    pub fn new(profile: &TwistProfile<T>, line: Line<T>) -> Self {
        let (values, vectors) = assemble_p(profile, &line, None).eigen();
        Kernel1d { line, values, vectors, critical: profile.is_straight() }
    }

    pub fn with_potential(profile: &TwistProfile<T>, line: Line<T>, extra: &dyn Fn(T) -> T) -> Self {
        let (values, vectors) = assemble_p(profile, &line, Some(extra)).eigen();
        Kernel1d { line, values, vectors, critical: false }
    }

    fn phi(&self, k: usize) -> &[T] {
        let n = self.line.n;
        &self.vectors[k * n..(k + 1) * n]
    }

    fn active_modes(&self, t: T) -> usize {
        // e^{-(λ_k - λ_0) t} below 1e-18 contributes nothing in double precision
        let cut = self.values[0] + T::lit(41.5) / t;
        self.values.partition_point(|&l| l <= cut).max(1)
    }

    /// q(t, r_i, r_j) at grid nodes.
    pub fn q_nodes(&self, t: T, i: usize, j: usize) -> T {
        let n = self.line.n;
        let m = self.active_modes(t);
        let mut s = T::zero();
        for k in 0..m {
            s += (-self.values[k] * t).exp() * self.vectors[k * n + i] * self.vectors[k * n + j];
        }
        s / self.line.h
    }

    /// q(t, r, s) by bilinear interpolation between nodes.
    pub fn q(&self, t: T, r: T, s: T) -> QValue {
        let line = &self.line;
        let w = |x: T| {
            let pos = (x + line.half_length) / line.h - T::one();
            let mut lo = pos.floor().to_isize().unwrap_or(-1);
            lo = lo.clamp(-1, line.n as isize - 1);
            let f = pos - T::lit(lo as f64);
            [(lo, T::one() - f), (lo + 1, f)]
        };
        let mut v = T::zero();
        for (a, wa) in w(r) {
            for (b, wb) in w(s) {
                if a < 0 || b < 0 || a as usize >= line.n || b as usize >= line.n || wa * wb == T::zero() {
                    continue;
                }
                v += wa * wb * self.q_nodes(t, a as usize, b as usize);
            }
        }
        let valid = line.within_validity(t, r.abs().max(s.abs()));
        QValue { value: v.as_f64(), valid }
    }

    /// Whole column q(t, ·, r_j).
    pub fn column(&self, t: T, j: usize) -> Vec<T> {
        let n = self.line.n;
        let m = self.active_modes(t);
        let mut out = vec![T::zero(); n];
        for k in 0..m {
            let phi = self.phi(k);
            let c = (-self.values[k] * t).exp() * phi[j] / self.line.h;
            for (o, &p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
        out
    }

    /// ∫ q(t, r_j, s) ds (trapezoid on the node grid).
    pub fn mass(&self, t: T, j: usize) -> T {
        self.column(t, j).iter().copied().sum::<T>() * self.line.h
    }
}

/// Positive solutions of −g″ + θ̇²g = 0, g₁ flat for r ≥ R, g₂ flat for r ≤ −R.
#[derive(Debug, Clone)]
pub struct GroundStates<T> {
    pub radius: T,
    step: T,
    /// samples of (g₁, g₁′) at −R + i·step, normalised by g₁(0) = 1
    samples: Vec<(T, T)>,
    /// far-left slope of g₁ (= far-right slope of g₂ for the even bump)
    pub sigma1: T,
    pub sigma2: T,
    mirror: Vec<(T, T)>,
    pub critical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// flat for r ≥ R (g₁)
    Right,
    /// flat for r ≤ −R (g₂)
    Left,
}

fn rk4_shoot<T: Real>(profile: &TwistProfile<T>, step: T, side: Side) -> Vec<(T, T)> {
    let r_big = profile.radius;
    let n = (T::lit(2.0) * r_big / step).round().to_usize().unwrap().max(1);
    let h = T::lit(2.0) * r_big / T::of(n);
    let f = |r: T, y: (T, T)| {
        let td = profile.theta_dot(r);
        (y.1, td * td * y.0)
    };
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let mut out = vec![(T::zero(), T::zero()); n + 1];
    // integrate from the flat end towards the other end
    let (start, dir) = match side {
        Side::Right => (r_big, -h),
        Side::Left => (-r_big, h),
    };
    let mut y = (T::one(), T::zero());
    let idx = |i: usize| match side {
        Side::Right => n - i,
        Side::Left => i,
    };
    out[idx(0)] = y;
    for i in 0..n {
        let r = start + T::of(i) * dir;
        let k1 = f(r, y);
        let k2 = f(r + dir / two, (y.0 + dir / two * k1.0, y.1 + dir / two * k1.1));
        let k3 = f(r + dir / two, (y.0 + dir / two * k2.0, y.1 + dir / two * k2.1));
        let k4 = f(r + dir, (y.0 + dir * k3.0, y.1 + dir * k3.1));
        y = (
            y.0 + dir / six * (k1.0 + two * k2.0 + two * k3.0 + k4.0),
            y.1 + dir / six * (k1.1 + two * k2.1 + two * k3.1 + k4.1),
        );
        out[idx(i + 1)] = y;
    }
    out
}

fn hermite<T: Real>(samples: &[(T, T)], step: T, origin: T, r: T) -> T {
    let n = samples.len() - 1;
    let x = (r - origin) / step;
    let i = x.floor().to_usize().unwrap_or(0).min(n - 1);
    let u = x - T::of(i);
    let (y0, d0) = samples[i];
    let (y1, d1) = samples[i + 1];
    let (d0, d1) = (d0 * step, d1 * step);
    let u2 = u * u;
    let u3 = u2 * u;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    (two * u3 - three * u2 + T::one()) * y0 + (u3 - two * u2 + u) * d0 + (-two * u3 + three * u2) * y1 + (u3 - u2) * d1
}

impl<T: Real> GroundStates<T> {
    /// Shoot both ground states with RK4 at the given step.
    pub fn new(profile: &TwistProfile<T>, step: f64) -> Result<Self> {
        let radius = profile.radius;
        if profile.is_straight() {
            let flat = vec![(T::one(), T::zero()); 2];
            return Ok(GroundStates {
                radius,
                step: T::lit(2.0) * radius,
                samples: flat.clone(),
                sigma1: T::zero(),
                sigma2: T::zero(),
                mirror: flat,
                critical: true,
            });
        }
        let step = T::lit(step);
        let mut g1 = rk4_shoot(profile, step, Side::Right);
        let mut g2 = rk4_shoot(profile, step, Side::Left);
        let h = T::lit(2.0) * radius / T::of(g1.len() - 1);
        for g in [&mut g1, &mut g2] {
            if g.iter().any(|&(v, _)| !(v > T::zero())) {
                return Err(LabError::Numerical("numerical loss of minimality: ground state not positive".into()));
            }
            let g0 = hermite(g, h, -radius, T::zero());
            g.iter_mut().for_each(|p| {
                p.0 /= g0;
                p.1 /= g0;
            });
        }
        let sigma1 = -g1[0].1;
        let sigma2 = g2[g2.len() - 1].1;
        if sigma1 < T::zero() || sigma2 < T::zero() {
            return Err(LabError::Numerical("numerical loss of minimality: negative far-field slope".into()));
        }
        Ok(GroundStates { radius, step: h, samples: g1, sigma1, sigma2, mirror: g2, critical: false })
    }

    fn eval(&self, samples: &[(T, T)], r: T) -> T {
        let r_big = self.radius;
        if r <= -r_big {
            let (v, d) = samples[0];
            return v + d * (r + r_big);
        }
        if r >= r_big {
            let (v, d) = samples[samples.len() - 1];
            return v + d * (r - r_big);
        }
        hermite(samples, self.step, -r_big, r)
    }

    pub fn g1(&self, r: T) -> T {
        self.eval(&self.samples, r)
    }

    pub fn g2(&self, r: T) -> T {
        self.eval(&self.mirror, r)
    }

    pub fn g0(&self, r: T) -> T {
        (self.g1(r) + self.g2(r)) * T::lit(0.5)
    }

    /// g_j for j ∈ {0, 1, 2}.
    pub fn g(&self, j: usize, r: T) -> T {
        match j {
            1 => self.g1(r),
            2 => self.g2(r),
            _ => self.g0(r),
        }
    }

    /// Sup-norm residual of the three-point second difference against θ̇²g on the RK4 nodes.
    pub fn residual(&self, profile: &TwistProfile<T>) -> T {
        let h = self.step;
        let s = &self.samples;
        let mut worst = T::zero();
        for i in 1..s.len().saturating_sub(1) {
            let r = -self.radius + T::of(i) * h;
            let td = profile.theta_dot(r);
            let d2 = (s[i + 1].0 - T::lit(2.0) * s[i].0 + s[i - 1].0) / (h * h);
            worst = worst.max((td * td * s[i].0 - d2).abs());
        }
        worst
    }

    /// Envelope constant of g₀(r)/(1+|r|) over the given points.
    pub fn linear_growth_envelope(&self, rs: &[T]) -> f64 {
        rs.iter()
            .map(|&r| {
                let q = (self.g0(r) / (T::one() + r.abs())).as_f64();
                q.max(1.0 / q)
            })
            .fold(1.0, f64::max)
    }
}

/// Solve −u″ + θ̇²u = δ_{r_j} on the line with zero ends.
pub fn green_1d<T: Real>(profile: &TwistProfile<T>, line: &Line<T>, j: usize) -> Vec<T> {
    let p = assemble_p(profile, line, None);
    let mut rhs = vec![T::zero(); line.n];
    rhs[j] = T::one() / line.h;
    Thomas::new(&p.diag, &p.off).solve(&mut rhs);
    rhs
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub r: f64,
    pub q: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    /// max over valid samples of q / envelope
    pub c_emp: f64,
    pub samples: Vec<EnvelopeSample>,
}

/// q(t,r,r) against min{g₀²(r) t^{−3/2}, t^{−1/2}} (t^{−1/2} alone when critical).
pub fn envelope_check_1d<T: Real>(k: &Kernel1d<T>, gs: &GroundStates<T>, times: &[f64], points: &[f64]) -> EnvelopeReport {
    let mut samples = Vec::new();
    for &t in times {
        for &r in points {
            let q = k.q(T::lit(t), T::lit(r), T::lit(r));
            let g0 = gs.g0(T::lit(r)).as_f64();
            let envelope = if gs.critical || k.critical { t.powf(-0.5) } else { (g0 * g0 * t.powf(-1.5)).min(t.powf(-0.5)) };
            samples.push(EnvelopeSample { t, r, q: q.value, envelope, ratio: q.value / envelope, valid: q.valid });
        }
    }
    let c_emp = samples.iter().filter(|s| s.valid).map(|s| s.ratio).fold(0.0, f64::max);
    EnvelopeReport { c_emp, samples }
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevReport {
    pub trials: usize,
    pub min_ratio: f64,
    pub pass: bool,
}

/// Random compactly supported piecewise-linear function as (knot, value) pairs.
pub fn random_piecewise_linear(rng: &mut impl Rng, span: f64) -> Vec<(f64, f64)> {
    let a = rng.random_range(-span..span * 0.5);
    let width = rng.random_range(0.2..(span - a).max(0.3));
    let inner = rng.random_range(1..8usize);
    let mut knots = vec![(a, 0.0)];
    for i in 1..=inner {
        let x = a + width * i as f64 / (inner + 1) as f64;
        knots.push((x, rng.random_range(-1.0..1.0)));
    }
    knots.push((a + width, 0.0));
    knots
}

/// (∫|f′|²g₀², ∫|f|⁶g₀²) for a piecewise-linear f, Gauss–Legendre per segment.
pub fn weighted_sobolev_integrals<T: Real>(gs: &GroundStates<T>, knots: &[(f64, f64)]) -> (f64, f64) {
    const GX: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
    const GW: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
    let (mut num, mut den) = (0.0, 0.0);
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let len = x1 - x0;
        if len <= 0.0 {
            continue;
        }
        let slope = (y1 - y0) / len;
        // split each segment so the quadrature resolves g₀ inside the twist zone
        let pieces = ((len / 0.1).ceil() as usize).max(1);
        for p in 0..pieces {
            let a = x0 + len * p as f64 / pieces as f64;
            let b = x0 + len * (p + 1) as f64 / pieces as f64;
            for (gx, gw) in GX.iter().zip(GW) {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * gx;
                let g = gs.g0(T::lit(x)).as_f64();
                let f = y0 + slope * (x - x0);
                let wt = 0.5 * (b - a) * gw * g * g;
                num += wt * slope * slope;
                den += wt * f.powi(6);
            }
        }
    }
    (num, den)
}

/// ∫|f′|²g₀² ≥ c_s (∫|f|⁶g₀²)^{1/3} over random piecewise-linear f.
pub fn weighted_sobolev_check<T: Real>(gs: &GroundStates<T>, trials: usize, seed: u64, span: f64) -> SobolevReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut used = 0;
    while used < trials {
        let knots = random_piecewise_linear(&mut rng, span);
        let (num, den) = weighted_sobolev_integrals(gs, &knots);
        if den <= 0.0 {
            continue;
        }
        used += 1;
        min_ratio = min_ratio.min(num / den.cbrt());
    }
    SobolevReport { trials, min_ratio, pass: min_ratio > 0.0 && min_ratio.is_finite() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> TwistProfile<f64> {
        TwistProfile::new(3.0, 1.0).unwrap()
    }

    #[test]
    fn free_kernel_values() {
        let line = Line::new(16.0, 1.0 / 64.0).unwrap();
        let k = Kernel1d::new(&TwistProfile::straight(), line);
        let q0 = k.q(1.0, 0.0, 0.0);
        assert!((q0.value - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-3);
        assert!(q0.valid);
        let q2 = k.q(1.0, 0.0, 2.0).value;
        assert!((q2 - (-1.0f64).exp() / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-3);
        assert!(!k.q(100.0, 0.0, 0.0).valid);
    }

    #[test]
    fn twisted_kernel_dominated_and_semigroup() {
        let line = Line::new(16.0, 1.0 / 16.0).unwrap();
        let free = Kernel1d::new(&TwistProfile::straight(), line);
        let k = Kernel1d::new(&bump(), line);
        assert!(k.q(4.0, 0.0, 0.0).value <= free.q(4.0, 0.0, 0.0).value);
        let j = line.nearest(0.0).unwrap();
        let col = k.column(2.0, j);
        let l2: f64 = col.iter().map(|v| v * v).sum::<f64>() * line.h;
        let diag = k.q_nodes(4.0, j, j);
        assert!((l2 - diag).abs() < 1e-8 * diag);
        assert!(k.mass(3.0, j) <= 1.0);
        assert!((k.q_nodes(1.5, j, j + 7) - k.q_nodes(1.5, j + 7, j)).abs() < 1e-15);
    }

    #[test]
    fn ground_states_shape() {
        let p = bump();
        let gs = GroundStates::new(&p, 1e-3).unwrap();
        assert!((gs.g1(0.0) - 1.0).abs() < 1e-12 && (gs.g2(0.0) - 1.0).abs() < 1e-12);
        assert!(gs.sigma1 > 0.0);
        assert!((gs.sigma1 - gs.sigma2).abs() < 1e-10);
        for r in [-5.0, -1.3, -0.4, 0.2, 0.9, 3.0] {
            assert!((gs.g1(r) - gs.g2(-r)).abs() < 1e-10, "r={r}");
        }
        assert!((gs.g1(2.0) - gs.g1(5.0)).abs() < 1e-14);
        let fine = GroundStates::new(&p, 1e-4).unwrap();
        assert!((fine.sigma1 - gs.sigma1).abs() < 1e-9);
        assert!(fine.residual(&p) < 1e-6);
        let rs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.4).collect();
        assert!(gs.linear_growth_envelope(&rs).is_finite());
    }

    #[test]
    fn straight_ground_state_is_flat_and_critical() {
        let gs = GroundStates::new(&TwistProfile::<f64>::straight(), 1e-3).unwrap();
        assert!(gs.critical);
        assert_eq!(gs.g0(-7.0), 1.0);
        assert_eq!(gs.g0(3.0), 1.0);
    }

    #[test]
    fn tent_green_function() {
        let line = Line::new(8.0, 1.0 / 8.0).unwrap();
        let j = line.nearest(0.0).unwrap();
        let u = green_1d(&TwistProfile::straight(), &line, j);
        // exact tent (L − |r|)/2 on the grid
        for (k, &v) in u.iter().enumerate() {
            let r: f64 = line.r(k);
            assert!((v - (8.0 - r.abs()) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sobolev_ratio_scale_invariant() {
        let gs = GroundStates::new(&bump(), 1e-3).unwrap();
        let hat = vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)];
        let (n1, d1) = weighted_sobolev_integrals(&gs, &hat);
        let twice: Vec<_> = hat.iter().map(|&(x, y)| (x, 2.0 * y)).collect();
        let (n2, d2) = weighted_sobolev_integrals(&gs, &twice);
        let r1 = n1 / d1.cbrt();
        let r2 = n2 / d2.cbrt();
        assert!(r1 > 0.0 && (r1 - r2).abs() < 1e-12 * r1);
        let rep = weighted_sobolev_check(&gs, 100, 3, 8.0);
        assert!(rep.pass);
    }
}
