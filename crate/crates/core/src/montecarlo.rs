//! Brownian-bridge survival estimates of the Dirichlet heat kernel.
//!
//! Brownian motion is run with generator Δ (variance 2t per coordinate), so the free
//! kernel is (4πt)^{−3/2} e^{−|x−y|²/4t} and k̂(t,x,x) = e^{E₁t}(4πt)^{−3/2} p̂.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::experiments::{fit_power_law, ExperimentReport};
use crate::geometry::{map_to_straight, Shape, TwistProfile};
use crate::mathieu::ellipse_ground_eigenvalue;
use crate::{LabError, Result};

/// Paths per independently seeded block; fixed so results do not depend on the worker count.
pub const BLOCK: usize = 4096;

pub trait Domain: Sync {
    fn contains(&self, p: [f64; 3]) -> bool;
    /// Distance to the boundary (first order in the local normal), interior points only.
    fn distance(&self, p: [f64; 3]) -> f64;
    /// Cheap lower bound on [`Domain::distance`].
    fn distance_floor(&self, p: [f64; 3]) -> f64 {
        self.distance(p)
    }
    /// `Some(distance_floor)` for interior points.
    fn probe(&self, p: [f64; 3]) -> Option<f64> {
        self.contains(p).then(|| self.distance_floor(p))
    }
}

/// Crossing weights below e^{−SKIP} are treated as zero.
const SKIP: f64 = 36.0;

/// Boundary distance of a path point: the cheap floor and the exact value once computed.
#[derive(Debug, Clone, Copy)]
struct Dist {
    floor: f64,
    exact: f64,
}

impl Dist {
    fn new(floor: f64) -> Self {
        Dist { floor, exact: f64::NAN }
    }
    fn get<D: Domain + ?Sized>(&mut self, domain: &D, p: [f64; 3]) -> f64 {
        if self.exact.is_nan() {
            self.exact = domain.distance(p);
        }
        self.exact
    }
}

fn segment_weight<D: Domain + ?Sized>(domain: &D, a: [f64; 3], da: &mut Dist, b: [f64; 3], db: &mut Dist, dt: f64) -> f64 {
    if da.floor * db.floor > SKIP * dt {
        return 1.0;
    }
    1.0 - crossing_probability(da.get(domain, a), db.get(domain, b), dt)
}

/// {x₁ < d}
#[derive(Debug, Clone, Copy)]
pub struct HalfSpace {
    pub d: f64,
}

impl Domain for HalfSpace {
    fn contains(&self, p: [f64; 3]) -> bool {
        p[0] < self.d
    }
    fn distance(&self, p: [f64; 3]) -> f64 {
        self.d - p[0]
    }
}

/// The infinite twisted tube over `shape`.
#[derive(Debug, Clone)]
pub struct Tube {
    pub shape: Shape,
    pub profile: TwistProfile<f64>,
}

impl Tube {
    pub fn new(shape: Shape, profile: TwistProfile<f64>) -> Self {
        Tube { shape, profile }
    }

    /// Outward normal direction at the closest boundary point, from the level function
    /// for ellipses and a centred gradient of the distance otherwise.
    fn normal(&self, y: [f64; 2]) -> [f64; 2] {
        let g = match self.shape {
            Shape::Ellipse { a, b } => [y[0] / (a * a), y[1] / (b * b)],
            _ => {
                let e = 1e-7;
                let f = |a: f64, b: f64| self.shape.boundary_distance([a, b]);
                [(f(y[0] - e, y[1]) - f(y[0] + e, y[1])) / (2.0 * e), (f(y[0], y[1] - e) - f(y[0], y[1] + e)) / (2.0 * e)]
            }
        };
        let n = g[0].hypot(g[1]);
        if n > 0.0 {
            [g[0] / n, g[1] / n]
        } else {
            [0.0, 0.0]
        }
    }
}

impl Domain for Tube {
    fn contains(&self, p: [f64; 3]) -> bool {
        let y = map_to_straight(&self.profile, p);
        self.shape.contains([y[0], y[1]])
    }
    /// d_ω(y)/|∇Φ| with Φ(x) = d_ω(T_θ(x₃)x′); the x₃-derivative of T_θ x′ is θ̇ J y.
    fn distance(&self, p: [f64; 3]) -> f64 {
        let y = map_to_straight(&self.profile, p);
        let d = self.shape.rho([y[0], y[1]]);
        let td = self.profile.theta_dot(p[2]);
        if td == 0.0 || d > 0.25 {
            return d;
        }
        let n = self.normal([y[0], y[1]]);
        let tangential = td * (n[1] * y[0] - n[0] * y[1]);
        d / (1.0 + tangential * tangential).sqrt()
    }
    fn distance_floor(&self, p: [f64; 3]) -> f64 {
        self.probe(p).unwrap_or(0.0)
    }
    /// For an ellipse the level set √F = s lies (1 − s)·b inside the boundary.
    fn probe(&self, p: [f64; 3]) -> Option<f64> {
        match self.shape {
            Shape::Ellipse { a, b } => {
                let y = map_to_straight(&self.profile, p);
                let f2 = y[0] * y[0] / (a * a) + y[1] * y[1] / (b * b);
                if f2 >= 1.0 - 1e-12 {
                    return None;
                }
                let td = self.profile.theta_dot(p[2]) * a.max(b);
                Some(b * (1.0 - f2.sqrt()) / (1.0 + td * td).sqrt())
            }
            _ => self.contains(p).then(|| self.distance(p)),
        }
    }
}

/// Continuum principal Dirichlet eigenvalue of a cross-section.
pub fn continuum_ground_energy(shape: &Shape) -> f64 {
    const J01: f64 = 2.404_825_557_695_773;
    match *shape {
        Shape::Ellipse { a, b } => ellipse_ground_eigenvalue(a, b),
        Shape::Rectangle { x0, x1, y0, y1 } => std::f64::consts::PI.powi(2) * ((x1 - x0).powi(-2) + (y1 - y0).powi(-2)),
        Shape::Disc { r } => (J01 / r).powi(2),
    }
}

/// Probability that a bridge of duration `dt` between points at boundary distances
/// `d1`, `d2` crosses the local tangent plane.
pub fn crossing_probability(d1: f64, d2: f64, dt: f64) -> f64 {
    (-(d1 * d2) / dt).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// independent bisection bridges killed at the sampled times
    Bisection,
    /// bisection with the per-segment crossing weight
    BisectionCorrected,
    /// sequential bridge sampling with resampling after every step and the crossing weight
    Sequential,
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeEstimate {
    pub anchor: [f64; 3],
    pub horizon: f64,
    pub paths: usize,
    pub delta: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub estimator: Estimator,
    /// rule-of-three bound when no path survives
    pub upper_bound: Option<f64>,
}

impl BridgeEstimate {
    pub fn kernel(&self, e1: f64) -> f64 {
        free_factor(self.horizon, e1) * self.p_hat
    }
    pub fn kernel_err(&self, e1: f64) -> f64 {
        free_factor(self.horizon, e1) * self.std_err
    }
    pub fn rel_err(&self) -> f64 {
        if self.p_hat > 0.0 {
            self.std_err / self.p_hat
        } else {
            f64::INFINITY
        }
    }
}

/// e^{E₁t}(4πt)^{−3/2}
pub fn free_factor(t: f64, e1: f64) -> f64 {
    (e1 * t - 1.5 * (4.0 * std::f64::consts::PI * t).ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSetup {
    pub paths: usize,
    pub delta: f64,
    pub estimator: Estimator,
    /// sequential estimator: particles per independent replica
    pub particles: usize,
}

impl McSetup {
    pub fn bisection(paths: usize, delta: f64, corrected: bool) -> Self {
        let estimator = if corrected { Estimator::BisectionCorrected } else { Estimator::Bisection };
        McSetup { paths, delta, estimator, particles: 0 }
    }
    pub fn sequential(paths: usize, delta: f64, particles: usize) -> Self {
        McSetup { paths, delta, estimator: Estimator::Sequential, particles }
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64 + 1);
    rng
}

fn normal3(rng: &mut impl Rng) -> [f64; 3] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

fn check_anchor<D: Domain + ?Sized>(domain: &D, x: [f64; 3], t: f64, delta: f64) -> Result<()> {
    if !(t > 0.0) || !(delta > 0.0) {
        return Err(LabError::Config(format!("need t > 0 and δ > 0 (t={t}, δ={delta})")));
    }
    if !domain.contains(x) || domain.distance(x) < 4.0 * delta.sqrt() {
        return Err(LabError::Config(format!("anchor {x:?} must satisfy ρ(x) ≥ 4√δ = {:.4}", 4.0 * delta.sqrt())));
    }
    Ok(())
}

/// Dyadic bridge from x to x over [0, t] with 2^levels segments.
pub fn bisection_bridge(x: [f64; 3], t: f64, levels: u32, rng: &mut impl Rng, path: &mut Vec<[f64; 3]>) {
    let n = 1usize << levels;
    path.clear();
    path.resize(n + 1, x);
    let dt = t / n as f64;
    for l in 1..=levels {
        let stride = n >> l;
        let sd = (stride as f64 * dt).sqrt();
        for i in (stride..n).step_by(2 * stride) {
            let (a, b) = (path[i - stride], path[i + stride]);
            let z = normal3(rng);
            path[i] = [0.5 * (a[0] + b[0]) + sd * z[0], 0.5 * (a[1] + b[1]) + sd * z[1], 0.5 * (a[2] + b[2]) + sd * z[2]];
        }
    }
}

/// Survival weight of a sampled path: 0 on exit, else the product of segment non-crossing weights.
pub fn path_weight<D: Domain + ?Sized>(domain: &D, path: &[[f64; 3]], dt: f64, corrected: bool) -> f64 {
    if !corrected {
        return if path.iter().all(|&p| domain.contains(p)) { 1.0 } else { 0.0 };
    }
    let dists: Option<Vec<Dist>> = path.iter().map(|&p| domain.probe(p).map(Dist::new)).collect();
    let Some(mut dists) = dists else {
        return 0.0;
    };
    let mut w = 1.0;
    for i in 0..path.len() - 1 {
        let (head, tail) = dists.split_at_mut(i + 1);
        w *= segment_weight(domain, path[i], &mut head[i], path[i + 1], &mut tail[0], dt);
    }
    w
}

fn levels_for(t: f64, delta: f64) -> u32 {
    (t / delta).log2().ceil().max(1.0) as u32
}

fn finish(x: [f64; 3], t: f64, setup: &McSetup, mean: f64, var: f64, count: usize) -> BridgeEstimate {
    let std_err = (var.max(0.0) / count as f64).sqrt();
    BridgeEstimate {
        anchor: x,
        horizon: t,
        paths: setup.paths,
        delta: setup.delta,
        p_hat: mean,
        std_err,
        estimator: setup.estimator,
        upper_bound: (mean == 0.0).then(|| 3.0 / setup.paths as f64),
    }
}

/// Per-block sums of w and w² for the bisection estimators; `antithetic` adds the
/// reflected path 2x − ω and scores the pair mean.
fn bisection_sums<D: Domain + ?Sized>(domain: &D, x: [f64; 3], t: f64, setup: &McSetup, seed: u64, antithetic: bool) -> Vec<(f64, f64, usize)> {
    let levels = levels_for(t, setup.delta);
    let dt = t / (1usize << levels) as f64;
    let corrected = setup.estimator == Estimator::BisectionCorrected;
    let blocks = setup.paths.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b);
            let mut path = Vec::new();
            let mut reflected = Vec::new();
            let count = BLOCK.min(setup.paths - b * BLOCK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                bisection_bridge(x, t, levels, &mut rng, &mut path);
                let mut w = path_weight(domain, &path, dt, corrected);
                if antithetic {
                    reflected.clear();
                    reflected.extend(path.iter().map(|p| [2.0 * x[0] - p[0], 2.0 * x[1] - p[1], 2.0 * x[2] - p[2]]));
                    w = 0.5 * (w + path_weight(domain, &reflected, dt, corrected));
                }
                s1 += w;
                s2 += w * w;
            }
            (s1, s2, count)
        })
        .collect()
}

fn reduce(sums: &[(f64, f64, usize)]) -> (f64, f64, usize) {
    let (s1, s2, n) = sums.iter().fold((0.0, 0.0, 0), |a, s| (a.0 + s.0, a.1 + s.1, a.2 + s.2));
    let mean = s1 / n as f64;
    let var = if n > 1 { (s2 - n as f64 * mean * mean) / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

/// One replica of the sequential estimator; returns ln p̂ (−∞ if the population dies).
fn sequential_replica<D: Domain + ?Sized>(domain: &D, x: [f64; 3], t: f64, steps: usize, particles: usize, rng: &mut ChaCha8Rng) -> f64 {
    let dt = t / steps as f64;
    let mut d0 = Dist::new(domain.distance_floor(x));
    d0.get(domain, x);
    let mut pos = vec![x; particles];
    let mut dist = vec![d0; particles];
    let mut next = vec![x; particles];
    let mut next_d = vec![d0; particles];
    let mut w = vec![0.0; particles];
    let mut log_p = 0.0;
    for k in 0..steps {
        let remaining = t - k as f64 * dt;
        let last = k + 1 == steps;
        let frac = dt / remaining;
        let sd = (2.0 * dt * (remaining - dt) / remaining).max(0.0).sqrt();
        for i in 0..particles {
            let z = pos[i];
            let p = if last {
                x
            } else {
                let g = normal3(rng);
                [z[0] + (x[0] - z[0]) * frac + sd * g[0], z[1] + (x[1] - z[1]) * frac + sd * g[1], z[2] + (x[2] - z[2]) * frac + sd * g[2]]
            };
            match if last { Some(d0) } else { domain.probe(p).map(Dist::new) } {
                Some(mut d) => {
                    w[i] = segment_weight(domain, z, &mut dist[i], p, &mut d, dt);
                    next_d[i] = d;
                }
                None => w[i] = 0.0,
            }
            next[i] = p;
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return f64::NEG_INFINITY;
        }
        log_p += (total / particles as f64).ln();
        if last {
            break;
        }
        // systematic resampling
        let u: f64 = rng.random::<f64>() / particles as f64;
        let mut acc = 0.0;
        let mut j = 0;
        for i in 0..particles {
            let target = (u + i as f64 / particles as f64) * total;
            while j + 1 < particles && acc + w[j] <= target {
                acc += w[j];
                j += 1;
            }
            pos[i] = next[j];
            dist[i] = next_d[j];
        }
    }
    log_p
}

/// Survival probability of the bridge from x to x over [0, t] killed on leaving the domain.
pub fn survival_probability<D: Domain + ?Sized>(domain: &D, x: [f64; 3], t: f64, setup: &McSetup, seed: u64) -> Result<BridgeEstimate> {
    check_anchor(domain, x, t, setup.delta)?;
    if setup.paths == 0 {
        return Err(LabError::Config("path count must be positive".into()));
    }
    match setup.estimator {
        Estimator::Bisection | Estimator::BisectionCorrected => {
            let (mean, mut var, n) = reduce(&bisection_sums(domain, x, t, setup, seed, false));
            if setup.estimator == Estimator::Bisection {
                var = mean * (1.0 - mean);
            }
            Ok(finish(x, t, setup, mean, var, n))
        }
        Estimator::Sequential => {
            let particles = setup.particles.max(2);
            let replicas = (setup.paths / particles).max(2);
            let steps = (t / setup.delta).ceil().max(1.0) as usize;
            let logs: Vec<f64> = (0..replicas)
                .into_par_iter()
                .map(|r| sequential_replica(domain, x, t, steps, particles, &mut block_rng(seed, r)))
                .collect();
            let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                return Ok(finish(x, t, setup, 0.0, 0.0, replicas));
            }
            let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
            let mean = scaled.iter().sum::<f64>() / replicas as f64;
            let var = scaled.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64;
            let scale = top.exp();
            let est = finish(x, t, setup, mean * scale, var * scale * scale, replicas);
            if est.p_hat == 0.0 {
                return Err(LabError::Numerical(format!("survival probability underflows (ln p̂ = {top:.1})")));
            }
            Ok(est)
        }
    }
}

/// Sample variances of the plain and antithetic bisection estimators from the same draws.
pub fn antithetic_variances<D: Domain + ?Sized>(domain: &D, x: [f64; 3], t: f64, setup: &McSetup, seed: u64) -> Result<(f64, f64)> {
    check_anchor(domain, x, t, setup.delta)?;
    let (_, plain, _) = reduce(&bisection_sums(domain, x, t, setup, seed, false));
    let (_, anti, _) = reduce(&bisection_sums(domain, x, t, setup, seed, true));
    Ok((plain, anti))
}

/// 1 − e^{−d²/t}
pub fn half_space_survival(d: f64, t: f64) -> f64 {
    1.0 - (-d * d / t).exp()
}

/// Half-space benchmark: corrected estimate against the closed form plus the uncorrected δ-refinement sequence.
pub fn half_space_check(d: f64, t: f64, paths: usize, deltas: &[f64], seed: u64) -> Result<ExperimentReport> {
    let dom = HalfSpace { d };
    let x = [0.0; 3];
    let exact = half_space_survival(d, t);
    let mut rep = ExperimentReport::new("mc_half_space", &["corrected", "delta", "p_hat", "std_err", "exact", "z_score"]);
    rep.note("seed", seed);
    let mut worst_z = 0.0f64;
    let mut last_plain: Option<(f64, f64)> = None;
    let mut refinement_ok = true;
    for &delta in deltas {
        for corrected in [true, false] {
            let e = survival_probability(&dom, x, t, &McSetup::bisection(paths, delta, corrected), seed)?;
            let z = (e.p_hat - exact) / e.std_err.max(f64::MIN_POSITIVE);
            rep.push_row(vec![corrected as u8 as f64, delta, e.p_hat, e.std_err, exact, z]);
            if corrected {
                worst_z = worst_z.max(z.abs());
            } else {
                if let Some((p, s)) = last_plain {
                    refinement_ok &= (e.p_hat - exact).abs() <= (p - exact).abs() + 2.0 * (s * s + e.std_err * e.std_err).sqrt();
                }
                last_plain = Some((e.p_hat, e.std_err));
            }
        }
    }
    rep.set_envelope("max_abs_z", worst_z);
    rep.check("half-space survival", worst_z <= 3.0, format!("corrected estimate within {worst_z:.2}σ of 1 − e^(−d²/t) (limit 3)"));
    rep.check("half-space refinement", refinement_ok, "uncorrected bias does not grow under δ-halving");
    Ok(rep)
}

/// k̂(t,x,x) against a PDE diagonal value within 3σ + `allowance` (relative).
pub fn pde_cross_check(estimate: &BridgeEstimate, e1: f64, pde: f64, allowance: f64) -> ExperimentReport {
    let k = estimate.kernel(e1);
    let err = estimate.kernel_err(e1);
    let mut rep = ExperimentReport::new("mc_pde", &["t", "k_mc", "k_mc_err", "k_pde", "rel_diff"]);
    rep.push_row(vec![estimate.horizon, k, err, pde, (k - pde) / pde]);
    rep.set_envelope("rel_diff", (k - pde) / pde);
    rep.set_envelope("rel_err", estimate.rel_err());
    let ok = (k - pde).abs() <= 3.0 * err + allowance * pde;
    rep.check("MC matches PDE diagonal", ok, format!("k̂ = {k:.6e} ± {err:.2e}, PDE {pde:.6e} (3σ + {:.0}%)", allowance * 100.0));
    rep
}

/// Fit of log k̂(t,x,x) against log t; samples with relative error above 20% are dropped.
pub fn exponent_probe<D: Domain + ?Sized>(domain: &D, x: [f64; 3], times: &[f64], e1: f64, setup: &McSetup, seed: u64, target: (f64, f64)) -> Result<ExperimentReport> {
    if let Some(t) = times.iter().find(|&&t| t > 16.0) {
        return Err(LabError::Config(format!("exponent probe limited to t ≤ 16 (got {t})")));
    }
    let mut rep = ExperimentReport::new("mc_exponent", &["t", "p_hat", "std_err", "k_hat", "k_err"]);
    rep.note("seed", seed);
    let mut samples = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let e = survival_probability(domain, x, t, setup, seed.wrapping_add(i as u64))?;
        if e.rel_err() > 0.2 {
            rep.warn(format!("t = {t}: relative error {:.2} > 0.2, sample dropped", e.rel_err()));
            continue;
        }
        let k = e.kernel(e1);
        rep.push_row(vec![t, e.p_hat, e.std_err, k, e.kernel_err(e1)]);
        samples.push((t, k));
    }
    let window = samples.iter().fold((f64::INFINITY, 0.0f64), |w, &(t, _)| (w.0.min(t), w.1.max(t)));
    let fit = fit_power_law(&samples, window)?;
    rep.add_fit("mc_diagonal", &fit, window);
    rep.check_slope("MC exponent", "mc_diagonal", target.0, target.1);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse_tube(beta: f64) -> Tube {
        Tube::new(Shape::default_ellipse(), TwistProfile::new(beta, 1.0).unwrap())
    }

    #[test]
    fn bridge_has_exact_marginal_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut path = Vec::new();
        let (mut s, n) = (0.0, 20000);
        for _ in 0..n {
            bisection_bridge([0.0; 3], 1.0, 3, &mut rng, &mut path);
            s += path[2][0] * path[2][0];
        }
        // Var at s = 1/4 of a bridge over [0, 1] with diffusivity 2: 2 s (1 − s)
        assert!((s / n as f64 - 0.375).abs() < 0.02);
    }

    #[test]
    fn half_space_closed_form() {
        let rep = half_space_check(1.0, 1.0, 200_000, &[1.0 / 16.0, 1.0 / 64.0], 3).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
    }

    #[test]
    fn short_times_do_not_feel_the_boundary() {
        let tube = ellipse_tube(3.0);
        let e = survival_probability(&tube, [0.0; 3], 1e-3, &McSetup::bisection(8192, 1e-5, true), 5).unwrap();
        assert!(e.p_hat > 0.999);
    }

    #[test]
    fn estimates_are_reproducible() {
        let tube = ellipse_tube(3.0);
        let s = McSetup::sequential(4000, 1.0 / 256.0, 500);
        let a = survival_probability(&tube, [0.1, 0.0, 0.5], 0.5, &s, 9).unwrap();
        let b = survival_probability(&tube, [0.1, 0.0, 0.5], 0.5, &s, 9).unwrap();
        assert_eq!(a.p_hat.to_bits(), b.p_hat.to_bits());
        let c = survival_probability(&tube, [0.1, 0.0, 0.5], 0.5, &McSetup::bisection(5000, 1.0 / 256.0, false), 9).unwrap();
        let d = survival_probability(&tube, [0.1, 0.0, 0.5], 0.5, &McSetup::bisection(5000, 1.0 / 256.0, false), 9).unwrap();
        assert_eq!(c.p_hat.to_bits(), d.p_hat.to_bits());
    }

    #[test]
    fn naive_standard_error_is_binomial() {
        let tube = ellipse_tube(0.0);
        let e = survival_probability(&tube, [0.0; 3], 0.1, &McSetup::bisection(10_000, 1.0 / 1024.0, false), 2).unwrap();
        let binom = (e.p_hat * (1.0 - e.p_hat) / 10_000.0).sqrt();
        assert!(e.p_hat > 0.0 && e.p_hat < 1.0);
        assert_eq!(e.std_err, binom);
    }

    #[test]
    fn sequential_agrees_with_bisection() {
        let tube = ellipse_tube(3.0);
        let x = [0.05, 0.0, 0.3];
        let a = survival_probability(&tube, x, 0.05, &McSetup::bisection(100_000, 1.0 / 1024.0, true), 4).unwrap();
        let b = survival_probability(&tube, x, 0.05, &McSetup::sequential(100_000, 0.05 / 64.0, 1000), 4).unwrap();
        let s = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((a.p_hat - b.p_hat).abs() < 4.0 * s + 0.01 * a.p_hat, "{a:?} {b:?}");
    }

    #[test]
    fn delta_halving_is_stable_with_correction() {
        let tube = ellipse_tube(3.0);
        let x = [0.0; 3];
        let a = survival_probability(&tube, x, 0.05, &McSetup::bisection(50_000, 1.0 / 512.0, true), 6).unwrap();
        let b = survival_probability(&tube, x, 0.05, &McSetup::bisection(50_000, 1.0 / 1024.0, true), 7).unwrap();
        assert!((a.p_hat - b.p_hat).abs() < 2.0 * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt());
    }

    #[test]
    fn antithetic_does_not_increase_variance() {
        let tube = ellipse_tube(0.0);
        let s = McSetup::bisection(20_000, 1.0 / 256.0, false);
        let (plain, anti) = antithetic_variances(&tube, [0.3, 0.1, 0.0], 0.05, &s, 11).unwrap();
        assert!(anti <= plain * (1.0 + 3.0 * (2.0f64 / 20_000.0).sqrt()), "{plain} {anti}");
    }

    #[test]
    fn anchor_too_close_to_boundary_is_rejected() {
        let tube = ellipse_tube(3.0);
        assert!(survival_probability(&tube, [0.69, 0.0, 0.0], 1.0, &McSetup::bisection(10, 0.01, false), 1).is_err());
    }

    #[test]
    fn twisted_distance_shrinks_off_axis() {
        let tube = ellipse_tube(3.0);
        let straight = ellipse_tube(0.0);
        assert!((straight.distance([0.0, 0.45, 0.0]) - 0.05).abs() < 1e-9);
        let p = [0.3, 0.35, 0.0];
        assert!(tube.distance(p) < straight.distance(p));
        assert_eq!(straight.distance(p), Shape::default_ellipse().rho([0.3, 0.35]));
    }

    #[test]
    fn distance_floor_is_a_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tube = ellipse_tube(3.0);
        for _ in 0..2000 {
            let p = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), rng.random_range(-3.0..3.0)];
            if tube.contains(p) {
                assert!(tube.distance_floor(p) <= tube.distance(p) + 1e-12, "{p:?}");
            }
        }
    }

    #[test]
    fn continuum_energies() {
        assert!((continuum_ground_energy(&Shape::unit_square()) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        assert!((continuum_ground_energy(&Shape::Disc { r: 1.0 }) - 5.783_185_962_946_784).abs() < 1e-9);
    }
}
