//! Cross-sections, twist profiles and tube grids.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::LabError;

/// Shape descriptor of a cross-section containing the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Ellipse { a: f64, b: f64 },
    /// axis-aligned rectangle (x0, x1) x (y0, y1); straight-tube oracles only
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disc { r: f64 },
}

impl Shape {
    pub fn unit_square() -> Self {
        Shape::Rectangle { x0: -0.5, x1: 0.5, y0: -0.5, y1: 0.5 }
    }

    pub fn default_ellipse() -> Self {
        Shape::Ellipse { a: 0.7, b: 0.5 }
    }

    fn semi_axes(&self) -> (f64, f64) {
        match *self {
            Shape::Ellipse { a, b } => (a, b),
            Shape::Rectangle { x0, x1, y0, y1 } => ((x1 - x0) / 2.0, (y1 - y0) / 2.0),
            Shape::Disc { r } => (r, r),
        }
    }

    fn level<T: Real>(&self, p: [T; 2]) -> T {
        let [x, y] = p;
        match *self {
            Shape::Ellipse { a, b } => x * x / T::lit(a * a) + y * y / T::lit(b * b) - T::one(),
            Shape::Rectangle { x0, x1, y0, y1 } => {
                let dx = (x - T::lit(x0)).min(T::lit(x1) - x);
                let dy = (y - T::lit(y0)).min(T::lit(y1) - y);
                -dx.min(dy)
            }
            Shape::Disc { r } => (x * x + y * y).sqrt() - T::lit(r),
        }
    }

    pub fn contains<T: Real>(&self, p: [T; 2]) -> bool {
        self.level(p) < T::lit(-1e-12)
    }

    /// Euclidean distance from `p` to the boundary curve.
    pub fn boundary_distance<T: Real>(&self, p: [T; 2]) -> T {
        match *self {
            Shape::Ellipse { a, b } => ellipse_distance(T::lit(a), T::lit(b), p),
            Shape::Rectangle { x0, x1, y0, y1 } => {
                let [x, y] = p;
                let (x0, x1, y0, y1) = (T::lit(x0), T::lit(x1), T::lit(y0), T::lit(y1));
                if self.contains(p) {
                    (x - x0).min(x1 - x).min(y - y0).min(y1 - y)
                } else {
                    let dx = (x0 - x).max(x - x1).max(T::zero());
                    let dy = (y0 - y).max(y - y1).max(T::zero());
                    let outside = (dx * dx + dy * dy).sqrt();
                    if outside > T::zero() {
                        outside
                    } else {
                        (x - x0).abs().min((x1 - x).abs()).min((y - y0).abs()).min((y1 - y).abs())
                    }
                }
            }
            Shape::Disc { r } => ((p[0] * p[0] + p[1] * p[1]).sqrt() - T::lit(r)).abs(),
        }
    }

    /// Distance to the boundary for interior points, zero outside.
    pub fn rho<T: Real>(&self, p: [T; 2]) -> T {
        if self.contains(p) {
            self.boundary_distance(p)
        } else {
            T::zero()
        }
    }

    fn rotationally_symmetric(&self) -> bool {
        match *self {
            Shape::Disc { .. } => true,
            Shape::Ellipse { a, b } => (a - b).abs() <= 1e-14 * a.abs().max(b.abs()),
            Shape::Rectangle { .. } => false,
        }
    }
}

/// Distance from `p` to the ellipse x²/a² + y²/b² = 1.
///
/// The foot point solves the projection equation in the Lagrange parameter
/// `t`; safeguarded Newton iteration on the bracketing interval.
pub fn ellipse_distance<T: Real>(a: T, b: T, p: [T; 2]) -> T {
    let (mut y0, mut y1) = (p[0].abs(), p[1].abs());
    let (mut a, mut b) = (a, b);
    if a < b {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut y0, &mut y1);
    }
    let (x0, x1) = ellipse_foot(a, b, y0, y1);
    ((y0 - x0) * (y0 - x0) + (y1 - x1) * (y1 - x1)).sqrt()
}

/// Closest boundary point for a first-quadrant point with `a >= b`.
fn ellipse_foot<T: Real>(a: T, b: T, y0: T, y1: T) -> (T, T) {
    let zero = T::zero();
    if y1 > zero {
        if y0 > zero {
            let f = |t: T| {
                let r0 = a * y0 / (t + a * a);
                let r1 = b * y1 / (t + b * b);
                let val = r0 * r0 + r1 * r1 - T::one();
                let der = -T::lit(2.0) * (r0 * r0 / (t + a * a) + r1 * r1 / (t + b * b));
                (val, der)
            };
            let mut lo = -b * b + b * y1;
            let mut hi = -b * b + (a * a * y0 * y0 + b * b * y1 * y1).sqrt();
            let mut t = (lo + hi) * T::lit(0.5);
            let scale = a * a + b * b;
            for _ in 0..200 {
                let (val, der) = f(t);
                if val > zero {
                    lo = t;
                } else {
                    hi = t;
                }
                let mut next = t - val / der;
                if !(next > lo && next < hi) {
                    next = (lo + hi) * T::lit(0.5);
                }
                let done = (next - t).abs() <= T::lit(1e-15) * scale || hi - lo <= T::lit(1e-15) * scale;
                t = next;
                if done {
                    break;
                }
            }
            (a * a * y0 / (t + a * a), b * b * y1 / (t + b * b))
        } else {
            (zero, b)
        }
    } else {
        let denom = a * a - b * b;
        if y0 * a < denom {
            let x0 = a * a * y0 / denom;
            let ratio = x0 / a;
            (x0, b * (T::one() - ratio * ratio).max(zero).sqrt())
        } else {
            (a, zero)
        }
    }
}

/// What the cross-section will be used for; twisted experiments need a
/// smooth, non-rotationally-symmetric section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Usage {
    Twisted,
    StraightOracle,
}

/// Cross-section together with its uniform interior grid.
#[derive(Debug, Clone)]
pub struct CrossSection<T> {
    pub shape: Shape,
    pub h: T,
    pub nx: usize,
    pub ny: usize,
    origin: [T; 2],
    /// grid cell -> interior node id
    index: Vec<Option<usize>>,
    /// interior node id -> grid cell (i, j)
    pub cells: Vec<(usize, usize)>,
    pub coords: Vec<[T; 2]>,
    /// exact boundary distance at each interior node
    pub dist: Vec<T>,
}

impl<T: Real> CrossSection<T> {
    /// Build with the validity checks used by all experiments.
    pub fn new(shape: Shape, h: f64, usage: Usage) -> Result<Self, LabError> {
        if !(h > 0.0) {
            return Err(LabError::Config(format!("mesh width must be positive, got {h}")));
        }
        if !shape.contains([T::zero(); 2]) {
            return Err(LabError::Geometry("cross-section must contain the origin".into()));
        }
        match (usage, shape) {
            (Usage::Twisted, Shape::Rectangle { .. }) => {
                return Err(LabError::Geometry(
                    "rectangular sections have corners; they are allowed for straight-tube oracles only".into(),
                ))
            }
            (Usage::Twisted, s) if s.rotationally_symmetric() => {
                return Err(LabError::Geometry(
                    "rotationally symmetric section: twisting has no effect, use a non-circular ellipse".into(),
                ))
            }
            _ => {}
        }
        let (sa, sb) = shape.semi_axes();
        if sa.min(sb) / h < 10.0 - 1e-9 {
            return Err(LabError::Geometry(format!(
                "mesh too coarse: {:.2} nodes per semi-axis, at least 10 required",
                sa.min(sb) / h
            )));
        }
        Ok(Self::new_unchecked(shape, h))
    }

    /// Build without the resolution and usage checks (tests and tiny grids).
    pub fn new_unchecked(shape: Shape, h: f64) -> Self {
        let (origin, nx, ny) = match shape {
            Shape::Rectangle { x0, x1, y0, y1 } => {
                let nx = ((x1 - x0) / h).round() as usize + 1;
                let ny = ((y1 - y0) / h).round() as usize + 1;
                ([T::lit(x0), T::lit(y0)], nx, ny)
            }
            _ => {
                let (sa, sb) = shape.semi_axes();
                let kx = (sa / h).ceil() as usize;
                let ky = (sb / h).ceil() as usize;
                ([-T::of(kx) * T::lit(h), -T::of(ky) * T::lit(h)], 2 * kx + 1, 2 * ky + 1)
            }
        };
        let ht = T::lit(h);
        let mut index = vec![None; nx * ny];
        let mut cells = vec![];
        let mut coords = vec![];
        let mut dist = vec![];
        for j in 0..ny {
            for i in 0..nx {
                let p = [origin[0] + T::of(i) * ht, origin[1] + T::of(j) * ht];
                if shape.contains(p) {
                    index[i + j * nx] = Some(cells.len());
                    cells.push((i, j));
                    coords.push(p);
                    dist.push(shape.boundary_distance(p));
                }
            }
        }
        CrossSection { shape, h: ht, nx, ny, origin, index, cells, coords, dist }
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_node(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        self.index[i as usize + j as usize * self.nx]
    }

    /// Neighbour of `node` shifted by (di, dj) grid cells, if interior.
    pub fn neighbor(&self, node: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.cells[node];
        self.cell_node(i as isize + di, j as isize + dj)
    }

    pub fn nearest_node(&self, p: [T; 2]) -> Option<usize> {
        let i = ((p[0] - self.origin[0]) / self.h).round().to_isize()?;
        let j = ((p[1] - self.origin[1]) / self.h).round().to_isize()?;
        self.cell_node(i, j)
    }

    /// Node closest to the origin (the reference node for sign conventions).
    pub fn origin_node(&self) -> usize {
        let mut best = 0;
        let mut bd = T::infinity();
        for (k, c) in self.coords.iter().enumerate() {
            let d = c[0] * c[0] + c[1] * c[1];
            if d < bd {
                bd = d;
                best = k;
            }
        }
        best
    }

    pub fn contains(&self, p: [T; 2]) -> bool {
        self.shape.contains(p)
    }

    pub fn rho(&self, p: [T; 2]) -> T {
        self.shape.rho(p)
    }

    /// Largest |x'| over interior nodes.
    pub fn max_radius(&self) -> T {
        self.coords.iter().map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt()).fold(T::zero(), T::max)
    }

    /// Nodes all four of whose neighbours are interior.
    pub fn is_stencil_interior(&self, node: usize) -> bool {
        [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().all(|&(di, dj)| self.neighbor(node, di, dj).is_some())
    }

    /// True when every interior node can be reached from every other through 4-neighbours.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(w) = self.neighbor(v, di, dj) {
                    if !seen[w] {
                        seen[w] = true;
                        count += 1;
                        stack.push(w);
                    }
                }
            }
        }
        count == n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    CInfinity,
}

const THETA_TABLE: usize = 4096;

/// Twist profile θ with θ̇(s) = β exp(1/((s/R)² − 1)) supported in (−R, R).
#[derive(Debug, Clone)]
pub struct TwistProfile<T> {
    pub beta: T,
    pub radius: T,
    pub smoothness: Smoothness,
    table: Vec<T>,
}

impl<T: Real> TwistProfile<T> {
    pub fn new(beta: f64, radius: f64) -> Result<Self, LabError> {
        if !(radius > 0.0) || !beta.is_finite() {
            return Err(LabError::Config(format!("invalid twist profile beta={beta}, R={radius}")));
        }
        let mut p = TwistProfile { beta: T::lit(beta), radius: T::lit(radius), smoothness: Smoothness::CInfinity, table: vec![] };
        let step = p.table_step();
        let mut table = Vec::with_capacity(THETA_TABLE + 1);
        let mut acc = T::zero();
        table.push(acc);
        let six = T::lit(6.0);
        for i in 0..THETA_TABLE {
            let s0 = -p.radius + T::of(i) * step;
            let s1 = s0 + step;
            let sm = (s0 + s1) * T::lit(0.5);
            acc += step / six * (p.theta_dot(s0) + T::lit(4.0) * p.theta_dot(sm) + p.theta_dot(s1));
            table.push(acc);
        }
        p.table = table;
        Ok(p)
    }

    pub fn straight() -> Self {
        Self::new(0.0, 1.0).expect("straight profile")
    }

    fn table_step(&self) -> T {
        T::lit(2.0) * self.radius / T::of(THETA_TABLE)
    }

    pub fn is_straight(&self) -> bool {
        self.beta == T::zero()
    }

    pub fn theta_dot(&self, s: T) -> T {
        let u = s / self.radius;
        let u2 = u * u;
        if u2 >= T::one() {
            return T::zero();
        }
        self.beta * (T::one() / (u2 - T::one())).exp()
    }

    pub fn theta(&self, s: T) -> T {
        if s <= -self.radius {
            return T::zero();
        }
        if s >= self.radius {
            return *self.table.last().unwrap();
        }
        let step = self.table_step();
        let x = (s + self.radius) / step;
        let i = x.floor().to_usize().unwrap_or(0).min(THETA_TABLE - 1);
        let s0 = -self.radius + T::of(i) * step;
        let u = (s - s0) / step;
        // cubic Hermite with exact derivatives
        let (y0, y1) = (self.table[i], self.table[i + 1]);
        let (d0, d1) = (self.theta_dot(s0) * step, self.theta_dot(s0 + step) * step);
        let u2 = u * u;
        let u3 = u2 * u;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        (two * u3 - three * u2 + T::one()) * y0 + (u3 - two * u2 + u) * d0 + (-two * u3 + three * u2) * y1 + (u3 - u2) * d1
    }

    /// Total rotation angle θ(+∞).
    pub fn total_angle(&self) -> T {
        *self.table.last().unwrap()
    }

    pub fn max_theta_dot(&self) -> T {
        self.beta.abs() * (-T::one()).exp()
    }
}

/// Rotate the cross-plane of a twisted-tube point into straight coordinates.
pub fn map_to_straight<T: Real>(profile: &TwistProfile<T>, p: [T; 3]) -> [T; 3] {
    let th = profile.theta(p[2]);
    let (s, c) = th.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

/// Inverse of [`map_to_straight`].
pub fn map_to_twisted<T: Real>(profile: &TwistProfile<T>, x: [T; 3]) -> [T; 3] {
    let th = profile.theta(x[2]);
    let (s, c) = th.sin_cos();
    [c * x[0] + s * x[1], -s * x[0] + c * x[1], x[2]]
}

/// Tube grid: cross-section nodes times longitudinal nodes on (−L, L).
///
/// Longitudinal nodes are x₃ₖ = −L + (k+1)h₃, k = 0..n₃, zero extension
/// beyond; flat index is `k * n2 + i`.
#[derive(Debug, Clone)]
pub struct TubeGrid<T> {
    pub cross: CrossSection<T>,
    pub half_length: T,
    pub h3: T,
    pub n3: usize,
}

impl<T: Real> TubeGrid<T> {
    pub fn new(cross: CrossSection<T>, half_length: f64, h3: f64, twist_radius: f64) -> Result<Self, LabError> {
        if half_length < 4.0 * twist_radius - 1e-12 {
            return Err(LabError::Config(format!("half-length L={half_length} must be at least 4R={}", 4.0 * twist_radius)));
        }
        let cells = 2.0 * half_length / h3;
        if !(h3 > 0.0) || (cells - cells.round()).abs() > 1e-9 || cells.round() < 2.0 {
            return Err(LabError::Config(format!("2L/h3 must be an integer >= 2 (L={half_length}, h3={h3})")));
        }
        Ok(Self::new_unchecked(cross, half_length, h3))
    }

    pub fn new_unchecked(cross: CrossSection<T>, half_length: f64, h3: f64) -> Self {
        let n3 = (2.0 * half_length / h3).round() as usize - 1;
        TubeGrid { cross, half_length: T::lit(half_length), h3: T::lit(h3), n3 }
    }

    pub fn n2(&self) -> usize {
        self.cross.len()
    }

    pub fn len(&self) -> usize {
        self.n2() * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn z(&self, k: usize) -> T {
        -self.half_length + T::of(k + 1) * self.h3
    }

    pub fn z_nodes(&self) -> Vec<T> {
        (0..self.n3).map(|k| self.z(k)).collect()
    }

    pub fn cell_volume(&self) -> T {
        self.cross.h * self.cross.h * self.h3
    }

    /// Longitudinal index nearest to `z`.
    pub fn nearest_slice(&self, z: T) -> Option<usize> {
        let k = ((z + self.half_length) / self.h3).round().to_isize()? - 1;
        (k >= 0 && (k as usize) < self.n3).then_some(k as usize)
    }

    pub fn node(&self, cross_node: usize, slice: usize) -> usize {
        slice * self.n2() + cross_node
    }

    /// Flat index of the grid node nearest to a straight-coordinate point.
    pub fn nearest(&self, x: [T; 3]) -> Option<usize> {
        let i = self.cross.nearest_node([x[0], x[1]])?;
        let k = self.nearest_slice(x[2])?;
        Some(self.node(i, k))
    }

    pub fn point(&self, idx: usize) -> [T; 3] {
        let n2 = self.n2();
        let c = self.cross.coords[idx % n2];
        [c[0], c[1], self.z(idx / n2)]
    }

    /// Whether t lies inside the truncation-validity window for a point at x₃.
    pub fn within_validity(&self, t: T, x3: T) -> bool {
        let gap = self.half_length - x3.abs();
        t <= gap * gap / T::lit(8.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpShape {
    /// cos²(π(x₃ − c)/(2w)) on |x₃ − c| < w
    #[default]
    Smooth,
    /// indicator of |x₃ − c| ≤ w
    Box,
}

/// Potential depending on x₃ only, constant over the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    #[serde(default)]
    pub shape: BumpShape,
}

impl Bump {
    pub fn new(amplitude: f64) -> Self {
        Bump { amplitude, center: 0.0, half_width: 1.0, shape: BumpShape::Smooth }
    }

    pub fn boxed(amplitude: f64) -> Self {
        Bump { shape: BumpShape::Box, ..Self::new(amplitude) }
    }

    pub fn value<T: Real>(&self, x3: T) -> T {
        let s = (x3.as_f64() - self.center) / self.half_width;
        match self.shape {
            BumpShape::Smooth if s.abs() < 1.0 => T::lit(self.amplitude * (0.5 * std::f64::consts::PI * s).cos().powi(2)),
            BumpShape::Box if s.abs() <= 1.0 + 1e-12 => T::lit(self.amplitude),
            _ => T::zero(),
        }
    }

    /// One value per slice.
    pub fn slices<T: Real>(&self, grid: &TubeGrid<T>) -> Vec<T> {
        (0..grid.n3).map(|k| self.value(grid.z(k))).collect()
    }

    /// One value per grid node.
    pub fn nodes<T: Real>(&self, grid: &TubeGrid<T>) -> Vec<T> {
        let n2 = grid.n2();
        self.slices(grid).into_iter().flat_map(|v| std::iter::repeat_n(v, n2)).collect()
    }

    /// ∫ V^p (1 + x₃²)^q dx over the tube with cross-section area `area`.
    pub fn weighted_integral(&self, p: f64, q: f64, area: f64) -> f64 {
        let n = 2000;
        let (a, b) = (self.center - self.half_width, self.center + self.half_width);
        let dx = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * dx;
            s += self.value::<f64>(x).powf(p) * (1.0 + x * x).powf(q);
        }
        s * dx * area
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_dot_at_center_and_support() {
        let p = TwistProfile::<f64>::new(3.0, 1.0).unwrap();
        assert!((p.theta_dot(0.0) - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((p.theta_dot(0.0) - 1.10364).abs() < 1e-5);
        assert_eq!(p.theta_dot(1.0), 0.0);
        assert_eq!(p.theta_dot(-1.5), 0.0);
        assert_eq!(p.theta(-2.0), 0.0);
        assert_eq!(p.theta(1.0), p.theta(5.0));
    }

    #[test]
    fn theta_matches_fine_quadrature() {
        let p = TwistProfile::<f64>::new(3.0, 1.0).unwrap();
        for &s in &[-0.73, -0.1, 0.0, 0.37, 0.99] {
            // midpoint rule with many panels as independent reference
            let n = 400_000;
            let h = (s + 1.0) / n as f64;
            let reference: f64 = (0..n).map(|i| p.theta_dot(-1.0 + (i as f64 + 0.5) * h)).sum::<f64>() * h;
            assert!((p.theta(s) - reference).abs() < 1e-10, "s={s}");
        }
        // total rotation = beta * R * 0.4439938161680794...
        assert!((p.total_angle() - 3.0 * 0.443_993_816_168_079_4).abs() < 1e-10);
    }

    #[test]
    fn ellipse_distance_agrees_with_brute_force() {
        let (a, b) = (0.7f64, 0.5f64);
        for &(x, y) in &[(0.1, 0.2), (0.6, 0.05), (0.0, 0.3), (0.3, 0.0), (0.69, 0.0), (-0.2, -0.4), (0.0, 0.0)] {
            let n = 200_000;
            let brute = (0..n)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::TAU / n as f64;
                    ((a * t.cos() - x).powi(2) + (b * t.sin() - y).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            let d = ellipse_distance(a, b, [x, y]);
            assert!(d <= brute + 1e-12 && brute - d < 1e-9, "({x},{y}) {d} {brute}");
        }
    }

    #[test]
    fn default_ellipse_grid() {
        let cs = CrossSection::<f64>::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let n = cs.len() as f64;
        assert!((n - 440.0).abs() < 44.0, "{n}");
        assert!(cs.is_connected());
        for k in 0..cs.len() {
            if !cs.is_stencil_interior(k) {
                assert!(cs.dist[k] <= cs.h * 2f64.sqrt());
            }
        }
        let o = cs.origin_node();
        assert_eq!(cs.coords[o], [0.0, 0.0]);
    }

    #[test]
    fn rejected_domains() {
        assert!(CrossSection::<f64>::new(Shape::Disc { r: 0.5 }, 0.05, Usage::Twisted).is_err());
        assert!(CrossSection::<f64>::new(Shape::unit_square(), 0.05, Usage::Twisted).is_err());
        assert!(CrossSection::<f64>::new(Shape::unit_square(), 0.05, Usage::StraightOracle).is_ok());
        assert!(CrossSection::<f64>::new(Shape::Rectangle { x0: 0.1, x1: 1.0, y0: -0.5, y1: 0.5 }, 0.01, Usage::StraightOracle).is_err());
        assert!(CrossSection::<f64>::new(Shape::default_ellipse(), 0.1, Usage::Twisted).is_err());
    }

    #[test]
    fn square_grid_counts() {
        let cs = CrossSection::<f64>::new(Shape::unit_square(), 1.0 / 32.0, Usage::StraightOracle).unwrap();
        assert_eq!(cs.len(), 31 * 31);
    }

    #[test]
    fn rotation_conventions() {
        let p = TwistProfile::<f64>::new(3.0, 1.0).unwrap();
        let x = [0.3, -0.2, -3.0];
        assert_eq!(map_to_straight(&p, x), x);
        let y = [0.31, -0.17, 0.4];
        let back = map_to_twisted(&p, map_to_straight(&p, y));
        for i in 0..3 {
            assert!((back[i] - y[i]).abs() < 1e-14);
        }
        let s = TwistProfile::<f64>::straight();
        assert_eq!(map_to_straight(&s, y), y);
    }

    #[test]
    fn tube_grid_layout() {
        let cs = CrossSection::<f64>::new(Shape::default_ellipse(), 0.05, Usage::Twisted).unwrap();
        let g = TubeGrid::new(cs.clone(), 16.0, 0.125, 1.0).unwrap();
        assert_eq!(g.n3, 255);
        assert!((g.z(127)).abs() < 1e-14);
        assert!(TubeGrid::new(cs.clone(), 3.0, 0.125, 1.0).is_err());
        assert!(TubeGrid::new(cs, 16.0, 0.3, 1.0).is_err());
    }
}
