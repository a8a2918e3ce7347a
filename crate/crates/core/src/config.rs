//! Run configuration shared by the command-line driver and the acceptance suite.
//!
//! Every block has defaults, so an empty document is a valid configuration.
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::eigen2d::EigenMethod;
use crate::geometry::{Bump, BumpShape, CrossSection, Shape, TubeGrid, TwistProfile, Usage};
use crate::twisted::StepPolicy;
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    /// semi-axes a, b
    Ellipse,
    /// unit square centred at the origin
    Square,
    /// side lengths a × b centred at the origin
    Rectangle,
    /// radius a
    Disc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub shape: ShapeKind,
    pub a: f64,
    pub b: f64,
    /// cross-section mesh width
    pub h: f64,
    pub beta: f64,
    /// twist support radius R
    pub radius: f64,
    /// truncation half-length L
    pub half_length: f64,
    pub h3: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { shape: ShapeKind::Ellipse, a: 0.7, b: 0.5, h: 0.05, beta: 3.0, radius: 1.0, half_length: 24.0, h3: 0.125 }
    }
}

impl GeometryConfig {
    pub fn shape(&self) -> Shape {
        match self.shape {
            ShapeKind::Ellipse => Shape::Ellipse { a: self.a, b: self.b },
            ShapeKind::Square => Shape::unit_square(),
            ShapeKind::Rectangle => Shape::Rectangle { x0: -0.5 * self.a, x1: 0.5 * self.a, y0: -0.5 * self.b, y1: 0.5 * self.b },
            ShapeKind::Disc => Shape::Disc { r: self.a },
        }
    }

    pub fn is_twisted(&self) -> bool {
        self.beta != 0.0
    }

    pub fn profile(&self) -> Result<TwistProfile<f64>> {
        if self.is_twisted() {
            TwistProfile::new(self.beta, self.radius)
        } else {
            Ok(TwistProfile::straight())
        }
    }

    /// Cross-section with the twisted-mode checks applied when β ≠ 0.
    pub fn cross_section(&self) -> Result<CrossSection<f64>> {
        let usage = if self.is_twisted() { Usage::Twisted } else { Usage::StraightOracle };
        CrossSection::new(self.shape(), self.h, usage)
    }

    /// Cross-section for experiments that never twist it (eigenvalues, straight controls).
    pub fn straight_cross_section(&self) -> Result<CrossSection<f64>> {
        CrossSection::new(self.shape(), self.h, Usage::StraightOracle)
    }

    pub fn grid(&self, cross: CrossSection<f64>, half_length: f64, h3: f64) -> Result<TubeGrid<f64>> {
        TubeGrid::new(cross, half_length, h3, self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenChoice {
    Auto,
    Dense,
    Lanczos,
}

impl From<EigenChoice> for EigenMethod {
    fn from(c: EigenChoice) -> Self {
        match c {
            EigenChoice::Auto => EigenMethod::Auto,
            EigenChoice::Dense => EigenMethod::Dense,
            EigenChoice::Lanczos => EigenMethod::Lanczos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Δt ≤ step_fraction · t
    pub step_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<f64>,
    /// backward-Euler half steps at the start of each column
    pub startup: usize,
    pub eigen_method: EigenChoice,
    /// cross-section modes kept by the Galerkin operator
    pub modes: usize,
    /// worker threads; absent means available parallelism
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = StepPolicy::default();
        SolverConfig {
            cg_tol: p.cg_tol,
            cg_max_iter: p.cg_max_iter,
            step_fraction: p.fraction,
            step_cap: p.cap,
            startup: p.startup,
            eigen_method: EigenChoice::Auto,
            modes: 10,
            workers: None,
        }
    }
}

impl SolverConfig {
    pub fn policy(&self) -> StepPolicy {
        StepPolicy { fraction: self.step_fraction, cap: self.step_cap, startup: self.startup, cg_tol: self.cg_tol, cg_max_iter: self.cg_max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    pub count: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { count: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kernel1dConfig {
    pub free_half_length: f64,
    pub free_h: f64,
    pub half_length: f64,
    pub h: f64,
    /// stability check compares L and scale·L
    pub scale: f64,
    pub times: Vec<f64>,
    pub window: [f64; 2],
    pub points: Vec<f64>,
    pub ground_state_step: f64,
}

impl Default for Kernel1dConfig {
    fn default() -> Self {
        Kernel1dConfig {
            free_half_length: 16.0,
            free_h: 1.0 / 64.0,
            half_length: 32.0,
            h: 1.0 / 16.0,
            scale: 1.5,
            times: geometric(1.0, 64.0, 2f64.powf(0.25)),
            window: [8.0, 64.0],
            points: vec![0.0, 1.0, 2.0, 4.0],
            ground_state_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefKernelConfig {
    pub half_length: f64,
    pub h3: f64,
    pub modes: usize,
    pub times: Vec<f64>,
    pub points_x3: Vec<f64>,
    pub davies_times: Vec<f64>,
    pub davies_half_length: f64,
    pub davies_h3: f64,
}

impl Default for RefKernelConfig {
    fn default() -> Self {
        RefKernelConfig {
            half_length: 64.0,
            h3: 0.125,
            modes: 6,
            times: geometric(1.0, 256.0, 2f64.sqrt()),
            points_x3: vec![0.0, 1.0, 3.0, 6.0],
            davies_times: geometric(100.0, 1000.0, 10f64.powf(0.1)),
            davies_half_length: 256.0,
            davies_h3: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Kernel3dConfig {
    /// x₃ of the sources, placed at the cross-section origin
    pub sources_x3: Vec<f64>,
    pub times: Vec<f64>,
    pub window: [f64; 2],
    /// rerun with h₃/2 and compare envelope constants
    pub refine: bool,
    /// relative drift allowed between h₃ and h₃/2
    pub refine_tolerance: f64,
    /// time of the rectangle-section oracle value (straight tubes only)
    pub oracle_time: f64,
    pub small_times: Vec<f64>,
    pub offdiag_x3: Vec<[f64; 2]>,
    pub offdiag_times: Vec<f64>,
    pub offdiag_gauss: f64,
}

impl Default for Kernel3dConfig {
    fn default() -> Self {
        Kernel3dConfig {
            sources_x3: vec![0.0],
            times: geometric(1.0, 64.0, 2f64.sqrt()),
            window: [4.0, 64.0],
            refine: true,
            refine_tolerance: 0.25,
            oracle_time: 10.0,
            small_times: vec![0.0625, 0.125, 0.25, 0.5, 1.0],
            offdiag_x3: vec![[0.0, 2.0], [-3.0, 3.0]],
            offdiag_times: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            offdiag_gauss: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensConfig {
    pub ratio_half_length: f64,
    pub harmonic_half_length: f64,
    pub h3: f64,
    pub scale: f64,
}

impl Default for GreensConfig {
    fn default() -> Self {
        GreensConfig { ratio_half_length: 48.0, harmonic_half_length: 120.0, h3: 0.125, scale: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NashConfig {
    pub half_length: f64,
    pub h3: f64,
    pub trials: usize,
    pub kappas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub r_points: usize,
}

impl Default for NashConfig {
    fn default() -> Self {
        NashConfig { half_length: 8.0, h3: 0.125, trials: 200, kappas: vec![0.5, 2.0, 10.0], lambdas: vec![1.0, 4.0, 16.0], r_points: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub twisted_lengths: Vec<f64>,
    pub straight_lengths: Vec<f64>,
    pub h3: f64,
}

impl Default for HardyConfig {
    fn default() -> Self {
        HardyConfig { twisted_lengths: vec![96.0, 144.0], straight_lengths: vec![16.0, 32.0, 64.0, 128.0, 256.0], h3: 0.125 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountConfig {
    pub half_length: f64,
    pub h3: f64,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub bump: Bump,
    pub small_alphas: Vec<f64>,
    pub small: CountConfig,
    pub large_alphas: Vec<f64>,
    pub large: CountConfig,
    pub lieb_alphas: Vec<f64>,
    /// centre of the displaced bump in the Lieb comparison
    pub far_center: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            bump: Bump { amplitude: 1.0, center: 0.0, half_width: 1.0, shape: BumpShape::Box },
            small_alphas: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            small: CountConfig { half_length: 256.0, h3: 0.125, modes: 10 },
            large_alphas: vec![20.0, 28.28, 40.0, 56.57, 80.0, 113.1, 160.0],
            large: CountConfig { half_length: 8.0, h3: 1.0 / 32.0, modes: 60 },
            lieb_alphas: vec![0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0],
            far_center: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevConfig {
    pub half_length: f64,
    pub h3: f64,
    pub exponents: Vec<f64>,
    pub trials: usize,
    pub family_half_length: f64,
    /// exponent of the straight-tube failure probe
    pub straight_p: f64,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        SobolevConfig { half_length: 64.0, h3: 0.125, exponents: vec![2.0, 4.0, 6.0], trials: 100, family_half_length: 4096.0, straight_p: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub half_space_distance: f64,
    pub half_space_time: f64,
    pub half_space_paths: usize,
    pub half_space_deltas: Vec<f64>,
    pub pde_time: f64,
    pub pde_half_length: f64,
    pub pde_h3: f64,
    pub pde_allowance: f64,
    pub paths: usize,
    pub delta: f64,
    pub particles: usize,
    pub exponent_times: Vec<f64>,
    pub exponent_paths: usize,
    pub exponent_delta: f64,
    pub exponent_tolerance: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            half_space_distance: 1.0,
            half_space_time: 1.0,
            half_space_paths: 1_000_000,
            half_space_deltas: vec![1.0 / 16.0, 1.0 / 64.0],
            pde_time: 4.0,
            pde_half_length: 12.0,
            pde_h3: 0.125,
            pde_allowance: 0.05,
            paths: 1_000_000,
            delta: 1.0 / 256.0,
            particles: 1000,
            exponent_times: vec![1.6, 2.5, 4.0, 6.3, 10.0, 16.0],
            exponent_paths: 50_000,
            exponent_delta: 1.0 / 128.0,
            exponent_tolerance: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCase {
    pub beta: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub half_length: f64,
    pub h3: f64,
    pub times: Vec<f64>,
    pub cases: Vec<DecayCase>,
    pub straight_cases: Vec<DecayCase>,
    pub l1_linf_betas: Vec<f64>,
    pub l1_linf_sources: Vec<f64>,
    pub power_iterations: usize,
    pub power_tol: f64,
    /// (μ, ν) exponents of the mixed off-diagonal bound
    pub mixed: Vec<[f64; 2]>,
    pub mixed_pairs_x3: Vec<[f64; 2]>,
    pub davies_pairs_x3: Vec<[f64; 2]>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            half_length: 128.0,
            h3: 0.125,
            times: geometric(4.0, 64.0, 2f64.sqrt()),
            cases: vec![DecayCase { beta: 0.6, kappa: 0.0 }, DecayCase { beta: 1.6, kappa: 2.0 }],
            straight_cases: vec![DecayCase { beta: 0.6, kappa: 0.0 }, DecayCase { beta: 1.6, kappa: 2.0 }],
            l1_linf_betas: vec![0.0, 0.5],
            l1_linf_sources: vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 16.0, 22.0, 32.0],
            power_iterations: 30,
            power_tol: 1e-6,
            mixed: vec![[1.0, 1.0], [0.0, 0.0], [1.0, 0.0]],
            mixed_pairs_x3: vec![[0.0, 6.0], [0.0, 0.0], [-2.0, 4.0]],
            davies_pairs_x3: vec![[0.0, 0.0], [1.0, -2.0], [3.0, 2.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub bump: Bump,
    pub half_length: f64,
    pub h3: f64,
    pub sources_x3: Vec<f64>,
    pub times: Vec<f64>,
    pub window: [f64; 2],
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            bump: Bump::new(2.0),
            half_length: 24.0,
            h3: 0.125,
            sources_x3: vec![0.0],
            times: geometric(1.0, 64.0, 2f64.sqrt()),
            window: [4.0, 64.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "twistlab-out".into(), plots: true }
    }
}

/// Complete configuration of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub solver: SolverConfig,
    pub eigen: EigenConfig,
    pub kernel1d: Kernel1dConfig,
    pub refkernel: RefKernelConfig,
    pub kernel3d: Kernel3dConfig,
    pub greens: GreensConfig,
    pub nash: NashConfig,
    pub hardy: HardyConfig,
    pub spectral: SpectralConfig,
    pub sobolev: SobolevConfig,
    pub mc: McConfig,
    pub decay: DecayConfig,
    pub perturb: PerturbConfig,
    pub output: OutputConfig,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn positive_list(name: &str, v: &[f64]) -> Result<()> {
    v.iter().try_for_each(|&x| positive(name, x))
}

impl RunConfig {
    /// Range checks that do not need a grid; geometry admissibility is checked when sections are built.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        positive("geometry.h", g.h)?;
        positive("geometry.h3", g.h3)?;
        positive("geometry.radius", g.radius)?;
        positive("geometry.half_length", g.half_length)?;
        if !g.beta.is_finite() {
            return Err(LabError::Config(format!("geometry.beta must be finite, got {}", g.beta)));
        }
        if matches!(g.shape, ShapeKind::Ellipse | ShapeKind::Rectangle | ShapeKind::Disc) {
            positive("geometry.a", g.a)?;
        }
        if matches!(g.shape, ShapeKind::Ellipse | ShapeKind::Rectangle) {
            positive("geometry.b", g.b)?;
        }
        let s = &self.solver;
        positive("solver.cg_tol", s.cg_tol)?;
        positive("solver.step_fraction", s.step_fraction)?;
        if let Some(c) = s.step_cap {
            positive("solver.step_cap", c)?;
        }
        if s.modes == 0 || s.cg_max_iter == 0 {
            return Err(LabError::Config("solver.modes and solver.cg_max_iter must be at least 1".into()));
        }
        if s.workers == Some(0) {
            return Err(LabError::Config("solver.workers must be at least 1".into()));
        }
        positive_list("kernel1d.times", &self.kernel1d.times)?;
        positive_list("kernel3d.times", &self.kernel3d.times)?;
        positive_list("refkernel.times", &self.refkernel.times)?;
        positive_list("decay.times", &self.decay.times)?;
        positive_list("perturb.times", &self.perturb.times)?;
        positive_list("mc.exponent_times", &self.mc.exponent_times)?;
        positive_list("mc.half_space_deltas", &self.mc.half_space_deltas)?;
        positive_list("spectral.small_alphas", &self.spectral.small_alphas)?;
        positive_list("spectral.large_alphas", &self.spectral.large_alphas)?;
        positive_list("spectral.lieb_alphas", &self.spectral.lieb_alphas)?;
        positive("mc.delta", self.mc.delta)?;
        positive("mc.exponent_delta", self.mc.exponent_delta)?;
        if self.mc.particles == 0 || self.mc.paths < self.mc.particles {
            return Err(LabError::Config("mc.paths must be a positive multiple of mc.particles".into()));
        }
        if self.sobolev.exponents.iter().any(|&p| !(2.0..=6.0).contains(&p)) {
            return Err(LabError::Config("sobolev.exponents must lie in [2, 6]".into()));
        }
        if self.eigen.count == 0 {
            return Err(LabError::Config("eigen.count must be at least 1".into()));
        }
        Ok(())
    }
}

/// t₀, t₀·ratio, … ≤ t_max.
pub fn geometric(t0: f64, t_max: f64, ratio: f64) -> Vec<f64> {
    crate::experiments::geometric_times(t0, t_max, ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.solver.workers = Some(3);
        c.geometry.beta = 0.0;
        let s = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn empty_document_is_default_and_unknown_keys_fail() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"geometry": {"bogus": 1}}"#).is_err());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut c = RunConfig::default();
        c.geometry.h = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.sobolev.exponents = vec![7.0];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.geometry.shape = ShapeKind::Square;
        assert!(c.validate().is_ok());
        assert!(c.geometry.cross_section().is_err(), "square sections cannot be twisted");
        c.geometry.beta = 0.0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn shapes() {
        let mut g = GeometryConfig { shape: ShapeKind::Rectangle, a: 2.0, b: 1.0, ..Default::default() };
        assert_eq!(g.shape(), Shape::Rectangle { x0: -1.0, x1: 1.0, y0: -0.5, y1: 0.5 });
        g.shape = ShapeKind::Square;
        assert_eq!(g.shape(), Shape::unit_square());
    }
}
