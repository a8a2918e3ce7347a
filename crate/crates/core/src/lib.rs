//! Numerical laboratory for Dirichlet heat kernels of twisted tubes.
//!
//! The crate discretises the straightened operator
//! `H = −Δ' − (∂₃ + θ̇ ∂τ)² − E₁` on a tube grid, evolves heat-kernel
//! columns, and runs the envelope, exponent, Green-function, Nash,
//! Hardy, spectral and Monte Carlo experiments on top of it.
//!
//! Numerical kernels are generic over [`Real`] (`f32`/`f64`); the
//! aliases at the crate root fix `f64`, which is what every experiment uses.

pub mod config;
pub mod eigen2d;
pub mod experiments;
pub mod geometry;
pub mod greens;
pub mod linalg;
pub mod longitudinal;
pub mod mathieu;
pub mod montecarlo;
pub mod nash;
pub mod reference_kernel;
pub mod report;
pub mod scalar;
pub mod suite;
pub mod twisted;
pub mod variational;

pub use scalar::Real;

pub use geometry::{map_to_straight, map_to_twisted, Shape, Usage};

pub type CrossSection = geometry::CrossSection<f64>;
pub type TwistProfile = geometry::TwistProfile<f64>;
pub type TubeGrid = geometry::TubeGrid<f64>;
pub type Basis2d = eigen2d::Basis2d<f64>;






#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("eigensolver error: {0}")]
    Eigen(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("operator is critical: {0}")]
    Critical(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Cg(#[from] linalg::CgError),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
