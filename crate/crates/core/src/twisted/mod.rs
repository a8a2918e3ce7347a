//! Twisted-tube heat kernel: operator, preconditioner, time stepping and envelope checks.

pub mod checks;
pub mod elliptic;
pub mod evolve;
pub mod modal;
pub mod operator;
pub mod precond;
pub use evolve::{diag_via_l2, evolve, Evolver, KernelField, Propagator, StepPolicy, StepStats};
pub use elliptic::{Elliptic, FullElliptic, ModalElliptic};
pub use modal::{ModalOperator, ModalPropagator};
pub use operator::TwistedOperator;
pub use precond::ModalPreconditioner;

