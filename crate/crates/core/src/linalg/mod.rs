//! Linear-algebra building blocks used by the solvers.

pub mod band;
pub mod blocktri;
pub mod cg;
pub mod dense;
pub mod lanczos;
pub mod sparse;
pub mod tridiag;

pub use band::BandCholesky;
pub use blocktri::{BlockThomas, BlockTridiag};
pub use cg::{pcg, CgError, CgStats};
pub use dense::{cholesky, cholesky_solve, sym_eigen, Mat, SymEigen};
pub use lanczos::{block_lanczos, LanczosResult};
pub use sparse::{axpy, dot, norm2, scale, Csr};
pub use tridiag::{SymTridiag, Thomas};
