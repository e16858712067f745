//! Exact local computations over a non-archimedean field F = Q_p (p odd):
//! residue-ring arithmetic, multiplicative/additive characters, finite-level
//! Haar integration, local L/epsilon/gamma factors, the kernel-to-dual-weight
//! transform chain, dyadic oscillatory integrals with their closed forms, and
//! the degenerate-term local factors.

pub mod characters;
pub mod constants;
pub mod degenerate;
pub mod dualweight;
pub mod error;
pub mod families;
pub mod integrate;
pub mod lfactors;
pub mod padic;
pub mod scalar;
pub mod transforms;

pub use error::Error;
pub use scalar::{Cx, Real, R};
