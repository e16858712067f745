//! Calibrated bound constants, v1.
//!
//! The asymptotic bounds come without explicit constants; the thresholds here
//! were measured by `examples/calibrate.rs` over p in {3, 5, 7, 13} with
//! conductors up to p^4 (p^3 at 7, p^2 at 13), then given x1.5 headroom and
//! frozen.  Measured maxima: unramified 0.4, generic * Q = 2.0 exactly,
//! atypical normalized ratio 1.0 exactly, zero class 0.  Rerun the example
//! before bumping.

use crate::scalar::R;

/// Cap on |h~(omega)| for unramified omega.
pub const HTILDE_UNRAMIFIED_MAX: R = 0.6;

/// Cap on |h~(omega)| * Q in the generic ramified regime.
pub const HTILDE_GENERIC_RATIO_MAX: R = 3.0;

/// Cap on |h~(omega)| * Q / (N_alpha(xi) * q^(1/2 or 0)) for atypical pairs.
pub const HTILDE_ATYPICAL_RATIO_MAX: R = 1.5;

/// An assembled value is "exactly zero" below this per-term tolerance.
pub const ZERO_TOL_PER_TERM: R = 1e-9;
