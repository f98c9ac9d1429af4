//! Generalized Svetlichny-CGLMP inequalities: symbolic construction of the
//! family, exact certification of local and bipartition (hybrid) bounds by
//! enumeration and best-response decomposition, facet verification on the
//! bipartition polytope with exact integer arithmetic, and quantum violations
//! and critical visibilities from Fourier-measurement scenarios.

pub mod behaviors;
pub mod bell_expr;
mod error;
pub mod polytope;
pub mod quantum;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Behavior with `f64` probabilities: quantum behaviors and noisy mixtures.
pub type RealBehavior = behaviors::Behavior<f64>;

/// Behavior with exact integer probabilities: deterministic vertices, where
/// every expression evaluation is exact integer arithmetic.
pub type ExactBehavior = behaviors::Behavior<i64>;
