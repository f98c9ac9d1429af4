//! Scalar abstraction for behavior tensors and expression values.
//!
//! Bound certification runs on `i64` behaviors (deterministic vertices are
//! 0/1 tensors, so every evaluation is exact integer arithmetic), while
//! quantum and noisy behaviors use `f64` (or `f32`). The expression weights
//! themselves are always small integers; `from_weight` embeds them exactly.

use num_traits::{FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    NumAssign + FromPrimitive + ToPrimitive + Copy + PartialOrd + std::fmt::Debug + Send + Sync + 'static
{
    /// Exact embedding of an expression weight.
    fn from_weight(w: i64) -> Self;

    /// Lossy view used only for invariant checks and reporting.
    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_weight(w: i64) -> Self {
        w as f64
    }
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_weight(w: i64) -> Self {
        w as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for i64 {
    fn from_weight(w: i64) -> Self {
        w
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for i128 {
    fn from_weight(w: i64) -> Self {
        i128::from(w)
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_embedding_is_exact() {
        assert_eq!(f64::from_weight(-3), -3.0);
        assert_eq!(i64::from_weight(7), 7);
        assert_eq!(i128::from_weight(-1), -1);
    }
}
