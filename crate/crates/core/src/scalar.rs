//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// A real floating-point scalar usable by the decompositions and attacks.
///
/// Tolerances are carried per type so that `f32` runs use thresholds that
/// make sense for single precision.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Relative threshold `σ_i > RANK_TOL·σ_1` for a singular value to count toward rank.
    const RANK_TOL: f64;
    /// Relative gap `σ_k − σ_{k+1} ≤ TIE_TOL·σ_1` under which the leading subspace is ambiguous.
    const TIE_TOL: f64;
    /// Absolute tolerance on `QᵀQ − I` when accepting an orthogonal factor.
    const ORTHO_TOL: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f64 {
    const RANK_TOL: f64 = 1e-10;
    const TIE_TOL: f64 = 1e-9;
    const ORTHO_TOL: f64 = 1e-10;
}

impl Real for f32 {
    const RANK_TOL: f64 = 1e-5;
    const TIE_TOL: f64 = 1e-4;
    const ORTHO_TOL: f64 = 1e-4;
}
