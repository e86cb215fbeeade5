//! Optimal adversarial perturbations against the subspace recovered by PCA.
//!
//! The damage of a perturbation `ΔX` to a `d × n` data matrix `X` is the
//! Asimov distance (largest principal angle) between the top-`k` left singular
//! subspaces of `X` and `X + ΔX`. This crate computes the maximizing
//! perturbation in closed form for two budgets:
//!
//! * [`rank_one`]: `ΔX = a bᵀ` with `‖a‖‖b‖ ≤ η`,
//! * [`unconstrained`]: any `ΔX` with `‖ΔX‖_F ≤ η`,
//!
//! and ships brute-force [`oracle`]s to check those closed forms, synthetic
//! sweeps in [`experiments`], and a principal component regression harness in
//! [`pcr`].
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*F64` aliases
//! below cover the common case.

pub mod attack;
pub mod error;
pub mod experiments;
pub mod io;
pub mod oracle;
pub mod pcr;
pub mod rank_one;
pub mod rng;
pub mod scalar;
pub mod subspace;
pub mod unconstrained;

pub use attack::{AttackBudget, AttackReport, Regime, Solution, Strategy};
pub use error::{Error, Result};
pub use rank_one::attack_rank_one;
pub use scalar::Real;
pub use subspace::{
    asimov_distance, compress_rank_one_problem, full_svd, leading_subspace, principal_angles,
    subspace_distance, unitary_conjugate, DataMatrix, OrthonormalBasis, PrincipalAngles, SvdTriple,
};
pub use unconstrained::attack_unconstrained;

pub type DataMatrixF64 = DataMatrix<f64>;
pub type DataMatrixF32 = DataMatrix<f32>;
pub type SvdTripleF64 = SvdTriple<f64>;
pub type OrthonormalBasisF64 = OrthonormalBasis<f64>;
pub type AttackReportF64 = AttackReport<f64>;
pub type AttackReportF32 = AttackReport<f32>;
