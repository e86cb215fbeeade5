//! Types shared by the rank-one and unconstrained attacks.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rank_one::RankOneAttack;
use crate::scalar::Real;
use crate::subspace::{asimov_distance, leading_subspace, DataMatrix, OrthonormalBasis};
use crate::unconstrained::PerturbationMatrix;

/// Energy limit `η` on the perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackBudget<T: Real> {
    eta: T,
}

impl<T: Real> AttackBudget<T> {
    pub fn new(eta: T) -> Result<Self> {
        if !eta.is_finite() || eta < T::zero() {
            return Err(Error::Config(format!("budget must be finite and nonnegative, got {eta}")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> T {
        self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    RankOne,
    Unconstrained,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::RankOne, Strategy::Unconstrained];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::RankOne => "rank-one",
            Strategy::Unconstrained => "unconstrained",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank-one" | "rank1" | "rank_one" => Ok(Strategy::RankOne),
            "unconstrained" => Ok(Strategy::Unconstrained),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Which closed form produced an attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `k = rank = n < d`, `η > σ_n`.
    FullRankCase1,
    /// `k = rank = n < d`, `η ≤ σ_n`.
    FullRankCase2,
    /// `k = rank < min(d, n)`, `η > σ_k`.
    LowRankCase1,
    /// `k = rank < min(d, n)`, `η ≤ σ_k`.
    LowRankCase2,
    /// `k < rank`, `η ≥ σ_k − σ_{k+1}`.
    KLtRankCase1,
    /// `k < rank`, `η < σ_k − σ_{k+1}`.
    KLtRankCase2,
    /// `η ≥ (σ_k − σ_{k+1})/√2`.
    UnconstrainedCase1,
    /// `η < (σ_k − σ_{k+1})/√2`.
    UnconstrainedCase2,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::FullRankCase1 => "full-rank-case1",
            Regime::FullRankCase2 => "full-rank-case2",
            Regime::LowRankCase1 => "low-rank-case1",
            Regime::LowRankCase2 => "low-rank-case2",
            Regime::KLtRankCase1 => "k-lt-rank-case1",
            Regime::KLtRankCase2 => "k-lt-rank-case2",
            Regime::UnconstrainedCase1 => "unconstrained-case1",
            Regime::UnconstrainedCase2 => "unconstrained-case2",
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Regime::UnconstrainedCase1 | Regime::UnconstrainedCase2 => Strategy::Unconstrained,
            _ => Strategy::RankOne,
        }
    }

    /// Case 1 regimes rotate the subspace all the way to `π/2`.
    pub fn is_saturated(self) -> bool {
        matches!(
            self,
            Regime::FullRankCase1
                | Regime::LowRankCase1
                | Regime::KLtRankCase1
                | Regime::UnconstrainedCase1
        )
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum Solution<T: Real> {
    RankOne(RankOneAttack<T>),
    Unconstrained(PerturbationMatrix<T>),
}

impl<T: Real> Solution<T> {
    pub fn delta(&self) -> DMatrix<T> {
        match self {
            Solution::RankOne(r) => r.delta(),
            Solution::Unconstrained(p) => p.delta.clone(),
        }
    }

    pub fn budget_used(&self) -> T {
        match self {
            Solution::RankOne(r) => r.budget_used(),
            Solution::Unconstrained(p) => p.fro_norm,
        }
    }
}

/// Outcome of an attack, with the predicted angle checked against PCA rerun on `X + ΔX`.
#[derive(Debug, Clone)]
pub struct AttackReport<T: Real> {
    pub strategy: Strategy,
    pub regime: Regime,
    pub k: usize,
    pub eta: T,
    pub sigma_k: T,
    pub sigma_k1: T,
    pub theta_predicted: T,
    pub theta_achieved: T,
    pub budget_used: T,
    /// Set when either the clean or the attacked top-`k` subspace is not
    /// uniquely defined, or `η` sits on a regime boundary.
    pub ambiguous_subspace: bool,
    pub solution: Solution<T>,
}

impl<T: Real> AttackReport<T> {
    pub fn delta(&self) -> DMatrix<T> {
        self.solution.delta()
    }
}

pub(crate) struct ReportInputs<T: Real> {
    pub k: usize,
    pub eta: T,
    pub sigma_k: T,
    pub sigma_k1: T,
    pub regime: Regime,
    pub theta_predicted: T,
    pub on_boundary: bool,
    pub solution: Solution<T>,
}

pub(crate) fn finish_report<T: Real>(
    x: &DataMatrix<T>,
    clean: &OrthonormalBasis<T>,
    inputs: ReportInputs<T>,
) -> Result<AttackReport<T>> {
    let perturbed = x.perturbed(&inputs.solution.delta())?;
    let attacked = leading_subspace(&perturbed, inputs.k)?;
    let theta_achieved = asimov_distance(clean, &attacked)?;
    Ok(AttackReport {
        strategy: inputs.regime.strategy(),
        regime: inputs.regime,
        k: inputs.k,
        eta: inputs.eta,
        sigma_k: inputs.sigma_k,
        sigma_k1: inputs.sigma_k1,
        theta_predicted: inputs.theta_predicted,
        theta_achieved,
        budget_used: inputs.solution.budget_used(),
        ambiguous_subspace: inputs.on_boundary || clean.is_ambiguous() || attacked.is_ambiguous(),
        solution: inputs.solution,
    })
}

/// Whether `a` and `b` agree within the tie tolerance relative to `scale`.
pub(crate) fn near<T: Real>(a: T, b: T, scale: T) -> bool {
    (a - b).abs() <= T::lit(T::TIE_TOL) * scale
}
