//! Optimal rank-one attacks `ΔX = a bᵀ` with `‖a‖‖b‖ ≤ η` and `‖b‖ = 1`.
//!
//! Three regimes, chosen from the numerical rank `r` of `X`:
//!
//! * full column rank, `k = r = n < d`,
//! * low rank, `k = r < min(d, n)`,
//! * `k < r`, where the attack lives in the plane of the `k`-th and
//!   `(k+1)`-th singular directions.
//!
//! In each regime a large enough budget swaps a direction outside the
//! subspace into it and reaches `π/2`. Below that threshold the optimum has a
//! closed form.

use nalgebra::{DMatrix, DVector};

use crate::attack::{finish_report, near, AttackBudget, AttackReport, Regime, ReportInputs, Solution};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::subspace::{full_svd, leading_subspace, DataMatrix, SvdTriple};

#[derive(Debug, Clone)]
pub struct RankOneAttack<T: Real> {
    pub a: DVector<T>,
    /// Unit vector.
    pub b: DVector<T>,
    pub regime: Regime,
    pub theta_predicted: T,
    /// `η` sits on a regime boundary, where the attacked spectrum is tied.
    pub on_boundary: bool,
}

impl<T: Real> RankOneAttack<T> {
    pub fn delta(&self) -> DMatrix<T> {
        &self.a * self.b.transpose()
    }

    pub fn budget_used(&self) -> T {
        self.a.norm() * self.b.norm()
    }
}

/// Closed-form optimum in the `k < rank` regime below the `π/2` threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankOneClosedForm<T: Real> {
    pub alpha_star: T,
    pub beta_star: T,
    pub h: T,
    pub theta_star: T,
    pub sigma_k: T,
    pub sigma_k1: T,
}

/// Runs the rank-one attack matching the rank of `x` and verifies it by rerunning PCA.
pub fn attack_rank_one<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<AttackReport<T>> {
    let svd = full_svd(x)?;
    attack_rank_one_with_svd(x, &svd, k, budget)
}

pub fn attack_rank_one_with_svd<T: Real>(
    x: &DataMatrix<T>,
    svd: &SvdTriple<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<AttackReport<T>> {
    let (d, n) = x.shape();
    let clean = leading_subspace(x, k)?;
    let rank = svd.rank();
    let attack = if k < rank {
        k_lt_rank_from_svd(svd, k, budget)?.0
    } else if k == rank {
        if k < d.min(n) {
            low_rank_from_svd(svd, k, budget)?
        } else if k == n {
            full_rank_from_svd(svd, budget)?
        } else {
            return Err(Error::Regime(format!(
                "k = rank = d = {d}: the leading subspace is the whole space"
            )));
        }
    } else {
        return Err(Error::Regime(format!("k = {k} exceeds the numerical rank {rank}")));
    };
    finish_report(
        x,
        &clean,
        ReportInputs {
            k,
            eta: budget.eta(),
            sigma_k: svd.sigma[k - 1],
            sigma_k1: svd.sigma_at(k),
            regime: attack.regime,
            theta_predicted: attack.theta_predicted,
            on_boundary: attack.on_boundary,
            solution: Solution::RankOne(attack),
        },
    )
}

/// Attack on a matrix with full column rank `n < d`, targeting the top-`n` subspace.
pub fn attack_full_rank<T: Real>(x: &DataMatrix<T>, budget: AttackBudget<T>) -> Result<RankOneAttack<T>> {
    let svd = full_svd(x)?;
    let (_, n) = x.shape();
    let rank = svd.rank();
    if rank != n {
        return Err(Error::RankMismatch { expected: n, found: rank });
    }
    full_rank_from_svd(&svd, budget)
}

fn full_rank_from_svd<T: Real>(svd: &SvdTriple<T>, budget: AttackBudget<T>) -> Result<RankOneAttack<T>> {
    let (d, n) = svd.dims();
    if d <= n {
        return Err(Error::NoOrthogonalComplement(n));
    }
    let eta = budget.eta();
    let s = svd.sigma[n - 1];
    let un = svd.u_col(n - 1);
    let uq = svd.u_col(n);
    let b = svd.v_col(n - 1);
    let on_boundary = near(eta, s, svd.sigma[0]);
    if eta > s {
        let a_hat = (eta * eta - s * s).sqrt();
        Ok(RankOneAttack {
            a: un * (-s) + uq * a_hat,
            b,
            regime: Regime::FullRankCase1,
            theta_predicted: T::frac_pi_2(),
            on_boundary,
        })
    } else {
        Ok(RankOneAttack {
            a: below_threshold_direction(s, eta, un, uq),
            b,
            regime: Regime::FullRankCase2,
            theta_predicted: (eta / s).asin(),
            on_boundary,
        })
    }
}

/// `−(η²/σ) u + η√(1 − η²/σ²) u_q`: tilts the `σ` direction towards `u_q` by `arcsin(η/σ)`.
fn below_threshold_direction<T: Real>(s: T, eta: T, u: DVector<T>, uq: DVector<T>) -> DVector<T> {
    let ratio = eta / s;
    let along = -(eta * ratio);
    let across = eta * ((T::one() - ratio) * (T::one() + ratio)).max(T::zero()).sqrt();
    u * along + uq * across
}

/// Attack on a matrix of rank `k < min(d, n)`, targeting its top-`k` subspace.
pub fn attack_low_rank<T: Real>(x: &DataMatrix<T>, budget: AttackBudget<T>) -> Result<RankOneAttack<T>> {
    let svd = full_svd(x)?;
    let (d, n) = x.shape();
    let rank = svd.rank();
    if rank == 0 || rank >= d.min(n) {
        return Err(Error::Regime(format!(
            "low-rank attack needs 0 < rank < min(d, n), got rank {rank} for {d}x{n}"
        )));
    }
    low_rank_from_svd(&svd, rank, budget)
}

fn low_rank_from_svd<T: Real>(svd: &SvdTriple<T>, k: usize, budget: AttackBudget<T>) -> Result<RankOneAttack<T>> {
    let eta = budget.eta();
    let s = svd.sigma[k - 1];
    let on_boundary = near(eta, s, svd.sigma[0]);
    if eta > s {
        Ok(RankOneAttack {
            a: svd.u_col(k) * eta,
            b: svd.v_col(k),
            regime: Regime::LowRankCase1,
            theta_predicted: T::frac_pi_2(),
            on_boundary,
        })
    } else {
        Ok(RankOneAttack {
            a: below_threshold_direction(s, eta, svd.u_col(k - 1), svd.u_col(k)),
            b: svd.v_col(k - 1),
            regime: Regime::LowRankCase2,
            theta_predicted: (eta / s).asin(),
            on_boundary,
        })
    }
}

/// Attack on the top-`k` subspace of a matrix whose rank exceeds `k`.
pub fn attack_k_lt_rank<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<(RankOneAttack<T>, Option<RankOneClosedForm<T>>)> {
    let svd = full_svd(x)?;
    let rank = svd.rank();
    if k == 0 || k >= rank {
        return Err(Error::Regime(format!("needs 1 <= k < rank = {rank}, got k = {k}")));
    }
    k_lt_rank_from_svd(&svd, k, budget)
}

fn k_lt_rank_from_svd<T: Real>(
    svd: &SvdTriple<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<(RankOneAttack<T>, Option<RankOneClosedForm<T>>)> {
    let eta = budget.eta();
    let sk = svd.sigma[k - 1];
    let sk1 = svd.sigma[k];
    let top = svd.sigma[0];
    let gap = sk - sk1;
    let tied = svd.is_tied(k);
    if tied || eta >= gap {
        let attack = RankOneAttack {
            a: svd.u_col(k) * eta,
            b: svd.v_col(k),
            regime: Regime::KLtRankCase1,
            theta_predicted: T::frac_pi_2(),
            on_boundary: tied || near(eta, gap, top),
        };
        return Ok((attack, None));
    }
    let cf = k_lt_rank_closed_form(sk, sk1, eta)?;
    let (ca, sa) = (cf.alpha_star.cos(), cf.alpha_star.sin());
    let (cb, sb) = (cf.beta_star.cos(), cf.beta_star.sin());
    let attack = RankOneAttack {
        a: svd.u_col(k - 1) * (eta * ca) + svd.u_col(k) * (eta * sa),
        b: svd.v_col(k - 1) * cb + svd.v_col(k) * sb,
        regime: Regime::KLtRankCase2,
        theta_predicted: cf.theta_star,
        on_boundary: near(eta, gap, top),
    };
    Ok((attack, Some(cf)))
}

/// Optimal `(α*, β*)` for `σ_k > σ_{k+1} ≥ 0` and `0 ≤ η < σ_k − σ_{k+1}`.
///
/// `α* ∈ [0, π/2]` and `β* ∈ [π/2, π]`. `H` is evaluated as the factored
/// product `((σ_k−σ_{k+1})² − η²)((σ_k+σ_{k+1})² − η²)`.
pub fn k_lt_rank_closed_form<T: Real>(sigma_k: T, sigma_k1: T, eta: T) -> Result<RankOneClosedForm<T>> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    if !(sigma_k > sigma_k1 && sigma_k1 >= zero && eta >= zero && eta < sigma_k - sigma_k1) {
        return Err(Error::Regime(format!(
            "closed form needs σ_k > σ_k+1 >= 0 and 0 <= η < σ_k − σ_k+1, got σ_k = {sigma_k}, σ_k+1 = {sigma_k1}, η = {eta}"
        )));
    }
    let e2 = eta * eta;
    let diff = sigma_k - sigma_k1;
    let sum = sigma_k + sigma_k1;
    let big_delta = diff * sum;
    let h = ((diff * diff - e2) * (sum * sum - e2)).max(zero);
    let inner = big_delta + e2 + h.sqrt();
    let cos2_alpha = (two * e2 * sigma_k * sigma_k / (big_delta * inner)).clamp(zero, one);
    let cos2_beta = (inner / (two * big_delta)).clamp(zero, one);
    let alpha_star = cos2_alpha.sqrt().acos();
    let beta_star = (-cos2_beta.sqrt()).acos();
    let theta_star = theta_from_angles(sigma_k, sigma_k1, eta, alpha_star, beta_star);
    Ok(RankOneClosedForm { alpha_star, beta_star, h, theta_star, sigma_k, sigma_k1 })
}

/// The four `(α, β)` pairs that give the same attacked subspace.
pub fn equivalent_solutions<T: Real>(alpha: T, beta: T) -> [(T, T); 4] {
    let pi = T::pi();
    [(alpha, beta), (-alpha, -beta), (pi - alpha, pi - beta), (alpha - pi, beta - pi)]
}

/// Signed rotation `φ = atan2(a_y, a_x)/2` of the top singular direction of
/// the `2 × 2` core `diag(σ_k, σ_{k+1}) + η [cos α, sin α]ᵀ [cos β, sin β]`.
pub fn phi_from_angles<T: Real>(sigma_k: T, sigma_k1: T, eta: T, alpha: T, beta: T) -> T {
    let two = T::lit(2.0);
    let (ca, sa) = (alpha.cos(), alpha.sin());
    let (cb, sb) = (beta.cos(), beta.sin());
    let ax = sigma_k * sigma_k - sigma_k1 * sigma_k1 + two * sigma_k * eta * ca * cb
        - two * sigma_k1 * eta * sa * sb
        + eta * eta * (two * alpha).cos();
    let ay = two * eta * (sigma_k * sa * cb + sigma_k1 * ca * sb + eta * ca * sa);
    ay.atan2(ax) / two
}

/// Subspace distance `|φ|` reached by the angle pair `(α, β)`.
pub fn theta_from_angles<T: Real>(sigma_k: T, sigma_k1: T, eta: T, alpha: T, beta: T) -> T {
    phi_from_angles(sigma_k, sigma_k1, eta, alpha, beta).abs()
}
