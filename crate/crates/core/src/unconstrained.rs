//! Optimal attack under a Frobenius budget `‖ΔX‖_F ≤ η` with no rank constraint.
//!
//! In singular coordinates `B = Uᵀ ΔX V` the optimum touches only the four
//! entries at rows and columns `k, k+1`. Entries are stored in the order
//! `(b_kk, b_{k+1,k}, b_{k,k+1}, b_{k+1,k+1})`.

use nalgebra::DMatrix;

use crate::attack::{finish_report, near, AttackBudget, AttackReport, Regime, ReportInputs, Solution};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::subspace::{full_svd, leading_subspace, DataMatrix, SvdTriple};

#[derive(Debug, Clone)]
pub struct PerturbationMatrix<T: Real> {
    pub delta: DMatrix<T>,
    pub canonical_b: [T; 4],
    pub fro_norm: T,
    pub regime: Regime,
    pub theta_predicted: T,
    pub on_boundary: bool,
}

/// Every quantity of the below-threshold closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormIntermediates<T: Real> {
    pub c: T,
    pub w: T,
    /// `√(1 − 4w)`.
    pub q: T,
    pub e: T,
    pub lambda_max: T,
    pub p11: T,
    pub p21: T,
    pub r: T,
    pub alpha: T,
    pub beta: T,
    pub theta_star: T,
}

/// Closed-form maximal tangent `λ_max` and the rotation it induces.
///
/// Requires `σ_k > σ_{k+1} ≥ 0` and `0 < η < (σ_k − σ_{k+1})/√2`.
/// With `Δ = σ_k² − σ_{k+1}²` and `S = σ_k² + σ_{k+1}²`:
/// `w = (c − σ_kσ_{k+1})(c + σ_kσ_{k+1})/Δ²`, `√(1 − 4w) = 2η√(S − η²)/Δ`,
/// `e = (1 + √(1−4w))/(2√w)` and `λ_max = (e − 1/e)/2 = √(1−4w)/(2√w)`.
pub fn closed_form_lambda<T: Real>(sigma_k: T, sigma_k1: T, eta: T) -> Result<ClosedFormIntermediates<T>> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    if !(sigma_k > sigma_k1
        && sigma_k1 >= zero
        && eta > zero
        && eta * T::lit(2.0).sqrt() < sigma_k - sigma_k1)
    {
        return Err(Error::Regime(format!(
            "closed form needs σ_k > σ_k+1 >= 0 and 0 < η < (σ_k − σ_k+1)/√2, got σ_k = {sigma_k}, σ_k+1 = {sigma_k1}, η = {eta}"
        )));
    }
    let e2 = eta * eta;
    let s = sigma_k * sigma_k + sigma_k1 * sigma_k1;
    let big_delta = (sigma_k - sigma_k1) * (sigma_k + sigma_k1);
    let prod = sigma_k * sigma_k1;
    let c = s * half - e2;
    let w = (c - prod) * (c + prod) / (big_delta * big_delta);
    let q = two * eta * (s - e2).sqrt() / big_delta;
    let root_w = w.sqrt();
    let e = (one + q) / (two * root_w);
    let lambda_max = q / (two * root_w);
    let theta_star = lambda_max.atan() * half;

    let mu = (lambda_max * lambda_max + one).sqrt() + lambda_max;
    let t = one / (mu * mu + one).sqrt();
    let p11 = t;
    let p21 = t * mu;
    let n1 = (p11 * p11 * sigma_k * sigma_k + p21 * p21 * sigma_k1 * sigma_k1).sqrt();
    let n2 = (p21 * p21 * sigma_k * sigma_k + p11 * p11 * sigma_k1 * sigma_k1).sqrt();
    let r = (n1 + n2) * half;
    let alpha = (p21 * sigma_k1 / n1).atan2(p11 * sigma_k / n1);
    let beta = (p11 * sigma_k1 / n2).atan2(-(p21 * sigma_k) / n2);
    Ok(ClosedFormIntermediates { c, w, q, e, lambda_max, p11, p21, r, alpha, beta, theta_star })
}

/// The optimal four entries for the intermediates of [`closed_form_lambda`].
pub fn recover_entries<T: Real>(ci: &ClosedFormIntermediates<T>, sigma_k: T, sigma_k1: T) -> [T; 4] {
    let v = [
        ci.r * ci.alpha.cos(),
        ci.r * ci.beta.cos(),
        ci.r * ci.alpha.sin(),
        ci.r * ci.beta.sin(),
    ];
    let (p11, p21) = (ci.p11, ci.p21);
    let u = [
        p11 * v[0] - p21 * v[1],
        p21 * v[0] + p11 * v[1],
        p11 * v[2] - p21 * v[3],
        p21 * v[2] + p11 * v[3],
    ];
    [u[0] - sigma_k, u[1], u[2], u[3] - sigma_k1]
}

/// The sign-paired optimum `(b_kk, −b_{k+1,k}, −b_{k,k+1}, b_{k+1,k+1})`.
pub fn paired_entries<T: Real>(entries: [T; 4]) -> [T; 4] {
    [entries[0], -entries[1], -entries[2], entries[3]]
}

/// `(b_x, b_y)` of the `2 × 2` core `diag(σ_k, σ_{k+1}) + B̄`; the top singular direction turns by `atan2(b_y, b_x)/2`.
pub fn entries_bx_by<T: Real>(entries: [T; 4], sigma_k: T, sigma_k1: T) -> (T, T) {
    let [b11, b21, b12, b22] = entries;
    let m11 = b11 + sigma_k;
    let m22 = b22 + sigma_k1;
    let bx = m11 * m11 + b12 * b12 - m22 * m22 - b21 * b21;
    let by = T::lit(2.0) * (m11 * b21 + m22 * b12);
    (bx, by)
}

/// Subspace distance produced by the four entries.
pub fn entries_theta<T: Real>(entries: [T; 4], sigma_k: T, sigma_k1: T) -> T {
    let (bx, by) = entries_bx_by(entries, sigma_k, sigma_k1);
    (by.atan2(bx) * T::lit(0.5)).abs()
}

pub fn entries_norm<T: Real>(entries: [T; 4]) -> T {
    entries.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// `ΔX = U B Vᵀ` with the four entries placed at rows and columns `k, k+1` of `B`.
pub fn lift_to_data_space<T: Real>(entries: [T; 4], svd: &SvdTriple<T>, k: usize) -> Result<DMatrix<T>> {
    let (d, n) = svd.dims();
    if k == 0 || k + 1 > d.min(n) {
        return Err(Error::InvalidDimension(format!(
            "entries at k = {k}, k+1 do not fit a {d}x{n} matrix"
        )));
    }
    let mut b = DMatrix::zeros(d, n);
    b[(k - 1, k - 1)] = entries[0];
    b[(k, k - 1)] = entries[1];
    b[(k - 1, k)] = entries[2];
    b[(k, k)] = entries[3];
    Ok(&svd.u * b * svd.v.transpose())
}

/// Optimal Frobenius-budget attack on the top-`k` subspace, verified by rerunning PCA.
pub fn attack_unconstrained<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<AttackReport<T>> {
    let svd = full_svd(x)?;
    attack_unconstrained_with_svd(x, &svd, k, budget)
}

pub fn attack_unconstrained_with_svd<T: Real>(
    x: &DataMatrix<T>,
    svd: &SvdTriple<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<AttackReport<T>> {
    let clean = leading_subspace(x, k)?;
    let p = perturbation_from_svd(svd, k, budget)?;
    finish_report(
        x,
        &clean,
        ReportInputs {
            k,
            eta: budget.eta(),
            sigma_k: svd.sigma[k - 1],
            sigma_k1: svd.sigma_at(k),
            regime: p.regime,
            theta_predicted: p.theta_predicted,
            on_boundary: p.on_boundary,
            solution: Solution::Unconstrained(p),
        },
    )
}

/// The optimal perturbation without the PCA verification pass.
pub fn perturbation_from_svd<T: Real>(
    svd: &SvdTriple<T>,
    k: usize,
    budget: AttackBudget<T>,
) -> Result<PerturbationMatrix<T>> {
    let (d, n) = svd.dims();
    if k == 0 || k >= d.min(n) {
        return Err(Error::InvalidDimension(format!(
            "unconstrained attack needs 1 <= k < min(d, n), got k = {k} for {d}x{n}"
        )));
    }
    let eta = budget.eta();
    let sk = svd.sigma[k - 1];
    let sk1 = svd.sigma[k];
    let threshold = (sk - sk1) / T::lit(2.0).sqrt();
    let tied = svd.is_tied(k);
    let on_boundary = tied || near(eta, threshold, svd.sigma[0]);
    let zero = T::zero();

    let (entries, regime, theta_predicted) = if eta == zero {
        let regime = if tied { Regime::UnconstrainedCase1 } else { Regime::UnconstrainedCase2 };
        ([zero; 4], regime, zero)
    } else if tied || eta >= threshold {
        let h = eta / T::lit(2.0).sqrt();
        ([-h, zero, zero, h], Regime::UnconstrainedCase1, T::frac_pi_2())
    } else {
        let ci = closed_form_lambda(sk, sk1, eta)?;
        (recover_entries(&ci, sk, sk1), Regime::UnconstrainedCase2, ci.theta_star)
    };
    let delta = lift_to_data_space(entries, svd, k)?;
    Ok(PerturbationMatrix {
        fro_norm: delta.norm(),
        delta,
        canonical_b: entries,
        regime,
        theta_predicted,
        on_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use std::f64::consts::FRAC_PI_2;

    const REF_ENTRIES: [f64; 4] = [-0.24074074074, 0.33281853, 0.16640927, 0.23148148148];

    #[test]
    fn reference_chain() {
        let ci = closed_form_lambda(2.0_f64, 1.0, 0.5).unwrap();
        assert!((ci.c - 2.25).abs() < 1e-15);
        assert!((ci.w - 0.118055555556).abs() < 1e-11);
        assert!((ci.e - 2.51240203).abs() < 1e-8);
        assert!((ci.lambda_max - 1.05718827974).abs() < 1e-10);
        assert!((ci.theta_star - 0.406595125019).abs() < 1e-11);
        assert!((ci.lambda_max - (ci.e - 1.0 / ci.e) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn reference_entries() {
        let ci = closed_form_lambda(2.0_f64, 1.0, 0.5).unwrap();
        let b = recover_entries(&ci, 2.0, 1.0);
        for (got, want) in b.iter().zip(REF_ENTRIES) {
            assert!((got - want).abs() < 1e-7, "{b:?}");
        }
        assert!((entries_norm(b) - 0.5).abs() < 1e-12);
        let (bx, by) = entries_bx_by(b, 2.0, 1.0);
        assert!(bx > 0.0);
        assert!((by / bx - ci.lambda_max).abs() < 1e-10);
        let pb = paired_entries(b);
        assert!((entries_theta(pb, 2.0, 1.0) - ci.theta_star).abs() < 1e-12);
    }

    #[test]
    fn chain_limits() {
        let ci = closed_form_lambda(2.0_f64, 1.0, 1e-9).unwrap();
        assert!(ci.theta_star < 1e-6);
        assert!((ci.w - 0.25).abs() < 1e-12);
        let edge = (1.0 / 2f64.sqrt()) * (1.0 - 1e-9);
        let ci = closed_form_lambda(2.0_f64, 1.0, edge).unwrap();
        assert!(ci.theta_star < std::f64::consts::FRAC_PI_4);
        assert!(std::f64::consts::FRAC_PI_4 - ci.theta_star < 1e-3);
        assert!(closed_form_lambda(2.0_f64, 1.0, 0.75).is_err());
        assert!(closed_form_lambda(2.0_f64, 1.0, 0.0).is_err());
    }

    #[test]
    fn large_budget_saturates() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let r = attack_unconstrained(&x, 2, AttackBudget::new(0.8).unwrap()).unwrap();
        assert_eq!(r.regime, Regime::UnconstrainedCase1);
        assert!((r.theta_achieved - FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn small_budget_matches_prediction() {
        let x = DataMatrix::from_diagonal(&[3.0_f64, 2.0, 1.0]).unwrap();
        let r = attack_unconstrained(&x, 2, AttackBudget::new(0.5).unwrap()).unwrap();
        assert_eq!(r.regime, Regime::UnconstrainedCase2);
        assert!((r.theta_predicted - 0.406595125019).abs() < 1e-11);
        assert!((r.theta_achieved - r.theta_predicted).abs() < 1e-10);
        assert!((r.budget_used - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_budget() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let r = attack_unconstrained(&x, 1, AttackBudget::new(0.0).unwrap()).unwrap();
        assert_eq!(r.delta().amax(), 0.0);
        assert_eq!(r.theta_achieved, 0.0);
    }

    #[test]
    fn tie_goes_to_case_one_flagged() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 2.0]).unwrap();
        let r = attack_unconstrained(&x, 2, AttackBudget::new(0.1).unwrap()).unwrap();
        assert_eq!(r.regime, Regime::UnconstrainedCase1);
        assert!(r.ambiguous_subspace);
    }

    #[test]
    fn lift_shapes_and_norms() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let svd = full_svd(&x).unwrap();
        assert_eq!(lift_to_data_space([0.0; 4], &svd, 1).unwrap().amax(), 0.0);
        let d = lift_to_data_space([1.0, 2.0, 3.0, 4.0], &svd, 1).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((d - want).amax() < 1e-15);
        assert!(lift_to_data_space([0.0; 4], &svd, 3).is_err());

        let mut rng = StreamRng::new(17, 0);
        let y = DataMatrix::new(rng.gaussian_matrix::<f64>(5, 4)).unwrap();
        let svd = full_svd(&y).unwrap();
        let d = lift_to_data_space(REF_ENTRIES, &svd, 2).unwrap();
        assert!((d.norm() - entries_norm(REF_ENTRIES)).abs() < 1e-12);
    }

    #[test]
    fn low_rank_matches_arcsin() {
        let x = DataMatrix::from_diagonal(&[3.0, 2.0, 0.0, 0.0]).unwrap();
        for &eta in &[0.1_f64, 0.5, 1.0, 1.4] {
            let r = attack_unconstrained(&x, 2, AttackBudget::new(eta).unwrap()).unwrap();
            assert!((r.theta_predicted - (eta / 2.0f64).asin()).abs() < 1e-12, "eta {eta}");
        }
    }
}
