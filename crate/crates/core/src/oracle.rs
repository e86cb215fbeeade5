//! Independent checks for the closed forms: random attacks, a lattice search
//! over the rank-one angle pair, finite-difference stationarity and a
//! principal-angle solver that never calls an SVD.
//!
//! Random trial `i` draws from stream `i` of the configured seed (see
//! [`crate::rng`]), and the parallel reduction keeps the largest angle with
//! the lowest trial index on ties. Results do not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::attack::AttackBudget;
use crate::error::{Error, Result};
use crate::rank_one::{phi_from_angles, theta_from_angles};
use crate::rng::{streams, StreamRng};
use crate::scalar::Real;
use crate::subspace::{asimov_distance, leading_subspace, DataMatrix, OrthonormalBasis, PrincipalAngles};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    pub trials: usize,
    pub seed: u64,
    /// Lattice points per axis.
    pub grid_resolution: usize,
    /// Alternating golden-section sweeps (one over `α`, one over `β`) after the lattice pass.
    pub refine_steps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { trials: 10_000, seed: 0, grid_resolution: 400, refine_steps: 40 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.grid_resolution < 2 {
            return Err(Error::Config("grid_resolution must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RankOneCandidate<T: Real> {
    pub a: DVector<T>,
    /// Unit vector.
    pub b: DVector<T>,
    pub theta: T,
    pub trial: usize,
}

#[derive(Debug, Clone)]
pub struct MatrixCandidate<T: Real> {
    pub delta: DMatrix<T>,
    pub theta: T,
    pub trial: usize,
}

fn draw_rank_one<T: Real>(seed: u64, trial: usize, d: usize, n: usize, eta: T) -> (DVector<T>, DVector<T>) {
    let mut rng = StreamRng::new(seed, trial as u64);
    let a = rng.gaussian_vector::<T>(d);
    let b = rng.gaussian_vector::<T>(n);
    let b = &b / b.norm();
    let a = &a * (eta / a.norm());
    (a, b)
}

fn draw_matrix<T: Real>(seed: u64, trial: usize, d: usize, n: usize, eta: T) -> DMatrix<T> {
    let mut rng = StreamRng::new(seed, trial as u64);
    let m = rng.gaussian_matrix::<T>(d, n);
    &m * (eta / m.norm())
}

/// Best of `trials` Gaussian `(a, b)` pairs rescaled to `‖a bᵀ‖_F = η`.
pub fn random_rank_one<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    budget: AttackBudget<T>,
    cfg: &SearchConfig,
) -> Result<RankOneCandidate<T>> {
    cfg.validate()?;
    let (d, n) = x.shape();
    let eta = budget.eta();
    let clean = leading_subspace(x, k)?;
    let (theta, trial) = best_trial(cfg.trials, |i| {
        let (a, b) = draw_rank_one(cfg.seed, i, d, n, eta);
        score(x, &clean, k, &(&a * b.transpose()))
    })?;
    let (a, b) = draw_rank_one(cfg.seed, trial, d, n, eta);
    Ok(RankOneCandidate { a, b, theta, trial })
}

/// Best of `trials` Gaussian matrices rescaled to `‖ΔX‖_F = η`.
pub fn random_unconstrained<T: Real>(
    x: &DataMatrix<T>,
    k: usize,
    budget: AttackBudget<T>,
    cfg: &SearchConfig,
) -> Result<MatrixCandidate<T>> {
    cfg.validate()?;
    let (d, n) = x.shape();
    let eta = budget.eta();
    let clean = leading_subspace(x, k)?;
    let (theta, trial) = best_trial(cfg.trials, |i| {
        score(x, &clean, k, &draw_matrix(cfg.seed, i, d, n, eta))
    })?;
    Ok(MatrixCandidate { delta: draw_matrix(cfg.seed, trial, d, n, eta), theta, trial })
}

fn score<T: Real>(x: &DataMatrix<T>, clean: &OrthonormalBasis<T>, k: usize, delta: &DMatrix<T>) -> Result<T> {
    let attacked = leading_subspace(&x.perturbed(delta)?, k)?;
    asimov_distance(clean, &attacked)
}

fn best_trial<T, F>(trials: usize, eval: F) -> Result<(T, usize)>
where
    T: Real,
    F: Fn(usize) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| eval(i).map(|t| (t, i)))
        .try_reduce(
            || (T::min_value().unwrap_or_else(|| -T::one()), usize::MAX),
            |p, q| Ok(if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p }),
        )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSearch<T: Real> {
    pub alpha: T,
    pub beta: T,
    pub theta: T,
}

/// Lattice search of `θ(α, β)` over `[0, π/2] × [π/2, π]`, then golden-section
/// refinement within one cell of the best lattice point.
pub fn grid_search_angles<T: Real>(sigma_k: T, sigma_k1: T, eta: T, cfg: &SearchConfig) -> Result<AngleSearch<T>> {
    cfg.validate()?;
    let res = cfg.grid_resolution;
    let half_pi = T::frac_pi_2();
    let cell = half_pi / T::from_usize(res - 1).unwrap_or_else(T::one);
    let f = |a: T, b: T| theta_from_angles(sigma_k, sigma_k1, eta, a, b);

    let row_best: Vec<AngleSearch<T>> = (0..res)
        .into_par_iter()
        .map(|i| {
            let alpha = cell * T::from_usize(i).unwrap_or_else(T::zero);
            let mut best = AngleSearch { alpha, beta: half_pi, theta: f(alpha, half_pi) };
            for j in 1..res {
                let beta = half_pi + cell * T::from_usize(j).unwrap_or_else(T::zero);
                let theta = f(alpha, beta);
                if theta > best.theta {
                    best = AngleSearch { alpha, beta, theta };
                }
            }
            best
        })
        .collect();
    let mut best = row_best[0];
    for cand in &row_best[1..] {
        if cand.theta > best.theta {
            best = *cand;
        }
    }

    let (a_lo, a_hi) = ((best.alpha - cell).max(T::zero()), (best.alpha + cell).min(half_pi));
    let (b_lo, b_hi) = ((best.beta - cell).max(half_pi), (best.beta + cell).min(T::pi()));
    for _ in 0..cfg.refine_steps {
        let beta = best.beta;
        let (alpha, theta) = golden_max(|a| f(a, beta), a_lo, a_hi);
        if theta > best.theta {
            best = AngleSearch { alpha, beta, theta };
        }
        let alpha = best.alpha;
        let (beta, theta) = golden_max(|b| f(alpha, b), b_lo, b_hi);
        if theta > best.theta {
            best = AngleSearch { alpha, beta, theta };
        }
    }
    Ok(best)
}

fn golden_max<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Largest central-difference partial of `φ(α, β)`.
pub fn stationarity_residual<T: Real>(sigma_k: T, sigma_k1: T, eta: T, alpha: T, beta: T, step: T) -> Result<T> {
    if step.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let phi = |a: T, b: T| phi_from_angles(sigma_k, sigma_k1, eta, a, b);
    let two_h = step + step;
    let da = (phi(alpha + step, beta) - phi(alpha - step, beta)) / two_h;
    let db = (phi(alpha, beta + step) - phi(alpha, beta - step)) / two_h;
    Ok(da.abs().max(db.abs()))
}

const BRUTE_MAX_K: usize = 3;
const BRUTE_MAX_D: usize = 6;
const BRUTE_MAX_STARTS: usize = 32;
const BRUTE_MAX_ITERS: usize = 20_000;

/// Principal angles by direct maximization of `uᵀv` with deflation.
///
/// Each angle comes from an alternating ascent: project `v` onto the part of
/// `span(A)` orthogonal to earlier `u`'s, then project `u` onto the matching
/// part of `span(B)`. The best of `min(trials, 32)` random starts is kept.
pub fn brute_force_principal_angles<T: Real>(
    a: &OrthonormalBasis<T>,
    b: &OrthonormalBasis<T>,
    cfg: &SearchConfig,
) -> Result<PrincipalAngles<T>> {
    cfg.validate()?;
    let (d, k) = (a.ambient_dim(), a.subspace_dim());
    if b.ambient_dim() != d || b.subspace_dim() != k {
        return Err(Error::InvalidDimension("bases must have equal shapes".into()));
    }
    if k > BRUTE_MAX_K || d > BRUTE_MAX_D {
        return Err(Error::OracleTooExpensive(format!(
            "brute force limited to k <= {BRUTE_MAX_K}, d <= {BRUTE_MAX_D}; got k = {k}, d = {d}"
        )));
    }
    let (qa, qb) = (a.columns(), b.columns());
    let mut us: Vec<DVector<T>> = Vec::new();
    let mut vs: Vec<DVector<T>> = Vec::new();
    let mut angles = Vec::with_capacity(k);
    let mut rng = StreamRng::new(cfg.seed, streams::ANGLE_STARTS);
    let starts = cfg.trials.min(BRUTE_MAX_STARTS);
    let tiny = T::lit(1e-12);

    for _ in 0..k {
        let mut best: Option<(T, DVector<T>, DVector<T>)> = None;
        for _ in 0..starts {
            let Some(mut u) = deflated(qa, &us, &rng.gaussian_vector::<T>(d), tiny) else {
                continue;
            };
            let mut v = match deflated(qb, &vs, &u, tiny) {
                Some(v) => v,
                None => match deflated(qb, &vs, &rng.gaussian_vector::<T>(d), tiny) {
                    Some(v) => v,
                    None => continue,
                },
            };
            let mut cos = u.dot(&v);
            for _ in 0..BRUTE_MAX_ITERS {
                let Some(nu) = deflated(qa, &us, &v, tiny) else { break };
                let Some(nv) = deflated(qb, &vs, &nu, tiny) else { break };
                let next = nu.dot(&nv);
                u = nu;
                v = nv;
                if next - cos <= T::default_epsilon() {
                    cos = next;
                    break;
                }
                cos = next;
            }
            if best.as_ref().is_none_or(|(c, _, _)| cos > *c) {
                best = Some((cos, u, v));
            }
        }
        let (cos, u, v) = match best {
            Some(found) => found,
            // The deflated parts are orthogonal: pick any admissible pair.
            None => {
                let u = any_admissible(qa, &us, d);
                let v = any_admissible(qb, &vs, d);
                (T::zero(), u, v)
            }
        };
        let angle = if cos >= T::zero() {
            T::lit(2.0) * ((&u - &v).norm() * T::lit(0.5)).min(T::one()).asin()
        } else {
            T::frac_pi_2()
        };
        angles.push(angle.min(T::frac_pi_2()));
        us.push(u);
        vs.push(v);
    }
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(PrincipalAngles::from_sorted(angles))
}

/// Normalized projection of `x` onto `span(q)` minus the span of `taken`.
fn deflated<T: Real>(q: &DMatrix<T>, taken: &[DVector<T>], x: &DVector<T>, tiny: T) -> Option<DVector<T>> {
    let mut p = q * (q.transpose() * x);
    for t in taken {
        let c = t.dot(&p);
        p -= t * c;
    }
    let norm = p.norm();
    (norm > tiny).then(|| p / norm)
}

fn any_admissible<T: Real>(q: &DMatrix<T>, taken: &[DVector<T>], d: usize) -> DVector<T> {
    for j in 0..q.ncols() {
        if let Some(u) = deflated(q, taken, &q.column(j).into_owned(), T::lit(1e-8)) {
            return u;
        }
    }
    DVector::zeros(d)
}
