use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use proptest::prelude::*;
use subspace_attack::oracle::{random_rank_one, random_unconstrained, SearchConfig};
use subspace_attack::rng::StreamRng;
use subspace_attack::{
    attack_rank_one, attack_unconstrained, full_svd, principal_angles, subspace_distance,
    unitary_conjugate, AttackBudget, DataMatrixF32, DataMatrixF64, OrthonormalBasis, Regime,
};

fn matrix(seed: u64, d: usize, n: usize) -> DataMatrixF64 {
    DataMatrixF64::new(StreamRng::new(seed, 0).gaussian_matrix(d, n)).unwrap()
}

fn basis(seed: u64, d: usize, k: usize) -> OrthonormalBasis<f64> {
    OrthonormalBasis::orthonormalize(&StreamRng::new(seed, 1).gaussian_matrix(d, k)).unwrap()
}

fn eta(x: f64) -> AttackBudget<f64> {
    AttackBudget::new(x).unwrap()
}

/// `(d, n, k)` with `1 <= k < min(d, n)`.
fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (3usize..8, 3usize..8).prop_flat_map(|(d, n)| (Just(d), Just(n), 1..d.min(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn angles_are_symmetric_and_in_range(seed in any::<u64>(), d in 2usize..9, k in 1usize..4) {
        let k = k.min(d);
        let a = basis(seed, d, k);
        let b = basis(seed ^ 0x9e37, d, k);
        let ab = principal_angles(&a, &b).unwrap().into_vec();
        let ba = principal_angles(&b, &a).unwrap().into_vec();
        prop_assert_eq!(&ab, &ba);
        for w in ab.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for t in ab {
            prop_assert!((0.0..=FRAC_PI_2).contains(&t));
        }
        prop_assert!(principal_angles(&a, &a).unwrap().largest() == 0.0);
    }

    #[test]
    fn angles_ignore_choice_of_basis(seed in any::<u64>(), d in 2usize..9, k in 1usize..4) {
        let k = k.min(d);
        let a = basis(seed, d, k);
        let b = basis(seed ^ 0x51, d, k);
        let q = StreamRng::new(seed, 2).orthogonal::<f64>(k);
        let before = principal_angles(&a, &b).unwrap().into_vec();
        let after = principal_angles(&a.rotated(&q).unwrap(), &b).unwrap().into_vec();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn svd_reconstructs(seed in any::<u64>(), d in 1usize..9, n in 1usize..9) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        let err = (svd.reconstruct() - x.as_matrix()).norm();
        prop_assert!(err <= 1e-12 * x.fro_norm().max(1.0), "{err}");
        for w in svd.sigma.as_slice().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn distance_is_invariant_under_orthogonal_conjugation((d, n, k) in dims(), seed in any::<u64>()) {
        let x = matrix(seed, d, n);
        let mut rng = StreamRng::new(seed, 3);
        let (p, t) = (rng.orthogonal::<f64>(d), rng.orthogonal::<f64>(n));
        let delta: DMatrix<f64> = rng.gaussian_matrix(d, n) * 0.2;
        let y = x.perturbed(&delta).unwrap();
        let before = subspace_distance(&x, &y, k).unwrap();
        let after = subspace_distance(
            &unitary_conjugate(&x, &p, &t).unwrap(),
            &unitary_conjugate(&y, &p, &t).unwrap(),
            k,
        ).unwrap();
        prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn case_two_attacks_spend_the_whole_budget((d, n, k) in dims(), seed in any::<u64>(), frac in 0.05f64..0.95) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        let gap = svd.sigma[k - 1] - svd.sigma[k];
        let e = frac * gap / 2f64.sqrt();
        let u = attack_unconstrained(&x, k, eta(e)).unwrap();
        prop_assume!(u.regime == Regime::UnconstrainedCase2);
        prop_assert!((u.budget_used - e).abs() < 1e-8);
        let r = attack_rank_one(&x, k, eta(e)).unwrap();
        prop_assert_eq!(r.regime, Regime::KLtRankCase2);
        prop_assert!((r.budget_used - e).abs() < 1e-8);
    }

    #[test]
    fn achieved_matches_predicted((d, n, k) in dims(), seed in any::<u64>(), ratio in 0.0f64..1.5) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        let e = ratio * (svd.sigma[k - 1] - svd.sigma[k]);
        for r in [attack_rank_one(&x, k, eta(e)).unwrap(), attack_unconstrained(&x, k, eta(e)).unwrap()] {
            if !r.ambiguous_subspace {
                prop_assert!((r.theta_achieved - r.theta_predicted).abs() < 1e-8,
                    "{:?}: {} vs {}", r.regime, r.theta_achieved, r.theta_predicted);
            }
        }
    }

    #[test]
    fn angle_grows_with_budget((d, n, k) in dims(), seed in any::<u64>()) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        let gap = svd.sigma[k - 1] - svd.sigma[k];
        let (mut r1_prev, mut wr_prev) = (0.0, 0.0);
        for i in 0..=24 {
            let e = gap * i as f64 / 20.0;
            let r1 = attack_rank_one(&x, k, eta(e)).unwrap().theta_predicted;
            let wr = attack_unconstrained(&x, k, eta(e)).unwrap().theta_predicted;
            prop_assert!(r1 >= r1_prev - 1e-12 && wr >= wr_prev - 1e-12);
            prop_assert!(wr >= r1 - 1e-8, "unconstrained {wr} below rank-one {r1}");
            (r1_prev, wr_prev) = (r1, wr);
        }
    }

    #[test]
    fn random_attacks_never_beat_closed_forms((d, n, k) in dims(), seed in any::<u64>(), ratio in 0.05f64..1.2) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        let e = ratio * (svd.sigma[k - 1] - svd.sigma[k]);
        let cfg = SearchConfig { trials: 200, seed, ..SearchConfig::default() };
        let r1 = attack_rank_one(&x, k, eta(e)).unwrap();
        let wr = attack_unconstrained(&x, k, eta(e)).unwrap();
        prop_assert!(random_rank_one(&x, k, eta(e), &cfg).unwrap().theta <= r1.theta_predicted + 1e-6);
        prop_assert!(random_unconstrained(&x, k, eta(e), &cfg).unwrap().theta <= wr.theta_predicted + 1e-6);
    }

    #[test]
    fn single_precision_agrees((d, n, k) in dims(), seed in any::<u64>(), ratio in 0.1f64..0.6) {
        let x = matrix(seed, d, n);
        let svd = full_svd(&x).unwrap();
        // Single precision cannot resolve nearly tied spectra.
        prop_assume!(svd.sigma[k - 1] - svd.sigma[k] > 0.05 * svd.sigma[0]);
        let e = ratio * (svd.sigma[k - 1] - svd.sigma[k]);
        let x32 = DataMatrixF32::new(x.as_matrix().map(|v| v as f32)).unwrap();
        let b32 = AttackBudget::new(e as f32).unwrap();
        let r64 = attack_unconstrained(&x, k, eta(e)).unwrap();
        let r32 = attack_unconstrained(&x32, k, b32).unwrap();
        prop_assert!((r64.theta_predicted - r32.theta_predicted as f64).abs() < 1e-3);
    }
}
