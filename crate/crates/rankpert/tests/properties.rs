mod common;

use proptest::prelude::*;
use rankpert::skewness::compute_skewness;
use rankpert::spectral::{
    rank_p_approx, singular_values, spectral_norm, svd, symmetric_eigen, symmetrize, truncation_difference_norm,
    weyl_check,
};

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=9, 1usize..=9, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eym_truncation_error_is_next_singular_value((m, n, seed) in dims(), pick in 0usize..9) {
        let a = common::gaussian(&mut common::rng(seed), m, n);
        let dec = svd(&a, None).unwrap();
        let p = 1 + pick % m.min(n);
        let err = spectral_norm(&a.sub(&rank_p_approx(&dec, p).unwrap()).unwrap()).unwrap();
        let want = dec.singular_values().get(p).copied().unwrap_or(0.0);
        prop_assert!((err - want).abs() <= 1e-10 * dec.sigma(1));
    }

    #[test]
    fn truncation_error_is_minimal_among_rank_p((m, n, seed) in dims(), pick in 0usize..9) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, m, n);
        let p = 1 + pick % m.min(n);
        let dec = svd(&a, None).unwrap();
        let best = spectral_norm(&a.sub(&rank_p_approx(&dec, p).unwrap()).unwrap()).unwrap();
        let other = common::gaussian(&mut rng, m, p).matmul(&common::gaussian(&mut rng, p, n)).unwrap();
        let err = spectral_norm(&a.sub(&other).unwrap()).unwrap();
        prop_assert!(best <= err + 1e-10 * dec.sigma(1));
    }

    #[test]
    fn weyl_inequality((m, n, seed) in dims(), scale in 1e-3f64..10.0) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, m, n);
        let e = common::gaussian(&mut rng, m, n).scale(scale);
        let (dev, norm_e) = weyl_check(&a, &e).unwrap();
        prop_assert!(dev <= norm_e * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn singular_values_sorted_and_match_gram((m, n, seed) in dims()) {
        let a = common::gaussian(&mut common::rng(seed), m, n);
        let s = singular_values(&a).unwrap();
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let gram = a.transpose().matmul(&a).unwrap();
        let eig = symmetric_eigen(&gram).unwrap();
        for (i, si) in s.iter().enumerate() {
            prop_assert!((si * si - eig.values()[i]).abs() <= 1e-10 * (1.0 + s[0] * s[0]));
        }
    }

    #[test]
    fn truncation_difference_matches_direct((m, n, seed) in dims(), pick in 0usize..9, scale in 1e-3f64..1.0) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, m, n);
        let t = a.add(&common::gaussian(&mut rng, m, n).scale(scale)).unwrap();
        let p = 1 + pick % m.min(n);
        let (da, dt) = (svd(&a, None).unwrap(), svd(&t, None).unwrap());
        let direct = spectral_norm(&rank_p_approx(&dt, p).unwrap().sub(&rank_p_approx(&da, p).unwrap()).unwrap()).unwrap();
        let factored = truncation_difference_norm(&da, &dt, p).unwrap();
        prop_assert!((direct - factored).abs() <= 1e-9 * (1.0 + da.sigma(1)));
    }

    #[test]
    fn dilation_doubles_each_singular_value((m, n, seed) in dims()) {
        let a = common::gaussian(&mut common::rng(seed), m, n);
        let s = singular_values(&a).unwrap();
        let eig = symmetric_eigen(&symmetrize(&a)).unwrap();
        let mut pos: Vec<f64> = eig.values().iter().copied().filter(|v| *v > 1e-9).collect();
        pos.sort_by(|x, y| y.total_cmp(x));
        let mut neg: Vec<f64> = eig.values().iter().copied().filter(|v| *v < -1e-9).map(|v| -v).collect();
        neg.sort_by(|x, y| y.total_cmp(x));
        prop_assert_eq!(pos.len(), s.len());
        prop_assert_eq!(neg.len(), s.len());
        for i in 0..s.len() {
            prop_assert!((pos[i] - s[i]).abs() <= 1e-10 * (1.0 + s[0]));
            prop_assert!((neg[i] - s[i]).abs() <= 1e-10 * (1.0 + s[0]));
        }
    }

    #[test]
    fn skewness_matches_brute_force((m, n, seed) in dims(), pick in 0usize..9) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, m, n);
        let e = common::gaussian(&mut rng, m, n);
        let r = 1 + pick % m.min(n);
        let dec = svd(&a, None).unwrap();
        let sk = compute_skewness(&dec, &e, r).unwrap();
        let us: Vec<Vec<f64>> = (1..=r).map(|i| dec.u(i)).collect();
        let vs: Vec<Vec<f64>> = (1..=r).map(|i| dec.v(i)).collect();
        let (x, y) = common::brute_skewness(&us, &vs, &e);
        prop_assert!((sk.x - x).abs() <= 1e-12 * (1.0 + x));
        prop_assert!((sk.y - y).abs() <= 1e-12 * (1.0 + y));
    }

    #[test]
    fn skewness_bounded_by_noise_norm((m, n, seed) in dims(), pick in 0usize..9) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, m, n);
        let e = common::gaussian(&mut rng, m, n);
        let r = 1 + pick % m.min(n);
        let sk = compute_skewness(&svd(&a, None).unwrap(), &e, r).unwrap();
        let ne = spectral_norm(&e).unwrap();
        prop_assert!(sk.x <= ne * (1.0 + 1e-12));
        prop_assert!(sk.y <= ne * ne * (1.0 + 1e-12));
    }
}
