mod common;

use rankpert::noise::{derive_seed, sample_mask, sample_noise, sampling_noise, NoiseSpec};
use rankpert::spectral::spectral_norm;

#[test]
fn wigner_norm_near_two_sqrt_n() {
    let n = 300;
    for s in 0..3 {
        let e = sample_noise(&NoiseSpec::wigner(derive_seed(5, s)), n, n).unwrap();
        assert!(e.is_symmetric());
        let ratio = spectral_norm(&e).unwrap() / (n as f64).sqrt();
        assert!((1.85..=2.1).contains(&ratio), "{ratio}");
    }
}

#[test]
fn rademacher_entries_have_expected_moments() {
    let e = sample_noise(&NoiseSpec::rademacher(0.5, 9), 200, 150).unwrap();
    assert!(e.as_slice().iter().all(|v| v.abs() == 0.5));
    let n = e.as_slice().len() as f64;
    let mean = e.as_slice().iter().sum::<f64>() / n;
    let var = e.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
    assert!(mean.abs() < 4.0 * 0.5 / n.sqrt());
    assert_eq!(var, 0.25);
}

#[test]
fn sampling_noise_is_unbiased() {
    let (m, n, rho, draws) = (20, 20, 0.3, 400);
    let a = common::gaussian(&mut common::rng(77), m, n);
    let mut sums = vec![0.0; m * n];
    for t in 0..draws {
        let mask = sample_mask(rho, m, n, derive_seed(77, t)).unwrap();
        let (e, _) = sampling_noise(&a, &mask, rho, None).unwrap();
        sums.iter_mut().zip(e.as_slice()).for_each(|(s, v)| *s += v);
    }
    let sd = ((1.0 - rho) / rho).sqrt() / (draws as f64).sqrt();
    let within = sums
        .iter()
        .zip(a.as_slice())
        .filter(|(s, a)| (*s / draws as f64).abs() <= 3.0 * sd * a.abs())
        .count();
    assert!(within as f64 >= 0.99 * (m * n) as f64, "{within} of {}", m * n);
}

#[test]
fn mask_density_matches_rho() {
    let mask = sample_mask(0.25, 300, 300, 3).unwrap();
    let f = mask.observed_fraction();
    let sd = (0.25f64 * 0.75 / 90000.0).sqrt();
    assert!((f - 0.25).abs() < 4.0 * sd, "{f}");
}

#[test]
fn draws_depend_only_on_seed() {
    let spec = NoiseSpec::wigner(12);
    let a = sample_noise(&spec, 40, 40).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| sample_noise(&spec, 40, 40).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, sample_noise(&spec.with_seed(13), 40, 40).unwrap());
}
