use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pgm::write_pgm;
use crate::bounds::{sampling_bound, t1_for_failure, RandomInputs, RandomVariant, SamplingRate};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::noise::{derive_seed, sample_mask, sampling_noise, NoiseKind, NoiseSpec};
use crate::spectral::{energy_fraction, rank_p_approx, spectral_norm, svd, truncation_difference_norm};

/// Rank-3 missing-entry demo: `A = s1 u1 u1^T + s2 u2 u2^T + s3 u3 u3^T` with
/// unnormalized `+-1` vectors, observed entrywise with probability `rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Spec {
    pub n: usize,
    pub sigmas: [f64; 3],
    pub rho: f64,
    pub seed: u64,
    /// Target failure probability used to pick `t1` for the certified bound.
    pub failure_target: f64,
}

impl Default for Fig1Spec {
    fn default() -> Self {
        Self {
            n: 1000,
            sigmas: [22.0, 11.0, 5.0],
            rho: 0.1,
            seed: 7,
            failure_target: 0.01,
        }
    }
}

impl Fig1Spec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 4 != 0 {
            return Err(Error::InvalidSpec(format!("n = {} must be a positive multiple of 4", self.n)));
        }
        let [a, b, c] = self.sigmas;
        if !(a > b && b > c && c > 0.0) {
            return Err(Error::InvalidSpec(format!("sigmas {:?} must be positive and decreasing", self.sigmas)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidDensity(self.rho));
        }
        Ok(())
    }

    /// Theoretical entry range `[-s3, s1 + s3]`, shared by all panels.
    pub fn entry_range(&self) -> (f64, f64) {
        (-self.sigmas[2], self.sigmas[0] + self.sigmas[2])
    }
}

/// `u1` indicates the first half, `u2` the second; `u3` is `+-1` with exactly
/// `n/4` entries of each sign in each half, at seeded random positions.
pub fn fig1_vectors(spec: &Fig1Spec) -> Result<[Vec<f64>; 3]> {
    spec.validate()?;
    let (n, h) = (spec.n, spec.n / 2);
    let u1: Vec<f64> = (0..n).map(|i| if i < h { 1.0 } else { 0.0 }).collect();
    let u2: Vec<f64> = (0..n).map(|i| if i < h { 0.0 } else { 1.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let mut u3 = Vec::with_capacity(n);
    for _ in 0..2 {
        let mut half: Vec<f64> = (0..h).map(|i| if i < h / 2 { 1.0 } else { -1.0 }).collect();
        half.shuffle(&mut rng);
        u3.extend(half);
    }
    Ok([u1, u2, u3])
}

pub fn build_fig1_matrix(spec: &Fig1Spec) -> Result<DenseMatrix> {
    let [u1, u2, u3] = fig1_vectors(spec)?;
    let [s1, s2, s3] = spec.sigmas;
    Ok(DenseMatrix::from_outer_products(
        spec.n,
        spec.n,
        &[(s1, &u1, &u1), (s2, &u2, &u2), (s3, &u3, &u3)],
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub n: usize,
    pub rho: f64,
    pub seed: u64,
    pub entry_min: f64,
    pub entry_max: f64,
    /// Leading singular values of `A`; `(n/2) s_i` for the `+-1` vectors.
    pub singular_values: Vec<f64>,
    pub delta_2: f64,
    pub energy_fraction_2: f64,
    pub observed_fraction: f64,
    pub norm_e: f64,
    /// `||tilde A_2 - A_2||` with `tilde A = rho^{-1} B`.
    pub measured_error: f64,
    /// Share of entries on the support of `A_2` where `(rho^{-1} B)_2` has the same sign.
    pub sign_agreement: f64,
    pub k: f64,
    pub sigma2: f64,
    pub t1: f64,
    pub c0_lhs: f64,
    pub c0_pass: bool,
    pub certified_bound: Option<f64>,
    pub fail_prob: Option<f64>,
    pub rate: SamplingRate,
}

impl Fig1Report {
    /// Measured error within the certified bound, or no certificate at all.
    pub fn bound_holds(&self) -> bool {
        self.certified_bound.is_none_or(|b| self.measured_error <= b)
    }
}

/// Matrices behind the four panels, plus the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Result {
    /// Panel (a): `A`.
    pub a: DenseMatrix,
    /// Panel (b): observed matrix `B`, zero where unobserved.
    pub b: DenseMatrix,
    /// Panel (c): `A_2`.
    pub a2: DenseMatrix,
    /// Panel (d): `(rho^{-1} B)_2`.
    pub b2: DenseMatrix,
    pub report: Fig1Report,
    range: (f64, f64),
}

impl Fig1Result {
    /// Writes `a.pgm`, `b.pgm`, `c.pgm` and `d.pgm` into `dir`, all on the
    /// common range `[-s3, s1 + s3]`.
    pub fn write_panels(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let (lo, hi) = self.range;
        let mut out = Vec::new();
        for (name, m) in [("a", &self.a), ("b", &self.b), ("c", &self.a2), ("d", &self.b2)] {
            let path = dir.as_ref().join(format!("{name}.pgm"));
            write_pgm(m, lo, hi, &path)?;
            out.push(path);
        }
        Ok(out)
    }
}

pub fn run_fig1(spec: &Fig1Spec) -> Result<Fig1Result> {
    let a = build_fig1_matrix(spec)?;
    let n = spec.n;
    let mask = sample_mask(spec.rho, n, n, derive_seed(spec.seed, 1))?;
    let (e, observed) = sampling_noise(&a, &mask, spec.rho, None)?;
    let rescaled = observed.values.map(|v| v / spec.rho);

    let dec_a = svd(&a, None)?;
    let dec_t = svd(&rescaled, None)?;
    let a2 = rank_p_approx(&dec_a, 2)?;
    let b2 = rank_p_approx(&dec_t, 2)?;
    let measured = truncation_difference_norm(&dec_a, &dec_t, 2)?;
    let norm_e = spectral_norm(&e)?;

    let support_tol = 1e-9 * a2.max_abs();
    let (mut agree, mut total) = (0usize, 0usize);
    for (x, y) in a2.as_slice().iter().zip(b2.as_slice()) {
        if x.abs() > support_tol {
            total += 1;
            if x.signum() == y.signum() {
                agree += 1;
            }
        }
    }

    let sampling = NoiseSpec::new(
        NoiseKind::Sampling {
            rho: spec.rho,
            entry_noise: None,
        },
        0,
    );
    let (k, sigma2) = sampling.bound_params(Some(&a))?;
    let r = 3;
    let t1 = t1_for_failure(r, k, sigma2, spec.failure_target);
    let (sigma_2, delta_2) = (dec_a.sigma(2), dec_a.sigma(2) - dec_a.sigma(3));
    let inputs = RandomInputs {
        p: 2,
        r,
        m: n,
        n,
        norm_e,
        sigma_p: sigma_2,
        delta_p: delta_2,
    };
    let gate = crate::bounds::random_bound_c0(2, r, t1, norm_e, sigma_2, delta_2)?;
    let variant = RandomVariant::Trivial { k, sigma2, t1 };
    let certified = if gate.pass {
        Some(sampling_bound(spec.rho, &variant, &inputs)?.certified)
    } else {
        None
    };
    let (entry_min, entry_max) = a.min_max();
    let report = Fig1Report {
        n,
        rho: spec.rho,
        seed: spec.seed,
        entry_min,
        entry_max,
        singular_values: dec_a.singular_values().iter().take(4).copied().collect(),
        delta_2,
        energy_fraction_2: energy_fraction(&dec_a, 2)?,
        observed_fraction: mask.observed_fraction(),
        norm_e,
        measured_error: measured,
        sign_agreement: if total == 0 { 1.0 } else { agree as f64 / total as f64 },
        k,
        sigma2,
        t1,
        c0_lhs: gate.lhs,
        c0_pass: gate.pass,
        certified_bound: certified.map(|c| c.bound),
        fail_prob: certified.map(|c| c.fail_prob),
        rate: crate::bounds::sampling_rate(spec.rho, n, sigma_2, delta_2),
    };
    Ok(Fig1Result {
        b: observed.values,
        a,
        a2,
        b2,
        report,
        range: spec.entry_range(),
    })
}
