use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ground::random_orthonormal;
use super::median;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::noise::{derive_seed, sample_noise, NoiseSpec};
use crate::spectral::{spectral_norm, svd, truncation_difference_norm, SpectralDecomposition};

/// Relative slack on `||tilde A_1 - A_1|| >= |tilde sigma_1 - sigma_1|`,
/// covering rounding in the two norm evaluations.
pub const LOWER_BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessTrial {
    pub trial: usize,
    pub seed: u64,
    pub sigma_1: f64,
    pub sigma_tilde_1: f64,
    pub norm_e: f64,
    /// `||tilde A_1 - A_1||`.
    pub truncation_error: f64,
    /// `|tilde sigma_1 - sigma_1| / (||E||^2 / sigma_1)`; absent when `E = 0`.
    pub ratio: Option<f64>,
    pub lower_bound_holds: bool,
}

impl SharpnessTrial {
    /// Measures one rank-one signal `a = sigma_1 u v^T` against its perturbation.
    pub fn measure(a: &DenseMatrix, e: &DenseMatrix) -> Result<Self> {
        let dec_a = leading(&svd(a, None)?)?;
        let dec_t = leading(&svd(&a.add(e)?, None)?)?;
        Self::from_parts(&dec_a, &dec_t, spectral_norm(e)?)
    }

    /// Same measurement for a known spike `sigma_1 u v^T` (unit `u`, `v`). The
    /// leading triplet of `tilde A` comes from power iteration started at `v`,
    /// which converges fast since `tilde sigma_1` sits well above the noise edge.
    pub fn measure_spike(sigma_1: f64, u: &[f64], v: &[f64], e: &DenseMatrix) -> Result<Self> {
        let (m, n) = e.shape();
        if u.len() != m || v.len() != n {
            return Err(Error::Shape(format!("spike {}x{} vs noise {m}x{n}", u.len(), v.len())));
        }
        let a = DenseMatrix::from_outer_products(m, n, &[(sigma_1, u, v)]);
        let t = a.add(e)?;
        let (st, ut, vt) = leading_triplet(&t, v)?;
        let col = |x: &[f64]| DenseMatrix::from_fn(x.len(), 1, |i, _| x[i]);
        let dec_a = SpectralDecomposition::from_parts(vec![sigma_1], col(u), col(v))?;
        let dec_t = SpectralDecomposition::from_parts(vec![st], col(&ut), col(&vt))?;
        Self::from_parts(&dec_a, &dec_t, spectral_norm(e)?)
    }

    fn from_parts(dec_a: &SpectralDecomposition, dec_t: &SpectralDecomposition, norm_e: f64) -> Result<Self> {
        let (s1, t1) = (dec_a.sigma(1), dec_t.sigma(1));
        let truncation_error = truncation_difference_norm(dec_a, dec_t, 1)?;
        let shift = (t1 - s1).abs();
        Ok(Self {
            trial: 0,
            seed: 0,
            sigma_1: s1,
            sigma_tilde_1: t1,
            norm_e,
            truncation_error,
            ratio: (norm_e > 0.0 && s1 > 0.0).then(|| shift * s1 / (norm_e * norm_e)),
            lower_bound_holds: truncation_error >= shift * (1.0 - LOWER_BOUND_SLACK),
        })
    }

    pub fn ratio(&self) -> Result<f64> {
        self.ratio
            .ok_or_else(|| Error::NotApplicable("ratio undefined for a zero perturbation".into()))
    }
}

fn leading(dec: &SpectralDecomposition) -> Result<SpectralDecomposition> {
    let u = DenseMatrix::from_fn(dec.rows(), 1, |i, _| dec.left()[(i, 0)]);
    let v = DenseMatrix::from_fn(dec.cols(), 1, |i, _| dec.right()[(i, 0)]);
    SpectralDecomposition::from_parts(vec![dec.sigma(1)], u, v)
}

const POWER_MAX_ITERS: usize = 2000;

/// Leading singular triplet of `t` by alternating power iteration from `start`.
fn leading_triplet(t: &DenseMatrix, start: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let unit = |x: Vec<f64>| {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (nrm, x.into_iter().map(|v| v / nrm).collect::<Vec<f64>>())
    };
    let (_, mut v) = unit(start.to_vec());
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let (_, uu) = unit(t.mul_vec(&v));
        let (s, vv) = unit(t.tr_mul_vec(&uu));
        if !s.is_finite() || s == 0.0 {
            return Err(Error::NotApplicable("power iteration hit a zero vector".into()));
        }
        if (s - sigma).abs() <= 4.0 * f64::EPSILON * s {
            return Ok((s, uu, vv));
        }
        (sigma, v) = (s, vv);
    }
    Err(Error::NotApplicable("power iteration did not converge".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub n: usize,
    pub c: f64,
    pub sigma_1: f64,
    pub trials: Vec<SharpnessTrial>,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub lower_bound_all: bool,
}

impl SharpnessReport {
    pub fn ratios_within(&self, lo: f64, hi: f64) -> bool {
        self.trials.iter().all(|t| t.ratio.is_some_and(|r| (lo..=hi).contains(&r)))
    }
}

/// Rank-one spike `A = c sqrt(n) u v^T` plus `n x n` Rademacher noise, once per
/// trial. Trial `t` uses `derive_seed(seed, t)` for the signal vectors and the
/// noise.
pub fn run_sharpness(n: usize, c: f64, trials: usize, seed: u64) -> Result<SharpnessReport> {
    if !(c > 2.0) {
        return Err(Error::InvalidSpec(format!("c = {c} must exceed 2")));
    }
    if n < 2 || trials == 0 {
        return Err(Error::InvalidSpec("need n >= 2 and at least one trial".into()));
    }
    let sigma_1 = c * (n as f64).sqrt();
    let results: Vec<SharpnessTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let u = random_orthonormal(n, 1, derive_seed(ts, 0))?.column(0);
            let v = random_orthonormal(n, 1, derive_seed(ts, 1))?.column(0);
            let e = sample_noise(&NoiseSpec::rademacher(1.0, derive_seed(ts, 2)), n, n)?;
            let mut trial = SharpnessTrial::measure_spike(sigma_1, &u, &v, &e)?;
            trial.trial = t;
            trial.seed = ts;
            Ok(trial)
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = results.iter().filter_map(|t| t.ratio).collect();
    Ok(SharpnessReport {
        n,
        c,
        sigma_1,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        median_ratio: median(&ratios),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lower_bound_all: results.iter().all(|t| t.lower_bound_holds),
        trials: results,
    })
}
