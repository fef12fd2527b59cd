use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ground::{GroundFamily, GroundSpec, Spectrum};
use super::median;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::noise::{derive_seed, sample_noise, NoiseSpec};
use crate::spectral::{rank_p_approx, svd};

/// Cosine between `vec(A - A_p)` and `vec(tilde A - tilde A_p)` in the
/// Frobenius inner product.
pub fn run_parallelism(a: &DenseMatrix, e: &DenseMatrix, p: usize) -> Result<f64> {
    let t = a.add(e)?;
    let ra = a.sub(&rank_p_approx(&svd(a, None)?, p)?)?;
    let rt = t.sub(&rank_p_approx(&svd(&t, None)?, p)?)?;
    let (na, nt) = (ra.frobenius_norm(), rt.frobenius_norm());
    if na == 0.0 || nt == 0.0 {
        return Err(Error::NotApplicable(format!("rank-{p} remainder is zero")));
    }
    let dot: f64 = ra.as_slice().iter().zip(rt.as_slice()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nt)).clamp(-1.0, 1.0))
}

/// `A = diag(3, 2.9, 1, 0.5)` and `E` lifting the second value past the first,
/// so the rank-1 truncations swap directions. Returns `(A, E, p)`.
pub fn swap_example() -> (DenseMatrix, DenseMatrix, usize) {
    (
        DenseMatrix::diag(&[3.0, 2.9, 1.0, 0.5]),
        DenseMatrix::diag(&[0.0, 0.2, 0.0, 0.0]),
        1,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParallelReport {
    pub n: usize,
    pub cosines: Vec<f64>,
    pub median: f64,
    pub min: f64,
}

/// Rank-2 `n x n` ground matrices with singular values `(20n, 10n)`, `p = 1`,
/// and unit Rademacher noise: a large gap next to a large `sigma_{p+1}`.
pub fn parallel_campaign(n: usize, trials: usize, seed: u64) -> Result<ParallelReport> {
    if n < 3 || trials == 0 {
        return Err(Error::InvalidSpec("need n >= 3 and at least one trial".into()));
    }
    let nf = n as f64;
    let ground = GroundSpec {
        family: GroundFamily::Rectangular,
        m: n,
        n,
        spectrum: Spectrum::Values {
            values: vec![20.0 * nf, 10.0 * nf],
        },
        seed: None,
    };
    let cosines: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let a = ground.build(derive_seed(ts, 0))?;
            let e = sample_noise(&NoiseSpec::rademacher(1.0, derive_seed(ts, 1)), n, n)?;
            run_parallelism(&a, &e, 1)
        })
        .collect::<Result<_>>()?;
    Ok(ParallelReport {
        n,
        median: median(&cosines),
        min: cosines.iter().copied().fold(f64::INFINITY, f64::min),
        cosines,
    })
}
