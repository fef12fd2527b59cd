use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundFamily {
    /// `U diag(s) U^T` with `s >= 0`.
    Psd,
    /// `U diag(s) U^T` with signed `s`.
    Symmetric,
    /// `U diag(s) V^T`, `m x n`.
    Rectangular,
}

/// Leading spectrum of the ground matrix; all other singular values are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// Explicit values (signed for the symmetric family).
    Values { values: Vec<f64> },
    /// `r` values `top, top - d, top - 2d, ...` with `d = n^gap_exponent`.
    GapRegime { r: usize, top: f64, gap_exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundSpec {
    pub family: GroundFamily,
    pub m: usize,
    pub n: usize,
    pub spectrum: Spectrum,
    /// Fixed seed for the singular vectors; drawn per trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GroundSpec {
    pub fn values(&self) -> Vec<f64> {
        match &self.spectrum {
            Spectrum::Values { values } => values.clone(),
            Spectrum::GapRegime { r, top, gap_exponent } => {
                let d = (self.n as f64).powf(*gap_exponent);
                (0..*r).map(|i| top - i as f64 * d).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = self.values();
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidSpec("ground matrix needs positive dimensions".into()));
        }
        if self.family != GroundFamily::Rectangular && self.m != self.n {
            return Err(Error::InvalidSpec(format!("{:?} family needs m = n", self.family)));
        }
        if vals.is_empty() || vals.len() > self.m.min(self.n) {
            return Err(Error::InvalidSpec(format!(
                "spectrum length {} must lie in 1..={}",
                vals.len(),
                self.m.min(self.n)
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("spectrum values must be finite".into()));
        }
        let signed_ok = self.family == GroundFamily::Symmetric;
        if !signed_ok && vals.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec(format!("{:?} family needs nonnegative values", self.family)));
        }
        Ok(())
    }

    /// Draws the ground matrix with singular vectors from `seed` (or the
    /// spec's fixed seed).
    pub fn build(&self, seed: u64) -> Result<DenseMatrix> {
        self.validate()?;
        let seed = self.seed.unwrap_or(seed);
        let vals = self.values();
        let k = vals.len();
        let u = random_orthonormal(self.m, k, seed)?;
        let v = match self.family {
            GroundFamily::Rectangular => random_orthonormal(self.n, k, seed ^ 0x9e37_79b9_7f4a_7c15)?,
            _ => u.clone(),
        };
        let us = DenseMatrix::from_fn(self.m, k, |i, j| u[(i, j)] * vals[j]);
        let mut a = us.matmul(&v.transpose())?;
        if self.family != GroundFamily::Rectangular {
            a = a.add(&a.transpose())?.scale(0.5);
        }
        Ok(a)
    }
}

/// `rows x k` matrix with orthonormal columns: QR of a Gaussian draw.
pub fn random_orthonormal(rows: usize, k: usize, seed: u64) -> Result<DenseMatrix> {
    if k > rows {
        return Err(Error::Shape(format!("cannot fit {k} orthonormal columns in dimension {rows}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DenseMatrix::from_fn(rows, k, |_, _| StandardNormal.sample(&mut rng));
    let q = g.to_faer().qr().compute_thin_Q();
    Ok(DenseMatrix::from_faer(q.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{singular_values, symmetric_eigen};

    #[test]
    fn orthonormal_columns() {
        let q = random_orthonormal(12, 4, 3).unwrap();
        let g = q.transpose().matmul(&q).unwrap();
        assert!(g.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn families_have_requested_spectrum() {
        let rect = GroundSpec {
            family: GroundFamily::Rectangular,
            m: 9,
            n: 7,
            spectrum: Spectrum::Values { values: vec![5.0, 2.0] },
            seed: None,
        };
        let s = singular_values(&rect.build(1).unwrap()).unwrap();
        assert!((s[0] - 5.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12 && s[2] < 1e-12);

        let sym = GroundSpec {
            family: GroundFamily::Symmetric,
            m: 6,
            n: 6,
            spectrum: Spectrum::Values { values: vec![4.0, -3.0] },
            seed: Some(8),
        };
        let a = sym.build(1).unwrap();
        assert_eq!(a, sym.build(2).unwrap());
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values()[0] - 4.0).abs() < 1e-12 && (e.values()[5] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn gap_regime_values() {
        let g = GroundSpec {
            family: GroundFamily::Psd,
            m: 100,
            n: 100,
            spectrum: Spectrum::GapRegime {
                r: 2,
                top: 500.0,
                gap_exponent: 0.5,
            },
            seed: None,
        };
        assert_eq!(g.values(), vec![500.0, 490.0]);
    }

    #[test]
    fn rejects_negative_psd_values() {
        let g = GroundSpec {
            family: GroundFamily::Psd,
            m: 3,
            n: 3,
            spectrum: Spectrum::Values { values: vec![1.0, -1.0] },
            seed: None,
        };
        assert!(g.validate().is_err());
    }
}
