//! Skewness of a perturbation `E` against the leading singular vectors of `A`,
//! and the variance-profile statistics used by the random-noise bounds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::spectral::SpectralDecomposition;

/// `x = max_{i,j<=r} |u_i^T E v_j|` and `y = max_{i<j<=r} max(|(E v_i).(E v_j)|, |(E^T u_i).(E^T u_j)|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewnessParams {
    pub x: f64,
    pub y: f64,
    /// Mean correction from a variance profile, when one is known.
    pub mu: Option<f64>,
    pub r_used: usize,
}

fn check(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::EmptyRank);
    }
    if r > dec.len() {
        return Err(Error::Index(format!("r = {r} exceeds {}", dec.len())));
    }
    if e.shape() != (dec.rows(), dec.cols()) {
        return Err(Error::Shape(format!(
            "perturbation {:?} vs matrix {:?}",
            e.shape(),
            (dec.rows(), dec.cols())
        )));
    }
    Ok(())
}

/// Columns `E v_1..E v_r`.
fn images_right(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Vec<Vec<f64>> {
    (1..=r).map(|j| e.mul_vec(&dec.v(j))).collect()
}

/// Columns `E^T u_1..E^T u_r`.
fn images_left(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Vec<Vec<f64>> {
    (1..=r).map(|i| e.tr_mul_vec(&dec.u(i))).collect()
}

pub fn compute_x(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Result<f64> {
    check(dec, e, r)?;
    let ev = images_right(dec, e, r);
    let mut x = 0.0f64;
    for i in 1..=r {
        let u = dec.u(i);
        for evj in &ev {
            x = x.max(dot(&u, evj).abs());
        }
    }
    Ok(x)
}

pub fn compute_y(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Result<f64> {
    check(dec, e, r)?;
    Ok(pairwise_max(&images_right(dec, e, r)).max(pairwise_max(&images_left(dec, e, r))))
}

fn pairwise_max(cols: &[Vec<f64>]) -> f64 {
    let mut y = 0.0f64;
    for (i, a) in cols.iter().enumerate() {
        for b in &cols[i + 1..] {
            y = y.max(dot(a, b).abs());
        }
    }
    y
}

pub fn compute_skewness(dec: &SpectralDecomposition, e: &DenseMatrix, r: usize) -> Result<SkewnessParams> {
    Ok(SkewnessParams {
        x: compute_x(dec, e, r)?,
        y: compute_y(dec, e, r)?,
        mu: None,
        r_used: r,
    })
}

/// Entrywise variances `sigma_ij^2` of a noise matrix whose entries are bounded
/// by `k` in absolute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    sigma2: DenseMatrix,
    k: f64,
}

impl VarianceProfile {
    /// Requires `0 <= sigma_ij^2 <= k^2` and `k > 0`.
    pub fn new(sigma2: DenseMatrix, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidSpec(format!("bound K = {k} must be positive")));
        }
        if sigma2.as_slice().iter().any(|&v| v < 0.0 || v > k * k) {
            return Err(Error::InvalidSpec(format!("variances must lie in [0, K^2] = [0, {}]", k * k)));
        }
        Ok(Self { sigma2, k })
    }

    pub fn uniform(m: usize, n: usize, sigma2: f64, k: f64) -> Result<Self> {
        Self::new(DenseMatrix::from_fn(m, n, |_, _| sigma2), k)
    }

    pub fn read_csv_file(path: impl AsRef<Path>, k: f64) -> Result<Self> {
        Self::new(DenseMatrix::read_csv_file(path)?, k)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn variances(&self) -> &DenseMatrix {
        &self.sigma2
    }

    pub fn shape(&self) -> (usize, usize) {
        self.sigma2.shape()
    }

    /// `sigma^2 = max_ij sigma_ij^2`.
    pub fn max_variance(&self) -> f64 {
        self.sigma2.max_abs()
    }
}

/// `mu = max_{k<l<=r} ( |sum_i c_i v_{li} v_{ki}| + |sum_j s_j u_{lj} u_{kj}| )` with
/// column sums `c_i = sum_{i'} sigma_{i'i}^2` and row sums `s_j = sum_{j'} sigma_{jj'}^2`.
/// Zero when `r = 1`.
pub fn compute_mu(dec: &SpectralDecomposition, profile: &VarianceProfile, r: usize) -> Result<f64> {
    let (m, n) = profile.shape();
    if (m, n) != (dec.rows(), dec.cols()) {
        return Err(Error::Shape(format!("profile {:?} vs matrix {:?}", (m, n), (dec.rows(), dec.cols()))));
    }
    if r == 0 {
        return Err(Error::EmptyRank);
    }
    if r > dec.len() {
        return Err(Error::Index(format!("r = {r} exceeds {}", dec.len())));
    }
    let s2 = profile.variances();
    let col_sums: Vec<f64> = (0..n).map(|i| (0..m).map(|ip| s2[(ip, i)]).sum()).collect();
    let row_sums: Vec<f64> = (0..m).map(|j| s2.row(j).iter().sum()).collect();
    let vs: Vec<Vec<f64>> = (1..=r).map(|i| dec.v(i)).collect();
    let us: Vec<Vec<f64>> = (1..=r).map(|i| dec.u(i)).collect();
    let weighted = |w: &[f64], a: &[f64], b: &[f64]| -> f64 {
        w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum::<f64>().abs()
    };
    let mut mu = 0.0f64;
    for k in 0..r {
        for l in k + 1..r {
            mu = mu.max(weighted(&col_sums, &vs[l], &vs[k]) + weighted(&row_sums, &us[l], &us[k]));
        }
    }
    Ok(mu)
}

/// `m4 = max( max_k (1/m) sum_i sigma_ik^4, max_l (1/n) sum_j sigma_lj^4 )`.
pub fn compute_m4(profile: &VarianceProfile) -> f64 {
    let (m, n) = profile.shape();
    let s2 = profile.variances();
    let col = (0..n)
        .map(|k| (0..m).map(|i| s2[(i, k)].powi(2)).sum::<f64>() / m as f64)
        .fold(0.0f64, f64::max);
    let row = (0..m)
        .map(|l| s2.row(l).iter().map(|v| v * v).sum::<f64>() / n as f64)
        .fold(0.0f64, f64::max);
    col.max(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::svd;

    #[test]
    fn zero_perturbation() {
        let dec = svd(&DenseMatrix::diag(&[3.0, 2.0, 1.0]), None).unwrap();
        let e = DenseMatrix::zeros(3, 3);
        let s = compute_skewness(&dec, &e, 2).unwrap();
        assert_eq!((s.x, s.y, s.r_used), (0.0, 0.0, 2));
    }

    #[test]
    fn identity_perturbation_on_diagonal() {
        let dec = svd(&DenseMatrix::diag(&[3.0, 2.0, 1.0]), None).unwrap();
        let e = DenseMatrix::identity(3).scale(0.1);
        let s = compute_skewness(&dec, &e, 2).unwrap();
        assert!((s.x - 0.1).abs() < 1e-15);
        assert!(s.y.abs() < 1e-15);
    }

    #[test]
    fn single_entry_perturbation() {
        let dec = svd(&DenseMatrix::diag(&[2.0, 1.0]), None).unwrap();
        let mut e = DenseMatrix::zeros(2, 2);
        e[(0, 1)] = 1.0;
        let s = compute_skewness(&dec, &e, 2).unwrap();
        assert_eq!(s.x, 1.0);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn rank_one_has_zero_y() {
        let dec = svd(&DenseMatrix::diag(&[2.0, 1.0]), None).unwrap();
        let e = DenseMatrix::from_fn(2, 2, |_, _| 0.3);
        assert_eq!(compute_y(&dec, &e, 1).unwrap(), 0.0);
    }

    #[test]
    fn rank_zero_rejected() {
        let dec = svd(&DenseMatrix::diag(&[2.0, 1.0]), None).unwrap();
        assert!(matches!(compute_x(&dec, &DenseMatrix::zeros(2, 2), 0), Err(Error::EmptyRank)));
    }

    #[test]
    fn uniform_profile_statistics() {
        let dec = svd(&DenseMatrix::diag(&[4.0, 3.0, 2.0, 1.0]), None).unwrap();
        let prof = VarianceProfile::uniform(4, 4, 0.25, 1.0).unwrap();
        assert!(compute_mu(&dec, &prof, 3).unwrap().abs() < 1e-15);
        assert!((compute_m4(&prof) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn nonuniform_profile_mu() {
        let dec = svd(&DenseMatrix::diag(&[2.0, 1.0]), None).unwrap();
        let mut s2 = DenseMatrix::zeros(2, 2);
        s2[(0, 0)] = 1.0;
        let prof = VarianceProfile::new(s2, 1.0).unwrap();
        assert_eq!(compute_mu(&dec, &prof, 2).unwrap(), 0.0);
        assert!((compute_m4(&prof) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_row_profile_m4() {
        let s2 = DenseMatrix::new(2, 2, vec![4.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(compute_m4(&VarianceProfile::new(s2, 2.0).unwrap()), 16.0);
        assert_eq!(compute_m4(&VarianceProfile::uniform(3, 2, 0.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn profile_rejects_variance_above_bound() {
        assert!(VarianceProfile::uniform(2, 2, 2.0, 1.0).is_err());
    }
}
