//! Singular value and symmetric eigen decompositions, truncations, gaps and norms.
//!
//! Singular vectors follow one sign convention throughout: the entry of largest
//! magnitude in each left vector `u_i` is positive (first such entry on ties),
//! and `v_i` is flipped together with `u_i`. Eigenvectors of symmetric matrices
//! use the same rule.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Relative rank tolerance applied to `sigma_1` when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Thin SVD `A = U diag(sigma) V^T` with nonincreasing `sigma`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    singular_values: Vec<f64>,
    left: DenseMatrix,
    right: DenseMatrix,
    rank: usize,
    rank_tol: f64,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from known factors. `left` is `m x k`,
    /// `right` is `n x k`, and `singular_values` must be nonnegative and
    /// nonincreasing. Columns are expected to be orthonormal; this is not
    /// re-verified.
    pub fn from_parts(singular_values: Vec<f64>, left: DenseMatrix, right: DenseMatrix) -> Result<Self> {
        let k = singular_values.len();
        if left.cols() != k || right.cols() != k {
            return Err(Error::Shape(format!(
                "{k} singular values with factors {:?} and {:?}",
                left.shape(),
                right.shape()
            )));
        }
        if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0)
            || singular_values.windows(2).any(|w| w[0] < w[1])
        {
            return Err(Error::InvalidMatrix(
                "singular values must be finite, nonnegative and nonincreasing".into(),
            ));
        }
        let rank_tol = DEFAULT_RANK_TOL * singular_values.first().copied().unwrap_or(0.0);
        let rank = singular_values.iter().filter(|&&s| s > rank_tol).count();
        Ok(Self {
            singular_values,
            left,
            right,
            rank,
            rank_tol,
        })
    }

    pub fn rows(&self) -> usize {
        self.left.rows()
    }

    pub fn cols(&self) -> usize {
        self.right.rows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `sigma_i` with 1-based `i`; zero beyond the stored range.
    pub fn sigma(&self, i: usize) -> f64 {
        assert!(i >= 1, "singular values are 1-indexed");
        self.singular_values.get(i - 1).copied().unwrap_or(0.0)
    }

    pub fn left(&self) -> &DenseMatrix {
        &self.left
    }

    pub fn right(&self) -> &DenseMatrix {
        &self.right
    }

    /// `u_i` with 1-based `i`.
    pub fn u(&self, i: usize) -> Vec<f64> {
        self.left.column(i - 1)
    }

    /// `v_i` with 1-based `i`.
    pub fn v(&self, i: usize) -> Vec<f64> {
        self.right.column(i - 1)
    }

    pub fn numerical_rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Number of stored singular triplets, `min(m, n)` for a thin SVD.
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }
}

/// Thin SVD of `a`. `rank_tol` is an absolute threshold; by default
/// `1e-10 * sigma_1`.
pub fn svd(a: &DenseMatrix, rank_tol: Option<f64>) -> Result<SpectralDecomposition> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let dec = a
        .to_faer()
        .thin_svd()
        .map_err(|e| Error::Backend(format!("svd: {e:?}")))?;
    let s = dec.S().column_vector();
    let k = s.nrows();
    // The backend can leave rounding-level singular values slightly out of order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut u = Mat::<f64>::from_fn(dec.U().nrows(), k, |i, j| dec.U()[(i, order[j])]);
    let mut v = Mat::<f64>::from_fn(dec.V().nrows(), k, |i, j| dec.V()[(i, order[j])]);
    for j in 0..k {
        if leading_sign(u.col(j).iter().copied()) < 0.0 {
            negate_col(&mut u, j);
            negate_col(&mut v, j);
        }
    }
    let sigmas: Vec<f64> = order.iter().map(|&i| s[i].max(0.0)).collect();
    let mut out = SpectralDecomposition::from_parts(
        sigmas,
        DenseMatrix::from_faer(u.as_ref()),
        DenseMatrix::from_faer(v.as_ref()),
    )?;
    if let Some(tol) = rank_tol {
        out.rank_tol = tol;
        out.rank = out.singular_values.iter().filter(|&&s| s > tol).count();
    }
    Ok(out)
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    a.to_faer()
        .singular_values()
        .map_err(|e| Error::Backend(format!("singular values: {e:?}")))
}

/// Operator 2-norm. Exactly symmetric inputs go through the symmetric
/// eigenvalue solver, which is several times faster at large `n`.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    if a.is_symmetric() {
        let ev = a
            .to_faer()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Backend(format!("eigenvalues: {e:?}")))?;
        return Ok(ev.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Best rank-`p` approximation `A_p = sum_{i <= p} sigma_i u_i v_i^T`.
pub fn rank_p_approx(dec: &SpectralDecomposition, p: usize) -> Result<DenseMatrix> {
    if p > dec.len() {
        return Err(Error::Index(format!("p = {p} exceeds min(m, n) = {}", dec.len())));
    }
    let (m, n) = (dec.rows(), dec.cols());
    let mut out = DenseMatrix::zeros(m, n);
    for k in 0..p {
        let s = dec.singular_values[k];
        if s == 0.0 {
            continue;
        }
        for i in 0..m {
            let su = s * dec.left[(i, k)];
            if su == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += su * dec.right[(j, k)];
            }
        }
    }
    Ok(out)
}

/// `||B_p - A_p||` computed from the rank-`2p` factored form: with
/// `L = [U~_p S~_p, -U_p S_p]` and `R = [V~_p, V_p]`, the norm equals the largest
/// singular value of `R_L R_R^T` where `R_L`, `R_R` are the QR triangles.
pub fn truncation_difference_norm(
    a: &SpectralDecomposition,
    b: &SpectralDecomposition,
    p: usize,
) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape("decompositions of different shapes".into()));
    }
    if p > a.len() {
        return Err(Error::Index(format!("p = {p} exceeds min(m, n) = {}", a.len())));
    }
    if p == 0 {
        return Ok(0.0);
    }
    let l = Mat::<f64>::from_fn(a.rows(), 2 * p, |i, j| {
        if j < p {
            b.singular_values[j] * b.left[(i, j)]
        } else {
            -a.singular_values[j - p] * a.left[(i, j - p)]
        }
    });
    let r = Mat::<f64>::from_fn(a.cols(), 2 * p, |i, j| {
        if j < p {
            b.right[(i, j)]
        } else {
            a.right[(i, j - p)]
        }
    });
    let rl = l.qr().thin_R().to_owned();
    let rr = r.qr().thin_R().to_owned();
    let core = &rl * rr.transpose();
    let s = core
        .singular_values()
        .map_err(|e| Error::Backend(format!("singular values: {e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// Eigen decomposition of a symmetric matrix with eigenvalues sorted in
/// nonincreasing order, `lambda_1 >= ... >= lambda_n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetricEigen {
    values: Vec<f64>,
    vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    /// Eigenvector for the `i`-th largest eigenvalue, 1-based.
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number `k` of positive eigenvalues among the `p` of largest magnitude.
    /// The `p` largest-magnitude eigenvalues are `lambda_1..lambda_k` together
    /// with `lambda_{n-(p-k)+1}..lambda_n`.
    pub fn positive_count_in_top(&self, p: usize) -> usize {
        positive_count_in_top(&self.values, p)
    }

    /// Indices (0-based, into `values`) of the `p` largest-magnitude eigenvalues.
    pub fn top_magnitude_indices(&self, p: usize) -> Vec<usize> {
        let n = self.values.len();
        let k = self.positive_count_in_top(p);
        (0..k).chain(n - (p - k)..n).collect()
    }
}

/// Number of positive entries among the `p` largest-magnitude values of a
/// nonincreasing list.
pub fn positive_count_in_top(values: &[f64], p: usize) -> usize {
    let n = values.len();
    let (mut lo, mut hi) = (0usize, n);
    let mut k = 0;
    for _ in 0..p.min(n) {
        let top = values[lo];
        let bottom = values[hi - 1];
        if top > 0.0 && top >= bottom.abs() {
            k += 1;
            lo += 1;
        } else {
            hi -= 1;
        }
    }
    k
}

pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::Shape(format!("symmetric eigen of {:?}", a.shape())));
    }
    if !a.is_symmetric_within(1e-12 * a.max_abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidMatrix("matrix is not symmetric".into()));
    }
    let dec = a
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Backend(format!("eigen: {e:?}")))?;
    let n = a.rows();
    let s = dec.S().column_vector();
    let mut u = Mat::<f64>::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, src) in (0..n).rev().enumerate() {
        values.push(s[src]);
        let flip = leading_sign(dec.U().col(src).iter().copied());
        for i in 0..n {
            u[(i, dst)] = flip * dec.U()[(i, src)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors: DenseMatrix::from_faer(u.as_ref()),
    })
}

/// Gap quantities at truncation level `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub p: usize,
    /// `sigma_p - sigma_{p+1}`.
    pub delta_p: f64,
    /// Symmetric gap around the `p` largest-magnitude eigenvalues, when the
    /// matrix is symmetric.
    pub delta_s: Option<f64>,
}

/// `delta_p = sigma_p - sigma_{p+1}`, with `sigma_{k+1} = 0` past the end.
pub fn delta_p(dec: &SpectralDecomposition, p: usize) -> Result<f64> {
    if p == 0 || p > dec.len() {
        return Err(Error::Index(format!("p = {p} outside 1..={}", dec.len())));
    }
    Ok(dec.sigma(p) - dec.sigma(p + 1))
}

/// `min(lambda_k - lambda_{k+1}, lambda_{n-(p-k)} - lambda_{n-(p-k)+1})` where `k`
/// counts positive eigenvalues among the `p` largest in magnitude; the first
/// term is dropped when `k = 0` and the second when `k = p`.
pub fn symmetric_gap(eig: &SymmetricEigen, p: usize) -> Result<f64> {
    let n = eig.len();
    if p == 0 || p >= n {
        return Err(Error::Index(format!("p = {p} outside 1..{n}")));
    }
    let l = &eig.values;
    let k = eig.positive_count_in_top(p);
    let mut gap = f64::INFINITY;
    if k > 0 {
        gap = gap.min(l[k - 1] - l[k]);
    }
    if k < p {
        let j = n - (p - k);
        gap = gap.min(l[j - 1] - l[j]);
    }
    Ok(gap)
}

pub fn gaps(dec: &SpectralDecomposition, eig: Option<&SymmetricEigen>, p: usize) -> Result<GapReport> {
    Ok(GapReport {
        p,
        delta_p: delta_p(dec, p)?,
        delta_s: eig.map(|e| symmetric_gap(e, p)).transpose()?,
    })
}

/// `sum_{i<=p} sigma_i^2 / sum_i sigma_i^2`.
pub fn energy_fraction(dec: &SpectralDecomposition, p: usize) -> Result<f64> {
    let total: f64 = dec.singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if p > dec.len() {
        return Err(Error::Index(format!("p = {p} exceeds {}", dec.len())));
    }
    Ok(dec.singular_values[..p].iter().map(|s| s * s).sum::<f64>() / total)
}

/// Hermitian dilation `[[0, A], [A^T, 0]]`, whose eigenvalues are `+-sigma_i(A)`
/// padded with zeros.
pub fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    DenseMatrix::from_fn(m + n, m + n, |i, j| {
        if i < m && j >= m {
            a[(i, j - m)]
        } else if i >= m && j < m {
            a[(j, i - m)]
        } else {
            0.0
        }
    })
}

/// Largest deviation `max_i |sigma_i(A + E) - sigma_i(A)|` alongside `||E||`.
/// Weyl's inequality says the first never exceeds the second.
pub fn weyl_check(a: &DenseMatrix, e: &DenseMatrix) -> Result<(f64, f64)> {
    let sa = singular_values(a)?;
    let sb = singular_values(&a.add(e)?)?;
    let dev = sa.iter().zip(&sb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok((dev, spectral_norm(e)?))
}

fn leading_sign(it: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for v in it {
        if v.abs() > best {
            best = v.abs();
            sign = if v < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

fn negate_col(m: &mut Mat<f64>, j: usize) {
    for i in 0..m.nrows() {
        m[(i, j)] = -m[(i, j)];
    }
}
