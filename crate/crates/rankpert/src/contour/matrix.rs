use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate, QuadratureSpec};
use super::ContourPath;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::skewness::compute_skewness;
use crate::spectral::{rank_p_approx, spectral_norm, svd, symmetric_eigen, SymmetricEigen};

fn complexify(a: &DenseMatrix) -> Mat<C64> {
    Mat::from_fn(a.rows(), a.cols(), |i, j| C64::new(a[(i, j)], 0.0))
}

fn real_part(m: &Mat<C64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

/// Spectral norm of a complex matrix.
fn op_norm(m: &Mat<C64>) -> Result<f64> {
    let s = m
        .as_ref()
        .singular_values()
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// `(zI - A)^{-1}` by a dense LU solve.
fn resolvent(a: &Mat<C64>, z: C64) -> Mat<C64> {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| if i == j { z - a[(i, j)] } else { -a[(i, j)] });
    shifted.partial_piv_lu().inverse()
}

fn checked_eigen(a: &DenseMatrix, path: &ContourPath) -> Result<SymmetricEigen> {
    let eig = symmetric_eigen(a)?;
    let clearance = path.natural_clearance(eig.values()).unwrap_or(0.0);
    path.check_clearance(eig.values(), clearance)?;
    Ok(eig)
}

/// `(1/2 pi i) \oint z (zI - A)^{-1} dz`: the enclosed part `sum lambda_i u_i u_i^T`.
pub fn resolvent_projection(a: &DenseMatrix, path: &ContourPath, q: &QuadratureSpec) -> Result<DenseMatrix> {
    checked_eigen(a, path)?;
    let ac = complexify(a);
    let m: Mat<C64> = integrate(path, q, |z| {
        let mut r = resolvent(&ac, z);
        r *= faer::Scale(z);
        Ok(r)
    })?;
    Ok(real_part(&m))
}

/// `(1/2 pi i) \oint (zI - A)^{-1} dz`: the orthogonal projector onto the
/// enclosed eigenvectors.
pub fn resolvent_projector(a: &DenseMatrix, path: &ContourPath, q: &QuadratureSpec) -> Result<DenseMatrix> {
    checked_eigen(a, path)?;
    let ac = complexify(a);
    let m: Mat<C64> = integrate(path, q, |z| Ok(resolvent(&ac, z)))?;
    Ok(real_part(&m))
}

/// Numeric terms of `tilde A_p - A_p = sum_s F_s`, with
/// `F_s = (1/2 pi i) \oint z R [E R]^s dz` and `R = (zI - A)^{-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FSeriesReport {
    pub p: usize,
    pub r: usize,
    pub norm_e: f64,
    pub sigma_p: f64,
    pub delta_p: f64,
    pub x: f64,
    /// `||F_s||` for `s = 1..=S`.
    pub term_norms: Vec<f64>,
    /// `||tilde A_p - A_p - sum_{s<=S} F_s||` for `S = 0..=S_max`.
    pub residuals: Vec<f64>,
    /// `2||E|| + 3 sqrt(p r) lambda_p x / delta_p`.
    pub f1_bound: f64,
}

impl FSeriesReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("residuals start at S = 0")
    }

    pub fn f1_within_bound(&self) -> bool {
        self.term_norms.first().is_none_or(|&f| f <= self.f1_bound * (1.0 + 1e-9))
    }
}

/// Integrates `z R (E R)^s` for `s = 0..=s_max` at every node at once.
fn series_terms(a: &Mat<C64>, e: &Mat<C64>, s_max: usize, path: &ContourPath, q: &QuadratureSpec) -> Result<Vec<Mat<C64>>> {
    integrate(path, q, |z| {
        let r = resolvent(a, z);
        let er = e * &r;
        let mut cur = &r * faer::Scale(z);
        let mut out = Vec::with_capacity(s_max + 1);
        for _ in 0..s_max {
            let next = &cur * &er;
            out.push(cur);
            cur = next;
        }
        out.push(cur);
        Ok(out)
    })
}

/// Computes `F_1..F_{s_max}` by quadrature and compares their partial sums
/// with `tilde A_p - A_p` from the singular value decomposition. `r` defaults
/// to the numerical rank of `A`.
pub fn f_series_check(
    a: &DenseMatrix,
    e: &DenseMatrix,
    p: usize,
    s_max: usize,
    r: Option<usize>,
    path: &ContourPath,
    q: &QuadratureSpec,
) -> Result<FSeriesReport> {
    if !e.is_symmetric_within(1e-12 * e.max_abs().max(1.0)) {
        return Err(Error::InvalidMatrix("perturbation must be symmetric".into()));
    }
    if e.shape() != a.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", e.shape(), a.shape())));
    }
    checked_eigen(a, path)?;
    let dec = svd(a, None)?;
    let r = r.unwrap_or(dec.numerical_rank()).max(p);
    let skew = compute_skewness(&dec, e, r)?;
    let norm_e = spectral_norm(e)?;
    let sigma_p = dec.sigma(p);
    let delta_p = sigma_p - dec.sigma(p + 1);
    let a_tilde = a.add(e)?;
    let diff = rank_p_approx(&svd(&a_tilde, None)?, p)?.sub(&rank_p_approx(&dec, p)?)?;

    let terms = series_terms(&complexify(a), &complexify(e), s_max, path, q)?;
    let mut term_norms = Vec::with_capacity(s_max);
    let mut residuals = vec![spectral_norm(&diff)?];
    let mut partial = complexify(&diff);
    let mut rising = 0;
    for f in &terms[1..] {
        let nf = op_norm(f)?;
        if term_norms.last().is_some_and(|&prev| nf > prev) {
            rising += 1;
        } else {
            rising = 0;
        }
        term_norms.push(nf);
        if rising >= 3 {
            return Err(Error::SeriesDiverging(term_norms));
        }
        partial -= f;
        residuals.push(op_norm(&partial)?);
    }
    Ok(FSeriesReport {
        p,
        r,
        norm_e,
        sigma_p,
        delta_p,
        x: skew.x,
        term_norms,
        residuals,
        f1_bound: 2.0 * norm_e + 3.0 * ((p * r) as f64).sqrt() * sigma_p * skew.x / delta_p,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    P,
    Q,
}

/// Block lengths `(alpha; beta)` of a P/Q word: `alpha` counts the Q-blocks
/// (first and last may be empty), `beta` the P-blocks between them.
pub fn word_blocks(word: &[Slot]) -> (Vec<usize>, Vec<usize>) {
    let mut alpha = vec![0];
    let mut beta = Vec::new();
    let mut prev = Slot::Q;
    for &w in word {
        match (prev, w) {
            (Slot::Q, Slot::Q) => *alpha.last_mut().unwrap() += 1,
            (Slot::P, Slot::P) => *beta.last_mut().unwrap() += 1,
            (Slot::Q, Slot::P) => beta.push(1),
            (Slot::P, Slot::Q) => alpha.push(1),
        }
        prev = w;
    }
    if prev == Slot::P {
        alpha.push(0);
    }
    (alpha, beta)
}

/// Right side of the per-term bound on `||(1/2 pi i) \oint M(alpha; beta)|| / lambda_p`.
#[allow(clippy::too_many_arguments)]
pub fn mab_lemma_bound(s: usize, p: usize, r: usize, norm_e: f64, lambda_p: f64, delta_p: f64, x: f64, y: f64) -> f64 {
    let (rf, pf, si) = (r as f64, p as f64, s as i32);
    let first = 2.0 / 4f64.powi(si) * (norm_e / lambda_p + rf * x / delta_p);
    let pre = rf * (rf * y + rf * rf * x * x) / (lambda_p * delta_p);
    let middle = if pre == 0.0 {
        0.0
    } else {
        pre * (rf.sqrt() * norm_e / (lambda_p * delta_p).sqrt()).powi(si - 2)
    };
    first + middle + pf * (2.0 * norm_e / lambda_p).powi(si)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MabTerm {
    pub s: usize,
    pub word: String,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    /// `||(1/2 pi i) \oint M(alpha; beta)||`.
    pub norm: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MabReport {
    pub p: usize,
    pub r: usize,
    pub norm_e: f64,
    pub lambda_p: f64,
    pub delta_p: f64,
    pub x: f64,
    pub y: f64,
    pub terms: Vec<MabTerm>,
    /// `||sum_words \oint M - F_s||` for `s = 1..=s_max`.
    pub sum_residuals: Vec<f64>,
    /// `||F_s||` from the resolvent directly.
    pub f_norms: Vec<f64>,
}

impl MabReport {
    pub fn all_within_bound(&self) -> bool {
        self.terms.iter().all(|t| t.pass)
    }

    pub fn term(&self, word: &str) -> Option<&MabTerm> {
        self.terms.iter().find(|t| t.word == word)
    }

    pub fn ensure_clean(&self) -> Result<()> {
        match self.terms.iter().find(|t| !t.pass) {
            Some(t) => Err(Error::LemmaViolation(format!(
                "word {} (alpha {:?}, beta {:?}): ratio {:e} exceeds {:e}",
                t.word, t.alpha, t.beta, t.ratio, t.bound
            ))),
            None => Ok(()),
        }
    }
}

pub const MAB_MAX_ORDER: usize = 4;
pub const MAB_MAX_DIM: usize = 16;

/// Splits the resolvent of a PSD matrix `A` of rank `r` as `P + Q` with
/// `P = sum_{i<=r} u_i u_i^T/(z - lambda_i)` and `Q = (I - sum_{i<=r} u_i u_i^T)/z`,
/// integrates every word `z X_1 E X_2 ... E X_{s+1}` for `s <= s_max`, and
/// checks both the per-word bound and that the words sum to `F_s`.
pub fn m_alpha_beta_check(
    a: &DenseMatrix,
    e: &DenseMatrix,
    p: usize,
    s_max: usize,
    path: &ContourPath,
    q: &QuadratureSpec,
) -> Result<MabReport> {
    let n = a.rows();
    if s_max == 0 || s_max > MAB_MAX_ORDER || n > MAB_MAX_DIM {
        return Err(Error::InvalidSpec(format!(
            "need 1 <= s <= {MAB_MAX_ORDER} and n <= {MAB_MAX_DIM}, got s = {s_max}, n = {n}"
        )));
    }
    if e.shape() != a.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", e.shape(), a.shape())));
    }
    let eig = checked_eigen(a, path)?;
    let vals = eig.values();
    if vals.iter().any(|&v| v < -1e-12 * vals[0].abs().max(1.0)) {
        return Err(Error::InvalidMatrix("matrix must be positive semidefinite".into()));
    }
    let dec = svd(a, None)?;
    let r = dec.numerical_rank();
    if p == 0 || p > r {
        return Err(Error::Index(format!("p = {p} outside 1..={r}")));
    }
    let skew = compute_skewness(&dec, e, r)?;
    let norm_e = spectral_norm(e)?;
    let lambda_p = dec.sigma(p);
    let delta_p = lambda_p - dec.sigma(p + 1);

    let us: Vec<Vec<f64>> = (1..=r).map(|i| eig.vector(i)).collect();
    let lams: Vec<f64> = vals[..r].to_vec();
    let outer: Vec<Mat<C64>> = us
        .iter()
        .map(|u| Mat::from_fn(n, n, |i, j| C64::new(u[i] * u[j], 0.0)))
        .collect();
    let mut perp = Mat::<C64>::identity(n, n);
    for o in &outer {
        perp -= o;
    }
    let ac = complexify(a);
    let ec = complexify(e);

    // Layout per node: prefixes of length 1..=s_max+1 in lexicographic P<Q
    // order, followed by the direct terms z R (E R)^s for s = 1..=s_max.
    let values: Vec<Mat<C64>> = integrate(path, q, |z| {
        let mut pm = Mat::<C64>::zeros(n, n);
        for (o, &l) in outer.iter().zip(&lams) {
            pm += o * faer::Scale(C64::new(1.0, 0.0) / (z - l));
        }
        let qm = &perp * faer::Scale(C64::new(1.0, 0.0) / z);
        let ep = &ec * &pm;
        let eq = &ec * &qm;
        let mut out = Vec::new();
        let mut level = vec![&pm * faer::Scale(z), &qm * faer::Scale(z)];
        for _ in 0..s_max {
            let next: Vec<Mat<C64>> = level.iter().flat_map(|w| [w * &ep, w * &eq]).collect();
            out.append(&mut level);
            level = next;
        }
        out.append(&mut level);
        let r = resolvent(&ac, z);
        let er = &ec * &r;
        let mut cur = &r * faer::Scale(z);
        for _ in 0..s_max {
            cur = &cur * &er;
            out.push(cur.clone());
        }
        Ok(out)
    })?;

    let mut terms = Vec::new();
    let mut sum_residuals = Vec::new();
    let mut f_norms = Vec::new();
    let mut offset = 2;
    let direct_start: usize = (1..=s_max + 1).map(|l| 1usize << l).sum();
    for s in 1..=s_max {
        let count = 1usize << (s + 1);
        let mut total = Mat::<C64>::zeros(n, n);
        for k in 0..count {
            let word: Vec<Slot> = (0..=s)
                .map(|b| if (k >> (s - b)) & 1 == 0 { Slot::P } else { Slot::Q })
                .collect();
            let m = &values[offset + k];
            total += m;
            let (alpha, beta) = word_blocks(&word);
            let norm = op_norm(m)?;
            let bound = mab_lemma_bound(s, p, r, norm_e, lambda_p, delta_p, skew.x, skew.y);
            let ratio = norm / lambda_p;
            terms.push(MabTerm {
                s,
                word: word.iter().map(|w| if *w == Slot::P { 'P' } else { 'Q' }).collect(),
                alpha,
                beta,
                norm,
                ratio,
                bound,
                pass: ratio <= bound * (1.0 + 1e-9) + q.tol / lambda_p,
            });
        }
        let direct = &values[direct_start + s - 1];
        f_norms.push(op_norm(direct)?);
        sum_residuals.push(op_norm(&(&total - direct))?);
        offset += count;
    }
    Ok(MabReport {
        p,
        r,
        norm_e,
        lambda_p,
        delta_p,
        x: skew.x,
        y: skew.y,
        terms,
        sum_residuals,
        f_norms,
    })
}
