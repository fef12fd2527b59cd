//! Numerical contour integration over rectangles around parts of a real
//! spectrum: scalar residue identities and bounds, the resolvent projection,
//! the perturbation series `F_s`, and its `M(alpha; beta)` decomposition.

mod matrix;
mod quadrature;
mod scalar;

pub use matrix::{
    f_series_check, m_alpha_beta_check, mab_lemma_bound, resolvent_projection, resolvent_projector, word_blocks,
    FSeriesReport, MabReport, MabTerm, Slot, MAB_MAX_DIM, MAB_MAX_ORDER,
};
pub use quadrature::{
    gauss_legendre, integrate, integrate_fixed, integrate_scalar, Integrand, QuadratureSpec, PANEL_ORDER,
};
pub use scalar::{
    lemma_prediction, lemma_sweep, scalar_lemma_bounds, verify_bound_lemmas, verify_scalar_lemmas, CheckKind,
    LemmaCheck, Numerator, QuadratureFailure, ScalarConfig, SweepOptions, SweepReport,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counterclockwise rectangle `[left, right] x [-half_height, half_height]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectContour {
    pub left: f64,
    pub right: f64,
    pub half_height: f64,
}

impl RectContour {
    pub fn new(left: f64, right: f64, half_height: f64) -> Result<Self> {
        if !(left < right && half_height > 0.0 && left.is_finite() && right.is_finite() && half_height.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "rectangle needs left < right and half_height > 0, got ({left}, {right}, {half_height})"
            )));
        }
        Ok(Self {
            left,
            right,
            half_height,
        })
    }

    /// Whether the real point `x` lies strictly inside.
    pub fn encloses(&self, x: f64) -> bool {
        self.left < x && x < self.right
    }

    /// Distance from the real point `x` to the boundary.
    pub fn distance_to(&self, x: f64) -> f64 {
        let dx = if x < self.left {
            self.left - x
        } else if x > self.right {
            x - self.right
        } else {
            0.0
        };
        if dx > 0.0 {
            dx
        } else {
            (x - self.left).min(self.right - x).min(self.half_height)
        }
    }

    /// Vertices in counterclockwise order starting bottom-left.
    pub fn vertices(&self) -> [C64; 4] {
        let h = self.half_height;
        [
            C64::new(self.left, -h),
            C64::new(self.right, -h),
            C64::new(self.right, h),
            C64::new(self.left, h),
        ]
    }

    pub fn with_half_height(self, half_height: f64) -> Result<Self> {
        Self::new(self.left, self.right, half_height)
    }

    pub fn with_right(self, right: f64) -> Result<Self> {
        Self::new(self.left, right, self.half_height)
    }
}

/// One rectangle, or two disjoint ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    rects: Vec<RectContour>,
}

impl ContourPath {
    pub fn single(rect: RectContour) -> Self {
        Self { rects: vec![rect] }
    }

    pub fn pair(a: RectContour, b: RectContour) -> Result<Self> {
        if !(a.right < b.left || b.right < a.left) {
            return Err(Error::InvalidSpec("rectangles overlap".into()));
        }
        Ok(Self { rects: vec![a, b] })
    }

    pub fn rects(&self) -> &[RectContour] {
        &self.rects
    }

    pub fn encloses(&self, x: f64) -> bool {
        self.rects.iter().any(|r| r.encloses(x))
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        self.rects.iter().map(|r| r.distance_to(x)).fold(f64::INFINITY, f64::min)
    }

    /// Fails when a pole lies closer than `clearance` to the path.
    pub fn check_clearance(&self, poles: &[f64], clearance: f64) -> Result<()> {
        for &pole in poles {
            let d = self.distance_to(pole);
            if d < clearance || d == 0.0 {
                return Err(Error::PoleClearance {
                    pole,
                    distance: d,
                    clearance,
                });
            }
        }
        Ok(())
    }

    /// A quarter of the smallest distance between an enclosed and an excluded
    /// point, or `None` when either set is empty.
    pub fn natural_clearance(&self, points: &[f64]) -> Option<f64> {
        let (inside, outside): (Vec<f64>, Vec<f64>) = points.iter().partition(|&&x| self.encloses(x));
        let sep = inside
            .iter()
            .flat_map(|a| outside.iter().map(move |b| (a - b).abs()))
            .fold(f64::INFINITY, f64::min);
        sep.is_finite().then_some(sep / 4.0)
    }
}

/// Rectangle around the `p` largest eigenvalues of a PSD matrix. `eigs` is
/// nonincreasing. The left edge bisects `(lambda_{p+1}, lambda_p)`, the right
/// edge sits at `||A|| + 1.1 norm_e`, and `half_height = right - left`.
/// `norm_e` acts as a budget: any value at least `||E||` keeps the top `p`
/// eigenvalues of `A + E` inside as well.
pub fn build_contour_psd(eigs: &[f64], p: usize, norm_e: f64) -> Result<RectContour> {
    if p == 0 || p > eigs.len() {
        return Err(Error::Index(format!("p = {p} outside 1..={}", eigs.len())));
    }
    let next = eigs.get(p).copied().unwrap_or(0.0);
    let gap = eigs[p - 1] - next;
    if gap <= 0.0 {
        return Err(Error::NoGap { p, delta: gap });
    }
    let left = 0.5 * (eigs[p - 1] + next);
    let norm_a = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let right = norm_a + 1.1 * norm_e;
    RectContour::new(left, right, right - left)
}

/// Contour around the `p` largest-magnitude eigenvalues of a symmetric matrix
/// (`eigs` nonincreasing). The positive ones sit in a rectangle whose left
/// edge is at `sigma_p - delta_p/2`; the negative ones in its mirror image.
/// Degenerate sign patterns give a single rectangle.
pub fn build_contour_symmetric(eigs: &[f64], p: usize, norm_e: f64) -> Result<ContourPath> {
    if p == 0 || p > eigs.len() {
        return Err(Error::Index(format!("p = {p} outside 1..={}", eigs.len())));
    }
    let mut mags: Vec<f64> = eigs.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let sp = mags[p - 1];
    let gap = sp - mags.get(p).copied().unwrap_or(0.0);
    if gap <= 0.0 {
        return Err(Error::NoGap { p, delta: gap });
    }
    let k = crate::spectral::positive_count_in_top(eigs, p);
    let inner = sp - gap / 2.0;
    let outer = mags[0] + 1.1 * norm_e;
    let pos = RectContour::new(inner, outer, outer - inner)?;
    let neg = RectContour::new(-outer, -inner, outer - inner)?;
    match (k > 0, k < p) {
        (true, true) => ContourPath::pair(neg, pos),
        (true, false) => Ok(ContourPath::single(pos)),
        _ => Ok(ContourPath::single(neg)),
    }
}
