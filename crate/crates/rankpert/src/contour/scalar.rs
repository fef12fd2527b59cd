use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_scalar, QuadratureSpec};
use super::{ContourPath, RectContour};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numerator {
    One,
    Z,
}

/// The rational function `num(z) / prod_i (z - a_i)^{t_i}` with distinct real poles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarConfig {
    pub poles: Vec<f64>,
    pub exponents: Vec<u32>,
    pub numerator: Numerator,
}

impl ScalarConfig {
    pub fn new(poles: Vec<f64>, exponents: Vec<u32>, numerator: Numerator) -> Result<Self> {
        if poles.len() != exponents.len() || poles.is_empty() {
            return Err(Error::InvalidSpec("need one exponent per pole and at least one pole".into()));
        }
        for (i, a) in poles.iter().enumerate() {
            if !a.is_finite() || poles[..i].contains(a) {
                return Err(Error::InvalidSpec(format!("poles must be finite and distinct, got {poles:?}")));
            }
        }
        Ok(Self {
            poles,
            exponents,
            numerator,
        })
    }

    /// `s = sum_i t_i`.
    pub fn total_exponent(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, z: C64) -> C64 {
        let mut den = C64::new(1.0, 0.0);
        for (&a, &t) in self.poles.iter().zip(&self.exponents) {
            den *= (z - a).powu(t);
        }
        self.numerator_at(z) / den
    }

    fn numerator_at(&self, z: C64) -> C64 {
        match self.numerator {
            Numerator::One => C64::new(1.0, 0.0),
            Numerator::Z => z,
        }
    }

    fn active(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.poles.iter().copied().zip(self.exponents.iter().copied()).filter(|&(_, t)| t > 0)
    }
}

/// Exact value of `(1/2 pi i) \oint f dz` in the cases covered by the closed
/// forms: no pole inside, every pole inside, or a single simple pole inside.
pub fn lemma_prediction(cfg: &ScalarConfig, path: &ContourPath) -> Option<f64> {
    let (inside, outside): (Vec<(f64, u32)>, Vec<(f64, u32)>) = cfg.active().partition(|&(a, _)| path.encloses(a));
    if inside.is_empty() {
        return Some(0.0);
    }
    let s: u32 = inside.iter().map(|p| p.1).sum();
    if outside.is_empty() {
        return Some(match (cfg.numerator, s) {
            (Numerator::One, 1) => 1.0,
            (Numerator::One, _) => 0.0,
            (Numerator::Z, 1) => inside[0].0,
            (Numerator::Z, 2) => 1.0,
            (Numerator::Z, _) => 0.0,
        });
    }
    if let [(a, 1)] = inside[..] {
        let num = match cfg.numerator {
            Numerator::One => 1.0,
            Numerator::Z => a,
        };
        return Some(num / outside.iter().map(|&(b, t)| (a - b).powi(t as i32)).product::<f64>());
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Closed-form value.
    Exact,
    /// `|I| <= 2^{s-1} / (lambda^t delta^{s-t-1})` for `f = 1/prod`.
    ReciprocalBound,
    /// `|I| = |a_1/(a_1-a_m)^t| <= 1/lambda^{t-1} + |a_m|/lambda^t` when `s = t+1`.
    LinearSimple,
    /// `|I| <= 2^s (1/(lambda^t delta^{s-t-2}) + |a'|/(lambda^t delta^{s-t-1}))` when `s >= t+2`.
    LinearBound,
}

/// One comparison of a numeric integral against a closed form or a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub config: ScalarConfig,
    pub contour: Vec<RectContour>,
    pub kind: CheckKind,
    pub numeric_re: f64,
    pub numeric_im: f64,
    /// Exact value for `Exact`, upper bound otherwise.
    pub predicted: f64,
    /// The outside point playing the role of `a_m`.
    pub anchor: Option<f64>,
    /// The outside point whose modulus enters the linear-numerator bound.
    pub pivot: Option<f64>,
    pub pass: bool,
}

impl LemmaCheck {
    pub fn numeric(&self) -> C64 {
        C64::new(self.numeric_re, self.numeric_im)
    }
}

/// Bounds that apply to `cfg` on `path`, as `(kind, bound, anchor, pivot)`.
/// Empty unless both the enclosed and the excluded set are nonempty.
pub fn scalar_lemma_bounds(cfg: &ScalarConfig, path: &ContourPath) -> Vec<(CheckKind, f64, Option<f64>, Option<f64>)> {
    let pts: Vec<(f64, u32)> = cfg.poles.iter().copied().zip(cfg.exponents.iter().copied()).collect();
    let (xs, ys): (Vec<(f64, u32)>, Vec<(f64, u32)>) = pts.iter().partition(|&&(a, _)| path.encloses(a));
    if xs.is_empty() || ys.is_empty() {
        return Vec::new();
    }
    let s = cfg.total_exponent() as i32;
    let delta = xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| (x.0 - y.0).abs()))
        .fold(f64::INFINITY, f64::min);
    let mut out = Vec::new();
    for (m, &(am, t)) in ys.iter().enumerate() {
        let t = t as i32;
        let lambda = xs.iter().map(|x| (x.0 - am).abs()).fold(f64::INFINITY, f64::min);
        match cfg.numerator {
            Numerator::One => {
                let b = 2f64.powi(s - 1) / (lambda.powi(t) * delta.powi(s - t - 1));
                out.push((CheckKind::ReciprocalBound, b, Some(am), None));
            }
            Numerator::Z => {
                let others_positive = pts.iter().all(|&(a, ta)| a == am || ta >= 1);
                if !others_positive {
                    continue;
                }
                if s == t + 1 {
                    let b = 1.0 / lambda.powi(t - 1) + am.abs() / lambda.powi(t);
                    out.push((CheckKind::LinearSimple, b, Some(am), None));
                } else {
                    let pivots: Vec<f64> = if ys.len() >= 2 {
                        ys.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, y)| y.0).collect()
                    } else {
                        vec![am]
                    };
                    for piv in pivots {
                        let b = 2f64.powi(s)
                            * (1.0 / (lambda.powi(t) * delta.powi(s - t - 2))
                                + piv.abs() / (lambda.powi(t) * delta.powi(s - t - 1)));
                        out.push((CheckKind::LinearBound, b, Some(am), Some(piv)));
                    }
                }
            }
        }
    }
    out
}

fn integral(cfg: &ScalarConfig, path: &ContourPath, q: &QuadratureSpec) -> Result<C64> {
    let spacing = cfg
        .poles
        .iter()
        .enumerate()
        .flat_map(|(i, a)| cfg.poles[i + 1..].iter().map(move |b| (a - b).abs()))
        .fold(f64::INFINITY, f64::min);
    let clearance = path.natural_clearance(&cfg.poles).unwrap_or(0.0).min(spacing.min(1.0) / 4.0);
    path.check_clearance(&cfg.poles, clearance)?;
    integrate_scalar(path, q, |z| cfg.eval(z))
}

fn make_check(
    cfg: &ScalarConfig,
    path: &ContourPath,
    value: C64,
    kind: CheckKind,
    predicted: f64,
    anchor: Option<f64>,
    pivot: Option<f64>,
    match_tol: f64,
) -> LemmaCheck {
    let pass = match kind {
        CheckKind::Exact => (value - predicted).norm() <= match_tol,
        _ => value.norm() <= predicted + match_tol,
    };
    LemmaCheck {
        config: cfg.clone(),
        contour: path.rects().to_vec(),
        kind,
        numeric_re: value.re,
        numeric_im: value.im,
        predicted,
        anchor,
        pivot,
        pass,
    }
}

fn exact_checks(cfg: &ScalarConfig, path: &ContourPath, value: C64, match_tol: f64) -> Vec<LemmaCheck> {
    lemma_prediction(cfg, path)
        .map(|v| make_check(cfg, path, value, CheckKind::Exact, v, None, None, match_tol))
        .into_iter()
        .collect()
}

fn bound_checks(cfg: &ScalarConfig, path: &ContourPath, value: C64, match_tol: f64) -> Vec<LemmaCheck> {
    scalar_lemma_bounds(cfg, path)
        .into_iter()
        .map(|(kind, b, anchor, pivot)| make_check(cfg, path, value, kind, b, anchor, pivot, match_tol))
        .collect()
}

/// Integrates `cfg` over `path` and compares against the closed-form value,
/// when one applies.
pub fn verify_scalar_lemmas(
    cfg: &ScalarConfig,
    path: &ContourPath,
    q: &QuadratureSpec,
    match_tol: f64,
) -> Result<Vec<LemmaCheck>> {
    let v = integral(cfg, path, q)?;
    Ok(exact_checks(cfg, path, v, match_tol))
}

/// Integrates `cfg` over `path` and checks every applicable bound.
pub fn verify_bound_lemmas(
    cfg: &ScalarConfig,
    path: &ContourPath,
    q: &QuadratureSpec,
    match_tol: f64,
) -> Result<Vec<LemmaCheck>> {
    let v = integral(cfg, path, q)?;
    Ok(bound_checks(cfg, path, v, match_tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub pole_set: Vec<f64>,
    /// Largest number of poles per configuration.
    pub max_poles: usize,
    /// Largest `sum_i t_i`.
    pub max_total: u32,
    pub quadrature: QuadratureSpec,
    pub match_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            pole_set: vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 5.0],
            max_poles: 4,
            max_total: 6,
            quadrature: QuadratureSpec::with_tol(1e-11),
            match_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureFailure {
    pub config: ScalarConfig,
    pub contour: Vec<RectContour>,
    pub message: String,
    /// Set when the failure was non-convergence: `(last_change, tol, nodes_per_edge)`.
    pub nonconvergence: Option<(f64, f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub configurations: usize,
    pub checks: Vec<LemmaCheck>,
    /// Nonempty when some integral failed to converge; the sweep stops
    /// scheduling new work after the first failure.
    pub quadrature_failures: Vec<QuadratureFailure>,
}

impl SweepReport {
    pub fn violations(&self) -> impl Iterator<Item = &LemmaCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn count(&self, kind: CheckKind) -> usize {
        self.checks.iter().filter(|c| c.kind == kind).count()
    }

    pub fn passed(&self) -> bool {
        self.quadrature_failures.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn ensure_clean(&self) -> Result<()> {
        if let Some(f) = self.quadrature_failures.first() {
            return Err(match f.nonconvergence {
                Some((last_change, tol, nodes_per_edge)) => Error::QuadratureFail {
                    last_change,
                    tol,
                    nodes_per_edge,
                },
                None => Error::InvalidSpec(format!("integral failed: {}", f.message)),
            });
        }
        match self.violations().next() {
            Some(c) => Err(Error::LemmaViolation(format!(
                "{:?} on poles {:?} exponents {:?} numerator {:?}: |I| = {:e}, predicted {:e}",
                c.kind,
                c.config.poles,
                c.config.exponents,
                c.config.numerator,
                c.numeric().norm(),
                c.predicted
            ))),
            None => Ok(()),
        }
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn exponent_vectors(len: usize, max_total: u32) -> Vec<Vec<u32>> {
    fn go(len: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            if cur.iter().sum::<u32>() >= 1 {
                out.push(cur.clone());
            }
            return;
        }
        for t in 0..=budget {
            cur.push(t);
            go(len, budget - t, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(len, max_total, &mut Vec::new(), &mut out);
    out
}

/// Rectangles enclosing each contiguous run of the sorted points, plus one
/// enclosing none of them. Vertical edges sit halfway between neighbours, or
/// half the smallest spacing (at most one unit) beyond the extremes.
fn interval_contours(sorted: &[f64]) -> Vec<ContourPath> {
    let n = sorted.len();
    let pad = sorted.windows(2).map(|w| 0.5 * (w[1] - w[0])).fold(1.0, f64::min);
    let lo_edge = |i: usize| if i == 0 { sorted[0] - pad } else { 0.5 * (sorted[i - 1] + sorted[i]) };
    let hi_edge = |j: usize| if j + 1 == n { sorted[n - 1] + pad } else { 0.5 * (sorted[j] + sorted[j + 1]) };
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let (l, r) = (lo_edge(i), hi_edge(j));
            out.push(ContourPath::single(RectContour { left: l, right: r, half_height: r - l }));
        }
    }
    let r = sorted[0] - pad;
    let l = r - 1.0;
    out.push(ContourPath::single(RectContour { left: l, right: r, half_height: 1.0 }));
    out
}

/// Exhaustive sweep over pole subsets, exponent profiles, contours and both
/// numerators. Every configuration gets its exact-value and bound checks.
pub fn lemma_sweep(opts: &SweepOptions) -> Result<SweepReport> {
    opts.quadrature.validate()?;
    let mut set = opts.pole_set.clone();
    set.sort_by(f64::total_cmp);
    set.dedup();
    let mut jobs: Vec<(ScalarConfig, ContourPath)> = Vec::new();
    for k in 1..=opts.max_poles.min(set.len()) {
        let profiles = exponent_vectors(k, opts.max_total);
        for idx in subsets(set.len(), k) {
            let poles: Vec<f64> = idx.iter().map(|&i| set[i]).collect();
            let paths = interval_contours(&poles);
            for t in &profiles {
                for num in [Numerator::One, Numerator::Z] {
                    let cfg = ScalarConfig::new(poles.clone(), t.clone(), num)?;
                    for path in &paths {
                        jobs.push((cfg.clone(), path.clone()));
                    }
                }
            }
        }
    }
    let stop = AtomicBool::new(false);
    let results: Vec<Option<std::result::Result<Vec<LemmaCheck>, QuadratureFailure>>> = jobs
        .par_iter()
        .map(|(cfg, path)| {
            if stop.load(Ordering::Relaxed) {
                return None;
            }
            match integral(cfg, path, &opts.quadrature) {
                Ok(v) => {
                    let mut checks = exact_checks(cfg, path, v, opts.match_tol);
                    checks.extend(bound_checks(cfg, path, v, opts.match_tol));
                    Some(Ok(checks))
                }
                Err(e) => {
                    stop.store(true, Ordering::Relaxed);
                    Some(Err(QuadratureFailure {
                        config: cfg.clone(),
                        contour: path.rects().to_vec(),
                        message: e.to_string(),
                        nonconvergence: match e {
                            Error::QuadratureFail {
                                last_change,
                                tol,
                                nodes_per_edge,
                            } => Some((last_change, tol, nodes_per_edge)),
                            _ => None,
                        },
                    }))
                }
            }
        })
        .collect();
    let mut report = SweepReport {
        configurations: jobs.len(),
        checks: Vec::new(),
        quadrature_failures: Vec::new(),
    };
    for r in results.into_iter().flatten() {
        match r {
            Ok(c) => report.checks.extend(c),
            Err(f) => report.quadrature_failures.push(f),
        }
    }
    Ok(report)
}
