//! Perturbation bounds for `||A~_p - A_p||`: the classical baselines, the
//! skewness-based deterministic bounds behind their smallness gates, and the
//! random-noise variants with failure probabilities.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::skewness::compute_skewness;
use crate::spectral::{self, delta_p, spectral_norm, svd, symmetric_eigen, symmetric_gap};

/// Gate threshold for the general (rectangular) bound.
pub const GENERAL_THRESHOLD: f64 = 1.0 / 96.0;
/// Gate threshold for the symmetric and PSD bounds.
pub const SYMMETRIC_THRESHOLD: f64 = 1.0 / 24.0;
pub const GENERAL_CONSTANT: f64 = 32.0;
pub const SYMMETRIC_CONSTANT: f64 = 8.0;

/// `2 (sigma_{p+1} + ||E||)`, valid for every perturbation.
pub fn eym_bound(sigma_p1: f64, norm_e: f64) -> f64 {
    2.0 * (sigma_p1 + norm_e)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DkBounds {
    /// `2 ||E|| / delta_p`, a bound on the distance between the rank-p projections.
    pub projection: Option<f64>,
    /// `4 ||E|| sigma_1 / delta_p`.
    pub lowrank: Option<f64>,
}

/// Davis-Kahan style bounds; both are absent unless `delta_p >= 2 ||E||`.
pub fn dk_bounds(sigma_1: f64, delta_p: f64, norm_e: f64) -> Result<DkBounds> {
    if delta_p <= 0.0 {
        return Err(Error::NoGap { p: 0, delta: delta_p });
    }
    if delta_p < 2.0 * norm_e {
        return Ok(DkBounds {
            projection: None,
            lowrank: None,
        });
    }
    Ok(DkBounds {
        projection: Some(2.0 * norm_e / delta_p),
        lowrank: Some(4.0 * norm_e * sigma_1 / delta_p),
    })
}

/// Left-hand side of a smallness gate and whether it cleared the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub lhs: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl GateCheck {
    fn new(lhs: f64, threshold: f64) -> Self {
        Self {
            lhs,
            threshold,
            pass: lhs <= threshold,
        }
    }
}

fn positive(sigma_p: f64, delta: f64) -> Result<()> {
    if delta <= 0.0 || sigma_p <= 0.0 {
        return Err(Error::NoGap { p: 0, delta: delta.min(sigma_p) });
    }
    Ok(())
}

/// `max{ p ||E|| / sigma_p, r^2 x / delta, sqrt(r) ||E|| / sqrt(sigma_p delta) }` against `threshold`.
pub fn main_assumption(
    p: usize,
    r: usize,
    norm_e: f64,
    sigma_p: f64,
    delta: f64,
    x: f64,
    threshold: f64,
) -> Result<GateCheck> {
    positive(sigma_p, delta)?;
    let (p, r) = (p as f64, r as f64);
    let lhs = (p * norm_e / sigma_p)
        .max(r * r * x / delta)
        .max(r.sqrt() * norm_e / (sigma_p * delta).sqrt());
    Ok(GateCheck::new(lhs, threshold))
}

/// `c sigma_p (||E||/sigma_p + r x/delta + r^2 y/(sigma_p delta))`, without any gate.
pub fn main_bound_formula(constant: f64, r: usize, norm_e: f64, sigma_p: f64, delta: f64, x: f64, y: f64) -> f64 {
    let r = r as f64;
    constant * (norm_e + r * x * sigma_p / delta + r * r * y / delta)
}

/// Which deterministic theorem to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Any `m x n` matrix: gate `1/96`, constant 32, gap `delta_p`.
    General,
    /// Positive semidefinite `A` with symmetric `E`: gate `1/24`, constant 8, gap `delta_p`.
    Psd,
    /// Symmetric `A` and `E`: gate `1/24` on `delta_p`, constant 8, bound with `delta_S`.
    Symmetric,
}

impl Theorem {
    pub fn threshold(self) -> f64 {
        match self {
            Theorem::General => GENERAL_THRESHOLD,
            Theorem::Psd | Theorem::Symmetric => SYMMETRIC_THRESHOLD,
        }
    }

    pub fn constant(self) -> f64 {
        match self {
            Theorem::General => GENERAL_CONSTANT,
            Theorem::Psd | Theorem::Symmetric => SYMMETRIC_CONSTANT,
        }
    }
}

/// Scalar inputs shared by the deterministic bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainInputs {
    pub p: usize,
    pub r: usize,
    pub norm_e: f64,
    pub sigma_p: f64,
    pub delta_p: f64,
    pub delta_s: Option<f64>,
    pub x: f64,
    pub y: f64,
}

/// Gate on `delta_p`, then evaluate the theorem's bound. The symmetric
/// theorem swaps in `delta_S` for the bound itself.
pub fn main_bound(inp: &MainInputs, theorem: Theorem) -> Result<f64> {
    let gate = main_assumption(inp.p, inp.r, inp.norm_e, inp.sigma_p, inp.delta_p, inp.x, theorem.threshold())?;
    if !gate.pass {
        return Err(Error::NotApplicable(format!(
            "gate lhs {:.4e} exceeds {:.4e}",
            gate.lhs, gate.threshold
        )));
    }
    let delta = match theorem {
        Theorem::Symmetric => {
            let ds = inp
                .delta_s
                .ok_or_else(|| Error::NotApplicable("symmetric gap delta_S not supplied".into()))?;
            if ds <= 0.0 {
                return Err(Error::NoGap { p: inp.p, delta: ds });
            }
            ds
        }
        _ => inp.delta_p,
    };
    Ok(main_bound_formula(theorem.constant(), inp.r, inp.norm_e, inp.sigma_p, delta, inp.x, inp.y))
}

pub fn symmetric_bound(inp: &MainInputs) -> Result<f64> {
    main_bound(inp, Theorem::Symmetric)
}

/// `max{ p eps1, r^2 t1 eps2, sqrt(r eta) }` against `1/96`, with `eps1 = ||E||/sigma_p`,
/// `eps2 = 1/delta_p` and `eta = ||E||^2/(sigma_p delta_p)`.
pub fn random_bound_c0(p: usize, r: usize, t1: f64, norm_e: f64, sigma_p: f64, delta_p: f64) -> Result<GateCheck> {
    positive(sigma_p, delta_p)?;
    let (p, r) = (p as f64, r as f64);
    let eps1 = norm_e / sigma_p;
    let eps2 = 1.0 / delta_p;
    let eta = norm_e * norm_e / (sigma_p * delta_p);
    let lhs = (p * eps1).max(r * r * t1 * eps2).max((r * eta).sqrt());
    Ok(GateCheck::new(lhs, GENERAL_THRESHOLD))
}

/// Noise model behind a random-noise bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RandomVariant {
    /// iid `K`-bounded entries with unit variance.
    IidK { k: f64, t1: f64, t2: f64, m4: f64 },
    /// Independent `(K, sigma)`-bounded entries with mean correction `mu`.
    ProfileKSigma { k: f64, sigma2: f64, t1: f64, t2: f64, mu: f64, m4: f64 },
    /// `(K, sigma)`-bounded entries, with `||E||^2` standing in for `y`.
    Trivial { k: f64, sigma2: f64, t1: f64 },
}

impl RandomVariant {
    pub fn t1(&self) -> f64 {
        match *self {
            RandomVariant::IidK { t1, .. } | RandomVariant::ProfileKSigma { t1, .. } | RandomVariant::Trivial { t1, .. } => t1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInputs {
    pub p: usize,
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub norm_e: f64,
    pub sigma_p: f64,
    pub delta_p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomBound {
    pub bound: f64,
    /// Upper bound on the probability that the bound fails, clamped to `[0, 1]`.
    pub fail_prob: f64,
    pub gate: GateCheck,
}

/// Evaluates one of the random-noise bounds after checking the C0 gate.
pub fn random_bound_theorems(variant: &RandomVariant, inp: &RandomInputs) -> Result<RandomBound> {
    let t1 = variant.t1();
    let gate = random_bound_c0(inp.p, inp.r, t1, inp.norm_e, inp.sigma_p, inp.delta_p)?;
    if !gate.pass {
        return Err(Error::NotApplicable(format!("C0 lhs {:.4e} exceeds 1/96", gate.lhs)));
    }
    let r = inp.r as f64;
    let base = inp.norm_e + r * t1 * inp.sigma_p / inp.delta_p;
    let pairs = 5.0 * r * (r - 1.0);
    let (bound, fail) = match *variant {
        RandomVariant::IidK { k, t2, m4, .. } => (
            32.0 * (base + r * r * t2 / inp.delta_p),
            r * r * (-(t1 * t1 / 2.0) / (4.0 + k * t1)).exp() + pairs * (inp.m + inp.n) as f64 * m4 / (t2 * t2),
        ),
        RandomVariant::ProfileKSigma { k, sigma2, t2, mu, m4, .. } => (
            32.0 * (base + r * r * (t2 + mu) / inp.delta_p),
            r * r * (-(t1 * t1 / 2.0) / (2.0 * sigma2 + k * t1)).exp() + pairs * inp.n as f64 * m4 / (2.0 * t2 * t2),
        ),
        RandomVariant::Trivial { k, sigma2, .. } => (
            32.0 * (base + r * r * inp.norm_e * inp.norm_e / inp.delta_p),
            r * r * (-(t1 * t1 / 2.0) / (2.0 * sigma2 + k * t1)).exp(),
        ),
    };
    Ok(RandomBound {
        bound,
        fail_prob: if fail.is_nan() { 1.0 } else { fail.clamp(0.0, 1.0) },
        gate,
    })
}

/// Smallest `t1` with `r^2 exp(-(t1^2/2)/(2 sigma^2 + K t1)) <= target`.
pub fn t1_for_failure(r: usize, k: f64, sigma2: f64, target: f64) -> f64 {
    let l = ((r * r) as f64 / target).ln().max(0.0);
    l * k + (l * l * k * k + 4.0 * l * sigma2).sqrt()
}

/// Terms of the sampling rate `sqrt(n/rho) + n/(rho delta_p) + sigma_p/(sqrt(rho) delta_p)`.
/// Diagnostic only; the constants are unspecified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingRate {
    pub sqrt_n_over_rho: f64,
    pub n_over_rho_delta: f64,
    pub sigma_over_sqrt_rho_delta: f64,
}

impl SamplingRate {
    pub fn total(&self) -> f64 {
        self.sqrt_n_over_rho + self.n_over_rho_delta + self.sigma_over_sqrt_rho_delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingBound {
    /// Certified bound from the trivial random-noise variant.
    pub certified: RandomBound,
    pub rate: SamplingRate,
}

/// Bound for the sampling perturbation `E = rho^{-1} A_Omega - A`. The certified
/// value is the trivial random-noise bound; the rate decomposition rides along.
pub fn sampling_bound(rho: f64, variant: &RandomVariant, inp: &RandomInputs) -> Result<SamplingBound> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidDensity(rho));
    }
    if !matches!(variant, RandomVariant::Trivial { .. }) {
        return Err(Error::InvalidSpec("sampling bound uses the trivial variant".into()));
    }
    let certified = random_bound_theorems(variant, inp)?;
    Ok(SamplingBound {
        certified,
        rate: sampling_rate(rho, inp.n, inp.sigma_p, inp.delta_p),
    })
}

pub fn sampling_rate(rho: f64, n: usize, sigma_p: f64, delta_p: f64) -> SamplingRate {
    let n = n as f64;
    SamplingRate {
        sqrt_n_over_rho: (n / rho).sqrt(),
        n_over_rho_delta: n / (rho * delta_p),
        sigma_over_sqrt_rho_delta: sigma_p / (rho.sqrt() * delta_p),
    }
}

/// Matrix structure that decides which theorems apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    General,
    Symmetric,
    Psd,
}

impl Structure {
    /// Symmetric when both `A` and `E` are symmetric to rounding; PSD when in
    /// addition no eigenvalue of `A` falls below `-1e-10 ||A||`.
    pub fn detect(a: &DenseMatrix, e: &DenseMatrix) -> Result<Self> {
        let scale = a.max_abs().max(e.max_abs()).max(f64::MIN_POSITIVE);
        if !(a.is_symmetric_within(1e-12 * scale) && e.is_symmetric_within(1e-12 * scale)) {
            return Ok(Structure::General);
        }
        let eig = symmetric_eigen(a)?;
        let top = eig.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if eig.values().last().copied().unwrap_or(0.0) >= -1e-10 * top {
            Ok(Structure::Psd)
        } else {
            Ok(Structure::Symmetric)
        }
    }
}

/// Parameters of the random-noise bound attached to a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBoundParams {
    pub k: f64,
    pub sigma2: f64,
    pub t1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub p: usize,
    /// Rank of `A`; the numerical rank when absent.
    pub r: Option<usize>,
    /// Forced structure; detected when absent.
    pub structure: Option<Structure>,
    pub noise_bound: Option<NoiseBoundParams>,
}

/// Relative rounding allowance when comparing a measured error to a bound.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// Per-trial record. CSV columns follow the field order below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub trial: usize,
    pub seed: u64,
    pub noise: String,
    pub structure: Structure,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub norm_e: f64,
    pub sigma_1: f64,
    pub sigma_p: f64,
    pub sigma_p1: f64,
    pub delta_p: f64,
    pub delta_s: Option<f64>,
    pub x: f64,
    pub y: f64,
    pub main_gate_lhs: f64,
    pub general_gate: bool,
    pub symmetric_gate: bool,
    pub eym: f64,
    pub dk_projection: Option<f64>,
    pub dk_lowrank: Option<f64>,
    pub main_bound: Option<f64>,
    pub psd_bound: Option<f64>,
    pub symmetric_bound: Option<f64>,
    pub t1: Option<f64>,
    pub c0_lhs: Option<f64>,
    pub random_bound: Option<f64>,
    pub random_fail_prob: Option<f64>,
    pub measured_error: Option<f64>,
}

impl BoundReport {
    /// Every bound that applied, by name.
    pub fn applicable_bounds(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("eym", self.eym)];
        let opts = [
            ("dk_lowrank", self.dk_lowrank),
            ("main", self.main_bound),
            ("psd", self.psd_bound),
            ("symmetric", self.symmetric_bound),
            ("random_trivial", self.random_bound),
        ];
        out.extend(opts.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        out
    }

    /// Names of the bounds exceeded by the measured error, beyond a rounding
    /// floor of `ROUNDING_SLACK * (sigma_1 + ||E||)`. The random-noise bound is
    /// only certified when `x <= t1`, so it is skipped otherwise.
    pub fn violated_bounds(&self) -> Vec<(&'static str, f64)> {
        let Some(err) = self.measured_error else {
            return Vec::new();
        };
        let floor = ROUNDING_SLACK * (self.sigma_1 + self.norm_e);
        self.applicable_bounds()
            .into_iter()
            .filter(|(name, _)| *name != "random_trivial" || self.t1.is_some_and(|t| self.x <= t))
            .filter(|&(_, b)| err > b + floor)
            .collect()
    }

    /// Human-readable form of [`BoundReport::violated_bounds`].
    pub fn violations(&self) -> Vec<String> {
        let err = self.measured_error.unwrap_or(f64::NAN);
        self.violated_bounds()
            .into_iter()
            .map(|(name, b)| format!("trial {}: measured {err:.6e} exceeds {name} bound {b:.6e}", self.trial))
            .collect()
    }
}

/// Computes every quantity of a [`BoundReport`] for `A` and `E`.
pub fn evaluate_report(a: &DenseMatrix, e: &DenseMatrix, cfg: &ReportConfig) -> Result<BoundReport> {
    if a.shape() != e.shape() {
        return Err(Error::Shape(format!("A {:?} vs E {:?}", a.shape(), e.shape())));
    }
    let dec = svd(a, None)?;
    if dec.sigma(1) == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let p = cfg.p;
    let r = cfg.r.unwrap_or_else(|| dec.numerical_rank());
    if p == 0 || p > r || r > dec.len() {
        return Err(Error::Index(format!("need 1 <= p <= r <= {}, got p = {p}, r = {r}", dec.len())));
    }
    let structure = match cfg.structure {
        Some(s) => s,
        None => Structure::detect(a, e)?,
    };
    let norm_e = spectral_norm(e)?;
    let (sigma_1, sigma_p, sigma_p1) = (dec.sigma(1), dec.sigma(p), dec.sigma(p + 1));
    let dp = delta_p(&dec, p)?;
    let skew = compute_skewness(&dec, e, r)?;
    let delta_s = match structure {
        Structure::General => None,
        _ if p < a.rows() => Some(symmetric_gap(&symmetric_eigen(a)?, p)?),
        _ => None,
    };
    let inputs = MainInputs {
        p,
        r,
        norm_e,
        sigma_p,
        delta_p: dp,
        delta_s,
        x: skew.x,
        y: skew.y,
    };
    let gate = if dp > 0.0 {
        Some(main_assumption(p, r, norm_e, sigma_p, dp, skew.x, GENERAL_THRESHOLD)?)
    } else {
        None
    };
    let lhs = gate.map_or(f64::INFINITY, |g| g.lhs);
    let general_gate = lhs <= GENERAL_THRESHOLD;
    let symmetric_gate = lhs <= SYMMETRIC_THRESHOLD;
    let dk = if dp > 0.0 {
        dk_bounds(sigma_1, dp, norm_e)?
    } else {
        DkBounds {
            projection: None,
            lowrank: None,
        }
    };
    let main = general_gate.then(|| main_bound(&inputs, Theorem::General)).transpose()?;
    let psd = (structure == Structure::Psd && symmetric_gate)
        .then(|| main_bound(&inputs, Theorem::Psd))
        .transpose()?;
    let sym = (structure != Structure::General && symmetric_gate && delta_s.is_some_and(|d| d > 0.0))
        .then(|| symmetric_bound(&inputs))
        .transpose()?;

    let (mut c0_lhs, mut random_bound, mut random_fail_prob) = (None, None, None);
    if let (Some(nb), true) = (cfg.noise_bound, dp > 0.0) {
        let rin = RandomInputs {
            p,
            r,
            m: a.rows(),
            n: a.cols(),
            norm_e,
            sigma_p,
            delta_p: dp,
        };
        let c0 = random_bound_c0(p, r, nb.t1, norm_e, sigma_p, dp)?;
        c0_lhs = Some(c0.lhs);
        if c0.pass {
            let rb = random_bound_theorems(
                &RandomVariant::Trivial {
                    k: nb.k,
                    sigma2: nb.sigma2,
                    t1: nb.t1,
                },
                &rin,
            )?;
            random_bound = Some(rb.bound);
            random_fail_prob = Some(rb.fail_prob);
        }
    }

    let perturbed = svd(&a.add(e)?, None)?;
    let measured = spectral::truncation_difference_norm(&dec, &perturbed, p)?;

    Ok(BoundReport {
        trial: 0,
        seed: 0,
        noise: String::new(),
        structure,
        m: a.rows(),
        n: a.cols(),
        p,
        r,
        norm_e,
        sigma_1,
        sigma_p,
        sigma_p1,
        delta_p: dp,
        delta_s,
        x: skew.x,
        y: skew.y,
        main_gate_lhs: lhs,
        general_gate,
        symmetric_gate,
        eym: eym_bound(sigma_p1, norm_e),
        dk_projection: dk.projection,
        dk_lowrank: dk.lowrank,
        main_bound: main,
        psd_bound: psd,
        symmetric_bound: sym,
        t1: cfg.noise_bound.map(|nb| nb.t1),
        c0_lhs,
        random_bound,
        random_fail_prob,
        measured_error: Some(measured),
    })
}

/// Writes reports as RFC-4180 CSV with a header row.
pub fn write_reports_csv<W: Write>(reports: &[BoundReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
