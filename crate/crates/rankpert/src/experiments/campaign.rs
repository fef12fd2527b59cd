use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ground::GroundSpec;
use crate::bounds::{evaluate_report, t1_for_failure, BoundReport, NoiseBoundParams, ReportConfig, Structure};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::noise::{derive_seed, NoiseSpec};
use crate::spectral::svd;

fn default_failure() -> f64 {
    0.01
}

/// A seeded bound-comparison campaign. Each trial draws a fresh ground
/// matrix (unless the ground spec fixes its seed, or a fixed matrix is
/// supplied to [`run_fixed_campaign`]) and a fresh perturbation; the noise
/// spec's own seed is replaced by the per-trial seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundSpec>,
    pub noise: NoiseSpec,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Deviation level of the random-noise bound; chosen from
    /// `failure_target` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default = "default_failure")]
    pub failure_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Structure>,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidSpec("trials must be at least 1".into()));
        }
        if self.p == 0 {
            return Err(Error::InvalidSpec("p must be at least 1".into()));
        }
        if !(self.failure_target > 0.0 && self.failure_target < 1.0) {
            return Err(Error::InvalidSpec("failure_target must lie in (0, 1)".into()));
        }
        if let Some(g) = &self.ground {
            g.validate()?;
        }
        self.noise.validate()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64)
    }

    /// Ground matrix, perturbation and report for one trial.
    pub fn run_trial(&self, trial: usize) -> Result<BoundReport> {
        let ground = self
            .ground
            .as_ref()
            .ok_or_else(|| Error::InvalidSpec("campaign needs a ground spec or a fixed matrix".into()))?;
        let a = ground.build(derive_seed(self.trial_seed(trial), 0))?;
        self.trial_on(trial, &a, self.r.or(Some(ground.values().len())))
    }

    /// Perturbation and report for one trial on a fixed ground matrix.
    pub fn run_trial_on(&self, trial: usize, a: &DenseMatrix) -> Result<BoundReport> {
        self.trial_on(trial, a, self.r)
    }

    fn trial_on(&self, trial: usize, a: &DenseMatrix, r: Option<usize>) -> Result<BoundReport> {
        let seed = self.trial_seed(trial);
        let noise = self.noise.with_seed(derive_seed(seed, 1));
        let e = noise.realize(a)?;
        let r = match r {
            Some(r) => r,
            None => svd(a, None)?.numerical_rank().max(self.p),
        };
        let (k, sigma2) = noise.bound_params(Some(&a))?;
        let noise_bound = (k > 0.0).then(|| NoiseBoundParams {
            k,
            sigma2,
            t1: self.t1.unwrap_or_else(|| t1_for_failure(r, k, sigma2, self.failure_target)),
        });
        let cfg = ReportConfig {
            p: self.p,
            r: Some(r),
            structure: self.structure,
            noise_bound,
        };
        let mut rep = evaluate_report(a, &e, &cfg)?;
        rep.trial = trial;
        rep.seed = seed;
        rep.noise = noise.label().to_string();
        Ok(rep)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialError {
    pub trial: usize,
    pub message: String,
}

/// Per-bound statistics over the trials where the bound applied.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub applicable: usize,
    pub violations: usize,
    pub pass_rate: f64,
    /// Mean of `bound / measured` over trials with nonzero measured error.
    pub mean_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    pub general_gated: usize,
    pub symmetric_gated: usize,
    pub bounds: BTreeMap<String, BoundSummary>,
    /// Mean `eym / main` where both apply.
    pub eym_over_main: Option<f64>,
    /// Mean `dk_lowrank / main` where both apply.
    pub dk_over_main: Option<f64>,
    /// Fraction of gated trials where the main bound is below the EYM bound.
    pub main_beats_eym: Option<f64>,
    pub violation_messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub reports: Vec<BoundReport>,
    pub errors: Vec<TrialError>,
    pub summary: CampaignSummary,
    /// Wall-clock seconds; kept out of the summary so outputs stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(trials: usize, reports: &[BoundReport], failed: usize) -> CampaignSummary {
    let mut bounds: BTreeMap<String, (usize, usize, Vec<f64>)> = BTreeMap::new();
    for rep in reports {
        let measured = rep.measured_error.unwrap_or(f64::NAN);
        let violated = rep.violated_bounds();
        for (name, b) in rep.applicable_bounds() {
            let entry = bounds.entry(name.to_string()).or_default();
            entry.0 += 1;
            if violated.iter().any(|(v, _)| *v == name) {
                entry.1 += 1;
            }
            if measured > 0.0 {
                entry.2.push(b / measured);
            }
        }
    }
    let ratio = |num: fn(&BoundReport) -> Option<f64>| -> Vec<f64> {
        reports
            .iter()
            .filter_map(|r| Some(num(r)? / r.main_bound?))
            .collect()
    };
    let eym_main = ratio(|r| Some(r.eym));
    let dk_main = ratio(|r| r.dk_lowrank);
    let gated_main: Vec<&BoundReport> = reports.iter().filter(|r| r.main_bound.is_some()).collect();
    CampaignSummary {
        trials,
        completed: reports.len(),
        failed,
        general_gated: reports.iter().filter(|r| r.general_gate).count(),
        symmetric_gated: reports.iter().filter(|r| r.symmetric_gate).count(),
        bounds: bounds
            .into_iter()
            .map(|(k, (applicable, violations, ratios))| {
                let s = BoundSummary {
                    applicable,
                    violations,
                    pass_rate: 1.0 - violations as f64 / applicable as f64,
                    mean_ratio: mean(&ratios),
                };
                (k, s)
            })
            .collect(),
        eym_over_main: mean(&eym_main),
        dk_over_main: mean(&dk_main),
        main_beats_eym: (!gated_main.is_empty()).then(|| {
            gated_main.iter().filter(|r| r.main_bound.is_some_and(|m| m < r.eym)).count() as f64
                / gated_main.len() as f64
        }),
        violation_messages: reports.iter().flat_map(|r| r.violations()).collect(),
    }
}

/// Runs every trial in parallel; per-trial failures are recorded, not fatal.
pub fn run_bound_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    if cfg.ground.is_none() {
        return Err(Error::InvalidSpec("campaign needs a ground spec".into()));
    }
    run_trials(cfg, |t| cfg.run_trial(t))
}

/// Campaign on a fixed ground matrix `a`; any ground spec in `cfg` is ignored.
pub fn run_fixed_campaign(a: &DenseMatrix, cfg: &CampaignConfig) -> Result<CampaignResult> {
    run_trials(cfg, |t| cfg.run_trial_on(t, a))
}

fn run_trials(cfg: &CampaignConfig, f: impl Fn(usize) -> Result<BoundReport> + Sync) -> Result<CampaignResult> {
    cfg.validate()?;
    let start = Instant::now();
    let outcomes: Vec<Result<BoundReport>> = (0..cfg.trials).into_par_iter().map(&f).collect();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (trial, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => reports.push(r),
            Err(e) => errors.push(TrialError {
                trial,
                message: e.to_string(),
            }),
        }
    }
    let summary = summarize(cfg.trials, &reports, errors.len());
    Ok(CampaignResult {
        reports,
        errors,
        summary,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
