//! Seeded experiment campaigns: bound comparisons over ground-matrix families,
//! the missing-entry heatmap demo, spike sharpness and the parallelism
//! diagnostic.

mod campaign;
mod fig1;
mod ground;
mod parallel;
mod pgm;
mod sharpness;

pub use campaign::{run_bound_campaign, run_fixed_campaign, BoundSummary, CampaignConfig, CampaignResult, CampaignSummary, TrialError};
pub use fig1::{build_fig1_matrix, fig1_vectors, run_fig1, Fig1Report, Fig1Result, Fig1Spec};
pub use ground::{random_orthonormal, GroundFamily, GroundSpec, Spectrum};
pub use parallel::{parallel_campaign, run_parallelism, swap_example, ParallelReport};
pub use pgm::{encode_pgm, write_pgm};
pub use sharpness::{run_sharpness, SharpnessReport, SharpnessTrial};

/// Median of a nonempty slice; `NaN` when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
