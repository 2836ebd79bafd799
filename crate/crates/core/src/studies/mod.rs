//! Replicated simulation studies: simulate tracks over a sweep of one
//! setting, fit each, and summarize and plot the estimates.

mod config;
mod runner;
mod summary;
mod svg;

pub use config::{LandscapeConfig, MethodName, SizeControl, StudyConfig, StudyKind, Sweep, TrackConfig};
pub use runner::{
    cell_seed, observe, replicate_track, run_study, run_study_to_dir, run_study_with, simulate_observations,
    track_seed, true_model, StudyResult, StudyRow, SWEEP_SEED_STRIDE,
};
pub use summary::{quantile_sorted, summarize, Moments, Summary, SummaryRow};
pub use svg::{boxplot_svg, emit_boxplot, BoxStats, YScale};
