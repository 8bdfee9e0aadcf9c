//! Repeat harness and the comparison statistics: one-way ANOVA, pairwise
//! Mann-Whitney U with a Bonferroni threshold, quartile summaries.

mod experiment;
mod hypothesis;
mod render;
mod report;
mod special;

pub use experiment::{derive_seed, run_experiment, RunMatrix};
pub use hypothesis::{
    anova_oneway, mann_whitney_u, mann_whitney_u_with, quartiles, AnovaResult, Quartiles, UMethod, UTestResult,
};
pub use render::{format_p, render_boxplot_svg, render_markdown, render_quartile_csv, report_json};
pub use report::{compare_architectures, ArchSummary, ComparisonReport, PairwiseTest, ALPHA_ANOVA, ALPHA_PAIRWISE};
pub use special::{normal_sf, regularized_incomplete_beta};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("need at least {needed} {what}, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("run matrix incomplete: {missing} of {total} cells missing")]
    IncompleteRuns { missing: usize, total: usize },
    #[error("invalid run matrix: {0}")]
    InvalidRunMatrix(String),
    #[error("exact test limited to {max} total samples, got {got}")]
    ExactTooLarge { max: usize, got: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}
