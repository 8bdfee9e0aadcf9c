use serde::{Deserialize, Serialize};

use super::{anova_oneway, mann_whitney_u, quartiles, AnovaResult, Quartiles, RunMatrix, StatsError, UTestResult};
use crate::models::Architecture;

pub const ALPHA_ANOVA: f64 = 0.05;
/// Bonferroni over the six pairs of four architectures.
pub const ALPHA_PAIRWISE: f64 = 0.05 / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub architecture: Architecture,
    pub label: String,
    pub mean: f64,
    pub quartiles: Quartiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: Architecture,
    pub b: Architecture,
    pub test: UTestResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha_anova: f64,
    pub alpha_pairwise: f64,
    pub summaries: Vec<ArchSummary>,
    pub anova: AnovaResult,
    pub anova_significant: bool,
    pub pairwise: Vec<PairwiseTest>,
    pub run_matrix: RunMatrix,
}

/// Reorder rows into report-table order.
fn table_order(rm: &RunMatrix) -> RunMatrix {
    let mut idx: Vec<usize> = (0..rm.architectures.len()).collect();
    idx.sort_by_key(|&i| rm.architectures[i]);
    RunMatrix {
        architectures: idx.iter().map(|&i| rm.architectures[i]).collect(),
        master_seed: rm.master_seed,
        seeds: rm.seeds.clone(),
        samples: idx.iter().map(|&i| rm.samples[i].clone()).collect(),
    }
}

/// ANOVA over all architectures and a U test for every pair, with the
/// pairwise threshold α / (k(k−1)/2).
pub fn compare_architectures(rm: &RunMatrix) -> Result<ComparisonReport, StatsError> {
    let rm = table_order(rm);
    let groups = rm.complete_groups()?;
    let anova = anova_oneway(&groups)?;
    let k = groups.len();
    let mut tests = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            tests.push(mann_whitney_u(&groups[i], &groups[j])?);
        }
    }
    ComparisonReport::assemble(rm, anova, tests)
}

impl ComparisonReport {
    /// Build a report from already-computed test results. `tests` lists the
    /// pairs (i, j), i < j, in table order.
    pub fn assemble(rm: RunMatrix, anova: AnovaResult, tests: Vec<UTestResult>) -> Result<Self, StatsError> {
        let rm = table_order(&rm);
        let groups = rm.complete_groups()?;
        let k = groups.len();
        let pairs = k * (k - 1) / 2;
        if tests.len() != pairs {
            return Err(StatsError::InvalidRunMatrix(format!(
                "{} pairwise results for {k} architectures, expected {pairs}",
                tests.len()
            )));
        }
        let alpha_pairwise = ALPHA_ANOVA / pairs as f64;
        let summaries = rm
            .architectures
            .iter()
            .zip(&groups)
            .map(|(&a, g)| {
                Ok(ArchSummary {
                    architecture: a,
                    label: a.label().to_string(),
                    mean: g.iter().sum::<f64>() / g.len() as f64,
                    quartiles: quartiles(g)?,
                })
            })
            .collect::<Result<Vec<_>, StatsError>>()?;
        let mut tests = tests.into_iter();
        let mut pairwise = Vec::with_capacity(pairs);
        for i in 0..k {
            for j in i + 1..k {
                let test = tests.next().expect("length checked");
                pairwise.push(PairwiseTest {
                    a: rm.architectures[i],
                    b: rm.architectures[j],
                    significant: test.p_value < alpha_pairwise,
                    test,
                });
            }
        }
        Ok(Self {
            alpha_anova: ALPHA_ANOVA,
            alpha_pairwise,
            summaries,
            anova_significant: anova.p_value < ALPHA_ANOVA,
            anova,
            pairwise,
            run_matrix: rm,
        })
    }

    /// Architecture with the highest mean accuracy; ties go to table order.
    pub fn best(&self) -> Option<Architecture> {
        let mut best: Option<&ArchSummary> = None;
        for s in &self.summaries {
            if best.is_none_or(|b| s.mean > b.mean) {
                best = Some(s);
            }
        }
        best.map(|s| s.architecture)
    }
}
