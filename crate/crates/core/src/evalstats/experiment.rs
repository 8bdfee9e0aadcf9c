use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::exec::{map_range, Execution};
use crate::features::SessionMatrix;
use crate::models::{build_model, evaluate, train_with, Architecture, ModelError, ModelSpec, TrainConfig};

/// Accuracy samples: `samples[arch][repeat]`, `None` where a run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMatrix {
    pub architectures: Vec<Architecture>,
    pub master_seed: u64,
    /// Seed of each repeat, shared by every architecture in that repeat.
    pub seeds: Vec<u64>,
    pub samples: Vec<Vec<Option<f64>>>,
}

/// splitmix64 finalizer over the master seed and the repeat index.
pub fn derive_seed(master: u64, repeat: usize) -> u64 {
    let mut z = master.wrapping_add((repeat as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RunMatrix {
    /// A complete matrix from known samples, e.g. for fixtures.
    pub fn from_samples(
        architectures: Vec<Architecture>,
        samples: Vec<Vec<f64>>,
        master_seed: u64,
    ) -> Result<Self, StatsError> {
        let repeats = samples.first().map_or(0, Vec::len);
        let rm = Self {
            seeds: (0..repeats).map(|r| derive_seed(master_seed, r)).collect(),
            architectures,
            master_seed,
            samples: samples.into_iter().map(|s| s.into_iter().map(Some).collect()).collect(),
        };
        rm.validate()?;
        Ok(rm)
    }

    pub fn repeats(&self) -> usize {
        self.seeds.len()
    }

    pub fn missing(&self) -> usize {
        self.samples.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: String| Err(StatsError::InvalidRunMatrix(m));
        if self.architectures.len() != self.samples.len() {
            return bad(format!(
                "{} architectures but {} sample rows",
                self.architectures.len(),
                self.samples.len()
            ));
        }
        for (i, a) in self.architectures.iter().enumerate() {
            if self.architectures[..i].contains(a) {
                return bad(format!("{a} listed twice"));
            }
        }
        for (arch, row) in self.architectures.iter().zip(&self.samples) {
            if row.len() != self.repeats() {
                return bad(format!("{arch} has {} samples, expected {}", row.len(), self.repeats()));
            }
            if let Some(v) = row
                .iter()
                .flatten()
                .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
            {
                return bad(format!("{arch} has accuracy {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Every group's samples, or `IncompleteRuns` if any cell is missing.
    pub fn complete_groups(&self) -> Result<Vec<Vec<f64>>, StatsError> {
        self.validate()?;
        let missing = self.missing();
        if missing > 0 {
            return Err(StatsError::IncompleteRuns {
                missing,
                total: self.samples.len() * self.repeats(),
            });
        }
        Ok(self
            .samples
            .iter()
            .map(|row| row.iter().map(|v| v.expect("checked")).collect())
            .collect())
    }
}

fn one_run(spec: &ModelSpec, data: &[SessionMatrix], cfg: &TrainConfig) -> Result<f64, ModelError> {
    let model = build_model(spec, cfg.seed)?;
    let trained = train_with(model, data, cfg, Execution::Sequential)?;
    let test = trained.split.test_set(data);
    Ok(evaluate(&trained, &test)?.accuracy)
}

/// Train and test every spec `repeats` times. Repeat `r` uses
/// `derive_seed(master_seed, r)` for the split and the initialization of all
/// architectures. Runs are independent and execute concurrently under
/// [`Execution::Parallel`]; failed runs leave `None` cells.
pub fn run_experiment(
    specs: &[ModelSpec],
    data: &[SessionMatrix],
    template: &TrainConfig,
    repeats: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<RunMatrix, StatsError> {
    if repeats < 2 {
        return Err(StatsError::TooFewSamples {
            what: "repeats",
            needed: 2,
            got: repeats,
        });
    }
    if specs.is_empty() {
        return Err(StatsError::TooFewSamples {
            what: "architectures",
            needed: 1,
            got: 0,
        });
    }
    template.validate()?;
    for s in specs {
        s.validate()?;
    }
    let seeds: Vec<u64> = (0..repeats).map(|r| derive_seed(master_seed, r)).collect();
    let k = specs.len();
    let cells = map_range(exec, repeats * k, |job| {
        let (r, a) = (job / k, job % k);
        let cfg = TrainConfig {
            seed: seeds[r],
            ..template.clone()
        };
        match one_run(&specs[a], data, &cfg) {
            Ok(acc) => {
                log::info!("repeat {r} {}: accuracy {acc:.4}", specs[a].architecture());
                Some(acc)
            }
            Err(e) => {
                log::error!("repeat {r} {} failed: {e}", specs[a].architecture());
                None
            }
        }
    });
    let mut samples = vec![Vec::with_capacity(repeats); k];
    for (job, cell) in cells.into_iter().enumerate() {
        samples[job % k].push(cell);
    }
    let rm = RunMatrix {
        architectures: specs.iter().map(ModelSpec::architecture).collect(),
        master_seed,
        seeds,
        samples,
    };
    rm.validate()?;
    Ok(rm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_repeat_and_master() {
        let a: Vec<u64> = (0..50).map(|r| derive_seed(7, r)).collect();
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 50);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_eq!(derive_seed(7, 3), a[3]);
    }

    #[test]
    fn incomplete_cells_reported() {
        let mut rm = RunMatrix::from_samples(
            vec![Architecture::CnnLstm, Architecture::VanillaLstm],
            vec![vec![0.5, 0.6]; 2],
            1,
        )
        .unwrap();
        rm.samples[1][0] = None;
        assert!(matches!(
            rm.complete_groups(),
            Err(StatsError::IncompleteRuns { missing: 1, total: 4 })
        ));
    }

    #[test]
    fn invalid_matrices() {
        let archs = vec![Architecture::CnnLstm, Architecture::VanillaLstm];
        assert!(RunMatrix::from_samples(archs.clone(), vec![vec![0.5, 0.6], vec![0.5]], 1).is_err());
        assert!(RunMatrix::from_samples(archs.clone(), vec![vec![0.5, 1.6], vec![0.5, 0.5]], 1).is_err());
        assert!(RunMatrix::from_samples(vec![Architecture::CnnLstm; 2], vec![vec![0.5]; 2], 1).is_err());
    }

    #[test]
    fn too_few_repeats() {
        let spec = ModelSpec::new(Architecture::VanillaLstm);
        assert!(matches!(
            run_experiment(&[spec], &[], &TrainConfig::default(), 1, 0, Execution::Sequential),
            Err(StatsError::TooFewSamples { .. })
        ));
    }
}
