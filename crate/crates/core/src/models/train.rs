use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Model, ModelError, ModelSpec};
use crate::exec::{map_ordered, Execution};
use crate::features::{fit_normalizer, LabelCodec, NormalizeMode, Normalizer, SessionMatrix};
use crate::nncore::{adam_step, read_params, write_params, AdamConfig, AdamState, Parameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_fraction: f64,
    /// Epochs without improvement of the train loss before stopping.
    pub patience: usize,
    /// Relative improvement that resets the patience counter.
    pub min_delta: f64,
    pub normalize: NormalizeMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            train_fraction: 0.75,
            patience: 30,
            min_delta: 1e-4,
            normalize: NormalizeMode::MinMax01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train fraction must lie strictly between 0 and 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return bad("min_delta must be non-negative");
        }
        Ok(())
    }
}

/// Indices into the dataset, each list sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn train_set(&self, data: &[SessionMatrix]) -> Vec<SessionMatrix> {
        self.train.iter().map(|&i| data[i].clone()).collect()
    }

    pub fn test_set(&self, data: &[SessionMatrix]) -> Vec<SessionMatrix> {
        self.test.iter().map(|&i| data[i].clone()).collect()
    }
}

/// Per class, shuffle with `seed` and put `round(n · fraction)` examples in
/// the training split, keeping at least one on each side.
pub fn stratified_split(data: &[SessionMatrix], fraction: f64, seed: u64) -> Result<Split, ModelError> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, m) in data.iter().enumerate() {
        by_class.entry(m.label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in by_class {
        if idx.len() < 2 {
            return Err(ModelError::ClassTooSmall {
                class,
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        split.train.extend_from_slice(&idx[..n_train]);
        split.test.extend_from_slice(&idx[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean cross-entropy over the training split, one entry per epoch run.
    pub epoch_loss: Vec<f64>,
    pub stopped_early: bool,
}

pub struct TrainedModel {
    pub model: Model,
    pub normalizer: Normalizer,
    pub codec: LabelCodec,
    pub history: TrainingHistory,
    pub config: TrainConfig,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    spec: ModelSpec,
    codec: LabelCodec,
    normalizer: Normalizer,
    history: TrainingHistory,
    config: TrainConfig,
    split: Split,
}

fn persist_err(path: &Path, e: impl std::fmt::Display) -> ModelError {
    ModelError::Persist(format!("{}: {e}", path.display()))
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        self.model.spec()
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Predicted class id for a raw (unnormalized) session.
    pub fn predict(&self, m: &SessionMatrix) -> Result<usize, ModelError> {
        let x = self.normalizer.apply(m)?;
        self.model.predict(&x.values)
    }

    /// `<stem>.params` and `<stem>.json`.
    pub fn artifact_paths(stem: &Path) -> (PathBuf, PathBuf) {
        (stem.with_extension("params"), stem.with_extension("json"))
    }

    pub fn save(&self, stem: &Path) -> Result<(), ModelError> {
        let (params, sidecar) = Self::artifact_paths(stem);
        let f = std::fs::File::create(&params).map_err(|e| persist_err(&params, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_params(&mut w, &self.model.named_tensors())?;
        std::io::Write::flush(&mut w).map_err(|e| persist_err(&params, e))?;
        let meta = Sidecar {
            spec: self.spec().clone(),
            codec: self.codec.clone(),
            normalizer: self.normalizer.clone(),
            history: self.history.clone(),
            config: self.config.clone(),
            split: self.split.clone(),
        };
        let mut json = serde_json::to_string_pretty(&meta).map_err(|e| persist_err(&sidecar, e))?;
        json.push('\n');
        std::fs::write(&sidecar, json).map_err(|e| persist_err(&sidecar, e))
    }

    pub fn load(stem: &Path) -> Result<Self, ModelError> {
        let (params, sidecar) = Self::artifact_paths(stem);
        let text = std::fs::read_to_string(&sidecar).map_err(|e| persist_err(&sidecar, e))?;
        let meta: Sidecar = serde_json::from_str(&text).map_err(|e| persist_err(&sidecar, e))?;
        let f = std::fs::File::open(&params).map_err(|e| persist_err(&params, e))?;
        let tensors = read_params(std::io::BufReader::new(f))?;
        Ok(Self {
            model: Model::from_named_tensors(&meta.spec, &tensors)?,
            normalizer: meta.normalizer,
            codec: meta.codec,
            history: meta.history,
            config: meta.config,
            split: meta.split,
        })
    }
}

fn check_shapes(spec: &ModelSpec, data: &[SessionMatrix]) -> Result<(), ModelError> {
    let expected = (spec.seq_len, spec.features);
    for m in data {
        let got = m.values.shape();
        if got != expected {
            return Err(ModelError::ShapeMismatch { expected, got });
        }
        if m.label >= spec.classes {
            return Err(ModelError::InvalidSpec(format!(
                "label {} needs more than the {} classes in the spec",
                m.label, spec.classes
            )));
        }
    }
    Ok(())
}

pub fn train(model: Model, data: &[SessionMatrix], cfg: &TrainConfig) -> Result<TrainedModel, ModelError> {
    train_with(model, data, cfg, Execution::default())
}

/// Mini-batch Adam on mean cross-entropy over a stratified training split.
/// Per-example gradients within a batch may be computed concurrently; they
/// are summed in batch order, so both execution modes give identical results.
pub fn train_with(
    mut model: Model,
    data: &[SessionMatrix],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<TrainedModel, ModelError> {
    cfg.validate()?;
    check_shapes(model.spec(), data)?;
    let codec = LabelCodec::from_dataset(data)?;
    let split = stratified_split(data, cfg.train_fraction, cfg.seed)?;
    let normalizer = fit_normalizer(&split.train_set(data), cfg.normalize);
    let train_set = normalizer.apply_all(&split.train_set(data))?;

    let mut adam = AdamState::new(
        model.param_count(),
        AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainingHistory {
        epoch_loss: Vec::new(),
        stopped_early: false,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = map_ordered(exec, batch, |&i| {
                let m = &train_set[i];
                model.loss_and_gradient(&m.values, m.label)
            });
            let mut grad = vec![0.0; adam.len()];
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                log::error!("non-finite loss at epoch {epoch}, batch {batch_no}");
                return Err(ModelError::NonFiniteLoss { epoch, batch: batch_no });
            }
            epoch_loss += batch_loss;
            let mut theta = model.flatten();
            adam_step(&mut adam, &mut theta, &grad)?;
            model.assign_flat(&theta)?;
        }
        let mean = epoch_loss / train_set.len() as f64;
        history.epoch_loss.push(mean);
        log::debug!("epoch {epoch}: loss {mean:.6}");

        if mean < best - cfg.min_delta * best.abs() || !best.is_finite() {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainedModel {
        model,
        normalizer,
        codec,
        history,
        config: cfg.clone(),
        split,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(trained: &TrainedModel, test: &[SessionMatrix]) -> Result<Evaluation, ModelError> {
    if test.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let classes = trained.spec().classes;
    check_shapes(trained.spec(), test)?;
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    for m in test {
        let x = trained.normalizer.apply(m)?;
        let pred = argmax(&trained.model.predict_proba(&x.values)?);
        confusion[m.label][pred] += 1;
        correct += usize::from(pred == m.label);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        correct,
        total: test.len(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, Architecture};
    use crate::nncore::Tensor2;
    use rand::Rng;

    /// Class 1 iff feature 0 is positive on every valid row.
    fn sign_dataset(n: usize, seed: u64) -> Vec<SessionMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let mut data = Vec::new();
                for _ in 0..6 {
                    data.push(sign * rng.gen_range(0.5..1.5));
                    data.push(rng.gen_range(-1.0..1.0));
                    data.push(rng.gen_range(-1.0..1.0));
                }
                SessionMatrix {
                    values: Tensor2::from_vec(6, 3, data).unwrap(),
                    label,
                    device_name: ["neg", "pos"][label].into(),
                    session_id: i.to_string(),
                }
            })
            .collect()
    }

    fn toy_spec(arch: Architecture) -> ModelSpec {
        let spec = ModelSpec::new(arch).with_hidden(8).with_shape(6, 3, 2);
        match spec.arch {
            super::super::ArchSpec::CnnLstm { .. } => ModelSpec {
                arch: super::super::ArchSpec::CnnLstm {
                    kernels: 4,
                    width: 2,
                    pool: 2,
                },
                ..spec
            },
            _ => spec,
        }
    }

    fn accuracy_on(trained: &TrainedModel, data: &[SessionMatrix]) -> f64 {
        evaluate(trained, data).unwrap().accuracy
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let data = sign_dataset(40, 1);
        let s = stratified_split(&data, 0.75, 9).unwrap();
        assert_eq!(s.train.len(), 30);
        assert_eq!(s.test.len(), 10);
        let ones = s.test.iter().filter(|&&i| data[i].label == 1).count();
        assert_eq!(ones, 5);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
        assert_eq!(stratified_split(&data, 0.75, 9).unwrap(), s);
    }

    #[test]
    fn singleton_class_rejected() {
        let mut data = sign_dataset(5, 1);
        data.truncate(3);
        data[2].label = 1;
        data[1].label = 0;
        data[1].device_name = "neg".into();
        assert!(matches!(
            stratified_split(&data[1..], 0.75, 0),
            Err(ModelError::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn zero_epochs_forbidden() {
        let data = sign_dataset(8, 1);
        let m = build_model(&toy_spec(Architecture::VanillaLstm), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(m, &data, &cfg), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let data = sign_dataset(8, 1);
        let m = build_model(&ModelSpec::new(Architecture::VanillaLstm).with_hidden(4), 0).unwrap();
        assert!(matches!(
            train(m, &data, &TrainConfig::default()),
            Err(ModelError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn empty_test_set() {
        let data = sign_dataset(8, 1);
        let m = build_model(&toy_spec(Architecture::VanillaLstm), 0).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let t = train(m, &data, &cfg).unwrap();
        assert!(matches!(evaluate(&t, &[]), Err(ModelError::EmptyTestSet)));
    }

    #[test]
    fn every_architecture_learns_the_sign_task() {
        let data = sign_dataset(40, 3);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.02,
            seed: 5,
            ..TrainConfig::default()
        };
        for arch in Architecture::ALL {
            let m = build_model(&toy_spec(arch), 5).unwrap();
            let untrained = TrainedModel {
                model: m.clone(),
                normalizer: fit_normalizer(&data, cfg.normalize),
                codec: LabelCodec::from_dataset(&data).unwrap(),
                history: TrainingHistory {
                    epoch_loss: vec![],
                    stopped_early: false,
                },
                config: cfg.clone(),
                split: stratified_split(&data, cfg.train_fraction, cfg.seed).unwrap(),
            };
            let t = train(m, &data, &cfg).unwrap();
            let train_set = t.split.train_set(&data);
            let acc = accuracy_on(&t, &train_set);
            assert!(acc >= 0.99, "{arch}: train accuracy {acc}");
            assert!(acc >= accuracy_on(&untrained, &train_set));
            assert!(t.history.epoch_loss.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn training_is_deterministic_across_execution_modes() {
        let data = sign_dataset(24, 4);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        let spec = toy_spec(Architecture::StackedLstm);
        let a = train_with(build_model(&spec, 1).unwrap(), &data, &cfg, Execution::Sequential).unwrap();
        let b = train_with(build_model(&spec, 1).unwrap(), &data, &cfg, Execution::Parallel).unwrap();
        let c = train_with(build_model(&spec, 1).unwrap(), &data, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.model.flatten(), b.model.flatten());
        assert_eq!(b.model.flatten(), c.model.flatten());
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn early_stopping_on_plateau() {
        let data = sign_dataset(16, 4);
        let cfg = TrainConfig {
            epochs: 500,
            learning_rate: 1e-12,
            patience: 3,
            min_delta: 0.01,
            ..TrainConfig::default()
        };
        let t = train(
            build_model(&toy_spec(Architecture::VanillaLstm), 1).unwrap(),
            &data,
            &cfg,
        )
        .unwrap();
        assert!(t.history.stopped_early);
        assert_eq!(t.history.epoch_loss.len(), 4);
    }

    #[test]
    fn perfect_predictions_give_diagonal_confusion() {
        let data = sign_dataset(40, 3);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 0.02,
            seed: 5,
            ..TrainConfig::default()
        };
        let t = train(
            build_model(&toy_spec(Architecture::VanillaLstm), 5).unwrap(),
            &data,
            &cfg,
        )
        .unwrap();
        let ev = evaluate(&t, &data).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        assert_eq!(ev.confusion, vec![vec![20, 0], vec![0, 20]]);
    }

    #[test]
    fn save_load_roundtrip() {
        let data = sign_dataset(12, 2);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let t = train(build_model(&toy_spec(Architecture::CnnLstm), 1).unwrap(), &data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("cnn");
        t.save(&stem).unwrap();
        let back = TrainedModel::load(&stem).unwrap();
        assert_eq!(back.model.flatten(), t.model.flatten());
        assert_eq!(back.history, t.history);
        assert_eq!(back.codec, t.codec);
        for m in &data {
            assert_eq!(back.predict(m).unwrap(), t.predict(m).unwrap());
        }
    }
}
