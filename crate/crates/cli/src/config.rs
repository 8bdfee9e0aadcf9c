use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use seqdevid_core::models::{ArchSpec, Architecture, ModelSpec, TrainConfig};
use seqdevid_core::nncore::CellKind;

/// Capture source: pcap directory, session manifest and feature manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSource {
    pub root: PathBuf,
    pub sessions: PathBuf,
    #[serde(default = "default_features")]
    pub features: String,
}

fn default_features() -> String {
    "iotdevid25".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOptions {
    pub hidden: usize,
    pub cell: CellKind,
    pub stacked_layers: usize,
    pub conv_kernels: usize,
    pub conv_width: usize,
    pub pool: usize,
    pub decoder_steps: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            hidden: 64,
            cell: CellKind::Lstm,
            stacked_layers: 2,
            conv_kernels: 32,
            conv_width: 3,
            pool: 2,
            decoder_steps: 4,
        }
    }
}

impl ModelOptions {
    pub fn spec(&self, arch: Architecture, seq_len: usize, features: usize, classes: usize) -> ModelSpec {
        let mut spec = ModelSpec::new(arch)
            .with_hidden(self.hidden)
            .with_shape(seq_len, features, classes)
            .with_cell(self.cell);
        spec.arch = match spec.arch {
            ArchSpec::VanillaLstm => ArchSpec::VanillaLstm,
            ArchSpec::StackedLstm { .. } => ArchSpec::StackedLstm {
                layers: self.stacked_layers,
            },
            ArchSpec::CnnLstm { .. } => ArchSpec::CnnLstm {
                kernels: self.conv_kernels,
                width: self.conv_width,
                pool: self.pool,
            },
            ArchSpec::EncoderDecoderLstm { .. } => ArchSpec::EncoderDecoderLstm {
                encoder_hidden: self.hidden,
                decoder_hidden: self.hidden,
                decoder_steps: self.decoder_steps,
            },
        };
        spec
    }
}

fn default_architectures() -> Vec<Architecture> {
    Architecture::ALL.to_vec()
}

fn default_repeats() -> usize {
    50
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset CSV written by `extract`.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub captures: Option<CaptureSource>,
    #[serde(default = "default_architectures")]
    pub architectures: Vec<Architecture>,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Parse and resolve relative paths against the config file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.dataset.as_mut() {
            rebase(d);
        }
        if let Some(c) = cfg.captures.as_mut() {
            rebase(&mut c.root);
            rebase(&mut c.sessions);
            if seqdevid_core::features::FeatureManifest::builtin(&c.features).is_none() {
                let mut p = PathBuf::from(&c.features);
                rebase(&mut p);
                c.features = p.to_string_lossy().into_owned();
            }
        }
        rebase(&mut cfg.output);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.dataset, &self.captures) {
            (Some(_), Some(_)) => bail!("config sets both `dataset` and `captures`; choose one data source"),
            (None, None) => bail!("config needs a data source: `dataset` or `captures`"),
            _ => {}
        }
        if self.architectures.is_empty() {
            bail!("`architectures` is empty");
        }
        for (i, a) in self.architectures.iter().enumerate() {
            if self.architectures[..i].contains(a) {
                bail!("architecture {a} listed twice");
            }
        }
        self.train.validate()?;
        Ok(())
    }
}
