use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nncore::CellKind;

/// The four benchmark architectures, declared in report-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Architecture {
    CnnLstm,
    EncoderDecoderLstm,
    StackedLstm,
    VanillaLstm,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::CnnLstm,
        Architecture::EncoderDecoderLstm,
        Architecture::StackedLstm,
        Architecture::VanillaLstm,
    ];

    /// Display label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::CnnLstm => "CNN-LSTM",
            Self::EncoderDecoderLstm => "ED-LSTM",
            Self::StackedLstm => "Stacked-LSTM",
            Self::VanillaLstm => "Vanilla-LSTM",
        }
    }

    /// Stable identifier used in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Self::CnnLstm => "cnn_lstm",
            Self::EncoderDecoderLstm => "ed_lstm",
            Self::StackedLstm => "stacked_lstm",
            Self::VanillaLstm => "vanilla_lstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "cnnlstm" | "cnn" => Ok(Self::CnnLstm),
            "encoderdecoderlstm" | "edlstm" | "encoderdecoder" | "ed" => Ok(Self::EncoderDecoderLstm),
            "stackedlstm" | "stacked" => Ok(Self::StackedLstm),
            "vanillalstm" | "vanilla" => Ok(Self::VanillaLstm),
            _ => Err(ModelError::InvalidSpec(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Architecture-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch")]
pub enum ArchSpec {
    VanillaLstm,
    StackedLstm {
        layers: usize,
    },
    CnnLstm {
        kernels: usize,
        width: usize,
        pool: usize,
    },
    EncoderDecoderLstm {
        encoder_hidden: usize,
        decoder_hidden: usize,
        decoder_steps: usize,
    },
}

impl ArchSpec {
    pub fn default_for(arch: Architecture, hidden: usize) -> Self {
        match arch {
            Architecture::VanillaLstm => Self::VanillaLstm,
            Architecture::StackedLstm => Self::StackedLstm { layers: 2 },
            Architecture::CnnLstm => Self::CnnLstm {
                kernels: 32,
                width: 3,
                pool: 2,
            },
            Architecture::EncoderDecoderLstm => Self::EncoderDecoderLstm {
                encoder_hidden: hidden,
                decoder_hidden: hidden,
                decoder_steps: 4,
            },
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Self::VanillaLstm => Architecture::VanillaLstm,
            Self::StackedLstm { .. } => Architecture::StackedLstm,
            Self::CnnLstm { .. } => Architecture::CnnLstm,
            Self::EncoderDecoderLstm { .. } => Architecture::EncoderDecoderLstm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub arch: ArchSpec,
    #[serde(default)]
    pub cell: CellKind,
    pub hidden: usize,
    pub classes: usize,
    pub seq_len: usize,
    pub features: usize,
}

impl ModelSpec {
    /// Defaults: H = 64, 27 classes over 12 × 25 inputs.
    pub fn new(arch: Architecture) -> Self {
        Self {
            arch: ArchSpec::default_for(arch, 64),
            cell: CellKind::Lstm,
            hidden: 64,
            classes: 27,
            seq_len: 12,
            features: 25,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        if let ArchSpec::EncoderDecoderLstm {
            encoder_hidden,
            decoder_hidden,
            ..
        } = &mut self.arch
        {
            if *encoder_hidden == self.hidden {
                *encoder_hidden = hidden;
            }
            if *decoder_hidden == self.hidden {
                *decoder_hidden = hidden;
            }
        }
        self.hidden = hidden;
        self
    }

    pub fn with_shape(mut self, seq_len: usize, features: usize, classes: usize) -> Self {
        self.seq_len = seq_len;
        self.features = features;
        self.classes = classes;
        self
    }

    pub fn with_cell(mut self, cell: CellKind) -> Self {
        self.cell = cell;
        self
    }

    pub fn architecture(&self) -> Architecture {
        self.arch.architecture()
    }

    /// Time steps seen by the recurrent layer after any convolution/pooling.
    pub fn recurrent_steps(&self) -> usize {
        match self.arch {
            ArchSpec::CnnLstm { width, pool, .. } => (self.seq_len + 1).saturating_sub(width).div_ceil(pool.max(1)),
            _ => self.seq_len,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidSpec(msg));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.hidden == 0 || self.seq_len == 0 || self.features == 0 {
            return bad("hidden size, sequence length and feature count must be positive".into());
        }
        match self.arch {
            ArchSpec::VanillaLstm => {}
            ArchSpec::StackedLstm { layers } if layers < 2 => {
                return bad(format!("stacked model needs at least 2 layers, got {layers}"))
            }
            ArchSpec::StackedLstm { .. } => {}
            ArchSpec::CnnLstm { kernels, width, pool } => {
                if kernels == 0 || width == 0 || pool == 0 {
                    return bad("convolution kernels, width and pool window must be positive".into());
                }
                if width > self.seq_len {
                    return bad(format!("kernel width {width} exceeds sequence length {}", self.seq_len));
                }
            }
            ArchSpec::EncoderDecoderLstm {
                encoder_hidden,
                decoder_hidden,
                decoder_steps,
            } => {
                if encoder_hidden == 0 || decoder_hidden == 0 || decoder_steps == 0 {
                    return bad("encoder/decoder sizes and decoder steps must be positive".into());
                }
            }
        }
        Ok(())
    }
}
