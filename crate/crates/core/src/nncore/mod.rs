//! Small neural-network core: recurrent cells, 1-D convolution, a softmax
//! head, hand-derived backward passes, Adam and a finite-difference checker.
//!
//! Everything runs on single examples in `f64`. Batching happens one level up
//! by summing per-example gradients.

mod adam;
mod conv;
mod dense;
mod gradcheck;
mod gru;
mod lstm;
mod recurrent;
mod serialize;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv1d_backward, conv1d_forward, maxpool1d, maxpool1d_backward, Conv1dCache, Conv1dParams, PoolCache};
pub use dense::{cross_entropy, dense_backward, dense_softmax_forward, softmax, DenseParams, PROB_FLOOR};
pub use gradcheck::{central_difference, gradient_check, max_relative_error, relative_error};
pub use gru::{gru_cell_backward, gru_cell_step, GruCellParams, GruStepCache};
pub use lstm::{lstm_cell_backward, lstm_cell_step, LstmCellParams, LstmStepCache};
pub use recurrent::{CellKind, RecurrentCache, RecurrentLayer, ReturnMode};
pub use serialize::{read_params, write_params, NamedTensor, PARAMS_MAGIC, PARAMS_VERSION};
pub use tensor::{dot, sigmoid, Tensor2};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("kernel width {width} exceeds sequence length {len}")]
    KernelTooWide { width: usize, len: usize },
    #[error("forward cache is stale (parameters changed since forward pass)")]
    StaleCache,
    #[error("parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything owning trainable tensors. Visiting order is fixed and defines the
/// flat parameter layout used by the optimizer, the checker and the file
/// format.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, t| n += t.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit("", &mut |_, t| out.extend_from_slice(t.as_slice()));
        out
    }

    /// Overwrite all parameters from a flat slice laid out as [`Parameters::flatten`].
    fn assign_flat(&mut self, flat: &[f64]) -> Result<(), NnError> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(NnError::ShapeMismatch {
                context: "assign_flat",
                expected: (expected, 1),
                got: (flat.len(), 1),
            });
        }
        let mut offset = 0;
        self.visit_mut(&mut |t| {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        Ok(())
    }

    fn named_tensors(&self) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        self.visit("", &mut |name, t| {
            out.push(NamedTensor {
                name,
                tensor: t.clone(),
            })
        });
        out
    }
}

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Glorot-uniform fill in ±√(6/(fan_in+fan_out)).
pub(crate) fn glorot_uniform<R: Rng>(t: &mut Tensor2, fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.as_mut_slice() {
        *v = rng.gen_range(-limit..=limit);
    }
}

pub(crate) fn check_len(context: &'static str, got: usize, expected: usize) -> Result<(), NnError> {
    if got != expected {
        return Err(NnError::ShapeMismatch {
            context,
            expected: (expected, 1),
            got: (got, 1),
        });
    }
    Ok(())
}
