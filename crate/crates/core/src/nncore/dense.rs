use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, glorot_uniform, join_name, NnError, Parameters, Tensor2};

/// Probabilities are floored here before taking the log in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-15;

/// Fully connected classification head, `C × H` weights and `C` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl DenseParams {
    pub fn zeros(input: usize, classes: usize) -> Self {
        Self {
            w: Tensor2::zeros(classes, input),
            b: Tensor2::zeros(classes, 1),
        }
    }

    pub fn init<R: Rng>(input: usize, classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, classes);
        glorot_uniform(&mut p.w, input, classes, rng);
        p
    }

    pub fn classes(&self) -> usize {
        self.w.rows()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input(), self.classes())
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        self.w.axpy(scale, &other.w);
        self.b.axpy(scale, &other.b);
    }
}

impl Parameters for DenseParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2)) {
        f(join_name(prefix, "w"), &self.w);
        f(join_name(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn dense_softmax_forward(p: &DenseParams, h: &[f64]) -> Result<Vec<f64>, NnError> {
    check_len("dense_softmax_forward", h.len(), p.input())?;
    let mut logits = p.b.as_slice().to_vec();
    p.w.matvec_acc(h, &mut logits);
    Ok(softmax(&logits))
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, NnError> {
    if label >= probs.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// Backward of softmax + cross-entropy + affine map. Accumulates into
/// `grads` and returns ∂L/∂h.
pub fn dense_backward(p: &DenseParams, h: &[f64], probs: &[f64], label: usize, grads: &mut DenseParams) -> Vec<f64> {
    let mut dlogits = probs.to_vec();
    dlogits[label] -= 1.0;
    grads.w.add_outer(&dlogits, h);
    for (b, d) in grads.b.as_mut_slice().iter_mut().zip(&dlogits) {
        *b += d;
    }
    let mut dh = vec![0.0; p.input()];
    p.w.matvec_t_acc(&dlogits, &mut dh);
    dh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = DenseParams::zeros(5, 27);
        let probs = dense_softmax_forward(&p, &[0.3; 5]).unwrap();
        assert!(probs.iter().all(|&q| (q - 1.0 / 27.0).abs() < 1e-15));
        let loss = cross_entropy(&probs, 4).unwrap();
        assert!((loss - 27f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shifted_softmax_handles_large_logits() {
        let probs = softmax(&[1000.0, 1000.0 + 3f64.ln()]);
        assert!((probs[0] - 0.25).abs() < 1e-12);
        assert!((probs[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_hot_probabilities_have_zero_loss() {
        assert!(cross_entropy(&[0.0, 1.0, 0.0], 1).unwrap().abs() < 1e-15);
        // floored, not infinite
        let worst = cross_entropy(&[1.0, 0.0], 1).unwrap();
        assert!((worst - (-PROB_FLOOR.ln())).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            cross_entropy(&[0.5, 0.5], 2),
            Err(NnError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn wrong_hidden_width() {
        let p = DenseParams::zeros(3, 2);
        assert!(dense_softmax_forward(&p, &[0.0; 4]).is_err());
    }
}
