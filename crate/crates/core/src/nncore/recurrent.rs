use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    gru_cell_backward, gru_cell_step, lstm_cell_backward, lstm_cell_step, GruCellParams, GruStepCache, LstmCellParams,
    LstmStepCache, NnError, Parameters, Tensor2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CellKind {
    #[default]
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnMode {
    Last,
    All,
}

/// A recurrent layer unrolled over a `T × F` sequence from zero state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecurrentLayer {
    Lstm(LstmCellParams),
    Gru(GruCellParams),
}

#[derive(Debug, Clone)]
pub enum RecurrentCache {
    Lstm(Vec<LstmStepCache>),
    Gru(Vec<GruStepCache>),
}

impl RecurrentCache {
    pub fn steps(&self) -> usize {
        match self {
            Self::Lstm(s) => s.len(),
            Self::Gru(s) => s.len(),
        }
    }

    pub fn hidden_state(&self, t: usize) -> &[f64] {
        match self {
            Self::Lstm(s) => &s[t].h,
            Self::Gru(s) => &s[t].h,
        }
    }

    pub fn last_hidden(&self) -> &[f64] {
        self.hidden_state(self.steps() - 1)
    }

    /// Every hidden state stacked as `T × H`.
    pub fn all_hidden(&self) -> Tensor2 {
        let rows: Vec<Vec<f64>> = (0..self.steps()).map(|t| self.hidden_state(t).to_vec()).collect();
        Tensor2::from_rows(&rows).expect("uniform hidden width")
    }

    pub fn output(&self, mode: ReturnMode) -> Tensor2 {
        match mode {
            ReturnMode::All => self.all_hidden(),
            ReturnMode::Last => {
                let h = self.last_hidden();
                Tensor2::from_vec(1, h.len(), h.to_vec()).expect("row vector")
            }
        }
    }
}

impl RecurrentLayer {
    pub fn init<R: Rng>(kind: CellKind, input: usize, hidden: usize, rng: &mut R) -> Self {
        match kind {
            CellKind::Lstm => Self::Lstm(LstmCellParams::init(input, hidden, rng)),
            CellKind::Gru => Self::Gru(GruCellParams::init(input, hidden, rng)),
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            Self::Lstm(p) => p.hidden(),
            Self::Gru(p) => p.hidden(),
        }
    }

    pub fn input(&self) -> usize {
        match self {
            Self::Lstm(p) => p.input(),
            Self::Gru(p) => p.input(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Self::Lstm(p) => Self::Lstm(p.zeros_like()),
            Self::Gru(p) => Self::Gru(p.zeros_like()),
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        match (self, other) {
            (Self::Lstm(a), Self::Lstm(b)) => a.add_scaled(scale, b),
            (Self::Gru(a), Self::Gru(b)) => a.add_scaled(scale, b),
            _ => panic!("cell kind mismatch"),
        }
    }

    pub fn forward(&self, seq: &Tensor2) -> Result<RecurrentCache, NnError> {
        if seq.rows() == 0 || seq.cols() != self.input() {
            return Err(NnError::ShapeMismatch {
                context: "recurrent forward",
                expected: (seq.rows().max(1), self.input()),
                got: seq.shape(),
            });
        }
        let hidden = self.hidden();
        match self {
            Self::Lstm(p) => {
                let mut steps: Vec<LstmStepCache> = Vec::with_capacity(seq.rows());
                let zero = vec![0.0; hidden];
                for t in 0..seq.rows() {
                    let (h, c) = match steps.last() {
                        Some(s) => (&s.h, &s.c),
                        None => (&zero, &zero),
                    };
                    let step = lstm_cell_step(p, seq.row(t), h, c)?;
                    steps.push(step);
                }
                Ok(RecurrentCache::Lstm(steps))
            }
            Self::Gru(p) => {
                let mut steps: Vec<GruStepCache> = Vec::with_capacity(seq.rows());
                let zero = vec![0.0; hidden];
                for t in 0..seq.rows() {
                    let h = steps.last().map_or(&zero, |s| &s.h);
                    let step = gru_cell_step(p, seq.row(t), h)?;
                    steps.push(step);
                }
                Ok(RecurrentCache::Gru(steps))
            }
        }
    }

    /// Backpropagation through time. `d_hidden` holds ∂L/∂h_t for every step
    /// (`T × H`; rows for steps that do not feed the loss directly are zero).
    /// Accumulates into `grads` and returns ∂L/∂input (`T × F`).
    pub fn backward(&self, cache: &RecurrentCache, d_hidden: &Tensor2, grads: &mut Self) -> Tensor2 {
        let hidden = self.hidden();
        let steps = cache.steps();
        let mut d_in = Tensor2::zeros(steps, self.input());
        match (self, cache, grads) {
            (Self::Lstm(p), RecurrentCache::Lstm(cs), Self::Lstm(g)) => {
                let mut dh_next = vec![0.0; hidden];
                let mut dc_next = vec![0.0; hidden];
                for t in (0..steps).rev() {
                    let dh: Vec<f64> = d_hidden.row(t).iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                    let (dx, dh_prev, dc_prev) = lstm_cell_backward(p, &cs[t], &dh, &dc_next, g);
                    d_in.row_mut(t).copy_from_slice(&dx);
                    dh_next = dh_prev;
                    dc_next = dc_prev;
                }
            }
            (Self::Gru(p), RecurrentCache::Gru(cs), Self::Gru(g)) => {
                let mut dh_next = vec![0.0; hidden];
                for t in (0..steps).rev() {
                    let dh: Vec<f64> = d_hidden.row(t).iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                    let (dx, dh_prev) = gru_cell_backward(p, &cs[t], &dh, g);
                    d_in.row_mut(t).copy_from_slice(&dx);
                    dh_next = dh_prev;
                }
            }
            _ => panic!("recurrent cache / gradient kind mismatch"),
        }
        d_in
    }
}

impl Parameters for RecurrentLayer {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2)) {
        match self {
            Self::Lstm(p) => p.visit(prefix, f),
            Self::Gru(p) => p.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2)) {
        match self {
            Self::Lstm(p) => p.visit_mut(f),
            Self::Gru(p) => p.visit_mut(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{central_difference, lstm_cell_step, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, t: usize, f: usize) -> Tensor2 {
        Tensor2::from_vec(t, f, (0..t * f).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn single_step_unroll_equals_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = RecurrentLayer::init(CellKind::Lstm, 4, 3, &mut rng);
        let seq = random_seq(&mut rng, 1, 4);
        let cache = layer.forward(&seq).unwrap();
        let RecurrentLayer::Lstm(p) = &layer else {
            unreachable!()
        };
        let step = lstm_cell_step(p, seq.row(0), &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(cache.last_hidden(), step.h.as_slice());
    }

    #[test]
    fn zero_params_zero_input() {
        let layer = RecurrentLayer::Lstm(LstmCellParams::zeros(4, 3));
        let cache = layer.forward(&Tensor2::zeros(6, 4)).unwrap();
        assert!(cache.all_hidden().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_rejected() {
        let layer = RecurrentLayer::Lstm(LstmCellParams::zeros(4, 3));
        assert!(layer.forward(&Tensor2::zeros(0, 4)).is_err());
    }

    fn bptt_check(kind: CellKind) {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (t, f, h) = (5, 4, 3);
        let layer = RecurrentLayer::init(kind, f, h, &mut rng);
        let seq = random_seq(&mut rng, t, f);
        let weights = random_seq(&mut rng, t, h);
        let loss = |l: &RecurrentLayer, s: &Tensor2| {
            let c = l.forward(s).unwrap();
            super::super::dot(c.all_hidden().as_slice(), weights.as_slice())
        };
        let cache = layer.forward(&seq).unwrap();
        let mut g = layer.zeros_like();
        let d_in = layer.backward(&cache, &weights, &mut g);
        let numeric = central_difference(&layer.flatten(), 1e-5, |theta| {
            let mut q = layer.clone();
            q.assign_flat(theta).unwrap();
            loss(&q, &seq)
        });
        assert!(max_relative_error(&g.flatten(), &numeric) < 1e-6);
        let nx = central_difference(seq.as_slice(), 1e-5, |v| {
            loss(&layer, &Tensor2::from_vec(t, f, v.to_vec()).unwrap())
        });
        assert!(max_relative_error(d_in.as_slice(), &nx) < 1e-6);
    }

    #[test]
    fn lstm_bptt_matches_finite_differences() {
        bptt_check(CellKind::Lstm);
    }

    #[test]
    fn gru_bptt_matches_finite_differences() {
        bptt_check(CellKind::Gru);
    }

    #[test]
    fn zero_pad_row_adds_nothing_to_input_weight_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = RecurrentLayer::init(CellKind::Lstm, 3, 2, &mut rng);
        let mut seq = random_seq(&mut rng, 4, 3);
        seq.row_mut(3).fill(0.0);
        let mut d = Tensor2::zeros(4, 2);
        d.row_mut(3).copy_from_slice(&[1.0, -1.0]);
        let cache = layer.forward(&seq).unwrap();

        // only the last step gets upstream gradient; with x_3 = 0 its own
        // contribution to ∂L/∂W_x is zero, so running backward over the
        // padded step alone must leave w_x untouched.
        let RecurrentLayer::Lstm(p) = &layer else {
            unreachable!()
        };
        let RecurrentCache::Lstm(steps) = &cache else {
            unreachable!()
        };
        let mut g = p.zeros_like();
        let (_, dh_prev, _) = crate::nncore::lstm_cell_backward(p, &steps[3], d.row(3), &[0.0; 2], &mut g);
        assert!(g.w_x.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.w_h.as_slice().iter().any(|&v| v != 0.0));
        assert!(dh_prev.iter().any(|&v| v != 0.0));
    }

    proptest::proptest! {
        #[test]
        fn cell_state_growth_is_bounded(seed in 0u64..500, scale in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layer = RecurrentLayer::init(CellKind::Lstm, 3, 4, &mut rng);
            let mut seq = random_seq(&mut rng, 8, 3);
            seq.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            let RecurrentCache::Lstm(steps) = layer.forward(&seq).unwrap() else { unreachable!() };
            for s in &steps {
                for k in 0..4 {
                    proptest::prop_assert!(s.c[k].abs() <= s.c_prev[k].abs() + 1.0);
                }
            }
        }
    }
}
