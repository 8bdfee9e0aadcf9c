use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, glorot_uniform, join_name, sigmoid, NnError, Parameters, Tensor2};

/// LSTM cell weights. Gate blocks are stacked row-wise in the order
/// input, forget, candidate, output; each block is `hidden` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    /// 4H × F input weights.
    pub w_x: Tensor2,
    /// 4H × H recurrent weights.
    pub w_h: Tensor2,
    /// 4H × 1 bias.
    pub b: Tensor2,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor2::zeros(4 * hidden, input),
            w_h: Tensor2::zeros(4 * hidden, hidden),
            b: Tensor2::zeros(4 * hidden, 1),
        }
    }

    /// Glorot-uniform weights per gate block, zero biases except the forget
    /// gate which starts at +1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        glorot_uniform(&mut p.w_x, input, hidden, rng);
        glorot_uniform(&mut p.w_h, hidden, hidden, rng);
        for k in hidden..2 * hidden {
            p.b.set(k, 0, 1.0);
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input(), self.hidden())
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Self) {
        self.w_x.axpy(scale, &other.w_x);
        self.w_h.axpy(scale, &other.w_h);
        self.b.axpy(scale, &other.b);
    }
}

impl Parameters for LstmCellParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2)) {
        f(join_name(prefix, "w_x"), &self.w_x);
        f(join_name(prefix, "w_h"), &self.w_h);
        f(join_name(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2)) {
        f(&mut self.w_x);
        f(&mut self.w_h);
        f(&mut self.b);
    }
}

/// Intermediates of one LSTM step kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn lstm_cell_step(p: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStepCache, NnError> {
    let hidden = p.hidden();
    check_len("lstm_cell_step x", x.len(), p.input())?;
    check_len("lstm_cell_step h_prev", h_prev.len(), hidden)?;
    check_len("lstm_cell_step c_prev", c_prev.len(), hidden)?;

    let mut z = p.b.as_slice().to_vec();
    p.w_x.matvec_acc(x, &mut z);
    p.w_h.matvec_acc(h_prev, &mut z);

    let i: Vec<f64> = z[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[2 * hidden..3 * hidden].iter().map(|&v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();

    let c: Vec<f64> = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();

    Ok(LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    })
}

/// Backward through one step. `dh` and `dc` are the total upstream gradients
/// arriving at this step's outputs. Parameter gradients are accumulated into
/// `grads`; returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    p: &LstmCellParams,
    cache: &LstmStepCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmCellParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hidden = p.hidden();
    let mut dz = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, g, o, tc) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
        let d_o = dh[k] * tc;
        let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
        let d_i = dc_total * g;
        let d_g = dc_total * i;
        let d_f = dc_total * cache.c_prev[k];
        dc_prev[k] = dc_total * f;
        dz[k] = d_i * i * (1.0 - i);
        dz[hidden + k] = d_f * f * (1.0 - f);
        dz[2 * hidden + k] = d_g * (1.0 - g * g);
        dz[3 * hidden + k] = d_o * o * (1.0 - o);
    }

    grads.w_x.add_outer(&dz, &cache.x);
    grads.w_h.add_outer(&dz, &cache.h_prev);
    for (b, d) in grads.b.as_mut_slice().iter_mut().zip(&dz) {
        *b += d;
    }

    let mut dx = vec![0.0; p.input()];
    p.w_x.matvec_t_acc(&dz, &mut dx);
    let mut dh_prev = vec![0.0; hidden];
    p.w_h.matvec_t_acc(&dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{central_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state_gives_zero_output() {
        let p = LstmCellParams::zeros(4, 3);
        let s = lstm_cell_step(&p, &[0.0; 4], &[0.0; 3], &[0.0; 3]).unwrap();
        assert!(s.i.iter().chain(&s.f).chain(&s.o).all(|&v| v == 0.5));
        assert!(s.g.iter().all(|&v| v == 0.0));
        assert_eq!(s.h, vec![0.0; 3]);
        assert_eq!(s.c, vec![0.0; 3]);
    }

    #[test]
    fn zero_params_unit_cell_state() {
        // c = 0.5·1 + 0.5·0, h = 0.5·tanh(0.5)
        let p = LstmCellParams::zeros(2, 3);
        let s = lstm_cell_step(&p, &[0.0; 2], &[0.0; 3], &[1.0; 3]).unwrap();
        for k in 0..3 {
            assert_eq!(s.c[k], 0.5);
            assert!((s.h[k] - 0.231_058_578_630_005).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = LstmCellParams::zeros(4, 3);
        assert!(matches!(
            lstm_cell_step(&p, &[0.0; 5], &[0.0; 3], &[0.0; 3]),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn cell_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (input, hidden) = (4, 3);
        let mut p = LstmCellParams::init(input, hidden, &mut rng);
        p.b.as_mut_slice()
            .iter_mut()
            .for_each(|b| *b += rng.gen_range(-0.5..0.5));
        let x = random_vec(&mut rng, input);
        let h0 = random_vec(&mut rng, hidden);
        let c0 = random_vec(&mut rng, hidden);
        let wh = random_vec(&mut rng, hidden);
        let wc = random_vec(&mut rng, hidden);

        let loss = |p: &LstmCellParams, x: &[f64], h0: &[f64], c0: &[f64]| {
            let s = lstm_cell_step(p, x, h0, c0).unwrap();
            s.h.iter().zip(&wh).map(|(a, b)| a * b).sum::<f64>() + s.c.iter().zip(&wc).map(|(a, b)| a * b).sum::<f64>()
        };

        let cache = lstm_cell_step(&p, &x, &h0, &c0).unwrap();
        let mut grads = p.zeros_like();
        let (dx, dh0, dc0) = lstm_cell_backward(&p, &cache, &wh, &wc, &mut grads);

        let flat = p.flatten();
        let numeric = central_difference(&flat, 1e-5, |theta| {
            let mut q = p.clone();
            q.assign_flat(theta).unwrap();
            loss(&q, &x, &h0, &c0)
        });
        assert!(max_relative_error(&grads.flatten(), &numeric) < 1e-6);

        let nx = central_difference(&x, 1e-5, |v| loss(&p, v, &h0, &c0));
        let nh = central_difference(&h0, 1e-5, |v| loss(&p, &x, v, &c0));
        let nc = central_difference(&c0, 1e-5, |v| loss(&p, &x, &h0, v));
        assert!(max_relative_error(&dx, &nx) < 1e-6);
        assert!(max_relative_error(&dh0, &nh) < 1e-6);
        assert!(max_relative_error(&dc0, &nc) < 1e-6);
    }
}
