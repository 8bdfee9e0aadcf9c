use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, glorot_uniform, join_name, sigmoid, NnError, Parameters, Tensor2};

/// GRU cell weights, gate blocks stacked row-wise as update, reset, candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    /// 3H × F
    pub w_x: Tensor2,
    /// 3H × H
    pub w_h: Tensor2,
    /// 3H × 1
    pub b: Tensor2,
}

impl GruCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Tensor2::zeros(3 * hidden, input),
            w_h: Tensor2::zeros(3 * hidden, hidden),
            b: Tensor2::zeros(3 * hidden, 1),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        glorot_uniform(&mut p.w_x, input, hidden, rng);
        glorot_uniform(&mut p.w_h, hidden, hidden, rng);
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

impl Parameters for GruCellParams {
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

#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn gru_cell_step(p: &GruCellParams, x: &[f64], h_prev: &[f64]) -> Result<GruStepCache, NnError> {
    let hidden = p.hidden();
    check_len("gru_cell_step x", x.len(), p.input())?;
    check_len("gru_cell_step h_prev", h_prev.len(), hidden)?;

    // input contributions for all three blocks, recurrent only for z and r
    let mut a = p.b.as_slice().to_vec();
    p.w_x.matvec_acc(x, &mut a);
    for (k, ak) in a[..2 * hidden].iter_mut().enumerate() {
        *ak += super::dot(p.w_h.row(k), h_prev);
    }
    let z: Vec<f64> = a[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = a[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let n: Vec<f64> = (0..hidden)
        .map(|k| (a[2 * hidden + k] + super::dot(p.w_h.row(2 * hidden + k), &rh)).tanh())
        .collect();
    let h: Vec<f64> = (0..hidden).map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * n[k]).collect();
    Ok(GruStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        n,
        h,
    })
}

/// Accumulates parameter gradients; returns `(dx, dh_prev)`.
pub fn gru_cell_backward(
    p: &GruCellParams,
    cache: &GruStepCache,
    dh: &[f64],
    grads: &mut GruCellParams,
) -> (Vec<f64>, Vec<f64>) {
    let hidden = p.hidden();
    let mut da = vec![0.0; 3 * hidden];
    let mut dh_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let (z, n) = (cache.z[k], cache.n[k]);
        dh_prev[k] = dh[k] * (1.0 - z);
        da[k] = dh[k] * (n - cache.h_prev[k]) * z * (1.0 - z);
        da[2 * hidden + k] = dh[k] * z * (1.0 - n * n);
    }

    let rh: Vec<f64> = cache.r.iter().zip(&cache.h_prev).map(|(r, h)| r * h).collect();
    // candidate block sees r⊙h_prev through the last H rows of w_h
    let mut d_rh = vec![0.0; hidden];
    for k in 0..hidden {
        let dn = da[2 * hidden + k];
        if dn == 0.0 {
            continue;
        }
        let row = 2 * hidden + k;
        for (j, d) in d_rh.iter_mut().enumerate() {
            *d += dn * p.w_h.get(row, j);
        }
        for (g, &v) in grads.w_h.row_mut(row).iter_mut().zip(&rh) {
            *g += dn * v;
        }
    }
    for k in 0..hidden {
        let r = cache.r[k];
        da[hidden + k] = d_rh[k] * cache.h_prev[k] * r * (1.0 - r);
        dh_prev[k] += d_rh[k] * r;
    }
    for (k, &d) in da[..2 * hidden].iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        for (j, g) in grads.w_h.row_mut(k).iter_mut().enumerate() {
            *g += d * cache.h_prev[j];
        }
        for (j, dhp) in dh_prev.iter_mut().enumerate() {
            *dhp += d * p.w_h.get(k, j);
        }
    }

    grads.w_x.add_outer(&da, &cache.x);
    for (b, d) in grads.b.as_mut_slice().iter_mut().zip(&da) {
        *b += d;
    }
    let mut dx = vec![0.0; p.input()];
    p.w_x.matvec_t_acc(&da, &mut dx);
    (dx, dh_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{central_difference, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state() {
        let p = GruCellParams::zeros(3, 2);
        let s = gru_cell_step(&p, &[0.0; 3], &[0.0; 2]).unwrap();
        assert_eq!(s.h, vec![0.0; 2]);
    }

    #[test]
    fn zero_params_unit_state_halves() {
        let p = GruCellParams::zeros(3, 2);
        let s = gru_cell_step(&p, &[0.0; 3], &[1.0; 2]).unwrap();
        assert_eq!(s.z, vec![0.5; 2]);
        assert_eq!(s.n, vec![0.0; 2]);
        assert_eq!(s.h, vec![0.5; 2]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (input, hidden) = (4, 3);
        let mut p = GruCellParams::init(input, hidden, &mut rng);
        p.b.as_mut_slice()
            .iter_mut()
            .for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h0: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wts: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &GruCellParams, x: &[f64], h0: &[f64]| {
            let s = gru_cell_step(p, x, h0).unwrap();
            s.h.iter().zip(&wts).map(|(a, b)| a * b).sum::<f64>()
        };

        let cache = gru_cell_step(&p, &x, &h0).unwrap();
        let mut grads = p.zeros_like();
        let (dx, dh0) = gru_cell_backward(&p, &cache, &wts, &mut grads);

        let numeric = central_difference(&p.flatten(), 1e-5, |theta| {
            let mut q = p.clone();
            q.assign_flat(theta).unwrap();
            loss(&q, &x, &h0)
        });
        assert!(max_relative_error(&grads.flatten(), &numeric) < 1e-6);
        let nx = central_difference(&x, 1e-5, |v| loss(&p, v, &h0));
        let nh = central_difference(&h0, 1e-5, |v| loss(&p, &x, v));
        assert!(max_relative_error(&dx, &nx) < 1e-6);
        assert!(max_relative_error(&dh0, &nh) < 1e-6);
    }
}
