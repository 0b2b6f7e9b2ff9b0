//! LSTM cell with a coupled input/forget gate and diagonal peepholes:
//!
//! ```text
//! iₜ = σ(W_xi xₜ + W_hi hₜ₋₁ + w_ci ⊙ cₜ₋₁ + b_i)
//! cₜ = (1 − iₜ) ⊙ cₜ₋₁ + iₜ ⊙ tanh(W_xc xₜ + W_hc hₜ₋₁ + b_c)
//! oₜ = σ(W_xo xₜ + W_ho hₜ₋₁ + w_co ⊙ cₜ + b_o)
//! hₜ = oₜ ⊙ tanh(cₜ)
//! ```
//!
//! The output gate peeks at the new cell state `cₜ`, the input gate at the
//! previous one.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::math::{axpy, sigmoid, tanh, Matrix};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub w_ci: Vec<f64>,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub w_co: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// Names of the eleven parameter tensors, in [`LstmCell::tensors`] order.
pub const LSTM_TENSORS: [&str; 11] = [
    "w_xi", "w_hi", "w_ci", "w_xc", "w_hc", "w_xo", "w_ho", "w_co", "b_i", "b_c", "b_o",
];

/// Forward values of one step kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let m = |cols| Matrix::zeros(hidden, cols);
        Self {
            w_xi: m(input_dim),
            w_hi: m(hidden),
            w_ci: vec![0.0; hidden],
            w_xc: m(input_dim),
            w_hc: m(hidden),
            w_xo: m(input_dim),
            w_ho: m(hidden),
            w_co: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
        }
    }

    /// Every weight and bias uniform in `[-range, range]`.
    pub fn uniform<R: Rng>(input_dim: usize, hidden: usize, range: f64, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input_dim, hidden);
        for t in cell.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-range..=range);
            }
        }
        cell
    }

    /// Glorot-style ranges for the matrices, zero biases and peepholes.
    pub fn scaled<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(input_dim, hidden);
        let xr = libm::sqrt(6.0 / (input_dim + hidden) as f64);
        let hr = libm::sqrt(6.0 / (2 * hidden) as f64);
        for m in [&mut cell.w_xi, &mut cell.w_xc, &mut cell.w_xo] {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&rng::uniform_vec(rng, n, xr));
        }
        for m in [&mut cell.w_hi, &mut cell.w_hc, &mut cell.w_ho] {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&rng::uniform_vec(rng, n, hr));
        }
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.rows()
    }

    pub fn tensors(&self) -> [&[f64]; 11] {
        [
            self.w_xi.as_slice(),
            self.w_hi.as_slice(),
            &self.w_ci,
            self.w_xc.as_slice(),
            self.w_hc.as_slice(),
            self.w_xo.as_slice(),
            self.w_ho.as_slice(),
            &self.w_co,
            &self.b_i,
            &self.b_c,
            &self.b_o,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 11] {
        [
            self.w_xi.as_mut_slice(),
            self.w_hi.as_mut_slice(),
            &mut self.w_ci,
            self.w_xc.as_mut_slice(),
            self.w_hc.as_mut_slice(),
            self.w_xo.as_mut_slice(),
            self.w_ho.as_mut_slice(),
            &mut self.w_co,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }

    /// `(rows, cols)` of each tensor, peepholes and biases as `1 × H`.
    pub fn shapes(&self) -> [(usize, usize); 11] {
        let (h, x) = (self.hidden_dim(), self.input_dim());
        [(h, x), (h, h), (1, h), (h, x), (h, h), (h, x), (h, h), (1, h), (1, h), (1, h), (1, h)]
    }

    /// `self += alpha · other`
    pub fn add_scaled(&mut self, alpha: f64, other: &LstmCell) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(alpha, src, dst);
        }
    }

    /// One step of the recurrence.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.hidden_dim();
        let check = |context, expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::Dimension { context, expected, actual })
            }
        };
        check("LSTM input", self.input_dim(), x.len())?;
        check("LSTM previous hidden state", h, h_prev.len())?;
        check("LSTM previous cell state", h, c_prev.len())?;
        let s = self.step_cached(x, h_prev.to_vec(), c_prev.to_vec());
        Ok((s.h, s.c))
    }

    fn step_cached(&self, x: &[f64], h_prev: Vec<f64>, c_prev: Vec<f64>) -> StepCache {
        let hd = self.hidden_dim();
        let mut a_i = self.b_i.clone();
        self.w_xi.matvec_acc(x, &mut a_i);
        self.w_hi.matvec_acc(&h_prev, &mut a_i);
        let mut a_c = self.b_c.clone();
        self.w_xc.matvec_acc(x, &mut a_c);
        self.w_hc.matvec_acc(&h_prev, &mut a_c);
        let mut a_o = self.b_o.clone();
        self.w_xo.matvec_acc(x, &mut a_o);
        self.w_ho.matvec_acc(&h_prev, &mut a_o);

        let mut input_gate = vec![0.0; hd];
        let mut candidate = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut output_gate = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for k in 0..hd {
            let i = sigmoid(a_i[k] + self.w_ci[k] * c_prev[k]);
            let g = tanh(a_c[k]);
            let ck = (1.0 - i) * c_prev[k] + i * g;
            let o = sigmoid(a_o[k] + self.w_co[k] * ck);
            let tc = tanh(ck);
            input_gate[k] = i;
            candidate[k] = g;
            c[k] = ck;
            output_gate[k] = o;
            tanh_c[k] = tc;
            h[k] = o * tc;
        }
        StepCache {
            h_prev,
            c_prev,
            input_gate,
            candidate,
            c,
            output_gate,
            tanh_c,
            h,
        }
    }

    /// Runs the cell over `xs` from zero initial state.
    pub fn run(&self, xs: &[&[f64]]) -> Vec<StepCache> {
        let hd = self.hidden_dim();
        let mut out: Vec<StepCache> = Vec::with_capacity(xs.len());
        for x in xs {
            let (h_prev, c_prev) = match out.last() {
                Some(s) => (s.h.clone(), s.c.clone()),
                None => (vec![0.0; hd], vec![0.0; hd]),
            };
            out.push(self.step_cached(x, h_prev, c_prev));
        }
        out
    }

    /// Backpropagation through time. `dh[t]` is the loss gradient with
    /// respect to the output `hₜ`; parameter gradients accumulate into `grad`
    /// and input gradients into `dx`.
    pub fn backprop(
        &self,
        xs: &[&[f64]],
        caches: &[StepCache],
        dh: &[&[f64]],
        grad: &mut LstmCell,
        dx: &mut [&mut [f64]],
    ) {
        let hd = self.hidden_dim();
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut da_i = vec![0.0; hd];
        let mut da_c = vec![0.0; hd];
        let mut da_o = vec![0.0; hd];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            for k in 0..hd {
                let dh_k = dh[t][k] + dh_next[k];
                let o = s.output_gate[k];
                let do_ = dh_k * s.tanh_c[k];
                da_o[k] = do_ * o * (1.0 - o);
                let dc = dc_next[k] + dh_k * o * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + da_o[k] * self.w_co[k];
                grad.w_co[k] += da_o[k] * s.c[k];
                let i = s.input_gate[k];
                let g = s.candidate[k];
                da_i[k] = dc * (g - s.c_prev[k]) * i * (1.0 - i);
                da_c[k] = dc * i * (1.0 - g * g);
                grad.w_ci[k] += da_i[k] * s.c_prev[k];
                dc_next[k] = dc * (1.0 - i) + da_i[k] * self.w_ci[k];
            }
            axpy(1.0, &da_i, &mut grad.b_i);
            axpy(1.0, &da_c, &mut grad.b_c);
            axpy(1.0, &da_o, &mut grad.b_o);
            grad.w_xi.outer_acc(&da_i, xs[t]);
            grad.w_xc.outer_acc(&da_c, xs[t]);
            grad.w_xo.outer_acc(&da_o, xs[t]);
            grad.w_hi.outer_acc(&da_i, &s.h_prev);
            grad.w_hc.outer_acc(&da_c, &s.h_prev);
            grad.w_ho.outer_acc(&da_o, &s.h_prev);
            self.w_xi.matvec_t_acc(&da_i, dx[t]);
            self.w_xc.matvec_t_acc(&da_c, dx[t]);
            self.w_xo.matvec_t_acc(&da_o, dx[t]);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.w_hi.matvec_t_acc(&da_i, &mut dh_next);
            self.w_hc.matvec_t_acc(&da_c, &mut dh_next);
            self.w_ho.matvec_t_acc(&da_o, &mut dh_next);
        }
    }
}

/// Left-to-right and right-to-left passes concatenated per position.
pub fn bilstm(fwd: &LstmCell, bwd: &LstmCell, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if xs.is_empty() {
        return Err(Error::Empty("BiLSTM input sequence"));
    }
    for x in xs {
        for cell in [fwd, bwd] {
            if x.len() != cell.input_dim() {
                return Err(Error::Dimension {
                    context: "BiLSTM input",
                    expected: cell.input_dim(),
                    actual: x.len(),
                });
            }
        }
    }
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let rev: Vec<&[f64]> = refs.iter().rev().copied().collect();
    let f = fwd.run(&refs);
    let b = bwd.run(&rev);
    Ok((0..xs.len())
        .map(|t| {
            let mut h = f[t].h.clone();
            h.extend_from_slice(&b[xs.len() - 1 - t].h);
            h
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_stays_at_zero() {
        let cell = LstmCell::zeros(3, 2);
        let (h, c) = cell.step(&[0.5, -1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!((h, c), (vec![0.0, 0.0], vec![0.0, 0.0]));
    }

    #[test]
    fn scalar_zero_parameters_with_unit_cell() {
        let cell = LstmCell::zeros(1, 1);
        let (h, c) = cell.step(&[0.0], &[0.0], &[1.0]).unwrap();
        assert_eq!(c[0], 0.5);
        let expected = 0.5 * libm::tanh(0.5);
        assert!((h[0] - expected).abs() < 1e-12);
        assert!((h[0] - 0.231_059).abs() < 1e-6);
    }

    #[test]
    fn dimension_errors() {
        let cell = LstmCell::zeros(2, 1);
        assert!(cell.step(&[0.0], &[0.0], &[0.0]).is_err());
        assert!(cell.step(&[0.0, 0.0], &[0.0, 0.0], &[0.0]).is_err());
        assert!(bilstm(&cell, &cell, &[]).is_err());
    }

    #[test]
    fn bilstm_zero_and_reverse_symmetry() {
        let zero = LstmCell::zeros(2, 3);
        let out = bilstm(&zero, &zero, &[vec![1.0, 2.0], vec![-1.0, 0.0]]).unwrap();
        assert!(out.iter().all(|h| h.len() == 6 && h.iter().all(|&v| v == 0.0)));

        let mut r = rng::stream(1, &[b"bilstm"]);
        let f = LstmCell::uniform(2, 3, 1.0, &mut r);
        let b = LstmCell::uniform(2, 3, 1.0, &mut r);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| rng::uniform_vec(&mut r, 2, 1.0)).collect();
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let a = bilstm(&f, &b, &xs).unwrap();
        let swapped = bilstm(&b, &f, &rev).unwrap();
        for t in 0..4 {
            assert_eq!(a[t][..3], swapped[3 - t][3..]);
            assert_eq!(a[t][3..], swapped[3 - t][..3]);
        }
        let single = bilstm(&f, &b, &xs[..1]).unwrap();
        let (hf, _) = f.step(&xs[0], &[0.0; 3], &[0.0; 3]).unwrap();
        let (hb, _) = b.step(&xs[0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(single[0][..3], hf[..]);
        assert_eq!(single[0][3..], hb[..]);
    }
}
