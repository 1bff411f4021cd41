//! LSTM cell and sequence passes with backpropagation through time.
//!
//! Gate pre-activations are stacked in one `4H` block in the order
//! input, forget, output, candidate:
//!
//! ```text
//! i = σ(W_xi x + W_hi h + b_i)      rows [0, H)
//! f = σ(W_xf x + W_hf h + b_f)      rows [H, 2H)
//! o = σ(W_xo x + W_ho h + b_o)      rows [2H, 3H)
//! g = tanh(W_xg x + W_hg h + b_g)   rows [3H, 4H)
//! c' = f * c + i * g
//! h' = o * tanh(c')
//! ```
//!
//! With `candidate_recurrence` disabled the `W_hg h` term is dropped and the
//! candidate sees only the current input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SequenceTrace {
    /// Post-activation gates `[i, f, o, g]`, one `4H` row per step.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Matrix::zeros(4 * hidden, input),
            w_h: Matrix::zeros(4 * hidden, hidden),
            b: Matrix::zeros(4 * hidden, 1),
        }
    }

    /// Glorot per gate block, zero biases except forget-gate bias `1.0`.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = LstmParams {
            w_x: Matrix::glorot(4 * hidden, input, input, hidden, rng),
            w_h: Matrix::glorot(4 * hidden, hidden, hidden, hidden, rng),
            b: Matrix::zeros(4 * hidden, 1),
        };
        for k in hidden..2 * hidden {
            p.b.data_mut()[k] = 1.0;
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    /// Rows of `w_h` that feed the pre-activations.
    fn recurrent_rows(&self, candidate_recurrence: bool) -> usize {
        let h = self.hidden();
        if candidate_recurrence {
            4 * h
        } else {
            3 * h
        }
    }

    fn step(&self, x: &[f64], prev: &LstmState, candidate_recurrence: bool) -> (Vec<f64>, LstmState) {
        let h = self.hidden();
        let mut a = self.b.data().to_vec();
        self.w_x.matvec_acc(x, &mut a);
        self.w_h
            .matvec_acc_rows(&prev.h, &mut a, 0, self.recurrent_rows(candidate_recurrence));
        for v in &mut a[..3 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut a[3 * h..] {
            *v = v.tanh();
        }
        let mut c = vec![0.0; h];
        let mut hid = vec![0.0; h];
        for k in 0..h {
            let (i, f, o, g) = (a[k], a[h + k], a[2 * h + k], a[3 * h + k]);
            c[k] = f * prev.c[k] + i * g;
            hid[k] = o * c[k].tanh();
        }
        (a, LstmState { h: hid, c })
    }

    pub fn forward_sequence(&self, xs: &Matrix, candidate_recurrence: bool) -> SequenceTrace {
        let h = self.hidden();
        let mut state = LstmState::zeros(h);
        let mut trace = SequenceTrace {
            gates: Vec::with_capacity(xs.rows()),
            cells: Vec::with_capacity(xs.rows()),
            hidden: Vec::with_capacity(xs.rows()),
        };
        for t in 0..xs.rows() {
            let (gates, next) = self.step(xs.row(t), &state, candidate_recurrence);
            trace.gates.push(gates);
            trace.cells.push(next.c.clone());
            trace.hidden.push(next.h.clone());
            state = next;
        }
        trace
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to every input row. `dh` holds dL/dh_t coming from above.
    pub fn backward_sequence(
        &self,
        xs: &Matrix,
        trace: &SequenceTrace,
        dh: &Matrix,
        grads: &mut LstmParams,
        candidate_recurrence: bool,
    ) -> Matrix {
        let h = self.hidden();
        let steps = xs.rows();
        let rec_rows = self.recurrent_rows(candidate_recurrence);
        let mut dx = Matrix::zeros(steps, self.input());
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zeros = vec![0.0; h];
        let mut da = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let g = &trace.gates[t];
            let c = &trace.cells[t];
            let c_prev = if t > 0 { &trace.cells[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &trace.hidden[t - 1] } else { &zeros };
            let dh_t = dh.row(t);
            for k in 0..h {
                let (i, f, o, cand) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let grad_h = dh_t[k] + dh_next[k];
                let tc = c[k].tanh();
                let d_o = grad_h * tc;
                let dc = grad_h * o * (1.0 - tc * tc) + dc_next[k];
                let d_i = dc * cand;
                let d_g = dc * i;
                let d_f = dc * c_prev[k];
                da[k] = d_i * i * (1.0 - i);
                da[h + k] = d_f * f * (1.0 - f);
                da[2 * h + k] = d_o * o * (1.0 - o);
                da[3 * h + k] = d_g * (1.0 - cand * cand);
                dc_next[k] = dc * f;
            }
            grads.w_x.outer_acc(&da, xs.row(t));
            grads.w_h.outer_acc_rows(&da, h_prev, 0, rec_rows);
            for (gb, d) in grads.b.data_mut().iter_mut().zip(&da) {
                *gb += d;
            }
            self.w_x.matvec_t_acc(&da, dx.row_mut(t));
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.w_h.matvec_t_acc_rows(&da, &mut dh_next, 0, rec_rows);
        }
        dx
    }
}

/// One LSTM step on `x` from `prev`.
pub fn lstm_cell_forward(
    x: &[f64],
    prev: &LstmState,
    params: &LstmParams,
    candidate_recurrence: bool,
) -> Result<LstmState> {
    if x.len() != params.input() || prev.h.len() != params.hidden() || prev.c.len() != params.hidden() {
        return Err(Error::SchemaMismatch(format!(
            "cell expects input {} / hidden {}, got {} / {}",
            params.input(),
            params.hidden(),
            x.len(),
            prev.h.len()
        )));
    }
    if x.iter().chain(&prev.h).chain(&prev.c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lstm cell input".into()));
    }
    Ok(params.step(x, prev, candidate_recurrence).1)
}
