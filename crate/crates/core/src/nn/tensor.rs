use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Glorot-uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy with the row order reversed.
    pub fn reversed_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            out.row_mut(self.rows - 1 - r).copy_from_slice(self.row(r));
        }
        out
    }

    /// `out += self * x`, restricted to rows `[row_start, row_end)`.
    pub fn matvec_acc_rows(&self, x: &[f64], out: &mut [f64], row_start: usize, row_end: usize) {
        debug_assert_eq!(x.len(), self.cols);
        for r in row_start..row_end {
            let row = self.row(r);
            let mut s = 0.0;
            for (w, v) in row.iter().zip(x) {
                s += w * v;
            }
            out[r] += s;
        }
    }

    /// `out += self * x`.
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_acc_rows(x, out, 0, self.rows);
    }

    /// `out += selfᵀ * d`, using rows `[row_start, row_end)` only.
    pub fn matvec_t_acc_rows(&self, d: &[f64], out: &mut [f64], row_start: usize, row_end: usize) {
        debug_assert_eq!(out.len(), self.cols);
        for r in row_start..row_end {
            let dr = d[r];
            if dr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * dr;
            }
        }
    }

    pub fn matvec_t_acc(&self, d: &[f64], out: &mut [f64]) {
        self.matvec_t_acc_rows(d, out, 0, self.rows);
    }

    /// `self += d xᵀ` for rows `[row_start, row_end)`.
    pub fn outer_acc_rows(&mut self, d: &[f64], x: &[f64], row_start: usize, row_end: usize) {
        debug_assert_eq!(x.len(), self.cols);
        for r in row_start..row_end {
            let dr = d[r];
            if dr == 0.0 {
                continue;
            }
            let cols = self.cols;
            for (g, v) in self.data[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                *g += dr * v;
            }
        }
    }

    pub fn outer_acc(&mut self, d: &[f64], x: &[f64]) {
        self.outer_acc_rows(d, x, 0, self.rows);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let mut out = vec![0.0; 3];
        m.matvec_acc(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-1.0, -1.0, -1.0]);
        let mut back = vec![0.0; 2];
        m.matvec_t_acc(&[1.0, 0.0, 1.0], &mut back);
        assert_eq!(back, vec![6.0, 8.0]);
        let mut g = Matrix::zeros(3, 2);
        g.outer_acc(&[1.0, 2.0, 0.0], &[3.0, 4.0]);
        assert_eq!(g.data(), &[3.0, 4.0, 6.0, 8.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_examples() {
        let w = softmax(&[0.0, 3f64.ln()]);
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 0.75).abs() < 1e-12);
        let big = softmax(&[1000.0, 1000.0]);
        assert_eq!(big, vec![0.5, 0.5]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
