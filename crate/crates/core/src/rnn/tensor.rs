//! Dense row-major matrices and the parameter containers shared by the
//! model, its gradients and the optimizer moments.

use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries.
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut SimRng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.uniform_in(-bound, bound)).collect(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// `out += self * x`
    #[inline]
    pub fn matvec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (row, o) in self.data.chunks_exact(self.cols).zip(out.iter_mut()) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += self' * y`
    #[inline]
    pub fn matvec_t_add(&self, y: &[f64], out: &mut [f64]) {
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(row) {
                    *o += a * yi;
                }
            }
        }
    }

    /// `self += y x'`
    #[inline]
    pub fn outer_add(&mut self, y: &[f64], x: &[f64]) {
        for (row, &yi) in self.data.chunks_exact_mut(self.cols).zip(y) {
            if yi != 0.0 {
                for (r, xj) in row.iter_mut().zip(x) {
                    *r += yi * xj;
                }
            }
        }
    }
}

pub(crate) fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Weights and biases of one LSTM layer. Gate order everywhere is
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    #[serde(rename = "W_ii")]
    pub w_ii: Mat,
    #[serde(rename = "W_if")]
    pub w_if: Mat,
    #[serde(rename = "W_ig")]
    pub w_ig: Mat,
    #[serde(rename = "W_io")]
    pub w_io: Mat,
    #[serde(rename = "W_hi")]
    pub w_hi: Mat,
    #[serde(rename = "W_hf")]
    pub w_hf: Mat,
    #[serde(rename = "W_hg")]
    pub w_hg: Mat,
    #[serde(rename = "W_ho")]
    pub w_ho: Mat,
    pub b_ii: Vec<f64>,
    pub b_if: Vec<f64>,
    pub b_ig: Vec<f64>,
    pub b_io: Vec<f64>,
    pub b_hi: Vec<f64>,
    pub b_hf: Vec<f64>,
    pub b_hg: Vec<f64>,
    pub b_ho: Vec<f64>,
}

pub const LSTM_TENSOR_NAMES: [&str; 16] = [
    "W_ii", "W_if", "W_ig", "W_io", "W_hi", "W_hf", "W_hg", "W_ho", "b_ii", "b_if", "b_ig", "b_io", "b_hi", "b_hf",
    "b_hg", "b_ho",
];

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let wi = || Mat::zeros(hidden, input);
        let wh = || Mat::zeros(hidden, hidden);
        let b = || vec![0.0; hidden];
        Self {
            w_ii: wi(),
            w_if: wi(),
            w_ig: wi(),
            w_io: wi(),
            w_hi: wh(),
            w_hf: wh(),
            w_hg: wh(),
            w_ho: wh(),
            b_ii: b(),
            b_if: b(),
            b_ig: b(),
            b_io: b(),
            b_hi: b(),
            b_hf: b(),
            b_hg: b(),
            b_ho: b(),
        }
    }

    /// Uniform in `+-1/sqrt(hidden)` for every entry.
    pub fn init(input: usize, hidden: usize, rng: &mut SimRng) -> Self {
        let mut p = Self::zeros(input, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.uniform_in(-bound, bound);
            }
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_ii.cols
    }

    pub fn hidden_size(&self) -> usize {
        self.w_ii.rows
    }

    pub fn w_input(&self) -> [&Mat; 4] {
        [&self.w_ii, &self.w_if, &self.w_ig, &self.w_io]
    }

    pub fn w_hidden(&self) -> [&Mat; 4] {
        [&self.w_hi, &self.w_hf, &self.w_hg, &self.w_ho]
    }

    pub fn b_input(&self) -> [&Vec<f64>; 4] {
        [&self.b_ii, &self.b_if, &self.b_ig, &self.b_io]
    }

    pub fn b_hidden(&self) -> [&Vec<f64>; 4] {
        [&self.b_hi, &self.b_hf, &self.b_hg, &self.b_ho]
    }

    pub fn tensors(&self) -> [&[f64]; 16] {
        [
            &self.w_ii.data,
            &self.w_if.data,
            &self.w_ig.data,
            &self.w_io.data,
            &self.w_hi.data,
            &self.w_hf.data,
            &self.w_hg.data,
            &self.w_ho.data,
            &self.b_ii,
            &self.b_if,
            &self.b_ig,
            &self.b_io,
            &self.b_hi,
            &self.b_hf,
            &self.b_hg,
            &self.b_ho,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 16] {
        [
            &mut self.w_ii.data,
            &mut self.w_if.data,
            &mut self.w_ig.data,
            &mut self.w_io.data,
            &mut self.w_hi.data,
            &mut self.w_hf.data,
            &mut self.w_hg.data,
            &mut self.w_ho.data,
            &mut self.b_ii,
            &mut self.b_if,
            &mut self.b_ig,
            &mut self.b_io,
            &mut self.b_hi,
            &mut self.b_hf,
            &mut self.b_hg,
            &mut self.b_ho,
        ]
    }

    /// Shape check: `(rows, cols)` of every tensor, biases as `(n, 1)`.
    pub fn shapes_consistent(&self) -> bool {
        let (h, i) = (self.hidden_size(), self.input_size());
        self.w_input().iter().all(|m| m.rows == h && m.cols == i && m.data.len() == h * i)
            && self.w_hidden().iter().all(|m| m.rows == h && m.cols == h && m.data.len() == h * h)
            && self.b_input().iter().chain(self.b_hidden().iter()).all(|b| b.len() == h)
    }
}

/// Affine map `W a + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    #[serde(rename = "W")]
    pub w: Mat,
    pub b: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Mat::zeros(output, input),
            b: vec![0.0; output],
        }
    }

    /// Uniform in `+-1/sqrt(fan_in)`.
    pub fn init(input: usize, output: usize, rng: &mut SimRng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            w: Mat::uniform(output, input, bound, rng),
            b: (0..output).map(|_| rng.uniform_in(-bound, bound)).collect(),
        }
    }
}

/// Every trainable tensor of the model. Also used for gradients and
/// optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub lstm: Vec<LstmLayerParams>,
    pub dense: Vec<DenseLayer>,
}

impl ParamSet {
    pub fn zeros_like(other: &ParamSet) -> Self {
        Self {
            lstm: other
                .lstm
                .iter()
                .map(|l| LstmLayerParams::zeros(l.input_size(), l.hidden_size()))
                .collect(),
            dense: other.dense.iter().map(|d| DenseLayer::zeros(d.w.cols, d.w.rows)).collect(),
        }
    }

    /// Tensor names in canonical order, e.g. `lstm0.W_ii`, `dense3.b`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..self.lstm.len() {
            out.extend(LSTM_TENSOR_NAMES.iter().map(|n| format!("lstm{l}.{n}")));
        }
        for d in 0..self.dense.len() {
            out.push(format!("dense{d}.W"));
            out.push(format!("dense{d}.b"));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.lstm {
            out.extend(l.tensors());
        }
        for d in &self.dense {
            out.push(&d.w.data);
            out.push(&d.b);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.lstm {
            out.extend(l.tensors_mut());
        }
        for d in &mut self.dense {
            out.push(&mut d.w.data);
            out.push(&mut d.b);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            add_into(a, b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Zeroes every tensor whose name is listed.
    pub fn zero_named(&mut self, names: &[String]) {
        if names.is_empty() {
            return;
        }
        let all = self.names();
        for (name, t) in all.iter().zip(self.tensors_mut()) {
            if names.contains(name) {
                t.fill(0.0);
            }
        }
    }
}
