//! One LSTM cell step, forward and reverse.

use serde::{Deserialize, Serialize};

use super::tensor::{add_into, LstmLayerParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// Gate activations of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Everything the reverse pass needs from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: Gates,
    pub tanh_c: Vec<f64>,
}

pub(crate) fn step_unchecked(p: &LstmLayerParams, x: &[f64], s: &LstmState) -> (Gates, Vec<f64>, LstmState) {
    let n = p.hidden_size();
    let mut pre = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, a) in pre.iter_mut().enumerate() {
        p.w_input()[k].matvec_add(x, a);
        p.w_hidden()[k].matvec_add(&s.h, a);
        add_into(a, p.b_input()[k]);
        add_into(a, p.b_hidden()[k]);
    }
    let [ai, af, ag, ao] = pre;
    let gates = Gates {
        i: ai.into_iter().map(sigmoid).collect(),
        f: af.into_iter().map(sigmoid).collect(),
        g: ag.into_iter().map(f64::tanh).collect(),
        o: ao.into_iter().map(sigmoid).collect(),
    };
    let c: Vec<f64> = (0..n).map(|j| gates.f[j] * s.c[j] + gates.i[j] * gates.g[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..n).map(|j| gates.o[j] * tanh_c[j]).collect();
    (gates, tanh_c, LstmState { c, h })
}

/// One cell update. Returns the output gate and the new state.
pub fn lstm_step(p: &LstmLayerParams, x: &[f64], s: &LstmState) -> Result<(Vec<f64>, LstmState)> {
    if !p.shapes_consistent() {
        return Err(Error::DimensionMismatch("inconsistent LSTM parameter shapes".into()));
    }
    if x.len() != p.input_size() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} entries, layer expects {}",
            x.len(),
            p.input_size()
        )));
    }
    if s.h.len() != p.hidden_size() || s.c.len() != p.hidden_size() {
        return Err(Error::DimensionMismatch(format!(
            "state sizes ({}, {}) do not match hidden size {}",
            s.c.len(),
            s.h.len(),
            p.hidden_size()
        )));
    }
    let (gates, _, next) = step_unchecked(p, x, s);
    Ok((gates.o, next))
}

pub(crate) fn step_cached(p: &LstmLayerParams, x: &[f64], s: &LstmState) -> (StepCache, LstmState) {
    let (gates, tanh_c, next) = step_unchecked(p, x, s);
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: s.h.clone(),
        c_prev: s.c.clone(),
        gates,
        tanh_c,
    };
    (cache, next)
}

/// Reverse of one step. `dh` is the total gradient reaching `h_t`, `dc`
/// the gradient reaching `c_t` from step `t + 1`. Accumulates parameter
/// gradients into `grad`; returns `(dx, dh_prev, dc_prev)`.
pub(crate) fn step_backward(
    p: &LstmLayerParams,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    grad: &mut LstmLayerParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.hidden_size();
    let Gates { i, f, g, o } = &cache.gates;
    let mut da = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut dc_prev = vec![0.0; n];
    for j in 0..n {
        let tc = cache.tanh_c[j];
        let d_o = dh[j] * tc;
        let dcj = dc[j] + dh[j] * o[j] * (1.0 - tc * tc);
        let d_i = dcj * g[j];
        let d_g = dcj * i[j];
        let d_f = dcj * cache.c_prev[j];
        dc_prev[j] = dcj * f[j];
        da[0][j] = d_i * i[j] * (1.0 - i[j]);
        da[1][j] = d_f * f[j] * (1.0 - f[j]);
        da[2][j] = d_g * (1.0 - g[j] * g[j]);
        da[3][j] = d_o * o[j] * (1.0 - o[j]);
    }
    let mut dx = vec![0.0; p.input_size()];
    let mut dh_prev = vec![0.0; n];
    let gw_in = [&mut grad.w_ii, &mut grad.w_if, &mut grad.w_ig, &mut grad.w_io];
    for (k, gw) in gw_in.into_iter().enumerate() {
        gw.outer_add(&da[k], &cache.x);
        p.w_input()[k].matvec_t_add(&da[k], &mut dx);
    }
    let gw_h = [&mut grad.w_hi, &mut grad.w_hf, &mut grad.w_hg, &mut grad.w_ho];
    for (k, gw) in gw_h.into_iter().enumerate() {
        gw.outer_add(&da[k], &cache.h_prev);
        p.w_hidden()[k].matvec_t_add(&da[k], &mut dh_prev);
    }
    let gb = [
        &mut grad.b_ii,
        &mut grad.b_if,
        &mut grad.b_ig,
        &mut grad.b_io,
        &mut grad.b_hi,
        &mut grad.b_hf,
        &mut grad.b_hg,
        &mut grad.b_ho,
    ];
    for (k, b) in gb.into_iter().enumerate() {
        add_into(b, &da[k % 4]);
    }
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    #[test]
    fn zero_weights_halve_the_cell() {
        let p = LstmLayerParams::zeros(2, 3);
        let (o, s) = lstm_step(&p, &[1.0, -2.0], &LstmState::zeros(3)).unwrap();
        assert_eq!(o, vec![0.5; 3]);
        assert_eq!(s, LstmState::zeros(3));

        let c0 = vec![1.0, -4.0, 0.25];
        let start = LstmState { c: c0.clone(), h: vec![0.0; 3] };
        let (_, s) = lstm_step(&p, &[0.3, 0.3], &start).unwrap();
        for j in 0..3 {
            assert_eq!(s.c[j], 0.5 * c0[j]);
            assert_eq!(s.h[j], 0.5 * (0.5 * c0[j]).tanh());
        }
    }

    #[test]
    fn dimension_checks() {
        let p = LstmLayerParams::zeros(2, 3);
        assert!(lstm_step(&p, &[1.0], &LstmState::zeros(3)).is_err());
        assert!(lstm_step(&p, &[1.0, 2.0], &LstmState::zeros(2)).is_err());
    }

    /// Straight-line transcription of the five cell equations.
    fn oracle(p: &LstmLayerParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |wi: &super::super::tensor::Mat, bi: &[f64], wh: &super::super::tensor::Mat, bh: &[f64], j: usize| {
            let mut s = bi[j] + bh[j];
            for k in 0..x.len() {
                s += wi.get(j, k) * x[k];
            }
            for k in 0..n {
                s += wh.get(j, k) * h[k];
            }
            s
        };
        let (mut o_out, mut c_out, mut h_out) = (vec![], vec![], vec![]);
        for j in 0..n {
            let i = sig(lin(&p.w_ii, &p.b_ii, &p.w_hi, &p.b_hi, j));
            let f = sig(lin(&p.w_if, &p.b_if, &p.w_hf, &p.b_hf, j));
            let g = lin(&p.w_ig, &p.b_ig, &p.w_hg, &p.b_hg, j).tanh();
            let o = sig(lin(&p.w_io, &p.b_io, &p.w_ho, &p.b_ho, j));
            let cj = f * c[j] + i * g;
            o_out.push(o);
            c_out.push(cj);
            h_out.push(o * cj.tanh());
        }
        (o_out, c_out, h_out)
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = SimRng::new(8);
        for _ in 0..20 {
            let p = LstmLayerParams::init(2, 3, &mut rng);
            let x = [rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)];
            let s = LstmState {
                c: (0..3).map(|_| rng.normal(0.0, 1.0)).collect(),
                h: (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
            };
            let (o, next) = lstm_step(&p, &x, &s).unwrap();
            let (wo, wc, wh) = oracle(&p, &x, &s.h, &s.c);
            for j in 0..3 {
                assert!((o[j] - wo[j]).abs() < 1e-14);
                assert!((next.c[j] - wc[j]).abs() < 1e-14);
                assert!((next.h[j] - wh[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
