//! Stacked LSTM with a dense head, its loss and reverse pass.

use serde::{Deserialize, Serialize};

use super::lstm::{step_backward, step_cached, step_unchecked, LstmState, StepCache};
use super::tensor::{add_into, DenseLayer, LstmLayerParams, ParamSet};
use crate::error::{Error, Result};
use crate::estimators::PositionEstimate;
use crate::geom::Vec2;
use crate::mobility::Area;
use crate::predict::{check_spacing, Prediction};
use crate::rng::SimRng;

/// Min-max scaling of positions into the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Normalization {
    pub fn from_area(area: &Area) -> Self {
        Self {
            x_min: area.x_min,
            x_max: area.x_max,
            y_min: area.y_min,
            y_max: area.y_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.y_max > self.y_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid normalization bounds {self:?}")))
        }
    }

    pub fn to_unit(&self, p: Vec2) -> [f64; 2] {
        [
            (p.x - self.x_min) / (self.x_max - self.x_min),
            (p.y - self.y_min) / (self.y_max - self.y_min),
        ]
    }

    pub fn from_unit(&self, u: [f64; 2]) -> Vec2 {
        Vec2::new(
            self.x_min + u[0] * (self.x_max - self.x_min),
            self.y_min + u[1] * (self.y_max - self.y_min),
        )
    }
}

/// Architecture settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnConfig {
    /// Hidden size of each LSTM layer, bottom first.
    pub hidden: Vec<usize>,
    /// Number of affine layers in the head.
    pub dense_layers: usize,
    /// Dropout on the last LSTM output, training only.
    pub dropout: f64,
    /// Predict an offset from the current input instead of an absolute
    /// position.
    pub residual: bool,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 64],
            dense_layers: 4,
            dropout: 0.2,
            residual: true,
        }
    }
}

impl RnnConfig {
    pub fn full_scale() -> Self {
        Self {
            hidden: vec![800, 1600],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("rnn.hidden {:?} needs positive sizes", self.hidden)));
        }
        if self.dense_layers == 0 {
            return Err(Error::Config("rnn.dense_layers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("rnn.dropout {} must lie in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Head widths, geometric from the last hidden size down to 2.
    pub fn dense_widths(&self) -> Vec<usize> {
        let top = *self.hidden.last().expect("validated") as f64;
        let n = self.dense_layers;
        let mut w = vec![top as usize];
        for i in 1..n {
            let v = (top * (2.0 / top).powf(i as f64 / n as f64)).round() as usize;
            w.push(v.max(2));
        }
        w.push(2);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub params: ParamSet,
    pub dropout_rate: f64,
    pub residual: bool,
    pub norm: Normalization,
    /// Sampling period the model was trained for, s.
    pub period: f64,
}

/// Forward-pass mode. Training draws dropout masks from the given stream.
pub enum Mode<'a> {
    Inference,
    Training(&'a mut SimRng),
}

struct SeqCache {
    /// `[layer][step]`
    lstm: Vec<Vec<StepCache>>,
    /// Dropout scale per step on the top hidden output (empty when off).
    masks: Vec<Vec<f64>>,
    /// Input to each dense layer per step: `[step][layer]`.
    dense_in: Vec<Vec<Vec<f64>>>,
}

impl RnnModel {
    pub fn new(cfg: &RnnConfig, norm: Normalization, period: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        norm.validate()?;
        let mut rng = SimRng::new(seed);
        let mut lstm = Vec::new();
        let mut input = 2;
        for &h in &cfg.hidden {
            lstm.push(LstmLayerParams::init(input, h, &mut rng));
            input = h;
        }
        let widths = cfg.dense_widths();
        let mut dense: Vec<DenseLayer> = widths
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], &mut rng))
            .collect();
        if cfg.residual {
            // The untrained residual model is the identity predictor.
            let last = dense.last_mut().expect("at least one dense layer");
            *last = DenseLayer::zeros(last.w.cols, last.w.rows);
        }
        Ok(Self {
            params: ParamSet { lstm, dense },
            dropout_rate: cfg.dropout,
            residual: cfg.residual,
            norm,
            period,
        })
    }

    /// Structural checks used after loading.
    pub fn validate(&self) -> Result<()> {
        self.norm.validate()?;
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::Model(format!("period {} must be > 0", self.period)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Model(format!("dropout {} outside [0, 1)", self.dropout_rate)));
        }
        if self.params.lstm.is_empty() || self.params.dense.is_empty() {
            return Err(Error::Model("model needs at least one LSTM and one dense layer".into()));
        }
        let mut input = 2;
        for (k, l) in self.params.lstm.iter().enumerate() {
            if !l.shapes_consistent() || l.input_size() != input {
                return Err(Error::Model(format!("lstm{k} shapes do not chain")));
            }
            input = l.hidden_size();
        }
        for (k, d) in self.params.dense.iter().enumerate() {
            if d.w.cols != input || d.w.data.len() != d.w.rows * d.w.cols || d.b.len() != d.w.rows {
                return Err(Error::Model(format!("dense{k} shapes do not chain")));
            }
            input = d.w.rows;
        }
        if input != 2 {
            return Err(Error::Model(format!("final output has {input} entries, expected 2")));
        }
        if self.params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn initial_states(&self) -> Vec<LstmState> {
        self.params.lstm.iter().map(|l| LstmState::zeros(l.hidden_size())).collect()
    }

    fn head(&self, top: &[f64], cache: Option<&mut Vec<Vec<f64>>>) -> [f64; 2] {
        let mut a = top.to_vec();
        let last = self.params.dense.len() - 1;
        let mut inputs = Vec::new();
        for (k, d) in self.params.dense.iter().enumerate() {
            let mut z = d.b.clone();
            d.w.matvec_add(&a, &mut z);
            if k != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(std::mem::replace(&mut a, z));
        }
        if let Some(c) = cache {
            *c = inputs;
        }
        [a[0], a[1]]
    }

    /// Advances the states by one normalized input and returns the
    /// normalized output.
    pub fn step_unit(&self, u: [f64; 2], states: &mut [LstmState]) -> [f64; 2] {
        let mut x = u.to_vec();
        for (l, s) in self.params.lstm.iter().zip(states.iter_mut()) {
            let (_, _, next) = step_unchecked(l, &x, s);
            x = next.h.clone();
            *s = next;
        }
        let out = self.head(&x, None);
        if self.residual {
            [u[0] + out[0], u[1] + out[1]]
        } else {
            out
        }
    }

    /// Normalized forward pass. Dropout is active iff `rng` is given;
    /// `record` keeps what the reverse pass needs.
    fn run(&self, inputs: &[[f64; 2]], mut rng: Option<&mut SimRng>, record: bool) -> (Vec<[f64; 2]>, Option<SeqCache>) {
        let n_layers = self.params.lstm.len();
        let mut states = self.initial_states();
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut cache = SeqCache {
            lstm: vec![Vec::with_capacity(inputs.len()); n_layers],
            masks: Vec::new(),
            dense_in: Vec::new(),
        };
        for u in inputs {
            let mut x = u.to_vec();
            for (k, l) in self.params.lstm.iter().enumerate() {
                let next = if record {
                    let (c, next) = step_cached(l, &x, &states[k]);
                    cache.lstm[k].push(c);
                    next
                } else {
                    step_unchecked(l, &x, &states[k]).2
                };
                x = next.h.clone();
                states[k] = next;
            }
            if let Some(r) = rng.as_deref_mut() {
                if self.dropout_rate > 0.0 {
                    let keep = 1.0 - self.dropout_rate;
                    let mask: Vec<f64> = x
                        .iter()
                        .map(|_| if r.uniform() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    x.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    cache.masks.push(mask);
                }
            }
            let out = if record {
                let mut d = Vec::new();
                let o = self.head(&x, Some(&mut d));
                cache.dense_in.push(d);
                o
            } else {
                self.head(&x, None)
            };
            outputs.push(if self.residual { [u[0] + out[0], u[1] + out[1]] } else { out });
        }
        (outputs, record.then_some(cache))
    }

    /// Predictions for every step of `inputs`, in metres. Output `k` is the
    /// prediction for the instant after input `k`.
    pub fn forward(&self, inputs: &[Vec2]) -> Result<Vec<Vec2>> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("input sequence".into()));
        }
        let u: Vec<[f64; 2]> = inputs.iter().map(|p| self.norm.to_unit(*p)).collect();
        let (out, _) = self.run(&u, None, false);
        Ok(out.into_iter().map(|o| self.norm.from_unit(o)).collect())
    }

    /// Like [`forward`](Self::forward) but with an explicit mode.
    pub fn forward_with(&self, inputs: &[Vec2], mode: Mode<'_>) -> Result<Vec<Vec2>> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("input sequence".into()));
        }
        let u: Vec<[f64; 2]> = inputs.iter().map(|p| self.norm.to_unit(*p)).collect();
        let rng = match mode {
            Mode::Inference => None,
            Mode::Training(r) => Some(r),
        };
        let (out, _) = self.run(&u, rng, false);
        Ok(out.into_iter().map(|o| self.norm.from_unit(o)).collect())
    }
}

/// Mean squared error `(1/b) sum (x - x~)^2 + (1/b) sum (y - y~)^2`.
pub fn mse_loss(pred: &[Vec2], target: &[Vec2]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("loss batch".into()));
    }
    let b = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (*p - *t).norm_sq()).sum::<f64>() / b)
}

/// One training sequence: inputs and next-step targets, both in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Vec<Vec2>,
    pub targets: Vec<Vec2>,
}

impl Sequence {
    /// `p~(0..n-1)` as inputs, `p~(1..n)` as targets.
    pub fn next_step(track: &[Vec2]) -> Result<Self> {
        if track.len() < 2 {
            return Err(Error::EmptyInput("sequence needs at least two positions".into()));
        }
        Ok(Self {
            inputs: track[..track.len() - 1].to_vec(),
            targets: track[1..].to_vec(),
        })
    }
}

fn check_batch(batch: &[Sequence]) -> Result<usize> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    let mut n = 0;
    for s in batch {
        if s.inputs.is_empty() || s.inputs.len() != s.targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "sequence with {} inputs and {} targets",
                s.inputs.len(),
                s.targets.len()
            )));
        }
        n += s.inputs.len();
    }
    Ok(n)
}

/// Batch loss in normalized coordinates. `dropout_seed` switches on
/// training mode with masks drawn from that seed.
pub fn batch_loss(model: &RnnModel, batch: &[Sequence], dropout_seed: Option<u64>) -> Result<f64> {
    let n = check_batch(batch)?;
    let mut rng = dropout_seed.map(SimRng::new);
    let mut total = 0.0;
    for s in batch {
        let u: Vec<[f64; 2]> = s.inputs.iter().map(|p| model.norm.to_unit(*p)).collect();
        let (out, _) = model.run(&u, rng.as_mut(), false);
        for (o, t) in out.iter().zip(&s.targets) {
            let t = model.norm.to_unit(*t);
            total += (o[0] - t[0]).powi(2) + (o[1] - t[1]).powi(2);
        }
    }
    Ok(total / n as f64)
}

/// Loss and its exact gradient with respect to every parameter, by
/// reverse accumulation through time. Gradients of tensors named in
/// `frozen` are zero.
pub fn backward(
    model: &RnnModel,
    batch: &[Sequence],
    dropout_seed: Option<u64>,
    frozen: &[String],
) -> Result<(f64, ParamSet)> {
    let n = check_batch(batch)?;
    let scale = 1.0 / n as f64;
    let mut grad = ParamSet::zeros_like(&model.params);
    let mut rng = dropout_seed.map(SimRng::new);
    let mut total = 0.0;
    for s in batch {
        let u: Vec<[f64; 2]> = s.inputs.iter().map(|p| model.norm.to_unit(*p)).collect();
        let (out, cache) = model.run(&u, rng.as_mut(), true);
        let cache = cache.expect("recorded");
        let steps = u.len();
        // Gradient reaching the top hidden output at each step.
        let top = model.params.lstm.len() - 1;
        let mut dtop = vec![vec![0.0; model.params.lstm[top].hidden_size()]; steps];
        for t in 0..steps {
            let target = model.norm.to_unit(s.targets[t]);
            let e = [out[t][0] - target[0], out[t][1] - target[1]];
            total += e[0] * e[0] + e[1] * e[1];
            let mut dy = vec![2.0 * e[0] * scale, 2.0 * e[1] * scale];
            let last = model.params.dense.len() - 1;
            for k in (0..=last).rev() {
                let d = &model.params.dense[k];
                let a_in = &cache.dense_in[t][k];
                grad.dense[k].w.outer_add(&dy, a_in);
                add_into(&mut grad.dense[k].b, &dy);
                let mut da = vec![0.0; d.w.cols];
                d.w.matvec_t_add(&dy, &mut da);
                if k > 0 {
                    // a_in = tanh(z) of the previous layer.
                    da.iter_mut().zip(a_in).for_each(|(g, a)| *g *= 1.0 - a * a);
                }
                dy = da;
            }
            if let Some(mask) = cache.masks.get(t) {
                dy.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
            dtop[t] = dy;
        }
        // Through the stack, top layer first; each layer hands its input
        // gradients to the layer below.
        let mut dout = dtop;
        for k in (0..=top).rev() {
            let layer = &model.params.lstm[k];
            let h = layer.hidden_size();
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dinput = vec![Vec::new(); steps];
            for t in (0..steps).rev() {
                let mut dh = dout[t].clone();
                add_into(&mut dh, &dh_next);
                let (dx, dhp, dcp) = step_backward(layer, &cache.lstm[k][t], &dh, &dc_next, &mut grad.lstm[k]);
                dinput[t] = dx;
                dh_next = dhp;
                dc_next = dcp;
            }
            dout = dinput;
        }
    }
    grad.zero_named(frozen);
    Ok((total * scale, grad))
}

/// Streaming one-step-ahead predictor with persistent hidden states.
#[derive(Debug, Clone)]
pub struct RnnPredictor<'a> {
    model: &'a RnnModel,
    states: Vec<LstmState>,
    pending: Option<Vec2>,
}

impl<'a> RnnPredictor<'a> {
    pub fn new(model: &'a RnnModel) -> Self {
        Self {
            model,
            states: model.initial_states(),
            pending: None,
        }
    }

    pub fn states(&self) -> &[LstmState] {
        &self.states
    }

    /// Consumes `z`; returns the prediction made for this instant before
    /// `z` was seen (`None` for the first estimate).
    pub fn step(&mut self, z: Vec2) -> Option<Vec2> {
        let out = self.pending.take();
        let u = self.model.norm.to_unit(z);
        let next = self.model.step_unit(u, &mut self.states);
        self.pending = Some(self.model.norm.from_unit(next));
        out
    }
}

/// One prediction per instant from `t = T` onward.
pub fn predict_next(model: &RnnModel, estimates: &[PositionEstimate]) -> Result<Vec<Prediction>> {
    check_spacing(estimates, model.period)?;
    let mut p = RnnPredictor::new(model);
    Ok(estimates
        .iter()
        .filter_map(|e| {
            p.step(e.p).map(|p_hat| Prediction {
                t: e.t,
                p_hat,
                p_tilde: e.p,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::lstm::lstm_step;

    fn small(hidden: Vec<usize>, dropout: f64, residual: bool, seed: u64) -> RnnModel {
        let cfg = RnnConfig {
            hidden,
            dense_layers: 4,
            dropout,
            residual,
        };
        let mut m = RnnModel::new(&cfg, Normalization::from_area(&Area::REFERENCE), 10.0, seed).unwrap();
        // Random output layer so that every gradient is exercised.
        let last = m.params.dense.last_mut().unwrap();
        *last = DenseLayer::init(last.w.cols, last.w.rows, &mut SimRng::new(seed ^ 0xd1));
        m
    }

    fn track(seed: u64, n: usize) -> Vec<Vec2> {
        let mut rng = SimRng::new(seed);
        (0..n)
            .map(|_| Vec2::new(rng.uniform_in(313.0, 1813.0), rng.uniform_in(275.0, 2275.0)))
            .collect()
    }

    #[test]
    fn widths_shrink_geometrically() {
        assert_eq!(RnnConfig::default().dense_widths(), vec![64, 27, 11, 5, 2]);
        let w = RnnConfig::full_scale().dense_widths();
        assert_eq!((w[0], w.len(), w[4]), (1600, 5, 2));
        assert!(w.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn normalization_round_trip() {
        let n = Normalization::from_area(&Area::REFERENCE);
        for p in track(3, 100) {
            let back = n.from_unit(n.to_unit(p));
            assert!((back - p).norm() <= 1e-9);
        }
        assert_eq!(n.to_unit(Vec2::new(313.0, 2275.0)), [0.0, 1.0]);
    }

    #[test]
    fn single_step_is_cell_composition() {
        let m = small(vec![3, 5], 0.2, false, 1);
        let p = Vec2::new(900.0, 1200.0);
        let out = m.forward(&[p]).unwrap()[0];
        let u = m.norm.to_unit(p);
        let (_, s1) = lstm_step(&m.params.lstm[0], &u, &LstmState::zeros(3)).unwrap();
        let (_, s2) = lstm_step(&m.params.lstm[1], &s1.h, &LstmState::zeros(5)).unwrap();
        let mut a = s2.h.clone();
        for (k, d) in m.params.dense.iter().enumerate() {
            let mut z = d.b.clone();
            d.w.matvec_add(&a, &mut z);
            if k + 1 < m.params.dense.len() {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        let want = m.norm.from_unit([a[0], a[1]]);
        assert!((out - want).norm() < 1e-9);
    }

    #[test]
    fn inference_is_deterministic_and_dropout_free() {
        let m = small(vec![4, 6], 0.5, true, 2);
        let x = track(4, 10);
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
        let mut no_drop = m.clone();
        no_drop.dropout_rate = 0.0;
        let mut rng = SimRng::new(9);
        let train = no_drop.forward_with(&x, Mode::Training(&mut rng)).unwrap();
        assert_eq!(train, m.forward(&x).unwrap());
        let mut rng = SimRng::new(9);
        assert_ne!(m.forward_with(&x, Mode::Training(&mut rng)).unwrap(), train);
        assert!(matches!(m.forward(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mse_examples() {
        let a = [Vec2::new(1.0, 2.0)];
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&[Vec2::ZERO], &[Vec2::new(3.0, 4.0)]).unwrap(), 25.0);
        let p = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)];
        assert_eq!(mse_loss(&p, &[Vec2::ZERO, Vec2::ZERO]).unwrap(), 2.5);
        assert!(matches!(mse_loss(&p, &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        let mut m = small(vec![3, 4], 0.0, true, 5);
        for t in m.params.tensors_mut() {
            t.fill(0.0);
        }
        let x = track(6, 6);
        let seq = Sequence {
            inputs: x.clone(),
            targets: x,
        };
        let (loss, g) = backward(&m, &[seq], None, &[]).unwrap();
        assert!(loss.abs() < 1e-28);
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0)));
    }

    fn grad_check(m: &RnnModel, seed: Option<u64>) {
        let mut rng = SimRng::new(77);
        let batch: Vec<Sequence> = (0..2)
            .map(|k| Sequence {
                inputs: track(10 + k, 5),
                targets: (0..5).map(|_| Vec2::new(rng.uniform_in(313.0, 1813.0), rng.uniform_in(275.0, 2275.0))).collect(),
            })
            .collect();
        let (_, g) = backward(m, &batch, seed, &[]).unwrap();
        let names = m.params.names();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for (ti, name) in names.iter().enumerate() {
            let len = m.params.tensors()[ti].len();
            for j in 0..len {
                let mut plus = m.clone();
                plus.params.tensors_mut()[ti][j] += eps;
                let mut minus = m.clone();
                minus.params.tensors_mut()[ti][j] -= eps;
                let fd = (batch_loss(&plus, &batch, seed).unwrap() - batch_loss(&minus, &batch, seed).unwrap()) / (2.0 * eps);
                let an = g.tensors()[ti][j];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                assert!(rel <= 1e-4, "{name}[{j}]: analytic {an} vs fd {fd}");
            }
        }
        assert!(worst <= 1e-4);
    }

    #[test]
    fn gradients_match_finite_differences() {
        grad_check(&small(vec![4, 4], 0.0, false, 21), None);
    }

    #[test]
    fn gradients_match_with_fixed_dropout_masks() {
        grad_check(&small(vec![4, 4], 0.3, true, 22), Some(5));
    }

    #[test]
    fn frozen_tensors_get_zero_gradient() {
        let m = small(vec![3, 4], 0.0, false, 3);
        let seq = Sequence::next_step(&track(1, 6)).unwrap();
        let frozen = vec!["lstm0.W_hf".to_string(), "dense2.b".to_string()];
        let (_, g) = backward(&m, &[seq], None, &frozen).unwrap();
        for (name, t) in m.params.names().iter().zip(g.tensors()) {
            if frozen.contains(name) {
                assert!(t.iter().all(|v| *v == 0.0));
            } else {
                assert!(t.iter().any(|v| *v != 0.0), "{name}");
            }
        }
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut m = small(vec![4, 6], 0.0, false, 8);
        for t in m.params.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= 20.0);
        }
        let mut p = RnnPredictor::new(&m);
        let mut rng = SimRng::new(2);
        for step in 1..=200 {
            p.step(Vec2::new(rng.normal(0.0, 1e5), rng.normal(0.0, 1e5)));
            for s in p.states() {
                assert!(s.h.iter().all(|v| v.abs() <= 1.0));
                assert!(s.c.iter().all(|v| v.abs() <= step as f64));
            }
        }
    }

    #[test]
    fn streaming_matches_sequence_forward() {
        let m = small(vec![4, 6], 0.2, true, 9);
        let x = track(12, 8);
        let est: Vec<PositionEstimate> = x
            .iter()
            .enumerate()
            .map(|(i, p)| PositionEstimate {
                t: i as f64 * 10.0,
                p: *p,
                source: crate::estimators::EstimateSource::External,
            })
            .collect();
        let preds = predict_next(&m, &est).unwrap();
        let seq = m.forward(&x[..7]).unwrap();
        assert_eq!(preds.len(), 7);
        for (p, s) in preds.iter().zip(&seq) {
            assert_eq!(p.p_hat, *s);
        }
        assert_eq!(preds[0].t, 10.0);
        let mut gap = est.clone();
        gap.remove(3);
        assert!(matches!(predict_next(&m, &gap), Err(Error::Stream { .. })));
    }
}
