//! Stacked (Bi)LSTM encoder, optional attention pooling, dropout and a dense
//! output head, with exact analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{AttentionParams, AttentionTrace};
use super::lstm::{LstmParams, SequenceTrace};
use super::tensor::{softmax, Matrix};
use crate::domain::Pollutant;
use crate::error::{Error, Result};

/// Probability floor applied before taking logs in the classification loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub attention_dim: usize,
    pub bidirectional: bool,
    pub attention: bool,
    pub dropout: f64,
    pub task: Task,
    /// Include `W_hg h_{t-1}` in the candidate pre-activation.
    pub candidate_recurrence: bool,
    pub horizons: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 13,
            hidden_dim: 64,
            layers: 1,
            attention_dim: 32,
            bidirectional: true,
            attention: true,
            dropout: 0.2,
            task: Task::Regression,
            candidate_recurrence: true,
            horizons: 6,
        }
    }
}

/// Class counts per forecast pollutant, in output order.
pub fn class_groups() -> [usize; 3] {
    Pollutant::FORECAST.map(|p| p.level_count().expect("forecast pollutant"))
}

impl ModelConfig {
    pub fn encoder_dim(&self) -> usize {
        if self.bidirectional {
            2 * self.hidden_dim
        } else {
            self.hidden_dim
        }
    }

    pub fn output_dim(&self) -> usize {
        match self.task {
            Task::Regression => self.horizons * Pollutant::FORECAST.len(),
            Task::Classification => self.horizons * class_groups().iter().sum::<usize>(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.layers == 0 || self.horizons == 0 {
            return Err(Error::InvalidConfig("model dimensions must be >= 1".into()));
        }
        if self.attention && self.attention_dim == 0 {
            return Err(Error::InvalidConfig("attention_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    /// `(offset, size)` of each softmax group in the classification logits.
    pub fn groups(&self) -> Vec<(usize, usize)> {
        let sizes = class_groups();
        let mut out = Vec::new();
        let mut offset = 0;
        for _ in 0..self.horizons {
            for s in sizes {
                out.push((offset, s));
                offset += s;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentLayer {
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layers: Vec<RecurrentLayer>,
    pub attention: Option<AttentionParams>,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

/// Per-sample supervision, laid out horizon-major then pollutant.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Regression(&'a [f64]),
    Classification(&'a [u8]),
}

struct LayerTrace {
    input: Matrix,
    forward: SequenceTrace,
    backward: Option<(Matrix, SequenceTrace)>,
}

struct ForwardTrace {
    layers: Vec<LayerTrace>,
    top: Matrix,
    attention: Option<AttentionTrace>,
    context: Vec<f64>,
    mask: Option<Vec<f64>>,
    /// Regression values or per-group probabilities.
    outputs: Vec<f64>,
}

/// Inverted-dropout mask: entries are `0` or `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(rate: f64, dim: usize, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..dim)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Runs one BiLSTM (or LSTM) layer, returning per-step `[→h; ←h]`.
pub fn bilstm_forward(seq: &Matrix, layer: &RecurrentLayer, candidate_recurrence: bool) -> Matrix {
    run_layer(seq, layer, candidate_recurrence).0
}

fn run_layer(seq: &Matrix, layer: &RecurrentLayer, candidate_recurrence: bool) -> (Matrix, LayerTrace) {
    let steps = seq.rows();
    let h = layer.forward.hidden();
    let fwd = layer.forward.forward_sequence(seq, candidate_recurrence);
    let bwd = layer.backward.as_ref().map(|b| {
        let reversed = seq.reversed_rows();
        let trace = b.forward_sequence(&reversed, candidate_recurrence);
        (reversed, trace)
    });
    let width = if bwd.is_some() { 2 * h } else { h };
    let mut out = Matrix::zeros(steps, width);
    for t in 0..steps {
        let row = out.row_mut(t);
        row[..h].copy_from_slice(&fwd.hidden[t]);
        if let Some((_, tr)) = &bwd {
            row[h..].copy_from_slice(&tr.hidden[steps - 1 - t]);
        }
    }
    (
        out,
        LayerTrace {
            input: seq.clone(),
            forward: fwd,
            backward: bwd,
        },
    )
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let mut layers = Vec::with_capacity(config.layers);
        let mut input = config.input_dim;
        for _ in 0..config.layers {
            let forward = LstmParams::init(input, h, rng);
            let backward = config.bidirectional.then(|| LstmParams::init(input, h, rng));
            layers.push(RecurrentLayer { forward, backward });
            input = config.encoder_dim();
        }
        let d = config.encoder_dim();
        let attention = config
            .attention
            .then(|| AttentionParams::init(d, config.attention_dim, rng));
        let out = config.output_dim();
        Ok(ModelParams {
            head_w: Matrix::glorot(out, d, d, out, rng),
            head_b: Matrix::zeros(out, 1),
            config,
            layers,
            attention,
        })
    }

    /// Same structure with every entry zero, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter tensor with a stable name, in serialisation order.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut named = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let directions = std::iter::once(("forward", &layer.forward))
                .chain(layer.backward.as_ref().map(|b| ("backward", b)));
            for (dir, p) in directions {
                named.push((format!("layer{l}.{dir}.w_x"), &p.w_x));
                named.push((format!("layer{l}.{dir}.w_h"), &p.w_h));
                named.push((format!("layer{l}.{dir}.b"), &p.b));
            }
        }
        if let Some(a) = &self.attention {
            named.push(("attention.w".into(), &a.w));
            named.push(("attention.b".into(), &a.b));
            named.push(("attention.v".into(), &a.v));
        }
        named.push(("head.w".into(), &self.head_w));
        named.push(("head.b".into(), &self.head_b));
        named
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.forward.w_x);
            out.push(&mut layer.forward.w_h);
            out.push(&mut layer.forward.b);
            if let Some(b) = &mut layer.backward {
                out.push(&mut b.w_x);
                out.push(&mut b.w_h);
                out.push(&mut b.b);
            }
        }
        if let Some(a) = &mut self.attention {
            out.push(&mut a.w);
            out.push(&mut a.b);
            out.push(&mut a.v);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.scale(k);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.config.input_dim {
            return Err(Error::SchemaMismatch(format!(
                "model expects {} input features, window has {}",
                self.config.input_dim,
                inputs.cols()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::SchemaMismatch("empty input window".into()));
        }
        Ok(())
    }

    fn run(&self, inputs: &Matrix, mask: Option<Vec<f64>>) -> ForwardTrace {
        let cfg = &self.config;
        let mut seq = inputs.clone();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, trace) = run_layer(&seq, layer, cfg.candidate_recurrence);
            layers.push(trace);
            seq = out;
        }
        let top = seq;
        let (context, attention) = match &self.attention {
            Some(a) => {
                let (c, t) = a.forward_traced(&top);
                (c, Some(t))
            }
            None => (last_states(&top, cfg.hidden_dim, cfg.bidirectional), None),
        };
        let dropped: Vec<f64> = match &mask {
            Some(m) => context.iter().zip(m).map(|(c, k)| c * k).collect(),
            None => context.clone(),
        };
        let mut logits = self.head_b.data().to_vec();
        self.head_w.matvec_acc(&dropped, &mut logits);
        let outputs = match cfg.task {
            Task::Regression => logits,
            Task::Classification => {
                let mut probs = vec![0.0; logits.len()];
                for (off, size) in cfg.groups() {
                    probs[off..off + size].copy_from_slice(&softmax(&logits[off..off + size]));
                }
                probs
            }
        };
        ForwardTrace {
            layers,
            top,
            attention,
            context,
            mask,
            outputs,
        }
    }

    /// Network outputs for one window: raw regression values or per-group
    /// class probabilities. Dropout is active only in [`Mode::Train`].
    pub fn forward<R: Rng + ?Sized>(&self, inputs: &Matrix, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
        self.check_input(inputs)?;
        let mask = (mode == Mode::Train && self.config.dropout > 0.0)
            .then(|| dropout_mask(self.config.dropout, self.config.encoder_dim(), rng));
        Ok(self.run(inputs, mask).outputs)
    }

    pub fn forward_eval(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        self.check_input(inputs)?;
        Ok(self.run(inputs, None).outputs)
    }

    /// Attention weights over the window steps, if the model attends.
    pub fn attention_weights(&self, inputs: &Matrix) -> Result<Option<Vec<f64>>> {
        self.check_input(inputs)?;
        Ok(self.run(inputs, None).attention.map(|a| a.weights))
    }

    /// Per-sample loss and its gradient for every parameter, with an optional
    /// fixed dropout mask over the context.
    pub fn loss_and_gradient(
        &self,
        inputs: &Matrix,
        target: Target<'_>,
        mask: Option<&[f64]>,
    ) -> Result<(f64, ModelParams)> {
        self.check_input(inputs)?;
        let cfg = &self.config;
        let trace = self.run(inputs, mask.map(<[f64]>::to_vec));
        let (loss, d_out) = output_gradient(cfg, &trace.outputs, target)?;

        let mut grads = self.zeros_like();
        let dropped: Vec<f64> = match &trace.mask {
            Some(m) => trace.context.iter().zip(m).map(|(c, k)| c * k).collect(),
            None => trace.context.clone(),
        };
        grads.head_w.outer_acc(&d_out, &dropped);
        grads.head_b.data_mut().copy_from_slice(&d_out);
        let mut d_context = vec![0.0; dropped.len()];
        self.head_w.matvec_t_acc(&d_out, &mut d_context);
        if let Some(m) = &trace.mask {
            d_context.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
        }

        let mut d_seq = match (&self.attention, &trace.attention) {
            (Some(a), Some(at)) => a.backward(&trace.top, at, &d_context, grads.attention.as_mut().expect("attention grads")),
            _ => last_states_backward(&trace.top, &d_context, cfg.hidden_dim, cfg.bidirectional),
        };

        let h = cfg.hidden_dim;
        for (l, (layer, lt)) in self.layers.iter().zip(&trace.layers).enumerate().rev() {
            let steps = lt.input.rows();
            let mut dh_fwd = Matrix::zeros(steps, h);
            for t in 0..steps {
                dh_fwd.row_mut(t).copy_from_slice(&d_seq.row(t)[..h]);
            }
            let g = &mut grads.layers[l];
            let mut d_input = layer
                .forward
                .backward_sequence(&lt.input, &lt.forward, &dh_fwd, &mut g.forward, cfg.candidate_recurrence);
            if let (Some(bp), Some((reversed, bt))) = (&layer.backward, &lt.backward) {
                let mut dh_bwd = Matrix::zeros(steps, h);
                for t in 0..steps {
                    dh_bwd.row_mut(steps - 1 - t).copy_from_slice(&d_seq.row(t)[h..]);
                }
                let d_rev = bp.backward_sequence(
                    reversed,
                    bt,
                    &dh_bwd,
                    g.backward.as_mut().expect("backward grads"),
                    cfg.candidate_recurrence,
                );
                for t in 0..steps {
                    for (d, r) in d_input.row_mut(t).iter_mut().zip(d_rev.row(steps - 1 - t)) {
                        *d += r;
                    }
                }
            }
            d_seq = d_input;
        }
        Ok((loss, grads))
    }

    /// Regression predictions in normalised units, clamped to `[0, 1]`.
    pub fn predict_regression(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        if self.config.task != Task::Regression {
            return Err(Error::SchemaMismatch("model is not a regressor".into()));
        }
        Ok(self.forward_eval(inputs)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    /// Arg-max class per (horizon, pollutant), horizon-major.
    pub fn predict_classes(&self, inputs: &Matrix) -> Result<Vec<u8>> {
        if self.config.task != Task::Classification {
            return Err(Error::SchemaMismatch("model is not a classifier".into()));
        }
        let probs = self.forward_eval(inputs)?;
        Ok(self
            .config
            .groups()
            .into_iter()
            .map(|(off, size)| argmax(&probs[off..off + size]) as u8)
            .collect())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn last_states(top: &Matrix, h: usize, bidirectional: bool) -> Vec<f64> {
    let steps = top.rows();
    let mut ctx = top.row(steps - 1).to_vec();
    if bidirectional {
        ctx[h..].copy_from_slice(&top.row(0)[h..]);
    }
    ctx
}

fn last_states_backward(top: &Matrix, d_context: &[f64], h: usize, bidirectional: bool) -> Matrix {
    let steps = top.rows();
    let mut d = Matrix::zeros(steps, top.cols());
    if bidirectional {
        d.row_mut(steps - 1)[..h].copy_from_slice(&d_context[..h]);
        d.row_mut(0)[h..].copy_from_slice(&d_context[h..]);
    } else {
        d.row_mut(steps - 1).copy_from_slice(d_context);
    }
    d
}

/// Per-sample loss and dL/d(pre-activation output).
fn output_gradient(cfg: &ModelConfig, outputs: &[f64], target: Target<'_>) -> Result<(f64, Vec<f64>)> {
    match (cfg.task, target) {
        (Task::Regression, Target::Regression(y)) => {
            if y.len() != outputs.len() {
                return Err(Error::SchemaMismatch(format!("{} targets for {} outputs", y.len(), outputs.len())));
            }
            let loss = sample_loss(cfg, outputs, target)?;
            Ok((loss, outputs.iter().zip(y).map(|(o, t)| 2.0 * (o - t)).collect()))
        }
        (Task::Classification, Target::Classification(classes)) => {
            let loss = sample_loss(cfg, outputs, target)?;
            let mut d = outputs.to_vec();
            for ((off, _), &c) in cfg.groups().into_iter().zip(classes) {
                d[off + c as usize] -= 1.0;
            }
            Ok((loss, d))
        }
        _ => Err(Error::SchemaMismatch("target kind does not match model task".into())),
    }
}

/// Squared error summed over outputs, or cross-entropy summed over every
/// (horizon, pollutant) group.
pub fn sample_loss(cfg: &ModelConfig, outputs: &[f64], target: Target<'_>) -> Result<f64> {
    match (cfg.task, target) {
        (Task::Regression, Target::Regression(y)) => {
            Ok(outputs.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum())
        }
        (Task::Classification, Target::Classification(classes)) => {
            let groups = cfg.groups();
            if classes.len() != groups.len() {
                return Err(Error::SchemaMismatch(format!("{} labels for {} groups", classes.len(), groups.len())));
            }
            let mut loss = 0.0;
            for ((off, size), &c) in groups.into_iter().zip(classes) {
                if c as usize >= size {
                    return Err(Error::SchemaMismatch(format!("class {c} out of range {size}")));
                }
                loss -= outputs[off + c as usize].max(PROB_FLOOR).ln();
            }
            Ok(loss)
        }
        _ => Err(Error::SchemaMismatch("target kind does not match model task".into())),
    }
}

/// Batch loss: per-sample losses summed and divided by the batch size.
pub fn loss(cfg: &ModelConfig, outputs: &[Vec<f64>], targets: &[Target<'_>]) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(Error::SchemaMismatch("batch outputs and targets differ".into()));
    }
    let mut total = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        total += sample_loss(cfg, o, *t)?;
    }
    Ok(total / outputs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(task: Task, dropout: f64) -> ModelParams {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_dim: 4,
            attention_dim: 3,
            dropout,
            task,
            horizons: 2,
            ..Default::default()
        };
        ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    fn window(rng: &mut ChaCha8Rng, steps: usize, dim: usize) -> Matrix {
        Matrix::from_vec(steps, dim, (0..steps * dim).map(|_| rng.random_range(0.0..1.0)).collect())
    }

    #[test]
    fn head_widths() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.output_dim(), 18);
        let cls = ModelConfig { task: Task::Classification, ..cfg };
        assert_eq!(cls.output_dim(), 48);
    }

    #[test]
    fn no_dropout_train_equals_eval() {
        let m = small(Task::Regression, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = window(&mut rng, 5, 3);
        let a = m.forward(&x, Mode::Train, &mut rng).unwrap();
        let b = m.forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn class_groups_sum_to_one() {
        let m = small(Task::Classification, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = window(&mut rng, 6, 3);
        let p = m.forward(&x, Mode::Train, &mut rng).unwrap();
        for (off, size) in m.config.groups() {
            let s: f64 = p[off..off + size].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let m = small(Task::Regression, 0.3);
        let x = window(&mut ChaCha8Rng::seed_from_u64(0), 4, 3);
        let a = m.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = m.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schema_mismatch() {
        let m = small(Task::Regression, 0.0);
        let x = Matrix::zeros(4, 2);
        assert!(matches!(m.forward_eval(&x), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn loss_examples() {
        let cfg = ModelConfig { horizons: 1, ..Default::default() };
        let y = [0.1, 0.2, 0.3];
        assert_eq!(loss(&cfg, &[y.to_vec()], &[Target::Regression(&y)]).unwrap(), 0.0);
        let mut out = vec![0.0; 3];
        out[0] = 0.5;
        let zero = [0.0; 3];
        assert!((loss(&cfg, &[out], &[Target::Regression(&zero)]).unwrap() - 0.25).abs() < 1e-15);

        let cls = ModelConfig { task: Task::Classification, horizons: 1, ..Default::default() };
        let probs = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let labels = [0u8, 1, 1];
        assert_eq!(loss(&cls, &[probs], &[Target::Classification(&labels)]).unwrap(), 0.0);
    }

    #[test]
    fn zero_loss_zero_gradient() {
        let m = small(Task::Regression, 0.0);
        let x = window(&mut ChaCha8Rng::seed_from_u64(3), 5, 3);
        let y = m.forward_eval(&x).unwrap();
        let (l, g) = m.loss_and_gradient(&x, Target::Regression(&y), None).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = LstmParams::init(2, 3, &mut rng);
        let layer = RecurrentLayer {
            forward: p.clone(),
            backward: Some(p),
        };
        let rows = [vec![0.1, 0.5], vec![0.9, 0.2], vec![0.4, 0.4], vec![0.9, 0.2], vec![0.1, 0.5]];
        let seq = Matrix::from_rows(&rows);
        let out = bilstm_forward(&seq, &layer, true);
        let steps = rows.len();
        for t in 0..steps {
            let mirrored = out.row(steps - 1 - t);
            assert_eq!(&out.row(t)[..3], &mirrored[3..]);
            assert_eq!(&out.row(t)[3..], &mirrored[..3]);
        }
    }

    #[test]
    fn bilstm_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = LstmParams::init(2, 3, &mut rng);
        let layer = RecurrentLayer {
            forward: p.clone(),
            backward: Some(p),
        };
        let one = Matrix::from_rows(&[vec![0.3, 0.7]]);
        let out = bilstm_forward(&one, &layer, true);
        assert_eq!(&out.row(0)[..3], &out.row(0)[3..]);

        let zero = RecurrentLayer {
            forward: LstmParams::zeros(2, 3),
            backward: Some(LstmParams::zeros(2, 3)),
        };
        let seq = window(&mut rng, 4, 2);
        assert!(bilstm_forward(&seq, &zero, true).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverted_dropout_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let activation = 0.8;
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| activation * dropout_mask(0.2, 1, &mut rng)[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - activation).abs() / activation < 0.02, "{mean}");
    }
}
