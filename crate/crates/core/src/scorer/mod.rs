//! Shallow feed-forward scorer over sketches.
//!
//! The network maps a flattened input sketch (a user's fused behavioral
//! profile) to an output sketch over items: affine layers with rectifiers
//! between them, then a softmax across the width of every depth row. It is
//! trained with cross-entropy averaged over depth rows, and candidates are
//! ranked by the geometric mean of the predicted probabilities at their
//! codes.

mod io;

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::FormatError;
use crate::hashing::{stream, CounterRng};
use crate::sketch::{CodeSet, LayoutKey, Sketch, SketchError, SketchKind, LOG_EPSILON};

pub use self::io::{read_examples, read_model, write_examples, write_model};

pub const MAX_LAYERS: usize = 5;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Examples per gradient work unit. Fixed, so results do not depend on the
/// number of threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("invalid training target: {0}")]
    InvalidTarget(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ScorerError>;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Number of affine layers, 1..=5.
    pub n_layers: usize,
    pub hidden_size: usize,
    pub input_size: usize,
    /// Shape of the output sketch; must match the item code layout.
    pub output: LayoutKey,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_size: usize, output: LayoutKey) -> Self {
        Self {
            n_layers: 2,
            hidden_size: 256,
            input_size,
            output,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LAYERS).contains(&self.n_layers) {
            return Err(ScorerError::InvalidConfig(format!(
                "n_layers must be in 1..={MAX_LAYERS}, got {}",
                self.n_layers
            )));
        }
        if self.input_size == 0
            || self.batch_size == 0
            || (self.n_layers > 1 && self.hidden_size == 0)
        {
            return Err(ScorerError::InvalidConfig("sizes must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(ScorerError::InvalidConfig(format!(
                "bad learning rate {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Widths of every activation, input first, output logits last.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size];
        sizes.extend(std::iter::repeat_n(self.hidden_size, self.n_layers - 1));
        sizes.push(self.output.cells());
        sizes
    }
}

/// One affine layer; `weights` is `n_out x n_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn apply(&self, input: &[f64], out: &mut [f64]) {
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n_in))
            .zip(&self.bias)
        {
            *o = b + dot(row, input);
        }
    }

    /// Same as `apply` for an input given by its nonzero entries.
    fn apply_sparse(&self, nonzero: &[(usize, f64)], out: &mut [f64]) {
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n_in))
            .zip(&self.bias)
        {
            *o = b + nonzero.iter().map(|&(j, x)| row[j] * x).sum::<f64>();
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub output: LayoutKey,
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Uniform(-1, 1) / sqrt(fan_in) weights from the seeded counter stream
    /// (layer by layer, row-major); zero biases.
    pub fn init(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = CounterRng::new(config.seed, stream::MLP_INIT);
        let sizes = config.layer_sizes();
        let layers = sizes
            .windows(2)
            .map(|w| {
                let mut layer = Layer::zeros(w[0], w[1]);
                let scale = 1.0 / (w[0] as f64).sqrt();
                layer
                    .weights
                    .iter_mut()
                    .for_each(|x| *x = rng.next_symmetric() * scale);
                layer
            })
            .collect();
        Ok(Self {
            output: config.output,
            layers,
        })
    }

    /// All-zero parameters with the config's shapes.
    pub fn zeros(config: &MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_sizes()
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            output: config.output,
            layers,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flat view of every parameter: layer by layer, weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params().copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        for (p, v) in self
            .layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .zip(values)
        {
            *p = *v;
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            output: self.output,
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.params_mut().zip(b.params()).for_each(|(x, y)| *x += y);
        }
    }

    fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.params().all(|x| x.is_finite()))
    }
}

/// Gradients share the parameter layout.
pub type Gradients = MlpParams;

/// A profile sketch and the probability sketch of what came next.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    input: Vec<f64>,
    target: Sketch,
}

impl TrainingExample {
    pub fn new(input: Vec<f64>, target: Sketch) -> Result<Self> {
        if target.kind() != SketchKind::Probabilities {
            return Err(ScorerError::InvalidTarget(
                "target must be a probability sketch".into(),
            ));
        }
        for p in 0..target.depth() {
            let sum: f64 = target.row(p).iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(ScorerError::InvalidTarget(format!(
                    "row {p} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { input, target })
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn target(&self) -> &Sketch {
        &self.target
    }
}

/// Activations of every layer (post-rectifier for hidden layers, raw
/// logits for the last) and the output probabilities.
struct Trace {
    activations: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn softmax_rows(logits: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    for (row, o) in logits.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (y, &x) in o.iter_mut().zip(row) {
            *y = (x - max).exp();
            sum += *y;
        }
        o.iter_mut().for_each(|y| *y /= sum);
    }
    out
}

/// Nonzero entries of a mostly-zero input, or `None` if it is dense.
fn sparse_input(input: &[f64]) -> Option<Vec<(usize, f64)>> {
    let nz: Vec<(usize, f64)> = input
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, x)| x != 0.0)
        .collect();
    (nz.len() * 4 <= input.len()).then_some(nz)
}

fn forward_trace(params: &MlpParams, input: &[f64]) -> Result<Trace> {
    if input.len() != params.input_size() {
        return Err(ScorerError::ShapeMismatch {
            expected: params.input_size(),
            found: input.len(),
        });
    }
    let last = params.layers.len() - 1;
    let nonzero = sparse_input(input);
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    for (i, layer) in params.layers.iter().enumerate() {
        let mut out = vec![0.0; layer.n_out];
        match (i, &nonzero) {
            (0, Some(nz)) => layer.apply_sparse(nz, &mut out),
            (0, None) => layer.apply(input, &mut out),
            _ => layer.apply(&activations[i - 1], &mut out),
        }
        if i < last {
            out.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(ScorerError::NonFinite { layer: i });
        }
        activations.push(out);
    }
    let probs = softmax_rows(&activations[last], params.output.width());
    if probs.iter().any(|x| !x.is_finite()) {
        return Err(ScorerError::NonFinite { layer: last });
    }
    Ok(Trace { activations, probs })
}

/// Predicted probability sketch for one input vector.
pub fn forward(params: &MlpParams, input: &[f64]) -> Result<Sketch> {
    let trace = forward_trace(params, input)?;
    Ok(Sketch::from_cells_unchecked(
        params.output,
        SketchKind::Probabilities,
        trace.probs,
    ))
}

fn cross_entropy_cells(output: &[f64], target: &[f64], depth: usize) -> f64 {
    let total: f64 = output
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&o, &t)| -t * (o + LOG_EPSILON).ln())
        .sum();
    total / depth as f64
}

/// `(1/D) * sum_p sum_w -target * ln(output + 1e-9)`.
pub fn cross_entropy(output: &Sketch, target: &Sketch) -> Result<f64> {
    if output.depth() != target.depth() || output.width() != target.width() {
        return Err(SketchError::LayoutMismatch(format!(
            "output {}x{} vs target {}x{}",
            output.depth(),
            output.width(),
            target.depth(),
            target.width()
        ))
        .into());
    }
    Ok(cross_entropy_cells(
        output.cells(),
        target.cells(),
        output.depth(),
    ))
}

/// Accumulates the gradient of one example into `grads`; returns its loss.
fn accumulate_gradients(
    params: &MlpParams,
    input: &[f64],
    target: &[f64],
    grads: &mut Gradients,
) -> Result<f64> {
    let trace = forward_trace(params, input)?;
    let key = params.output;
    let (depth, width) = (key.depth, key.width());
    let loss = cross_entropy_cells(&trace.probs, target, depth);

    // d loss / d logits, exact including the log floor
    let mut delta = vec![0.0; trace.probs.len()];
    for ((d, o), t) in delta
        .chunks_exact_mut(width)
        .zip(trace.probs.chunks_exact(width))
        .zip(target.chunks_exact(width))
    {
        let g: Vec<f64> = o
            .iter()
            .zip(t)
            .map(|(&o, &t)| -t / (o + LOG_EPSILON) / depth as f64)
            .collect();
        let mean: f64 = dot(o, &g);
        for ((d, &o), &g) in d.iter_mut().zip(o).zip(&g) {
            *d = o * (g - mean);
        }
    }

    for i in (0..params.layers.len()).rev() {
        let layer = &params.layers[i];
        let prev: &[f64] = if i == 0 {
            input
        } else {
            &trace.activations[i - 1]
        };
        let gl = &mut grads.layers[i];
        let nonzero = if i == 0 { sparse_input(input) } else { None };
        for ((grow, &d), gb) in gl
            .weights
            .chunks_exact_mut(layer.n_in)
            .zip(&delta)
            .zip(gl.bias.iter_mut())
        {
            *gb += d;
            if d == 0.0 {
                continue;
            }
            match &nonzero {
                Some(nz) => nz.iter().for_each(|&(j, a)| grow[j] += d * a),
                None => grow.iter_mut().zip(prev).for_each(|(g, &a)| *g += d * a),
            }
        }
        if i > 0 {
            let mut back = vec![0.0; layer.n_in];
            for (row, &d) in layer.weights.chunks_exact(layer.n_in).zip(&delta) {
                if d != 0.0 {
                    for (b, &w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
            }
            for (b, &a) in back.iter_mut().zip(prev) {
                if a <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
    }
    Ok(loss)
}

/// Analytic gradient of `cross_entropy(forward(params, input), target)`.
pub fn gradients(params: &MlpParams, example: &TrainingExample) -> Result<Gradients> {
    let t = example.target();
    if t.depth() != params.output.depth || t.width() != params.output.width() {
        return Err(ScorerError::ShapeMismatch {
            expected: params.output.cells(),
            found: t.cells().len(),
        });
    }
    let mut grads = params.zeros_like();
    accumulate_gradients(params, example.input(), t.cells(), &mut grads)?;
    Ok(grads)
}

/// Loss of one example under `params`.
pub fn example_loss(params: &MlpParams, example: &TrainingExample) -> Result<f64> {
    let out = forward(params, example.input())?;
    cross_entropy(&out, example.target())
}

fn mean_loss(params: &MlpParams, data: &[TrainingExample]) -> Result<f64> {
    let losses = data
        .par_iter()
        .map(|e| example_loss(params, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: MlpParams,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean loss of the examples seen in each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut MlpParams, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let flat_grads = grads.layers.iter().flat_map(|l| l.params());
        let state = self.m.iter_mut().zip(self.v.iter_mut());
        for ((p, g), (m, v)) in params
            .layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .zip(flat_grads)
            .zip(state)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

fn check_example(config: &MlpConfig, e: &TrainingExample) -> Result<()> {
    if e.input().len() != config.input_size {
        return Err(ScorerError::ShapeMismatch {
            expected: config.input_size,
            found: e.input().len(),
        });
    }
    let t = e.target();
    if t.depth() != config.output.depth || t.width() != config.output.width() {
        return Err(ScorerError::ShapeMismatch {
            expected: config.output.cells(),
            found: t.cells().len(),
        });
    }
    Ok(())
}

/// Mini-batch Adam training from the seeded initialization.
///
/// Data order is a seeded shuffle per epoch. Batch gradients are summed in
/// fixed-size chunks whose partial sums are combined in order, so the result
/// is the same on any number of threads.
pub fn train(data: &[TrainingExample], config: &MlpConfig) -> Result<TrainReport> {
    train_from(MlpParams::init(config)?, data, config)
}

/// Like [`train`] but starting from given parameters.
pub fn train_from(
    mut params: MlpParams,
    data: &[TrainingExample],
    config: &MlpConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(ScorerError::EmptyDataset);
    }
    for e in data {
        check_example(config, e)?;
    }
    let initial_loss = mean_loss(&params, data)?;
    let mut adam = Adam::new(params.n_params());
    let mut shuffle = CounterRng::new(config.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for i in (1..order.len()).rev() {
            let j = shuffle.next_below(i as u64 + 1) as usize;
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let partials = batch
                .par_chunks(GRAD_CHUNK)
                .map(|chunk| {
                    let mut g = params.zeros_like();
                    let mut loss = 0.0;
                    for &i in chunk {
                        loss += accumulate_gradients(
                            &params,
                            data[i].input(),
                            data[i].target().cells(),
                            &mut g,
                        )?;
                    }
                    Ok((g, loss))
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    ScorerError::NonFinite { .. } => ScorerError::Diverged {
                        epoch,
                        batch: batch_no,
                    },
                    other => other,
                })?;
            let mut iter = partials.into_iter();
            let (mut grads, mut loss) = iter.next().expect("non-empty batch");
            for (g, l) in iter {
                grads.add_assign(&g);
                loss += l;
            }
            let scale = 1.0 / batch.len() as f64;
            for l in &mut grads.layers {
                l.params_mut().for_each(|x| *x *= scale);
            }
            if !loss.is_finite() || !grads.all_finite() {
                return Err(ScorerError::Diverged {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += loss;
            adam.update(&mut params, &grads, config.learning_rate);
        }
        epoch_losses.push(epoch_loss / data.len() as f64);
    }
    let final_loss = mean_loss(&params, data)?;
    if !final_loss.is_finite() {
        return Err(ScorerError::Diverged {
            epoch: config.epochs,
            batch: 0,
        });
    }
    Ok(TrainReport {
        params,
        initial_loss,
        final_loss,
        epoch_losses,
    })
}

/// Largest relative disagreement between analytic gradients and central
/// finite differences with step `h`, over every parameter.
///
/// Relative error is `|a - n| / max(|a|, |n|, floor)`; `floor` keeps
/// coordinates whose true gradient is zero from dividing noise by noise.
pub fn gradient_check(
    params: &MlpParams,
    example: &TrainingExample,
    h: f64,
    floor: f64,
) -> Result<f64> {
    let analytic = gradients(params, example)?.flat();
    let base = params.flat();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        flat[i] = base[i] + h;
        probe.set_flat(&flat);
        let up = example_loss(&probe, example)?;
        flat[i] = base[i] - h;
        probe.set_flat(&flat);
        let down = example_loss(&probe, example)?;
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * h);
        let denom = a.abs().max(numeric.abs()).max(floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Sorts by descending score, ties by ascending id.
pub fn rank_scores(scored: &mut [(u32, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Geometric-mean readout of a predicted probability sketch, with the
/// per-cell logarithms computed once.
#[derive(Debug, Clone)]
pub struct LogSketch {
    depth: usize,
    width: usize,
    logs: Vec<f64>,
}

impl LogSketch {
    pub fn new(s: &Sketch) -> Self {
        Self {
            depth: s.depth(),
            width: s.width(),
            logs: s.cells().iter().map(|c| (c + LOG_EPSILON).ln()).collect(),
        }
    }

    pub fn score(&self, codes: &CodeSet) -> Result<f64> {
        if codes.depth() != self.depth || codes.buckets().iter().any(|&b| b as usize >= self.width)
        {
            return Err(SketchError::LayoutMismatch(
                "code set does not fit the output sketch".into(),
            )
            .into());
        }
        let sum: f64 = codes
            .buckets()
            .iter()
            .enumerate()
            .map(|(p, &b)| self.logs[p * self.width + b as usize])
            .sum();
        Ok((sum / self.depth as f64).exp())
    }
}

/// One forward pass, then every candidate scored by geometric-mean readout.
pub fn score_candidates<'a, I>(
    params: &MlpParams,
    user_input: &[f64],
    candidates: I,
) -> Result<Vec<(u32, f64)>>
where
    I: IntoIterator<Item = (u32, &'a CodeSet)>,
{
    let mut candidates = candidates.into_iter().peekable();
    if candidates.peek().is_none() {
        return Ok(Vec::new());
    }
    let logs = LogSketch::new(&forward(params, user_input)?);
    let mut scored = candidates
        .map(|(id, c)| Ok((id, logs.score(c)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_scores(&mut scored);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{normalize_rows, sketch_of_items};

    fn tiny_key() -> LayoutKey {
        LayoutKey {
            depth: 2,
            bits: 2,
            input_dim: 3,
            seed: 0,
        }
    }

    fn tiny_config() -> MlpConfig {
        MlpConfig {
            hidden_size: 5,
            ..MlpConfig::new(6, tiny_key())
        }
    }

    fn one_hot_target(key: LayoutKey, buckets: &[u32]) -> Sketch {
        let mut s = Sketch::zeros(key);
        s.insert(&CodeSet::new(buckets.to_vec()), 1.0).unwrap();
        normalize_rows(&s).unwrap()
    }

    #[test]
    fn config_limits() {
        let mut c = tiny_config();
        for n in 1..=5 {
            c.n_layers = n;
            assert!(c.validate().is_ok());
            assert_eq!(c.layer_sizes().len(), n + 1);
        }
        c.n_layers = 6;
        assert!(c.validate().is_err());
        c.n_layers = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let p = MlpParams::zeros(&tiny_config()).unwrap();
        let out = forward(&p, &[1.0; 6]).unwrap();
        assert!(out.cells().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn output_rows_sum_to_one() {
        let mut c = tiny_config();
        c.n_layers = 3;
        c.seed = 11;
        let p = MlpParams::init(&c).unwrap();
        let out = forward(&p, &[3.0, -1.0, 0.5, 10.0, -7.0, 2.0]).unwrap();
        for r in 0..out.depth() {
            assert!((out.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert!(matches!(
            forward(&p, &[1.0]),
            Err(ScorerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_values() {
        let key = tiny_key();
        let t = one_hot_target(key, &[1, 3]);
        assert!(cross_entropy(&t, &t).unwrap() < 1e-8);
        let uniform = forward(&MlpParams::zeros(&tiny_config()).unwrap(), &[0.0; 6]).unwrap();
        assert!((cross_entropy(&uniform, &t).unwrap() - 4f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn targets_must_be_distributions() {
        let key = tiny_key();
        let t = one_hot_target(key, &[0, 0]);
        let doubled: Vec<f64> = t.cells().iter().map(|x| 2.0 * x).collect();
        let bad = Sketch::from_cells_unchecked(key, SketchKind::Probabilities, doubled);
        assert!(matches!(
            TrainingExample::new(vec![0.0; 6], bad),
            Err(ScorerError::InvalidTarget(_))
        ));
        let counts = sketch_of_items(
            &[CodeSet::new(vec![0, 0])],
            &[1.0],
            &crate::sketch::make_layout(2, 2, 3, 0).unwrap(),
        )
        .unwrap();
        assert!(TrainingExample::new(vec![0.0; 6], counts).is_err());
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradient() {
        let p = MlpParams::zeros(&tiny_config()).unwrap();
        let e = TrainingExample::new(vec![0.0; 6], one_hot_target(tiny_key(), &[2, 1])).unwrap();
        let g = gradients(&p, &e).unwrap();
        assert!(g.layers[0].weights.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn learning_rate_zero_is_a_no_op() {
        let mut c = tiny_config();
        c.learning_rate = 0.0;
        c.epochs = 3;
        c.batch_size = 2;
        let data: Vec<_> = (0..5)
            .map(|i| {
                TrainingExample::new(
                    vec![i as f64; 6],
                    one_hot_target(tiny_key(), &[i % 4, (i + 1) % 4]),
                )
                .unwrap()
            })
            .collect();
        let r = train(&data, &c).unwrap();
        assert_eq!(r.params, MlpParams::init(&c).unwrap());
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            train(&[], &tiny_config()),
            Err(ScorerError::EmptyDataset)
        ));
    }

    #[test]
    fn ranking_and_ties() {
        let c = tiny_config();
        let p = MlpParams::init(&c).unwrap();
        let a = CodeSet::new(vec![1, 2]);
        let only = score_candidates(&p, &[0.5; 6], [(7u32, &a)]).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].0, 7);
        let tied = score_candidates(&p, &[0.5; 6], [(9u32, &a), (3u32, &a)]).unwrap();
        assert_eq!(tied[0].1, tied[1].1);
        assert_eq!([tied[0].0, tied[1].0], [3, 9]);
        assert!(score_candidates(&p, &[0.5; 6], std::iter::empty())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn seeded_forward_matches_reference_arithmetic() {
        let c = MlpConfig {
            seed: 7,
            ..tiny_config()
        };
        let p = MlpParams::init(&c).unwrap();
        let out = forward(&p, &[0.3, -1.2, 0.8, 2.0, -0.5, 1.1]).unwrap();
        let golden = [
            0.26476637853102236,
            0.24296624322846352,
            0.2369158757356767,
            0.2553515025048374,
            0.2449446351341596,
            0.24159776412001285,
            0.26517227875934163,
            0.24828532198648592,
        ];
        for (a, b) in out.cells().iter().zip(golden) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let c = MlpConfig {
                seed,
                ..tiny_config()
            };
            let mut p = MlpParams::init(&c).unwrap();
            for (k, b) in p
                .layers
                .iter_mut()
                .flat_map(|l| l.bias.iter_mut())
                .enumerate()
            {
                *b = 0.1 * ((k % 3) as f64 - 0.5);
            }
            let mut rng = CounterRng::new(seed, 99);
            let input: Vec<f64> = (0..6).map(|_| rng.next_symmetric() * 2.0).collect();
            let mut target = vec![0.0; 8];
            target[..4].copy_from_slice(&[0.1, 0.6, 0.0, 0.3]);
            target[4 + seed as usize % 4] = 1.0;
            let t = Sketch::from_cells(tiny_key(), SketchKind::Probabilities, target).unwrap();
            let e = TrainingExample::new(input, t).unwrap();
            let err = gradient_check(&p, &e, 1e-5, 1e-8).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn loss_is_at_least_target_entropy() {
        let c = MlpConfig {
            n_layers: 3,
            ..tiny_config()
        };
        let mut rng = CounterRng::new(3, 5);
        for seed in 0..30 {
            let p = MlpParams::init(&MlpConfig { seed, ..c.clone() }).unwrap();
            let input: Vec<f64> = (0..6).map(|_| rng.next_symmetric() * 3.0).collect();
            let out = forward(&p, &input).unwrap();
            let mut raw = Sketch::zeros(tiny_key());
            for _ in 0..3 {
                let codes = CodeSet::new(vec![rng.next_below(4) as u32, rng.next_below(4) as u32]);
                raw.insert(&codes, rng.next_f64() + 0.1).unwrap();
            }
            let t = normalize_rows(&raw).unwrap();
            let entropy: f64 = t
                .cells()
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| -x * x.ln())
                .sum::<f64>()
                / t.depth() as f64;
            assert!(cross_entropy(&out, &t).unwrap() >= entropy - 1e-6);
        }
    }

    fn memorization_set() -> Vec<TrainingExample> {
        let mut rng = CounterRng::new(21, 8);
        (0..20)
            .map(|_| {
                let input: Vec<f64> = (0..6).map(|_| rng.next_symmetric()).collect();
                let codes = CodeSet::new(vec![rng.next_below(4) as u32, rng.next_below(4) as u32]);
                TrainingExample::new(input, one_hot_target(tiny_key(), codes.buckets())).unwrap()
            })
            .collect()
    }

    #[test]
    fn small_set_is_memorized() {
        let c = MlpConfig {
            hidden_size: 32,
            learning_rate: 0.01,
            batch_size: 4,
            epochs: 200,
            seed: 1,
            ..tiny_config()
        };
        let r = train(&memorization_set(), &c).unwrap();
        assert!(
            r.final_loss < 0.1 * r.initial_loss,
            "{} -> {}",
            r.initial_loss,
            r.final_loss
        );
        assert_eq!(r.epoch_losses.len(), 200);
    }

    #[test]
    fn training_is_deterministic() {
        let c = MlpConfig {
            epochs: 5,
            batch_size: 3,
            learning_rate: 0.01,
            seed: 4,
            ..tiny_config()
        };
        let a = train(&memorization_set(), &c).unwrap();
        let b = train(&memorization_set(), &c).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c3 = pool.install(|| train(&memorization_set(), &c)).unwrap();
        assert_eq!(a.params, c3.params);
    }

    #[test]
    fn divergence_is_reported() {
        let c = MlpConfig {
            learning_rate: 1e300,
            epochs: 3,
            batch_size: 5,
            ..tiny_config()
        };
        let err = train(&memorization_set(), &c).unwrap_err();
        assert!(matches!(err, ScorerError::Diverged { .. }), "{err}");
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let p = MlpParams::init(&MlpConfig {
            seed: 2,
            ..tiny_config()
        })
        .unwrap();
        let codes: Vec<CodeSet> = (0..12u32)
            .map(|i| CodeSet::new(vec![i % 4, (i / 3) % 4]))
            .collect();
        let fwd =
            score_candidates(&p, &[0.2; 6], (0..12u32).map(|i| (i, &codes[i as usize]))).unwrap();
        let rev = score_candidates(
            &p,
            &[0.2; 6],
            (0..12u32).rev().map(|i| (i, &codes[i as usize])),
        )
        .unwrap();
        assert_eq!(fwd, rev);
    }

    #[test]
    fn sparse_first_layer_matches_dense() {
        let p = MlpParams::init(&MlpConfig {
            seed: 8,
            hidden_size: 7,
            ..MlpConfig::new(40, tiny_key())
        })
        .unwrap();
        let mut x = vec![0.0; 40];
        x[3] = 0.5;
        x[17] = -2.0;
        x[39] = 1.25;
        let nz = sparse_input(&x).unwrap();
        let (mut a, mut b) = (vec![0.0; 7], vec![0.0; 7]);
        p.layers[0].apply(&x, &mut a);
        p.layers[0].apply_sparse(&nz, &mut b);
        assert_eq!(a, b);
        assert!(sparse_input(&[1.0, 0.0, 2.0]).is_none());
    }
}
