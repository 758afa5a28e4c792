//! Teacher-forced training with Adam and a step-halving learning rate.

mod example;

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use example::{prepare_example, prepare_examples, Example};

use crate::error::{Error, Result};
use crate::eval::{evaluate, mean_xel};
use crate::model::{decoder_forward, encoder_forward, Bound, Ctx, Model, ModelConfig, ParamStore};
use crate::seed;
use crate::stroke::{affine_augment, normalize_sequence, tokenize_sequence, AffineParams, TokenMatrix};
use crate::tensor::{Scalar, Tape, Tensor};
use crate::vocab::{Vocab, BOS, EOS, PAD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Epochs between halvings of the learning rate.
    pub halving_period: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    pub seed: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub freeze_encoder: bool,
    /// Stop once validation LA reaches this value.
    pub target_val_la: Option<f64>,
    /// Greedy-decode at most this many validation examples per epoch.
    pub val_decode_limit: Option<usize>,
    /// Draw a mild random affine map per example and step.
    pub augment: bool,
    /// Record zero wall time so logs are byte-identical across runs.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 8e-4,
            halving_period: 30,
            batch_size: 32,
            max_epochs: 200,
            max_steps: None,
            seed: 0,
            clip_norm: Some(1.0),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            freeze_encoder: false,
            target_val_la: None,
            val_decode_limit: None,
            augment: false,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    /// Full-scale settings: batch 256, 5 000 epochs.
    pub fn full_scale() -> Self {
        TrainConfig { batch_size: 256, max_epochs: 5000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive and finite");
        }
        if self.halving_period == 0 {
            return bad("halving_period must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.eps <= 0.0 || self.clip_norm.is_some_and(|c| c <= 0.0) {
            return bad("eps and clip_norm must be positive");
        }
        Ok(())
    }
}

/// `initial_lr · 2^(−⌊e / period⌋)`.
pub fn lr_at_epoch(epoch: usize, config: &TrainConfig) -> f64 {
    let halvings = (epoch / config.halving_period.max(1)).min(i32::MAX as usize) as i32;
    config.initial_lr * 2f64.powi(-halvings)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adam state; parameters that are not trainable carry no moments.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    moments: Vec<Option<Moments>>,
}

impl OptimState {
    pub fn new<T: Scalar>(params: &ParamStore<T>, config: &TrainConfig) -> Self {
        let moments = (0..params.len())
            .map(|i| {
                let len = params.get(i).len();
                params.trainable(i).then(|| Moments { m: vec![0.0; len], v: vec![0.0; len] })
            })
            .collect();
        OptimState { step: 0, beta1: config.beta1, beta2: config.beta2, eps: config.eps, moments }
    }

    pub fn moments(&self, id: usize) -> Option<&Moments> {
        self.moments.get(id).and_then(Option::as_ref)
    }
}

/// Stroke inputs with `⟨bos⟩`-framed targets padded to a common length.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Vec<TokenMatrix>,
    /// Rows of `y ⟨eos⟩ ⟨pad⟩…`, all the same length.
    pub targets: Vec<Vec<usize>>,
}

impl Batch {
    pub fn new(inputs: Vec<TokenMatrix>, targets: &[&[usize]]) -> Result<Self> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::InvalidArgument {
                op: "batch",
                msg: format!("{} inputs for {} targets", inputs.len(), targets.len()),
            });
        }
        let width = targets.iter().map(|t| t.len() + 1).max().unwrap_or(1);
        let targets = targets
            .iter()
            .map(|t| {
                let mut row = t.to_vec();
                row.push(EOS);
                row.resize(width, PAD);
                row
            })
            .collect();
        Ok(Batch { inputs, targets })
    }

    /// Batch from prepared examples, optionally re-drawing each input under
    /// a random affine map.
    pub fn from_examples(examples: &[&Example], config: &ModelConfig, augment: Option<(&AffineParams, u64)>) -> Result<Self> {
        let inputs = examples
            .par_iter()
            .map(|e| match augment {
                None => Ok(e.tokens.clone()),
                Some((params, seed_value)) => {
                    let mut rng = seed::rng(&[seed_value, seed::hash_str(&e.subject_id), seed::hash_str(&e.reference)]);
                    let seq = normalize_sequence(&affine_augment(&e.sequence, params, &mut rng)?)?;
                    Ok(tokenize_sequence(&seq, config.n, config.d_f)?.truncated())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<&[usize]> = examples.iter().map(|e| e.target.as_slice()).collect();
        Batch::new(inputs, &targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Target row `i` shifted right behind `⟨bos⟩`.
    pub fn decoder_input(&self, i: usize) -> Vec<usize> {
        let t = &self.targets[i];
        std::iter::once(BOS).chain(t[..t.len() - 1].iter().copied()).collect()
    }

    pub fn target_count(&self) -> usize {
        self.targets.iter().flatten().filter(|&&t| t != PAD).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub clip_norm: Option<f64>,
    /// Seed of the dropout streams.
    pub seed: u64,
    /// Reported with a non-finite loss.
    pub epoch: usize,
}

struct ExampleGrad<T> {
    loss_sum: f64,
    count: usize,
    grads: Vec<Option<Tensor<T>>>,
}

fn example_grad<T: Scalar>(model: &Model<T>, batch: &Batch, i: usize, rng_parts: [u64; 3]) -> Result<ExampleGrad<T>> {
    // trailing pad targets only add masked rows behind the causal mask
    let full = &batch.targets[i];
    let keep = full.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1);
    let target = &full[..keep];
    let input = batch.decoder_input(i);
    let input = &input[..keep];
    let x = &batch.inputs[i];
    let tape = Tape::new();
    let b = Bound::new(&tape, &model.params, true);
    let mut rng = seed::rng(&rng_parts);
    let mut ctx = Ctx::train(model.config.dropout, &mut rng);
    let z = encoder_forward(model, &b, x, &mut ctx)?;
    let (logits, _) = decoder_forward(model, &b, input, z, x.mask(), &mut ctx)?;
    let loss = logits.cross_entropy(target, PAD)?;
    let count = target.iter().filter(|&&t| t != PAD).count();
    let mean = loss.scalar().to_f64_lossy();
    let mut grads = tape.backward(loss)?;
    let mut out = vec![None; model.params.len()];
    for (id, var) in b.touched() {
        if model.params.trainable(id) {
            out[id] = grads.take(var);
        }
    }
    Ok(ExampleGrad { loss_sum: mean * count as f64, count, grads: out })
}

/// One teacher-forced Adam step on `batch`. Returns the batch loss: mean
/// cross-entropy over all non-pad targets. Per-example gradients are
/// combined in batch order, so the update does not depend on threading.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    batch: &Batch,
    state: &mut OptimState,
    lr: f64,
    opts: &StepOptions,
) -> Result<f64> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument { op: "train_step", msg: format!("learning rate {lr}") });
    }
    if state.moments.len() != model.params.len() {
        return Err(Error::InvalidArgument { op: "train_step", msg: "optimizer state built for another model".into() });
    }
    let step = state.step;
    let parts: Vec<ExampleGrad<T>> = {
        let m: &Model<T> = model;
        (0..batch.len())
            .into_par_iter()
            .map(|i| example_grad(m, batch, i, [opts.seed, step, i as u64]))
            .collect::<Result<_>>()?
    };
    let total: usize = parts.iter().map(|p| p.count).sum();
    let loss = parts.iter().map(|p| p.loss_sum).sum::<f64>() / total.max(1) as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss { loss, epoch: opts.epoch, step: step as usize });
    }

    let mut grads: Vec<Option<Vec<f64>>> = vec![None; model.params.len()];
    for p in &parts {
        let w = p.count as f64 / total as f64;
        for (acc, g) in grads.iter_mut().zip(&p.grads) {
            if let Some(g) = g {
                let acc = acc.get_or_insert_with(|| vec![0.0; g.len()]);
                for (a, x) in acc.iter_mut().zip(g.data()) {
                    *a += w * x.to_f64_lossy();
                }
            }
        }
    }
    if let Some(clip) = opts.clip_norm {
        let norm = grads.iter().flatten().flatten().map(|g| g * g).sum::<f64>().sqrt();
        if norm > clip {
            let s = clip / norm;
            grads.iter_mut().flatten().flatten().for_each(|g| *g *= s);
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
    for (id, g) in grads.into_iter().enumerate() {
        let (Some(g), Some(mo)) = (g, state.moments[id].as_mut()) else { continue };
        let param = &mut model.params.tensors_mut()[id];
        for (((p, g), m), v) in param.data_mut().iter_mut().zip(&g).zip(&mut mo.m).zip(&mut mo.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            if lr > 0.0 {
                let update = lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                *p = T::from_f64_lossy(p.to_f64_lossy() - update);
            }
        }
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_xel: f64,
    pub val_xel: f64,
    pub val_la: f64,
    pub val_cer: f64,
    pub wall_seconds: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,lr,train_xel,val_xel,val_la,val_cer,wall_seconds";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3}",
            self.epoch, self.lr, self.train_xel, self.val_xel, self.val_la, self.val_cer, self.wall_seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub history: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept (lowest validation XEL).
    pub best_epoch: usize,
    pub best_val_xel: f64,
    pub steps: u64,
    /// First epoch whose validation LA reached `target_val_la`.
    pub target_epoch: Option<usize>,
}

impl FitReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EpochMetrics::CSV_HEADER);
        out.push('\n');
        for m in &self.history {
            out.push_str(&m.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Trains `model` in place and leaves it holding the parameters of the
/// epoch with the lowest validation XEL (the last epoch if `val` is empty).
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    vocab: &Vocab,
    train: &[Example],
    val: &[Example],
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochMetrics),
) -> Result<FitReport> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument { op: "fit", msg: "empty training split".into() });
    }
    if config.freeze_encoder {
        model.freeze_encoder();
    }
    let mut state = OptimState::new(&model.params, config);
    let start = Instant::now();
    let mild = AffineParams::mild();
    let val_decode = &val[..config.val_decode_limit.map_or(val.len(), |k| k.min(val.len()))];
    let mut report = FitReport { history: vec![], best_epoch: 0, best_val_xel: f64::INFINITY, steps: 0, target_epoch: None };
    let mut best: Option<ParamStore<T>> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    'epochs: for epoch in 0..config.max_epochs {
        let lr = lr_at_epoch(epoch, config);
        order.sort_unstable();
        order.shuffle(&mut seed::rng(&[config.seed, epoch as u64, 0x5f]));
        let (mut loss_sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|s| state.step as usize >= s) {
                break;
            }
            let examples: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let augment = config.augment.then(|| (&mild, seed::derive(&[config.seed, state.step, 0xa6])));
            let batch = Batch::from_examples(&examples, &model.config, augment)?;
            let opts = StepOptions { clip_norm: config.clip_norm, seed: config.seed, epoch };
            let loss = train_step(model, &batch, &mut state, lr, &opts)?;
            let n = batch.target_count();
            loss_sum += loss * n as f64;
            count += n;
        }
        if count == 0 {
            break;
        }
        let (val_xel, val_la, val_cer) = if val.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let r = evaluate(model, vocab, val_decode)?;
            let xel = if val_decode.len() == val.len() { r.xel } else { mean_xel(model, val)? };
            (xel, r.la, r.cer)
        };
        let wall_seconds = if config.deterministic { 0.0 } else { start.elapsed().as_secs_f64() };
        let metrics = EpochMetrics { epoch, lr, train_xel: loss_sum / count as f64, val_xel, val_la, val_cer, wall_seconds };
        observer(&metrics);
        if val.is_empty() || val_xel < report.best_val_xel {
            report.best_val_xel = val_xel;
            report.best_epoch = epoch;
            best = Some(model.params.clone());
        }
        report.history.push(metrics);
        if let Some(target) = config.target_val_la {
            if val_la >= target {
                report.target_epoch = Some(epoch);
                break 'epochs;
            }
        }
    }
    if let Some(best) = best {
        model.params = best;
    }
    report.steps = state.step;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Frozen,
    FineTune,
}

/// Fresh model with `config` whose encoder is copied from `pretrained`; the
/// decoder keeps its random initialization.
pub fn transfer_model<T: Scalar, U: Scalar>(
    pretrained: &Model<U>,
    config: ModelConfig,
    mode: TransferMode,
    init_seed: u64,
) -> Result<Model<T>> {
    let mut model = Model::new(config, init_seed)?;
    model.copy_encoder_from(pretrained)?;
    if mode == TransferMode::Frozen {
        model.freeze_encoder();
    }
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
pub fn transfer_fit<T: Scalar, U: Scalar>(
    pretrained: &Model<U>,
    config: ModelConfig,
    mode: TransferMode,
    vocab: &Vocab,
    train: &[Example],
    val: &[Example],
    train_config: &TrainConfig,
    observer: impl FnMut(&EpochMetrics),
) -> Result<(Model<T>, FitReport)> {
    let mut model = transfer_model(pretrained, config, mode, train_config.seed)?;
    let tc = TrainConfig { freeze_encoder: mode == TransferMode::Frozen, ..train_config.clone() };
    let report = fit(&mut model, vocab, train, val, &tc, observer)?;
    Ok((model, report))
}
