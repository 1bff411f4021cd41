//! Mini-batch Adam training with early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WindowSample;
use crate::nn::{clip_global_norm, dropout_mask, AdamConfig, AdamState, ModelConfig, ModelParams, Target, Task};

/// Samples per gradient work unit. Batches are cut into chunks of this size
/// and the chunk sums are reduced in order, so the thread count never
/// changes the result.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping; `None` never stops early.
    pub patience: Option<usize>,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.001,
            max_epochs: 200,
            patience: Some(10),
            seed: 0,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses. Epoch 0 is the initial parameters before any update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.records[self.best_epoch].val_loss
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "val_loss"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for r in &self.records {
            w.write_record([r.epoch.to_string(), r.train_loss.to_string(), r.val_loss.to_string()])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn target_of<'a>(task: Task, sample: &'a WindowSample) -> Target<'a> {
    match task {
        Task::Regression => Target::Regression(sample.targets_regression.data()),
        Task::Classification => Target::Classification(&sample.targets_class),
    }
}

/// Mean per-sample loss in evaluation mode.
pub fn mean_loss(params: &ModelParams, samples: &[WindowSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let task = params.config.task;
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let out = params.forward_eval(&s.inputs)?;
            crate::nn::model::sample_loss(&params.config, &out, target_of(task, s))
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

/// Summed loss and gradient over `batch`, computed in fixed-size chunks.
fn batch_gradient(
    params: &ModelParams,
    samples: &[WindowSample],
    batch: &[usize],
    masks: &[Option<Vec<f64>>],
) -> Result<(f64, ModelParams)> {
    let task = params.config.task;
    let partials: Vec<(f64, ModelParams)> = batch
        .par_chunks(GRAD_CHUNK)
        .zip(masks.par_chunks(GRAD_CHUNK))
        .map(|(idx, mk)| {
            let mut acc = params.zeros_like();
            let mut loss = 0.0;
            for (&i, m) in idx.iter().zip(mk) {
                let s = &samples[i];
                let (l, g) = params.loss_and_gradient(&s.inputs, target_of(task, s), m.as_deref())?;
                loss += l;
                acc.add_assign(&g);
            }
            Ok((loss, acc))
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    Ok((loss, grads))
}

/// Trains a freshly initialised network.
pub fn train(
    config: ModelConfig,
    train_set: &[WindowSample],
    val_set: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainingHistory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = ModelParams::init(config, &mut rng)?;
    train_from(params, train_set, val_set, cfg)
}

/// Continues training from `initial`, keeping the weights with the lowest
/// validation loss (the initial weights included). Without a validation
/// set the training loss in evaluation mode is used instead.
pub fn train_from(
    initial: ModelParams,
    train_set: &[WindowSample],
    val_set: &[WindowSample],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainingHistory)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    }
    for s in train_set.iter().chain(val_set) {
        if s.inputs.cols() != initial.config.input_dim {
            return Err(Error::SchemaMismatch(format!(
                "samples have {} features, model expects {}",
                s.inputs.cols(),
                initial.config.input_dim
            )));
        }
    }
    let selection_set = if val_set.is_empty() { train_set } else { val_set };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut params = initial;
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );

    let initial_train = mean_loss(&params, train_set)?;
    let initial_val = mean_loss(&params, selection_set)?;
    if !initial_train.is_finite() || !initial_val.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            last_finite_epoch: None,
        });
    }
    let mut records = vec![EpochRecord {
        epoch: 0,
        train_loss: initial_train,
        val_loss: initial_val,
    }];
    let mut best = (0usize, initial_val, params.clone());
    let mut since_best = 0usize;
    let mut stopped_early = false;
    let dropout = params.config.dropout;
    let encoder_dim = params.config.encoder_dim();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let masks: Vec<Option<Vec<f64>>> = batch
                .iter()
                .map(|_| (dropout > 0.0).then(|| dropout_mask(dropout, encoder_dim, &mut rng)))
                .collect();
            let (loss, mut grads) = batch_gradient(&params, train_set, batch, &masks)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    last_finite_epoch: Some(epoch - 1),
                });
            }
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(&mut params, &grads);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_loss(&params, selection_set)?;
        if !val_loss.is_finite() || !params.tensors().iter().all(|t| t.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                last_finite_epoch: Some(epoch - 1),
            });
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 {
            best = (epoch, val_loss, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_epoch, _, best_params) = best;
    Ok((
        best_params,
        TrainingHistory {
            records,
            best_epoch,
            stopped_early,
        },
    ))
}
