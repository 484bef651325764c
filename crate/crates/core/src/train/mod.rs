//! Teacher-forced SGD training and held-out evaluation.

mod checkpoint;
mod log;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, RngState, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use log::{read_records, LogRecord, TrainingLog, LOG_HEADER};

use crate::lstm::{LstmError, ModelConfig, Parameters};
use crate::preprocess::{crop_segment, leading_segment, AugmentationPolicy, Clip};
use crate::vocab::{encode, EventIndex, EventSequence, QuantizationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sequences per gradient accumulator. Fixed so the reduction order, and
/// therefore every bit of the result, does not depend on the thread count.
const REDUCTION_CHUNK: usize = 8;

/// Crops that encode to fewer than two events are redrawn this many times.
const MAX_CROP_ATTEMPTS: usize = 16;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no clips to draw from")]
    EmptyManifest,
    #[error("batch has no predictable steps")]
    EmptyBatch,
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub grad_clip_norm: f64,
    pub max_steps: u64,
    pub eval_interval: u64,
    pub segment_len_s: f64,
    pub seed: u64,
    pub augmentation: AugmentationPolicy,
    pub quantization: QuantizationConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 0.001,
            grad_clip_norm: 5.0,
            max_steps: 10_000,
            eval_interval: 100,
            segment_len_s: 15.0,
            seed: 0,
            augmentation: AugmentationPolicy::default(),
            quantization: QuantizationConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad("grad_clip_norm must be positive");
        }
        if !(self.segment_len_s > 0.0 && self.segment_len_s.is_finite()) {
            return bad("segment_len_s must be positive");
        }
        self.quantization
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    /// The padding code: one past the last vocabulary code.
    pub fn pad_code(&self) -> EventIndex {
        EventIndex(self.quantization.vocab_size() as u16)
    }
}

/// Equal-length sequences; each is padded at the tail with
/// [`TrainingConfig::pad_code`].
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub sequences: Vec<EventSequence>,
    pub pad: EventIndex,
}

impl Batch {
    /// Sequence `i` without its padding.
    pub fn unpadded(&self, i: usize) -> &[EventIndex] {
        let events = &self.sequences[i].events;
        let end = events.iter().position(|&e| e == self.pad).unwrap_or(events.len());
        &events[..end]
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Number of next-event predictions the loss averages over.
    pub fn num_predictions(&self) -> usize {
        (0..self.len()).map(|i| self.unpadded(i).len().saturating_sub(1)).sum()
    }
}

/// Crops, augments and encodes one training example from a random clip.
pub fn sample_example<R: Rng + ?Sized>(
    clips: &[Clip],
    cfg: &TrainingConfig,
    rng: &mut R,
) -> Result<EventSequence, TrainError> {
    if clips.is_empty() {
        return Err(TrainError::EmptyManifest);
    }
    let mut seq = EventSequence::default();
    for _ in 0..MAX_CROP_ATTEMPTS {
        let clip = &clips[rng.random_range(0..clips.len())];
        let segment = if clip.duration_s > cfg.segment_len_s {
            crop_segment(clip, cfg.segment_len_s, rng).expect("segment fits")
        } else {
            clip.clone()
        };
        let variant = cfg.augmentation.sample_variant(&segment, rng);
        seq = encode(&variant.notes, &cfg.quantization);
        seq.meta.source = clip.source.clone();
        seq.meta.duration_s = variant.duration_s;
        if seq.len() >= 2 {
            break;
        }
    }
    Ok(seq)
}

/// Draws `batch_size` examples with replacement and pads them to a common
/// length.
pub fn make_batch<R: Rng + ?Sized>(
    clips: &[Clip],
    cfg: &TrainingConfig,
    rng: &mut R,
) -> Result<Batch, TrainError> {
    let mut sequences = (0..cfg.batch_size)
        .map(|_| sample_example(clips, cfg, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let pad = cfg.pad_code();
    let max_len = sequences.iter().map(|s| s.len()).max().unwrap_or(0);
    for s in &mut sequences {
        s.events.resize(max_len, pad);
    }
    Ok(Batch { sequences, pad })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Mean per-step loss in nats, before the update.
    pub mean_loss: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub clipped: bool,
    pub predictions: usize,
}

/// Mean per-step loss of `batch` and its gradient, padding excluded.
pub fn batch_gradient(
    params: &Parameters<f32>,
    batch: &Batch,
) -> Result<(f64, usize, Parameters<f32>), TrainError> {
    let seqs: Vec<&[EventIndex]> = (0..batch.len())
        .map(|i| batch.unpadded(i))
        .filter(|s| s.len() >= 2)
        .collect();
    let total: usize = seqs.iter().map(|s| s.len() - 1).sum();
    if total == 0 {
        return Err(TrainError::EmptyBatch);
    }
    let scale = 1.0 / total as f32;
    let partials = seqs
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            let mut grads = Parameters::zeros(params.config);
            let mut loss = 0.0f64;
            for seq in chunk {
                let trace = params.forward_sequence(seq)?;
                loss += trace.total_loss();
                params.backward_into(&trace, seq, scale, &mut grads)?;
            }
            Ok((loss, grads))
        })
        .collect::<Result<Vec<_>, LstmError>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("at least one chunk");
    for (l, g) in iter {
        loss += l;
        grads.add_scaled(&g, 1.0);
    }
    Ok((loss / total as f64, total, grads))
}

/// Rescales `grads` to norm `max_norm` if larger. Returns the norm before
/// clipping.
pub fn clip_gradients(grads: &mut Parameters<f32>, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale((max_norm / norm) as f32);
    }
    norm
}

/// One SGD update: `p ← p − lr · clip(∇ mean loss)`.
pub fn train_step(
    params: &mut Parameters<f32>,
    batch: &Batch,
    cfg: &TrainingConfig,
    step: u64,
) -> Result<StepStats, TrainError> {
    let (mean_loss, predictions, mut grads) = batch_gradient(params, batch).map_err(|e| match e {
        TrainError::Lstm(LstmError::NonFiniteActivation { step: t }) => TrainError::NonFiniteLoss {
            step,
            detail: format!("non-finite activation at sequence position {t}"),
        },
        other => other,
    })?;
    if !mean_loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            step,
            detail: format!("mean loss {mean_loss}"),
        });
    }
    let grad_norm = clip_gradients(&mut grads, cfg.grad_clip_norm);
    if !grad_norm.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            step,
            detail: format!("gradient norm {grad_norm}"),
        });
    }
    if cfg.learning_rate != 0.0 {
        params.add_scaled(&grads, -(cfg.learning_rate as f32));
        if !params.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step,
                detail: "parameters overflowed during the update".into(),
            });
        }
    }
    Ok(StepStats {
        mean_loss,
        grad_norm,
        clipped: grad_norm > cfg.grad_clip_norm,
        predictions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Mean per-step loss in nats.
    pub mean_loss: f64,
    pub predictions: usize,
    pub sequences: usize,
}

/// Mean per-step loss (nats) over the leading segment of every clip.
/// Deterministic: no cropping randomness and no augmentation.
pub fn evaluate(
    params: &Parameters<f32>,
    clips: &[Clip],
    cfg: &TrainingConfig,
) -> Result<f64, TrainError> {
    Ok(evaluate_report(params, clips, cfg)?.mean_loss)
}

pub fn evaluate_report(
    params: &Parameters<f32>,
    clips: &[Clip],
    cfg: &TrainingConfig,
) -> Result<EvalReport, TrainError> {
    if clips.is_empty() {
        return Err(TrainError::EmptyManifest);
    }
    let sequences: Vec<EventSequence> = clips
        .iter()
        .map(|c| encode(&leading_segment(c, cfg.segment_len_s).notes, &cfg.quantization))
        .filter(|s| s.len() >= 2)
        .collect();
    let parts = sequences
        .par_iter()
        .map(|s| params.sequence_nll(&s.events))
        .collect::<Result<Vec<_>, _>>()?;
    let (nll, count) = parts
        .into_iter()
        .fold((0.0, 0usize), |(a, n), (b, m)| (a + b, n + m));
    if count == 0 {
        return Err(TrainError::EmptyBatch);
    }
    Ok(EvalReport {
        mean_loss: nll / count as f64,
        predictions: count,
        sequences: sequences.len(),
    })
}

/// Parameters, step counter and batch RNG of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSession {
    pub params: Parameters<f32>,
    pub model: ModelConfig,
    pub config: TrainingConfig,
    pub step: u64,
    rng: ChaCha8Rng,
}

impl TrainSession {
    /// Fresh parameters initialized from `config.seed`; batches are drawn
    /// from a separate stream of the same seed.
    pub fn new(model: ModelConfig, config: TrainingConfig) -> Result<Self, TrainError> {
        config.validate()?;
        if model.vocab_size != config.quantization.vocab_size() {
            return Err(TrainError::InvalidConfig(format!(
                "model vocabulary {} does not match codec vocabulary {}",
                model.vocab_size,
                config.quantization.vocab_size()
            )));
        }
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Parameters::init(model, &mut init_rng)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            params,
            model,
            config,
            step: 0,
            rng,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Self {
        let rng = ckpt.rng.to_rng();
        Self {
            params: ckpt.params,
            model: ckpt.model,
            config: ckpt.training,
            step: ckpt.step,
            rng,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model,
            training: self.config,
            step: self.step,
            rng: RngState::of(&self.rng),
            params: self.params.clone(),
        }
    }

    /// Draws a batch and applies one update.
    pub fn step(&mut self, clips: &[Clip]) -> Result<StepStats, TrainError> {
        let batch = make_batch(clips, &self.config, &mut self.rng)?;
        let stats = train_step(&mut self.params, &batch, &self.config, self.step)?;
        self.step += 1;
        Ok(stats)
    }

    pub fn evaluate(&self, clips: &[Clip]) -> Result<f64, TrainError> {
        evaluate(&self.params, clips, &self.config)
    }
}

#[cfg(test)]
mod tests;
