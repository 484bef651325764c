//! Generation: ancestral sampling and stochastic beam search.
//!
//! Both consume random numbers the same way, one uniform `f64` per drawn
//! token, so a beam of width 1 with one branch is exactly ancestral
//! sampling.

mod beam;

pub use beam::{stochastic_beam_search, stochastic_beam_search_detailed, BeamOutcome};

use crate::lstm::{log_softmax, LayerState, LstmError, Parameters, Scalar};
use crate::vocab::{EventIndex, EventSequence, PerformanceEvent, QuantizationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

/// An autoregressive model over event codes.
pub trait SequenceModel {
    type State: Clone;
    fn vocab_size(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    /// Consumes `token` and returns the logits of the next one.
    fn advance(&self, state: &mut Self::State, token: EventIndex) -> Result<Vec<f64>, LstmError>;
}

impl<S: Scalar> SequenceModel for Parameters<S> {
    type State = LayerState<S>;

    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn initial_state(&self) -> Self::State {
        LayerState::zeros(&self.config)
    }

    fn advance(&self, state: &mut Self::State, token: EventIndex) -> Result<Vec<f64>, LstmError> {
        Ok(self
            .forward_step(state, token)?
            .into_iter()
            .map(|l| l.to_f64())
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    /// Take the most likely token instead of drawing.
    pub greedy: bool,
    pub beam_width: usize,
    pub branch_factor: usize,
    pub max_events: usize,
    pub max_seconds: f64,
    pub seed: u64,
    /// Events fed before generation starts; they are part of the output.
    /// Empty means [`default_primer`].
    pub primer: Vec<EventIndex>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            greedy: false,
            beam_width: 1,
            branch_factor: 4,
            max_events: 20_000,
            max_seconds: 30.0,
            seed: 0,
            primer: Vec::new(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: &str| Err(SampleError::InvalidConfig(m.to_string()));
        if !self.greedy && !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive unless greedy");
        }
        if self.beam_width == 0 || self.branch_factor == 0 {
            return bad("beam_width and branch_factor must be at least 1");
        }
        if self.max_events == 0 {
            return bad("max_events must be at least 1");
        }
        if self.max_seconds.is_nan() || self.max_seconds <= 0.0 {
            return bad("max_seconds must be positive");
        }
        Ok(())
    }

    pub(crate) fn primer_or_default(&self, quant: &QuantizationConfig) -> Vec<EventIndex> {
        if self.primer.is_empty() {
            default_primer(quant)
        } else {
            self.primer.clone()
        }
    }

    pub(crate) fn is_done(&self, quant: &QuantizationConfig, events: usize, shift_steps: u64) -> bool {
        events >= self.max_events || quant.step_to_seconds(shift_steps) >= self.max_seconds
    }
}

/// The default velocity bin, or the smallest time shift when velocity is
/// disabled.
pub fn default_primer(quant: &QuantizationConfig) -> Vec<EventIndex> {
    let event = if quant.has_velocity() {
        PerformanceEvent::VelocityBin(quant.default_bin())
    } else {
        PerformanceEvent::TimeShift(1)
    };
    vec![quant.event_to_index(event).expect("default primer is in the vocabulary")]
}

/// Log-probabilities of `logits / temperature`.
pub(crate) fn tempered_log_probs(logits: &[f64], temperature: f64) -> Vec<f64> {
    if temperature == 1.0 {
        log_softmax(logits)
    } else {
        let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
        log_softmax(&scaled)
    }
}

/// Inverse-CDF draw with a uniform `u` in [0, 1).
pub(crate) fn draw_index(log_probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        if p > 0.0 {
            last_nonzero = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_nonzero
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn prime<M: SequenceModel>(
    model: &M,
    primer: &[EventIndex],
) -> Result<(M::State, Vec<f64>), SampleError> {
    let mut state = model.initial_state();
    let mut logits = Vec::new();
    for &t in primer {
        logits = model.advance(&mut state, t)?;
    }
    Ok((state, logits))
}

/// Ancestral sampling: each token is drawn from the tempered softmax (or
/// taken greedily) until `max_events` events exist or the time shifts add
/// up to `max_seconds`. The primer is included in the output.
pub fn sample_sequence<M: SequenceModel>(
    model: &M,
    scfg: &SamplerConfig,
    quant: &QuantizationConfig,
) -> Result<EventSequence, SampleError> {
    scfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
    let mut events = scfg.primer_or_default(quant);
    let mut shift: u64 = events.iter().map(|&e| quant.shift_steps(e)).sum();
    let (mut state, mut logits) = prime(model, &events)?;
    while !scfg.is_done(quant, events.len(), shift) {
        let token = if scfg.greedy {
            argmax(&logits)
        } else {
            let u: f64 = rng.random();
            draw_index(&tempered_log_probs(&logits, scfg.temperature), u)
        };
        let token = EventIndex(token as u16);
        events.push(token);
        shift += quant.shift_steps(token);
        if scfg.is_done(quant, events.len(), shift) {
            break;
        }
        logits = model.advance(&mut state, token)?;
    }
    let mut seq = EventSequence::new(events);
    seq.meta.duration_s = quant.step_to_seconds(shift);
    Ok(seq)
}
