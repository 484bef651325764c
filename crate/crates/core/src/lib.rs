//! Expressive piano performance modeling.
//!
//! MIDI performances are read into note lists ([`midi_io`]), cut into clips
//! and augmented ([`preprocess`]), encoded as event sequences ([`vocab`]),
//! and modeled by a stacked LSTM ([`lstm`]) trained with teacher forcing
//! ([`train`]). New performances are generated by sampling ([`sample`]).

pub mod lstm;
pub mod midi_io;
pub mod preprocess;
pub mod sample;
pub mod train;
pub mod vocab;

pub use lstm::{LayerState, ModelConfig, Parameters};
pub use midi_io::{MidiFile, PedalInterval, PerfNote};
pub use preprocess::{AugmentationMode, AugmentationPolicy, Clip, Combination, Manifest, Split};
pub use sample::SamplerConfig;
pub use train::{Checkpoint, TrainingConfig};
pub use vocab::{EventIndex, EventSequence, PerformanceEvent, QuantizationConfig};
