//! Workloads shared by the benchmarks.

use perfrnn_core::midi_io::{sort_notes, PerfNote};
use perfrnn_core::{EventIndex, ModelConfig, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// About ten notes per second with chords, random timing and velocity.
pub fn performance(seconds: f64, seed: u64) -> Vec<PerfNote> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut busy = [0.0f64; 128];
    let mut notes = Vec::new();
    let mut t = 0.0;
    while t < seconds {
        for _ in 0..rng.random_range(1..=3) {
            let pitch = rng.random_range(36..96u8);
            if busy[pitch as usize] <= t {
                let off = (t + rng.random_range(0.05..1.5)).min(seconds);
                if off > t {
                    busy[pitch as usize] = off;
                    notes.push(PerfNote::new(pitch, t, off, rng.random_range(20..120)));
                }
            }
        }
        t += rng.random_range(0.02..0.25);
    }
    sort_notes(&mut notes);
    notes
}

pub fn random_codes(len: usize, vocab: usize, seed: u64) -> Vec<EventIndex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| EventIndex(rng.random_range(0..vocab as u16))).collect()
}

pub fn model(layers: usize, cells: usize, seed: u64) -> Parameters<f32> {
    Parameters::init(ModelConfig::new(layers, cells, 413), &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("valid model config")
}
