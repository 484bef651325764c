#![allow(dead_code)]

use perfrnn_core::midi_io::{write_smf, PerfNote};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::{Command, Output};

pub fn perfrnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfrnn"))
        .args(args)
        .env_remove("PERF_SEED")
        .output()
        .expect("spawn perfrnn")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[track_caller]
pub fn assert_ok(out: &Output) {
    assert_eq!(
        code(out),
        0,
        "stdout: {}\nstderr: {}",
        stdout(out),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A pianistic note stream: a melody over a slow bass, with random
/// timing jitter and velocities.
pub fn performance(seconds: f64, seed: u64) -> Vec<PerfNote> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes = Vec::new();
    let mut t = 0.0;
    let mut pitch = 64i32;
    while t < seconds - 0.5 {
        pitch = (pitch + rng.random_range(-4..=4)).clamp(55, 84);
        let dur = rng.random_range(0.1..0.45);
        notes.push(PerfNote::new(pitch as u8, t, t + dur, rng.random_range(40..110)));
        if rng.random_bool(0.2) {
            notes.push(PerfNote::new((pitch - 24) as u8, t, t + 0.9, rng.random_range(30..80)));
        }
        t += rng.random_range(0.12..0.3);
    }
    let mut seen = [f64::NEG_INFINITY; 128];
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)));
    notes.retain(|n| {
        let ok = n.onset_s >= seen[n.pitch as usize];
        if ok {
            seen[n.pitch as usize] = n.offset_s;
        }
        ok
    });
    notes
}

pub fn write_midi(path: &Path, seconds: f64, seed: u64) {
    std::fs::write(path, write_smf(&performance(seconds, seed), None)).unwrap();
}
