use perfrnn_core::midi_io::{
    extract_performance, is_valid_note_list, parse_smf, sort_notes, write_smf, PerfNote,
};
use perfrnn_core::preprocess::{time_stretch, transpose, Clip};
use perfrnn_core::vocab::{decode, encode, EventSequence, PerformanceEvent, QuantizationConfig};
use proptest::prelude::*;

/// Drops notes that overlap an earlier kept note of the same pitch.
fn without_overlaps(mut notes: Vec<PerfNote>) -> Vec<PerfNote> {
    sort_notes(&mut notes);
    let mut busy_until = [f64::NEG_INFINITY; 128];
    notes.retain(|n| {
        let ok = n.onset_s >= busy_until[n.pitch as usize];
        if ok {
            busy_until[n.pitch as usize] = n.offset_s;
        }
        ok
    });
    notes
}

/// Notes whose times are whole 8 ms steps and whose velocities are bin
/// centres, lasting at most 30 s.
fn grid_notes() -> impl Strategy<Value = Vec<PerfNote>> {
    let q = QuantizationConfig::default();
    prop::collection::vec((0u8..128, 0u64..3750, 1u64..400, 0u8..32), 0..=100).prop_map(move |raw| {
        let notes = raw
            .into_iter()
            .map(|(pitch, on, dur, bin)| {
                let off = (on + dur).min(3750).max(on + 1);
                PerfNote::new(
                    pitch,
                    q.step_to_seconds(on),
                    q.step_to_seconds(off),
                    q.bin_to_velocity(bin).unwrap(),
                )
            })
            .collect();
        without_overlaps(notes)
    })
}

/// Arbitrary valid notes with continuous times.
fn free_notes() -> impl Strategy<Value = Vec<PerfNote>> {
    prop::collection::vec((0u8..128, 0.0f64..30.0, 0.001f64..4.0, 1u8..128), 0..=100).prop_map(|raw| {
        without_overlaps(
            raw.into_iter()
                .map(|(p, on, d, v)| PerfNote::new(p, on, on + d, v))
                .collect(),
        )
    })
}

fn shift_steps(seq: &EventSequence, q: &QuantizationConfig) -> Vec<u64> {
    seq.events
        .iter()
        .filter_map(|&e| match q.index_to_event(e).unwrap() {
            PerformanceEvent::TimeShift(s) => Some(s as u64),
            _ => None,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn grid_notes_round_trip_exactly(notes in grid_notes()) {
        let q = QuantizationConfig::default();
        let decoded = decode(&encode(&notes, &q), &q, true).unwrap();
        prop_assert_eq!(decoded.notes, notes);
    }

    #[test]
    fn encoding_is_idempotent(notes in free_notes()) {
        let q = QuantizationConfig::default();
        let once = encode(&notes, &q);
        let decoded = decode(&once, &q, true).unwrap();
        prop_assert!(is_valid_note_list(&decoded.notes));
        prop_assert_eq!(encode(&decoded.notes, &q).events, once.events);
    }

    #[test]
    fn time_shifts_cover_the_performance(notes in free_notes()) {
        let q = QuantizationConfig::default();
        let seq = encode(&notes, &q);
        let shifts = shift_steps(&seq, &q);
        prop_assert!(shifts.iter().all(|&s| (1..=125).contains(&s)));
        // Only the last shift of a run may be shorter than the maximum.
        let runs_ok = seq.events.windows(2).all(|w| {
            let a = q.shift_steps(w[0]);
            let b = q.shift_steps(w[1]);
            !(a > 0 && b > 0 && a < 125)
        });
        prop_assert!(runs_ok);
        let decoded = decode(&seq, &q, true).unwrap();
        let last_off = decoded.notes.iter().map(|n| n.offset_s).fold(0.0, f64::max);
        prop_assert!((q.step_to_seconds(shifts.iter().sum()) - last_off).abs() < 1e-9);
    }

    #[test]
    fn no_velocity_round_trip_keeps_timing(notes in grid_notes()) {
        let q = QuantizationConfig::without_velocity();
        let seq = encode(&notes, &q);
        prop_assert!(seq.events.iter().all(|e| (e.0 as usize) < 381));
        let decoded = decode(&seq, &q, true).unwrap();
        prop_assert_eq!(decoded.notes.len(), notes.len());
        for (a, b) in decoded.notes.iter().zip(&notes) {
            prop_assert_eq!((a.pitch, a.onset_s, a.offset_s), (b.pitch, b.onset_s, b.offset_s));
            prop_assert_eq!(a.velocity, q.default_velocity());
        }
    }

    #[test]
    fn transposition_moves_pitch_only(notes in free_notes(), k in -12i8..=12) {
        let clip = Clip::new(notes.clone(), 35.0);
        let fits = notes.iter().all(|n| (0..=127).contains(&(n.pitch as i16 + k as i16)));
        match transpose(&clip, k) {
            None => prop_assert!(!fits),
            Some(t) => {
                prop_assert!(fits);
                prop_assert!(is_valid_note_list(&t.notes));
                for (a, b) in t.notes.iter().zip(&notes) {
                    prop_assert_eq!(a.pitch as i16, b.pitch as i16 + k as i16);
                    prop_assert_eq!((a.onset_s, a.offset_s, a.velocity), (b.onset_s, b.offset_s, b.velocity));
                }
                prop_assert_eq!(transpose(&t, -k).unwrap(), clip);
            }
        }
    }

    #[test]
    fn stretch_scales_times_and_keeps_order(notes in free_notes(), f in 0.5f64..=2.0) {
        let clip = Clip::new(notes.clone(), 35.0);
        let s = time_stretch(&clip, f).unwrap();
        prop_assert!(is_valid_note_list(&s.notes));
        prop_assert!((s.duration_s - 35.0 * f).abs() < 1e-9);
        for (a, b) in s.notes.iter().zip(&notes) {
            prop_assert_eq!((a.pitch, a.velocity), (b.pitch, b.velocity));
            prop_assert!((a.onset_s - b.onset_s * f).abs() < 1e-9);
            prop_assert!((a.duration_s() - b.duration_s() * f).abs() < 1e-9);
        }
        for w in s.notes.windows(2) {
            prop_assert!(w[0].onset_s <= w[1].onset_s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smf_round_trip_preserves_quantized_notes(notes in grid_notes()) {
        let q = QuantizationConfig::default();
        let perf = extract_performance(&parse_smf(&write_smf(&notes, None)).unwrap());
        prop_assert_eq!(perf.notes.len(), notes.len());
        prop_assert_eq!(perf.diagnostics.total(), 0);
        for (a, b) in perf.notes.iter().zip(&notes) {
            prop_assert_eq!((a.pitch, a.velocity), (b.pitch, b.velocity));
            // 960 ticks per second: half a tick of rounding at most.
            prop_assert!((a.onset_s - b.onset_s).abs() <= 0.5 / 960.0 + 1e-12);
            prop_assert!((a.offset_s - b.offset_s).abs() <= 0.5 / 960.0 + 1e-12);
        }
        prop_assert_eq!(encode(&perf.notes, &q).events, encode(&notes, &q).events);
    }

    #[test]
    fn smf_round_trip_is_exact_on_the_tick_grid(
        raw in prop::collection::vec((0u8..128, 0u32..28_800, 1u32..2_000, 1u8..128), 0..=100)
    ) {
        let notes = without_overlaps(
            raw.into_iter()
                .map(|(p, on, d, v)| PerfNote::new(p, on as f64 / 960.0, (on + d) as f64 / 960.0, v))
                .collect(),
        );
        let perf = extract_performance(&parse_smf(&write_smf(&notes, None)).unwrap());
        prop_assert_eq!(perf.notes, notes);
    }
}
