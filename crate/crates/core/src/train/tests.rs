use super::*;
use crate::midi_io::PerfNote;
use crate::preprocess::AugmentationMode;
use crate::vocab::decode;

fn clip(seconds: f64, seed: u64) -> Clip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut notes = Vec::new();
    let mut t = 0.0;
    while t < seconds - 0.5 {
        let dur = rng.random_range(0.05..0.6);
        notes.push(PerfNote::new(
            rng.random_range(40..90),
            t,
            t + dur,
            rng.random_range(30..110),
        ));
        t += rng.random_range(0.05..0.4);
    }
    let mut c = Clip::new(notes, seconds);
    c.source = format!("fixture_{seed}.mid");
    c
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        batch_size: 4,
        learning_rate: 0.05,
        segment_len_s: 5.0,
        seed: 7,
        ..TrainingConfig::default()
    }
}

fn small_model() -> ModelConfig {
    ModelConfig::new(2, 8, 413)
}

#[test]
fn batch_from_one_clip_has_full_size_and_valid_sequences() {
    let clips = vec![clip(30.0, 1)];
    let cfg = TrainingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let batch = make_batch(&clips, &cfg, &mut rng).unwrap();
    assert_eq!(batch.len(), 64);
    assert_eq!(batch.pad, EventIndex(413));
    let len = batch.sequences[0].len();
    assert!(batch.sequences.iter().all(|s| s.len() == len));
    let distinct: std::collections::HashSet<Vec<u16>> =
        batch.sequences.iter().map(|s| s.codes()).collect();
    assert!(distinct.len() > 1);
    for i in 0..batch.len() {
        let seq = EventSequence::new(batch.unpadded(i).to_vec());
        assert!(seq.len() >= 2);
        assert!(seq.events.iter().all(|e| (e.0 as usize) < 413));
        decode(&seq, &cfg.quantization, true).unwrap();
    }
}

#[test]
fn batches_are_deterministic_per_seed() {
    let clips = vec![clip(30.0, 1), clip(20.0, 2)];
    let cfg = small_config();
    let a = make_batch(&clips, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = make_batch(&clips, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let c = make_batch(&clips, &cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn empty_corpus_is_rejected() {
    let cfg = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(make_batch(&[], &cfg, &mut rng), Err(TrainError::EmptyManifest)));
    let p = Parameters::zeros(small_model());
    assert!(matches!(evaluate(&p, &[], &cfg), Err(TrainError::EmptyManifest)));
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let clips = vec![clip(10.0, 3)];
    let cfg = TrainingConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    let mut session = TrainSession::new(small_model(), cfg).unwrap();
    let before = session.params.clone();
    let stats = session.step(&clips).unwrap();
    assert!(stats.mean_loss > 0.0);
    assert_eq!(session.params, before);
}

#[test]
fn batch_gradient_matches_double_precision_backward() {
    let clips = vec![clip(6.0, 4)];
    let cfg = TrainingConfig {
        batch_size: 1,
        ..small_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = ModelConfig::new(2, 4, 413);
    let params: Parameters<f32> = Parameters::init(model, &mut rng).unwrap();
    let batch = make_batch(&clips, &cfg, &mut rng).unwrap();
    let (loss, n, g32) = batch_gradient(&params, &batch).unwrap();
    let seq = batch.unpadded(0);
    assert_eq!(n, seq.len() - 1);
    let p64: Parameters<f64> = params.cast();
    let trace = p64.forward_sequence(seq).unwrap();
    assert!((loss - trace.mean_loss()).abs() < 1e-4);
    let mut g64 = p64.backward(&trace, seq).unwrap();
    g64.scale(1.0 / n as f64);
    let mut diff = g32.cast::<f64>();
    diff.add_scaled(&g64, -1.0);
    assert!(diff.l2_norm() / g64.l2_norm() < 1e-4);
}

#[test]
fn padding_does_not_change_loss_or_gradient() {
    let clips = vec![clip(8.0, 5)];
    let cfg = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params: Parameters<f32> = Parameters::init(small_model(), &mut rng).unwrap();
    let seq = sample_example(&clips, &cfg, &mut rng).unwrap();
    let plain = Batch {
        sequences: vec![seq.clone()],
        pad: cfg.pad_code(),
    };
    let mut padded_seq = seq.clone();
    padded_seq.events.extend([cfg.pad_code(); 17]);
    let padded = Batch {
        sequences: vec![padded_seq],
        pad: cfg.pad_code(),
    };
    let (l1, n1, g1) = batch_gradient(&params, &plain).unwrap();
    let (l2, n2, g2) = batch_gradient(&params, &padded).unwrap();
    assert_eq!((l1, n1), (l2, n2));
    assert_eq!(g1, g2);
}

#[test]
fn clipping_rescales_to_the_threshold() {
    let mut g: Parameters<f32> = Parameters::zeros(ModelConfig::new(1, 1, 2));
    g.b_out = vec![6.0, 8.0];
    let norm = clip_gradients(&mut g, 5.0);
    assert_eq!(norm, 10.0);
    assert_eq!(g.b_out, vec![3.0, 4.0]);
    let norm = clip_gradients(&mut g, 5.0);
    assert_eq!(norm, 5.0);
    assert_eq!(g.b_out, vec![3.0, 4.0]);
}

#[test]
fn update_applies_clipped_gradient() {
    let clips = vec![clip(8.0, 6)];
    let cfg = TrainingConfig {
        grad_clip_norm: 1e-3,
        learning_rate: 0.5,
        ..small_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params: Parameters<f32> = Parameters::init(small_model(), &mut rng).unwrap();
    let batch = make_batch(&clips, &cfg, &mut rng).unwrap();
    let (_, _, mut g) = batch_gradient(&params, &batch).unwrap();
    let raw = g.l2_norm();
    assert!(raw > cfg.grad_clip_norm);
    g.scale((cfg.grad_clip_norm / raw) as f32);
    let mut expected = params.clone();
    expected.add_scaled(&g, -(cfg.learning_rate as f32));
    let mut updated = params.clone();
    let stats = train_step(&mut updated, &batch, &cfg, 0).unwrap();
    assert!(stats.clipped);
    assert_eq!(stats.grad_norm, raw);
    assert_eq!(updated, expected);
    let mut moved = updated.clone();
    moved.add_scaled(&params, -1.0);
    let step_norm = moved.l2_norm();
    assert!((step_norm - cfg.learning_rate * cfg.grad_clip_norm).abs() < 1e-6);
}

#[test]
fn non_finite_parameters_abort_the_step() {
    let clips = vec![clip(8.0, 7)];
    let cfg = small_config();
    let mut session = TrainSession::new(small_model(), cfg).unwrap();
    session.params.b_out[0] = f32::NAN;
    assert!(matches!(session.step(&clips), Err(TrainError::NonFiniteLoss { step: 0, .. })));
}

#[test]
fn overflowing_update_is_reported() {
    let clips = vec![clip(8.0, 7)];
    let cfg = TrainingConfig {
        learning_rate: 1e300,
        ..small_config()
    };
    let mut session = TrainSession::new(small_model(), cfg).unwrap();
    assert!(matches!(session.step(&clips), Err(TrainError::NonFiniteLoss { step: 0, .. })));
}

#[test]
fn untrained_heldout_loss_is_near_uniform() {
    let clips: Vec<Clip> = (0..4).map(|s| clip(30.0, 10 + s)).collect();
    let cfg = TrainingConfig::default();
    let session = TrainSession::new(ModelConfig::new(2, 64, 413), cfg).unwrap();
    let before = session.params.clone();
    let a = session.evaluate(&clips).unwrap();
    let b = session.evaluate(&clips).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(session.params, before);
    assert!((a - 413f64.ln()).abs() < 0.5, "{a}");
}

#[test]
fn training_reduces_loss_on_a_repeated_clip() {
    let clips = vec![clip(4.0, 8)];
    let cfg = TrainingConfig {
        batch_size: 1,
        learning_rate: 1.0,
        augmentation: AugmentationPolicy::new(AugmentationMode::None),
        segment_len_s: 4.0,
        ..small_config()
    };
    let mut session = TrainSession::new(ModelConfig::new(1, 32, 413), cfg).unwrap();
    let start = session.evaluate(&clips).unwrap();
    for _ in 0..30 {
        session.step(&clips).unwrap();
    }
    let end = session.evaluate(&clips).unwrap();
    assert!(end < start - 1.0, "{start} -> {end}");
}

#[test]
fn sessions_are_reproducible_and_resumable() {
    let clips = vec![clip(20.0, 9), clip(12.0, 10)];
    let cfg = small_config();
    let mut a = TrainSession::new(small_model(), cfg).unwrap();
    let mut b = TrainSession::new(small_model(), cfg).unwrap();
    for _ in 0..3 {
        let sa = a.step(&clips).unwrap();
        let sb = b.step(&clips).unwrap();
        assert_eq!(sa.mean_loss.to_bits(), sb.mean_loss.to_bits());
    }
    assert_eq!(a, b);

    let bytes = a.checkpoint().to_bytes();
    let mut resumed = TrainSession::from_checkpoint(Checkpoint::from_bytes(&bytes).unwrap());
    assert_eq!(resumed, a);
    for _ in 0..3 {
        let sa = a.step(&clips).unwrap();
        let sr = resumed.step(&clips).unwrap();
        assert_eq!(sa.mean_loss.to_bits(), sr.mean_loss.to_bits());
    }
    assert_eq!(a.params, resumed.params);
    assert_eq!(a.step, 6);
}

#[test]
fn vocabulary_mismatch_rejected() {
    let cfg = TrainingConfig {
        quantization: QuantizationConfig::without_velocity(),
        ..small_config()
    };
    assert!(TrainSession::new(small_model(), cfg).is_err());
    let nv = TrainSession::new(ModelConfig::new(1, 4, 381), cfg).unwrap();
    assert_eq!(nv.config.pad_code(), EventIndex(381));
}

mod checkpoints {
    use super::*;

    fn sample_checkpoint() -> Checkpoint {
        let mut s = TrainSession::new(ModelConfig::new(2, 5, 413), small_config()).unwrap();
        s.step(&[clip(10.0, 11)]).unwrap();
        s.checkpoint()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ckpt = sample_checkpoint();
        save_checkpoint(&ckpt, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, ckpt);
        save_checkpoint(&loaded, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        assert!(!dir.path().join("model.ckpt.tmp").exists());
        assert_eq!(&first[..4], b"PRNN");
    }

    #[test]
    fn flipped_body_byte_is_detected() {
        let bytes = sample_checkpoint().to_bytes();
        for pos in [9, 40, bytes.len() / 2, bytes.len() - 5] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(
                matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::CorruptChecksum)),
                "byte {pos}"
            );
        }
    }

    #[test]
    fn other_major_version_and_bad_magic_rejected() {
        let mut bytes = sample_checkpoint().to_bytes();
        bytes[4..8].copy_from_slice(&3u32.to_le_bytes()); // major 0, minor 3
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CheckpointError::VersionMismatch { found_major: 0, found_minor: 3, expected_major: 1 })
        ));
        assert!(matches!(Checkpoint::from_bytes(b"MThd\0\0\0\x06"), Err(CheckpointError::BadMagic)));
        assert!(matches!(Checkpoint::from_bytes(b""), Err(CheckpointError::BadMagic)));
        assert!(matches!(
            load_checkpoint(Path::new("/nonexistent/x.ckpt")),
            Err(CheckpointError::Io { .. })
        ));
    }

    use std::path::Path;
}
