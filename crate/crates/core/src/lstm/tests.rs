#![allow(clippy::needless_range_loop)]

use super::gradcheck::{check_gradients, Stencil, RELATIVE_ERROR_FLOOR};
use super::*;
use crate::vocab::EventIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn codes(v: &[u16]) -> Vec<EventIndex> {
    v.iter().map(|&c| EventIndex(c)).collect()
}

fn random_codes(rng: &mut ChaCha8Rng, len: usize, vocab: u16) -> Vec<EventIndex> {
    (0..len).map(|_| EventIndex(rng.random_range(0..vocab))).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain nested-loop reference: returns logits for every step.
fn reference_logits(p: &Parameters<f64>, seq: &[EventIndex]) -> Vec<Vec<f64>> {
    let cfg = p.config;
    let h = cfg.cells_per_layer;
    let mut hs = vec![vec![0.0; h]; cfg.num_layers];
    let mut cs = vec![vec![0.0; h]; cfg.num_layers];
    let mut out = Vec::new();
    for x in seq {
        let mut input: Vec<f64> = (0..cfg.vocab_size)
            .map(|v| if v == x.0 as usize { 1.0 } else { 0.0 })
            .collect();
        for l in 0..cfg.num_layers {
            let lp = &p.layers[l];
            let n_in = input.len();
            let mut z = vec![0.0; 4 * h];
            for r in 0..4 * h {
                let mut s = lp.bias[r];
                for j in 0..n_in {
                    s += lp.w_input[r * n_in + j] * input[j];
                }
                for j in 0..h {
                    s += lp.w_recurrent[r * h + j] * hs[l][j];
                }
                z[r] = s;
            }
            for k in 0..h {
                let (i, f, g, o) = (sig(z[k]), sig(z[h + k]), z[2 * h + k].tanh(), sig(z[3 * h + k]));
                cs[l][k] = f * cs[l][k] + i * g;
                hs[l][k] = o * cs[l][k].tanh();
            }
            input = hs[l].clone();
        }
        let logits: Vec<f64> = (0..cfg.vocab_size)
            .map(|v| p.b_out[v] + (0..h).map(|j| p.w_out[v * h + j] * input[j]).sum::<f64>())
            .collect();
        out.push(logits);
    }
    out
}

#[test]
fn zero_network_logits_equal_output_bias() {
    let cfg = ModelConfig::new(2, 3, 5);
    let mut p: Parameters<f64> = Parameters::zeros(cfg);
    p.b_out = vec![0.5, -1.0, 2.0, 0.0, 3.25];
    let mut s = LayerState::zeros(&cfg);
    for x in [0u16, 4, 2] {
        let logits = p.forward_step(&mut s, EventIndex(x)).unwrap();
        assert_eq!(logits, p.b_out);
    }
    assert!(s.h.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn softmax_is_normalized_and_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let logits: Vec<f64> = (0..413).map(|_| rng.random_range(-30.0..30.0)).collect();
        let p = softmax(&logits);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
    }
    let extreme = [1e4, -1e4, 0.0, 1e4 - 1.0];
    let p = softmax(&extreme);
    assert!(p.iter().all(|x| x.is_finite()));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let lp = log_softmax(&extreme);
    assert!((lp[0] - -(1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
    assert!(lp[1].is_finite());
}

#[test]
fn two_cell_step_matches_hand_unrolled_gates() {
    let cfg = ModelConfig::new(1, 2, 3);
    let p: Parameters<f64> = Parameters::init(cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let l = &p.layers[0];
    // Rows: i0 i1 f0 f1 g0 g1 o0 o1; input columns 3, recurrent columns 2.
    let (mut h0, mut h1, mut c0, mut c1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut s = LayerState::zeros(&cfg);
    for x in [2usize, 0, 1, 1, 2] {
        let z = |r: usize| l.bias[r] + l.w_input[r * 3 + x] + l.w_recurrent[r * 2] * h0 + l.w_recurrent[r * 2 + 1] * h1;
        let (i0, i1) = (sig(z(0)), sig(z(1)));
        let (f0, f1) = (sig(z(2)), sig(z(3)));
        let (g0, g1) = (z(4).tanh(), z(5).tanh());
        let (o0, o1) = (sig(z(6)), sig(z(7)));
        c0 = f0 * c0 + i0 * g0;
        c1 = f1 * c1 + i1 * g1;
        h0 = o0 * c0.tanh();
        h1 = o1 * c1.tanh();
        let logits = p.forward_step(&mut s, EventIndex(x as u16)).unwrap();
        assert!((s.c[0][0] - c0).abs() < 1e-15 && (s.c[0][1] - c1).abs() < 1e-15);
        assert!((s.h[0][0] - h0).abs() < 1e-15 && (s.h[0][1] - h1).abs() < 1e-15);
        for v in 0..3 {
            let expected = p.b_out[v] + p.w_out[v * 2] * h0 + p.w_out[v * 2 + 1] * h1;
            assert!((logits[v] - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn sequence_matches_nested_loop_reference() {
    let cfg = ModelConfig::new(3, 11, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p: Parameters<f64> = Parameters::init(cfg, &mut rng).unwrap();
    let seq = random_codes(&mut rng, 25, 17);
    let reference = reference_logits(&p, &seq);
    let trace = p.forward_sequence(&seq).unwrap();
    assert_eq!(trace.num_predictions(), seq.len() - 1);
    for t in 0..seq.len() - 1 {
        let lp = log_softmax(&reference[t]);
        let expected = -lp[seq[t + 1].0 as usize];
        assert!((trace.losses[t] - expected).abs() < 1e-12, "step {t}");
        let probs = softmax(&reference[t]);
        for (a, b) in trace.probs(t).iter().zip(&probs) {
            assert!((a - b).abs() < 1e-14);
        }
    }
    let (nll, n) = p.sequence_nll(&seq).unwrap();
    assert_eq!(n, seq.len() - 1);
    assert!((nll - trace.total_loss()).abs() < 1e-10);
}

#[test]
fn single_pair_equals_step_plus_cross_entropy() {
    let cfg = ModelConfig::new(2, 6, 9);
    let p: Parameters<f64> = Parameters::init(cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let trace = p.forward_sequence(&codes(&[4, 7])).unwrap();
    let mut s = LayerState::zeros(&cfg);
    let logits = p.forward_step(&mut s, EventIndex(4)).unwrap();
    assert!((trace.losses[0] + log_softmax(&logits)[7]).abs() < 1e-14);
}

#[test]
fn uniform_logits_give_ln_vocab_loss() {
    let cfg = ModelConfig::new(2, 8, 413);
    let p: Parameters<f64> = Parameters::zeros(cfg);
    let trace = p.forward_sequence(&codes(&[0, 412, 256, 381, 5, 5])).unwrap();
    for l in &trace.losses {
        assert!((l - 413f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn losses_are_nonnegative_and_deterministic() {
    let cfg = ModelConfig::new(2, 16, 413);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p: Parameters<f32> = Parameters::init(cfg, &mut rng).unwrap();
    let seq = random_codes(&mut rng, 40, 413);
    let a = p.forward_sequence(&seq).unwrap();
    let b = p.forward_sequence(&seq).unwrap();
    assert!(a.losses.iter().all(|&l| l >= 0.0));
    let bits = |t: &ForwardTrace<f32>| t.losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn short_and_out_of_range_sequences_rejected() {
    let p: Parameters<f64> = Parameters::zeros(ModelConfig::new(1, 2, 4));
    assert_eq!(p.forward_sequence(&codes(&[1])).unwrap_err(), LstmError::SequenceTooShort(1));
    assert_eq!(p.forward_sequence(&[]).unwrap_err(), LstmError::SequenceTooShort(0));
    assert!(matches!(
        p.forward_sequence(&codes(&[1, 4])),
        Err(LstmError::CodeOutOfRange { code: 4, .. })
    ));
}

#[test]
fn divergent_weights_report_non_finite_activation() {
    let cfg = ModelConfig::new(1, 2, 3);
    let mut p: Parameters<f32> = Parameters::zeros(cfg);
    p.b_out[1] = f32::INFINITY;
    assert!(matches!(
        p.forward_sequence(&codes(&[0, 1, 2])),
        Err(LstmError::NonFiniteActivation { step: 0 })
    ));
}

fn gradcheck_setup(seed: u64) -> (Parameters<f64>, Parameters<f64>, Vec<EventIndex>) {
    let cfg = ModelConfig::new(2, 4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Parameters<f64> = Parameters::init(cfg, &mut rng).unwrap();
    // Larger weights than the init so every gate is exercised off-centre.
    p.scale(2.0);
    for b in &mut p.b_out {
        *b = rng.random_range(-0.5..0.5);
    }
    let seq = random_codes(&mut rng, 10, 6);
    let trace = p.forward_sequence(&seq).unwrap();
    let grads = p.backward(&trace, &seq).unwrap();
    assert_eq!(grads.tensors().len(), p.tensors().len());
    (p, grads, seq)
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..5 {
        let (p, g, seq) = gradcheck_setup(seed);
        let r = check_gradients(&p, &g, &seq, 1e-5, Stencil::Central, RELATIVE_ERROR_FLOOR).unwrap();
        assert_eq!(r.parameters_checked, p.config.parameter_count());
        assert!(r.max_relative_error < 1e-5, "seed {seed}: {r:?}");
    }
}

#[test]
fn small_gradients_match_fourth_order_differences() {
    // The higher-order stencil has far less truncation error, so entries far
    // below the relative-error floor are still checked tightly.
    for seed in 0..3 {
        let (p, g, seq) = gradcheck_setup(seed);
        let r = check_gradients(&p, &g, &seq, 3e-4, Stencil::FourthOrder, 1e-6).unwrap();
        assert!(r.max_absolute_error < 1e-10, "seed {seed}: {r:?}");
    }
}

#[test]
fn unused_input_columns_get_exactly_zero_gradient() {
    let cfg = ModelConfig::new(2, 4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p: Parameters<f64> = Parameters::init(cfg, &mut rng).unwrap();
    // Code 5 only appears as the final target, never as an input.
    let seq = codes(&[0, 1, 2, 1, 0, 5]);
    let g = p.backward(&p.forward_sequence(&seq).unwrap(), &seq).unwrap();
    for r in 0..16 {
        for unused in [3usize, 4, 5] {
            assert_eq!(g.layers[0].w_input[r * 6 + unused], 0.0);
        }
    }
    assert!(g.is_finite());
    assert!(g.layers[0].w_input[0] != 0.0);
}

#[test]
fn backward_rejects_mismatched_trace() {
    let cfg = ModelConfig::new(1, 3, 5);
    let p: Parameters<f64> = Parameters::init(cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let trace = p.forward_sequence(&codes(&[0, 1, 2])).unwrap();
    assert_eq!(p.backward(&trace, &codes(&[0, 1, 3])).unwrap_err(), LstmError::TraceMismatch);
    assert_eq!(p.backward(&trace, &codes(&[0, 1])).unwrap_err(), LstmError::TraceMismatch);
    let other: Parameters<f64> = Parameters::zeros(ModelConfig::new(1, 4, 5));
    assert_eq!(other.backward(&trace, &codes(&[0, 1, 2])).unwrap_err(), LstmError::TraceMismatch);
}

#[test]
fn f32_and_f64_paths_agree() {
    let cfg = ModelConfig::new(2, 32, 413);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p64: Parameters<f64> = Parameters::init(cfg, &mut rng).unwrap();
    let p32: Parameters<f32> = p64.cast();
    let seq = random_codes(&mut rng, 60, 413);
    let t64 = p64.forward_sequence(&seq).unwrap();
    let t32 = p32.forward_sequence(&seq).unwrap();
    assert!((t64.mean_loss() - t32.mean_loss()).abs() < 1e-4);
    let g64 = p64.backward(&t64, &seq).unwrap();
    let g32 = p32.backward(&t32, &seq).unwrap();
    let diff = {
        let mut d = g32.cast::<f64>();
        d.add_scaled(&g64, -1.0);
        d.l2_norm()
    };
    assert!(diff / g64.l2_norm() < 1e-4);
}
