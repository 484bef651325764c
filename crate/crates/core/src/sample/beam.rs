use super::{argmax, draw_index, prime, tempered_log_probs, SampleError, SamplerConfig, SequenceModel};
use crate::lstm::log_softmax;
use crate::vocab::{EventIndex, EventSequence, QuantizationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Beam<St> {
    events: Vec<EventIndex>,
    shift: u64,
    /// Model log-probability of the generated events (temperature 1).
    log_prob: f64,
    state: St,
    logits: Vec<f64>,
}

/// Result of a beam search with the scores needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutcome {
    pub sequence: EventSequence,
    pub log_prob: f64,
    /// Scores of every finished sequence, in completion order.
    pub completed_log_probs: Vec<f64>,
    /// Scores of the candidates discarded in the last expansion round.
    pub last_pruned_log_probs: Vec<f64>,
}

pub fn stochastic_beam_search<M: SequenceModel>(
    model: &M,
    scfg: &SamplerConfig,
    quant: &QuantizationConfig,
) -> Result<EventSequence, SampleError> {
    Ok(stochastic_beam_search_detailed(model, scfg, quant)?.sequence)
}

/// Beam search whose expansions are sampled.
///
/// Every live beam proposes `branch_factor` continuations, drawn from the
/// tempered distribution (or its top tokens when greedy). Duplicate
/// proposals from the same beam collapse. The `beam_width` best candidates
/// by model log-probability survive; those that meet the stop rule are
/// set aside as finished. The best finished sequence is returned.
pub fn stochastic_beam_search_detailed<M: SequenceModel>(
    model: &M,
    scfg: &SamplerConfig,
    quant: &QuantizationConfig,
) -> Result<BeamOutcome, SampleError> {
    scfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scfg.seed);
    let primer = scfg.primer_or_default(quant);
    let shift = primer.iter().map(|&e| quant.shift_steps(e)).sum();
    let (state, logits) = prime(model, &primer)?;
    let root = Beam {
        events: primer,
        shift,
        log_prob: 0.0,
        state,
        logits,
    };
    let mut finished: Vec<(Vec<EventIndex>, u64, f64)> = Vec::new();
    let mut last_pruned = Vec::new();
    let mut live = Vec::new();
    if scfg.is_done(quant, root.events.len(), root.shift) {
        finished.push((root.events, root.shift, 0.0));
    } else {
        live.push(root);
    }

    while !live.is_empty() {
        // (score, parent, token)
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, beam) in live.iter().enumerate() {
            let model_lp = log_softmax(&beam.logits);
            let mut picks: Vec<usize> = Vec::with_capacity(scfg.branch_factor);
            if scfg.greedy {
                let mut order: Vec<usize> = (0..model_lp.len()).collect();
                order.sort_by(|&a, &b| model_lp[b].total_cmp(&model_lp[a]).then(a.cmp(&b)));
                picks.extend(order.into_iter().take(scfg.branch_factor));
            } else {
                let tempered = tempered_log_probs(&beam.logits, scfg.temperature);
                for _ in 0..scfg.branch_factor {
                    let u: f64 = rng.random();
                    picks.push(draw_index(&tempered, u));
                }
            }
            let mut seen = Vec::with_capacity(picks.len());
            for tok in picks {
                if !seen.contains(&tok) {
                    seen.push(tok);
                    candidates.push((beam.log_prob + model_lp[tok], bi, tok));
                }
            }
        }
        // Stable: equal scores keep proposal order.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        last_pruned = candidates.iter().skip(scfg.beam_width).map(|c| c.0).collect();
        candidates.truncate(scfg.beam_width);

        let mut next = Vec::with_capacity(candidates.len());
        for (score, bi, tok) in candidates {
            let parent = &live[bi];
            let token = EventIndex(tok as u16);
            let mut events = parent.events.clone();
            events.push(token);
            let shift = parent.shift + quant.shift_steps(token);
            if scfg.is_done(quant, events.len(), shift) {
                finished.push((events, shift, score));
                continue;
            }
            let mut state = parent.state.clone();
            let logits = model.advance(&mut state, token)?;
            next.push(Beam {
                events,
                shift,
                log_prob: score,
                state,
                logits,
            });
        }
        live = next;
    }

    let best = argmax(&finished.iter().map(|f| f.2).collect::<Vec<_>>());
    let completed_log_probs = finished.iter().map(|f| f.2).collect();
    let (events, shift, log_prob) = finished.swap_remove(best);
    let mut sequence = EventSequence::new(events);
    sequence.meta.duration_s = quant.step_to_seconds(shift);
    Ok(BeamOutcome {
        sequence,
        log_prob,
        completed_log_probs,
        last_pruned_log_probs: last_pruned,
    })
}
