use super::kernels::{dot, matvec_add};
use super::{sigmoid, LayerParams, LayerState, LstmError, ModelConfig, Parameters, Scalar};
use crate::vocab::EventIndex;

/// Numerically stable log-softmax.
pub fn log_softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&l| l - lse).collect()
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&l| (l - lse).exp()).collect()
}

pub(crate) fn log_sum_exp<S: Scalar>(logits: &[S]) -> S {
    let m = logits
        .iter()
        .copied()
        .fold(logits[0], |a, b| if b > a { b } else { a });
    let mut sum = S::ZERO;
    for &l in logits {
        sum += (l - m).exp();
    }
    m + sum.ln()
}

/// Activations of one layer at one step.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerTrace<S> {
    /// Activated gates, `4H`, in order i, f, g, o.
    pub gates: Vec<S>,
    pub c: Vec<S>,
    pub tanh_c: Vec<S>,
    pub h: Vec<S>,
}

impl<S: Scalar> LayerTrace<S> {
    fn zeros(h: usize) -> Self {
        Self {
            gates: vec![S::ZERO; 4 * h],
            c: vec![S::ZERO; h],
            tanh_c: vec![S::ZERO; h],
            h: vec![S::ZERO; h],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StepTrace<S> {
    pub layers: Vec<LayerTrace<S>>,
    /// Output distribution (softmax of the logits).
    pub probs: Vec<S>,
}

impl<S: Scalar> StepTrace<S> {
    fn zeros(config: &ModelConfig) -> Self {
        Self {
            layers: (0..config.num_layers)
                .map(|_| LayerTrace::zeros(config.cells_per_layer))
                .collect(),
            probs: vec![S::ZERO; config.vocab_size],
        }
    }
}

/// Everything the backward pass needs from a teacher-forced forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<S> {
    pub(crate) config: ModelConfig,
    pub(crate) codes: Vec<u16>,
    pub(crate) steps: Vec<StepTrace<S>>,
    /// Per-step negative log-likelihood of the next code, in nats.
    pub losses: Vec<S>,
}

impl<S: Scalar> ForwardTrace<S> {
    /// Mean per-step loss in nats.
    pub fn mean_loss(&self) -> f64 {
        self.total_loss() / self.losses.len() as f64
    }

    pub fn total_loss(&self) -> f64 {
        self.losses.iter().map(|l| l.to_f64()).sum()
    }

    pub fn num_predictions(&self) -> usize {
        self.losses.len()
    }

    /// Predicted next-code distribution after consuming code `t`.
    pub fn probs(&self, t: usize) -> &[S] {
        &self.steps[t].probs
    }
}

enum Input<'a, S> {
    OneHot(usize),
    Dense(&'a [S]),
}

fn layer_step<S: Scalar>(
    p: &LayerParams<S>,
    input: Input<'_, S>,
    h_prev: &[S],
    c_prev: &[S],
    out: &mut LayerTrace<S>,
) {
    let h = h_prev.len();
    let z = &mut out.gates;
    z.copy_from_slice(&p.bias);
    match input {
        Input::OneHot(x) => {
            let cols = p.w_input.len() / (4 * h);
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += p.w_input[r * cols + x];
            }
        }
        Input::Dense(x) => matvec_add(&p.w_input, x, z),
    }
    matvec_add(&p.w_recurrent, h_prev, z);
    for k in 0..h {
        let i = sigmoid(z[k]);
        let f = sigmoid(z[h + k]);
        let g = z[2 * h + k].tanh();
        let o = sigmoid(z[3 * h + k]);
        z[k] = i;
        z[h + k] = f;
        z[2 * h + k] = g;
        z[3 * h + k] = o;
        let c = f * c_prev[k] + i * g;
        let tc = c.tanh();
        out.c[k] = c;
        out.tanh_c[k] = tc;
        out.h[k] = o * tc;
    }
}

enum Prev<'a, S> {
    Zero,
    State(&'a LayerState<S>),
    Trace(&'a StepTrace<S>),
}

impl<S: Scalar> Prev<'_, S> {
    fn hc(&self, l: usize) -> Option<(&[S], &[S])> {
        match self {
            Prev::Zero => None,
            Prev::State(s) => Some((&s.h[l], &s.c[l])),
            Prev::Trace(t) => Some((&t.layers[l].h, &t.layers[l].c)),
        }
    }
}

impl<S: Scalar> Parameters<S> {
    fn check_code(&self, code: usize) -> Result<(), LstmError> {
        if code >= self.config.vocab_size {
            return Err(LstmError::CodeOutOfRange {
                code,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    fn check_codes(&self, codes: &[EventIndex]) -> Result<(), LstmError> {
        if codes.len() < 2 {
            return Err(LstmError::SequenceTooShort(codes.len()));
        }
        codes.iter().try_for_each(|c| self.check_code(c.0 as usize))
    }

    /// One step through every layer, writing activations and probabilities
    /// to `out`. Returns the log-sum-exp of the logits and, if a target is
    /// given, its negative log-probability.
    fn step_into(
        &self,
        prev: Prev<'_, S>,
        code: usize,
        target: Option<usize>,
        out: &mut StepTrace<S>,
        step: usize,
    ) -> Result<(S, S), LstmError> {
        let hdim = self.config.cells_per_layer;
        let zeros = vec![S::ZERO; hdim];
        for l in 0..self.config.num_layers {
            let (h_prev, c_prev) = prev.hc(l).unwrap_or((&zeros, &zeros));
            let (below, rest) = out.layers.split_at_mut(l);
            let input = if l == 0 {
                Input::OneHot(code)
            } else {
                Input::Dense(&below[l - 1].h[..])
            };
            layer_step(&self.layers[l], input, h_prev, c_prev, &mut rest[0]);
        }
        let top = &out.layers[self.config.num_layers - 1].h;
        let logits = &mut out.probs;
        for (v, row) in self.w_out.chunks_exact(hdim).enumerate() {
            logits[v] = self.b_out[v] + dot(row, top);
        }
        let lse = log_sum_exp(logits);
        if !lse.is_finite() {
            return Err(LstmError::NonFiniteActivation { step });
        }
        let loss = target.map_or(S::ZERO, |t| lse - logits[t]);
        for p in logits.iter_mut() {
            *p = (*p - lse).exp();
        }
        Ok((lse, loss))
    }

    /// Feeds one code, updating `state` in place, and returns the logits for
    /// the next code.
    pub fn forward_step(&self, state: &mut LayerState<S>, code: EventIndex) -> Result<Vec<S>, LstmError> {
        let code = code.0 as usize;
        self.check_code(code)?;
        let mut out = StepTrace::zeros(&self.config);
        let mut logits = vec![S::ZERO; self.config.vocab_size];
        self.step_into(Prev::State(state), code, None, &mut out, 0)?;
        // Recompute the raw logits; probabilities lose precision in the tails.
        let top = &out.layers[self.config.num_layers - 1].h;
        for (v, row) in self.w_out.chunks_exact(self.config.cells_per_layer).enumerate() {
            logits[v] = self.b_out[v] + dot(row, top);
        }
        for (l, layer) in out.layers.into_iter().enumerate() {
            state.h[l] = layer.h;
            state.c[l] = layer.c;
        }
        Ok(logits)
    }

    /// Teacher-forced pass over a code sequence from a zero state: predicts
    /// code `t + 1` from codes `0..=t` for every `t`.
    pub fn forward_sequence(&self, codes: &[EventIndex]) -> Result<ForwardTrace<S>, LstmError> {
        self.check_codes(codes)?;
        let n = codes.len() - 1;
        let mut steps: Vec<StepTrace<S>> = Vec::with_capacity(n);
        let mut losses = Vec::with_capacity(n);
        for t in 0..n {
            let mut out = StepTrace::zeros(&self.config);
            let prev = steps.last().map_or(Prev::Zero, Prev::Trace);
            let target = Some(codes[t + 1].0 as usize);
            let (_, loss) = self.step_into(prev, codes[t].0 as usize, target, &mut out, t)?;
            losses.push(loss);
            steps.push(out);
        }
        Ok(ForwardTrace {
            config: self.config,
            codes: codes.iter().map(|c| c.0).collect(),
            steps,
            losses,
        })
    }

    /// Summed next-code negative log-likelihood (nats) and the number of
    /// predictions, without keeping a trace.
    pub fn sequence_nll(&self, codes: &[EventIndex]) -> Result<(f64, usize), LstmError> {
        self.check_codes(codes)?;
        let mut a = StepTrace::zeros(&self.config);
        let mut b = StepTrace::zeros(&self.config);
        let mut total = 0.0;
        for t in 0..codes.len() - 1 {
            let prev = if t == 0 { Prev::Zero } else { Prev::Trace(&a) };
            let target = Some(codes[t + 1].0 as usize);
            let (_, loss) = self.step_into(prev, codes[t].0 as usize, target, &mut b, t)?;
            total += loss.to_f64();
            std::mem::swap(&mut a, &mut b);
        }
        Ok((total, codes.len() - 1))
    }
}
