use super::forward::ForwardTrace;
use super::kernels::{axpy, matvec_t_add, outer_add};
use super::{Gradients, LstmError, Parameters, Scalar};
use crate::vocab::EventIndex;

impl<S: Scalar> Parameters<S> {
    /// Exact gradient of the summed per-step loss of `trace` by
    /// backpropagation through the whole sequence.
    pub fn backward(&self, trace: &ForwardTrace<S>, codes: &[EventIndex]) -> Result<Gradients<S>, LstmError> {
        let mut grads = Parameters::zeros(self.config);
        self.backward_into(trace, codes, S::ONE, &mut grads)?;
        Ok(grads)
    }

    /// Adds `scale` times the gradient of the summed per-step loss of
    /// `trace` to `grads`.
    pub fn backward_into(
        &self,
        trace: &ForwardTrace<S>,
        codes: &[EventIndex],
        scale: S,
        grads: &mut Gradients<S>,
    ) -> Result<(), LstmError> {
        if trace.config != self.config
            || grads.config != self.config
            || trace.codes.len() != codes.len()
            || trace.codes.iter().zip(codes).any(|(a, b)| *a != b.0)
        {
            return Err(LstmError::TraceMismatch);
        }
        let cfg = self.config;
        let h = cfg.cells_per_layer;
        let nl = cfg.num_layers;
        let vocab = cfg.vocab_size;

        // Gradients flowing into step t from step t + 1.
        let mut dh_next = vec![vec![S::ZERO; h]; nl];
        let mut dc_next = vec![vec![S::ZERO; h]; nl];
        let mut dlogits = vec![S::ZERO; vocab];
        let mut dh = vec![S::ZERO; h];
        let mut dh_below = vec![S::ZERO; h];
        let mut dz = vec![S::ZERO; 4 * h];

        for t in (0..trace.steps.len()).rev() {
            let step = &trace.steps[t];
            let target = codes[t + 1].0 as usize;
            for (d, &p) in dlogits.iter_mut().zip(&step.probs) {
                *d = p * scale;
            }
            dlogits[target] -= scale;

            let top_h = &step.layers[nl - 1].h;
            outer_add(&dlogits, top_h, &mut grads.w_out);
            axpy(S::ONE, &dlogits, &mut grads.b_out);
            dh.copy_from_slice(&dh_next[nl - 1]);
            matvec_t_add(&self.w_out, &dlogits, &mut dh);

            for l in (0..nl).rev() {
                let lt = &step.layers[l];
                let prev = if t > 0 { Some(&trace.steps[t - 1].layers[l]) } else { None };
                let (gi, rest) = lt.gates.split_at(h);
                let (gf, rest) = rest.split_at(h);
                let (gg, go) = rest.split_at(h);
                {
                    let (dzi, rest) = dz.split_at_mut(h);
                    let (dzf, rest) = rest.split_at_mut(h);
                    let (dzg, dzo) = rest.split_at_mut(h);
                    let dcn = &mut dc_next[l];
                    for k in 0..h {
                        let tc = lt.tanh_c[k];
                        let dc = dh[k] * go[k] * (S::ONE - tc * tc) + dcn[k];
                        let c_prev = prev.map_or(S::ZERO, |p| p.c[k]);
                        dzo[k] = dh[k] * tc * go[k] * (S::ONE - go[k]);
                        dzi[k] = dc * gg[k] * gi[k] * (S::ONE - gi[k]);
                        dzg[k] = dc * gi[k] * (S::ONE - gg[k] * gg[k]);
                        dzf[k] = dc * c_prev * gf[k] * (S::ONE - gf[k]);
                        dcn[k] = dc * gf[k];
                    }
                }
                let lp = &self.layers[l];
                let lg = &mut grads.layers[l];
                axpy(S::ONE, &dz, &mut lg.bias);
                if let Some(p) = prev {
                    outer_add(&dz, &p.h, &mut lg.w_recurrent);
                }
                let dhn = &mut dh_next[l];
                dhn.fill(S::ZERO);
                matvec_t_add(&lp.w_recurrent, &dz, dhn);
                if l == 0 {
                    let x = codes[t].0 as usize;
                    for (r, &d) in dz.iter().enumerate() {
                        lg.w_input[r * vocab + x] += d;
                    }
                } else {
                    outer_add(&dz, &step.layers[l - 1].h, &mut lg.w_input);
                    dh_below.fill(S::ZERO);
                    matvec_t_add(&lp.w_input, &dz, &mut dh_below);
                    for k in 0..h {
                        dh[k] = dh_below[k] + dh_next[l - 1][k];
                    }
                }
            }
        }
        Ok(())
    }
}
