//! Finite-difference gradient checking.

use super::{LstmError, Parameters};
use crate::vocab::EventIndex;

/// Denominators of the relative error are floored here; below it the
/// comparison is effectively absolute (`abs_err / floor`).
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(L(p+ε) − L(p−ε)) / 2ε`
    Central,
    /// Fourth-order: `(−L(p+2ε) + 8L(p+ε) − 8L(p−ε) + L(p−2ε)) / 12ε`
    FourthOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub parameters_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against finite differences of the summed sequence
/// loss, perturbing every parameter in turn.
pub fn check_gradients(
    params: &Parameters<f64>,
    analytic: &Parameters<f64>,
    codes: &[EventIndex],
    eps: f64,
    stencil: Stencil,
    floor: f64,
) -> Result<GradCheckReport, LstmError> {
    let loss_at = |ti: usize, j: usize, delta: f64| -> Result<f64, LstmError> {
        let mut q = params.clone();
        q.tensors_mut()[ti][j] += delta;
        Ok(q.forward_sequence(codes)?.total_loss())
    };
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        parameters_checked: 0,
    };
    let grads = analytic.tensors();
    for (ti, g) in grads.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let numeric = match stencil {
                Stencil::Central => (loss_at(ti, j, eps)? - loss_at(ti, j, -eps)?) / (2.0 * eps),
                Stencil::FourthOrder => {
                    (-loss_at(ti, j, 2.0 * eps)? + 8.0 * loss_at(ti, j, eps)?
                        - 8.0 * loss_at(ti, j, -eps)?
                        + loss_at(ti, j, -2.0 * eps)?)
                        / (12.0 * eps)
                }
            };
            report.max_relative_error = report.max_relative_error.max(relative_error(a, numeric, floor));
            report.max_absolute_error = report.max_absolute_error.max((a - numeric).abs());
            report.parameters_checked += 1;
        }
    }
    Ok(report)
}
