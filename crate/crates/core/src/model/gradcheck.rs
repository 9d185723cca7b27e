use crate::tensor::ops::Mode;
use crate::tensor::Tape;

use super::{ModelError, ModelInput, Rsmlp};

/// One pooled training batch with its cell targets.
#[derive(Debug, Clone)]
pub struct LossBatch {
    pub inputs: Vec<ModelInput<f64>>,
    pub labels: Vec<usize>,
    pub mask: Vec<bool>,
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Train-mode weighted cross-entropy of `batch`.
pub fn batch_loss(
    model: &Rsmlp<f64>,
    batch: &LossBatch,
    tape: &mut Tape<f64>,
) -> Result<crate::tensor::Var, ModelError> {
    let refs: Vec<&ModelInput<f64>> = batch.inputs.iter().collect();
    let out = model.forward_batch(tape, &refs, Mode::Train)?;
    Ok(tape.weighted_cross_entropy(out.logits, &batch.labels, &batch.weights, &batch.mask)?)
}

/// Compares backpropagated gradients of every parameter entry against
/// central differences with step `h`.
pub fn gradient_check(
    model: &mut Rsmlp<f64>,
    batch: &LossBatch,
    h: f64,
) -> Result<GradCheck, ModelError> {
    model.params_mut().zero_grad();
    let mut tape = Tape::new();
    let loss = batch_loss(model, batch, &mut tape)?;
    tape.backward(loss, model.params_mut())?;

    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    for id in ids {
        for k in 0..model.params().value(id).len() {
            let orig = model.params().value(id).data()[k];
            let mut eval = |v: f64| -> Result<f64, ModelError> {
                model.params_mut().get_mut(id).value.data_mut()[k] = v;
                let mut t = Tape::new();
                let l = batch_loss(model, batch, &mut t)?;
                Ok(t.value(l).item())
            };
            let numeric = (eval(orig + h)? - eval(orig - h)?) / (2.0 * h);
            model.params_mut().get_mut(id).value.data_mut()[k] = orig;
            let analytic = model.params().grad(id).data()[k];
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.checked += 1;
        }
    }
    model.params_mut().zero_grad();
    Ok(report)
}
