use crate::{Error, Result};

/// Adam moment decay rates and denominator offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// First/second moment accumulators for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

/// One parameter tensor, its gradient, and the step multiplier of its group.
pub struct ParamSlot<'a> {
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
    pub multiplier: f64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Bias-corrected Adam update of every slot. A slot's step is scaled by its
/// multiplier, which is how the logits get their own effective learning
/// rate. Nothing is modified when any gradient is non-finite.
pub fn adam_step(
    state: &mut AdamState,
    slots: &mut [ParamSlot<'_>],
    lr: f64,
    hp: &AdamHyper,
) -> Result<()> {
    if slots.len() != state.first.len() {
        return Err(Error::Invariant(format!(
            "optimizer tracks {} tensors, got {}",
            state.first.len(),
            slots.len()
        )));
    }
    for (i, slot) in slots.iter().enumerate() {
        if slot.values.len() != state.first[i].len() || slot.grads.len() != slot.values.len() {
            return Err(Error::Invariant(format!("tensor {i} changed shape")));
        }
        if slot.grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("gradient of tensor {i}"),
                iteration: state.step as usize + 1,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (i, slot) in slots.iter_mut().enumerate() {
        let rate = lr * slot.multiplier;
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for (((p, &g), mi), vi) in slot
            .values
            .iter_mut()
            .zip(slot.grads)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = hp.beta1 * *mi + (1.0 - hp.beta1) * g;
            *vi = hp.beta2 * *vi + (1.0 - hp.beta2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *p -= rate * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
    Ok(())
}
