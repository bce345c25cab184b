use super::params::ParamStore;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Adam moments and hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero moments shaped like `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t, _)| Tensor::zeros(t.shape())).collect();
        Self { first_moment: zeros.clone(), second_moment: zeros, step_count: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update of every trainable parameter.
///
/// Frozen parameters are left untouched and their moments stay at zero.
pub fn adam_step(params: &mut ParamStore, grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be non-negative, got {lr}")));
    }
    if grads.len() != params.len() || state.first_moment.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.first_moment.len()),
        ));
    }
    for (i, g) in grads.iter().enumerate() {
        if g.shape() != params.tensor(i).shape() || state.first_moment[i].shape() != g.shape() {
            return Err(Error::shape("adam_step", format!("parameter `{}`", params.name(i))));
        }
        if g.data().iter().any(|v| v.is_nan()) {
            return Err(Error::NanGradient(params.name(i).to_string()));
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, g) in grads.iter().enumerate() {
        if !params.is_trainable(i) {
            continue;
        }
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        let w = params.tensor_mut(i).data_mut();
        for k in 0..w.len() {
            let gk = g.data()[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let mhat = m[k] / c1;
            let vhat = v[k] / c2;
            w[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
