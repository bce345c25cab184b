use super::params::ParamStore;
use super::tensor::Tensor;
use crate::{Error, Result};

/// Central-difference gradient `(f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h` for every
/// entry of every parameter (trainable or not).
pub fn finite_difference_grad<F>(mut f: F, params: &ParamStore, h: f64) -> Result<Vec<Tensor>>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Tensor::zeros(params.tensor(p).shape());
        for i in 0..g.len() {
            let orig = probe.tensor(p).data()[i];
            probe.tensor_mut(p).data_mut()[i] = orig + h;
            let fp = f(&probe)?;
            probe.tensor_mut(p).data_mut()[i] = orig - h;
            let fm = f(&probe)?;
            probe.tensor_mut(p).data_mut()[i] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFiniteProbe { param: params.name(p).to_string(), index: i });
            }
            g.data_mut()[i] = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Worst entrywise gap between analytic and numeric gradients, measured per
/// tensor relative to that tensor's largest numeric entry.
pub fn gradient_discrepancy(analytic: &[Tensor], numeric: &[Tensor]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::shape("gradient_discrepancy", format!("{} vs {} tensors", analytic.len(), numeric.len())));
    }
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        if a.shape() != n.shape() {
            return Err(Error::shape("gradient_discrepancy", format!("{:?} vs {:?}", a.shape(), n.shape())));
        }
        let scale = n.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = a.data().iter().zip(n.data()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst = worst.max(match (gap, scale) {
            (0.0, _) => 0.0,
            (_, 0.0) => f64::INFINITY,
            (g, s) => g / s,
        });
    }
    Ok(worst)
}
