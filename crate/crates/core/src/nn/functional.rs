//! Vector forms of the primitives, for inference paths and direct checks.

use crate::nn::kernels;
use crate::nn::NnError;
use crate::scalar::Scalar;

pub fn softmax<T: Scalar>(v: &[T]) -> Result<Vec<T>, NnError> {
    if v.is_empty() {
        return Err(NnError::Empty);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(NnError::NonFinite("softmax input".into()));
    }
    let mut out = v.to_vec();
    kernels::softmax_in_place(&mut out);
    Ok(out)
}

pub fn log_softmax<T: Scalar>(v: &[T]) -> Result<Vec<T>, NnError> {
    if v.is_empty() {
        return Err(NnError::Empty);
    }
    let lse = kernels::log_sum_exp(v);
    Ok(v.iter().map(|&x| x - lse).collect())
}

/// `(v − mean) / sqrt(var + eps) · gain + bias` with population variance.
pub fn layer_norm<T: Scalar>(v: &[T], gain: &[T], bias: &[T], eps: T) -> Result<Vec<T>, NnError> {
    if v.is_empty() {
        return Err(NnError::Empty);
    }
    if gain.len() != v.len() || bias.len() != v.len() {
        return Err(NnError::Shape(format!(
            "layer_norm lengths: input {}, gain {}, bias {}",
            v.len(),
            gain.len(),
            bias.len()
        )));
    }
    let mut out = v.to_vec();
    kernels::standardize(&mut out, eps);
    for ((y, &g), &b) in out.iter_mut().zip(gain).zip(bias) {
        *y = *y * g + b;
    }
    Ok(out)
}

/// `−log softmax(logits)[label]` in log-sum-exp form.
pub fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<T, NnError> {
    if logits.is_empty() {
        return Err(NnError::Empty);
    }
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let loss = kernels::log_sum_exp(logits) - logits[label];
    // Rounding can leave a saturated loss a hair below zero.
    Ok(loss.max(T::zero()))
}
