use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::training::TrainingError;

/// AdamW settings and the learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerHyper {
    pub lr_peak: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Linear warmup length; `None` means 10% of `total_steps`.
    pub warmup_steps: Option<usize>,
    pub total_steps: usize,
    /// Hold bias and layer-norm tensors fixed instead of only exempting
    /// them from weight decay.
    pub freeze_no_decay: bool,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        Self {
            lr_peak: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            warmup_steps: None,
            total_steps: 1000,
            freeze_no_decay: false,
        }
    }
}

impl OptimizerHyper {
    pub fn warmup(&self) -> usize {
        self.warmup_steps.unwrap_or(self.total_steps / 10)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::InvalidHyper(m));
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad(format!("betas must lie in (0, 1): {} {}", self.beta1, self.beta2));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad(format!("eps must be positive: {}", self.eps));
        }
        if !(self.lr_peak >= 0.0 && self.weight_decay >= 0.0) {
            return bad("lr_peak and weight_decay must be non-negative".into());
        }
        if self.warmup() > self.total_steps {
            return bad(format!("warmup {} exceeds total steps {}", self.warmup(), self.total_steps));
        }
        Ok(())
    }
}

/// Linear warmup from 0 to `lr_peak`, then linear decay to 0 at `total_steps`.
pub fn lr_at(step: usize, hyper: &OptimizerHyper) -> Result<f64, TrainingError> {
    let (warmup, total) = (hyper.warmup(), hyper.total_steps);
    if step > total {
        return Err(TrainingError::StepOutOfRange { step, total });
    }
    Ok(if step < warmup {
        hyper.lr_peak * step as f64 / warmup as f64
    } else if total == warmup {
        hyper.lr_peak
    } else {
        hyper.lr_peak * (total - step) as f64 / (total - warmup) as f64
    })
}

/// Tensors that skip weight decay: biases and layer-norm parameters.
pub fn is_no_decay(name: &str) -> bool {
    name.ends_with(".bias") || name.contains("norm")
}

/// Indices of decayed and non-decayed tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamPartition {
    pub decay: Vec<usize>,
    pub no_decay: Vec<usize>,
}

impl ParamPartition {
    /// Per-tensor flag, true for the no-decay group.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.decay.len() + self.no_decay.len()];
        for &i in &self.no_decay {
            m[i] = true;
        }
        m
    }
}

pub fn partition_params<S: AsRef<str>>(names: &[S]) -> Result<ParamPartition, TrainingError> {
    let mut part = ParamPartition {
        decay: Vec::new(),
        no_decay: Vec::new(),
    };
    for (i, n) in names.iter().enumerate() {
        let n = n.as_ref();
        if n.is_empty() {
            return Err(TrainingError::UnnamedTensor(i));
        }
        if is_no_decay(n) {
            part.no_decay.push(i);
        } else {
            part.decay.push(i);
        }
    }
    Ok(part)
}

/// First and second moments per tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> OptState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay:
/// `θ ← θ − lr·m̂/(√v̂ + eps) − lr·wd·θ`, where `wd` is zero for tensors
/// flagged in `no_decay`. With `freeze_no_decay` those tensors are not
/// touched at all.
pub fn adamw_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut OptState<T>,
    hyper: &OptimizerHyper,
    lr: f64,
    no_decay: &[bool],
) -> Result<(), TrainingError> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || no_decay.len() != n {
        return Err(TrainingError::Shape(format!(
            "{n} params, {} grads, {} moments, {} flags",
            grads.len(),
            state.m.len(),
            no_decay.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].shape() != p.shape() {
            return Err(TrainingError::Shape(format!("tensor {i}: {:?} vs {:?}", p.shape(), g.shape())));
        }
        if !g.is_finite() {
            return Err(TrainingError::NonFiniteGradient(i));
        }
    }
    if lr.is_nan() || lr < 0.0 {
        return Err(TrainingError::InvalidHyper(format!("learning rate {lr}")));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1 = T::lit(1.0 - b1.powi(t));
    let bc2 = T::lit(1.0 - b2.powi(t));
    let (b1, b2) = (T::lit(b1), T::lit(b2));
    let (one, eps, lr_t) = (T::one(), T::lit(hyper.eps), T::lit(lr));
    for i in 0..n {
        if no_decay[i] && hyper.freeze_no_decay {
            continue;
        }
        let decay = if no_decay[i] { T::zero() } else { T::lit(lr * hyper.weight_decay) };
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (((w, &g), m), v) in params[i].data_mut().iter_mut().zip(grads[i].data()).zip(m).zip(v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w = *w - lr_t * m_hat / (v_hat.sqrt() + eps) - decay * *w;
        }
    }
    Ok(())
}
