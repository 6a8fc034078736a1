//! Central finite-difference check of reverse-mode gradients.

use crate::nn::{Graph, NnError, Tensor, Var};
use crate::scalar::Scalar;

/// Outcome of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// `(parameter index, element index)` of the worst element.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    /// Number of scalar probes compared.
    pub checked: usize,
}

const DENOM_FLOOR: f64 = 1e-8;

fn evaluate<T, F>(f: &F, params: &[Tensor<T>]) -> Result<(Graph<T>, Vec<Var>, Var), NnError>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.leaf(p.clone())).collect();
    let loss = f(&mut g, &vars);
    let value = g.value(loss);
    if value.len() != 1 {
        return Err(NnError::Shape(format!(
            "objective must be scalar, got {:?}",
            value.shape()
        )));
    }
    if !value.is_finite() {
        return Err(NnError::NonFinite("objective".into()));
    }
    Ok((g, vars, loss))
}

/// Compares the graph's gradients of `f` against central differences
/// `(f(θ+eps) − f(θ−eps)) / (2·eps)` for every element of every parameter.
pub fn grad_check<T, F>(f: F, params: &[Tensor<T>], eps: f64) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &[Var]) -> Var,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(NnError::BadStep(eps));
    }
    let (g, vars, loss) = evaluate(&f, params)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Tensor<T>> = vars.iter().map(|&v| grads.get(v)).collect();
    drop(g);

    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let step = T::lit(eps);
    for p in 0..params.len() {
        for e in 0..params[p].len() {
            let original = probe[p].data()[e];
            probe[p].data_mut()[e] = original + step;
            let plus = {
                let (g, _, l) = evaluate(&f, &probe)?;
                g.value(l).item().as_f64()
            };
            probe[p].data_mut()[e] = original - step;
            let minus = {
                let (g, _, l) = evaluate(&f, &probe)?;
                g.value(l).item().as_f64()
            };
            probe[p].data_mut()[e] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = analytic[p].data()[e].as_f64();
            let denom = exact.abs().max(numeric.abs()).max(DENOM_FLOOR);
            let rel = (exact - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (p, e);
                report.analytic = exact;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
