//! Central finite-difference verification of reverse-mode gradients.

use super::tensor::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index where the worst error occurred.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare the gradient returned by `loss_and_grad` against central
/// differences for every scalar in `store`. The store is restored afterwards.
pub fn gradient_check<F>(store: &mut ParamStore, mut loss_and_grad: F, epsilon_fd: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (loss, grads) = loss_and_grad(store)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss}")));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let ids: Vec<ParamId> = store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data[i];
            store.get_mut(id).data[i] = orig + epsilon_fd;
            let plus = loss_and_grad(store)?.0;
            store.get_mut(id).data[i] = orig - epsilon_fd;
            let minus = loss_and_grad(store)?.0;
            store.get_mut(id).data[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss perturbing {}[{i}]",
                    store.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * epsilon_fd);
            let analytic = grads.at(id, i);
            let err = relative_error(analytic, numeric);
            report.coordinates += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err.max(report.max_relative_error);
                report.worst = Some((store.name(id).to_string(), i));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
