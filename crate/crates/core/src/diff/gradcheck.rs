use super::{DiffError, ParameterStore};

/// Below this magnitude the relative error is measured against the floor
/// instead, so near-zero gradients are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the analytic gradient of `loss` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every scalar in the store.
///
/// `loss` must return the scalar loss and accumulate its gradient into the
/// store's gradient buffers. Gradients are left zeroed on return.
pub fn gradient_check<F>(store: &mut ParameterStore, eps: f64, mut loss: F) -> Result<GradCheckReport, DiffError>
where
    F: FnMut(&mut ParameterStore) -> Result<f64, DiffError>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(DiffError::InvalidConfig(format!("eps {eps} outside [1e-6, 1e-4]")));
    }
    store.zero_grads();
    let base = loss(store)?;
    if !base.is_finite() {
        return Err(DiffError::NonFiniteLoss(base));
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.as_slice().to_vec()).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).as_slice()[k];
            store.value_mut(id).as_mut_slice()[k] = orig + eps;
            let plus = loss(store)?;
            store.value_mut(id).as_mut_slice()[k] = orig - eps;
            let minus = loss(store)?;
            store.value_mut(id).as_mut_slice()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(DiffError::NonFiniteLoss(if plus.is_finite() { minus } else { plus }));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][k];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    store.zero_grads();
    Ok(report)
}
