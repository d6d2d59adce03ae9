use super::{Gradients, ParamStore};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so entries whose true
    /// gradient is near zero are compared on an absolute scale.
    pub floor: f64,
    /// Upper bound on checked entries per parameter (evenly strided).
    pub max_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            max_per_param: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients with central finite differences.
///
/// `forward(store, grads)` must return the loss and, when `grads` is
/// given, accumulate the analytic gradient into it. Frozen parameters are
/// skipped. `store` is restored bit-for-bit before returning.
pub fn grad_check<F>(store: &mut ParamStore, mut forward: F, opts: &GradCheckOptions) -> GradCheckReport
where
    F: FnMut(&ParamStore, Option<&mut Gradients>) -> f64,
{
    let mut grads = Gradients::zeros(store);
    forward(store, Some(&mut grads));
    grad_check_against(store, &grads, |s| forward(s, None), opts)
}

/// Like [`grad_check`] with externally supplied analytic gradients.
pub fn grad_check_against<F>(
    store: &mut ParamStore,
    analytic: &Gradients,
    mut loss: F,
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        tolerance: opts.tolerance,
    };
    let ids: Vec<_> = store.ids().filter(|&id| !store.is_frozen(id)).collect();
    for id in ids {
        let n = store.get(id).len();
        let stride = match opts.max_per_param {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for k in (0..n).step_by(stride) {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + opts.eps;
            let up = loss(store);
            store.get_mut(id).data_mut()[k] = orig - opts.eps;
            let down = loss(store);
            store.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic.get(id).data()[k];
            let rel = relative_error(a, numeric, opts.floor);
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst = Some((store.param(id).name.clone(), k));
            }
        }
    }
    report
}
