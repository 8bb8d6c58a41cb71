//! Central finite-difference gradient checking.

use super::params::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// Absolute magnitude under which a gradient counts as zero in the
/// relative-error denominator.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub scalars: usize,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, GRADIENT_FLOOR)`.
    pub relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.params.iter().all(|p| p.relative_error < tolerance)
    }
}

/// Compares `analytic` against central differences of `loss` taken one
/// scalar at a time.
pub fn check_gradients<F>(
    params: &ParamStore,
    analytic: &Gradients,
    eps: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    check_gradients_termwise(params, analytic, eps, |p| Ok(vec![loss(p)?]))
}

/// Like [`check_gradients`] for a loss that is a sum of terms. The two
/// perturbed evaluations are differenced term by term before summing, which
/// keeps the rounding of a large total out of small derivatives.
pub fn check_gradients_termwise<F>(
    params: &ParamStore,
    analytic: &Gradients,
    eps: f64,
    mut terms: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<Vec<f64>>,
{
    let mut probe = params.clone();
    let mut report = GradCheckReport::default();
    for id in params.ids() {
        let n = params.get(id).len();
        let mut diff_sq = 0.0;
        let mut analytic_sq = 0.0;
        let mut numeric_sq = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let original = params.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = original + eps;
            let up = terms(&probe)?;
            probe.get_mut(id).data_mut()[i] = original - eps;
            let down = terms(&probe)?;
            probe.get_mut(id).data_mut()[i] = original;
            if up.len() != down.len() {
                return Err(Error::Shape(format!(
                    "loss has {} terms at +eps and {} at -eps",
                    up.len(),
                    down.len()
                )));
            }
            let delta: f64 = up.iter().zip(&down).map(|(u, d)| u - d).sum();
            let numeric = delta / (2.0 * eps);
            let a = analytic.get(id).data()[i];
            diff_sq += (a - numeric).powi(2);
            analytic_sq += a * a;
            numeric_sq += numeric * numeric;
            max_abs = max_abs.max((a - numeric).abs());
        }
        let denom = analytic_sq
            .sqrt()
            .max(numeric_sq.sqrt())
            .max(GRADIENT_FLOOR);
        report.params.push(ParamCheck {
            name: params.name(id).to_string(),
            scalars: n,
            relative_error: diff_sq.sqrt() / denom,
            max_abs_error: max_abs,
        });
    }
    Ok(report)
}
