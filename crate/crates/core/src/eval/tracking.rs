//! Energy-state tracking accuracy.

use ndarray::Array2;

use crate::error::{HimmError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    /// Fraction of slots with `e_hat == E_t`.
    pub accuracy: f64,
    /// Mean absolute level error.
    pub mae: f64,
    /// Counts indexed `[true level, estimated level]`.
    pub per_level_confusion: Array2<u64>,
}

pub fn tracking_report(e_hat: &[usize], truth: &[usize], levels: usize) -> Result<TrackingReport> {
    if e_hat.len() != truth.len() {
        return Err(HimmError::dim("e_hat", truth.len(), e_hat.len()));
    }
    if truth.is_empty() {
        return Err(HimmError::TooShort { needed: 1, got: 0 });
    }
    if let Some(&bad) = e_hat.iter().chain(truth).find(|&&e| e >= levels) {
        return Err(HimmError::dim("level index", format!("< {levels}"), bad));
    }
    let mut confusion = Array2::<u64>::zeros((levels, levels));
    let mut hits = 0usize;
    let mut abs_err = 0usize;
    for (&est, &tru) in e_hat.iter().zip(truth) {
        confusion[[tru, est]] += 1;
        hits += (est == tru) as usize;
        abs_err += est.abs_diff(tru);
    }
    let n = truth.len() as f64;
    Ok(TrackingReport { accuracy: hits as f64 / n, mae: abs_err as f64 / n, per_level_confusion: confusion })
}
