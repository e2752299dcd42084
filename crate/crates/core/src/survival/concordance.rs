use ndarray::ArrayView1;

use super::{StepHazard, SurvivalDataset};
use crate::error::{CoxError, Result};

/// Harrell's concordance index.
///
/// A pair `(i, j)` is comparable when `Δ_i = 1` and `T_j > T_i`; it is
/// concordant when the earlier failure has the higher risk score. Score ties
/// count one half.
pub fn harrell_c(times: &[f64], events: &[bool], scores: &[f64]) -> Result<f64> {
    let n = times.len();
    if events.len() != n || scores.len() != n {
        return Err(CoxError::InvalidInput(
            "times, events and scores must have equal length".into(),
        ));
    }
    let mut concordant = 0.0;
    let mut comparable = 0u64;
    for i in (0..n).filter(|&i| events[i]) {
        for j in 0..n {
            if times[j] > times[i] {
                comparable += 1;
                if scores[i] > scores[j] {
                    concordant += 1.0;
                } else if scores[i] == scores[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(CoxError::NoComparablePairs);
    }
    Ok(concordant / comparable as f64)
}

/// Corrected linear predictors `Xβ + τ* (Λ(T) e^{Xβ} - Δ)` that behave like
/// out-of-sample predictors for the training subjects.
pub fn rscv_predictors(data: &SurvivalDataset, beta_hat: &[f64], hazard: &StepHazard, tau_star: f64) -> Vec<f64> {
    let eta = data.linear_predictor(ArrayView1::from(beta_hat));
    eta.iter()
        .zip(data.times())
        .zip(data.events())
        .map(|((&e, &t), &ev)| {
            let delta = if ev { 1.0 } else { 0.0 };
            e + tau_star * (hazard.eval(t) * e.exp() - delta)
        })
        .collect()
}

/// Concordance of the corrected predictors against the training outcomes.
pub fn rscv_c_index(data: &SurvivalDataset, beta_hat: &[f64], hazard: &StepHazard, tau_star: f64) -> Result<f64> {
    let scores = rscv_predictors(data, beta_hat, hazard, tau_star);
    harrell_c(data.times(), data.events(), &scores)
}
