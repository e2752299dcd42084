use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::prox::ElasticNetPenalty;

/// Right-continuous, nondecreasing step function `t -> Λ(t)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepHazard {
    knots: Vec<f64>,
    jumps: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl StepHazard {
    pub fn new(knots: Vec<f64>, jumps: Vec<f64>) -> Self {
        debug_assert_eq!(knots.len(), jumps.len());
        debug_assert!(knots.windows(2).all(|w| w[0] < w[1]));
        let cumulative = jumps
            .iter()
            .scan(0.0, |acc, j| {
                *acc += j;
                Some(*acc)
            })
            .collect();
        Self {
            knots,
            jumps,
            cumulative,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// `Λ(t)`, including the jump at `t` itself.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&knot| knot <= t);
        if k == 0 {
            0.0
        } else if self.cumulative.len() == self.jumps.len() {
            self.cumulative[k - 1]
        } else {
            // deserialized without the cache
            self.jumps[..k].iter().sum()
        }
    }

    /// Rebuilds the cumulative cache after deserialization.
    pub fn rebuilt(self) -> Self {
        Self::new(self.knots, self.jumps)
    }
}

/// Nelson-Aalen estimator at linear predictors `lin_pred`, returned both as
/// a step function and evaluated at every subject's own time.
///
/// `order` must sort `times` ascending. Subjects are at risk at their own
/// time (`Θ(0) = 1`); tied event times share one knot.
pub fn nelson_aalen_sorted(
    times: &[f64],
    events: &[bool],
    order: &[usize],
    lin_pred: &[f64],
) -> (StepHazard, Vec<f64>) {
    let n = times.len();
    let mut at_times = vec![0.0; n];
    if !events.iter().any(|&e| e) {
        return (StepHazard::empty(), at_times);
    }
    let shift = lin_pred
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let scale = (-shift).exp();

    // descending sweep, one group of tied times at a time
    let mut knots_rev = Vec::new();
    let mut jumps_rev = Vec::new();
    let mut risk = 0.0;
    let mut hi = n;
    while hi > 0 {
        let t = times[order[hi - 1]];
        let mut lo = hi - 1;
        while lo > 0 && times[order[lo - 1]] == t {
            lo -= 1;
        }
        let mut n_events = 0usize;
        for &i in &order[lo..hi] {
            risk += (lin_pred[i] - shift).exp();
            if events[i] {
                n_events += 1;
            }
        }
        if n_events > 0 {
            knots_rev.push(t);
            jumps_rev.push(n_events as f64 * scale / risk);
        }
        hi = lo;
    }
    knots_rev.reverse();
    jumps_rev.reverse();
    let hazard = StepHazard::new(knots_rev, jumps_rev);

    let mut k = 0;
    let mut level = 0.0;
    for &i in order {
        while k < hazard.knots.len() && hazard.knots[k] <= times[i] {
            level = hazard.cumulative[k];
            k += 1;
        }
        at_times[i] = level;
    }
    (hazard, at_times)
}

/// Nelson-Aalen estimator `Λ(t) = Σ_i Δ_i Θ(t - T_i) / Σ_j Θ(T_j - T_i) e^{η_j}`.
///
/// Returns an empty hazard (`Λ ≡ 0`) when no subject has an event.
pub fn nelson_aalen(data: &SurvivalDataset, lin_pred: &[f64]) -> StepHazard {
    nelson_aalen_sorted(data.times(), data.events(), data.order(), lin_pred).0
}

/// Penalized negative log partial likelihood
/// `Σ_i Δ_i [log((1/n) Σ_j Θ(T_j - T_i) e^{η_j}) - η_i] + r(β)`.
pub fn penalized_partial_likelihood(data: &SurvivalDataset, beta: &[f64], pen: &ElasticNetPenalty) -> f64 {
    let eta = data.linear_predictor(ndarray::ArrayView1::from(beta));
    let times = data.times();
    let order = data.order();
    let n = data.n();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    let mut risk = 0.0;
    let mut hi = n;
    while hi > 0 {
        let t = times[order[hi - 1]];
        let mut lo = hi - 1;
        while lo > 0 && times[order[lo - 1]] == t {
            lo -= 1;
        }
        for &i in &order[lo..hi] {
            risk += (eta[i] - shift).exp();
        }
        let log_mean_risk = shift + (risk / n as f64).ln();
        for &i in &order[lo..hi] {
            if data.events()[i] {
                total += log_mean_risk - eta[i];
            }
        }
        hi = lo;
    }
    total + pen.value(beta)
}
