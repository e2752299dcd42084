//! Solvers for the elastic-net penalized partial likelihood
//! `Σ_i Δ_i [log Σ_j Θ(T_j - T_i) e^{x_j'β} - x_i'β] + r(β)`.
//!
//! Both solvers alternate a step in `β` at fixed cumulative hazard with a
//! Nelson-Aalen update of the hazard, and stop on the same mixed sup-norm
//! change criterion.

mod amp;
mod cd;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

pub use amp::fit_amp;
pub use cd::fit_cd;

use crate::error::{CoxError, Result};
use crate::prox::{prox_g, ElasticNetPenalty};
use crate::survival::{nelson_aalen_sorted, StepHazard, SurvivalDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Amp,
    Cd,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Amp => write!(f, "amp"),
            SolverKind::Cd => write!(f, "cd"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_epochs: usize,
    /// Weight on the proposed iterate in AMP updates; ignored by CD.
    pub damping: f64,
}

impl SolverConfig {
    pub fn amp() -> Self {
        Self {
            tol: 1e-8,
            max_epochs: 1000,
            damping: 0.5,
        }
    }

    pub fn cd() -> Self {
        Self {
            tol: 1e-8,
            max_epochs: 100,
            damping: 1.0,
        }
    }

    pub fn for_solver(kind: SolverKind) -> Self {
        match kind {
            SolverKind::Amp => Self::amp(),
            SolverKind::Cd => Self::cd(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_epochs == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(CoxError::InvalidInput(format!(
                "solver config needs tol > 0, max_epochs >= 1, damping in (0, 1] (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Output of a solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub solver: SolverKind,
    pub beta_hat: Vec<f64>,
    /// Fitted cumulative hazard as a step function.
    pub hazard: StepHazard,
    /// `Λ̂(T_i)` for every training subject.
    pub hazard_at_times: Vec<f64>,
    /// AMP output field `ξ` (AMP only).
    pub xi: Option<Vec<f64>>,
    /// AMP scalar `τ` (AMP only).
    pub tau: Option<f64>,
    /// AMP scalar `τ̂` (AMP only).
    pub tau_hat: Option<f64>,
    pub converged: bool,
    pub epochs: usize,
    pub final_err: f64,
    /// CD met a coordinate with zero curvature and left it unchanged.
    pub zero_curvature: bool,
}

impl FitResult {
    pub fn linear_predictor(&self, data: &SurvivalDataset) -> Vec<f64> {
        data.linear_predictor(ArrayView1::from(&self.beta_hat)).to_vec()
    }

    pub fn active_count(&self) -> usize {
        self.beta_hat.iter().filter(|b| **b != 0.0).count()
    }

    /// `max_i |prox_g(ξ_i, Λ̂(T_i), Δ_i, τ) - x_i'β̂|`; `None` for non-AMP fits.
    pub fn amp_fixed_point_residual(&self, data: &SurvivalDataset) -> Option<f64> {
        let (xi, tau) = (self.xi.as_ref()?, self.tau?);
        let eta = self.linear_predictor(data);
        let deltas = data.deltas();
        Some(
            (0..data.n())
                .map(|i| (prox_g(xi[i], self.hazard_at_times[i], deltas[i], tau) - eta[i]).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Gradient of the unpenalized partial likelihood, `X'(Λ̂(T) e^{Xβ} - Δ)`
/// with `Λ̂` the Nelson-Aalen estimate at `β`.
pub fn partial_likelihood_gradient(data: &SurvivalDataset, beta: &[f64]) -> Vec<f64> {
    let eta = data.linear_predictor(ArrayView1::from(beta));
    let (_, lam) = nelson_aalen_sorted(data.times(), data.events(), data.order(), eta.as_slice().unwrap());
    let deltas = data.deltas();
    let resid: ndarray::Array1<f64> = (0..data.n()).map(|i| lam[i] * eta[i].exp() - deltas[i]).collect();
    data.design().t().dot(&resid).to_vec()
}

/// Largest violation of the elastic-net optimality conditions at `beta`.
pub fn kkt_residual(data: &SurvivalDataset, beta: &[f64], pen: &ElasticNetPenalty) -> f64 {
    partial_likelihood_gradient(data, beta)
        .iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g + pen.eta * b + pen.alpha * b.signum()).abs()
            } else {
                (g.abs() - pen.alpha).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn fit(
    kind: SolverKind,
    data: &SurvivalDataset,
    pen: &ElasticNetPenalty,
    init: Option<&FitResult>,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    match kind {
        SolverKind::Amp => fit_amp(data, pen, init, cfg),
        SolverKind::Cd => fit_cd(data, pen, init, cfg),
    }
}

/// Fits a regularization path sorted by decreasing strength, warm-starting
/// each point from the most recent converged fit. Failures are kept per point
/// and the path continues.
pub fn reg_path(
    data: &SurvivalDataset,
    pen_grid: &[ElasticNetPenalty],
    kind: SolverKind,
    cfg: &SolverConfig,
) -> Result<Vec<Result<FitResult>>> {
    if pen_grid.windows(2).any(|w| w[1].rho() > w[0].rho()) {
        return Err(CoxError::InvalidInput(
            "penalty grid must be sorted by decreasing strength".into(),
        ));
    }
    let mut warm: Option<FitResult> = None;
    let mut out = Vec::with_capacity(pen_grid.len());
    for pen in pen_grid {
        let res = fit(kind, data, pen, warm.as_ref(), cfg);
        match &res {
            Ok(f) if f.converged => warm = Some(f.clone()),
            Ok(f) => log::warn!(
                "{kind} did not converge at alpha={} (error {:e})",
                pen.alpha,
                f.final_err
            ),
            Err(e) => log::warn!("{kind} failed at alpha={}: {e}", pen.alpha),
        }
        out.push(res);
    }
    Ok(out)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
