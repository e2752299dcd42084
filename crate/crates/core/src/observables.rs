//! Data-only estimates of the RS order parameters from a fitted model, and
//! ground-truth overlaps for validation.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::prox::ElasticNetPenalty;
use crate::rs::OrderParameters;
use crate::solvers::{FitResult, SolverKind};
use crate::survival::SurvivalDataset;

/// Order-parameter estimate together with the validity of each derived
/// quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterEstimate {
    pub source: SolverKind,
    pub params: OrderParameters,
    /// Alternative `v̂` from `ζ v̂² = τ̂² <g̈>`; informational only.
    pub v_hat_curvature: f64,
    /// `w_n² + v_n²` as measured from the corrected predictors.
    pub norm_sq: f64,
    /// `A - w_n²` before clamping.
    pub raw_v_sq: f64,
    pub w_valid: bool,
    pub v_valid: bool,
}

/// `ψ = β̂ - τ̂ X' ġ(Xβ̂, Λ̂(T), Δ)`, with `Λ̂(T)` given per subject.
pub fn local_field(data: &SurvivalDataset, beta_hat: &[f64], hazard_at_times: &[f64], tau_hat: f64) -> Vec<f64> {
    let slopes = residual_slopes(data, beta_hat, hazard_at_times);
    let beta = ArrayView1::from(beta_hat);
    (&beta - &(data.design().t().dot(&slopes) * tau_hat)).to_vec()
}

/// `ġ_i = Λ̂(T_i) e^{x_i'β̂} - Δ_i`.
fn residual_slopes(data: &SurvivalDataset, beta_hat: &[f64], hazard_at_times: &[f64]) -> Array1<f64> {
    let eta = data.linear_predictor(ArrayView1::from(beta_hat));
    eta.iter()
        .zip(hazard_at_times)
        .zip(data.events())
        .map(|((&e, &l), &ev)| l * e.exp() - if ev { 1.0 } else { 0.0 })
        .collect()
}

fn check_fit(data: &SurvivalDataset, fit: &FitResult) -> Result<()> {
    if data.n_events() == 0 {
        return Err(CoxError::NoEvents);
    }
    if fit.beta_hat.len() != data.p() || fit.hazard_at_times.len() != data.n() {
        return Err(CoxError::InvalidInput("fit does not match the data dimensions".into()));
    }
    if !fit.converged {
        return Err(CoxError::InvalidInput("estimates need a converged fit".into()));
    }
    Ok(())
}

/// The estimation chain shared by both solvers, given `(τ_n, τ̂_n)`.
fn estimate_chain(
    data: &SurvivalDataset,
    beta_hat: &[f64],
    hazard_at_times: &[f64],
    tau: f64,
    tau_hat: f64,
    source: SolverKind,
) -> OrderParameterEstimate {
    let (n, p) = (data.n() as f64, data.p() as f64);
    let zeta = data.zeta();
    let eta = data.linear_predictor(ArrayView1::from(beta_hat));
    let slopes = residual_slopes(data, beta_hat, hazard_at_times);

    let mean_slope_sq = slopes.dot(&slopes) / n;
    let mean_curv = eta.iter().zip(hazard_at_times).map(|(e, l)| l * e.exp()).sum::<f64>() / n;
    let v_hat = tau_hat * (mean_slope_sq / zeta).sqrt();
    let v_hat_curvature = tau_hat * (mean_curv / zeta).sqrt();

    let psi = local_field(data, beta_hat, hazard_at_times, tau_hat);
    let psi_sq = psi.iter().map(|x| x * x).sum::<f64>() / p;
    let w_hat = (psi_sq - v_hat * v_hat).max(0.0).sqrt();

    let norm_sq = eta.iter().zip(&slopes).map(|(e, s)| (e + tau * s).powi(2)).sum::<f64>() / n;
    let ratio = zeta * tau / tau_hat;
    let cross = eta.dot(&eta) / (2.0 * n)
        - 0.5 * zeta * v_hat * v_hat * tau * tau / (tau_hat * tau_hat)
        - 0.5 * norm_sq * (1.0 - 2.0 * ratio);

    let raw_w = cross / (w_hat * ratio);
    let w_valid = w_hat > 0.0 && raw_w.is_finite();
    let w = if w_valid { raw_w } else { 0.0 };
    let raw_v_sq = norm_sq - w * w;
    let v_valid = w_valid && raw_v_sq >= 0.0;

    OrderParameterEstimate {
        source,
        params: OrderParameters {
            w,
            v: raw_v_sq.max(0.0).sqrt(),
            tau,
            w_hat,
            v_hat,
            tau_hat,
        },
        v_hat_curvature,
        norm_sq,
        raw_v_sq,
        w_valid,
        v_valid,
    }
}

/// Estimates from a converged COX-AMP fit, using its own `τ` and `τ̂`.
pub fn estimate_from_amp(data: &SurvivalDataset, fit: &FitResult) -> Result<OrderParameterEstimate> {
    check_fit(data, fit)?;
    let (tau, tau_hat) = match (fit.tau, fit.tau_hat) {
        (Some(t), Some(th)) if t > 0.0 && th > 0.0 => (t, th),
        _ => {
            return Err(CoxError::InvalidInput(
                "AMP estimates need positive tau and tau_hat from the fit".into(),
            ))
        }
    };
    Ok(estimate_chain(
        data,
        &fit.beta_hat,
        &fit.hazard_at_times,
        tau,
        tau_hat,
        SolverKind::Amp,
    ))
}

/// Infers `(τ_n, τ̂_n)` for a fit that does not carry them by solving
/// `ζ(k - ητ) = <τg̈ / (1 + τg̈)>` with `k` the active fraction of `β̂`,
/// then `τ̂ = τ / (k - ητ)`.
pub fn estimate_tau_cd(data: &SurvivalDataset, fit: &FitResult, pen: &ElasticNetPenalty) -> Result<(f64, f64)> {
    check_fit(data, fit)?;
    let k = fit.active_count() as f64 / data.p() as f64;
    if k == 0.0 {
        return Err(CoxError::NullModel);
    }
    let eta = data.linear_predictor(ArrayView1::from(&fit.beta_hat));
    let curv: Vec<f64> = eta.iter().zip(&fit.hazard_at_times).map(|(e, l)| l * e.exp()).collect();
    let zeta = data.zeta();
    let eta_pen = pen.eta;
    let n = curv.len() as f64;

    let f = |t: f64| zeta * (k - eta_pen * t) - curv.iter().map(|c| t * c / (1.0 + t * c)).sum::<f64>() / n;
    let df = |t: f64| -zeta * eta_pen - curv.iter().map(|c| c / (1.0 + t * c).powi(2)).sum::<f64>() / n;

    let mut lo = 0.0;
    let mut hi = if eta_pen > 0.0 {
        k / eta_pen
    } else {
        let mut h = 1.0;
        while f(h) > 0.0 && h < 1e12 {
            h *= 2.0;
        }
        h
    };
    let f_hi = f(hi);
    if f_hi > 0.0 {
        return Err(CoxError::RootBracket(format!(
            "no sign change for tau in (0, {hi:e}]: f(0) = {:e}, f(hi) = {f_hi:e}, active fraction {k}, zeta {zeta}",
            f(0.0)
        )));
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let ft = f(t);
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = df(t);
        let newton = t - ft / d;
        let next = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - t).abs();
        t = next;
        if step <= 1e-14 * t.max(1.0) || hi - lo <= 1e-14 * t.max(1.0) {
            break;
        }
    }
    let denom = k - eta_pen * t;
    if !(t > 0.0 && denom > 0.0) {
        return Err(CoxError::RootBracket(format!("degenerate root tau = {t:e}")));
    }
    Ok((t, t / denom))
}

/// Estimates from any converged fit, inferring `(τ_n, τ̂_n)` first.
pub fn estimate_from_cd(
    data: &SurvivalDataset,
    fit: &FitResult,
    pen: &ElasticNetPenalty,
) -> Result<OrderParameterEstimate> {
    let (tau, tau_hat) = estimate_tau_cd(data, fit, pen)?;
    Ok(estimate_chain(
        data,
        &fit.beta_hat,
        &fit.hazard_at_times,
        tau,
        tau_hat,
        SolverKind::Cd,
    ))
}

/// Ground-truth overlaps `w = β0'β̂ / (√p |β0|)`, `v² = |β̂|²/p - w²`.
pub fn true_overlaps(beta_hat: &[f64], beta0: &[f64]) -> Result<(f64, f64)> {
    if beta_hat.len() != beta0.len() {
        return Err(CoxError::InvalidInput("beta_hat and beta0 differ in length".into()));
    }
    let norm0 = beta0.iter().map(|b| b * b).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return Err(CoxError::InvalidInput("true signal is zero".into()));
    }
    let p = beta0.len() as f64;
    let w = beta_hat.iter().zip(beta0).map(|(a, b)| a * b).sum::<f64>() / (p.sqrt() * norm0);
    let sq = beta_hat.iter().map(|b| b * b).sum::<f64>() / p;
    Ok((w, (sq - w * w).max(0.0).sqrt()))
}
