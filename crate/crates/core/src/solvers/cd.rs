use ndarray::{Array1, Axis};

use super::{max_abs_diff, FitResult, SolverConfig, SolverKind};
use crate::error::{CoxError, Result};
use crate::prox::{prox_enet, ElasticNetPenalty};
use crate::survival::{nelson_aalen_sorted, SurvivalDataset};

/// Coordinate descent on the quadratic expansion of the partial likelihood
/// around the current iterate, followed by a Nelson-Aalen update.
///
/// One epoch is a single cyclic sweep over all coordinates of the local
/// quadratic `β -> s'(β - β_t) + ½ (β - β_t)' X'WX (β - β_t) + r(β)` with
/// `W = diag(Λ(T) e^{Xβ_t})` and `s = X'(W1 - Δ)`. Coordinates with zero
/// curvature are left unchanged and reported through `zero_curvature`.
pub fn fit_cd(
    data: &SurvivalDataset,
    pen: &ElasticNetPenalty,
    init: Option<&FitResult>,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let (n, p) = (data.n(), data.p());
    let x = data.design();
    let deltas = data.deltas();
    // row k is column k of the design
    let cols = x.t().as_standard_layout().into_owned();

    let mut beta = match init {
        Some(f) if f.beta_hat.len() == p => Array1::from(f.beta_hat.clone()),
        Some(_) => return Err(CoxError::InvalidInput("warm start has wrong dimension".into())),
        None => Array1::zeros(p),
    };
    let mut eta = x.dot(&beta);
    let (mut hazard, mut lam) = nelson_aalen_sorted(data.times(), data.events(), data.order(), eta.as_slice().unwrap());

    let mut err = f64::INFINITY;
    let mut epochs = 0;
    let mut zero_curvature = false;
    let mut weights = Array1::<f64>::zeros(n);
    let mut resid = Array1::<f64>::zeros(n);
    let mut shift = Array1::<f64>::zeros(n);

    while epochs < cfg.max_epochs {
        epochs += 1;
        for i in 0..n {
            weights[i] = lam[i] * eta[i].exp();
            resid[i] = weights[i] - deltas[i];
        }
        // shift = X(β_t - φ), updated as coordinates move
        shift.fill(0.0);
        let mut phi = beta.clone();
        zero_curvature = false;
        for (k, col) in cols.axis_iter(Axis(0)).enumerate() {
            let mut grad = 0.0;
            let mut curv = 0.0;
            let mut cross = 0.0;
            for i in 0..n {
                let xw = col[i] * weights[i];
                grad += col[i] * resid[i];
                curv += col[i] * xw;
                cross += xw * shift[i];
            }
            if !(curv > 0.0) {
                zero_curvature = true;
                continue;
            }
            let target = phi[k] + (cross - grad) / curv;
            let next = prox_enet(target, 1.0 / curv, pen);
            let step = next - phi[k];
            if step != 0.0 {
                shift.scaled_add(-step, &col);
                phi[k] = next;
            }
        }

        eta = x.dot(&phi);
        let (h, lam_new) = nelson_aalen_sorted(data.times(), data.events(), data.order(), eta.as_slice().unwrap());
        let db = max_abs_diff(phi.as_slice().unwrap(), beta.as_slice().unwrap());
        let dl = max_abs_diff(&lam_new, &lam);
        err = (db * db + dl * dl).sqrt();
        beta = phi;
        lam = lam_new;
        hazard = h;
        if !err.is_finite() {
            return Err(CoxError::NonFinite {
                what: "coordinate descent iterate",
                iteration: epochs,
            });
        }
        if err < cfg.tol {
            break;
        }
    }

    Ok(FitResult {
        solver: SolverKind::Cd,
        beta_hat: beta.to_vec(),
        hazard,
        hazard_at_times: lam,
        xi: None,
        tau: None,
        tau_hat: None,
        converged: err < cfg.tol,
        epochs,
        final_err: err,
        zero_curvature,
    })
}
