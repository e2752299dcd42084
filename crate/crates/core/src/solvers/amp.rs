use ndarray::Array1;

use super::{max_abs_diff, FitResult, SolverConfig, SolverKind};
use crate::error::{CoxError, Result};
use crate::prox::{moreau_g, prox_enet, prox_enet_dot, prox_g, ElasticNetPenalty};
use crate::survival::{nelson_aalen_sorted, StepHazard, SurvivalDataset};

/// COX-AMP: generalized AMP steps in `β` alternated with Nelson-Aalen
/// updates of the hazard evaluated at `prox_g(ξ)`.
///
/// Each epoch performs, with damping `d` on `ξ`, `τ̂`, `β̂`, `τ`:
///
/// ```text
/// Λ    <- NA(T, prox_g(ξ, Λ(T), Δ, τ))
/// ξ    <- Xβ̂ + τ M'_g(ξ, τ)
/// τ̂    <- ζ / <M''_g(ξ, τ)>
/// ψ    <- β̂ - τ̂ X' M'_g(ξ, τ)
/// β̂    <- prox_r(ψ, τ̂)
/// τ    <- τ̂ <prox_r'(ψ, τ̂)>
/// ```
///
/// and stops when the root of the summed squared sup-norm changes drops
/// below `cfg.tol`. Default start: `β̂ = 0`, `ξ = 0`, `τ = τ̂ = 1`,
/// `Λ = NA(T, 0)`; a previous fit overrides whatever state it carries.
/// The returned `β̂` is the last undamped proximal output, so its zeros are
/// exact.
pub fn fit_amp(
    data: &SurvivalDataset,
    pen: &ElasticNetPenalty,
    init: Option<&FitResult>,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let (n, p) = (data.n(), data.p());
    let zeta = data.zeta();
    let x = data.design();
    let deltas = data.deltas();
    let d = cfg.damping;

    let mut beta = match init {
        Some(f) if f.beta_hat.len() == p => Array1::from(f.beta_hat.clone()),
        Some(_) => return Err(CoxError::InvalidInput("warm start has wrong dimension".into())),
        None => Array1::zeros(p),
    };
    let mut xi = match init.and_then(|f| f.xi.clone()) {
        Some(v) if v.len() == n => Array1::from(v),
        _ => x.dot(&beta),
    };
    let mut tau = init.and_then(|f| f.tau).unwrap_or(1.0);
    let mut tau_hat = init.and_then(|f| f.tau_hat).unwrap_or(1.0);
    let mut lam = match init {
        Some(f) if f.hazard_at_times.len() == n => f.hazard_at_times.clone(),
        _ => {
            let eta = x.dot(&beta);
            nelson_aalen_sorted(data.times(), data.events(), data.order(), eta.as_slice().unwrap()).1
        }
    };

    if data.n_events() == 0 {
        // Λ ≡ 0 and M' ≡ 0: β̂ = prox_r(β̂) has the zero vector as its fixed point
        return Ok(FitResult {
            solver: SolverKind::Amp,
            beta_hat: vec![0.0; p],
            hazard: StepHazard::empty(),
            hazard_at_times: vec![0.0; n],
            xi: Some(vec![0.0; n]),
            tau: Some(tau),
            tau_hat: Some(tau_hat),
            converged: true,
            epochs: 1,
            final_err: 0.0,
            zero_curvature: false,
        });
    }

    let mut hazard = StepHazard::empty();
    let mut err = f64::INFINITY;
    let mut epochs = 0;
    let mut prox_buf = vec![0.0; n];
    let mut mdot = Array1::<f64>::zeros(n);
    // undamped proximal output; carries the exact zeros that damping would blur
    let mut beta_prox = beta.clone();

    while epochs < cfg.max_epochs {
        epochs += 1;

        for i in 0..n {
            prox_buf[i] = prox_g(xi[i], lam[i], deltas[i], tau);
        }
        let (h, lam_new) = nelson_aalen_sorted(data.times(), data.events(), data.order(), &prox_buf);
        let mut err2 = max_abs_diff(&lam_new, &lam).powi(2);
        lam = lam_new;
        hazard = h;

        let xb = x.dot(&beta);
        let mut xi_change: f64 = 0.0;
        for i in 0..n {
            let proposed = xb[i] + tau * moreau_g(xi[i], lam[i], deltas[i], tau).dot;
            let next = (1.0 - d) * xi[i] + d * proposed;
            xi_change = xi_change.max((next - xi[i]).abs());
            xi[i] = next;
        }
        err2 += xi_change * xi_change;

        let mut ddot_sum = 0.0;
        for i in 0..n {
            let m = moreau_g(xi[i], lam[i], deltas[i], tau);
            mdot[i] = m.dot;
            ddot_sum += m.ddot;
        }
        let tau_hat_next = (1.0 - d) * tau_hat + d * zeta / (ddot_sum / n as f64);
        err2 += (tau_hat_next - tau_hat).powi(2);
        tau_hat = tau_hat_next;

        let grad = x.t().dot(&mdot);
        let mut beta_change: f64 = 0.0;
        let mut slope_sum = 0.0;
        for k in 0..p {
            let psi = beta[k] - tau_hat * grad[k];
            slope_sum += prox_enet_dot(psi, tau_hat, pen);
            beta_prox[k] = prox_enet(psi, tau_hat, pen);
            let next = (1.0 - d) * beta[k] + d * beta_prox[k];
            beta_change = beta_change.max((next - beta[k]).abs());
            beta[k] = next;
        }
        err2 += beta_change * beta_change;

        let tau_next = (1.0 - d) * tau + d * tau_hat * slope_sum / p as f64;
        err2 += (tau_next - tau).powi(2);
        tau = tau_next;

        err = err2.sqrt();
        if !err.is_finite() || !tau_hat.is_finite() || !tau.is_finite() {
            return Err(CoxError::NonFinite {
                what: "COX-AMP state",
                iteration: epochs,
            });
        }
        if err < cfg.tol {
            break;
        }
    }

    Ok(FitResult {
        solver: SolverKind::Amp,
        beta_hat: beta_prox.to_vec(),
        hazard,
        hazard_at_times: lam,
        xi: Some(xi.to_vec()),
        tau: Some(tau),
        tau_hat: Some(tau_hat),
        converged: err < cfg.tol,
        epochs,
        final_err: err,
        zero_curvature: false,
    })
}
