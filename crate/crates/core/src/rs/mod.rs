//! Replica-symmetric (RS) theory for the elastic-net Cox estimator.
//!
//! The six order parameters `(w, v, τ, ŵ, v̂, τ̂)` solve a coupled system: a
//! prior side, available in closed form for the elastic net, and a data side
//! that needs the functional hazard `Λ` and is evaluated by averaging over a
//! fixed Monte Carlo population.

mod population;
mod prior;

use serde::{Deserialize, Serialize};

pub use population::{
    data_moments, lambda_map, sample_population, solve_lambda, DataMoments, LambdaConfig, RsLambda, RsPopulation,
};
pub use prior::{prior_moments_enet, prior_side_enet, sample_prior, PriorMoments, PriorSamples};

use crate::error::{CoxError, Result};
use crate::prox::{prox_enet, prox_g, ElasticNetPenalty};
use crate::synthgen::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    pub w: f64,
    pub v: f64,
    pub tau: f64,
    pub w_hat: f64,
    pub v_hat: f64,
    pub tau_hat: f64,
}

impl OrderParameters {
    pub fn as_array(&self) -> [f64; 6] {
        [self.w, self.v, self.tau, self.w_hat, self.v_hat, self.tau_hat]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            w: a[0],
            v: a[1],
            tau: a[2],
            w_hat: a[3],
            v_hat: a[4],
            tau_hat: a[5],
        }
    }

    fn sup_distance(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Data-generating model seen by the theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsModel {
    pub gen: GeneratorSpec,
    pub nu: f64,
    pub theta0: f64,
}

impl RsModel {
    pub fn zeta(&self) -> f64 {
        self.gen.zeta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsConfig {
    pub pop_size: usize,
    pub seed: u64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda: LambdaConfig,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self {
            pop_size: 5000,
            seed: 0,
            damping: 0.5,
            tol: 1e-6,
            max_iter: 5000,
            lambda: LambdaConfig::default(),
        }
    }
}

/// Solved fixed point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RsSolution {
    pub params: OrderParameters,
    pub lambda: RsLambda,
    pub iterations: usize,
    pub residual: f64,
}

/// One evaluation of the right-hand side of the RS system at `op`, with `lam`
/// solved at `(op.w, op.v, op.tau)`.
///
/// Data side: `τ̂' = ζ / <M''_g>`, `ŵ' = w - (τ̂'/ζ) <Z0 ġ(ξ)>`,
/// `ζ v̂'^2 = τ̂'^2 <ġ(ξ)^2>`. The prior side is then evaluated in closed form
/// at the new `(ŵ', v̂', τ̂')`.
pub fn rs_rhs_enet(
    op: &OrderParameters,
    pop: &RsPopulation,
    lam: &RsLambda,
    pen: &ElasticNetPenalty,
    nu: f64,
    zeta: f64,
) -> Result<OrderParameters> {
    let dm = data_moments(pop, op.w, op.v, op.tau, lam);
    if !(dm.mean_curvature > 0.0) {
        return Err(CoxError::RsInconsistency(
            "vanishing data-side curvature (no events in the population?)".into(),
        ));
    }
    let tau_hat = zeta / dm.mean_curvature;
    let w_hat = op.w - tau_hat / zeta * dm.mean_z0_slope;
    let v_hat = tau_hat * (dm.mean_slope_sq / zeta).sqrt();
    let (w, v, tau) = prior_side_enet(w_hat, v_hat, tau_hat, pen, nu)?;
    Ok(OrderParameters {
        w,
        v,
        tau,
        w_hat,
        v_hat,
        tau_hat,
    })
}

fn initial_point() -> OrderParameters {
    OrderParameters {
        w: 0.0,
        v: 0.0,
        tau: 1.0,
        w_hat: 0.0,
        v_hat: 0.0,
        tau_hat: 1.0,
    }
}

/// Damped fixed-point iteration on the RS system over a given population.
/// `init` warm-starts both the scalars and the hazard.
pub fn solve_rs_on(
    model: &RsModel,
    pen: &ElasticNetPenalty,
    pop: &RsPopulation,
    cfg: &RsConfig,
    init: Option<&RsSolution>,
) -> Result<RsSolution> {
    if !(pen.rho() > 0.0) {
        return Err(CoxError::InvalidInput(
            "the RS system needs a positive penalty strength".into(),
        ));
    }
    let zeta = model.zeta();
    let d = cfg.damping;
    let mut op = init.map(|s| s.params).unwrap_or_else(initial_point);
    let mut lam: Option<RsLambda> = init.map(|s| s.lambda.clone());
    let mut change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let solved = solve_lambda(pop, op.w, op.v, op.tau, lam.as_ref(), &cfg.lambda)?;
        let prop = rs_rhs_enet(&op, pop, &solved, pen, model.nu, zeta)?;
        lam = Some(solved);
        change = prop.sup_distance(&op);
        if !change.is_finite() {
            return Err(CoxError::NonFinite {
                what: "RS order parameters",
                iteration: it,
            });
        }
        if change <= cfg.tol {
            log::debug!("RS fixed point at rho={} after {it} iterations", pen.rho());
            return Ok(RsSolution {
                params: prop,
                lambda: lam.unwrap(),
                iterations: it,
                residual: change,
            });
        }
        let next: Vec<f64> = op
            .as_array()
            .iter()
            .zip(prop.as_array())
            .map(|(a, b)| (1.0 - d) * a + d * b)
            .collect();
        op = OrderParameters::from_array(next.try_into().unwrap());
    }
    Err(CoxError::NonConvergence {
        what: "RS fixed point",
        iterations: cfg.max_iter,
        residual: change,
    })
}

/// Samples a population of `cfg.pop_size` and solves the RS system.
pub fn solve_rs(model: &RsModel, pen: &ElasticNetPenalty, cfg: &RsConfig) -> Result<RsSolution> {
    let pop = sample_population(&model.gen, model.theta0, cfg.pop_size, cfg.seed)?;
    solve_rs_on(model, pen, &pop, cfg, None)
}

/// Solves along a penalty grid with one shared population, warm-starting each
/// point from the last successful one.
pub fn rs_path(model: &RsModel, pens: &[ElasticNetPenalty], cfg: &RsConfig) -> Result<Vec<Result<RsSolution>>> {
    let pop = sample_population(&model.gen, model.theta0, cfg.pop_size, cfg.seed)?;
    let mut warm: Option<RsSolution> = None;
    let mut out = Vec::with_capacity(pens.len());
    for pen in pens {
        let res = solve_rs_on(model, pen, &pop, cfg, warm.as_ref());
        if let Ok(s) = &res {
            warm = Some(s.clone());
        }
        out.push(res);
    }
    Ok(out)
}

/// Monte Carlo residuals of the six general RS equations and their standard
/// errors, in the order
/// `w = E[Bφ]`, `v̂τ/τ̂ = E[Zφ]`, `w²+v² = E[φ²]`,
/// `ŵ = w - τ̂/(ζτ) (w - E[Z0ξ])`, `v(1 - ζτ/τ̂) = E[Qξ]`,
/// `ζv̂² = (τ̂/τ)² E[(ξ - wZ0 - vQ)²]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsResiduals {
    pub values: [f64; 6],
    pub std_errors: [f64; 6],
}

fn mean_and_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

pub fn rs_residuals_general(
    op: &OrderParameters,
    pop: &RsPopulation,
    lam: &RsLambda,
    prior: &PriorSamples,
    pen: &ElasticNetPenalty,
    zeta: f64,
) -> RsResiduals {
    let phi: Vec<f64> = prior
        .b
        .iter()
        .zip(&prior.z)
        .map(|(b, z)| prox_enet(op.w_hat * b + op.v_hat * z, op.tau_hat, pen))
        .collect();
    let deltas = pop.deltas();
    let xi: Vec<f64> = (0..pop.len())
        .map(|i| prox_g(op.w * pop.z0[i] + op.v * pop.q[i], lam.at_times[i], deltas[i], op.tau))
        .collect();

    let (e_bphi, s1) = mean_and_se(prior.b.iter().zip(&phi).map(|(b, f)| b * f));
    let (e_zphi, s2) = mean_and_se(prior.z.iter().zip(&phi).map(|(z, f)| z * f));
    let (e_phi2, s3) = mean_and_se(phi.iter().map(|f| f * f));
    let (e_z0xi, s4) = mean_and_se(pop.z0.iter().zip(&xi).map(|(z, x)| z * x));
    let (e_qxi, s5) = mean_and_se(pop.q.iter().zip(&xi).map(|(q, x)| q * x));
    let (e_res2, s6) = mean_and_se((0..pop.len()).map(|i| (xi[i] - op.w * pop.z0[i] - op.v * pop.q[i]).powi(2)));

    let k4 = op.tau_hat / (zeta * op.tau);
    let k6 = (op.tau_hat / op.tau).powi(2);
    RsResiduals {
        values: [
            op.w - e_bphi,
            op.v_hat * op.tau / op.tau_hat - e_zphi,
            op.w * op.w + op.v * op.v - e_phi2,
            op.w_hat - (op.w - k4 * (op.w - e_z0xi)),
            op.v * (1.0 - zeta * op.tau / op.tau_hat) - e_qxi,
            zeta * op.v_hat * op.v_hat - k6 * e_res2,
        ],
        std_errors: [s1, s2, s3, k4 * s4, s5, k6 * s6],
    }
}
