use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::prox::{moreau_g, prox_g};
use crate::survival::{nelson_aalen_sorted, sort_order};
use crate::synthgen::{derive_seed, sample_times, GeneratorSpec};

/// Monte Carlo population `(Z0, Q, Δ, T)` with `Z0, Q` independent standard
/// normals and `(Δ, T) | Z0` drawn from the generator at linear predictor
/// `θ0 Z0`.
#[derive(Debug, Clone)]
pub struct RsPopulation {
    pub z0: Vec<f64>,
    pub q: Vec<f64>,
    pub events: Vec<bool>,
    pub times: Vec<f64>,
    pub theta0: f64,
    order: Vec<usize>,
}

impl RsPopulation {
    pub fn len(&self) -> usize {
        self.z0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z0.is_empty()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.events.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Builds a population from explicit columns (used for reordering checks).
    pub fn from_parts(z0: Vec<f64>, q: Vec<f64>, events: Vec<bool>, times: Vec<f64>, theta0: f64) -> Result<Self> {
        let n = z0.len();
        if q.len() != n || events.len() != n || times.len() != n || n == 0 {
            return Err(CoxError::InvalidInput(
                "population columns must be non-empty and of equal length".into(),
            ));
        }
        let order = sort_order(&times);
        Ok(Self {
            z0,
            q,
            events,
            times,
            theta0,
            order,
        })
    }

    /// Inputs `w Z0 + v Q` of the data-side proximal map.
    pub fn fields(&self, w: f64, v: f64) -> Vec<f64> {
        self.z0.iter().zip(&self.q).map(|(z, q)| w * z + v * q).collect()
    }
}

/// Samples `size` i.i.d. population members; `size >= 100`.
pub fn sample_population(gen: &GeneratorSpec, theta0: f64, size: usize, seed: u64) -> Result<RsPopulation> {
    gen.validate()?;
    if size < 100 {
        return Err(CoxError::InvalidInput(format!(
            "population size must be at least 100 (got {size})"
        )));
    }
    if !(theta0 >= 0.0 && theta0.is_finite()) {
        return Err(CoxError::InvalidInput(format!(
            "theta0 must be finite and non-negative ({theta0})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let z0: Vec<f64> = (0..size).map(|_| rng.sample(StandardNormal)).collect();
    let q: Vec<f64> = (0..size).map(|_| rng.sample(StandardNormal)).collect();
    let eta: ndarray::Array1<f64> = z0.iter().map(|z| theta0 * z).collect();
    let (times, events) = sample_times(eta.view(), gen, derive_seed(seed, 5));
    RsPopulation::from_parts(z0, q, events, times, theta0)
}

/// Population cumulative hazard evaluated at every member's own time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RsLambda {
    pub at_times: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl RsLambda {
    /// Values at the population times sorted ascending.
    pub fn sorted_values(&self, pop: &RsPopulation) -> Vec<f64> {
        pop.order().iter().map(|&i| self.at_times[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            damping: 0.5,
        }
    }
}

/// Right-hand side of the hazard self-consistency: the population
/// Nelson-Aalen estimate at predictors `prox_g(w Z0 + v Q, Λ(T), Δ, τ)`.
pub fn lambda_map(pop: &RsPopulation, fields: &[f64], deltas: &[f64], lam: &[f64], tau: f64) -> Vec<f64> {
    let xi: Vec<f64> = (0..pop.len())
        .map(|i| prox_g(fields[i], lam[i], deltas[i], tau))
        .collect();
    nelson_aalen_sorted(&pop.times, &pop.events, pop.order(), &xi).1
}

/// Solves the hazard self-consistency at `(w, v, τ)` by damped fixed-point
/// iteration, starting from `init` or from the Nelson-Aalen estimate at
/// `w Z0 + v Q`. The returned values satisfy the equation to `cfg.tol` in
/// sup norm.
pub fn solve_lambda(
    pop: &RsPopulation,
    w: f64,
    v: f64,
    tau: f64,
    init: Option<&RsLambda>,
    cfg: &LambdaConfig,
) -> Result<RsLambda> {
    if !(tau > 0.0) {
        return Err(CoxError::InvalidInput(format!("tau must be positive ({tau})")));
    }
    let fields = pop.fields(w, v);
    let deltas = pop.deltas();
    let mut lam = match init {
        Some(l) if l.at_times.len() == pop.len() => l.at_times.clone(),
        _ => nelson_aalen_sorted(&pop.times, &pop.events, pop.order(), &fields).1,
    };
    let d = cfg.damping;
    let mut residual = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let next = lambda_map(pop, &fields, &deltas, &lam, tau);
        residual = next.iter().zip(&lam).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(CoxError::NonFinite {
                what: "population hazard",
                iteration: it,
            });
        }
        if residual <= cfg.tol {
            return Ok(RsLambda {
                at_times: lam,
                iterations: it,
                residual,
            });
        }
        for (l, n) in lam.iter_mut().zip(&next) {
            *l = (1.0 - d) * *l + d * n;
        }
    }
    Err(CoxError::NonConvergence {
        what: "population hazard",
        iterations: cfg.max_iter,
        residual,
    })
}

/// Data-side population averages at `(w, v, τ, Λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataMoments {
    /// `<M''_g>`
    pub mean_curvature: f64,
    /// `<Z0 ġ(ξ)>`
    pub mean_z0_slope: f64,
    /// `<ġ(ξ)^2>`
    pub mean_slope_sq: f64,
}

pub fn data_moments(pop: &RsPopulation, w: f64, v: f64, tau: f64, lam: &RsLambda) -> DataMoments {
    let n = pop.len() as f64;
    let (mut curv, mut zs, mut ss) = (0.0, 0.0, 0.0);
    for i in 0..pop.len() {
        let delta = if pop.events[i] { 1.0 } else { 0.0 };
        let m = moreau_g(w * pop.z0[i] + v * pop.q[i], lam.at_times[i], delta, tau);
        curv += m.ddot;
        zs += pop.z0[i] * m.dot;
        ss += m.dot * m.dot;
    }
    DataMoments {
        mean_curvature: curv / n,
        mean_z0_slope: zs / n,
        mean_slope_sq: ss / n,
    }
}
