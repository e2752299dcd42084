//! Per-observation Cox loss `g(x, Λ, Δ) = Λ e^x - Δ x`, its proximal map and
//! zero-temperature Moreau-envelope derivatives, plus the elastic-net penalty
//! and its proximal map.

use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::scalar::{lambert_w0, lambert_w0_exp, soft_threshold};

/// Elastic-net penalty `alpha * |b|_1 + eta / 2 * |b|_2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetPenalty {
    pub alpha: f64,
    pub eta: f64,
}

impl ElasticNetPenalty {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && eta >= 0.0 && alpha.is_finite() && eta.is_finite()) {
            return Err(CoxError::InvalidInput(format!(
                "penalty weights must be finite and non-negative (alpha={alpha}, eta={eta})"
            )));
        }
        Ok(Self { alpha, eta })
    }

    /// Strength / L1-ratio parametrization: `alpha = rho * l1_ratio`,
    /// `eta = rho * (1 - l1_ratio)`.
    pub fn from_rho(rho: f64, l1_ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&l1_ratio) || rho < 0.0 || !rho.is_finite() {
            return Err(CoxError::InvalidInput(format!(
                "need rho >= 0 and l1_ratio in [0, 1] (rho={rho}, l1_ratio={l1_ratio})"
            )));
        }
        Ok(Self {
            alpha: rho * l1_ratio,
            eta: rho * (1.0 - l1_ratio),
        })
    }

    /// Penalty at a given L1 weight and L1 ratio; `l1_ratio` must be positive.
    pub fn from_alpha(alpha: f64, l1_ratio: f64) -> Result<Self> {
        if !(l1_ratio > 0.0 && l1_ratio <= 1.0) {
            return Err(CoxError::InvalidInput(format!(
                "l1_ratio must lie in (0, 1] to parametrize by alpha (got {l1_ratio})"
            )));
        }
        Self::from_rho(alpha / l1_ratio, l1_ratio)
    }

    pub fn rho(&self) -> f64 {
        self.alpha + self.eta
    }

    pub fn l1_ratio(&self) -> f64 {
        let rho = self.rho();
        if rho > 0.0 {
            self.alpha / rho
        } else {
            0.0
        }
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.alpha * l1 + 0.5 * self.eta * l2
    }

    /// `st(u, alpha * tau_hat) / (1 + eta * tau_hat)`.
    #[inline]
    pub fn prox(&self, u: f64, tau_hat: f64) -> f64 {
        prox_enet(u, tau_hat, self)
    }

    #[inline]
    pub fn prox_dot(&self, u: f64, tau_hat: f64) -> f64 {
        prox_enet_dot(u, tau_hat, self)
    }
}

#[inline]
pub fn g(x: f64, lam: f64, delta: f64) -> f64 {
    x.exp() * lam - delta * x
}

#[inline]
pub fn g_dot(x: f64, lam: f64, delta: f64) -> f64 {
    lam * x.exp() - delta
}

#[inline]
pub fn g_ddot(x: f64, lam: f64, _delta: f64) -> f64 {
    lam * x.exp()
}

/// Lambert-W value `W0(tau * lam * e^{tau*delta + u})` that parametrizes the
/// proximal map of `g`; zero when `lam == 0` or `tau == 0`.
fn prox_lambert(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
    if lam <= 0.0 || tau <= 0.0 {
        return 0.0;
    }
    let log_arg = tau.ln() + lam.ln() + tau * delta + u;
    if log_arg > 700.0 {
        lambert_w0_exp(log_arg)
    } else {
        // argument is positive, so W0 is always defined
        lambert_w0(log_arg.exp()).unwrap_or(0.0)
    }
}

/// Minimizer of `(z - u)^2 / (2 tau) + g(z, lam, delta)`:
/// `u + tau*delta - W0(tau * lam * e^{tau*delta + u})`.
///
/// `tau == 0` is the identity map.
pub fn prox_g(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return u;
    }
    u + tau * delta - prox_lambert(u, lam, delta, tau)
}

/// Proximal point together with the first and second derivatives of the
/// Moreau envelope at `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoreauG {
    pub prox: f64,
    pub dot: f64,
    pub ddot: f64,
}

/// Evaluates the prox of `g` and the envelope derivatives in one pass.
///
/// With `W = W0(tau lam e^{tau delta + u})` one has `lam e^{prox} = W / tau`,
/// so `M' = W/tau - delta` and `M'' = (W/tau) / (1 + W)` without
/// re-exponentiating the proximal point.
#[inline]
pub fn moreau_g(u: f64, lam: f64, delta: f64, tau: f64) -> MoreauG {
    if tau <= 0.0 {
        return MoreauG {
            prox: u,
            dot: g_dot(u, lam, delta),
            ddot: g_ddot(u, lam, delta),
        };
    }
    let w = prox_lambert(u, lam, delta, tau);
    let curv = w / tau;
    MoreauG {
        prox: u + tau * delta - w,
        dot: curv - delta,
        ddot: curv / (1.0 + w),
    }
}

/// `(u - prox_g(u)) / tau`, which equals `g_dot(prox_g(u))`.
pub fn moreau_dot_g(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
    moreau_g(u, lam, delta, tau).dot
}

/// `g_ddot(prox) / (1 + tau * g_ddot(prox))`, in `[0, 1/tau)`.
pub fn moreau_ddot_g(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
    moreau_g(u, lam, delta, tau).ddot
}

/// Value of the Moreau envelope of `g` at `u`.
pub fn moreau_value_g(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
    let z = prox_g(u, lam, delta, tau);
    (z - u) * (z - u) / (2.0 * tau) + g(z, lam, delta)
}

#[inline]
pub fn prox_enet(u: f64, tau_hat: f64, pen: &ElasticNetPenalty) -> f64 {
    soft_threshold(u, pen.alpha * tau_hat) / (1.0 + pen.eta * tau_hat)
}

/// Derivative of [`prox_enet`] in `u`; zero on the dead zone and at its edge.
#[inline]
pub fn prox_enet_dot(u: f64, tau_hat: f64, pen: &ElasticNetPenalty) -> f64 {
    if u.abs() > pen.alpha * tau_hat {
        1.0 / (1.0 + pen.eta * tau_hat)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const OMEGA: f64 = 0.567_143_290_409_783_8;

    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    /// Envelope value by direct 1-D minimization, independent of the
    /// Lambert-W closed form.
    fn envelope_oracle(u: f64, lam: f64, delta: f64, tau: f64) -> f64 {
        let obj = |z: f64| (z - u) * (z - u) / (2.0 * tau) + g(z, lam, delta);
        let z = golden_min(obj, u - 40.0, u + tau * delta + 40.0);
        obj(z)
    }

    #[test]
    fn g_examples() {
        assert_eq!(g(0.0, 1.0, 0.0), 1.0);
        assert_eq!(g(0.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(g(2f64.ln(), 3.0, 1.0), 6.0 - 2f64.ln(), epsilon = 1e-14);
        assert_eq!(g_dot(0.0, 1.0, 1.0), 0.0);
        assert_eq!(g_ddot(0.0, 2.0, 0.0), 2.0);
        assert_relative_eq!(g_dot(1.0, 1.0, 0.0), std::f64::consts::E, epsilon = 1e-15);
    }

    #[test]
    fn prox_g_examples() {
        assert_eq!(prox_g(1.7, 0.0, 0.0, 0.3), 1.7);
        assert!(prox_g(0.0, 1.0, 1.0, 1.0).abs() < 1e-15);
        let oracle = golden_min(|z| z * z / 2.0 + z.exp(), -5.0, 5.0);
        assert_relative_eq!(oracle, -OMEGA, epsilon = 1e-8);
        assert_relative_eq!(prox_g(0.0, 1.0, 0.0, 1.0), -OMEGA, epsilon = 1e-14);
    }

    #[test]
    fn moreau_examples() {
        let m = moreau_g(0.4, 0.0, 0.0, 2.0);
        assert_eq!((m.dot, m.ddot), (0.0, 0.0));
        let m = moreau_g(0.0, 1.0, 1.0, 1.0);
        assert!(m.dot.abs() < 1e-15);
        assert_relative_eq!(m.ddot, 0.5, epsilon = 1e-15);
        let m = moreau_g(0.0, 1.0, 0.0, 1.0);
        assert_relative_eq!(m.dot, OMEGA, epsilon = 1e-14);
        assert_relative_eq!(m.ddot, OMEGA / (1.0 + OMEGA), epsilon = 1e-14);
        assert_relative_eq!(m.ddot, 0.361_896, epsilon = 1e-6);
        // finite difference of the directly minimized envelope
        let h = 1e-4;
        let fd = (envelope_oracle(h, 1.0, 0.0, 1.0) - envelope_oracle(-h, 1.0, 0.0, 1.0)) / (2.0 * h);
        assert_relative_eq!(fd, OMEGA, max_relative = 1e-6);
    }

    #[test]
    fn prox_g_overflow_guard() {
        let z = prox_g(800.0, 1.0, 1.0, 1.0);
        assert!(z.is_finite());
        // stationarity in the overflow regime, written relative to the scale
        let w = 800.0 + 1.0 - z;
        assert_relative_eq!(w + w.ln(), 801.0, max_relative = 1e-14);
    }

    #[test]
    fn enet_examples() {
        let p = ElasticNetPenalty::new(1.0, 1.0).unwrap();
        assert_eq!(prox_enet(3.0, 1.0, &p), 1.0);
        let p = ElasticNetPenalty::new(1.0, 0.0).unwrap();
        assert_eq!(prox_enet(0.5, 1.0, &p), 0.0);
        assert_eq!(prox_enet_dot(0.5, 1.0, &p), 0.0);
        let p = ElasticNetPenalty::new(1.0, 0.5).unwrap();
        assert_eq!(prox_enet(-4.0, 2.0, &p), -1.0);
        assert_eq!(prox_enet_dot(-4.0, 2.0, &p), 0.5);
        // kink convention
        assert_eq!(prox_enet_dot(2.0, 2.0, &ElasticNetPenalty::new(1.0, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn penalty_parametrizations() {
        let p = ElasticNetPenalty::from_rho(2.0, 0.75).unwrap();
        assert_eq!((p.alpha, p.eta), (1.5, 0.5));
        assert_relative_eq!(p.rho(), 2.0);
        assert_relative_eq!(p.l1_ratio(), 0.75);
        let q = ElasticNetPenalty::from_alpha(1.5, 0.75).unwrap();
        assert_relative_eq!(q.eta, 0.5, epsilon = 1e-15);
        assert!(ElasticNetPenalty::new(-1.0, 0.0).is_err());
        assert!(ElasticNetPenalty::from_rho(1.0, 1.5).is_err());
        assert_eq!(p.value(&[1.0, -2.0]), 1.5 * 3.0 + 0.25 * 5.0);
    }

    #[test]
    fn prox_g_stationarity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let u = rng.random_range(-20.0..20.0);
            let lam = rng.random_range(0.0..10.0);
            let delta = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let tau = rng.random_range(1e-3..10.0);
            let z = prox_g(u, lam, delta, tau);
            let res = (z - u) / tau + g_dot(z, lam, delta);
            assert!(res.abs() <= 1e-10, "residual {res} at u={u} lam={lam} tau={tau}");
        }
    }

    #[test]
    fn moreau_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let u = rng.random_range(-3.0..3.0);
            let lam = rng.random_range(0.05..3.0);
            let delta = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let tau = rng.random_range(0.1..3.0);
            let h = 1e-5;
            let fd = (moreau_value_g(u + h, lam, delta, tau) - moreau_value_g(u - h, lam, delta, tau)) / (2.0 * h);
            let m = moreau_g(u, lam, delta, tau);
            assert!((fd - m.dot).abs() <= 1e-6 * m.dot.abs().max(1.0));
            let fd2 = (moreau_dot_g(u + h, lam, delta, tau) - moreau_dot_g(u - h, lam, delta, tau)) / (2.0 * h);
            assert!((fd2 - m.ddot).abs() <= 1e-5 * m.ddot.abs().max(1e-3));
            assert!(m.ddot >= 0.0 && m.ddot < 1.0 / tau);
        }
    }

    proptest! {
        #[test]
        fn prox_g_nonexpansive(u1 in -10.0..10.0_f64, u2 in -10.0..10.0_f64,
                               lam in 0.0..5.0_f64, d in 0u8..2, tau in 0.01..5.0_f64) {
            let delta = d as f64;
            let diff = (prox_g(u1, lam, delta, tau) - prox_g(u2, lam, delta, tau)).abs();
            prop_assert!(diff <= (u1 - u2).abs() + 1e-12);
        }

        #[test]
        fn prox_enet_nonexpansive(u1 in -10.0..10.0_f64, u2 in -10.0..10.0_f64,
                                  a in 0.0..3.0_f64, e in 0.0..3.0_f64, t in 0.01..5.0_f64) {
            let pen = ElasticNetPenalty::new(a, e).unwrap();
            let diff = (prox_enet(u1, t, &pen) - prox_enet(u2, t, &pen)).abs();
            prop_assert!(diff <= (u1 - u2).abs() + 1e-15);
        }

        #[test]
        fn rho_round_trip(rho in 1e-3..10.0_f64, l in 0.0..=1.0_f64) {
            let p = ElasticNetPenalty::from_rho(rho, l).unwrap();
            prop_assert!((p.rho() - rho).abs() <= 1e-12 * rho);
            prop_assert!((p.l1_ratio() - l).abs() <= 1e-12);
        }
    }
}
