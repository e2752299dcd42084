use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoxError, Result};
use crate::prox::ElasticNetPenalty;
use crate::scalar::{std_normal_pdf, std_normal_tail};
use crate::synthgen::derive_seed;

/// Prior-side moments of `φ = prox_r(ŵ B + v̂ Z, τ̂)` where `B = β0/θ0` is
/// zero with probability `1 - ν` and `N(0, 1/ν)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorMoments {
    /// `E[B φ]`
    pub signal: f64,
    /// `τ̂ E[prox_r'(ψ)]`
    pub slope: f64,
    /// `E[φ^2]`
    pub second: f64,
}

/// Closed forms for the elastic-net prior-side expectations.
pub fn prior_moments_enet(
    w_hat: f64,
    v_hat: f64,
    tau_hat: f64,
    pen: &ElasticNetPenalty,
    nu: f64,
) -> Result<PriorMoments> {
    if !(v_hat > 0.0) {
        return Err(CoxError::InvalidInput(format!(
            "thresholding ratios undefined for v_hat = {v_hat}"
        )));
    }
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(CoxError::InvalidInput(format!(
            "active fraction must lie in (0, 1] ({nu})"
        )));
    }
    let a = pen.alpha * tau_hat;
    let s1 = (v_hat * v_hat + w_hat * w_hat / nu).sqrt();
    let chi1 = a / s1;
    let chi0 = a / v_hat;
    let c = 1.0 / (1.0 + pen.eta * tau_hat);
    let (t1, t0) = (std_normal_tail(chi1), std_normal_tail(chi0));
    // E[st(σZ, a)^2] = 2[(σ² + a²) Φ(a/σ) - a σ φ(a/σ)]
    let sq1 = (s1 * s1 + a * a) * t1 - a * s1 * std_normal_pdf(chi1);
    let sq0 = (v_hat * v_hat + a * a) * t0 - a * v_hat * std_normal_pdf(chi0);
    Ok(PriorMoments {
        signal: 2.0 * c * w_hat * t1,
        slope: 2.0 * c * tau_hat * (nu * t1 + (1.0 - nu) * t0),
        second: 2.0 * c * c * (nu * sq1 + (1.0 - nu) * sq0),
    })
}

/// Prior-side update `(ŵ, v̂, τ̂) -> (w, v, τ)`.
pub fn prior_side_enet(
    w_hat: f64,
    v_hat: f64,
    tau_hat: f64,
    pen: &ElasticNetPenalty,
    nu: f64,
) -> Result<(f64, f64, f64)> {
    let m = prior_moments_enet(w_hat, v_hat, tau_hat, pen, nu)?;
    let v2 = m.second - m.signal * m.signal;
    if v2 < -1e-12 * m.second.max(f64::MIN_POSITIVE) || !v2.is_finite() {
        return Err(CoxError::RsInconsistency(format!(
            "negative noise variance {v2:e} from the prior-side equations"
        )));
    }
    Ok((m.signal, v2.max(0.0).sqrt(), m.slope))
}

/// I.i.d. draws of `(β0/θ0, Z)` for Monte Carlo evaluation of prior-side
/// expectations.
#[derive(Debug, Clone)]
pub struct PriorSamples {
    pub b: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn sample_prior(nu: f64, size: usize, seed: u64) -> Result<PriorSamples> {
    if !(nu > 0.0 && nu <= 1.0) || size == 0 {
        return Err(CoxError::InvalidInput(format!(
            "need nu in (0, 1] and size >= 1 (nu={nu}, size={size})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 6));
    let sd = 1.0 / nu.sqrt();
    let mut b = Vec::with_capacity(size);
    let mut z = Vec::with_capacity(size);
    for _ in 0..size {
        let active = rng.random::<f64>() < nu;
        let g: f64 = rng.sample(StandardNormal);
        b.push(if active { sd * g } else { 0.0 });
        z.push(rng.sample(StandardNormal));
    }
    Ok(PriorSamples { b, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::{prox_enet, prox_enet_dot};
    use crate::scalar::soft_threshold;

    fn simpson(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let m = 20_000;
        let h = (hi - lo) / m as f64;
        let mut acc = f(lo) + f(hi);
        for k in 1..m {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    /// `E[f(σX)]`, `X ~ N(0,1)`, split at the kinks `±a` so every piece is smooth.
    fn gauss_expect(sigma: f64, a: f64, f: impl Fn(f64) -> f64) -> f64 {
        let dens = |x: f64| std_normal_pdf(x / sigma) / sigma * f(x);
        let hi = 14.0 * sigma;
        if a >= hi {
            return simpson(-hi, hi, dens);
        }
        simpson(-hi, -a, dens) + simpson(-a, a, dens) + simpson(a, hi, dens)
    }

    /// Moments by 1-D quadrature over the Gaussian field on each component.
    fn quadrature(w_hat: f64, v_hat: f64, tau_hat: f64, pen: &ElasticNetPenalty, nu: f64) -> PriorMoments {
        let a = pen.alpha * tau_hat;
        let c = 1.0 / (1.0 + pen.eta * tau_hat);
        let s1 = (v_hat * v_hat + w_hat * w_hat / nu).sqrt();
        let phi = |x: f64| c * soft_threshold(x, a);
        // E[B φ] = Cov(B, ψ)/Var(ψ) E[ψ φ] on the active component
        let active_cross = gauss_expect(s1, a, |x| x * phi(x)) * (w_hat / nu) / (s1 * s1);
        // P(|σX| > a), integrated over the outer pieces only
        let outside = |sigma: f64| 2.0 * simpson(a, a.max(14.0 * sigma), |x| std_normal_pdf(x / sigma) / sigma);
        let slope1 = c * outside(s1);
        let slope0 = c * outside(v_hat);
        PriorMoments {
            signal: nu * active_cross,
            slope: tau_hat * (nu * slope1 + (1.0 - nu) * slope0),
            second: nu * gauss_expect(s1, a, |x| phi(x).powi(2))
                + (1.0 - nu) * gauss_expect(v_hat, a, |x| phi(x).powi(2)),
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            (0.8, 0.5, 1.2, 0.75, 0.6, 0.005),
            (1.5, 0.3, 0.7, 0.2, 1.0, 0.1),
            (0.1, 1.1, 2.0, 1.5, 0.0, 0.5),
            (0.9, 0.9, 1.0, 0.0, 0.3, 1.0),
        ];
        for &(w_hat, v_hat, tau_hat, alpha, eta, nu) in &cases {
            let pen = ElasticNetPenalty::new(alpha, eta).unwrap();
            let cf = prior_moments_enet(w_hat, v_hat, tau_hat, &pen, nu).unwrap();
            let q = quadrature(w_hat, v_hat, tau_hat, &pen, nu);
            assert!((cf.signal - q.signal).abs() <= 1e-8, "{cf:?} vs {q:?}");
            assert!((cf.second - q.second).abs() <= 1e-8, "{cf:?} vs {q:?}");
            assert!((cf.slope - q.slope).abs() <= 1e-8, "{cf:?} vs {q:?}");
        }
    }

    #[test]
    fn limiting_cases() {
        let pen = ElasticNetPenalty::new(1e6, 0.0).unwrap();
        let (w, v, tau) = prior_side_enet(1.0, 0.5, 1.0, &pen, 0.1).unwrap();
        assert_eq!(w, 0.0);
        assert!(tau < 1e-100 && v < 1e-100);
        let pen = ElasticNetPenalty::new(0.0, 0.0).unwrap();
        let (w, _, tau) = prior_side_enet(0.7, 0.5, 1.3, &pen, 0.1).unwrap();
        assert!((w - 0.7).abs() < 1e-15);
        assert!((tau - 1.3).abs() < 1e-15);
        assert!(prior_moments_enet(0.7, 0.0, 1.0, &pen, 0.1).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let pen = ElasticNetPenalty::new(0.4, 0.2).unwrap();
        let (w_hat, v_hat, tau_hat, nu) = (0.9, 0.6, 1.1, 1.0);
        let s = sample_prior(nu, 200_000, 1).unwrap();
        let n = s.b.len() as f64;
        let vals: Vec<f64> =
            s.b.iter()
                .zip(&s.z)
                .map(|(b, z)| b * prox_enet(w_hat * b + v_hat * z, tau_hat, &pen))
                .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let cf = prior_moments_enet(w_hat, v_hat, tau_hat, &pen, nu).unwrap();
        assert!((mean - cf.signal).abs() < 3.0 * sd / n.sqrt());
    }

    #[test]
    fn stein_identity() {
        let pen = ElasticNetPenalty::new(0.5, 0.25).unwrap();
        let (w_hat, v_hat, tau_hat) = (0.8, 0.7, 0.9);
        let s = sample_prior(0.05, 200_000, 2).unwrap();
        let n = s.b.len() as f64;
        // E[Z φ] - v̂ E[φ'] has mean zero; test the per-sample difference
        let diffs: Vec<f64> =
            s.b.iter()
                .zip(&s.z)
                .map(|(b, z)| {
                    let psi = w_hat * b + v_hat * z;
                    z * prox_enet(psi, tau_hat, &pen) - v_hat * prox_enet_dot(psi, tau_hat, &pen)
                })
                .collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean}, se {}", sd / n.sqrt());
    }

    #[test]
    fn prior_samples_have_requested_sparsity() {
        let s = sample_prior(0.2, 50_000, 3).unwrap();
        let frac = s.b.iter().filter(|b| **b != 0.0).count() as f64 / 50_000.0;
        assert!((frac - 0.2).abs() < 4.0 * (0.2f64 * 0.8 / 50_000.0).sqrt());
        let m2 = s.b.iter().map(|b| b * b).sum::<f64>() / 50_000.0;
        assert!((m2 - 1.0).abs() < 0.1);
    }
}
