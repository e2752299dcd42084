#![allow(dead_code)]

use std::io::Write;

use coxfield::synthgen::{sample_design, sample_times, GeneratorSpec};
use coxfield::{ElasticNetPenalty, SurvivalDataset};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to stderr so the line survives the test harness capture.
pub fn report(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Negative log partial likelihood by explicit double sums over risk sets
/// `{j : T_j >= T_i}`, without the `1/n` normalization constant.
pub fn ppl_direct(x: &Array2<f64>, times: &[f64], events: &[bool], beta: &[f64]) -> f64 {
    let eta = x.dot(&Array1::from(beta.to_vec()));
    let mut total = 0.0;
    for i in (0..times.len()).filter(|&i| events[i]) {
        let risk: f64 = (0..times.len())
            .filter(|&j| times[j] >= times[i])
            .map(|j| eta[j].exp())
            .sum();
        total += risk.ln() - eta[i];
    }
    total
}

pub fn ppl_gradient_direct(x: &Array2<f64>, times: &[f64], events: &[bool], beta: &[f64]) -> Vec<f64> {
    let p = x.ncols();
    let eta = x.dot(&Array1::from(beta.to_vec()));
    let mut grad = vec![0.0; p];
    for i in (0..times.len()).filter(|&i| events[i]) {
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        for j in (0..times.len()).filter(|&j| times[j] >= times[i]) {
            let e = eta[j].exp();
            s0 += e;
            for k in 0..p {
                s1[k] += x[[j, k]] * e;
            }
        }
        for k in 0..p {
            grad[k] += s1[k] / s0 - x[[i, k]];
        }
    }
    grad
}

fn objective(data: &SurvivalDataset, beta: &[f64], pen: &ElasticNetPenalty) -> f64 {
    ppl_direct(data.design(), data.times(), data.events(), beta) + pen.value(beta)
}

fn prox_step(beta: &[f64], grad: &[f64], step: f64, pen: &ElasticNetPenalty) -> Vec<f64> {
    beta.iter()
        .zip(grad)
        .map(|(b, g)| {
            let u = b - step * g;
            let a = step * pen.alpha;
            u.signum() * (u.abs() - a).max(0.0) / (1.0 + step * pen.eta)
        })
        .collect()
}

/// Proximal-gradient descent with backtracking on the penalized partial
/// likelihood, iterated until the step stalls at machine precision.
pub fn brute_force_minimizer(data: &SurvivalDataset, pen: &ElasticNetPenalty) -> Vec<f64> {
    let (x, t, d) = (data.design(), data.times(), data.events());
    let mut beta = vec![0.0; data.p()];
    let mut step = 1.0;
    for _ in 0..200_000 {
        let f0 = ppl_direct(x, t, d, &beta);
        let grad = ppl_gradient_direct(x, t, d, &beta);
        let next = loop {
            let cand = prox_step(&beta, &grad, step, pen);
            let diff: Vec<f64> = cand.iter().zip(&beta).map(|(c, b)| c - b).collect();
            let lin: f64 = diff.iter().zip(&grad).map(|(a, g)| a * g).sum();
            let quad: f64 = diff.iter().map(|a| a * a).sum::<f64>() / (2.0 * step);
            if ppl_direct(x, t, d, &cand) <= f0 + lin + quad + 1e-15 * f0.abs() || step < 1e-12 {
                break cand;
            }
            step *= 0.5;
        };
        let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next;
        if change <= 1e-14 * step.max(1.0) {
            break;
        }
        step *= 1.2;
    }
    debug_assert!(objective(data, &beta, pen).is_finite());
    beta
}

/// Random instance with `p <= 3`, `n <= 30` and a moderately strong signal.
pub fn tiny_instance(seed: u64) -> (SurvivalDataset, ElasticNetPenalty) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=3);
    let n = rng.random_range(12..=30);
    let x = sample_design(n, p, rng.random());
    // sample_design scales by 1/sqrt(p); rescale to unit-variance covariates
    let x = x * (p as f64).sqrt();
    let beta0: Array1<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eta = x.dot(&beta0);
    let (times, events) = sample_times(eta.view(), &GeneratorSpec::default(), rng.random());
    let data = SurvivalDataset::new(times, events, x).expect("valid tiny dataset");
    let alpha = rng.random_range(0.2..3.0);
    let l1_ratio = rng.random_range(0.3..=1.0);
    (data, ElasticNetPenalty::from_alpha(alpha, l1_ratio).unwrap())
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}
