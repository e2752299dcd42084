mod common;

use common::{brute_force_minimizer, linf, ppl_direct, ppl_gradient_direct, rel_l2, tiny_instance};
use coxfield::solvers::{fit, kkt_residual, partial_likelihood_gradient, reg_path, SolverConfig, SolverKind};
use coxfield::survival::penalized_partial_likelihood;
use coxfield::synthgen::{generate, GeneratorSpec};
use coxfield::ElasticNetPenalty;
use proptest::prelude::*;

#[test]
fn gradient_matches_double_sum() {
    for seed in 0..10 {
        let (data, pen) = tiny_instance(seed);
        let beta: Vec<f64> = (0..data.p()).map(|k| 0.3 * k as f64 - 0.2).collect();
        let fast = partial_likelihood_gradient(&data, &beta);
        let slow = ppl_gradient_direct(data.design(), data.times(), data.events(), &beta);
        assert!(linf(&fast, &slow) <= 1e-12 * slow.iter().fold(1.0_f64, |m, g| m.max(g.abs())));

        // the library objective differs from the double sum by a β-free constant
        let offset = |b: &[f64]| {
            penalized_partial_likelihood(&data, b, &pen)
                - pen.value(b)
                - ppl_direct(data.design(), data.times(), data.events(), b)
        };
        let zero = vec![0.0; data.p()];
        assert!((offset(&beta) - offset(&zero)).abs() <= 1e-10);
    }
}

#[test]
fn both_solvers_reach_the_brute_force_minimizer() {
    let cfg = SolverConfig {
        tol: 1e-12,
        max_epochs: 100_000,
        damping: 0.5,
    };
    for seed in 100..110 {
        let (data, pen) = tiny_instance(seed);
        let oracle = brute_force_minimizer(&data, &pen);
        let amp = fit(SolverKind::Amp, &data, &pen, None, &cfg).unwrap();
        let cd = fit(SolverKind::Cd, &data, &pen, None, &SolverConfig { damping: 1.0, ..cfg }).unwrap();
        assert!(amp.converged && cd.converged);
        assert!(
            linf(&amp.beta_hat, &oracle) <= 1e-6,
            "amp {:?} vs {oracle:?}",
            amp.beta_hat
        );
        assert!(
            linf(&cd.beta_hat, &oracle) <= 1e-6,
            "cd {:?} vs {oracle:?}",
            cd.beta_hat
        );
    }
}

#[test]
fn warm_started_path_matches_cold_fits() {
    let inst = generate(300, 0.05, 1.0, &GeneratorSpec::default(), 9).unwrap();
    let pens: Vec<_> = [1.5, 1.0, 0.7]
        .iter()
        .map(|a| ElasticNetPenalty::from_alpha(*a, 0.75).unwrap())
        .collect();
    let cfg = SolverConfig::cd();
    let path = reg_path(&inst.data, &pens, SolverKind::Cd, &cfg).unwrap();
    for (pen, warm) in pens.iter().zip(&path) {
        let warm = warm.as_ref().unwrap();
        let cold = fit(SolverKind::Cd, &inst.data, pen, None, &cfg).unwrap();
        assert!(warm.converged && cold.converged);
        assert!(rel_l2(&warm.beta_hat, &cold.beta_hat) <= 1e-6);
    }
    let unsorted = [pens[2], pens[0]];
    assert!(reg_path(&inst.data, &unsorted, SolverKind::Cd, &cfg).is_err());
}

#[test]
fn invalid_solver_configs_are_rejected() {
    let inst = generate(50, 0.1, 1.0, &GeneratorSpec::default(), 1).unwrap();
    let pen = ElasticNetPenalty::from_alpha(1.0, 0.75).unwrap();
    for cfg in [
        SolverConfig {
            tol: 0.0,
            ..SolverConfig::amp()
        },
        SolverConfig {
            damping: 0.0,
            ..SolverConfig::amp()
        },
        SolverConfig {
            damping: 1.5,
            ..SolverConfig::amp()
        },
    ] {
        assert!(fit(SolverKind::Amp, &inst.data, &pen, None, &cfg).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cd_fits_satisfy_kkt(seed in 0u64..1000, alpha in 0.4..2.0_f64, l1 in 0.3..=1.0_f64) {
        let inst = generate(120, 0.05, 1.0, &GeneratorSpec::default(), seed).unwrap();
        let pen = ElasticNetPenalty::from_alpha(alpha, l1).unwrap();
        let f = fit(SolverKind::Cd, &inst.data, &pen, None, &SolverConfig::cd()).unwrap();
        prop_assume!(f.converged);
        prop_assert!(kkt_residual(&inst.data, &f.beta_hat, &pen) <= 1e-6);
    }

    #[test]
    fn amp_fixed_point_identity(seed in 0u64..1000, alpha in 0.5..2.0_f64) {
        let inst = generate(120, 0.05, 1.0, &GeneratorSpec::default(), seed).unwrap();
        let pen = ElasticNetPenalty::from_alpha(alpha, 0.75).unwrap();
        let cfg = SolverConfig::amp();
        let f = fit(SolverKind::Amp, &inst.data, &pen, None, &cfg).unwrap();
        prop_assume!(f.converged);
        prop_assert!(f.final_err <= cfg.tol);
        prop_assert!(f.amp_fixed_point_residual(&inst.data).unwrap() <= 10.0 * cfg.tol);
        prop_assert!(f.tau.unwrap() > 0.0 && f.tau_hat.unwrap() > 0.0);
    }
}
