//! Seeded simulation experiments along a regularization path: fits, order
//! parameter estimates, ground-truth overlaps, concordance metrics and the RS
//! prediction per path point, aggregated over repetitions.
//!
//! Repetitions run on a rayon pool whose size can be capped with the
//! `COXFIELD_THREADS` environment variable. Results are collected in
//! repetition order, so outputs do not depend on the thread count.

use std::path::{Path, PathBuf};

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::observables::{estimate_from_amp, estimate_from_cd, true_overlaps, OrderParameterEstimate};
use crate::prox::ElasticNetPenalty;
use crate::rs::{rs_path, OrderParameters, RsConfig, RsModel};
use crate::solvers::{reg_path, FitResult, SolverConfig, SolverKind};
use crate::survival::{harrell_c, rscv_c_index, SurvivalDataset};
use crate::synthgen::{derive_seed, generate, generate_with_signal, GeneratorSpec};

pub const THREADS_ENV: &str = "COXFIELD_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub l1_ratio: f64,
}

impl GridPoint {
    pub fn penalty(&self) -> Result<ElasticNetPenalty> {
        ElasticNetPenalty::from_alpha(self.alpha, self.l1_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub zeta: f64,
    pub p: usize,
    pub nu: f64,
    pub theta0: f64,
    /// Baseline hazard and censoring; its `zeta` is replaced by the field above.
    pub gen: GeneratorSpec,
    /// Penalties, fitted in the given order (decreasing strength).
    pub pen_grid: Vec<GridPoint>,
    pub solvers: Vec<SolverKind>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub pop_size: usize,
    pub output_dir: Option<PathBuf>,
    pub amp: SolverConfig,
    pub cd: SolverConfig,
    pub rs: RsConfig,
    /// Skip the RS solve (its columns are then empty).
    pub solve_rs: bool,
}

/// Default L1 weights for the desk-scale path, largest first.
pub const DEFAULT_ALPHAS: [f64; 8] = [1.6, 1.3, 1.1, 0.9, 0.75, 0.6, 0.5, 0.4];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk_scale()
    }
}

impl ExperimentConfig {
    pub fn desk_scale() -> Self {
        Self {
            zeta: 2.0,
            p: 500,
            nu: 0.005,
            theta0: 1.0,
            gen: GeneratorSpec::default(),
            pen_grid: Self::grid(&DEFAULT_ALPHAS, 0.75),
            solvers: vec![SolverKind::Amp, SolverKind::Cd],
            repetitions: 10,
            base_seed: 1,
            pop_size: 5000,
            output_dir: None,
            amp: SolverConfig::amp(),
            cd: SolverConfig {
                max_epochs: 1000,
                ..SolverConfig::cd()
            },
            rs: RsConfig::default(),
            solve_rs: true,
        }
    }

    pub fn full_scale() -> Self {
        Self {
            p: 2000,
            repetitions: 20,
            ..Self::desk_scale()
        }
    }

    pub fn grid(alphas: &[f64], l1_ratio: f64) -> Vec<GridPoint> {
        alphas.iter().map(|&alpha| GridPoint { alpha, l1_ratio }).collect()
    }

    pub fn generator(&self) -> GeneratorSpec {
        GeneratorSpec {
            zeta: self.zeta,
            ..self.gen
        }
    }

    pub fn validate(&self) -> Result<Vec<ElasticNetPenalty>> {
        let gen = self.generator();
        gen.validate()?;
        if gen.n_for(self.p) < 10 {
            return Err(CoxError::InvalidInput(format!(
                "need at least 10 subjects, got n = {} for p = {}",
                gen.n_for(self.p),
                self.p
            )));
        }
        if self.repetitions == 0 {
            return Err(CoxError::InvalidInput("repetitions must be at least 1".into()));
        }
        if self.pen_grid.is_empty() || self.solvers.is_empty() {
            return Err(CoxError::InvalidInput(
                "need at least one grid point and one solver".into(),
            ));
        }
        self.amp.validate()?;
        self.cd.validate()?;
        let pens = self
            .pen_grid
            .iter()
            .map(GridPoint::penalty)
            .collect::<Result<Vec<_>>>()?;
        if pens.windows(2).any(|w| w[1].rho() > w[0].rho()) {
            return Err(CoxError::InvalidInput(
                "pen_grid must be ordered by decreasing strength".into(),
            ));
        }
        Ok(pens)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// One fit at one path point of one repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub rep: usize,
    pub point: usize,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub solver: SolverKind,
    pub converged: bool,
    pub epochs: usize,
    pub active: usize,
    pub fit_error: Option<String>,
    pub true_w: Option<f64>,
    pub true_v: Option<f64>,
    pub estimate: Option<OrderParameterEstimate>,
    pub estimate_error: Option<String>,
    pub rscv: Option<f64>,
    pub test_c: Option<f64>,
}

/// AMP/CD agreement at one path point of one repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub rep: usize,
    pub point: usize,
    pub alpha: f64,
    pub rel_l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { count, mean, sd }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        self.sd / (self.count as f64).sqrt()
    }
}

/// Per-solver aggregates at one path point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub solver: SolverKind,
    pub converged: usize,
    pub true_w: MeanSd,
    pub true_v: MeanSd,
    /// `w, v, tau, w_hat, v_hat, tau_hat`
    pub estimate: [MeanSd; 6],
    /// Unclipped `A - w_n^2` over every estimate, flagged or not.
    pub raw_v_sq: MeanSd,
    pub rscv: MeanSd,
    pub test_c: MeanSd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    pub alpha: f64,
    pub l1_ratio: f64,
    pub rs: Option<OrderParameters>,
    pub rs_error: Option<String>,
    pub solvers: Vec<SolverSummary>,
    pub rel_l2_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n: usize,
    pub summary: Vec<PointSummary>,
    pub records: Vec<PointRecord>,
    pub agreement: Vec<AgreementRecord>,
}

pub const PARAM_NAMES: [&str; 6] = ["w", "v", "tau", "w_hat", "v_hat", "tau_hat"];

/// Rayon pool sized by `COXFIELD_THREADS` when set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if k > 0 {
            builder = builder.num_threads(k);
        }
    }
    builder
        .build()
        .map_err(|e| CoxError::InvalidInput(format!("cannot build thread pool: {e}")))
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

#[allow(clippy::too_many_arguments)]
fn point_record(
    rep: usize,
    point: usize,
    gp: &GridPoint,
    pen: &ElasticNetPenalty,
    kind: SolverKind,
    fit: &Result<FitResult>,
    train: &SurvivalDataset,
    test: &SurvivalDataset,
    beta0: &[f64],
) -> PointRecord {
    let mut rec = PointRecord {
        rep,
        point,
        alpha: gp.alpha,
        l1_ratio: gp.l1_ratio,
        solver: kind,
        converged: false,
        epochs: 0,
        active: 0,
        fit_error: None,
        true_w: None,
        true_v: None,
        estimate: None,
        estimate_error: None,
        rscv: None,
        test_c: None,
    };
    let fit = match fit {
        Ok(f) => f,
        Err(e) => {
            rec.fit_error = Some(e.to_string());
            return rec;
        }
    };
    rec.converged = fit.converged;
    rec.epochs = fit.epochs;
    rec.active = fit.active_count();
    if !fit.converged {
        return rec;
    }
    if let Ok((w, v)) = true_overlaps(&fit.beta_hat, beta0) {
        rec.true_w = Some(w);
        rec.true_v = Some(v);
    }
    let est = match kind {
        SolverKind::Amp => estimate_from_amp(train, fit),
        SolverKind::Cd => estimate_from_cd(train, fit, pen),
    };
    match est {
        Ok(e) => {
            rec.rscv = rscv_c_index(train, &fit.beta_hat, &fit.hazard, e.params.tau).ok();
            rec.estimate = Some(e);
        }
        Err(e) => rec.estimate_error = Some(e.to_string()),
    }
    let scores = test.linear_predictor(ArrayView1::from(&fit.beta_hat));
    rec.test_c = harrell_c(test.times(), test.events(), scores.as_slice().unwrap()).ok();
    rec
}

struct RepOutput {
    records: Vec<PointRecord>,
    agreement: Vec<AgreementRecord>,
}

fn run_repetition(cfg: &ExperimentConfig, pens: &[ElasticNetPenalty], rep: usize) -> Result<RepOutput> {
    let gen = cfg.generator();
    let seed = cfg.base_seed.wrapping_add(rep as u64);
    log::info!("repetition {rep} (seed {seed})");
    let inst = generate(cfg.p, cfg.nu, cfg.theta0, &gen, seed)?;
    let test = generate_with_signal(inst.beta0.clone(), &gen, derive_seed(seed, 7))?;
    let beta0 = inst.beta0.to_vec();

    let mut records = Vec::new();
    let mut fits: Vec<(SolverKind, Vec<Result<FitResult>>)> = Vec::new();
    for &kind in &cfg.solvers {
        let scfg = match kind {
            SolverKind::Amp => cfg.amp,
            SolverKind::Cd => cfg.cd,
        };
        let path = reg_path(&inst.data, pens, kind, &scfg)?;
        for (point, (gp, fit)) in cfg.pen_grid.iter().zip(&path).enumerate() {
            records.push(point_record(
                rep,
                point,
                gp,
                &pens[point],
                kind,
                fit,
                &inst.data,
                &test.data,
                &beta0,
            ));
        }
        fits.push((kind, path));
    }

    let mut agreement = Vec::new();
    let amp = fits.iter().find(|f| f.0 == SolverKind::Amp);
    let cd = fits.iter().find(|f| f.0 == SolverKind::Cd);
    if let (Some(amp), Some(cd)) = (amp, cd) {
        for (point, (a, c)) in amp.1.iter().zip(&cd.1).enumerate() {
            if let (Ok(a), Ok(c)) = (a, c) {
                if a.converged && c.converged {
                    agreement.push(AgreementRecord {
                        rep,
                        point,
                        alpha: cfg.pen_grid[point].alpha,
                        rel_l2: rel_l2(&a.beta_hat, &c.beta_hat),
                    });
                }
            }
        }
    }
    Ok(RepOutput { records, agreement })
}

fn summarize(
    cfg: &ExperimentConfig,
    records: &[PointRecord],
    agreement: &[AgreementRecord],
    rs: &[Result<OrderParameters>],
) -> Vec<PointSummary> {
    cfg.pen_grid
        .iter()
        .enumerate()
        .map(|(point, gp)| {
            let solvers = cfg
                .solvers
                .iter()
                .map(|&kind| {
                    let recs: Vec<&PointRecord> = records
                        .iter()
                        .filter(|r| r.point == point && r.solver == kind)
                        .collect();
                    let collect = |f: &dyn Fn(&PointRecord) -> Option<f64>| {
                        MeanSd::of(&recs.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
                    };
                    let estimate = std::array::from_fn(|k| {
                        collect(&|r: &PointRecord| {
                            r.estimate.as_ref().and_then(|e| {
                                let valid = match k {
                                    0 => e.w_valid,
                                    1 => e.v_valid,
                                    _ => true,
                                };
                                valid.then(|| e.params.as_array()[k])
                            })
                        })
                    });
                    SolverSummary {
                        solver: kind,
                        converged: recs.iter().filter(|r| r.converged).count(),
                        true_w: collect(&|r: &PointRecord| r.true_w),
                        true_v: collect(&|r: &PointRecord| r.true_v),
                        estimate,
                        raw_v_sq: collect(&|r: &PointRecord| r.estimate.as_ref().map(|e| e.raw_v_sq)),
                        rscv: collect(&|r: &PointRecord| r.rscv),
                        test_c: collect(&|r: &PointRecord| r.test_c),
                    }
                })
                .collect();
            let rel_l2_max = agreement
                .iter()
                .filter(|a| a.point == point)
                .map(|a| a.rel_l2)
                .reduce(f64::max);
            let (rs_params, rs_error) = match rs.get(point) {
                Some(Ok(op)) => (Some(*op), None),
                Some(Err(e)) => (None, Some(e.to_string())),
                None => (None, None),
            };
            PointSummary {
                point,
                alpha: gp.alpha,
                l1_ratio: gp.l1_ratio,
                rs: rs_params,
                rs_error,
                solvers,
                rel_l2_max,
            }
        })
        .collect()
}

/// Runs all repetitions and the RS solve, aggregates, and writes the CSV
/// tables when `output_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pens = cfg.validate()?;
    let pool = thread_pool()?;

    let rs: Vec<Result<OrderParameters>> = if cfg.solve_rs {
        let model = RsModel {
            gen: cfg.generator(),
            nu: cfg.nu,
            theta0: cfg.theta0,
        };
        let rs_cfg = RsConfig {
            pop_size: cfg.pop_size,
            seed: derive_seed(cfg.base_seed, 8),
            ..cfg.rs
        };
        rs_path(&model, &pens, &rs_cfg)?
            .into_iter()
            .map(|r| r.map(|s| s.params))
            .collect()
    } else {
        Vec::new()
    };

    let outputs: Vec<Result<RepOutput>> = pool.install(|| {
        (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(cfg, &pens, rep))
            .collect()
    });
    let mut records = Vec::new();
    let mut agreement = Vec::new();
    for out in outputs {
        let out = out?;
        records.extend(out.records);
        agreement.extend(out.agreement);
    }

    let summary = summarize(cfg, &records, &agreement, &rs);
    let report = ExperimentReport {
        config: cfg.clone(),
        n: cfg.generator().n_for(cfg.p),
        summary,
        records,
        agreement,
    };
    if let Some(dir) = &cfg.output_dir {
        write_tables(&report, dir)?;
    }
    Ok(report)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `summary.csv`, `records.csv` and `agreement.csv` into `dir`.
///
/// `summary.csv` has one row per grid point: `alpha, l1_ratio`, the RS
/// solution `rs_<param>`, then for every solver `<s>_converged`,
/// `<s>_true_{w,v}_{mean,sd}`, `<s>_est_<param>_{mean,sd}`,
/// `<s>_rscv_{mean,sd}`, `<s>_test_c_{mean,sd}`, and finally
/// `amp_cd_rel_l2_max`.
pub fn write_tables(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    let mut header: Vec<String> = vec!["alpha".into(), "l1_ratio".into()];
    header.extend(PARAM_NAMES.iter().map(|n| format!("rs_{n}")));
    for kind in &report.config.solvers {
        header.push(format!("{kind}_converged"));
        for q in ["true_w", "true_v"] {
            header.push(format!("{kind}_{q}_mean"));
            header.push(format!("{kind}_{q}_sd"));
        }
        for n in PARAM_NAMES {
            header.push(format!("{kind}_est_{n}_mean"));
            header.push(format!("{kind}_est_{n}_sd"));
        }
        for q in ["raw_v_sq", "rscv", "test_c"] {
            header.push(format!("{kind}_{q}_mean"));
            header.push(format!("{kind}_{q}_sd"));
        }
    }
    header.push("amp_cd_rel_l2_max".into());
    w.write_record(&header)?;
    for s in &report.summary {
        let mut row = vec![s.alpha.to_string(), s.l1_ratio.to_string()];
        match &s.rs {
            Some(op) => row.extend(op.as_array().iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        for sol in &s.solvers {
            row.push(sol.converged.to_string());
            let mut push = |m: &MeanSd| {
                row.push(m.mean.to_string());
                row.push(m.sd.to_string());
            };
            push(&sol.true_w);
            push(&sol.true_v);
            sol.estimate.iter().for_each(&mut push);
            push(&sol.raw_v_sq);
            push(&sol.rscv);
            push(&sol.test_c);
        }
        row.push(fmt_opt(s.rel_l2_max));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    let mut header: Vec<String> = [
        "rep",
        "point",
        "alpha",
        "l1_ratio",
        "solver",
        "converged",
        "epochs",
        "active",
        "true_w",
        "true_v",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(PARAM_NAMES.iter().map(|n| format!("est_{n}")));
    header.extend(
        ["w_valid", "v_valid", "rscv", "test_c", "error"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for r in &report.records {
        let mut row = vec![
            r.rep.to_string(),
            r.point.to_string(),
            r.alpha.to_string(),
            r.l1_ratio.to_string(),
            r.solver.to_string(),
            r.converged.to_string(),
            r.epochs.to_string(),
            r.active.to_string(),
            fmt_opt(r.true_w),
            fmt_opt(r.true_v),
        ];
        match &r.estimate {
            Some(e) => {
                row.extend(e.params.as_array().iter().map(|v| v.to_string()));
                row.push(e.w_valid.to_string());
                row.push(e.v_valid.to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        row.push(fmt_opt(r.rscv));
        row.push(fmt_opt(r.test_c));
        row.push(
            r.fit_error
                .clone()
                .or_else(|| r.estimate_error.clone())
                .unwrap_or_default(),
        );
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("agreement.csv"))?;
    w.write_record(["rep", "point", "alpha", "rel_l2"])?;
    for a in &report.agreement {
        w.write_record([
            a.rep.to_string(),
            a.point.to_string(),
            a.alpha.to_string(),
            a.rel_l2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            p: 60,
            nu: 0.05,
            pen_grid: ExperimentConfig::grid(&[0.8], 0.75),
            repetitions: 1,
            pop_size: 500,
            ..ExperimentConfig::desk_scale()
        }
    }

    #[test]
    fn single_point_single_repetition() {
        let report = run_experiment(&tiny()).unwrap();
        assert_eq!(report.summary.len(), 1);
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.summary[0].solvers.len(), 2);
    }

    #[test]
    fn tables_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.repetitions = 3;
        cfg.output_dir = Some(a.path().to_path_buf());
        run_experiment(&cfg).unwrap();
        cfg.output_dir = Some(b.path().to_path_buf());
        run_experiment(&cfg).unwrap();
        for f in ["summary.csv", "records.csv", "agreement.csv"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f} differs");
        }
        let text = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny();
        cfg.repetitions = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = tiny();
        cfg.p = 10;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = tiny();
        cfg.pen_grid = ExperimentConfig::grid(&[0.5, 0.8], 0.75);
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::full_scale();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"p": 300, "repetitions": 2}"#).unwrap();
        assert_eq!(partial.p, 300);
        assert_eq!(partial.zeta, 2.0);
    }
}
