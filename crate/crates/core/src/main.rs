use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use coxfield::experiment::{run_experiment, ExperimentConfig};
use coxfield::observables::{estimate_from_amp, estimate_from_cd, true_overlaps};
use coxfield::rs::{rs_path, RsConfig, RsModel};
use coxfield::solvers::{fit, reg_path, FitResult, SolverConfig, SolverKind};
use coxfield::synthgen::{generate, GeneratorSpec};
use coxfield::{ElasticNetPenalty, SurvivalDataset};

#[derive(Parser)]
#[command(
    name = "coxfield",
    version,
    about = "Elastic-net Cox regression in the proportional regime"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data set (CSV) and its true signal (JSON sidecar).
    Generate(GenerateArgs),
    /// Fit one penalty and write the fit as JSON.
    Fit(FitArgs),
    /// Fit a regularization path with warm starts.
    Path(PathArgs),
    /// Solve the replica-symmetric equations along an alpha grid.
    RsSolve(RsSolveArgs),
    /// Estimate the order parameters from a saved fit.
    Estimate(EstimateArgs),
    /// Run a full simulation experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
struct GenArgs {
    #[arg(long, default_value_t = 2.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0.005)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    theta0: f64,
    #[arg(long, default_value_t = -std::f64::consts::LN_2, allow_hyphen_values = true)]
    phi0: f64,
    #[arg(long, default_value_t = 2.0)]
    rho0: f64,
    #[arg(long, default_value_t = 1.0)]
    tau1: f64,
    #[arg(long, default_value_t = 2.0)]
    tau2: f64,
}

impl GenArgs {
    fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            phi0: self.phi0,
            rho0: self.rho0,
            tau1: self.tau1,
            tau2: self.tau2,
            zeta: self.zeta,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    p: usize,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for data.csv and beta0.json.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverKind::Amp)]
    solver: SolverKind,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let base = SolverConfig::for_solver(self.solver);
        SolverConfig {
            tol: self.tol.unwrap_or(base.tol),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            damping: self.damping.unwrap_or(base.damping),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Data CSV with header time,event,x1..xp.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75)]
    l1_ratio: f64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory for fit.json.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated L1 weights, largest first.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.75)]
    l1_ratio: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct RsSolveArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    alpha_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.75)]
    l1_ratio: f64,
    #[arg(long, default_value_t = 5000)]
    pop_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Fit JSON written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Optional true signal JSON written by `generate`.
    #[arg(long)]
    beta0: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; missing fields take the desk-scale defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from p = 2000 and 20 repetitions instead of the desk-scale defaults.
    #[arg(long, alias = "paper-scale")]
    full_scale: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Serialize, serde::Deserialize)]
struct FitFile {
    alpha: f64,
    l1_ratio: f64,
    fit: FitResult,
}

fn write_json(path: &Path, value: &impl Serialize) -> coxfield::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn fit_summary(f: &FitResult) -> serde_json::Value {
    json!({
        "solver": f.solver,
        "converged": f.converged,
        "epochs": f.epochs,
        "final_err": f.final_err,
        "active": f.active_count(),
        "tau": f.tau,
        "tau_hat": f.tau_hat,
    })
}

fn generate_cmd(a: &GenerateArgs) -> coxfield::Result<serde_json::Value> {
    let inst = generate(a.p, a.gen.nu, a.gen.theta0, &a.gen.spec(), a.seed)?;
    std::fs::create_dir_all(&a.output)?;
    let data_path = a.output.join("data.csv");
    let beta_path = a.output.join("beta0.json");
    inst.data.write_csv(&data_path)?;
    write_json(&beta_path, &inst.beta0.to_vec())?;
    Ok(json!({
        "n": inst.data.n(),
        "p": inst.data.p(),
        "events": inst.data.n_events(),
        "data": data_path,
        "beta0": beta_path,
    }))
}

fn fit_cmd(a: &FitArgs) -> coxfield::Result<serde_json::Value> {
    let data = SurvivalDataset::read_csv(&a.data)?;
    let pen = ElasticNetPenalty::from_alpha(a.alpha, a.l1_ratio)?;
    let f = fit(a.solver.solver, &data, &pen, None, &a.solver.config())?;
    std::fs::create_dir_all(&a.output)?;
    let path = a.output.join("fit.json");
    let summary = fit_summary(&f);
    write_json(
        &path,
        &FitFile {
            alpha: a.alpha,
            l1_ratio: a.l1_ratio,
            fit: f,
        },
    )?;
    Ok(json!({ "fit": summary, "output": path }))
}

fn path_cmd(a: &PathArgs) -> coxfield::Result<serde_json::Value> {
    let data = SurvivalDataset::read_csv(&a.data)?;
    let pens = a
        .alpha_grid
        .iter()
        .map(|&al| ElasticNetPenalty::from_alpha(al, a.l1_ratio))
        .collect::<coxfield::Result<Vec<_>>>()?;
    let results = reg_path(&data, &pens, a.solver.solver, &a.solver.config())?;
    std::fs::create_dir_all(&a.output)?;
    let path = a.output.join("path.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec![
        "alpha".to_string(),
        "converged".into(),
        "epochs".into(),
        "active".into(),
    ];
    header.extend((1..=data.p()).map(|k| format!("b{k}")));
    w.write_record(&header)?;
    let mut points = Vec::new();
    for (alpha, r) in a.alpha_grid.iter().zip(&results) {
        match r {
            Ok(f) => {
                let mut row = vec![
                    alpha.to_string(),
                    f.converged.to_string(),
                    f.epochs.to_string(),
                    f.active_count().to_string(),
                ];
                row.extend(f.beta_hat.iter().map(|b| b.to_string()));
                w.write_record(&row)?;
                points.push(json!({ "alpha": alpha, "fit": fit_summary(f) }));
            }
            Err(e) => {
                let mut row = vec![alpha.to_string(), "false".into(), "0".into(), String::new()];
                row.extend(std::iter::repeat_n(String::new(), data.p()));
                w.write_record(&row)?;
                points.push(json!({ "alpha": alpha, "error": e.to_string() }));
            }
        }
    }
    w.flush()?;
    Ok(json!({ "points": points, "output": path }))
}

fn rs_solve_cmd(a: &RsSolveArgs) -> coxfield::Result<serde_json::Value> {
    let model = RsModel {
        gen: a.gen.spec(),
        nu: a.gen.nu,
        theta0: a.gen.theta0,
    };
    let pens = a
        .alpha_grid
        .iter()
        .map(|&al| ElasticNetPenalty::from_alpha(al, a.l1_ratio))
        .collect::<coxfield::Result<Vec<_>>>()?;
    let cfg = RsConfig {
        pop_size: a.pop_size,
        seed: a.seed,
        ..RsConfig::default()
    };
    let results = rs_path(&model, &pens, &cfg)?;
    std::fs::create_dir_all(&a.output)?;
    let path = a.output.join("rs_path.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["alpha", "w", "v", "tau", "w_hat", "v_hat", "tau_hat", "converged"])?;
    let mut points = Vec::new();
    for (alpha, r) in a.alpha_grid.iter().zip(&results) {
        let mut row = vec![alpha.to_string()];
        match r {
            Ok(s) => {
                row.extend(s.params.as_array().iter().map(|v| v.to_string()));
                row.push("true".into());
                points.push(json!({ "alpha": alpha, "params": s.params, "iterations": s.iterations }));
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push("false".into());
                points.push(json!({ "alpha": alpha, "error": e.to_string() }));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(json!({ "points": points, "output": path }))
}

fn estimate_cmd(a: &EstimateArgs) -> coxfield::Result<serde_json::Value> {
    let data = SurvivalDataset::read_csv(&a.data)?;
    let mut file: FitFile = serde_json::from_str(&std::fs::read_to_string(&a.fit)?)?;
    file.fit.hazard = file.fit.hazard.clone().rebuilt();
    let pen = ElasticNetPenalty::from_alpha(file.alpha, file.l1_ratio)?;
    let amp = match file.fit.solver {
        SolverKind::Amp => Some(estimate_from_amp(&data, &file.fit)),
        SolverKind::Cd => None,
    };
    let cd = estimate_from_cd(&data, &file.fit, &pen);
    // a single failing estimator is reported; both failing is an error
    if amp.as_ref().is_none_or(|r| r.is_err()) {
        if let Err(e) = cd {
            return Err(e);
        }
    }
    let as_json = |r: &coxfield::Result<_>| match r {
        Ok(e) => serde_json::to_value(e).unwrap_or_default(),
        Err(err) => json!({ "error": err.to_string() }),
    };
    let mut out = json!({
        "amp": amp.as_ref().map(as_json),
        "cd": as_json(&cd),
    });
    if let Some(b) = &a.beta0 {
        let beta0: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(b)?)?;
        let (w, v) = true_overlaps(&file.fit.beta_hat, &beta0)?;
        out["true_overlaps"] = json!({ "w": w, "v": v });
    }
    std::fs::create_dir_all(&a.output)?;
    let path = a.output.join("estimate.json");
    write_json(&path, &out)?;
    out["output"] = json!(path);
    Ok(out)
}

fn experiment_cmd(a: &ExperimentArgs) -> coxfield::Result<serde_json::Value> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None if a.full_scale => ExperimentConfig::full_scale(),
        None => ExperimentConfig::desk_scale(),
    };
    if a.full_scale && a.config.is_some() {
        let scale = ExperimentConfig::full_scale();
        cfg.p = scale.p;
        cfg.repetitions = scale.repetitions;
    }
    if let Some(out) = &a.output {
        cfg.output_dir = Some(out.clone());
    }
    let report = run_experiment(&cfg)?;
    Ok(json!({
        "n": report.n,
        "p": cfg.p,
        "repetitions": cfg.repetitions,
        "summary": report.summary,
        "output_dir": cfg.output_dir,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Path(a) => path_cmd(a),
        Command::RsSolve(a) => rs_solve_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(v) => {
            // a closed pipe (e.g. `| head`) is not a failure of the command
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).unwrap_or_default()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stdout(), "{}", json!({ "error": e.to_string() }));
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
