#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use langevin_core::diagnostics::{noise_check, NoiseCheckConfig};
use langevin_core::harness::{simulate, strong_error_experiment, Coupling, ExperimentConfig, ReferenceMethod};
use langevin_core::models::ModelConfig;
use langevin_core::report::{slope_table, write_outputs, write_trajectory_csv};
use langevin_core::{Error, SchemeKind};

use args::{Cli, Command, ConvergenceArgs, ModelArgs, NoiseCheckArgs, ReferenceArg, SimulateArgs};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Convergence(a) => convergence(a, cli.threads),
        Command::Simulate(a) => run_simulation(a),
        Command::NoiseCheck(a) => run_noise_check(a, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

fn apply_model_args(mut cfg: ModelConfig, a: &ModelArgs) -> ModelConfig {
    if let Some(v) = &a.model {
        cfg.name = v.clone();
    }
    if a.gamma.is_some() {
        cfg.gamma = a.gamma;
    }
    if a.sigma.is_some() {
        cfg.sigma = a.sigma;
        cfg.kbt = None;
    }
    if a.kbt.is_some() {
        cfg.kbt = a.kbt;
        cfg.sigma = None;
    }
    if a.omega.is_some() {
        cfg.omega = a.omega;
    }
    if a.t_final.is_some() {
        cfg.t_final = a.t_final;
    }
    if a.x0.is_some() {
        cfg.x0 = a.x0.clone();
    }
    if a.v0.is_some() {
        cfg.v0 = a.v0.clone();
    }
    cfg
}

fn parse_schemes(names: &[String]) -> Result<Vec<SchemeKind>, Failure> {
    names.iter().map(|n| n.parse().map_err(Failure::from)).collect()
}

fn experiment_config(a: &ConvergenceArgs) -> Result<ExperimentConfig, Failure> {
    let base = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Some(
                serde_json::from_str::<ExperimentConfig>(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let model = apply_model_args(base.as_ref().map(|c| c.model.clone()).unwrap_or_default(), &a.model);
    if model.name.is_empty() {
        return Err(Failure::Config("--model is required (pendulum, lj7, harmonic)".into()));
    }
    let schemes = match (&a.schemes, &base) {
        (Some(names), _) => parse_schemes(names)?,
        (None, Some(b)) => b.schemes.clone(),
        (None, None) => SchemeKind::ALL.to_vec(),
    };
    let dts = a
        .dts
        .clone()
        .or_else(|| base.as_ref().map(|b| b.dts.clone()))
        .ok_or_else(|| Failure::Config("--dts is required".into()))?;
    let ref_dt = a
        .ref_dt
        .or_else(|| base.as_ref().map(|b| b.ref_dt))
        .ok_or_else(|| Failure::Config("--ref-dt is required".into()))?;
    let n_paths = a.paths.or_else(|| base.as_ref().map(|b| b.n_paths)).unwrap_or(100);
    let seed = a.seed.or_else(|| base.as_ref().map(|b| b.seed)).unwrap_or(0);
    let mut cfg = ExperimentConfig::new(model, schemes, dts, ref_dt, n_paths, seed);
    if let Some(b) = &base {
        cfg.coupling = b.coupling;
        cfg.reference = b.reference;
    }
    match a.reference {
        Some(ReferenceArg::Exact) => {
            cfg.reference = ReferenceMethod::Exact;
            cfg.coupling = Coupling::Legendre;
        }
        Some(ReferenceArg::Em) => {
            cfg.reference = ReferenceMethod::EulerMaruyama;
            cfg.coupling = Coupling::FinePath;
        }
        Some(ReferenceArg::Taylor3) => {
            cfg.reference = ReferenceMethod::Taylor3 { stride: 2 };
            cfg.coupling = Coupling::FinePath;
        }
        None => {}
    }
    if let Some(stride) = a.stride {
        match &mut cfg.reference {
            ReferenceMethod::Taylor3 { stride: s } => *s = stride,
            _ => return Err(Failure::Config("--stride only applies to the taylor3 reference".into())),
        }
    }
    Ok(cfg)
}

fn convergence(a: &ConvergenceArgs, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = experiment_config(a)?;
    let report = strong_error_experiment(&cfg, threads)?;
    let (csv, json) = write_outputs(&report, &a.out)?;
    print!("{}", slope_table(&report));
    for r in &report.results {
        for c in r.cells.iter().filter(|c| c.unreliable) {
            println!(
                "warning: {} at dt = {} excluded {} of {} paths; cell marked unreliable",
                r.scheme, c.dt, c.n_excluded, report.config.n_paths
            );
        }
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

#[derive(Serialize)]
struct SimulateEcho<'a> {
    model: &'a ModelConfig,
    scheme: SchemeKind,
    dt: f64,
    steps: usize,
    seed: u64,
}

fn run_simulation(a: &SimulateArgs) -> Result<(), Failure> {
    let model = apply_model_args(ModelConfig::default(), &a.model);
    if model.name.is_empty() {
        return Err(Failure::Config("--model is required (pendulum, lj7, harmonic)".into()));
    }
    let spec = model.build()?;
    let scheme: SchemeKind = a.scheme.parse()?;
    let steps = match a.steps {
        Some(s) => s,
        None => {
            let r = spec.t_final / a.dt;
            if !(a.dt > 0.0) || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                return Err(Failure::Config(format!(
                    "final time {} is not a whole number of steps of {}",
                    spec.t_final, a.dt
                )));
            }
            r.round() as usize
        }
    };
    let states = simulate(&spec.model, scheme, &spec.initial, a.dt, steps, a.seed)?;
    let energy: Option<Vec<f64>> = spec.model.energy(&spec.initial).map(|e0| {
        states
            .iter()
            .map(|s| spec.model.energy(s).map_or(f64::NAN, |e| e - e0))
            .collect()
    });
    let echo = SimulateEcho {
        model: &spec.config,
        scheme,
        dt: a.dt,
        steps,
        seed: a.seed,
    };
    let mut buf = Vec::new();
    write_trajectory_csv(&echo, a.dt, &states, energy.as_deref(), &mut buf)?;
    match &a.out {
        Some(path) => fs::write(path, buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn run_noise_check(a: &NoiseCheckArgs, threads: Option<usize>) -> Result<(), Failure> {
    let cfg = NoiseCheckConfig {
        dts: a.dts.clone(),
        samples: a.samples,
        seed: a.seed,
        quadrature_ratio: a.ratio,
        perturb: a.perturb,
    };
    let report = noise_check(&cfg, threads)?;
    println!("{:<11} {:>8} {:>14}", "mode", "dt", "max |z| (SE)");
    for e in &report.entries {
        let mode = serde_json::to_value(e.mode).map_err(Error::from)?;
        println!(
            "{:<11} {:>8} {:>14.3}",
            mode.as_str().unwrap_or_default(),
            e.dt,
            e.max_deviation
        );
    }
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_vec_pretty(&report).map_err(Error::from)?)?;
    }
    if report.passes(a.threshold) {
        println!("PASS: max deviation {:.3} SE <= {}", report.max_deviation, a.threshold);
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "max deviation {:.3} SE exceeds {}",
            report.max_deviation, a.threshold
        )))
    }
}
