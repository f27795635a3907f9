//! Coupled strong-error experiments.
//!
//! Each realization `p` owns one Brownian path generated from
//! `RngStream::new(seed, p).derived_seed()`. The reference solution and every
//! `(scheme, dt)` pair consume increments extracted from that same path, so
//! `E|X(T) − Y(T)|` is a pathwise error. Realizations run in parallel and are
//! folded in index order, which keeps reports bit-identical across thread
//! counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_exp, Matrix, Vector};
use crate::model::{LangevinModel, PhaseState};
use crate::models::{LinearSde, ModelConfig, ModelSpec};
use crate::noise::{
    generate_path, BrownianPath, IncrementSampler, LegendreBasis, LegendrePath, OuSampler, PathQuadrature, RngStream,
    StepIncrements, StepNoise, WindowFunctional,
};
use crate::par::map_indexed;
use crate::scheme::{NoiseNeeds, SchemeKind, Stepper};
use crate::taylor::{taylor_step, TaylorOrder};

/// Fine-to-coarse ratio below which path quadrature is not trusted.
pub const MIN_QUADRATURE_RATIO: usize = 16;

/// Cells with more than this fraction of excluded paths are not averaged.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Fine Brownian path on the `ref_dt` grid with Simpson quadrature.
    FinePath,
    /// Legendre moments on base steps of length `ref_dt`; exact integrals.
    Legendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum ReferenceMethod {
    /// Euler–Maruyama on every fine step.
    EulerMaruyama,
    /// Order-3 Itô–Taylor on windows of `stride` fine steps.
    Taylor3 { stride: usize },
    /// Closed-form transition of a linear model (Legendre coupling only).
    Exact,
}

fn default_coupling() -> Coupling {
    Coupling::FinePath
}

fn default_reference() -> ReferenceMethod {
    ReferenceMethod::Taylor3 { stride: 2 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub schemes: Vec<SchemeKind>,
    pub dts: Vec<f64>,
    pub ref_dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    #[serde(default = "default_reference")]
    pub reference: ReferenceMethod,
}

impl ExperimentConfig {
    /// Fine-path coupling with an order-3 reference on pairs of fine steps.
    pub fn new(
        model: ModelConfig,
        schemes: Vec<SchemeKind>,
        dts: Vec<f64>,
        ref_dt: f64,
        n_paths: usize,
        seed: u64,
    ) -> Self {
        ExperimentConfig {
            model,
            schemes,
            dts,
            ref_dt,
            n_paths,
            seed,
            coupling: default_coupling(),
            reference: default_reference(),
        }
    }

    /// Check the configuration and build the model; the returned config has
    /// every model default filled in.
    pub fn resolve(&self) -> Result<(ExperimentConfig, ModelSpec)> {
        let spec = self.model.build()?;
        let mut cfg = self.clone();
        cfg.model = spec.config.clone();
        let t = spec.t_final;
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("at least one path is required".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("no schemes selected".into()));
        }
        if self.dts.is_empty() {
            return Err(Error::InvalidArgument("no step sizes given".into()));
        }
        for (i, a) in self.dts.iter().enumerate() {
            if self.dts[..i].iter().any(|b| (a - b).abs() <= 1e-12 * a.abs()) {
                return Err(Error::InvalidArgument(format!("step size {a} listed twice")));
            }
        }
        if !(self.ref_dt > 0.0) || !self.ref_dt.is_finite() {
            return Err(Error::InvalidArgument("ref_dt must be positive".into()));
        }
        for &dt in &self.dts {
            crate::noise::grid_count(t, dt, "coarse grid")?;
        }
        crate::noise::grid_count(t, self.ref_dt, "reference grid")?;
        match self.coupling {
            Coupling::FinePath => {
                for &dt in &self.dts {
                    let r = crate::noise::panels_per_step(self.ref_dt, dt)?;
                    if r < MIN_QUADRATURE_RATIO {
                        return Err(Error::InvalidArgument(format!(
                            "dt = {dt} is only {r} fine steps; path quadrature needs at least {MIN_QUADRATURE_RATIO}"
                        )));
                    }
                }
                match self.reference {
                    ReferenceMethod::EulerMaruyama => {}
                    ReferenceMethod::Taylor3 { stride } => {
                        if stride < 2 || stride % 2 != 0 {
                            return Err(Error::InvalidArgument(format!(
                                "reference stride must be even and at least 2, got {stride}"
                            )));
                        }
                        crate::noise::grid_count(t, stride as f64 * self.ref_dt, "reference grid")?;
                    }
                    ReferenceMethod::Exact => {
                        return Err(Error::InvalidArgument(
                            "the exact reference needs Legendre coupling".into(),
                        ))
                    }
                }
            }
            Coupling::Legendre => {
                if self.reference != ReferenceMethod::Exact {
                    return Err(Error::InvalidArgument(
                        "Legendre coupling is only used with the exact reference".into(),
                    ));
                }
                LinearSde::from_model(&spec.model)?;
                for &dt in &self.dts {
                    let ratio = dt / self.ref_dt;
                    if !(ratio.round() >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio {
                        return Err(Error::InvalidArgument(format!(
                            "dt = {dt} is not a multiple of the base step {}",
                            self.ref_dt
                        )));
                    }
                }
            }
        }
        Ok((cfg, spec))
    }
}

/// Euler–Maruyama on the path's own grid, using its exact increments.
pub fn run_reference(model: &LangevinModel, initial: &PhaseState, path: &BrownianPath) -> Result<PhaseState> {
    let mut s = initial.clone();
    for i in 0..path.steps() {
        let inc = StepIncrements::wiener(path.delta(), path.fine_increment(i));
        s = taylor_step(model, &s, &inc, TaylorOrder::One)?;
    }
    Ok(s)
}

/// Order-3 Itô–Taylor over windows of `stride` fine steps of the path.
pub fn run_reference_taylor3(
    model: &LangevinModel,
    initial: &PhaseState,
    path: &BrownianPath,
    stride: usize,
) -> Result<PhaseState> {
    let h = stride as f64 * path.delta();
    let quad = PathQuadrature::new(path.delta(), h)?;
    let mut s = initial.clone();
    for k in 0..quad.steps_in(path) {
        s = taylor_step(model, &s, &quad.increments(path, k)?, TaylorOrder::Three)?;
    }
    Ok(s)
}

/// Run `scheme` at step `dt` on increments extracted from `path`.
pub fn run_scheme_coupled(
    model: &LangevinModel,
    scheme: SchemeKind,
    initial: &PhaseState,
    path: &BrownianPath,
    dt: f64,
) -> Result<PhaseState> {
    let needs = scheme.needs();
    if !(needs.first || needs.second || needs.ou) {
        return Stepper::new(model, scheme, dt)?.run(initial, &wiener_noise(path, dt)?);
    }
    let quad = if needs.ou {
        PathQuadrature::with_ou(path.delta(), dt, &model.gamma, &model.sigma)?
    } else {
        PathQuadrature::new(path.delta(), dt)?
    };
    let stepper = Stepper::new(model, scheme, dt)?;
    let noises = fine_path_noise(&quad, path, scheme.needs().ou)?;
    stepper.run(initial, &noises)
}

/// Plain Wiener increments over windows of `dt`; any whole number of fine
/// steps per window is allowed.
fn wiener_noise(path: &BrownianPath, dt: f64) -> Result<Vec<StepNoise>> {
    let ratio = dt / path.delta();
    let r = ratio.round();
    if !(r >= 1.0) || (ratio - r).abs() > 1e-9 * r || !path.steps().is_multiple_of(r as usize) {
        return Err(Error::Misaligned {
            start: 0.0,
            end: dt,
            reason: "step does not tile the fine grid",
        });
    }
    let r = r as usize;
    Ok((0..path.steps() / r)
        .map(|k| {
            let a = Vector::from_column_slice(path.at(k * r));
            let b = Vector::from_column_slice(path.at((k + 1) * r));
            StepNoise::new(StepIncrements::wiener(dt, b - a))
        })
        .collect())
}

fn fine_path_noise(quad: &PathQuadrature, path: &BrownianPath, ou: bool) -> Result<Vec<StepNoise>> {
    (0..quad.steps_in(path))
        .map(|k| {
            let inc = quad.increments(path, k)?;
            Ok(if ou {
                let pair = quad.ou(path, k, &inc.dw)?;
                StepNoise::with_ou(inc, pair)
            } else {
                StepNoise::new(inc)
            })
        })
        .collect()
}

fn legendre_noise(table: &WindowFunctional, path: &LegendrePath, ou: bool) -> Result<Vec<StepNoise>> {
    (0..table.windows_in(path))
        .map(|w| {
            let inc = table.increments(path, w)?;
            Ok(if ou {
                StepNoise::with_ou(inc, table.ou(path, w)?)
            } else {
                StepNoise::new(inc)
            })
        })
        .collect()
}

/// Exact transition of a linear model driven by a Legendre path.
#[derive(Debug, Clone)]
pub struct ExactFlow {
    propagator: Matrix,
    kernel: Vec<Matrix>,
    h: f64,
    order: usize,
}

impl ExactFlow {
    pub fn new(lin: &LinearSde, h: f64, order: usize) -> Result<Self> {
        let basis = LegendreBasis::new(order);
        let kernel = basis.matrix_coefficients(|u| Ok(mat_exp(&(&lin.drift * (h * (1.0 - u))))? * &lin.diffusion))?;
        Ok(ExactFlow {
            propagator: lin.mean_propagator(h)?,
            kernel,
            h,
            order,
        })
    }

    /// Legendre order sufficient for the kernels of `lin` and the friction
    /// at base step `h`.
    pub fn order_for(lin: &LinearSde, gamma: &Matrix, h: f64) -> usize {
        let norm1 = |m: &Matrix| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
        LegendreBasis::for_rate(h, norm1(&lin.drift).max(norm1(gamma))).order()
    }

    pub fn run(&self, initial: &PhaseState, path: &LegendrePath) -> Result<PhaseState> {
        if path.order() != self.order || (path.base_step() - self.h).abs() > 1e-12 * self.h {
            return Err(Error::InvalidArgument(
                "exact flow built for a different Legendre path".into(),
            ));
        }
        let mut z = LinearSde::stack(initial);
        for i in 0..path.steps() {
            z = &self.propagator * z + path.project(i, &self.kernel);
        }
        LinearSde::unstack(&z).checked()
    }
}

/// Ordinary least-squares fit of `log₂ error` against `log₂ dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    /// `None` when there are no residual degrees of freedom.
    pub stderr: Option<f64>,
    pub intercept: f64,
}

pub fn fit_order(dts: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if dts.len() != errors.len() {
        return Err(Error::InvalidArgument("dts and errors differ in length".into()));
    }
    if dts.len() < 3 {
        return Err(Error::InvalidArgument(
            "an order fit needs at least three points".into(),
        ));
    }
    if dts.iter().chain(errors).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("step sizes and errors must be positive".into()));
    }
    let x: Vec<f64> = dts.iter().map(|v| v.log2()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.log2()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return Err(Error::InvalidArgument("step sizes are degenerate".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (x.len() > 2).then(|| (ssr / (n - 2.0) / sxx).sqrt());
    Ok(OrderFit {
        slope,
        stderr,
        intercept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dt: f64,
    /// `None` when the cell is unreliable.
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    pub mean_x_error: Option<f64>,
    pub mean_v_error: Option<f64>,
    pub n_paths_used: usize,
    pub n_excluded: usize,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: SchemeKind,
    pub dts: Vec<f64>,
    pub errors: Vec<Option<f64>>,
    pub stderrs: Vec<Option<f64>>,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub path: usize,
    /// `None` when the reference itself failed.
    pub scheme: Option<SchemeKind>,
    pub dt: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub path_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub results: Vec<SchemeResult>,
    pub reference_excluded: usize,
    pub exclusions: Vec<Exclusion>,
    pub provenance: Provenance,
}

impl ConvergenceReport {
    pub fn result(&self, scheme: SchemeKind) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }
}

enum Tables {
    Fine(PathQuadrature),
    Legendre(WindowFunctional),
}

enum Reference {
    EulerMaruyama,
    Taylor3(PathQuadrature),
    Exact(ExactFlow),
}

struct Plan {
    model: LangevinModel,
    initial: PhaseState,
    t_final: f64,
    ref_dt: f64,
    coupling: Coupling,
    legendre_order: usize,
    reference: Reference,
    /// per dt: noise tables, whether OU integrals are needed, one stepper per scheme
    levels: Vec<(Tables, bool, Vec<Stepper>)>,
}

type CellOutcome = std::result::Result<[f64; 3], String>;

struct PathOutcome {
    seed: u64,
    reference: std::result::Result<(), String>,
    cells: Vec<Vec<CellOutcome>>,
}

impl Plan {
    fn new(cfg: &ExperimentConfig, spec: &ModelSpec) -> Result<Self> {
        let model = spec.model.clone();
        let needs = cfg
            .schemes
            .iter()
            .fold(NoiseNeeds::default(), |a, s| a.union(s.needs()));
        let (legendre_order, reference) = match cfg.reference {
            ReferenceMethod::EulerMaruyama => (0, Reference::EulerMaruyama),
            ReferenceMethod::Taylor3 { stride } => (
                0,
                Reference::Taylor3(PathQuadrature::new(cfg.ref_dt, stride as f64 * cfg.ref_dt)?),
            ),
            ReferenceMethod::Exact => {
                let lin = LinearSde::from_model(&model)?;
                let order = ExactFlow::order_for(&lin, &model.gamma, cfg.ref_dt);
                (order, Reference::Exact(ExactFlow::new(&lin, cfg.ref_dt, order)?))
            }
        };
        let mut levels = Vec::with_capacity(cfg.dts.len());
        for &dt in &cfg.dts {
            let tables = match cfg.coupling {
                Coupling::FinePath if needs.ou => {
                    Tables::Fine(PathQuadrature::with_ou(cfg.ref_dt, dt, &model.gamma, &model.sigma)?)
                }
                Coupling::FinePath => Tables::Fine(PathQuadrature::new(cfg.ref_dt, dt)?),
                Coupling::Legendre if needs.ou => Tables::Legendre(WindowFunctional::with_ou(
                    cfg.ref_dt,
                    legendre_order,
                    dt,
                    &model.gamma,
                    &model.sigma,
                )?),
                Coupling::Legendre => Tables::Legendre(WindowFunctional::new(cfg.ref_dt, legendre_order, dt)?),
            };
            let steppers = cfg
                .schemes
                .iter()
                .map(|&k| Stepper::new(&model, k, dt))
                .collect::<Result<Vec<_>>>()?;
            levels.push((tables, needs.ou, steppers));
        }
        Ok(Plan {
            model,
            initial: spec.initial.clone(),
            t_final: spec.t_final,
            ref_dt: cfg.ref_dt,
            coupling: cfg.coupling,
            legendre_order,
            reference,
            levels,
        })
    }

    fn run_path(&self, seed: u64) -> Result<PathOutcome> {
        let n = self.model.dim();
        let numerical = |r: Result<PhaseState>| -> Result<std::result::Result<PhaseState, String>> {
            match r {
                Ok(s) => Ok(Ok(s)),
                Err(e) if e.is_numerical() => Ok(Err(e.to_string())),
                Err(e) => Err(e),
            }
        };
        enum Source {
            Fine(BrownianPath),
            Legendre(LegendrePath),
        }
        let source = match self.coupling {
            Coupling::FinePath => Source::Fine(generate_path(n, self.t_final, self.ref_dt, seed)?),
            Coupling::Legendre => Source::Legendre(LegendrePath::generate(
                n,
                self.t_final,
                self.ref_dt,
                self.legendre_order,
                seed,
            )?),
        };
        let reference = match (&self.reference, &source) {
            (Reference::EulerMaruyama, Source::Fine(p)) => numerical(run_reference(&self.model, &self.initial, p))?,
            (Reference::Taylor3(quad), Source::Fine(p)) => {
                let run = || -> Result<PhaseState> {
                    let mut s = self.initial.clone();
                    for k in 0..quad.steps_in(p) {
                        s = taylor_step(&self.model, &s, &quad.increments(p, k)?, TaylorOrder::Three)?;
                    }
                    Ok(s)
                };
                numerical(run())?
            }
            (Reference::Exact(flow), Source::Legendre(p)) => numerical(flow.run(&self.initial, p))?,
            _ => {
                return Err(Error::InvalidArgument(
                    "reference method does not match the coupling".into(),
                ))
            }
        };
        let reference = match reference {
            Ok(s) => s,
            Err(reason) => {
                return Ok(PathOutcome {
                    seed,
                    reference: Err(reason),
                    cells: Vec::new(),
                })
            }
        };
        let mut cells = Vec::with_capacity(self.levels.len());
        for (tables, ou, steppers) in &self.levels {
            let noises = match (tables, &source) {
                (Tables::Fine(q), Source::Fine(p)) => fine_path_noise(q, p, *ou)?,
                (Tables::Legendre(w), Source::Legendre(p)) => legendre_noise(w, p, *ou)?,
                _ => unreachable!("tables follow the coupling"),
            };
            let mut row = Vec::with_capacity(steppers.len());
            for st in steppers {
                row.push(numerical(st.run(&self.initial, &noises))?.map(|y| {
                    let dx = (&y.x - &reference.x).norm();
                    let dv = (&y.v - &reference.v).norm();
                    [(dx * dx + dv * dv).sqrt(), dx, dv]
                }));
            }
            cells.push(row);
        }
        Ok(PathOutcome {
            seed,
            reference: Ok(()),
            cells,
        })
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    (mean, se)
}

/// Run the coupled experiment on `threads` workers (rayon's default pool
/// when `None`).
pub fn strong_error_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ConvergenceReport> {
    let (cfg, spec) = cfg.resolve()?;
    let plan = Plan::new(&cfg, &spec)?;
    let outcomes = map_indexed(cfg.n_paths, threads, |p| {
        plan.run_path(RngStream::new(cfg.seed, p as u64).derived_seed())
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut exclusions = Vec::new();
    let mut reference_excluded = 0;
    for (p, o) in outcomes.iter().enumerate() {
        if let Err(reason) = &o.reference {
            reference_excluded += 1;
            exclusions.push(Exclusion {
                path: p,
                scheme: None,
                dt: None,
                reason: reason.clone(),
            });
        }
    }

    let mut results = Vec::with_capacity(cfg.schemes.len());
    for (si, &scheme) in cfg.schemes.iter().enumerate() {
        let mut cells = Vec::with_capacity(cfg.dts.len());
        for (di, &dt) in cfg.dts.iter().enumerate() {
            let mut errs = Vec::new();
            let mut xs = Vec::new();
            let mut vs = Vec::new();
            let mut excluded = reference_excluded;
            for (p, o) in outcomes.iter().enumerate() {
                if o.reference.is_err() {
                    continue;
                }
                match &o.cells[di][si] {
                    Ok([e, x, v]) => {
                        errs.push(*e);
                        xs.push(*x);
                        vs.push(*v);
                    }
                    Err(reason) => {
                        excluded += 1;
                        exclusions.push(Exclusion {
                            path: p,
                            scheme: Some(scheme),
                            dt: Some(dt),
                            reason: reason.clone(),
                        });
                    }
                }
            }
            if errs.is_empty() {
                return Err(Error::AllPathsExcluded {
                    scheme: scheme.to_string(),
                    dt,
                });
            }
            let unreliable = excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.n_paths as f64;
            let (mean, se) = mean_and_stderr(&errs);
            let keep = |v: f64| (!unreliable).then_some(v);
            cells.push(CellResult {
                dt,
                mean_error: keep(mean),
                std_error: se.filter(|_| !unreliable),
                mean_x_error: keep(mean_and_stderr(&xs).0),
                mean_v_error: keep(mean_and_stderr(&vs).0),
                n_paths_used: errs.len(),
                n_excluded: excluded,
                unreliable,
            });
        }
        let (fit_dts, fit_errs): (Vec<f64>, Vec<f64>) =
            cells.iter().filter_map(|c| c.mean_error.map(|e| (c.dt, e))).unzip();
        let fit = fit_order(&fit_dts, &fit_errs).ok();
        results.push(SchemeResult {
            scheme,
            dts: cells.iter().map(|c| c.dt).collect(),
            errors: cells.iter().map(|c| c.mean_error).collect(),
            stderrs: cells.iter().map(|c| c.std_error).collect(),
            slope: fit.map(|f| f.slope),
            slope_stderr: fit.and_then(|f| f.stderr),
            cells,
        });
    }

    Ok(ConvergenceReport {
        config: cfg,
        results,
        reference_excluded,
        exclusions,
        provenance: Provenance {
            generator: "ChaCha8 keyed by (seed, path); path p uses splitmix64(seed, p) as its path seed".into(),
            path_seeds: outcomes.iter().map(|o| o.seed).collect(),
        },
    })
}

/// Independent per-step noise for standalone runs: step `k` draws from
/// lane `k` of `RngStream::new(seed, 0)`.
#[derive(Debug, Clone)]
pub struct SampledNoise {
    seed: u64,
    increments: IncrementSampler,
    ou: Option<OuSampler>,
}

impl SampledNoise {
    pub fn new(model: &LangevinModel, dt: f64, seed: u64, needs: NoiseNeeds) -> Result<Self> {
        Ok(SampledNoise {
            seed,
            increments: IncrementSampler::new(model.dim(), dt)?,
            ou: if needs.ou {
                Some(OuSampler::new(&model.gamma, &model.sigma, dt)?)
            } else {
                None
            },
        })
    }

    pub fn step(&self, k: u64) -> StepNoise {
        let mut rng = RngStream::new(self.seed, 0).step_rng(k);
        let inc = self.increments.sample(&mut rng);
        match &self.ou {
            Some(s) => StepNoise::with_ou(inc, s.sample(&mut rng)),
            None => StepNoise::new(inc),
        }
    }
}

/// Single trajectory with sampled increments; returns the states at
/// `t = 0, dt, …, steps·dt`.
pub fn simulate(
    model: &LangevinModel,
    scheme: SchemeKind,
    initial: &PhaseState,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<PhaseState>> {
    let stepper = Stepper::new(model, scheme, dt)?;
    let noise = SampledNoise::new(model, dt, seed, scheme.needs())?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial.clone());
    let mut s = initial.clone();
    for k in 0..steps {
        s = stepper.step(&s, &noise.step(k as u64))?;
        out.push(s.clone());
    }
    Ok(out)
}

/// Terminal states of one realization under the reference and a scheme,
/// useful for inspecting a single coupled path.
pub fn coupled_pair(
    cfg: &ExperimentConfig,
    scheme: SchemeKind,
    dt: f64,
    path_index: u64,
) -> Result<(PhaseState, PhaseState)> {
    let (cfg, spec) = cfg.resolve()?;
    if cfg.coupling != Coupling::FinePath {
        return Err(Error::InvalidArgument("coupled_pair uses fine-path coupling".into()));
    }
    let seed = RngStream::new(cfg.seed, path_index).derived_seed();
    let path = generate_path(spec.model.dim(), spec.t_final, cfg.ref_dt, seed)?;
    let reference = match cfg.reference {
        ReferenceMethod::EulerMaruyama => run_reference(&spec.model, &spec.initial, &path)?,
        ReferenceMethod::Taylor3 { stride } => run_reference_taylor3(&spec.model, &spec.initial, &path, stride)?,
        ReferenceMethod::Exact => unreachable!("rejected by resolve"),
    };
    let y = run_scheme_coupled(&spec.model, scheme, &spec.initial, &path, dt)?;
    Ok((reference, y))
}

/// `E|X(T)|`-style helper: Euclidean norm of the concatenated state.
pub fn state_norm(s: &PhaseState) -> f64 {
    Vector::from_iterator(2 * s.dim(), s.x.iter().chain(s.v.iter()).copied()).norm()
}
