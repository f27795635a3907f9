//! Monte Carlo self-checks of the increment generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::noise::{
    generate_path, increment_covariance, sample_with_factor, PathQuadrature, RngStream, StepIncrements,
};
use crate::par::map_indexed;

const CHUNK: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Joint Gaussian draws from the analytic covariance.
    Sampling,
    /// Simpson quadrature on a fine Brownian path.
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCheckConfig {
    pub dts: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Fine steps per window in quadrature mode.
    pub quadrature_ratio: usize,
    /// Relative error injected into the sampled `ΔU` variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<f64>,
}

impl Default for NoiseCheckConfig {
    fn default() -> Self {
        NoiseCheckConfig {
            dts: vec![1.0, 0.1, 0.01],
            samples: 1_000_000,
            seed: 2024,
            quadrature_ratio: 256,
            perturb: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCheckEntry {
    pub mode: NoiseMode,
    pub dt: f64,
    /// Row-major 3×3 covariance of `(ΔW, ΔU, ΔV)`.
    pub expected: [f64; 9],
    pub observed: [f64; 9],
    /// Standard error of each observed entry.
    pub std_error: [f64; 9],
    /// Largest `|observed − expected| / std_error` over the six distinct entries.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCheckReport {
    pub config: NoiseCheckConfig,
    pub entries: Vec<NoiseCheckEntry>,
    pub max_deviation: f64,
}

impl NoiseCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_deviation <= threshold
    }
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: [f64; 6],
    sum_sq: [f64; 6],
}

impl Moments {
    fn push(&mut self, inc: &StepIncrements) -> Result<()> {
        for j in 0..inc.dim() {
            let a = [inc.dw[j], inc.du()?[j], inc.dv()?[j]];
            for (p, &(r, c)) in PAIRS.iter().enumerate() {
                let prod = a[r] * a[c];
                self.sum[p] += prod;
                self.sum_sq[p] += prod * prod;
            }
            self.n += 1;
        }
        Ok(())
    }

    fn merge(mut self, other: &Moments) -> Moments {
        self.n += other.n;
        for p in 0..6 {
            self.sum[p] += other.sum[p];
            self.sum_sq[p] += other.sum_sq[p];
        }
        self
    }
}

fn entry(mode: NoiseMode, dt: f64, m: &Moments) -> Result<NoiseCheckEntry> {
    let cov = increment_covariance(dt)?;
    let n = m.n as f64;
    let mut expected = [0.0; 9];
    let mut observed = [0.0; 9];
    let mut std_error = [0.0; 9];
    let mut max_deviation: f64 = 0.0;
    for (p, &(r, c)) in PAIRS.iter().enumerate() {
        let mean = m.sum[p] / n;
        let var = (m.sum_sq[p] / n - mean * mean) * n / (n - 1.0);
        let se = (var / n).sqrt();
        for (i, j) in [(r, c), (c, r)] {
            expected[3 * i + j] = cov[(i, j)];
            observed[3 * i + j] = mean;
            std_error[3 * i + j] = se;
        }
        max_deviation = max_deviation.max((mean - cov[(r, c)]).abs() / se);
    }
    Ok(NoiseCheckEntry {
        mode,
        dt,
        expected,
        observed,
        std_error,
        max_deviation,
    })
}

/// Compare sample covariances of `(ΔW, ΔU, ΔV)` from both generators with
/// the analytic covariance at each step size.
pub fn noise_check(cfg: &NoiseCheckConfig, threads: Option<usize>) -> Result<NoiseCheckReport> {
    if cfg.samples < 2 {
        return Err(Error::InvalidArgument("noise check needs at least two samples".into()));
    }
    if cfg.dts.is_empty() {
        return Err(Error::InvalidArgument(
            "noise check needs at least one step size".into(),
        ));
    }
    if cfg.quadrature_ratio < 2 || !cfg.quadrature_ratio.is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "quadrature ratio must be even and at least 2".into(),
        ));
    }
    let chunks = cfg.samples.div_ceil(CHUNK);
    let chunk_len = |c: usize| CHUNK.min(cfg.samples - c * CHUNK);
    let mut entries = Vec::new();
    for (d, &dt) in cfg.dts.iter().enumerate() {
        let mut cov = increment_covariance(dt)?;
        if let Some(eps) = cfg.perturb {
            cov[(1, 1)] *= 1.0 + eps;
        }
        let factor = cholesky(&cov)?;
        let sampled = map_indexed(chunks, threads, |c| -> Result<Moments> {
            let mut rng = RngStream::new(cfg.seed, c as u64).step_rng(2 * d as u64);
            let mut m = Moments::default();
            for _ in 0..chunk_len(c) {
                m.push(&sample_with_factor(1, dt, &factor, &mut rng))?;
            }
            Ok(m)
        })?
        .into_iter()
        .try_fold(Moments::default(), |acc, m| m.map(|m| acc.merge(&m)))?;
        entries.push(entry(NoiseMode::Sampling, dt, &sampled)?);

        let delta = dt / cfg.quadrature_ratio as f64;
        let quad = PathQuadrature::new(delta, dt)?;
        let quadrature = map_indexed(chunks, threads, |c| -> Result<Moments> {
            let len = chunk_len(c);
            let seed = RngStream::new(cfg.seed, (d * chunks + c) as u64).derived_seed();
            let path = generate_path(1, len as f64 * dt, delta, seed)?;
            let mut m = Moments::default();
            for k in 0..quad.steps_in(&path) {
                m.push(&quad.increments(&path, k)?)?;
            }
            Ok(m)
        })?
        .into_iter()
        .try_fold(Moments::default(), |acc, m| m.map(|m| acc.merge(&m)))?;
        entries.push(entry(NoiseMode::Quadrature, dt, &quadrature)?);
    }
    let max_deviation = entries.iter().map(|e| e.max_deviation).fold(0.0, f64::max);
    Ok(NoiseCheckReport {
        config: cfg.clone(),
        entries,
        max_deviation,
    })
}

/// `max_j |I_(0,j) + I_(j,0) − Δt ΔW| / (Δt |ΔW|)`.
pub fn identity_residual(inc: &StepIncrements) -> Result<f64> {
    let scale = inc.dt * inc.dw.norm();
    let sum = inc.i_0j.as_ref().ok_or(Error::MissingIncrement("I_(0,j)"))? + inc.i_j0()?;
    let r = (sum - &inc.dw * inc.dt).amax();
    Ok(if scale > 0.0 { r / scale } else { r })
}
