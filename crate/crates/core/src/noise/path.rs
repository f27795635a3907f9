//! Fine-grid Brownian paths and quadrature of the step integrals.
//!
//! On each pair of fine panels the path is replaced by the quadratic through
//! its three nodes; every step integral is then an exact integral of that
//! surrogate. Because the surrogate is the same for every coarse step size,
//! increments extracted at different `dt` (and by the reference solver) stay
//! mutually consistent.

use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use super::rng::RngStream;
use super::{OuPair, StepIncrements};
use crate::error::{Error, Result};
use crate::linalg::{mat_exp, Matrix, Vector};

/// Cumulative Brownian values on a uniform grid, `W(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    n: usize,
    delta: f64,
    m: usize,
    seed: u64,
    /// Row-major `(m + 1) × n`.
    w: Vec<f64>,
}

const HEADER_BYTES: usize = 32;

impl BrownianPath {
    /// Wrap externally supplied values, e.g. a deterministic test path.
    pub fn from_values(n: usize, delta: f64, w: Vec<f64>, seed: u64) -> Result<Self> {
        if n == 0 || !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument("path needs n > 0 and a positive step".into()));
        }
        if w.len() < n || !w.len().is_multiple_of(n) {
            return Err(Error::InvalidArgument(format!(
                "path length {} is not a positive multiple of n = {n}",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("path values"));
        }
        let m = w.len() / n - 1;
        Ok(BrownianPath { n, delta, m, seed, w })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.m as f64 * self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// `W(i δ)` as a slice of length `n`.
    pub fn at(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Increment `W((i+1)δ) − W(iδ)`.
    pub fn fine_increment(&self, i: usize) -> Vector {
        Vector::from_iterator(self.n, self.at(i + 1).iter().zip(self.at(i)).map(|(b, a)| b - a))
    }

    /// Number of fine panels per coarse step, validated for Simpson quadrature.
    pub fn panels_per_step(&self, dt: f64) -> Result<usize> {
        panels_per_step(self.delta, dt)
    }

    fn window(&self, k: usize, r: usize, dt: f64) -> Result<usize> {
        let start = k.checked_mul(r).filter(|s| s + r <= self.m);
        start.ok_or(Error::Misaligned {
            start: k as f64 * dt,
            end: (k + 1) as f64 * dt,
            reason: "window extends past the end of the path",
        })
    }

    /// Write the path as a little-endian binary blob: `n: u64, δ: f64, m: u64,
    /// seed: u64`, then the `(m + 1) · n` values.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.delta.to_le_bytes())?;
        out.write_all(&(self.m as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        for v in &self.w {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; HEADER_BYTES];
        input.read_exact(&mut header)?;
        let word = |i: usize| -> [u8; 8] { header[8 * i..8 * i + 8].try_into().unwrap() };
        let n = u64::from_le_bytes(word(0)) as usize;
        let delta = f64::from_le_bytes(word(1));
        let m = u64::from_le_bytes(word(2)) as usize;
        let seed = u64::from_le_bytes(word(3));
        let len = m
            .checked_add(1)
            .and_then(|rows| rows.checked_mul(n))
            .ok_or_else(|| Error::InvalidArgument("path header overflows".into()))?;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(Error::InvalidArgument(format!(
                "path payload has {} bytes, header implies {}",
                bytes.len(),
                len * 8
            )));
        }
        let w = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        BrownianPath::from_values(n, delta, w, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(file)
    }
}

/// Fine panels per coarse step: `dt / δ`, which must be an even integer.
pub fn panels_per_step(delta: f64, dt: f64) -> Result<usize> {
    let ratio = dt / delta;
    let r = ratio.round();
    if !(r >= 1.0) || (ratio - r).abs() > 1e-9 * r {
        return Err(Error::Misaligned {
            start: 0.0,
            end: dt,
            reason: "step is not a multiple of the fine step",
        });
    }
    let r = r as usize;
    if !r.is_multiple_of(2) {
        return Err(Error::Misaligned {
            start: 0.0,
            end: dt,
            reason: "odd number of fine panels",
        });
    }
    Ok(r)
}

/// Number of grid intervals `T / δ`, rejecting non-integral ratios.
pub(crate) fn grid_count(t: f64, delta: f64, what: &'static str) -> Result<usize> {
    if !(t > 0.0) || !(delta > 0.0) || !t.is_finite() || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{what}: horizon and step must be positive"
        )));
    }
    let ratio = t / delta;
    if ratio > 2f64.powi(52) {
        return Err(Error::InvalidArgument(format!(
            "{what}: step count {ratio:e} overflows"
        )));
    }
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * m {
        return Err(Error::InvalidArgument(format!(
            "{what}: horizon {t} is not an integer multiple of {delta}"
        )));
    }
    Ok(m as usize)
}

/// Brownian path with `T/δ` i.i.d. `N(0, δ I)` increments drawn from the
/// whole-path lane of `RngStream::new(seed, 0)`.
pub fn generate_path(n: usize, t: f64, delta: f64, seed: u64) -> Result<BrownianPath> {
    if n == 0 {
        return Err(Error::InvalidArgument("path dimension must be positive".into()));
    }
    let m = grid_count(t, delta, "brownian path")?;
    let len = (m + 1)
        .checked_mul(n)
        .ok_or_else(|| Error::InvalidArgument("path size overflows".into()))?;
    let mut rng = RngStream::new(seed, 0).path_rng();
    let scale = delta.sqrt();
    let mut w = vec![0.0; len];
    for i in 0..m {
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            w[(i + 1) * n + j] = w[i * n + j] + scale * z;
        }
    }
    Ok(BrownianPath { n, delta, m, seed, w })
}

/// Step integrals over the window `[k dt, (k+1) dt]` by Simpson quadrature.
pub fn integrals_from_path(path: &BrownianPath, k: usize, dt: f64) -> Result<StepIncrements> {
    let r = path.panels_per_step(dt)?;
    let start = path.window(k, r, dt)?;
    Ok(window_integrals(path, start, r))
}

fn window_integrals(path: &BrownianPath, start: usize, r: usize) -> StepIncrements {
    let n = path.n;
    let d = path.delta;
    let dt = r as f64 * d;
    let base = path.at(start);
    let mut dw = Vector::zeros(n);
    let mut i_j0 = Vector::zeros(n);
    let mut i_j00 = Vector::zeros(n);
    let mut i_0j0 = Vector::zeros(n);
    let mut w = vec![0.0; r + 1];
    let mut run = vec![0.0; r + 1];
    for j in 0..n {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = path.at(start + i)[j] - base[j];
        }
        // running ∫ w on the piecewise quadratic through each panel pair
        run[0] = 0.0;
        for p in (0..r).step_by(2) {
            let (a, b, c) = (w[p], w[p + 1], w[p + 2]);
            run[p + 1] = run[p] + d * (5.0 * a + 8.0 * b - c) / 12.0;
            run[p + 2] = run[p] + d * (a + 4.0 * b + c) / 3.0;
        }
        let simpson = |g: &dyn Fn(usize) -> f64| -> f64 {
            (0..r)
                .step_by(2)
                .map(|p| d * (g(p) + 4.0 * g(p + 1) + g(p + 2)) / 3.0)
                .sum()
        };
        dw[j] = w[r];
        i_j0[j] = run[r];
        i_j00[j] = simpson(&|i| run[i]);
        // running I_(0,j)(t) = t w(t) − ∫₀ᵗ w
        i_0j0[j] = simpson(&|i| i as f64 * d * w[i] - run[i]);
    }
    let i_0j = &dw * dt - &i_j0;
    let du = &i_0j - &dw * (0.5 * dt);
    let dv = (&i_0j0 - &i_j00 - &du * dt) / 9.0;
    StepIncrements {
        dt,
        dw,
        i_j0: Some(i_j0),
        i_0j: Some(i_0j),
        i_j00: Some(i_j00),
        i_0j0: Some(i_0j0),
        du: Some(du),
        dv: Some(dv),
    }
}

/// Cached weights for extracting step integrals and OU integrals from a
/// fine path at one coarse step size.
#[derive(Debug, Clone)]
pub struct PathQuadrature {
    dt: f64,
    r: usize,
    sigma: Option<Matrix>,
    gamma: Option<Matrix>,
    /// Simpson weight times `e^{−Γ(dt − s_i)} σ` at each fine node.
    ou_weights: Vec<Matrix>,
}

impl PathQuadrature {
    /// Increments only, for paths with fine step `delta`.
    pub fn new(delta: f64, dt: f64) -> Result<Self> {
        let r = panels_per_step(delta, dt)?;
        Ok(PathQuadrature {
            dt,
            r,
            sigma: None,
            gamma: None,
            ou_weights: Vec::new(),
        })
    }

    /// Increments plus the OU integrals `J = ∫ e^{−Γ(dt−s)} σ dW` and
    /// `K = ∫₀^dt J(t) dt`.
    pub fn with_ou(delta: f64, dt: f64, gamma: &Matrix, sigma: &Matrix) -> Result<Self> {
        let r = panels_per_step(delta, dt)?;
        let n = gamma.nrows();
        if gamma.shape() != (n, n) || sigma.shape() != (n, n) {
            return Err(Error::InvalidArgument(
                "gamma and sigma must be square of equal size".into(),
            ));
        }
        let d = delta;
        let step = mat_exp(&(-gamma * d))?;
        // node i sits at s = i δ, so its factor is e^{−Γ (r − i) δ}
        let mut factors = vec![Matrix::identity(n, n); r + 1];
        for i in (0..r).rev() {
            factors[i] = &step * &factors[i + 1];
        }
        let ou_weights = factors
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let simpson = if i == 0 || i == r {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                e * sigma * (simpson * d / 3.0)
            })
            .collect();
        Ok(PathQuadrature {
            dt,
            r,
            sigma: Some(sigma.clone()),
            gamma: Some(gamma.clone()),
            ou_weights,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_in(&self, path: &BrownianPath) -> usize {
        path.m / self.r
    }

    fn check(&self, path: &BrownianPath) -> Result<()> {
        if (path.delta * self.r as f64 - self.dt).abs() > 1e-9 * self.dt {
            return Err(Error::Misaligned {
                start: 0.0,
                end: self.dt,
                reason: "quadrature table was built for a different fine step",
            });
        }
        if let Some(s) = &self.sigma {
            if s.nrows() != path.n {
                return Err(Error::Dimension {
                    context: "OU quadrature",
                    expected: s.nrows(),
                    found: path.n,
                });
            }
        }
        Ok(())
    }

    pub fn increments(&self, path: &BrownianPath, k: usize) -> Result<StepIncrements> {
        self.check(path)?;
        let start = path.window(k, self.r, self.dt)?;
        Ok(window_integrals(path, start, self.r))
    }

    /// OU integrals over window `k`, given its Wiener increment.
    pub fn ou(&self, path: &BrownianPath, k: usize, dw: &Vector) -> Result<OuPair> {
        let (Some(gamma), Some(sigma)) = (&self.gamma, &self.sigma) else {
            return Err(Error::MissingIncrement("OU integrals"));
        };
        self.check(path)?;
        let start = path.window(k, self.r, self.dt)?;
        let n = path.n;
        let base = Vector::from_column_slice(path.at(start));
        let mut q = Vector::zeros(n);
        for (i, wt) in self.ou_weights.iter().enumerate() {
            let w = Vector::from_column_slice(path.at(start + i)) - &base;
            q.gemv(1.0, wt, &w, 1.0);
        }
        // integration by parts: J = σ ΔW − Γ ∫ e^{−Γ(dt−s)} σ W(s) ds and K equals that integral
        let j = sigma * dw - gamma * &q;
        Ok(OuPair { j, k: q })
    }
}
