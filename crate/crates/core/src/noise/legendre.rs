//! Brownian paths represented by their shifted-Legendre moments.
//!
//! On each base step `[t_i, t_i + h]` the path stores
//! `Z_k = ∫ P_k((s − t_i)/h) dW_s`, `k = 0..=K`, which are independent
//! `N(0, h/(2k+1))`. Any stochastic integral `∫ g dW` with a smooth kernel is
//! then `Σ_k c_k Z_k` with `c_k = (2k+1) ∫₀¹ g(t_i + h u) P_k(u) du`; the
//! truncation is exact for polynomial kernels of degree ≤ K and below
//! round-off for exponentials when `K` is chosen by [`LegendreBasis::for_rate`].
//! This gives jointly exact samples of the step integrals, the OU integrals
//! and the exact flow of a linear SDE, all driven by one realization.

use rand_distr::{Distribution, StandardNormal};

use super::rng::RngStream;
use super::{OuPair, StepIncrements};
use crate::error::{Error, Result};
use crate::linalg::{exp_phi12, Matrix, Vector};
use crate::quadrature::{shifted_legendre, GaussLegendre};

const EXTRA_NODES: usize = 12;

#[derive(Debug, Clone)]
pub struct LegendreBasis {
    order: usize,
    rule: GaussLegendre,
    /// `P_k` at each node, `poly[node][k]`.
    poly: Vec<Vec<f64>>,
}

impl LegendreBasis {
    pub fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(order + EXTRA_NODES);
        let poly = rule.nodes.iter().map(|&u| shifted_legendre(order, u)).collect();
        LegendreBasis { order, rule, poly }
    }

    /// Smallest order `K ≥ 2` whose truncation bound `(ρ/2)^{K+1}/(K+1)!`
    /// falls below 1e-17, with `ρ = h · rate` and `rate` a bound on the
    /// norm of the generators appearing in the kernels.
    pub fn for_rate(h: f64, rate: f64) -> Self {
        let half = 0.5 * (h * rate).abs();
        let mut k = 2;
        let mut term = half.powi(3) / 6.0;
        while term >= 1e-17 && k < 40 {
            k += 1;
            term *= half / (k + 1) as f64;
        }
        Self::new(k)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `c_k = (2k+1) ∫₀¹ g(u) P_k(u) du`.
    pub fn coefficients<F: Fn(f64) -> f64>(&self, g: F) -> Vec<f64> {
        let mut c = vec![0.0; self.order + 1];
        for ((&u, &w), p) in self.rule.nodes.iter().zip(&self.rule.weights).zip(&self.poly) {
            let gu = g(u);
            for (ck, pk) in c.iter_mut().zip(p) {
                *ck += w * gu * pk;
            }
        }
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= (2 * k + 1) as f64;
        }
        c
    }

    /// Matrix-valued version of [`LegendreBasis::coefficients`].
    pub fn matrix_coefficients<F: Fn(f64) -> Result<Matrix>>(&self, g: F) -> Result<Vec<Matrix>> {
        let mut c: Vec<Matrix> = Vec::with_capacity(self.order + 1);
        for ((&u, &w), p) in self.rule.nodes.iter().zip(&self.rule.weights).zip(&self.poly) {
            let gu = g(u)?;
            if c.is_empty() {
                c = vec![Matrix::zeros(gu.nrows(), gu.ncols()); self.order + 1];
            }
            for (ck, pk) in c.iter_mut().zip(p) {
                *ck += &gu * (w * pk);
            }
        }
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= (2 * k + 1) as f64;
        }
        Ok(c)
    }
}

/// Legendre moments of a Brownian path on a uniform grid of base steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendrePath {
    n: usize,
    h: f64,
    m: usize,
    order: usize,
    seed: u64,
    /// `z[((i · (K+1)) + k) · n + j]`.
    z: Vec<f64>,
}

impl LegendrePath {
    pub fn generate(n: usize, t: f64, h: f64, order: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        let m = super::path::grid_count(t, h, "legendre path")?;
        let len = m
            .checked_mul(order + 1)
            .and_then(|v| v.checked_mul(n))
            .ok_or_else(|| Error::InvalidArgument("legendre path size overflows".into()))?;
        let mut rng = RngStream::new(seed, 0).path_rng();
        let scales: Vec<f64> = (0..=order).map(|k| (h / (2 * k + 1) as f64).sqrt()).collect();
        let mut z = Vec::with_capacity(len);
        for _ in 0..m {
            for s in &scales {
                for _ in 0..n {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    z.push(s * xi);
                }
            }
        }
        Ok(LegendrePath {
            n,
            h,
            m,
            order,
            seed,
            z,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn base_step(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Z_k` of base step `i`, one entry per component.
    pub fn moment(&self, i: usize, k: usize) -> &[f64] {
        let off = (i * (self.order + 1) + k) * self.n;
        &self.z[off..off + self.n]
    }

    /// `Σ_k c_k Z_k` for a kernel acting identically on every component.
    pub fn project_scalar(&self, i: usize, c: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.n);
        for (k, ck) in c.iter().enumerate().take(self.order + 1) {
            for (o, z) in out.iter_mut().zip(self.moment(i, k)) {
                *o += ck * z;
            }
        }
        out
    }

    /// `Σ_k C_k Z_k` for a matrix-valued kernel (`C_k` has `n` columns).
    pub fn project(&self, i: usize, c: &[Matrix]) -> Vector {
        let rows = c.first().map_or(0, |m| m.nrows());
        let mut out = Vector::zeros(rows);
        for (k, ck) in c.iter().enumerate().take(self.order + 1) {
            let z = Vector::from_column_slice(self.moment(i, k));
            out.gemv(1.0, ck, &z, 1.0);
        }
        out
    }
}

/// Coefficient tables for the step integrals over windows of `q` base steps.
#[derive(Debug, Clone)]
pub struct WindowFunctional {
    dt: f64,
    h: f64,
    order: usize,
    q: usize,
    /// per sub-step: coefficients of ΔW, I_(j,0), I_(j,0,0)
    scalar: Vec<[Vec<f64>; 3]>,
    /// per sub-step: coefficients of J and K
    ou: Option<OuTable>,
}

/// `e^{−Γh}` and, per sub-step, the J and K coefficient matrices.
type OuTable = (Matrix, Vec<(Vec<Matrix>, Vec<Matrix>)>);

impl WindowFunctional {
    /// Tables for windows of length `dt` on a path with base step `h` and
    /// Legendre order `order`.
    pub fn new(h: f64, order: usize, dt: f64) -> Result<Self> {
        let ratio = dt / h;
        let q = ratio.round();
        if !(q >= 1.0) || (ratio - q).abs() > 1e-9 * q {
            return Err(Error::Misaligned {
                start: 0.0,
                end: dt,
                reason: "step is not a multiple of the base step",
            });
        }
        let q = q as usize;
        let basis = LegendreBasis::new(order);
        let scalar = (0..q)
            .map(|sub| {
                // lag to the window end: τ = b + h (1 − u)
                let b = (q - 1 - sub) as f64 * h;
                [
                    basis.coefficients(|_| 1.0),
                    basis.coefficients(|u| b + h * (1.0 - u)),
                    basis.coefficients(|u| (b + h * (1.0 - u)).powi(2) / 2.0),
                ]
            })
            .collect();
        Ok(WindowFunctional {
            dt,
            h,
            order,
            q,
            scalar,
            ou: None,
        })
    }

    /// Also tabulate the OU integrals for `(Γ, σ)`.
    pub fn with_ou(h: f64, order: usize, dt: f64, gamma: &Matrix, sigma: &Matrix) -> Result<Self> {
        let mut wf = Self::new(h, order, dt)?;
        let basis = LegendreBasis::new(order);
        let mut tables = Vec::with_capacity(wf.q);
        for sub in 0..wf.q {
            let b = (wf.q - 1 - sub) as f64 * h;
            let lag = |u: f64| b + h * (1.0 - u);
            let cj = basis.matrix_coefficients(|u| Ok(exp_phi12(&(-gamma * lag(u)))?.0 * sigma))?;
            let ck = basis.matrix_coefficients(|u| {
                let tau = lag(u);
                Ok(exp_phi12(&(-gamma * tau))?.1 * sigma * tau)
            })?;
            tables.push((cj, ck));
        }
        wf.ou = Some((sigma.clone(), tables));
        Ok(wf)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn windows_in(&self, path: &LegendrePath) -> usize {
        path.m / self.q
    }

    fn first_step(&self, path: &LegendrePath, w: usize) -> Result<usize> {
        if path.order != self.order || (path.h - self.h).abs() > 1e-12 * self.h {
            return Err(Error::Misaligned {
                start: 0.0,
                end: self.dt,
                reason: "window tables were built for a different base step or order",
            });
        }
        w.checked_mul(self.q)
            .filter(|s| s + self.q <= path.m)
            .ok_or(Error::Misaligned {
                start: w as f64 * self.dt,
                end: (w + 1) as f64 * self.dt,
                reason: "window extends past the end of the path",
            })
    }

    pub fn increments(&self, path: &LegendrePath, w: usize) -> Result<StepIncrements> {
        let first = self.first_step(path, w)?;
        let n = path.n;
        let mut acc = [Vector::zeros(n), Vector::zeros(n), Vector::zeros(n)];
        for (sub, coeffs) in self.scalar.iter().enumerate() {
            for (a, c) in acc.iter_mut().zip(coeffs) {
                *a += path.project_scalar(first + sub, c);
            }
        }
        let [dw, i_j0, i_j00] = acc;
        Ok(StepIncrements::from_integrals(self.dt, dw, i_j0, i_j00))
    }

    pub fn ou(&self, path: &LegendrePath, w: usize) -> Result<OuPair> {
        let Some((sigma, tables)) = &self.ou else {
            return Err(Error::MissingIncrement("OU integrals"));
        };
        let first = self.first_step(path, w)?;
        let n = sigma.nrows();
        let mut j = Vector::zeros(n);
        let mut k = Vector::zeros(n);
        for (sub, (cj, ck)) in tables.iter().enumerate() {
            j += path.project(first + sub, cj);
            k += path.project(first + sub, ck);
        }
        Ok(OuPair { j, k })
    }
}
