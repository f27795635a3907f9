//! Per-step stochastic increments.
//!
//! Two sources are supported: direct joint-Gaussian sampling of
//! `(ΔW, ΔU, ΔV)` from their closed-form covariance, and extraction of the
//! multiple Itô integrals from a fine Brownian path by Simpson quadrature
//! (used to couple coarse schemes to a common realization).
//!
//! Notation for one step of length `Δt`, with time measured from the step start:
//!
//! ```text
//! I_(j,0)   = ∫ (W_t − W_0) dt          I_(0,j)   = ∫ t dW_t
//! I_(j,0,0) = ∫ I_(j,0)(t) dt           I_(0,j,0) = ∫ I_(0,j)(t) dt
//! ΔU = I_(0,j) − Δt ΔW / 2
//! ΔV = (I_(0,j,0) − I_(j,0,0) − Δt ΔU) / 9
//! ```
//!
//! The shuffle relations `I_(0,j) + I_(j,0) = Δt ΔW` and
//! `Δt I_(j,0) = I_(0,j,0) + 2 I_(j,0,0)` make `(ΔW, ΔU, ΔV)` and
//! `(ΔW, I_(j,0), I_(j,0,0))` interchangeable, so every constructor fills
//! whatever its inputs determine.

mod legendre;
mod ou;
mod path;
mod rng;

pub use legendre::{LegendreBasis, LegendrePath, WindowFunctional};
pub use ou::{ou_integral_covariance, OuPair, OuSampler};
pub(crate) use path::grid_count;
pub use path::{generate_path, integrals_from_path, panels_per_step, BrownianPath, PathQuadrature};
pub use rng::RngStream;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, Vector};

/// Stochastic quantities for one step, one entry per noise component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepIncrements {
    pub dt: f64,
    pub dw: Vector,
    pub i_j0: Option<Vector>,
    pub i_0j: Option<Vector>,
    pub i_j00: Option<Vector>,
    pub i_0j0: Option<Vector>,
    pub du: Option<Vector>,
    pub dv: Option<Vector>,
}

impl StepIncrements {
    /// Only the Wiener increment; enough for Euler–Maruyama and truncation I.
    pub fn wiener(dt: f64, dw: Vector) -> Self {
        StepIncrements {
            dt,
            dw,
            i_j0: None,
            i_0j: None,
            i_j00: None,
            i_0j0: None,
            du: None,
            dv: None,
        }
    }

    /// From `ΔW` and `I_(j,0)`; fills `I_(0,j)` and `ΔU`.
    pub fn from_first_integrals(dt: f64, dw: Vector, i_j0: Vector) -> Self {
        let i_0j = &dw * dt - &i_j0;
        let du = &i_0j - &dw * (0.5 * dt);
        StepIncrements {
            dt,
            dw,
            i_j0: Some(i_j0),
            i_0j: Some(i_0j),
            i_j00: None,
            i_0j0: None,
            du: Some(du),
            dv: None,
        }
    }

    /// From `ΔW`, `I_(j,0)` and `I_(j,0,0)`; fills every field.
    pub fn from_integrals(dt: f64, dw: Vector, i_j0: Vector, i_j00: Vector) -> Self {
        let mut inc = Self::from_first_integrals(dt, dw, i_j0);
        let i_j0 = inc.i_j0.as_ref().unwrap();
        let du = inc.du.as_ref().unwrap();
        let i_0j0 = i_j0 * dt - &i_j00 * 2.0;
        let dv = (&i_0j0 - &i_j00 - du * dt) / 9.0;
        inc.i_j00 = Some(i_j00);
        inc.i_0j0 = Some(i_0j0);
        inc.dv = Some(dv);
        inc
    }

    /// From the bracket variables `(ΔW, ΔU, ΔV)`; fills every field.
    pub fn from_brackets(dt: f64, dw: Vector, du: Vector, dv: Vector) -> Self {
        let i_0j = &du + &dw * (0.5 * dt);
        let i_j0 = &dw * dt - &i_0j;
        // I_(j,0,0) = Δt²ΔW/6 − (2/3)ΔtΔU − 3ΔV
        let i_j00 = &dw * (dt * dt / 6.0) - &du * (2.0 * dt / 3.0) - &dv * 3.0;
        let i_0j0 = &i_j0 * dt - &i_j00 * 2.0;
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

    pub fn zeros(n: usize, dt: f64) -> Self {
        let z = Vector::zeros(n);
        Self::from_brackets(dt, z.clone(), z.clone(), z)
    }

    pub fn dim(&self) -> usize {
        self.dw.len()
    }

    pub fn i_j0(&self) -> Result<&Vector> {
        self.i_j0.as_ref().ok_or(Error::MissingIncrement("I_(j,0)"))
    }

    pub fn i_j00(&self) -> Result<&Vector> {
        self.i_j00.as_ref().ok_or(Error::MissingIncrement("I_(j,0,0)"))
    }

    pub fn du(&self) -> Result<&Vector> {
        self.du.as_ref().ok_or(Error::MissingIncrement("dU"))
    }

    pub fn dv(&self) -> Result<&Vector> {
        self.dv.as_ref().ok_or(Error::MissingIncrement("dV"))
    }
}

/// Everything a single scheme step may consume.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    pub inc: StepIncrements,
    pub ou: Option<OuPair>,
}

impl StepNoise {
    pub fn new(inc: StepIncrements) -> Self {
        StepNoise { inc, ou: None }
    }

    pub fn with_ou(inc: StepIncrements, ou: OuPair) -> Self {
        StepNoise { inc, ou: Some(ou) }
    }

    pub fn ou(&self) -> Result<&OuPair> {
        self.ou.as_ref().ok_or(Error::MissingIncrement("OU integrals"))
    }
}

/// Per-component covariance of `(ΔW, ΔU, ΔV)`.
pub fn increment_covariance(dt: f64) -> Result<Matrix> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    let uv = -dt2 * dt2 / 216.0;
    Ok(Matrix::from_row_slice(
        3,
        3,
        &[dt, 0.0, 0.0, 0.0, dt3 / 12.0, uv, 0.0, uv, dt3 * dt2 / 2430.0],
    ))
}

/// Draw `(ΔW, ΔU, ΔV)` per component from [`increment_covariance`] and fill
/// the derived integrals. A zero step yields all-zero increments.
pub fn sample_increments<R: Rng + ?Sized>(n: usize, dt: f64, rng: &mut R) -> Result<StepIncrements> {
    if dt == 0.0 {
        return Ok(StepIncrements::zeros(n, 0.0));
    }
    let l = cholesky(&increment_covariance(dt)?)?;
    Ok(sample_with_factor(n, dt, &l, rng))
}

pub(crate) fn sample_with_factor<R: Rng + ?Sized>(n: usize, dt: f64, l: &Matrix, rng: &mut R) -> StepIncrements {
    let mut dw = Vector::zeros(n);
    let mut du = Vector::zeros(n);
    let mut dv = Vector::zeros(n);
    for j in 0..n {
        let z: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        dw[j] = l[(0, 0)] * z[0];
        du[j] = l[(1, 0)] * z[0] + l[(1, 1)] * z[1];
        dv[j] = l[(2, 0)] * z[0] + l[(2, 1)] * z[1] + l[(2, 2)] * z[2];
    }
    StepIncrements::from_brackets(dt, dw, du, dv)
}

/// Reusable sampler with a cached Cholesky factor for one step size.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    n: usize,
    dt: f64,
    factor: Matrix,
}

impl IncrementSampler {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        let factor = cholesky(&increment_covariance(dt)?)?;
        Ok(IncrementSampler { n, dt, factor })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StepIncrements {
        sample_with_factor(self.n, self.dt, &self.factor, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn covariance_at_unit_step() {
        let c = increment_covariance(1.0).unwrap();
        let expected = Matrix::from_row_slice(
            3,
            3,
            &[
                1.0,
                0.0,
                0.0,
                0.0,
                1.0 / 12.0,
                -1.0 / 216.0,
                0.0,
                -1.0 / 216.0,
                1.0 / 2430.0,
            ],
        );
        assert_relative_eq!(c, expected, max_relative = 1e-15);
    }

    #[test]
    fn covariance_scaling_and_errors() {
        let c = increment_covariance(1e-3).unwrap();
        assert_relative_eq!(c[(0, 0)], 1e-3, max_relative = 1e-15);
        assert_relative_eq!(c[(1, 1)], 1e-9 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(c[(2, 2)], 1e-15 / 2430.0, max_relative = 1e-15);
        assert!(increment_covariance(0.0).is_err());
        assert!(increment_covariance(-1.0).is_err());
    }

    #[test]
    fn lower_block_determinant() {
        let dt: f64 = 0.1;
        let c = increment_covariance(dt).unwrap();
        let det = c[(1, 1)] * c[(2, 2)] - c[(1, 2)] * c[(2, 1)];
        let expected = dt.powi(8) * (1.0 / 29160.0 - 1.0 / 46656.0);
        assert_relative_eq!(det, expected, max_relative = 1e-12);
        assert!(det > 0.0);
    }

    #[test]
    fn covariance_positive_definite_over_sweep() {
        for k in -12..=2 {
            let dt = 2f64.powi(k);
            let c = increment_covariance(dt).unwrap();
            let l = cholesky(&c).unwrap();
            assert!((0..3).all(|i| l[(i, i)] > 0.0), "dt = {dt}");
            let rel = (&l * l.transpose() - &c).abs();
            for i in 0..3 {
                for j in 0..3 {
                    let scale = (c[(i, i)] * c[(j, j)]).sqrt();
                    assert!(rel[(i, j)] <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn zero_step_gives_zero_increments() {
        let mut rng = RngStream::new(1, 0).step_rng(0);
        let inc = sample_increments(3, 0.0, &mut rng).unwrap();
        assert!(inc.dw.iter().all(|&v| v == 0.0));
        assert!(inc.dv.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_fields_are_reported() {
        let inc = StepIncrements::wiener(0.1, Vector::zeros(2));
        assert!(matches!(inc.i_j0(), Err(Error::MissingIncrement(_))));
        assert!(matches!(inc.dv(), Err(Error::MissingIncrement(_))));
        let inc = StepIncrements::from_first_integrals(0.1, Vector::zeros(2), Vector::zeros(2));
        assert!(inc.du().is_ok());
        assert!(matches!(inc.i_j00(), Err(Error::MissingIncrement(_))));
    }

    #[test]
    fn sampled_covariance_matches() {
        // 2·10⁵ draws; each entry within 4 standard errors of the analytic value
        let dt = 0.1;
        let cov = increment_covariance(dt).unwrap();
        let sampler = IncrementSampler::new(1, dt).unwrap();
        let n = 200_000;
        let mut rng = RngStream::new(99, 0).path_rng();
        let mut prods = (0..6).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for _ in 0..n {
            let inc = sampler.sample(&mut rng);
            let v = [inc.dw[0], inc.du.as_ref().unwrap()[0], inc.dv.as_ref().unwrap()[0]];
            for (p, &(a, b)) in pairs.iter().enumerate() {
                prods[p].push(v[a] * v[b]);
            }
        }
        for (p, &(a, b)) in pairs.iter().enumerate() {
            let mean = prods[p].iter().sum::<f64>() / n as f64;
            let var = prods[p].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - cov[(a, b)]).abs() < 4.0 * se,
                "entry ({a},{b}): {mean:e} vs {:e} (se {se:e})",
                cov[(a, b)]
            );
        }
    }

    proptest! {
        #[test]
        fn constructors_agree(dt in 1e-4f64..1.0, w in -1.0f64..1.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let dw = Vector::from_element(1, w * dt.sqrt());
            let du = Vector::from_element(1, a * dt.powf(1.5));
            let dv = Vector::from_element(1, b * dt.powf(2.5));
            let x = StepIncrements::from_brackets(dt, dw.clone(), du.clone(), dv.clone());
            let y = StepIncrements::from_integrals(dt, dw.clone(), x.i_j0.clone().unwrap(), x.i_j00.clone().unwrap());
            let tol = 1e-12 * dt.powf(0.5);
            prop_assert!((y.du.unwrap() - du).amax() <= tol);
            prop_assert!((y.dv.unwrap() - dv).amax() <= tol);
            let sum = x.i_0j.unwrap() + x.i_j0.unwrap();
            prop_assert!((sum - dw * dt).amax() <= 1e-15);
        }
    }
}
