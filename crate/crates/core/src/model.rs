//! The additive-noise Langevin system
//!
//! ```text
//! dx = v dt
//! dv = (f(x) − Γ v) dt + σ dW
//! ```
//!
//! with constant friction `Γ` and noise amplitude `σ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_len, Matrix, Vector};

/// A conservative force field `f: Rⁿ → Rⁿ`.
///
/// The derivative hooks are optional; when they return `None` the schemes
/// fall back to finite differences of [`ForceField::force`].
pub trait ForceField: Send + Sync {
    fn dim(&self) -> usize;

    fn force(&self, x: &Vector) -> Result<Vector>;

    /// Directional derivative `Df(x) u`.
    fn jvp(&self, _x: &Vector, _u: &Vector) -> Option<Result<Vector>> {
        None
    }

    /// Second directional derivative `D[Df(x) u] u`.
    fn second_directional(&self, _x: &Vector, _u: &Vector) -> Option<Result<Vector>> {
        None
    }

    /// Potential energy with `f = −∇E`, when known.
    fn energy(&self, _x: &Vector) -> Option<f64> {
        None
    }

    /// `L` such that `f(x) = L x`, for linear force fields.
    fn linear_map(&self) -> Option<Matrix> {
        None
    }
}

/// Position/velocity pair of a Langevin trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vector,
    pub v: Vector,
}

impl PhaseState {
    pub fn new(x: Vector, v: Vector) -> Self {
        PhaseState { x, v }
    }

    pub fn from_slices(x: &[f64], v: &[f64]) -> Self {
        PhaseState {
            x: Vector::from_column_slice(x),
            v: Vector::from_column_slice(v),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }

    pub(crate) fn checked(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite("phase state"))
        }
    }

    /// Euclidean distance on the concatenated `(x, v)`.
    pub fn distance(&self, other: &PhaseState) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.v - &other.v).norm_squared()).sqrt()
    }
}

#[derive(Clone)]
pub struct LangevinModel {
    pub name: String,
    force: Arc<dyn ForceField>,
    pub gamma: Matrix,
    pub sigma: Matrix,
}

impl fmt::Debug for LangevinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LangevinModel")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("gamma", &self.gamma)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl LangevinModel {
    pub fn new(name: impl Into<String>, force: Arc<dyn ForceField>, gamma: Matrix, sigma: Matrix) -> Result<Self> {
        let n = force.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("model dimension must be positive".into()));
        }
        for (m, what) in [(&gamma, "gamma"), (&sigma, "sigma")] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be {n}x{n}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(what));
            }
        }
        Ok(LangevinModel {
            name: name.into(),
            force,
            gamma,
            sigma,
        })
    }

    pub fn dim(&self) -> usize {
        self.force.dim()
    }

    pub fn force_field(&self) -> &Arc<dyn ForceField> {
        &self.force
    }

    pub fn force(&self, x: &Vector) -> Result<Vector> {
        ensure_len(x, self.dim(), "force argument")?;
        let f = self.force.force(x)?;
        ensure_finite(&f, "force")?;
        Ok(f)
    }

    pub fn has_analytic_jvp(&self) -> bool {
        let n = self.dim();
        self.force.jvp(&Vector::zeros(n), &Vector::zeros(n)).is_some()
    }

    pub fn energy(&self, s: &PhaseState) -> Option<f64> {
        self.force.energy(&s.x).map(|e| e + 0.5 * s.v.norm_squared())
    }

    /// Replace the noise amplitude, keeping everything else.
    pub fn with_sigma(mut self, sigma: Matrix) -> Result<Self> {
        let n = self.dim();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::InvalidArgument(format!("sigma must be {n}x{n}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: Matrix) -> Result<Self> {
        let n = self.dim();
        if gamma.nrows() != n || gamma.ncols() != n {
            return Err(Error::InvalidArgument(format!("gamma must be {n}x{n}")));
        }
        self.gamma = gamma;
        Ok(self)
    }
}

/// A force field given by closures, mostly for tests and quick experiments.
pub struct FnForce<F> {
    n: usize,
    f: F,
}

impl<F> FnForce<F>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnForce { n, f }
    }
}

impl<F> ForceField for FnForce<F>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn force(&self, x: &Vector) -> Result<Vector> {
        Ok((self.f)(x))
    }
}
