//! The Ornstein–Uhlenbeck stochastic integrals
//!
//! ```text
//! J = ∫₀^dt e^{−Γ(dt−s)} σ dW_s
//! K = ∫₀^dt ∫₀^t e^{−Γ(t−s)} σ dW_s dt = ∫₀^dt (dt−s) φ₁(−Γ(dt−s)) σ dW_s
//! ```
//!
//! consumed by the exact velocity sub-flows of the direct splitting and
//! stochastic velocity Verlet schemes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, exp_phi12, Matrix, Vector};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub struct OuPair {
    pub j: Vector,
    pub k: Vector,
}

const NODES_PER_PANEL: usize = 12;
const REL_TOL: f64 = 1e-10;
const MAX_PANELS: usize = 1 << 12;

/// Kernels `(e^{−Γτ} σ, τ φ₁(−Γτ) σ)` at lag `τ = dt − s`.
fn kernels(gamma: &Matrix, sigma: &Matrix, tau: f64) -> Result<(Matrix, Matrix)> {
    let (e, p1, _) = exp_phi12(&(-gamma * tau))?;
    Ok((e * sigma, p1 * sigma * tau))
}

fn composite(gamma: &Matrix, sigma: &Matrix, dt: f64, panels: usize, rule: &GaussLegendre) -> Result<Matrix> {
    let n = gamma.nrows();
    let mut cov = Matrix::zeros(2 * n, 2 * n);
    let h = dt / panels as f64;
    let mut stacked = Matrix::zeros(2 * n, n);
    for p in 0..panels {
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            let tau = (p as f64 + u) * h;
            let (kj, kk) = kernels(gamma, sigma, tau)?;
            stacked.view_mut((0, 0), (n, n)).copy_from(&kj);
            stacked.view_mut((n, 0), (n, n)).copy_from(&kk);
            cov.gemm(w * h, &stacked, &stacked.transpose(), 1.0);
        }
    }
    Ok(cov)
}

/// Joint covariance of `(J, K)` as a `2n × 2n` matrix, by composite
/// Gauss–Legendre quadrature refined until successive estimates agree to
/// 1e-10 relative.
pub fn ou_integral_covariance(gamma: &Matrix, sigma: &Matrix, dt: f64) -> Result<Matrix> {
    let n = gamma.nrows();
    if gamma.shape() != (n, n) || sigma.shape() != (n, n) || n == 0 {
        return Err(Error::InvalidArgument(
            "gamma and sigma must be square of equal size".into(),
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    let rule = GaussLegendre::new(NODES_PER_PANEL);
    let mut panels = 1;
    let mut prev = composite(gamma, sigma, dt, panels, &rule)?;
    while panels < MAX_PANELS {
        panels *= 2;
        let next = composite(gamma, sigma, dt, panels, &rule)?;
        let scale = next.amax().max(f64::MIN_POSITIVE);
        if (&next - &prev).amax() <= REL_TOL * scale {
            return Ok((&next + next.transpose()) * 0.5);
        }
        prev = next;
    }
    Err(Error::InvalidArgument(format!(
        "OU covariance quadrature did not converge within {MAX_PANELS} panels"
    )))
}

/// Exact joint sampler for `(J, K)` at one step size.
#[derive(Debug, Clone)]
pub struct OuSampler {
    n: usize,
    factor: Matrix,
}

impl OuSampler {
    pub fn new(gamma: &Matrix, sigma: &Matrix, dt: f64) -> Result<Self> {
        let cov = ou_integral_covariance(gamma, sigma, dt)?;
        Ok(OuSampler {
            n: gamma.nrows(),
            factor: cholesky(&cov)?,
        })
    }

    pub fn covariance(&self) -> Matrix {
        &self.factor * self.factor.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OuPair {
        let z = Vector::from_fn(2 * self.n, |_, _| rng.sample(StandardNormal));
        let x = &self.factor * z;
        OuPair {
            j: x.rows(0, self.n).into_owned(),
            k: x.rows(self.n, self.n).into_owned(),
        }
    }
}
