//! Test systems: the pendulum, a seven-particle Lennard-Jones cluster, and a
//! linear oscillator whose transition law is known in closed form.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_exp, Matrix, Vector};
use crate::model::{ForceField, LangevinModel, PhaseState};

/// `f(x) = −sin x`, componentwise.
#[derive(Debug, Clone, Copy)]
pub struct Pendulum;

impl ForceField for Pendulum {
    fn dim(&self) -> usize {
        1
    }

    fn force(&self, x: &Vector) -> Result<Vector> {
        Ok(x.map(|v| -v.sin()))
    }

    fn jvp(&self, x: &Vector, u: &Vector) -> Option<Result<Vector>> {
        Some(Ok(x.zip_map(u, |a, b| -a.cos() * b)))
    }

    fn second_directional(&self, x: &Vector, u: &Vector) -> Option<Result<Vector>> {
        Some(Ok(x.zip_map(u, |a, b| a.sin() * b * b)))
    }

    fn energy(&self, x: &Vector) -> Option<f64> {
        Some(x.iter().map(|v| -v.cos()).sum())
    }
}

/// `f(x) = −ω² x` in `n` dimensions.
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    pub n: usize,
    pub omega: f64,
}

impl ForceField for Harmonic {
    fn dim(&self) -> usize {
        self.n
    }

    fn force(&self, x: &Vector) -> Result<Vector> {
        Ok(x * (-self.omega * self.omega))
    }

    fn jvp(&self, _x: &Vector, u: &Vector) -> Option<Result<Vector>> {
        Some(Ok(u * (-self.omega * self.omega)))
    }

    fn second_directional(&self, _x: &Vector, u: &Vector) -> Option<Result<Vector>> {
        Some(Ok(Vector::zeros(u.len())))
    }

    fn energy(&self, x: &Vector) -> Option<f64> {
        Some(0.5 * self.omega * self.omega * x.norm_squared())
    }

    fn linear_map(&self) -> Option<Matrix> {
        Some(Matrix::identity(self.n, self.n) * (-self.omega * self.omega))
    }
}

/// Pairwise Lennard-Jones cluster with `E = Σ r⁻¹² − r⁻⁶`, no cutoff.
#[derive(Debug, Clone, Copy)]
pub struct LennardJones {
    pub particles: usize,
    /// Pair distances below this are reported as collisions.
    pub collision_radius: f64,
}

impl LennardJones {
    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != 3 * self.particles {
            return Err(Error::Dimension {
                context: "Lennard-Jones positions",
                expected: 3 * self.particles,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Lennard-Jones forces for `N` particles in `R³`, laid out `[x₀ y₀ z₀ x₁ …]`.
pub fn lj_force(x: &Vector, collision_radius: f64) -> Result<Vector> {
    if !x.len().is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "position length {} is not a multiple of 3",
            x.len()
        )));
    }
    let np = x.len() / 3;
    let mut f = Vector::zeros(x.len());
    for i in 0..np {
        for j in (i + 1)..np {
            let d = [
                x[3 * i] - x[3 * j],
                x[3 * i + 1] - x[3 * j + 1],
                x[3 * i + 2] - x[3 * j + 2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = r2.sqrt();
            if !(r >= collision_radius) {
                return Err(Error::Collision { i, j, r });
            }
            let inv2 = 1.0 / r2;
            let inv6 = inv2 * inv2 * inv2;
            // (12 r⁻¹³ − 6 r⁻⁷) / r, applied to the separation vector
            let scale = (12.0 * inv6 * inv6 - 6.0 * inv6) * inv2;
            for a in 0..3 {
                f[3 * i + a] += scale * d[a];
                f[3 * j + a] -= scale * d[a];
            }
        }
    }
    Ok(f)
}

pub fn lj_energy(x: &Vector) -> f64 {
    let np = x.len() / 3;
    let mut e = 0.0;
    for i in 0..np {
        for j in (i + 1)..np {
            let r2: f64 = (0..3).map(|a| (x[3 * i + a] - x[3 * j + a]).powi(2)).sum();
            let inv6 = 1.0 / (r2 * r2 * r2);
            e += inv6 * inv6 - inv6;
        }
    }
    e
}

impl ForceField for LennardJones {
    fn dim(&self) -> usize {
        3 * self.particles
    }

    fn force(&self, x: &Vector) -> Result<Vector> {
        self.check(x)?;
        lj_force(x, self.collision_radius)
    }

    fn energy(&self, x: &Vector) -> Option<f64> {
        Some(lj_energy(x))
    }
}

/// Positions of a regular hexagon of side `2^{1/6}` around a central
/// particle, in the `z = 0` plane; the centre is particle 0.
pub fn hexagon_cluster() -> Vector {
    let side = 2f64.powf(1.0 / 6.0);
    let mut x = Vector::zeros(21);
    for k in 0..6 {
        let angle = PI / 3.0 * k as f64;
        x[3 * (k + 1)] = side * angle.cos();
        x[3 * (k + 1) + 1] = side * angle.sin();
    }
    x
}

/// A model together with its initial state and default horizon.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model: LangevinModel,
    pub initial: PhaseState,
    pub t_final: f64,
    /// Resolved parameters, suitable for echoing into reports.
    pub config: ModelConfig,
}

/// Model selection plus optional overrides. `gamma` and `sigma` are scalar
/// multiples of the identity; giving `kbt` instead of `sigma` applies
/// `σσᵀ = 2 k_BT Γ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kbt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_radius: Option<f64>,
}

pub const MODEL_NAMES: [&str; 3] = ["pendulum", "lj7", "harmonic"];

impl ModelConfig {
    pub fn named(name: &str) -> Self {
        ModelConfig {
            name: name.to_string(),
            ..Default::default()
        }
    }

    /// Resolve defaults and build the model.
    pub fn build(&self) -> Result<ModelSpec> {
        if self.sigma.is_some() && self.kbt.is_some() {
            return Err(Error::InvalidArgument("give either sigma or kbt, not both".into()));
        }
        let mut cfg = self.clone();
        let (field, x0_default): (Arc<dyn ForceField>, Vec<f64>) = match self.name.as_str() {
            "pendulum" => {
                cfg.gamma.get_or_insert(1.0);
                if cfg.kbt.is_none() {
                    cfg.sigma.get_or_insert(1.0);
                }
                cfg.t_final.get_or_insert(1.0);
                (Arc::new(Pendulum), vec![1.0])
            }
            "harmonic" => {
                cfg.gamma.get_or_insert(1.0);
                if cfg.kbt.is_none() {
                    cfg.sigma.get_or_insert(1.0);
                }
                let omega = *cfg.omega.get_or_insert(1.0);
                cfg.t_final.get_or_insert(1.0);
                let n = self.x0.as_ref().map_or(1, |v| v.len().max(1));
                (Arc::new(Harmonic { n, omega }), vec![1.0; n])
            }
            "lj7" => {
                cfg.gamma.get_or_insert(10.0);
                if cfg.sigma.is_none() {
                    cfg.kbt.get_or_insert(0.3);
                }
                cfg.t_final.get_or_insert(0.25);
                let radius = *cfg.collision_radius.get_or_insert(0.5);
                let field = LennardJones {
                    particles: 7,
                    collision_radius: radius,
                };
                (Arc::new(field), hexagon_cluster().as_slice().to_vec())
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown model `{other}` (valid: {})",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        if self.name != "harmonic" && self.omega.is_some() {
            return Err(Error::InvalidArgument(
                "omega only applies to the harmonic model".into(),
            ));
        }
        if self.name != "lj7" && self.collision_radius.is_some() {
            return Err(Error::InvalidArgument("collision_radius only applies to lj7".into()));
        }
        let n = field.dim();
        let gamma = cfg.gamma.unwrap();
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        let sigma = match cfg.kbt {
            Some(kbt) if !(kbt >= 0.0) => {
                return Err(Error::InvalidArgument(format!("kbt must be non-negative, got {kbt}")))
            }
            Some(kbt) => (2.0 * kbt * gamma).sqrt(),
            None => cfg.sigma.unwrap(),
        };
        if !sigma.is_finite() {
            return Err(Error::NonFinite("sigma"));
        }
        let x0 = cfg.x0.get_or_insert(x0_default).clone();
        let v0 = cfg.v0.get_or_insert(vec![0.0; n]).clone();
        if x0.len() != n || v0.len() != n {
            return Err(Error::InvalidArgument(format!(
                "initial state must have {n} components (got x0: {}, v0: {})",
                x0.len(),
                v0.len()
            )));
        }
        let t_final = cfg.t_final.unwrap();
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let ident = Matrix::identity(n, n);
        let model = LangevinModel::new(self.name.clone(), field, &ident * gamma, &ident * sigma)?;
        let initial = PhaseState::from_slices(&x0, &v0);
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        Ok(ModelSpec {
            model,
            initial,
            t_final,
            config: cfg,
        })
    }
}

pub fn pendulum_model() -> LangevinModel {
    ModelConfig::named("pendulum").build().expect("default pendulum").model
}

pub fn lj7_model() -> LangevinModel {
    ModelConfig::named("lj7").build().expect("default lj7").model
}

pub fn harmonic_model(omega: f64) -> LangevinModel {
    ModelConfig {
        omega: Some(omega),
        ..ModelConfig::named("harmonic")
    }
    .build()
    .expect("harmonic model")
    .model
}

/// The linear system `d(x, v) = A (x, v) dt + B dW` of a model with a linear
/// force, where `A = [[0, I], [L, −Γ]]` and `B = [0; σ]`.
#[derive(Debug, Clone)]
pub struct LinearSde {
    pub drift: Matrix,
    pub diffusion: Matrix,
}

impl LinearSde {
    pub fn from_model(model: &LangevinModel) -> Result<Self> {
        let l = model
            .force_field()
            .linear_map()
            .ok_or_else(|| Error::InvalidArgument(format!("model `{}` has a nonlinear force", model.name)))?;
        let n = model.dim();
        let mut drift = Matrix::zeros(2 * n, 2 * n);
        drift.view_mut((0, n), (n, n)).fill_with_identity();
        drift.view_mut((n, 0), (n, n)).copy_from(&l);
        drift.view_mut((n, n), (n, n)).copy_from(&(-&model.gamma));
        let mut diffusion = Matrix::zeros(2 * n, n);
        diffusion.view_mut((n, 0), (n, n)).copy_from(&model.sigma);
        Ok(LinearSde { drift, diffusion })
    }

    /// `e^{A t}`, the propagator of the conditional mean.
    pub fn mean_propagator(&self, t: f64) -> Result<Matrix> {
        mat_exp(&(&self.drift * t))
    }

    /// `∫₀ᵗ e^{As} B Bᵀ e^{Aᵀs} ds` by the block-exponential construction.
    pub fn covariance(&self, t: f64) -> Result<Matrix> {
        let d = self.drift.nrows();
        let mut c = Matrix::zeros(2 * d, 2 * d);
        c.view_mut((0, 0), (d, d)).copy_from(&(-&self.drift * t));
        c.view_mut((0, d), (d, d))
            .copy_from(&(&self.diffusion * self.diffusion.transpose() * t));
        c.view_mut((d, d), (d, d)).copy_from(&(self.drift.transpose() * t));
        let e = mat_exp(&c)?;
        let f22 = e.view((d, d), (d, d)).into_owned();
        let g12 = e.view((0, d), (d, d)).into_owned();
        let q = f22.transpose() * g12;
        Ok((&q + q.transpose()) * 0.5)
    }

    pub fn stack(s: &PhaseState) -> Vector {
        let n = s.dim();
        Vector::from_iterator(2 * n, s.x.iter().chain(s.v.iter()).copied())
    }

    pub fn unstack(z: &Vector) -> PhaseState {
        let n = z.len() / 2;
        PhaseState::new(z.rows(0, n).into_owned(), z.rows(n, n).into_owned())
    }
}
