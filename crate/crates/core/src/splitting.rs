//! Splitting integrators: direct A/B splitting, stochastic velocity Verlet,
//! and the Kunita truncations I–III under naive, symmetric and Neri
//! compositions.
//!
//! For the truncations, one step of length `Δt` solves the autonomous system
//! `(x, v)' = A + B` over unit pseudo-time with
//!
//! ```text
//! A: x' = Δt v − σΔU + ΓσZ                        (v frozen)
//! B: v' = Δt f(x) + σΔW + ΓσΔU − (Df σ + Γ²σ)Z − ΓΔt v   (x frozen)
//! ```
//!
//! keeping the terms each truncation retains (I: `Δt v` and `Δt f + σΔW`;
//! II adds the `ΔU` terms; III adds the `Z` terms). Both sub-flows are solved
//! exactly; B through `e^{−ΓΔt τ}` and `τ φ₁(−ΓΔt τ)`, which stay well
//! defined for `Γ = 0` and for negative `τ`.
//!
//! The triple-bracket weight is `Z = 3ΔV + Δt ΔU / 6`, the combination that
//! reproduces the order-3 Itô–Taylor terms. [`BracketWeight::Literal`] uses
//! `Z = ΔV` instead and is kept for comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_len, exp_phi12, Matrix, Vector};
use crate::model::{LangevinModel, PhaseState};
use crate::noise::{OuPair, StepIncrements};
use crate::taylor::jvp_fd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truncation {
    One,
    Two,
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Composition {
    /// `exp(A) exp(B)`, executed as the B sub-flow followed by the A sub-flow.
    Naive,
    /// `exp(A/2) exp(B) exp(A/2)`.
    Symmetric,
    /// Seven-stage fourth-order composition `c₁A d₁B c₂A d₂B c₃A d₃B c₄A`.
    Neri,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BracketWeight {
    Corrected,
    Literal,
}

impl BracketWeight {
    /// The `Z` entering truncation III.
    pub fn weight(self, inc: &StepIncrements) -> Result<Vector> {
        match self {
            BracketWeight::Corrected => Ok(inc.dv()? * 3.0 + inc.du()? * (inc.dt / 6.0)),
            BracketWeight::Literal => Ok(inc.dv()?.clone()),
        }
    }
}

/// Neri coefficients `([c₁, c₂, c₃, c₄], [d₁, d₂, d₃])`.
pub fn neri_coefficients() -> ([f64; 4], [f64; 3]) {
    let cbrt2 = 2f64.cbrt();
    let c1 = 1.0 / (2.0 * (2.0 - cbrt2));
    let c2 = 0.5 - c1;
    let d1 = 1.0 / (2.0 - cbrt2);
    let d2 = 1.0 - 2.0 * d1;
    ([c1, c2, c2, c1], [d1, d2, d1])
}

/// A sub-flow: `x ← x + displacement`, `v` unchanged.
pub fn a_flow(s: &PhaseState, displacement: &Vector) -> Result<PhaseState> {
    ensure_len(displacement, s.dim(), "A-flow displacement")?;
    PhaseState::new(&s.x + displacement, s.v.clone()).checked()
}

/// B sub-flow over pseudo-time `fraction`:
/// `v ← e^{−ΓΔt·fraction} v + fraction·φ₁(−ΓΔt·fraction) c`, `x` unchanged.
pub fn b_flow(model: &LangevinModel, s: &PhaseState, c: &Vector, fraction: f64, dt: f64) -> Result<PhaseState> {
    ensure_len(c, model.dim(), "B-flow forcing")?;
    let (e, p1, _) = exp_phi12(&(-&model.gamma * (dt * fraction)))?;
    let v = e * &s.v + p1 * c * fraction;
    PhaseState::new(s.x.clone(), v).checked()
}

#[derive(Debug, Clone)]
enum Stage {
    A(f64),
    /// `e^{−ΓΔt τ}`, `τ φ₁(−ΓΔt τ)`
    B(Matrix, Matrix),
}

/// A truncation/composition pair with its sub-flow matrices cached for one `Δt`.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    model: LangevinModel,
    dt: f64,
    truncation: Truncation,
    weight: BracketWeight,
    stages: Vec<Stage>,
}

impl SplitStepper {
    pub fn new(
        model: &LangevinModel,
        dt: f64,
        truncation: Truncation,
        composition: Composition,
        weight: BracketWeight,
    ) -> Result<Self> {
        if composition == Composition::Neri && truncation != Truncation::Three {
            return Err(Error::InvalidCombination(
                "the Neri composition is only defined for truncation III".into(),
            ));
        }
        if truncation == Truncation::Three && composition != Composition::Neri {
            return Err(Error::InvalidCombination(
                "truncation III requires the Neri composition".into(),
            ));
        }
        let b = |frac: f64| -> Result<Stage> {
            let (e, p1, _) = exp_phi12(&(-&model.gamma * (dt * frac)))?;
            Ok(Stage::B(e, p1 * frac))
        };
        let stages = match composition {
            Composition::Naive => vec![b(1.0)?, Stage::A(1.0)],
            Composition::Symmetric => vec![Stage::A(0.5), b(1.0)?, Stage::A(0.5)],
            Composition::Neri => {
                let (c, d) = neri_coefficients();
                vec![
                    Stage::A(c[0]),
                    b(d[0])?,
                    Stage::A(c[1]),
                    b(d[1])?,
                    Stage::A(c[2]),
                    b(d[2])?,
                    Stage::A(c[3]),
                ]
            }
        };
        Ok(SplitStepper {
            model: model.clone(),
            dt,
            truncation,
            weight,
            stages,
        })
    }

    pub fn step(&self, s: &PhaseState, inc: &StepIncrements) -> Result<PhaseState> {
        let model = &self.model;
        let n = model.dim();
        ensure_len(&s.x, n, "state position")?;
        ensure_len(&inc.dw, n, "Wiener increment")?;
        let (dt, g, sigma) = (self.dt, &model.gamma, &model.sigma);

        // noise parts of the A displacement and of the B forcing
        let mut disp = Vector::zeros(n);
        let mut force_noise = sigma * &inc.dw;
        let mut sz = None;
        if self.truncation != Truncation::One {
            let su = sigma * inc.du()?;
            disp -= &su;
            force_noise += g * su;
        }
        if self.truncation == Truncation::Three {
            let z = sigma * self.weight.weight(inc)?;
            disp += g * &z;
            force_noise -= g * (g * &z);
            sz = Some(z);
        }

        let mut x = s.x.clone();
        let mut v = s.v.clone();
        for stage in &self.stages {
            match stage {
                Stage::A(frac) => {
                    x += (&v * dt + &disp) * *frac;
                }
                Stage::B(e, p) => {
                    let mut c = model.force(&x)? * dt + &force_noise;
                    if let Some(z) = &sz {
                        c -= jvp_fd(model, &x, z)?;
                    }
                    v = e * &v + p * c;
                }
            }
        }
        PhaseState::new(x, v).checked()
    }
}

/// One truncation step with sub-flow matrices computed on the fly.
pub fn trunc_step(
    model: &LangevinModel,
    s: &PhaseState,
    inc: &StepIncrements,
    truncation: Truncation,
    composition: Composition,
) -> Result<PhaseState> {
    SplitStepper::new(model, inc.dt, truncation, composition, BracketWeight::Corrected)?.step(s, inc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectVariant {
    /// B sub-flow then A sub-flow.
    AB,
    /// A/2, B, A/2.
    Sym,
}

/// Direct A/B splitting with exact OU velocity flow.
#[derive(Debug, Clone)]
pub struct DirectStepper {
    model: LangevinModel,
    dt: f64,
    variant: DirectVariant,
    decay: Matrix,
    /// `Δt φ₁(−ΓΔt)`
    drive: Matrix,
}

impl DirectStepper {
    pub fn new(model: &LangevinModel, dt: f64, variant: DirectVariant) -> Result<Self> {
        let (decay, p1, _) = exp_phi12(&(-&model.gamma * dt))?;
        Ok(DirectStepper {
            model: model.clone(),
            dt,
            variant,
            decay,
            drive: p1 * dt,
        })
    }

    pub fn step(&self, s: &PhaseState, ou: &OuPair) -> Result<PhaseState> {
        ensure_len(&ou.j, self.model.dim(), "OU integral")?;
        let b = |x: &Vector, v: &Vector| -> Result<Vector> {
            Ok(&self.decay * v + &self.drive * self.model.force(x)? + &ou.j)
        };
        let (x, v) = match self.variant {
            DirectVariant::AB => {
                let v = b(&s.x, &s.v)?;
                (&s.x + &v * self.dt, v)
            }
            DirectVariant::Sym => {
                let xh = &s.x + &s.v * (0.5 * self.dt);
                let v = b(&xh, &s.v)?;
                (&xh + &v * (0.5 * self.dt), v)
            }
        };
        PhaseState::new(x, v).checked()
    }
}

pub fn direct_split_step(
    model: &LangevinModel,
    s: &PhaseState,
    dt: f64,
    ou: &OuPair,
    variant: DirectVariant,
) -> Result<PhaseState> {
    DirectStepper::new(model, dt, variant)?.step(s, ou)
}

/// Stochastic velocity Verlet.
///
/// ```text
/// x₁ = x + c₁ v Δt + c₂ Δt² f(x) + K
/// v₁ = c₀ v + c₁ Δt f(x) + c₂ Δt (f(x₁) − f(x)) + J
/// ```
///
/// with `c₀ = e^{−ΓΔt}`, `c₁ = φ₁(−ΓΔt)`, `c₂ = φ₂(−ΓΔt)`.
#[derive(Debug, Clone)]
pub struct SvvStepper {
    model: LangevinModel,
    dt: f64,
    c0: Matrix,
    c1: Matrix,
    c2: Matrix,
}

impl SvvStepper {
    pub fn new(model: &LangevinModel, dt: f64) -> Result<Self> {
        let (c0, c1, c2) = exp_phi12(&(-&model.gamma * dt))?;
        Ok(SvvStepper {
            model: model.clone(),
            dt,
            c0,
            c1,
            c2,
        })
    }

    pub fn coefficients(&self) -> (&Matrix, &Matrix, &Matrix) {
        (&self.c0, &self.c1, &self.c2)
    }

    /// Step reusing a force already evaluated at `s.x`; returns the new
    /// state and the force at its position.
    pub fn step_with_force(&self, s: &PhaseState, f0: &Vector, ou: &OuPair) -> Result<(PhaseState, Vector)> {
        let n = self.model.dim();
        ensure_len(&ou.j, n, "OU integral")?;
        ensure_len(&ou.k, n, "OU integral")?;
        let dt = self.dt;
        let x1 = &s.x + &self.c1 * &s.v * dt + &self.c2 * f0 * (dt * dt) + &ou.k;
        let f1 = self.model.force(&x1)?;
        let v1 = &self.c0 * &s.v + &self.c1 * f0 * dt + &self.c2 * (&f1 - f0) * dt + &ou.j;
        Ok((PhaseState::new(x1, v1).checked()?, f1))
    }

    pub fn step(&self, s: &PhaseState, ou: &OuPair) -> Result<PhaseState> {
        let f0 = self.model.force(&s.x)?;
        Ok(self.step_with_force(s, &f0, ou)?.0)
    }
}

pub fn svv_step(model: &LangevinModel, s: &PhaseState, dt: f64, ou: &OuPair) -> Result<PhaseState> {
    SvvStepper::new(model, dt)?.step(s, ou)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnForce;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn harmonic(gamma: f64, sigma: f64) -> LangevinModel {
        let f = FnForce::new(1, |x: &Vector| -x);
        LangevinModel::new("harmonic", Arc::new(f), scalar(gamma), scalar(sigma)).unwrap()
    }

    fn zero_ou(n: usize) -> OuPair {
        OuPair {
            j: Vector::zeros(n),
            k: Vector::zeros(n),
        }
    }

    #[test]
    fn neri_values() {
        let (c, d) = neri_coefficients();
        assert_relative_eq!(c[0], 0.6756035959798, epsilon = 1e-12);
        assert_relative_eq!(d[0], 1.3512071919597, epsilon = 1e-12);
        assert_relative_eq!(d[1], -1.7024143839195, epsilon = 1e-12);
        assert!((c.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn a_flow_examples() {
        let s = PhaseState::from_slices(&[0.0, 0.0], &[1.0, 2.0]);
        assert_eq!(a_flow(&s, &Vector::zeros(2)).unwrap(), s);
        let out = a_flow(&s, &(&s.v * 0.5)).unwrap();
        assert_eq!(out.x, Vector::from_vec(vec![0.5, 1.0]));
        assert!(a_flow(&s, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn b_flow_examples() {
        let s = PhaseState::from_slices(&[0.0], &[1.0]);
        let c = Vector::from_element(1, 0.3);
        let free = b_flow(&harmonic(0.0, 0.0), &s, &c, 0.7, 0.5).unwrap();
        assert_relative_eq!(free.v[0], 1.0 + 0.7 * 0.3, epsilon = 1e-15);
        let decay = b_flow(&harmonic(1.0, 0.0), &s, &Vector::zeros(1), 1.0, 0.5).unwrap();
        assert_relative_eq!(decay.v[0], 0.60653, epsilon = 1e-5);
        let m = harmonic(2.0, 0.0);
        let back = b_flow(&m, &b_flow(&m, &s, &c, -1.0, 0.5).unwrap(), &c, 1.0, 0.5).unwrap();
        assert!((back.v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_combinations() {
        let m = harmonic(1.0, 1.0);
        for (t, c) in [
            (Truncation::One, Composition::Neri),
            (Truncation::Two, Composition::Neri),
            (Truncation::Three, Composition::Symmetric),
        ] {
            assert!(matches!(
                SplitStepper::new(&m, 0.1, t, c, BracketWeight::Corrected),
                Err(Error::InvalidCombination(_))
            ));
        }
    }

    #[test]
    fn trunc_two_with_zero_area_equals_trunc_one() {
        let m = harmonic(0.7, 0.9);
        let s = PhaseState::from_slices(&[0.4], &[-0.2]);
        let dw = Vector::from_element(1, 0.13);
        let inc = StepIncrements::from_brackets(0.1, dw, Vector::zeros(1), Vector::zeros(1));
        for comp in [Composition::Naive, Composition::Symmetric] {
            let one = trunc_step(&m, &s, &inc, Truncation::One, comp).unwrap();
            let two = trunc_step(&m, &s, &inc, Truncation::Two, comp).unwrap();
            assert_eq!(one, two);
        }
    }

    #[test]
    fn symmetric_trunc_one_is_stormer_verlet() {
        let m = harmonic(0.0, 0.0);
        let s = PhaseState::from_slices(&[1.0], &[0.3]);
        let h = 0.1;
        let out = trunc_step(
            &m,
            &s,
            &StepIncrements::zeros(1, h),
            Truncation::One,
            Composition::Symmetric,
        )
        .unwrap();
        let xh = 1.0 + 0.5 * h * 0.3;
        let v1 = 0.3 - h * xh;
        let x1 = xh + 0.5 * h * v1;
        assert_relative_eq!(out.x[0], x1, epsilon = 1e-15);
        assert_relative_eq!(out.v[0], v1, epsilon = 1e-15);
    }

    #[test]
    fn direct_ab_is_symplectic_euler() {
        let m = harmonic(0.0, 0.0);
        let s = PhaseState::from_slices(&[1.0], &[0.3]);
        let out = direct_split_step(&m, &s, 0.1, &zero_ou(1), DirectVariant::AB).unwrap();
        let v1 = 0.3 - 0.1;
        assert_relative_eq!(out.v[0], v1, epsilon = 1e-15);
        assert_relative_eq!(out.x[0], 1.0 + 0.1 * v1, epsilon = 1e-15);
        let damped = direct_split_step(
            &harmonic(1.0, 0.0),
            &PhaseState::from_slices(&[0.0], &[1.0]),
            0.5,
            &zero_ou(1),
            DirectVariant::AB,
        )
        .unwrap();
        assert_relative_eq!(damped.v[0], (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn svv_coefficients_and_verlet_limit() {
        let st = SvvStepper::new(&harmonic(1.0, 1.0), 0.5).unwrap();
        let (c0, c1, c2) = st.coefficients();
        assert_relative_eq!(c0[(0, 0)], (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(c1[(0, 0)], 2.0 * (1.0 - (-0.5f64).exp()), epsilon = 1e-14);
        assert_relative_eq!(c1[(0, 0)], 0.78694, epsilon = 1e-5);
        assert_relative_eq!(c2[(0, 0)], 0.42612, epsilon = 1e-5);

        let m = harmonic(0.0, 0.0);
        let s = PhaseState::from_slices(&[1.0], &[0.3]);
        let h = 0.1;
        let out = svv_step(&m, &s, h, &zero_ou(1)).unwrap();
        let x1 = 1.0 + h * 0.3 - 0.5 * h * h;
        let v1 = 0.3 + 0.5 * h * (-1.0 - x1);
        assert!((out.x[0] - x1).abs() < 1e-12 && (out.v[0] - v1).abs() < 1e-12);
    }

    #[test]
    fn corrected_weight_is_orthogonal_to_area() {
        // Cov(Z, ΔU) = 3(−Δt⁴/216) + (Δt/6)(Δt³/12) = 0,  Var Z = Δt⁵/720
        let dt: f64 = 0.37;
        let cov = crate::noise::increment_covariance(dt).unwrap();
        let czu = 3.0 * cov[(2, 1)] + dt / 6.0 * cov[(1, 1)];
        let vz = 9.0 * cov[(2, 2)] + dt * dt / 36.0 * cov[(1, 1)] + dt * cov[(1, 2)];
        assert!(czu.abs() < 1e-18);
        assert_relative_eq!(vz, dt.powi(5) / 720.0, max_relative = 1e-12);
    }
}
