//! Itô–Taylor one-step maps for the Langevin system.
//!
//! With drift `a(x, v) = (v, f(x) − Γv)` and the additive noise columns
//! `(0, σʲ)`, every coefficient with two stochastic indices vanishes and the
//! expansions reduce to
//!
//! ```text
//! order 1:  (x, v) + a Δt + (0, σΔW)
//! order 2:  + (Δt²/2) L⁰a + (σ, −Γσ) I_(j,0)
//! order 3:  + (Δt³/6) L⁰L⁰a + (−Γσ, Df σ + Γ²σ) I_(j,0,0)
//! ```
//!
//! where `L⁰a = (f − Γv, Df v − Γf + Γ²v)` and
//! `L⁰L⁰a = (Df v − Γf + Γ²v, D²f[v,v] − Γ Df v + Df(f − Γv) + Γ²(f − Γv))`.
//! Order 1 is Euler–Maruyama.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_len, Vector};
use crate::model::{LangevinModel, PhaseState};
use crate::noise::StepIncrements;

/// Directions shorter than this are treated as zero.
const TINY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaylorOrder {
    One,
    Two,
    Three,
}

impl TaylorOrder {
    pub fn from_order(order: u8) -> Result<Self> {
        match order {
            1 => Ok(TaylorOrder::One),
            2 => Ok(TaylorOrder::Two),
            3 => Ok(TaylorOrder::Three),
            _ => Err(Error::InvalidArgument(format!(
                "Taylor order must be 1, 2 or 3, got {order}"
            ))),
        }
    }

    pub fn order(self) -> u8 {
        match self {
            TaylorOrder::One => 1,
            TaylorOrder::Two => 2,
            TaylorOrder::Three => 3,
        }
    }
}

/// Forward-difference `Df(x) u` with `ε = √eps (1 + |x|) / |u|`.
pub fn jvp_fd(model: &LangevinModel, x: &Vector, u: &Vector) -> Result<Vector> {
    ensure_len(u, model.dim(), "jvp direction")?;
    ensure_finite(x, "jvp base point")?;
    ensure_finite(u, "jvp direction")?;
    let un = u.norm();
    if un < TINY {
        return Ok(Vector::zeros(model.dim()));
    }
    let eps = f64::EPSILON.sqrt() * (1.0 + x.norm()) / un;
    let fx = model.force(x)?;
    let fp = model.force(&(x + u * eps))?;
    Ok((fp - fx) / eps)
}

/// `Df(x) u`, analytic when the force field provides it.
pub fn jvp(model: &LangevinModel, x: &Vector, u: &Vector) -> Result<Vector> {
    match model.force_field().jvp(x, u) {
        Some(r) => {
            let d = r?;
            ensure_finite(&d, "jvp")?;
            Ok(d)
        }
        None => jvp_fd(model, x, u),
    }
}

/// `D²f(x)[u, u]`: analytic, else a central difference of the analytic jvp,
/// else a central second difference of the force.
pub fn second_directional(model: &LangevinModel, x: &Vector, u: &Vector) -> Result<Vector> {
    let field = model.force_field();
    if let Some(r) = field.second_directional(x, u) {
        let d = r?;
        ensure_finite(&d, "second directional derivative")?;
        return Ok(d);
    }
    let un = u.norm();
    if un < TINY {
        return Ok(Vector::zeros(model.dim()));
    }
    let scale = (1.0 + x.norm()) / un;
    if model.has_analytic_jvp() {
        let h = f64::EPSILON.cbrt() * scale;
        let plus = jvp(model, &(x + u * h), u)?;
        let minus = jvp(model, &(x - u * h), u)?;
        Ok((plus - minus) / (2.0 * h))
    } else {
        let h = f64::EPSILON.powf(0.25) * scale;
        let plus = model.force(&(x + u * h))?;
        let mid = model.force(x)?;
        let minus = model.force(&(x - u * h))?;
        Ok((plus - mid * 2.0 + minus) / (h * h))
    }
}

/// One Itô–Taylor step of the given order.
pub fn taylor_step(
    model: &LangevinModel,
    s: &PhaseState,
    inc: &StepIncrements,
    order: TaylorOrder,
) -> Result<PhaseState> {
    let n = model.dim();
    ensure_len(&s.x, n, "state position")?;
    ensure_len(&s.v, n, "state velocity")?;
    ensure_len(&inc.dw, n, "Wiener increment")?;
    let (x, v) = (&s.x, &s.v);
    let dt = inc.dt;
    let g = &model.gamma;
    let sigma = &model.sigma;
    let f = model.force(x)?;
    let gv = g * v;
    let drift_v = &f - &gv;

    let mut x1 = x + v * dt;
    let mut v1 = v + &drift_v * dt + sigma * &inc.dw;
    if order == TaylorOrder::One {
        return PhaseState::new(x1, v1).checked();
    }

    let s_j0 = sigma * inc.i_j0()?;
    let dfv = jvp(model, x, v)?;
    // L⁰a, velocity part: Df v − Γ f + Γ² v
    let l0_v = &dfv - g * &f + g * &gv;
    let h2 = 0.5 * dt * dt;
    x1 += &drift_v * h2 + &s_j0;
    v1 += &l0_v * h2 - g * &s_j0;
    if order == TaylorOrder::Two {
        return PhaseState::new(x1, v1).checked();
    }

    let s_j00 = sigma * inc.i_j00()?;
    let d2f = second_directional(model, x, v)?;
    let df_drift = jvp(model, x, &drift_v)?;
    let df_gv = g * &dfv;
    let top = &d2f - &df_gv + &df_drift + g * (g * &drift_v);
    let h3 = dt * dt * dt / 6.0;
    let df_sj00 = jvp(model, x, &s_j00)?;
    x1 += &l0_v * h3 - g * &s_j00;
    v1 += &top * h3 + &df_sj00 + g * (g * &s_j00);
    PhaseState::new(x1, v1).checked()
}
