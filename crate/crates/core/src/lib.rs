//! Strong-order integrators for additive-noise Langevin dynamics
//!
//! ```text
//! dX = V dt
//! dV = (f(X) − Γ V) dt + σ dW
//! ```
//!
//! with Itô–Taylor schemes of orders 1 to 3, splitting schemes built on the
//! exact Ornstein–Uhlenbeck flow, and a coupled Monte Carlo harness that
//! measures strong convergence orders.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod models;
pub mod noise;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod scheme;
pub mod splitting;
pub mod taylor;

pub use error::{Error, Result};
pub use harness::{strong_error_experiment, ConvergenceReport, Coupling, ExperimentConfig, ReferenceMethod};
pub use model::{ForceField, LangevinModel, PhaseState};
pub use scheme::{SchemeKind, Stepper};
