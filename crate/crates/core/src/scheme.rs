//! Scheme catalogue and a uniform stepping interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LangevinModel, PhaseState};
use crate::noise::StepNoise;
use crate::splitting::{
    BracketWeight, Composition, DirectStepper, DirectVariant, SplitStepper, SvvStepper, Truncation,
};
use crate::taylor::{taylor_step, TaylorOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Taylor1,
    Taylor2,
    Taylor3,
    DirectAb,
    DirectSym,
    Svv,
    Trunc1Naive,
    Trunc1Sym,
    Trunc2Naive,
    Trunc2Sym,
    Trunc3Neri,
    /// Truncation III with the bracket weight `ΔV` in place of `3ΔV + ΔtΔU/6`.
    Trunc3NeriLiteral,
}

/// Which stochastic quantities a scheme consumes beyond `ΔW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseNeeds {
    /// `I_(j,0)`, `ΔU`
    pub first: bool,
    /// `I_(j,0,0)`, `ΔV`
    pub second: bool,
    /// OU integrals `J`, `K`
    pub ou: bool,
}

impl NoiseNeeds {
    pub fn union(self, other: NoiseNeeds) -> NoiseNeeds {
        NoiseNeeds {
            first: self.first || other.first,
            second: self.second || other.second,
            ou: self.ou || other.ou,
        }
    }
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 12] = [
        SchemeKind::Taylor1,
        SchemeKind::Taylor2,
        SchemeKind::Taylor3,
        SchemeKind::DirectAb,
        SchemeKind::DirectSym,
        SchemeKind::Svv,
        SchemeKind::Trunc1Naive,
        SchemeKind::Trunc1Sym,
        SchemeKind::Trunc2Naive,
        SchemeKind::Trunc2Sym,
        SchemeKind::Trunc3Neri,
        SchemeKind::Trunc3NeriLiteral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Taylor1 => "taylor1",
            SchemeKind::Taylor2 => "taylor2",
            SchemeKind::Taylor3 => "taylor3",
            SchemeKind::DirectAb => "direct-ab",
            SchemeKind::DirectSym => "direct-sym",
            SchemeKind::Svv => "svv",
            SchemeKind::Trunc1Naive => "trunc1-naive",
            SchemeKind::Trunc1Sym => "trunc1-sym",
            SchemeKind::Trunc2Naive => "trunc2-naive",
            SchemeKind::Trunc2Sym => "trunc2-sym",
            SchemeKind::Trunc3Neri => "trunc3-neri",
            SchemeKind::Trunc3NeriLiteral => "trunc3-neri-literal",
        }
    }

    /// The strong order the scheme is expected to reach.
    pub fn expected_order(self) -> f64 {
        match self {
            SchemeKind::Taylor1
            | SchemeKind::DirectAb
            | SchemeKind::DirectSym
            | SchemeKind::Trunc1Naive
            | SchemeKind::Trunc1Sym
            | SchemeKind::Trunc2Naive => 1.0,
            SchemeKind::Taylor2 | SchemeKind::Svv | SchemeKind::Trunc2Sym | SchemeKind::Trunc3NeriLiteral => 2.0,
            SchemeKind::Taylor3 | SchemeKind::Trunc3Neri => 3.0,
        }
    }

    pub fn needs(self) -> NoiseNeeds {
        match self {
            SchemeKind::Taylor1 | SchemeKind::Trunc1Naive | SchemeKind::Trunc1Sym => NoiseNeeds::default(),
            SchemeKind::Taylor2 | SchemeKind::Trunc2Naive | SchemeKind::Trunc2Sym => NoiseNeeds {
                first: true,
                ..Default::default()
            },
            SchemeKind::Taylor3 | SchemeKind::Trunc3Neri | SchemeKind::Trunc3NeriLiteral => NoiseNeeds {
                first: true,
                second: true,
                ou: false,
            },
            SchemeKind::DirectAb | SchemeKind::DirectSym | SchemeKind::Svv => NoiseNeeds {
                ou: true,
                ..Default::default()
            },
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        SchemeKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}` (valid: {})", Self::valid_names())))
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Taylor(LangevinModel, TaylorOrder),
    Split(SplitStepper),
    Direct(DirectStepper),
    Svv(SvvStepper),
}

/// A scheme bound to a model and step size, with its coefficient matrices
/// computed once.
#[derive(Debug, Clone)]
pub struct Stepper {
    kind: SchemeKind,
    dt: f64,
    inner: Inner,
}

impl Stepper {
    pub fn new(model: &LangevinModel, kind: SchemeKind, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
        }
        let split = |t, c, w| SplitStepper::new(model, dt, t, c, w).map(Inner::Split);
        let inner = match kind {
            SchemeKind::Taylor1 => Inner::Taylor(model.clone(), TaylorOrder::One),
            SchemeKind::Taylor2 => Inner::Taylor(model.clone(), TaylorOrder::Two),
            SchemeKind::Taylor3 => Inner::Taylor(model.clone(), TaylorOrder::Three),
            SchemeKind::DirectAb => Inner::Direct(DirectStepper::new(model, dt, DirectVariant::AB)?),
            SchemeKind::DirectSym => Inner::Direct(DirectStepper::new(model, dt, DirectVariant::Sym)?),
            SchemeKind::Svv => Inner::Svv(SvvStepper::new(model, dt)?),
            SchemeKind::Trunc1Naive => split(Truncation::One, Composition::Naive, BracketWeight::Corrected)?,
            SchemeKind::Trunc1Sym => split(Truncation::One, Composition::Symmetric, BracketWeight::Corrected)?,
            SchemeKind::Trunc2Naive => split(Truncation::Two, Composition::Naive, BracketWeight::Corrected)?,
            SchemeKind::Trunc2Sym => split(Truncation::Two, Composition::Symmetric, BracketWeight::Corrected)?,
            SchemeKind::Trunc3Neri => split(Truncation::Three, Composition::Neri, BracketWeight::Corrected)?,
            SchemeKind::Trunc3NeriLiteral => split(Truncation::Three, Composition::Neri, BracketWeight::Literal)?,
        };
        Ok(Stepper { kind, dt, inner })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, s: &PhaseState, noise: &StepNoise) -> Result<PhaseState> {
        if (noise.inc.dt - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidArgument(format!(
                "increments are for dt = {}, stepper uses {}",
                noise.inc.dt, self.dt
            )));
        }
        match &self.inner {
            Inner::Taylor(model, order) => taylor_step(model, s, &noise.inc, *order),
            Inner::Split(st) => st.step(s, &noise.inc),
            Inner::Direct(st) => st.step(s, noise.ou()?),
            Inner::Svv(st) => st.step(s, noise.ou()?),
        }
    }

    /// Run over a sequence of step noises, returning the terminal state.
    pub fn run<'a, I>(&self, initial: &PhaseState, noises: I) -> Result<PhaseState>
    where
        I: IntoIterator<Item = &'a StepNoise>,
    {
        let mut s = initial.clone();
        for noise in noises {
            s = self.step(&s, noise)?;
        }
        Ok(s)
    }
}
