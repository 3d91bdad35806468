//! Elsässer form of viscous incompressible MHD with background field
//! `B0 = (0, 0, 1)`:
//!
//! ```text
//! d_t z+ + Z- . grad z+ - mu Lap z+ = -grad p,   Z- = z- - B0
//! d_t z- + Z+ . grad z- - mu Lap z- = -grad p,   Z+ = z+ + B0
//! ```
//!
//! `z+` therefore travels towards `-x3` and `z-` towards `+x3` at unit speed.

mod decomposition;
mod init;
pub(crate) mod solver;
mod vorticity;

pub use decomposition::DecompositionState;
pub use init::{init_state, MAX_AMPLITUDE, single_mode_polarization, InitialCondition, PacketShape, SpeciesSel};
pub use solver::{MhdSolver, StepOutcome};
pub use vorticity::vorticity_residual;

use crate::error::{Error, Result};
use crate::field::VectorField;

/// The two wave families. `Plus` is advected by `Z-`, `Minus` by `Z+`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Species {
    Plus,
    Minus,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Plus, Species::Minus];

    /// `+1` for `Plus`, `-1` for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Species::Plus => 1.0,
            Species::Minus => -1.0,
        }
    }

    pub fn other(self) -> Species {
        match self {
            Species::Plus => Species::Minus,
            Species::Minus => Species::Plus,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Species::Plus => 0,
            Species::Minus => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::Plus => "plus",
            Species::Minus => "minus",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElsasserState {
    pub t: f64,
    pub z_plus: VectorField,
    pub z_minus: VectorField,
}

impl ElsasserState {
    pub fn zeros(n: usize) -> Self {
        Self { t: 0.0, z_plus: VectorField::zeros(n), z_minus: VectorField::zeros(n) }
    }

    pub fn z(&self, s: Species) -> &VectorField {
        match s {
            Species::Plus => &self.z_plus,
            Species::Minus => &self.z_minus,
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.z_plus.max_abs().max(self.z_minus.max_abs())
    }

    pub fn n(&self) -> usize {
        self.z_plus.n()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub mu: f64,
    pub dt: f64,
    pub cfl_safety: f64,
    pub dealias: bool,
}

impl SolverParams {
    pub fn new(mu: f64, dt: f64) -> Result<Self> {
        let p = Self { mu, dt, cfl_safety: 1.0, dealias: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Validation(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Validation(format!(
                "cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        Ok(())
    }

    /// Largest admissible step: advection speed is bounded by `|B0| + max|z|`.
    pub fn cfl_bound(&self, dx: f64, max_amplitude: f64) -> f64 {
        self.cfl_safety * dx / (1.0 + max_amplitude)
    }
}
