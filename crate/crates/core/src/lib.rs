//! Pseudo-spectral simulation of viscous Alfvén waves in Elsässer variables
//! on a periodic box, with the characteristic geometry (optical functions,
//! wrapped labels, flow maps) and weighted energy diagnostics built on top.

pub mod characteristics;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod interp;
pub mod io;
pub mod mhd;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use spectral::{Grid, Spectrum};
