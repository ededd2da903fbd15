//! Two-component Hartree ground states on a square.
//!
//! The crate discretizes the coupled nonlocal eigenvalue system with
//! piecewise-bilinear finite elements and mass lumping, solves each
//! linearized problem with a shifted power method and wraps both in a
//! successive-substitution (Picard) loop. The `cli` module drives
//! interaction-strength sweeps and writes gnuplot-friendly output.

pub mod assembly;
pub mod cli;
pub mod eigensolver;
pub mod error;
pub mod grid;
pub mod mss;
pub mod observables;
pub mod potentials;

pub use assembly::{ConvolutionPath, Convolver, HamiltonianOperator, ShiftRule, StiffnessStencil};
pub use eigensolver::{FieldVector, PmResult, PowerMethod};
pub use error::{Error, Result};
pub use grid::Lattice;
pub use mss::{CouplingSpec, HartreeSystem, InitMode, MssOptions, MssSolution, MssState};
pub use observables::{EnergyBreakdown, SweepRecord};
pub use potentials::{HarmonicPotential, InteractionPotential, KernelTable, YukawaPotential};
