//! Ground-state laboratory for the two-dimensional attractive Gross-Pitaevskii
//! energy in a rotating trap.
//!
//! The crate solves the scalar-field profile `w` and critical coupling `a*`,
//! minimizes the mass-constrained energy `e_F(a)` on a periodic pseudospectral
//! grid, and provides the instrumentation needed to verify blow-up scaling,
//! concentration, phase alignment, spectral structure and local uniqueness of
//! minimizers as `a` approaches `a*` from below.

pub mod asymptotics;
pub mod concentration;
pub mod field;
pub mod gp2d;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod spectra;
pub mod townes;
pub mod trap;
pub mod uniqueness;

pub use asymptotics::{AlignedProfile, AsymptoticsReport, BlowupRow, DecayReport};
pub use concentration::ConcentrationData;
pub use field::ComplexField;
pub use gp2d::{GroundState, Init, MinimizeOpts};
pub use grid::Grid2D;
pub use harness::{RunConfig, SweepOutcome};
pub use spectra::{LinearizedOp, OperatorTag, SpectrumReport};
pub use townes::RadialProfile;
pub use trap::{HomogeneousFn, TrapSpec};
pub use uniqueness::{ModeDecomposition, PohozaevMatrix, UniquenessReport, Verdict};
