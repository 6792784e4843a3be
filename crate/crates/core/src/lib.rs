//! Design and simulation toolkit for quasi-phasematched nonlinear crystals.
//!
//! * [`dispersion`]: Sellmeier and thermo-optic index models, thermal expansion
//! * [`mismatch`]: phase mismatch of ZZZ/ZYY/YZY processes, poling periods,
//!   two-point temperature calibration
//! * [`grating`]: signed domain sequences, periodic and multigrating
//!   structures, closed-form Fourier coefficients
//! * [`dualgrid`]: quasiperiodic tilings phasematching several processes
//! * [`shg`]: relative SHG efficiency, sweeps, bandwidths, ODE oracle
//! * [`design_file`]: design export/import

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design_file;
pub mod dispersion;
pub mod dualgrid;
pub mod error;
pub mod grating;
pub mod mismatch;
pub mod shg;

pub use dispersion::{Axis, CoefficientLibrary, CrystalDispersion, ExpansionModel, SellmeierModel};
pub use dualgrid::{BasisConvention, DualGridDesign, ReciprocalBasis};
pub use error::{QpmError, Result};
pub use grating::{
    fourier_coefficient, periodic_fourier_analytic, Channel, Domain, DomainSequence,
    MultigratingCrystal, PeriodicGrating, Sign, Structure,
};
pub use mismatch::{phase_mismatch, qpm_period, CalibrationPoint, MismatchModel, Process};
pub use shg::{CouplingSet, EfficiencyCurve, ShgSetup, SweepSpec, SweepVariable};
