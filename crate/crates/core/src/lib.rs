//! Exact simulation of an NV-center spin qubit coupled to a few ¹³C nuclear
//! spins under pure dephasing.
//!
//! The crate follows the joint qubit–bath state through the conditional
//! propagators of the two qubit pointer states and compares two quantities
//! over time: the qubit–environment Negativity and one minus the Uhlmann
//! fidelity of the two conditional bath states.
//!
//! Units: lengths in Å, fields in T, times in µs. Hamiltonians are angular
//! frequencies in rad/µs (ħ = 1, ω = 2π·f with f in MHz), so every
//! propagator is `exp(-i H t)`.
//!
//! Module map:
//! - [`env_model`]: diamond lattice bath geometry and hyperfine couplings,
//!   with the coupling tensor variants in a name-keyed registry.
//! - [`spin_algebra`]: spin-1/2 operators, bath Hamiltonians, initial state.
//! - [`numerics`]: Hermitian kernels (eigh, expm, sqrtm, partial transpose).
//! - [`dynamics`]: conditional propagators and joint states.
//! - [`metrics`]: Negativity, fidelity, witnesses and time series.
//! - [`scenario`]: configuration, seeded runs and CSV/JSON output.

pub mod dynamics;
pub mod env_model;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod scenario;
pub mod spin_algebra;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;

/// Dense complex matrix used throughout.
pub type CMatrix = nalgebra::DMatrix<C64>;
