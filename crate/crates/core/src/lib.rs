//! Digital twin of a two-dimensional Rydberg-atom processor.
//!
//! The crate compiles GHZ-preparation circuits under a crosstalk radius,
//! lowers them to native gates and simulates them on qutrit state vectors,
//! either gate by gate or at the pulse level with van der Waals interactions
//! and Rydberg decay.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit_ir;
pub mod compiler;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod physics;
pub mod scheduler;

pub use analysis::{ghz_fidelity, FidelityReport, RunSummary};
pub use circuit_ir::{Circuit, CircuitMetadata, CircuitStats, Gate, Layer, Level};
pub use compiler::{compile, CompileMode, CompileOutput, CompileRequest, CzPlan, GhzTarget, SearchReport, TruncationPolicy};
pub use error::{Error, Result};
pub use engine::{BackendConfig, QutritState, RunRecord};
pub use lattice::{Lattice, LatticeKind, LatticeSpec, Site, SymmetryGroup};
pub use physics::{CzPulse, DeviceParams, DeviceProfile, PulseSchedule};
