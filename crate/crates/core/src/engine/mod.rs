//! Dense execution backends: exact gate application, pulse-level time
//! integration, and projective sampling.

mod diag;
mod ideal;
mod krylov;
pub mod magnus;
mod pulse;
mod sample;
mod state;

pub use diag::{DiagTable, MaskIndex};
pub use ideal::{apply_gate, run_ideal, run_ideal_with};
pub use krylov::Krylov;
pub use pulse::{active_sites, apply_hamiltonian, pulse_layout, pulse_schedule, run_pulse, BackendConfig, LayoutHint, RunRecord, PULSE_ROUTINE_LIMIT};
pub use sample::{sample_measurements, exact_distribution, Histogram, ReadoutBin, Scheme};
pub use state::{QutritState, MAX_DENSE_SITES};
