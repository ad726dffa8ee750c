use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("hilbert order needs a square lattice with power-of-two side, got {rows}x{cols}")]
    UnsupportedOrder { rows: usize, cols: usize },
    #[error("sites {0} and {1} are not nearest neighbours")]
    NonAdjacent(usize, usize),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("search exhausted after {rounds} rounds without reaching the target")]
    SearchExhausted { rounds: usize },
    #[error("crosstalk radius infeasible: {0}")]
    Infeasible(String),
    #[error("{n} sites exceed the dense limit of {max}")]
    TooManySites { n: usize, max: usize },
    #[error("pulse run on {n} sites needs about {bytes} bytes; pass the large-run flag to proceed")]
    LargeRun { n: usize, bytes: u64 },
    #[error("integrator unstable: dt * max drive = {0:.3} > 0.5")]
    IntegratorUnstable(f64),
    #[error("calibration failed: best fidelity {fidelity:.6}")]
    CalibrationFailed { fidelity: f64, params: Vec<f64> },
    #[error("state layouts differ")]
    LayoutMismatch,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("missing snapshots: {0}")]
    MissingSnapshots(String),
    #[error("empty series")]
    EmptySeries,
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
