use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max deviation {deviation:e} > {tolerance:e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("iterative solver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("support {0:?} is not a sorted contiguous run of sites")]
    NonContiguousSupport(alloc::vec::Vec<usize>),

    #[error("input vectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("invalid state spec: {0}")]
    InvalidSpec(String),

    #[error("state too large: {0}")]
    TooLarge(String),

    #[error("cut {cut} is outside 1..{n}")]
    BadCut { cut: usize, n: usize },

    #[error("block {block:?} lies outside a register of {sites} sites")]
    BlockOutOfRange { block: alloc::vec::Vec<usize>, sites: usize },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("rank cap {cap} exceeds block dimension {dim}")]
    RankCapExceedsDim { cap: usize, dim: usize },

    #[error("register of {n} sites is too small for block size {p}")]
    TooSmall { n: usize, p: usize },

    #[error("Lambert W principal branch needs z >= 0, got {0}")]
    NegativeArgument(f64),

    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),

    #[error("infeasible plan: {0}")]
    PlanInfeasible(String),

    #[error("backend too large: {0}")]
    BackendTooLarge(String),

    #[error("tomography oracle failed: {0}")]
    OracleFailure(String),

    #[error("audit snapshots were not retained for this run")]
    AuditDisabled,

    #[error("malformed circuit: {0}")]
    MalformedCircuit(String),

    #[error("bond dimension {0} gives log_d D = 0; formula undefined")]
    DegenerateD(usize),
}
