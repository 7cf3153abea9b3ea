use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dimension {dim} exceeds the configured budget of {max} (set NONMARKOV_MAX_DIM to raise it)")]
    DimensionBudget { dim: usize, max: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("map is not completely positive: minimum Choi eigenvalue {min_eigenvalue:e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("map is not diagonalizable to working precision: {0}")]
    DefectiveMap(String),

    #[error("map is not invertible: |lambda_{index}| = {modulus:e}")]
    NotInvertible { index: usize, modulus: f64 },

    #[error("trajectory has {points} samples, at least 3 are required")]
    GridTooCoarse { points: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("damping basis tracking lost at grid index {index} (best overlap {overlap:.3})")]
    BasisTrackingLost { index: usize, overlap: f64 },

    #[error("generator singularity at t = {t} cannot be crossed: no exact integral and excision disabled")]
    SingularityUnresolvable { t: f64 },

    #[error("adaptive step underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("generator evaluation produced non-finite entries at t = {t}")]
    NonFiniteGenerator { t: f64 },

    #[error("history storage of {required} bytes exceeds the memory budget of {budget} bytes")]
    MemoryBudgetExceeded { required: usize, budget: usize },

    #[error("invalid step size {h}")]
    StepInvalid { h: f64 },

    #[error("invalid time interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },

    #[error("cumulative waiting-time function saturates at tau = {tau}")]
    HorizonSaturated { tau: f64 },

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("projection is invalid: {0}")]
    ProjectionInvalid(String),

    #[error("generators {first} and {second} do not commute (commutator norm {norm:e})")]
    NonCommuting {
        first: usize,
        second: usize,
        norm: f64,
    },

    #[error("cumulative rate {index} is negative at tau = {tau} (value {value:e})")]
    NegativeCumulative { index: usize, tau: f64, value: f64 },

    #[error("generator {index} is not of Lindblad form (witness {witness:e})")]
    NotLindblad { index: usize, witness: f64 },

    #[error("coherence c_{m}{n} vanishes at t = {t} (|c| = {modulus:e})")]
    CoherenceZeroCrossing {
        m: usize,
        n: usize,
        t: f64,
        modulus: f64,
    },
}
