use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("eigen-decomposition did not converge (residual {residual:.3e})")]
    ConvergenceFailure { residual: f64 },
    #[error("output positivity violated (min eigenvalue {min_eig:.3e})")]
    PositivityViolated { min_eig: f64 },
    #[error("condition (E) fails: {0}")]
    ConditionE(String),
    #[error("no invariant state: {0}")]
    NoInvariantState(String),
    #[error("spectrum meets the contour (distance {distance:.3e})")]
    SpectrumOnContour { distance: f64 },
    #[error("ambiguous clustering: {0}")]
    AmbiguousCluster(String),
    #[error("probe state is not Gibbs at beta = {beta} (defect {defect:.3e})")]
    NotGibbs { beta: f64, defect: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("interaction is not off-diagonal with respect to the probe ground state (defect {defect:.3e})")]
    NotOffDiagonal { defect: f64 },
    #[error("boundary leakage {leakage:.3e} exceeds tolerance {tol:.3e}")]
    Leakage { leakage: f64, tol: f64 },
    #[error("degenerate resonance structure: {0}")]
    Degenerate(String),
    #[error("negative probability {0:.3e}")]
    NegativeProbability(f64),
    #[error("finite-difference extrapolation disagreement {0:.3e}")]
    Extrapolation(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
