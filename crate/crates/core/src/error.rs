use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("Jacobi iteration did not converge within {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("secular root {index} escaped its interlacing bracket")]
    BracketFailure { index: usize },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("empty input")]
    EmptyInput,
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense budget exceeded: {n} parameters (limit {limit})")]
    BudgetExceeded { n: usize, limit: usize },
    #[error("resonant mode: |k^2 - omega^2| = {gap:e} at k = {k}")]
    Resonant { k: i64, gap: f64 },
    #[error("near-resonant pair (k, m) = ({k}, {m}): |symbol| = {symbol:e}")]
    NearResonant { k: i64, m: i64, symbol: f64 },
    #[error("largest eigenvalue {0:e} is not positive")]
    NonPositiveSpectrum(f64),
    #[error("gradient descent diverged at step {step} (loss {loss:e})")]
    Diverged { step: usize, loss: f64 },
    #[error("trajectory converged below the fitting floor after {steps} steps")]
    Converged { steps: usize },
    #[error("condition number is infinite over the whole bracket")]
    AllSingular,
    #[error("boundary trace of the tangent features vanishes")]
    ZeroBoundaryTrace,
    #[error("boundary loss gradient vanishes")]
    ZeroBoundaryGradient,
}

pub type Result<T> = std::result::Result<T, Error>;
