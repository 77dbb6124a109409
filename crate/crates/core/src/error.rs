use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hilbert dimension {dim} exceeds the basis budget of {budget} states")]
    DimensionBudget { dim: u128, budget: u64 },

    #[error("site {site} out of range for a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Discarded Poisson weight above the Fock cutoff is larger than allowed.
    #[error("{}", truncation_message(*.tail, *.threshold, *.time))]
    Truncation {
        tail: f64,
        threshold: f64,
        time: Option<f64>,
    },

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("relative {quantity} drift {drift:.3e} exceeds tolerance {tolerance:.3e} at t = {time}")]
    Drift {
        quantity: &'static str,
        drift: f64,
        tolerance: f64,
        time: f64,
    },

    #[error("operator is not Hermitian: entry ({row}, {col}) differs from its mirror by {mismatch:.3e}")]
    NotHermitian { row: usize, col: usize, mismatch: f64 },

    #[error("Krylov propagation did not converge at t = {time}: residual estimate {residual:.3e} > tolerance {tolerance:.3e}")]
    KrylovBreakdown {
        time: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("short-time fit residual {residual:.3e} exceeds threshold {threshold:.3e}")]
    FitResidual { residual: f64, threshold: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn truncation_message(tail: f64, threshold: f64, time: Option<f64>) -> String {
    match time {
        Some(t) => format!(
            "Fock cutoff too small at t = {t}: discarded probability {tail:.3e} exceeds threshold {threshold:.3e}"
        ),
        None => format!(
            "Fock cutoff too small: discarded probability {tail:.3e} exceeds threshold {threshold:.3e}"
        ),
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
