use thiserror::Error;

use crate::fit::FitReport;
use crate::uncertainty::BootstrapReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// The group index vanished, so the pulling factor has a pole here.
    #[error("pulling factor pole at detuning {detuning_hz} Hz (group index {group_index:e})")]
    Pole { detuning_hz: f64, group_index: f64 },

    #[error("pf_max diverges: resonance strength equals the bifurcation threshold")]
    Threshold,

    #[error("operation requires a single-line medium, got {0} lines")]
    NotSingleLine(usize),

    #[error("no lasing solution for empty-cavity detuning {delta_f_e_hz} Hz in window [{lo_hz}, {hi_hz}] Hz")]
    NoSolution {
        delta_f_e_hz: f64,
        lo_hz: f64,
        hi_hz: f64,
    },

    #[error("need at least {required} points, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("flat data: all lasing detunings are equal")]
    FlatData,

    #[error("ill-conditioned least squares: {0}")]
    Conditioning(String),

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        best: Box<FitReport>,
    },

    #[error("derivative undefined at {delta_f_e_hz} Hz (branch fold / jump point)")]
    UndefinedDerivative { delta_f_e_hz: f64 },

    #[error("unstable bootstrap: {failed} of {replicates} replicate fits failed")]
    UnstableBootstrap {
        failed: usize,
        replicates: usize,
        partial: Box<BootstrapReport>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}
