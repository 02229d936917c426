//! Frequency response of a laser cavity with a dispersive intracavity medium.
//!
//! * [`dispersion`]: Lorentzian index model, group index, pulling factor,
//!   analytic extrema and the bifurcation threshold.
//! * [`solver`]: the lasing-resonance condition, multi-root solving, fold
//!   detection and branch-tracking sweeps with hysteresis jumps.
//! * [`fit`]: single-line and degree-5 polynomial fits of measured curves.
//! * [`uncertainty`]: smoothed residual bootstrap confidence intervals.
//! * [`io`] and [`cli`]: CSV/JSON formats and the `pulling` command line.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod fit;
pub mod io;
pub mod solver;
pub mod uncertainty;

pub use error::{Error, Result};
