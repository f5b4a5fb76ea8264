//! k-space pseudo-spectral time-domain acoustics on a staggered grid with a
//! PML and power-law absorption, plus the exact transpose of the discrete
//! time stepping.

mod measurement;
mod medium;
mod solver;
mod spectral;

pub use measurement::{Detectors, MeasurementSeries};
pub use medium::{cfl_time_step, db_to_neper, AcousticMedium};
pub use solver::{AcousticSolver, AcousticState, StepWork};
pub use spectral::{blackman, FftBuffers, FftNd, FftScratch, SpectralOps};

#[cfg(test)]
pub(crate) mod tests;
