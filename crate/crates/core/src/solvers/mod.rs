//! Reconstruction drivers and their building blocks.

mod admm;
mod lbfgs;
mod newton;
mod pcg;
mod trace;

pub use admm::{run_admm, AdmmConfig};
pub use lbfgs::{line_search, lbfgs_minimize, project_direction, LbfgsConfig, LbfgsMemory, LbfgsOutcome, LineSearchOutcome, LineSearchParams};
pub use newton::{run_ld, run_pdipm, LdConfig, PdIpmConfig};
pub use pcg::{pcg_solve, PcgConfig, PcgOutcome};
pub use trace::{IterationRecord, Monitor, SolveTrace};

use crate::optical::CoefficientPair;

/// Final coefficients and per-iteration history of one driver run.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub coeffs: CoefficientPair,
    pub xbar: Vec<f64>,
    pub trace: SolveTrace,
}
