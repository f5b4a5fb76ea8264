use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::geometry::{linear_index, multi_index, Grid};

/// Converts `α₀` in dB MHz^-y cm^-1 to Np (rad/s)^-y m^-1.
pub fn db_to_neper(alpha0_db: f64, y: f64) -> f64 {
    100.0 * alpha0_db / (20.0 / std::f64::consts::LN_10) * (2.0 * PI * 1e6).powf(-y)
}

/// Acoustic properties on the padded computational grid.
#[derive(Debug, Clone)]
pub struct AcousticMedium {
    /// Sound speed, m/s.
    pub c: Vec<f64>,
    /// Ambient density, kg/m³.
    pub rho: Vec<f64>,
    /// Ambient density half a cell forward along each axis.
    pub rho_stag: Vec<Vec<f64>>,
    /// `α₀` in dB MHz^-y cm^-1.
    pub alpha0_db: f64,
    pub y: f64,
    /// Absorption proportionality `τ = -2α₀c^{y-1}`.
    pub tau: Vec<f64>,
    /// Dispersion proportionality `η = 2α₀c^y tan(πy/2)`.
    pub eta: Vec<f64>,
}

impl AcousticMedium {
    /// Builds a medium from maps on the domain nodes; values are replicated
    /// outward into the PML.
    pub fn new(grid: &Grid, c_domain: &[f64], rho_domain: &[f64], alpha0_db: f64, y: f64) -> Result<Self> {
        let nd = grid.domain_len();
        check_len("sound speed map", nd, c_domain.len())?;
        check_len("density map", nd, rho_domain.len())?;
        for (what, v) in [("sound speed", c_domain), ("ambient density", rho_domain)] {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x.is_finite())) {
                return Err(Error::NonPositive { what, index, value });
            }
        }
        if !(alpha0_db >= 0.0) {
            return Err(Error::config("attenuation coefficient must be non-negative"));
        }
        if alpha0_db > 0.0 && !(y > 1.0 && y < 2.0) {
            return Err(Error::config(format!("power-law exponent must lie in (1, 2), got {y}")));
        }
        let c = extend(grid, c_domain);
        let rho = extend(grid, rho_domain);
        let dims = grid.total_dims().to_vec();
        let rho_stag = (0..grid.dim())
            .map(|axis| {
                (0..rho.len())
                    .map(|lin| {
                        let mut idx = multi_index(&dims, lin);
                        idx[axis] = (idx[axis] + 1).min(dims[axis] - 1);
                        0.5 * (rho[lin] + rho[linear_index(&dims, &idx)])
                    })
                    .collect()
            })
            .collect();
        let alpha = db_to_neper(alpha0_db, y);
        let (tau, eta) = if alpha0_db == 0.0 {
            (vec![0.0; c.len()], vec![0.0; c.len()])
        } else {
            let t = (PI * y / 2.0).tan();
            (
                c.iter().map(|&ci| -2.0 * alpha * ci.powf(y - 1.0)).collect(),
                c.iter().map(|&ci| 2.0 * alpha * ci.powf(y) * t).collect(),
            )
        };
        Ok(AcousticMedium {
            c,
            rho,
            rho_stag,
            alpha0_db,
            y,
            tau,
            eta,
        })
    }

    pub fn homogeneous(grid: &Grid, c: f64, rho: f64, alpha0_db: f64, y: f64) -> Result<Self> {
        let n = grid.domain_len();
        Self::new(grid, &vec![c; n], &vec![rho; n], alpha0_db, y)
    }

    pub fn is_lossy(&self) -> bool {
        self.alpha0_db > 0.0
    }

    pub fn c_max(&self) -> f64 {
        self.c.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn c_min(&self) -> f64 {
        self.c.iter().copied().fold(f64::MAX, f64::min)
    }
}

/// Copies domain values into the padded grid, replicating the nearest
/// domain node into the PML.
fn extend(grid: &Grid, domain: &[f64]) -> Vec<f64> {
    let total = grid.total_dims();
    let dims = grid.domain_dims();
    let pml = grid.spec().pml_size;
    (0..grid.total_len())
        .map(|lin| {
            let idx: Vec<usize> = multi_index(total, lin)
                .iter()
                .zip(dims)
                .map(|(&t, &n)| t.saturating_sub(pml).min(n - 1))
                .collect();
            domain[linear_index(dims, &idx)]
        })
        .collect()
}

/// Time step from the CFL number and the fastest sound speed.
pub fn cfl_time_step(spacing_mm: &[f64], c_max: f64, cfl: f64) -> f64 {
    let h = spacing_mm.iter().copied().fold(f64::MAX, f64::min) * 1e-3;
    cfl * h / c_max
}
