use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{linear_index, multi_index};
use crate::error::{Error, Result};

/// Parameters of a uniform acoustic grid.
///
/// `dims` counts the nodes of the physical domain. The PML is laid around it,
/// so the computational grid has `dims[i] + 2 * pml_size` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    /// Node spacing per axis in mm.
    pub spacing: Vec<f64>,
    /// Coordinates of node 0 in mm; zeros when omitted.
    #[serde(default)]
    pub origin: Vec<f64>,
    /// Time step in seconds.
    pub dt: f64,
    pub nt: usize,
    pub pml_size: usize,
    /// Maximum PML attenuation in nepers per grid point.
    pub pml_alpha: f64,
    /// Reference sound speed for the k-space correction, m/s.
    pub c_ref: f64,
}

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims.len();
        if !(2..=3).contains(&d) {
            return Err(Error::config(format!("grid must be 2D or 3D, got {d} axes")));
        }
        if self.spacing.len() != d || (!self.origin.is_empty() && self.origin.len() != d) {
            return Err(Error::config("spacing/origin length must match dims"));
        }
        if let Some(n) = self.dims.iter().find(|&&n| n < 4) {
            return Err(Error::config(format!("grid needs at least 4 nodes per axis, got {n}")));
        }
        if self.spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::config("grid spacing must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time step must be positive"));
        }
        if self.nt < 2 {
            return Err(Error::config("need at least 2 time steps"));
        }
        let min_n = *self.dims.iter().min().unwrap();
        if 2 * self.pml_size >= min_n {
            return Err(Error::config(format!(
                "PML thickness {} must be below half the smallest axis ({min_n})",
                self.pml_size
            )));
        }
        if !(self.pml_alpha >= 0.0) {
            return Err(Error::config("PML attenuation must be non-negative"));
        }
        if !(self.c_ref > 0.0) {
            return Err(Error::config("reference sound speed must be positive"));
        }
        Ok(())
    }

    pub fn origin_or_zero(&self) -> Vec<f64> {
        if self.origin.is_empty() {
            vec![0.0; self.dims.len()]
        } else {
            self.origin.clone()
        }
    }

    /// Largest coordinate of the domain box per axis, mm.
    pub fn extent_max(&self) -> Vec<f64> {
        let o = self.origin_or_zero();
        (0..self.dim())
            .map(|a| o[a] + (self.dims[a] - 1) as f64 * self.spacing[a])
            .collect()
    }
}

/// A validated grid together with its per-axis spectral and PML data.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    total: Vec<usize>,
    /// Wavenumbers per axis in rad/m, in FFT order.
    pub k: Vec<Vec<f64>>,
    /// `exp(+i k Δr / 2)` per axis.
    pub shift_pos: Vec<Vec<Complex64>>,
    /// `exp(-i k Δr / 2)` per axis.
    pub shift_neg: Vec<Vec<Complex64>>,
    /// PML factor `A_i` per axis as a 1D profile over the padded axis.
    pub pml: Vec<Vec<f64>>,
    domain_to_total: Vec<usize>,
}

/// FFT-ordered angular wavenumbers for `n` samples spaced `h` apart.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|m| {
            let s = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
            s * dk
        })
        .collect()
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim();
        let total: Vec<usize> = spec.dims.iter().map(|n| n + 2 * spec.pml_size).collect();
        let mut k = Vec::with_capacity(d);
        let mut shift_pos = Vec::with_capacity(d);
        let mut shift_neg = Vec::with_capacity(d);
        let mut pml = Vec::with_capacity(d);
        for a in 0..d {
            let h = spec.spacing[a] * 1e-3;
            let ka = wavenumbers(total[a], h);
            shift_pos.push(ka.iter().map(|&kk| Complex64::from_polar(1.0, kk * h / 2.0)).collect());
            shift_neg.push(ka.iter().map(|&kk| Complex64::from_polar(1.0, -kk * h / 2.0)).collect());
            k.push(ka);
            pml.push(pml_profile(&spec, a, total[a]));
        }
        let domain_to_total = (0..spec.dims.iter().product())
            .map(|lin| {
                let idx: Vec<usize> = multi_index(&spec.dims, lin)
                    .into_iter()
                    .map(|i| i + spec.pml_size)
                    .collect();
                linear_index(&total, &idx)
            })
            .collect();
        Ok(Grid {
            spec,
            total,
            k,
            shift_pos,
            shift_neg,
            pml,
            domain_to_total,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn dt(&self) -> f64 {
        self.spec.dt
    }

    pub fn nt(&self) -> usize {
        self.spec.nt
    }

    pub fn c_ref(&self) -> f64 {
        self.spec.c_ref
    }

    /// Node counts of the padded computational grid.
    pub fn total_dims(&self) -> &[usize] {
        &self.total
    }

    pub fn total_len(&self) -> usize {
        self.total.iter().product()
    }

    pub fn domain_dims(&self) -> &[usize] {
        &self.spec.dims
    }

    pub fn domain_len(&self) -> usize {
        self.domain_to_total.len()
    }

    /// Padded-grid index of every domain node, in domain order.
    pub fn domain_to_total(&self) -> &[usize] {
        &self.domain_to_total
    }

    /// Spacing per axis in metres.
    pub fn spacing_m(&self, axis: usize) -> f64 {
        self.spec.spacing[axis] * 1e-3
    }

    /// Coordinates in mm of a domain node given by linear index.
    pub fn node_coord(&self, lin: usize) -> Vec<f64> {
        let o = self.spec.origin_or_zero();
        multi_index(&self.spec.dims, lin)
            .iter()
            .enumerate()
            .map(|(a, &i)| o[a] + i as f64 * self.spec.spacing[a])
            .collect()
    }

    /// Nearest domain node to a point in mm, clamped to the box.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let o = self.spec.origin_or_zero();
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = ((x[a] - o[a]) / self.spec.spacing[a]).round();
                t.clamp(0.0, (self.spec.dims[a] - 1) as f64) as usize
            })
            .collect();
        linear_index(&self.spec.dims, &idx)
    }

    /// Highest frequency (Hz) the grid resolves at two points per wavelength.
    pub fn max_frequency(&self, c_min: f64) -> f64 {
        let h = (0..self.dim()).map(|a| self.spacing_m(a)).fold(0.0, f64::max);
        c_min / (2.0 * h)
    }
}

fn pml_profile(spec: &GridSpec, axis: usize, n_total: usize) -> Vec<f64> {
    let l = spec.pml_size;
    if l == 0 || spec.pml_alpha == 0.0 {
        return vec![1.0; n_total];
    }
    let rate = spec.pml_alpha * spec.c_ref / (spec.spacing[axis] * 1e-3);
    let last = l + spec.dims[axis] - 1;
    (0..n_total)
        .map(|t| {
            let dist = if t < l {
                (l - t) as f64
            } else if t > last {
                (t - last) as f64
            } else {
                0.0
            };
            let alpha = rate * (dist / l as f64).powi(4);
            (-alpha * spec.dt / 2.0).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec2(n: usize, pml: usize, alpha: f64) -> GridSpec {
        GridSpec {
            dims: vec![n, n],
            spacing: vec![7.81e-2, 7.81e-2],
            origin: vec![],
            dt: 1.5e-8,
            nt: 10,
            pml_size: pml,
            pml_alpha: alpha,
            c_ref: 1500.0,
        }
    }

    #[test]
    fn generation_grid_with_pml_builds() {
        let g = Grid::new(spec2(128, 20, 2.0)).unwrap();
        assert_eq!(g.total_dims(), &[168, 168]);
        assert_eq!(g.domain_len(), 128 * 128);
        assert!(g.pml[0][0] < 1.0);
        assert_eq!(g.pml[0][20], 1.0);
        assert_eq!(g.pml[0][147], 1.0);
        assert!(g.pml[0][148] < 1.0);
        assert!((g.pml[0][0] - g.pml[0][167]).abs() < 1e-15);
    }

    #[test]
    fn zero_attenuation_gives_identity_pml() {
        let g = Grid::new(spec2(16, 4, 0.0)).unwrap();
        assert!(g.pml.iter().flatten().all(|&a| a == 1.0));
    }

    #[test]
    fn wavenumbers_match_dft_frequencies() {
        // A DFT bin m carries exp(2πi m t / n); its angular frequency is the
        // representative of m in (-n/2, n/2] scaled by 2π/(n h), with the
        // Nyquist bin taken negative.
        let h = 1e-4;
        for n in [8usize, 9] {
            let k = wavenumbers(n, h);
            for m in 0..n {
                let mut best = f64::INFINITY;
                let mut freq = 0.0;
                for alias in -(n as i64)..=(n as i64) {
                    let f = m as i64 + alias * n as i64;
                    let score = (f as f64).abs() + if f > 0 && 2 * f == n as i64 { 0.5 } else { 0.0 };
                    if score < best {
                        best = score;
                        freq = f as f64;
                    }
                }
                let expect = 2.0 * PI * freq / (n as f64 * h);
                assert!((k[m] - expect).abs() < 1e-9 * expect.abs().max(1.0), "n={n} m={m}");
            }
        }
        let g = Grid::new(GridSpec { pml_size: 0, ..spec2(8, 0, 0.0) }).unwrap();
        assert_eq!(g.k[0].len(), 8);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec { dims: vec![3, 8], ..spec2(8, 0, 0.0) }).is_err());
        assert!(Grid::new(GridSpec { spacing: vec![0.0, 1.0], ..spec2(8, 0, 0.0) }).is_err());
        assert!(Grid::new(spec2(8, 4, 1.0)).is_err());
        assert!(Grid::new(GridSpec { dt: -1.0, ..spec2(8, 0, 0.0) }).is_err());
    }

    #[test]
    fn domain_map_skips_pml() {
        let g = Grid::new(spec2(6, 2, 1.0)).unwrap();
        assert_eq!(g.domain_to_total()[0], 2 + 2 * 10);
        assert_eq!(g.domain_to_total()[6], 2 + 3 * 10);
        assert_eq!(g.nearest_node(&[0.08, 0.15]), 1 + 2 * 6);
    }
}
