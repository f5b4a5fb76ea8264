use std::io::{Read, Write};
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::geometry::{Grid, Side};

/// Detector locations as domain-node indices of one grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detectors {
    pub nodes: Vec<usize>,
}

impl Detectors {
    pub fn new(grid: &Grid, nodes: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&n| n >= grid.domain_len()) {
            return Err(Error::config(format!("detector node {bad} outside the grid")));
        }
        Ok(Detectors { nodes })
    }

    /// Snaps physical points (mm) to their nearest grid nodes. Points keep
    /// their order, so a coarse grid may map several of them to one node.
    pub fn snapped(grid: &Grid, points: &[Vec<f64>]) -> Self {
        Detectors {
            nodes: points.iter().map(|p| grid.nearest_node(p)).collect(),
        }
    }

    /// Equidistant points on each of the given box faces: `per_side` per
    /// free axis, at the midpoints of equal segments so that neighbouring
    /// faces never share a point. `lo` and `hi` bound the box in mm.
    pub fn side_points(lo: &[f64], hi: &[f64], sides: &[Side], per_side: usize) -> Vec<Vec<f64>> {
        let d = lo.len();
        let mut pts = Vec::new();
        for side in sides {
            let free: Vec<usize> = (0..d).filter(|&a| a != side.axis).collect();
            let count = per_side.pow(free.len() as u32);
            for k in 0..count {
                let mut p = vec![0.0; d];
                p[side.axis] = if side.upper { hi[side.axis] } else { lo[side.axis] };
                let mut rem = k;
                for &a in &free {
                    let t = ((rem % per_side) as f64 + 0.5) / per_side as f64;
                    rem /= per_side;
                    p[a] = lo[a] + t * (hi[a] - lo[a]);
                }
                pts.push(p);
            }
        }
        pts
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Pressure recorded at `n_s` detectors over `n_t` steps, detector-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    pub n_s: usize,
    pub n_t: usize,
    pub dt: f64,
    pub data: Vec<f64>,
}

impl MeasurementSeries {
    pub fn zeros(n_s: usize, n_t: usize, dt: f64) -> Self {
        MeasurementSeries {
            n_s,
            n_t,
            dt,
            data: vec![0.0; n_s * n_t],
        }
    }

    pub fn from_data(n_s: usize, n_t: usize, dt: f64, data: Vec<f64>) -> Result<Self> {
        check_len("measurement series", n_s * n_t, data.len())?;
        Ok(MeasurementSeries { n_s, n_t, dt, data })
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.n_t + t]
    }

    pub fn set(&mut self, s: usize, t: usize, v: f64) {
        self.data[s * self.n_t + t] = v;
    }

    pub fn trace(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_t..(s + 1) * self.n_t]
    }

    pub fn same_shape(&self, other: &MeasurementSeries) -> Result<()> {
        check_len("detector count", self.n_s, other.n_s)?;
        check_len("time step count", self.n_t, other.n_t)
    }

    /// Header `u64 n_s, u64 n_t, f64 dt`, then the samples, all little endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.n_s as u64).to_le_bytes())?;
        w.write_all(&(self.n_t as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> std::result::Result<[u8; 8], String> {
            r.read_exact(&mut b8).map_err(|e| e.to_string())?;
            Ok(b8)
        };
        let n_s = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_t = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let count = n_s.checked_mul(n_t).ok_or("header overflows")?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(f64::from_le_bytes(next(&mut r)?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest).map_err(|e| e.to_string())?;
        if !rest.is_empty() {
            return Err(format!("{} trailing bytes", rest.len()));
        }
        Ok(MeasurementSeries { n_s, n_t, dt, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }
}
