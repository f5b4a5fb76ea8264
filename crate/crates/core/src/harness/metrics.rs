use crate::error::{check_len, Result};
use crate::geometry::FeMesh;
use crate::linalg::norm;

/// Piecewise-constant prolongation from a coarse mesh onto a fine one: each
/// fine element takes the value of the coarse element with the nearest
/// centroid (lowest index on ties).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prolongation {
    pub source: Vec<usize>,
    coarse_len: usize,
}

impl Prolongation {
    pub fn new(coarse: &FeMesh, fine: &FeMesh) -> Self {
        let cc: Vec<Vec<f64>> = (0..coarse.num_elements()).map(|e| coarse.centroid(e)).collect();
        let source = (0..fine.num_elements())
            .map(|e| {
                let x = fine.centroid(e);
                let mut best = (f64::INFINITY, 0);
                for (k, c) in cc.iter().enumerate() {
                    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 < best.0 {
                        best = (d2, k);
                    }
                }
                best.1
            })
            .collect();
        Prolongation {
            source,
            coarse_len: coarse.num_elements(),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("coarse element values", self.coarse_len, u.len())?;
        Ok(self.source.iter().map(|&k| u[k]).collect())
    }
}

/// `100 ‖P u − u_true‖ / ‖u_true‖` with `P` the prolongation onto the mesh of
/// `truth`.
pub fn relative_error(u: &[f64], truth: &[f64], prolong: &Prolongation) -> Result<f64> {
    let fine = prolong.apply(u)?;
    check_len("phantom values", prolong.source.len(), truth.len())?;
    let diff: Vec<f64> = fine.iter().zip(truth).map(|(a, b)| a - b).collect();
    Ok(100.0 * norm(&diff) / norm(truth))
}
