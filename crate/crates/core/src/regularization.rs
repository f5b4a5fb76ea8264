//! Total-variation operators over the element adjacency of the FE mesh: the
//! difference matrix `D`, lagged-diffusivity and primal-dual
//! priorconditioners, shrinkage and the dual step rule.

use crate::error::{check_len, Error, Result};
use crate::geometry::FeMesh;
use crate::linalg::{CsrMatrix, SpdFactor};

/// Block-diagonal difference matrix `D = diag(D^κ̄, D^μ̄)`, `2N_l × 2N_e`.
#[derive(Debug, Clone)]
pub struct TvOperator {
    d: CsrMatrix,
    n_edges: usize,
    n_elements: usize,
}

impl TvOperator {
    pub fn new(mesh: &FeMesh) -> Self {
        let ne = mesh.num_elements();
        let facets = mesh.internal_facets();
        let nl = facets.len();
        let mut triplets = Vec::with_capacity(4 * nl);
        for block in 0..2 {
            for (l, f) in facets.iter().enumerate() {
                let [j1, j2] = f.elements;
                triplets.push((block * nl + l, block * ne + j1, f.measure));
                triplets.push((block * nl + l, block * ne + j2, -f.measure));
            }
        }
        TvOperator {
            d: CsrMatrix::from_triplets(2 * nl, 2 * ne, &triplets),
            n_edges: nl,
            n_elements: ne,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.d
    }

    /// Rows of `D`, `2N_l`.
    pub fn rows(&self) -> usize {
        2 * self.n_edges
    }

    /// Columns of `D`, `2N_e`.
    pub fn cols(&self) -> usize {
        2 * self.n_elements
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.d.mul_vec(x)
    }

    pub fn transpose_apply(&self, y: &[f64]) -> Vec<f64> {
        self.d.transpose_mul_vec(y)
    }

    /// `𝒥(X̄) = ‖DX̄‖₁`.
    pub fn total_variation(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().map(|v| v.abs()).sum()
    }

    /// Diagonal of `C[X̄] = diag((|DX̄|² + β)^{-1/2})`.
    pub fn weights(&self, x: &[f64], beta: f64) -> Vec<f64> {
        self.apply(x).iter().map(|v| 1.0 / (v * v + beta).sqrt()).collect()
    }
}

fn check_params(beta: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::config(format!("preconditioner shift γ must be positive, got {gamma}")));
    }
    if !(beta > 0.0) {
        return Err(Error::config(format!("TV smoothing β must be positive, got {beta}")));
    }
    Ok(())
}

/// Factorised `M_γ = DᵀC D + γI`, used as a PCG preconditioner.
#[derive(Debug, Clone)]
pub struct TvPreconditioner {
    pub beta: f64,
    pub gamma: f64,
    pub weights: Vec<f64>,
    matrix: CsrMatrix,
    factor: SpdFactor,
}

impl TvPreconditioner {
    /// Lagged-diffusivity preconditioner linearised at `xbar`.
    pub fn lagged(tv: &TvOperator, xbar: &[f64], beta: f64, gamma: f64) -> Result<Self> {
        check_params(beta, gamma)?;
        check_len("TV linearisation point", tv.cols(), xbar.len())?;
        Self::from_weights(tv, tv.weights(xbar, beta), beta, gamma)
    }

    /// Primal-dual preconditioner
    /// `M̃_γ = DᵀC[d](I − C[d]χ(Dd)ᵀ)D + γI` at the inner iterate `(d, χ)`,
    /// with the bracket taken entrywise per edge row.
    pub fn primal_dual(tv: &TvOperator, d: &[f64], chi: &[f64], beta: f64, gamma: f64) -> Result<Self> {
        check_params(beta, gamma)?;
        check_len("primal iterate", tv.cols(), d.len())?;
        check_len("dual iterate", tv.rows(), chi.len())?;
        let dd = tv.apply(d);
        let w = dd
            .iter()
            .zip(chi)
            .map(|(g, x)| {
                let c = 1.0 / (g * g + beta).sqrt();
                c * (1.0 - c * x * g)
            })
            .collect();
        Self::from_weights(tv, w, beta, gamma)
    }

    fn from_weights(tv: &TvOperator, weights: Vec<f64>, beta: f64, gamma: f64) -> Result<Self> {
        let matrix = tv.d.gram_weighted(&weights).add_diagonal(gamma);
        let factor = SpdFactor::new(&matrix)?;
        Ok(TvPreconditioner {
            beta,
            gamma,
            weights,
            matrix,
            factor,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(r)
    }
}

/// Entrywise soft threshold `max(|v| − ν, 0)·sgn(v)`.
pub fn shrink(v: &[f64], nu: f64) -> Vec<f64> {
    v.iter().map(|&x| (x.abs() - nu).max(0.0) * x.signum()).collect()
}

/// Dual increment `δχ` at `(d, χ)` for the primal increment `δd`, and the
/// feasibility-preserving step `s = min(1, φ*)`.
pub fn dual_update(tv: &TvOperator, d: &[f64], chi: &[f64], delta_d: &[f64], beta: f64) -> Result<(Vec<f64>, f64)> {
    check_len("primal iterate", tv.cols(), d.len())?;
    check_len("primal increment", tv.cols(), delta_d.len())?;
    check_len("dual iterate", tv.rows(), chi.len())?;
    let dd = tv.apply(d);
    let ddelta = tv.apply(delta_d);
    let delta_chi: Vec<f64> = (0..chi.len())
        .map(|j| {
            let c = 1.0 / (dd[j] * dd[j] + beta).sqrt();
            c * (1.0 - c * chi[j] * dd[j]) * ddelta[j] - chi[j] + c * dd[j]
        })
        .collect();
    let step = feasible_step(chi, &delta_chi).min(1.0);
    Ok((delta_chi, step))
}

/// Largest `φ ≥ 0` with `|χ_j + φ δχ_j| ≤ 1` for all `j`.
pub fn feasible_step(chi: &[f64], delta: &[f64]) -> f64 {
    let mut phi = f64::INFINITY;
    for (&x, &dx) in chi.iter().zip(delta) {
        let limit = if dx > 0.0 {
            (1.0 - x) / dx
        } else if dx < 0.0 {
            (-1.0 - x) / dx
        } else {
            continue;
        };
        phi = phi.min(limit.max(0.0));
    }
    phi
}

/// `χ + s δχ`, clipped onto `[-1, 1]` against rounding.
pub fn apply_dual_step(chi: &mut [f64], delta: &[f64], step: f64) {
    for (x, dx) in chi.iter_mut().zip(delta) {
        *x = (*x + step * dx).clamp(-1.0, 1.0);
    }
}
