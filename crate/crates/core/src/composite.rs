//! The coupled operator `ℍ = ℍ_a ∘ ℍ_o`, its least-squares objective, gradient
//! and Gauss-Newton Hessian action over a set of illuminations.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustic::{AcousticSolver, MeasurementSeries};
use crate::error::{check_len, Error, Result};
use crate::geometry::FeMesh;
use crate::linalg::{dot, CsrMatrix};
use crate::optical::{CoefficientPair, Illumination, OpticalModel, PhotonSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    Linear,
    Log,
}

/// Map between dimensionless unknowns `X̄ = [κ̄; μ̄]` and physical coefficients.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub kind: ScalingKind,
    pub reference: CoefficientPair,
    mean_kappa: f64,
    mean_mu: f64,
}

impl Scaling {
    pub fn new(kind: ScalingKind, reference: CoefficientPair) -> Result<Self> {
        reference.check_positive()?;
        let n = reference.len() as f64;
        let mean_kappa = reference.kappa.iter().sum::<f64>() / n;
        let mean_mu = reference.mu.iter().sum::<f64>() / n;
        Ok(Scaling {
            kind,
            reference,
            mean_kappa,
            mean_mu,
        })
    }

    pub fn len(&self) -> usize {
        2 * self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn to_physical(&self, xbar: &[f64]) -> CoefficientPair {
        let n = self.reference.len();
        let (kb, mb) = xbar.split_at(n);
        match self.kind {
            ScalingKind::Linear => CoefficientPair {
                kappa: kb.iter().map(|v| v * self.mean_kappa).collect(),
                mu: mb.iter().map(|v| v * self.mean_mu).collect(),
            },
            ScalingKind::Log => CoefficientPair {
                kappa: kb.iter().zip(&self.reference.kappa).map(|(v, r)| r * v.exp()).collect(),
                mu: mb.iter().zip(&self.reference.mu).map(|(v, r)| r * v.exp()).collect(),
            },
        }
    }

    pub fn to_scaled(&self, x: &CoefficientPair) -> Vec<f64> {
        match self.kind {
            ScalingKind::Linear => x
                .kappa
                .iter()
                .map(|v| v / self.mean_kappa)
                .chain(x.mu.iter().map(|v| v / self.mean_mu))
                .collect(),
            ScalingKind::Log => x
                .kappa
                .iter()
                .zip(&self.reference.kappa)
                .chain(x.mu.iter().zip(&self.reference.mu))
                .map(|(v, r)| (v / r).ln())
                .collect(),
        }
    }

    /// Diagonal of `∂X/∂X̄` at `xbar`.
    pub fn derivative(&self, xbar: &[f64]) -> Vec<f64> {
        let n = self.reference.len();
        match self.kind {
            ScalingKind::Linear => (0..2 * n)
                .map(|i| if i < n { self.mean_kappa } else { self.mean_mu })
                .collect(),
            ScalingKind::Log => self.to_physical(xbar).to_stacked(),
        }
    }
}

/// Elemental heating to nodal initial pressure: each node takes the
/// volume-weighted mean of its incident elements.
#[derive(Debug, Clone)]
pub struct NodalTransfer {
    matrix: CsrMatrix,
}

impl NodalTransfer {
    pub fn new(mesh: &FeMesh) -> Self {
        let k = (mesh.dim() + 1) as f64;
        let mut triplets = Vec::with_capacity(mesh.num_elements() * (mesh.dim() + 1));
        let mut weight = vec![0.0; mesh.num_nodes()];
        for e in 0..mesh.num_elements() {
            let s = mesh.volumes()[e] / k;
            for &n in mesh.element(e) {
                triplets.push((n, e, s));
                weight[n] += s;
            }
        }
        let raw = CsrMatrix::from_triplets(mesh.num_nodes(), mesh.num_elements(), &triplets);
        let inv: Vec<f64> = weight.iter().map(|w| 1.0 / w).collect();
        NodalTransfer {
            matrix: raw.scale_rows(&inv),
        }
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(h)
    }

    pub fn transpose(&self, p: &[f64]) -> Vec<f64> {
        self.matrix.transpose_mul_vec(p)
    }
}

/// PDE-solve tallies, shared across threads.
#[derive(Debug, Default)]
pub struct SolveCounters {
    pub acoustic_forward: AtomicUsize,
    pub acoustic_adjoint: AtomicUsize,
    pub optical_factorizations: AtomicUsize,
    pub optical_solves: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub acoustic_forward: usize,
    pub acoustic_adjoint: usize,
    pub optical_factorizations: usize,
    pub optical_solves: usize,
}

impl SolveCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            acoustic_forward: self.acoustic_forward.load(Ordering::Relaxed),
            acoustic_adjoint: self.acoustic_adjoint.load(Ordering::Relaxed),
            optical_factorizations: self.optical_factorizations.load(Ordering::Relaxed),
            optical_solves: self.optical_solves.load(Ordering::Relaxed),
        }
    }

    fn bump(c: &AtomicUsize) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

impl std::ops::Sub for CounterSnapshot {
    type Output = CounterSnapshot;
    fn sub(self, o: CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            acoustic_forward: self.acoustic_forward - o.acoustic_forward,
            acoustic_adjoint: self.acoustic_adjoint - o.acoustic_adjoint,
            optical_factorizations: self.optical_factorizations - o.optical_factorizations,
            optical_solves: self.optical_solves - o.optical_solves,
        }
    }
}

/// Everything shared by the `N_q` illuminations of one reconstruction.
pub struct ProblemSetup {
    pub mesh: FeMesh,
    pub optical: OpticalModel,
    pub acoustic: AcousticSolver,
    pub transfer: NodalTransfer,
    pub illuminations: Vec<Illumination>,
    pub data: Vec<MeasurementSeries>,
    pub counters: SolveCounters,
}

/// Cached per-illumination state at one parameter point.
pub struct Evaluation {
    pub xbar: Vec<f64>,
    pub coeffs: CoefficientPair,
    pub systems: Vec<PhotonSystem>,
    pub residuals: Vec<MeasurementSeries>,
    pub epsilon: f64,
}

impl ProblemSetup {
    /// `data` may be empty for pure simulation.
    pub fn new(
        mesh: FeMesh,
        acoustic: AcousticSolver,
        illuminations: Vec<Illumination>,
        data: Vec<MeasurementSeries>,
    ) -> Result<Self> {
        if mesh.num_nodes() != acoustic.grid().domain_len() || mesh.node_dims() != acoustic.grid().domain_dims() {
            return Err(Error::config("FE mesh nodes must coincide with acoustic grid nodes"));
        }
        if illuminations.is_empty() {
            return Err(Error::config("at least one illumination is required"));
        }
        if !data.is_empty() {
            check_len("measured data sets", illuminations.len(), data.len())?;
            for d in &data {
                check_len("detectors in measured data", acoustic.num_detectors(), d.n_s)?;
                check_len("time steps in measured data", acoustic.grid().nt(), d.n_t)?;
            }
        }
        Ok(ProblemSetup {
            optical: OpticalModel::new(&mesh),
            transfer: NodalTransfer::new(&mesh),
            mesh,
            acoustic,
            illuminations,
            data,
            counters: SolveCounters::default(),
        })
    }

    pub fn num_illuminations(&self) -> usize {
        self.illuminations.len()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    fn assemble(&self, x: &CoefficientPair, q: usize) -> Result<PhotonSystem> {
        SolveCounters::bump(&self.counters.optical_factorizations);
        SolveCounters::bump(&self.counters.optical_solves);
        self.optical.assemble(x, &self.illuminations[q])
    }

    fn acoustic_forward(&self, h: &[f64]) -> Result<MeasurementSeries> {
        SolveCounters::bump(&self.counters.acoustic_forward);
        self.acoustic.forward(&self.transfer.apply(h))
    }

    fn acoustic_adjoint(&self, y: &MeasurementSeries) -> Result<Vec<f64>> {
        SolveCounters::bump(&self.counters.acoustic_adjoint);
        Ok(self.transfer.transpose(&self.acoustic.adjoint(y)?))
    }

    /// Simulated data and photon systems for physical coefficients `x`.
    pub fn forward(&self, x: &CoefficientPair) -> Result<(Vec<MeasurementSeries>, Vec<PhotonSystem>)> {
        let out: Vec<Result<(MeasurementSeries, PhotonSystem)>> = (0..self.num_illuminations())
            .into_par_iter()
            .map(|q| {
                let sys = self.assemble(x, q).map_err(|e| e.at_stage("optical forward"))?;
                let h = self.optical.heating(&sys);
                let p = self.acoustic_forward(&h).map_err(|e| e.at_stage("acoustic forward"))?;
                Ok((p, sys))
            })
            .collect();
        let mut data = Vec::with_capacity(out.len());
        let mut systems = Vec::with_capacity(out.len());
        for r in out {
            let (p, s) = r?;
            data.push(p);
            systems.push(s);
        }
        Ok((data, systems))
    }

    /// Runs the forward model at `xbar` and caches residuals.
    pub fn evaluate(&self, scaling: &Scaling, xbar: &[f64]) -> Result<Evaluation> {
        check_len("scaled parameters", scaling.len(), xbar.len())?;
        if self.data.is_empty() {
            return Err(Error::config("no measured data attached to the problem"));
        }
        let coeffs = scaling.to_physical(xbar);
        let (model, systems) = self.forward(&coeffs)?;
        let residuals: Vec<MeasurementSeries> = model
            .into_iter()
            .zip(&self.data)
            .map(|(mut m, d)| {
                m.data.iter_mut().zip(&d.data).for_each(|(a, b)| *a -= b);
                m
            })
            .collect();
        let epsilon = 0.5 * residuals.iter().map(|r| dot(&r.data, &r.data)).sum::<f64>();
        Ok(Evaluation {
            xbar: xbar.to_vec(),
            coeffs,
            systems,
            residuals,
            epsilon,
        })
    }

    pub fn objective(&self, scaling: &Scaling, xbar: &[f64]) -> Result<f64> {
        Ok(self.evaluate(scaling, xbar)?.epsilon)
    }

    /// `∇ε = Σ_q (∂X/∂X̄) 𝕁_qᵀ r_q`, one adjoint sweep per illumination.
    pub fn gradient(&self, scaling: &Scaling, eval: &Evaluation) -> Result<Vec<f64>> {
        self.gradient_for(scaling, eval, &eval.residuals)
    }

    /// `Σ_q (∂X/∂X̄) 𝕁_qᵀ y_q` for arbitrary data-space vectors `y_q`.
    pub fn gradient_for(&self, scaling: &Scaling, eval: &Evaluation, ys: &[MeasurementSeries]) -> Result<Vec<f64>> {
        check_len("data-space vectors", self.num_illuminations(), ys.len())?;
        let parts = (0..self.num_illuminations())
            .into_par_iter()
            .map(|q| self.jacobian_transpose(eval, q, &ys[q]))
            .collect::<Vec<_>>();
        let mut g = sum_in_order(parts, scaling.len())?;
        for (gi, di) in g.iter_mut().zip(scaling.derivative(&eval.xbar)) {
            *gi *= di;
        }
        Ok(g)
    }

    /// `𝕁_q δX` for physical increments.
    pub fn jacobian_apply(&self, eval: &Evaluation, q: usize, dx: &CoefficientPair) -> Result<MeasurementSeries> {
        SolveCounters::bump(&self.counters.optical_solves);
        let dh = self.optical.jacobian_apply(&eval.systems[q], dx)?;
        self.acoustic_forward(&dh)
    }

    /// `𝕁_qᵀ y` as a stacked physical gradient.
    pub fn jacobian_transpose(&self, eval: &Evaluation, q: usize, y: &MeasurementSeries) -> Result<Vec<f64>> {
        let back = self.acoustic_adjoint(y)?;
        SolveCounters::bump(&self.counters.optical_solves);
        Ok(self.optical.jacobian_transpose(&eval.systems[q], &back)?.to_stacked())
    }

    /// Gauss-Newton product `Σ_q (∂X/∂X̄) 𝕁_qᵀ𝕁_q (∂X/∂X̄) d`.
    pub fn gn_hessian_apply(&self, scaling: &Scaling, eval: &Evaluation, d: &[f64]) -> Result<Vec<f64>> {
        check_len("Hessian direction", scaling.len(), d.len())?;
        let diag = scaling.derivative(&eval.xbar);
        let dphys: Vec<f64> = d.iter().zip(&diag).map(|(a, b)| a * b).collect();
        let dx = CoefficientPair::from_stacked(&dphys);
        let parts = (0..self.num_illuminations())
            .into_par_iter()
            .map(|q| {
                let jd = self.jacobian_apply(eval, q, &dx)?;
                self.jacobian_transpose(eval, q, &jd)
            })
            .collect::<Vec<_>>();
        let mut h = sum_in_order(parts, scaling.len())?;
        for (hi, di) in h.iter_mut().zip(&diag) {
            *hi *= di;
        }
        Ok(h)
    }
}

fn sum_in_order(parts: Vec<Result<Vec<f64>>>, n: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; n];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p?) {
            *a += v;
        }
    }
    Ok(acc)
}
