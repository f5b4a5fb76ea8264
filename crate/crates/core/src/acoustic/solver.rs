use super::measurement::{Detectors, MeasurementSeries};
use super::medium::AcousticMedium;
use super::spectral::{FftScratch, SpectralOps};
use crate::error::{check_len, Error, Result};
use crate::geometry::{multi_index, Grid};

/// Staggered fields at one time level: `v_i` at `n - 1/2`, `ρ_i` and `p` at `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticState {
    pub v: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

impl AcousticState {
    pub fn zeros(dim: usize, n: usize) -> Self {
        AcousticState {
            v: vec![vec![0.0; n]; dim],
            rho: vec![vec![0.0; n]; dim],
            p: vec![0.0; n],
        }
    }

    /// `[v_1..v_d, ρ_1..ρ_d, p]` stacked.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity((2 * self.v.len() + 1) * self.p.len());
        for f in self.v.iter().chain(&self.rho) {
            out.extend_from_slice(f);
        }
        out.extend_from_slice(&self.p);
        out
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Self {
        let n = flat.len() / (2 * dim + 1);
        let field = |k: usize| flat[k * n..(k + 1) * n].to_vec();
        AcousticState {
            v: (0..dim).map(field).collect(),
            rho: (dim..2 * dim).map(field).collect(),
            p: field(2 * dim),
        }
    }
}

/// Scratch fields reused across time steps.
#[derive(Debug, Clone)]
pub struct StepWork {
    fft: FftScratch,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    o1: Vec<f64>,
    o2: Vec<f64>,
    o3: Vec<f64>,
}

impl StepWork {
    fn new(dim: usize, n: usize) -> Self {
        StepWork {
            fft: FftScratch::default(),
            a: vec![vec![0.0; n]; dim],
            b: vec![vec![0.0; n]; dim],
            s1: vec![0.0; n],
            s2: vec![0.0; n],
            o1: vec![0.0; n],
            o2: vec![0.0; n],
            o3: vec![0.0; n],
        }
    }
}

/// k-space pseudo-spectral solver for one grid, medium and detector set.
#[derive(Debug)]
pub struct AcousticSolver {
    grid: Grid,
    medium: AcousticMedium,
    ops: SpectralOps,
    /// PML factor `A_i` expanded over the padded grid.
    pml: Vec<Vec<f64>>,
    detectors: Vec<usize>,
    n_detectors_domain: Detectors,
    smoothing: bool,
}

impl AcousticSolver {
    pub fn new(grid: Grid, medium: AcousticMedium, detectors: &Detectors) -> Result<Self> {
        check_len("medium sound speed", grid.total_len(), medium.c.len())?;
        if detectors.is_empty() {
            return Err(Error::config("at least one detector is required"));
        }
        if let Some(&bad) = detectors.nodes.iter().find(|&&n| n >= grid.domain_len()) {
            return Err(Error::config(format!("detector node {bad} outside the grid")));
        }
        let ops = SpectralOps::new(&grid, medium.y);
        let dims = grid.total_dims().to_vec();
        let pml = (0..grid.dim())
            .map(|axis| {
                (0..grid.total_len())
                    .map(|lin| grid.pml[axis][multi_index(&dims, lin)[axis]])
                    .collect()
            })
            .collect();
        let total = detectors.nodes.iter().map(|&n| grid.domain_to_total()[n]).collect();
        Ok(AcousticSolver {
            grid,
            medium,
            ops,
            pml,
            detectors: total,
            n_detectors_domain: detectors.clone(),
            smoothing: true,
        })
    }

    /// Enables or disables the source smoothing `𝕊` (on by default).
    pub fn with_smoothing(mut self, on: bool) -> Self {
        self.smoothing = on;
        self
    }

    /// Smoothing window vanishing at `cutoff` (rad/m per axis); lets grids of
    /// different spacing share one source band limit.
    pub fn with_smoothing_cutoff(mut self, cutoff: &[f64]) -> Result<Self> {
        check_len("smoothing cutoff axes", self.grid.dim(), cutoff.len())?;
        if cutoff.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::config("smoothing cutoff must be positive"));
        }
        self.ops.set_smoothing_cutoff(&self.grid, cutoff);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn medium(&self) -> &AcousticMedium {
        &self.medium
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    pub fn detectors(&self) -> &Detectors {
        &self.n_detectors_domain
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn new_state(&self) -> AcousticState {
        AcousticState::zeros(self.grid.dim(), self.grid.total_len())
    }

    pub fn workspace(&self) -> StepWork {
        StepWork::new(self.grid.dim(), self.grid.total_len())
    }

    fn smooth(&self, field: &[f64], out: &mut [f64], ws: &mut StepWork) {
        if self.smoothing {
            self.ops.smooth_field(field, out, &mut ws.fft);
        } else {
            out.copy_from_slice(field);
        }
    }

    fn embed(&self, domain: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.total_len()];
        for (&t, &v) in self.grid.domain_to_total().iter().zip(domain) {
            full[t] = v;
        }
        full
    }

    /// Additive mass source `s = 𝕊P₀ / (2dΔt c²)` on the padded grid, the same
    /// for every coordinate; it is injected at steps `n = -1` and `n = 0`.
    pub fn make_source(&self, p0: &[f64]) -> Result<Vec<f64>> {
        check_len("initial pressure", self.grid.domain_len(), p0.len())?;
        let full = self.embed(p0);
        let mut ws = self.workspace();
        let mut out = vec![0.0; full.len()];
        self.smooth(&full, &mut out, &mut ws);
        let scale = 1.0 / (2.0 * self.grid.dim() as f64 * self.grid.dt());
        for (o, c) in out.iter_mut().zip(&self.medium.c) {
            *o *= scale / (c * c);
        }
        Ok(out)
    }

    /// Advances `state` from level `n` to `n + 1`, adding `Δt · source` to
    /// every density component when given.
    pub fn step(&self, state: &mut AcousticState, source: Option<&[f64]>, ws: &mut StepWork) {
        let d = self.grid.dim();
        let dt = self.grid.dt();
        let ops = &self.ops;
        let med = &self.medium;

        // momentum: a_i = ∇⁺_i p
        {
            let (a0, rest) = ws.a.split_at_mut(1);
            ops.apply_one_two(&state.p, &ops.grad_plus[0], &ops.grad_plus[1], &mut a0[0], &mut rest[0], &mut ws.fft);
            if d == 3 {
                ops.apply(&state.p, &ops.grad_plus[2], &mut rest[1], &mut ws.fft);
            }
        }
        for i in 0..d {
            let it = state.v[i].iter_mut().zip(&ws.a[i]).zip(&self.pml[i]).zip(&med.rho_stag[i]);
            for (((v, &a), &pml), &rs) in it {
                *v = pml * (pml * *v - dt / rs * a);
            }
        }

        // mass: b_i = ∇⁻_i v_i
        {
            let (b0, rest) = ws.b.split_at_mut(1);
            ops.apply_pair(
                &state.v[0],
                &ops.grad_minus[0],
                &state.v[1],
                &ops.grad_minus[1],
                &mut b0[0],
                &mut rest[0],
                &mut ws.fft,
            );
            if d == 3 {
                ops.apply(&state.v[2], &ops.grad_minus[2], &mut rest[1], &mut ws.fft);
            }
        }
        let lossy = med.is_lossy();
        ws.s1.iter_mut().for_each(|x| *x = 0.0);
        ws.s2.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            let it = state.rho[i]
                .iter_mut()
                .zip(&ws.b[i])
                .zip(&self.pml[i])
                .zip(&med.rho)
                .zip(ws.s1.iter_mut().zip(ws.s2.iter_mut()));
            for ((((r, &b), &pml), &rho0), (s1, s2)) in it {
                let rb = rho0 * b;
                *r = pml * (pml * *r - dt * rb);
                *s1 += *r;
                *s2 += pml * rb;
            }
            if let Some(src) = source {
                for ((r, s1), &s) in state.rho[i].iter_mut().zip(ws.s1.iter_mut()).zip(src) {
                    *r += dt * s;
                    *s1 += dt * s;
                }
            }
        }

        // state equation
        if lossy {
            ops.apply_pair(&ws.s1, &ops.y_dis, &ws.s2, &ops.y_abs, &mut ws.o1, &mut ws.o2, &mut ws.fft);
            let it = state.p.iter_mut().zip(&med.c).zip(&med.eta).zip(&med.tau).zip(ws.s1.iter().zip(&ws.o1).zip(&ws.o2));
            for ((((p, &c), &eta), &tau), ((&s1, &o1), &o2)) in it {
                *p = c * c * (s1 - eta * o1 + tau * o2);
            }
        } else {
            for ((p, &c), &s1) in state.p.iter_mut().zip(&med.c).zip(&ws.s1) {
                *p = c * c * s1;
            }
        }
    }

    /// Runs `n = -1 .. N_t - 2` from rest and records `P̂_{n+1} = 𝕄p_{n+1}`.
    pub fn forward(&self, p0: &[f64]) -> Result<MeasurementSeries> {
        let source = self.make_source(p0)?;
        let nt = self.grid.nt();
        let mut out = MeasurementSeries::zeros(self.detectors.len(), nt, self.grid.dt());
        let mut state = self.new_state();
        let mut ws = self.workspace();
        for n in -1..=(nt as isize - 2) {
            let src = if n <= 0 { Some(source.as_slice()) } else { None };
            self.step(&mut state, src, &mut ws);
            let t = (n + 1) as usize;
            for (s, &node) in self.detectors.iter().enumerate() {
                let v = state.p[node];
                if !v.is_finite() {
                    return Err(Error::NonFinite { step: n });
                }
                out.data[s * nt + t] = v;
            }
        }
        Ok(out)
    }

    /// One substituted adjoint step: updates `ρ̂`, `v̂` from `p̄_n` and returns
    /// `p̄_{n+1}` without the adjoint source.
    fn adjoint_step(&self, rho_hat: &mut [Vec<f64>], v_hat: &mut [Vec<f64>], p_bar: &mut [f64], ws: &mut StepWork) {
        let d = self.grid.dim();
        let dt = self.grid.dt();
        let ops = &self.ops;
        let med = &self.medium;

        // u = (I - Y_dis η) C p̄ and Y_abs τ C p̄
        for ((s1, &c), &p) in ws.s1.iter_mut().zip(&med.c).zip(p_bar.iter()) {
            *s1 = c * c * p;
        }
        let lossy = med.is_lossy();
        if lossy {
            let it = ws.s2.iter_mut().zip(ws.o2.iter_mut()).zip(&ws.s1).zip(med.eta.iter().zip(&med.tau));
            for (((s2, o2), &s1), (&eta, &tau)) in it {
                *s2 = eta * s1;
                *o2 = tau * s1;
            }
            ops.apply_pair(&ws.s2, &ops.y_dis, &ws.o2, &ops.y_abs, &mut ws.o1, &mut ws.o3, &mut ws.fft);
            for (s1, &o1) in ws.s1.iter_mut().zip(&ws.o1) {
                *s1 -= o1;
            }
        }
        for i in 0..d {
            let it = rho_hat[i]
                .iter_mut()
                .zip(ws.a[i].iter_mut())
                .zip(&self.pml[i])
                .zip(med.rho.iter().zip(ws.s1.iter().zip(&ws.o3)));
            for (((r, tmp), &pml), (&rho0, (&s1, &o3))) in it {
                *r = pml * (pml * *r + rho0 * s1);
                *tmp = if lossy { *r - rho0 * pml * o3 / dt } else { *r };
            }
        }
        {
            let (b0, rest) = ws.b.split_at_mut(1);
            ops.apply_pair(
                &ws.a[0],
                &ops.grad_plus[0],
                &ws.a[1],
                &ops.grad_plus[1],
                &mut b0[0],
                &mut rest[0],
                &mut ws.fft,
            );
            if d == 3 {
                ops.apply(&ws.a[2], &ops.grad_plus[2], &mut rest[1], &mut ws.fft);
            }
        }
        for i in 0..d {
            let it = v_hat[i].iter_mut().zip(&self.pml[i]).zip(&ws.b[i]).zip(&med.rho_stag[i]);
            for (((v, &pml), &g), &rs) in it {
                *v = pml * (pml * *v + dt / rs * g);
            }
        }
        ops.apply_pair_sum(&v_hat[0], &ops.grad_minus[0], &v_hat[1], &ops.grad_minus[1], p_bar, &mut ws.fft);
        if d == 3 {
            ops.apply(&v_hat[2], &ops.grad_minus[2], &mut ws.o1, &mut ws.fft);
            for (p, &o) in p_bar.iter_mut().zip(&ws.o1) {
                *p += o;
            }
        }
        p_bar.iter_mut().for_each(|x| *x *= dt);
    }

    /// Exact transpose of [`Self::forward`], returned on the domain nodes.
    pub fn adjoint(&self, data: &MeasurementSeries) -> Result<Vec<f64>> {
        let nt = self.grid.nt();
        check_len("measurement detectors", self.detectors.len(), data.n_s)?;
        check_len("measurement time steps", nt, data.n_t)?;
        let d = self.grid.dim();
        let n = self.grid.total_len();
        let mut rho_hat = vec![vec![0.0; n]; d];
        let mut v_hat = vec![vec![0.0; n]; d];
        let mut p_bar = vec![0.0; n];
        let mut ws = self.workspace();
        let inject = |p_bar: &mut [f64], t: usize| {
            for (s, &node) in self.detectors.iter().enumerate() {
                p_bar[node] += data.data[s * nt + t];
            }
        };

        // n = -1 starts from rest, so only the adjoint source survives
        inject(&mut p_bar, nt - 1);
        for k in 0..=(nt as isize - 2) {
            self.adjoint_step(&mut rho_hat, &mut v_hat, &mut p_bar, &mut ws);
            let k = k as usize;
            inject(&mut p_bar, nt - k - 1);
            inject(&mut p_bar, nt - k - 2);
            if p_bar.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: k as isize });
            }
        }

        // ϑ(Σ_i (I - Y_dis η)C p̄ + A Q⁻¹ ρ̂)
        let med = &self.medium;
        let mut u: Vec<f64> = (0..n).map(|m| med.c[m] * med.c[m] * p_bar[m]).collect();
        if med.is_lossy() {
            let eq: Vec<f64> = (0..n).map(|m| med.eta[m] * u[m]).collect();
            self.ops.apply(&eq, &self.ops.y_dis, &mut ws.o1, &mut ws.fft);
            for m in 0..n {
                u[m] -= ws.o1[m];
            }
        }
        let scale = 1.0 / (2.0 * d as f64);
        let mut acc = vec![0.0; n];
        for m in 0..n {
            let mut s = d as f64 * u[m];
            for i in 0..d {
                s += self.pml[i][m] * rho_hat[i][m] / med.rho[m];
            }
            acc[m] = s * scale / (med.c[m] * med.c[m]);
        }
        let mut full = vec![0.0; n];
        self.smooth(&acc, &mut full, &mut ws);
        Ok(self.grid.domain_to_total().iter().map(|&t| full[t]).collect())
    }
}
