use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{linear_index, multi_index, Grid};

type C64 = Complex64;

/// Complex N-dimensional FFT over a grid whose first axis is contiguous.
pub struct FftNd {
    dims: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    scratch_len: usize,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("dims", &self.dims).finish()
    }
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd: Vec<_> = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv: Vec<_> = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = fwd
            .iter()
            .chain(&inv)
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        FftNd {
            dims: dims.to_vec(),
            fwd,
            inv,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised transform in place.
    pub fn process(&self, data: &mut [C64], inverse: bool, ws: &mut FftBuffers) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        ws.scratch.resize(self.scratch_len, C64::default());
        plans[0].process_with_scratch(data, &mut ws.scratch);
        let total = data.len();
        let mut stride = self.dims[0];
        for a in 1..self.dims.len() {
            let n = self.dims[a];
            let block = stride * n;
            ws.lines.resize(total, C64::default());
            // each block is `n` rows of `stride`; transposing makes the
            // axis-`a` lines contiguous
            for (src, dst) in data.chunks_exact(block).zip(ws.lines.chunks_exact_mut(block)) {
                transpose::transpose(src, dst, stride, n);
            }
            plans[a].process_with_scratch(&mut ws.lines, &mut ws.scratch);
            for (src, dst) in ws.lines.chunks_exact(block).zip(data.chunks_exact_mut(block)) {
                transpose::transpose(src, dst, n, stride);
            }
            stride *= n;
        }
    }
}

/// Work buffers of [`FftNd::process`].
#[derive(Debug, Default, Clone)]
pub struct FftBuffers {
    scratch: Vec<C64>,
    lines: Vec<C64>,
}

/// Reusable buffers for spectral operations.
#[derive(Debug, Default, Clone)]
pub struct FftScratch {
    bufs: FftBuffers,
    z: Vec<C64>,
    w: Vec<C64>,
}

/// Fourier symbols of the staggered k-space gradients, the fractional
/// Laplacians and the source smoothing window, with the inverse-FFT
/// normalisation folded in.
#[derive(Debug)]
pub struct SpectralOps {
    pub fft: FftNd,
    /// `i k_i e^{+i k_i Δr_i/2} sinc(c_ref k Δt/2)` per axis.
    pub grad_plus: Vec<Vec<C64>>,
    /// `i k_i e^{-i k_i Δr_i/2} sinc(c_ref k Δt/2)` per axis.
    pub grad_minus: Vec<Vec<C64>>,
    /// `k^{y-2}`, zero at `k = 0`.
    pub y_abs: Vec<C64>,
    /// `k^{y-1}`, zero at `k = 0`.
    pub y_dis: Vec<C64>,
    /// Separable Blackman window in wavenumber.
    pub smooth: Vec<C64>,
    /// Index of `-m` for every frequency index `m`.
    reflect: Vec<usize>,
    norm: f64,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Blackman window on `ξ ∈ [-1, 1]`, vanishing at the ends.
pub fn blackman(xi: f64) -> f64 {
    use std::f64::consts::PI;
    0.42 + 0.5 * (PI * xi).cos() + 0.08 * (2.0 * PI * xi).cos()
}

fn window(kvec: &[f64], cutoff: &[f64]) -> f64 {
    kvec.iter()
        .zip(cutoff)
        .map(|(k, c)| if k.abs() >= *c { 0.0 } else { blackman(k / c) })
        .product()
}

impl SpectralOps {
    pub fn new(grid: &Grid, y: f64) -> Self {
        let dims = grid.total_dims().to_vec();
        let d = dims.len();
        let n: usize = dims.iter().product();
        let norm = 1.0 / n as f64;
        let dt = grid.dt();
        let c_ref = grid.c_ref();

        let mut grad_plus = vec![Vec::with_capacity(n); d];
        let mut grad_minus = vec![Vec::with_capacity(n); d];
        let mut y_abs = Vec::with_capacity(n);
        let mut y_dis = Vec::with_capacity(n);
        let mut smooth = Vec::with_capacity(n);
        let mut reflect = Vec::with_capacity(n);
        let k_nyq: Vec<f64> = (0..d).map(|a| std::f64::consts::PI / grid.spacing_m(a)).collect();
        for lin in 0..n {
            let idx = multi_index(&dims, lin);
            let kvec: Vec<f64> = (0..d).map(|a| grid.k[a][idx[a]]).collect();
            let kmag = kvec.iter().map(|k| k * k).sum::<f64>().sqrt();
            let kappa = sinc(c_ref * kmag * dt / 2.0);
            for a in 0..d {
                let ik = C64::new(0.0, kvec[a] * kappa * norm);
                grad_plus[a].push(ik * grid.shift_pos[a][idx[a]]);
                grad_minus[a].push(ik * grid.shift_neg[a][idx[a]]);
            }
            if kmag == 0.0 {
                y_abs.push(C64::default());
                y_dis.push(C64::default());
            } else {
                y_abs.push(C64::new(kmag.powf(y - 2.0) * norm, 0.0));
                y_dis.push(C64::new(kmag.powf(y - 1.0) * norm, 0.0));
            }
            smooth.push(C64::new(window(&kvec, &k_nyq) * norm, 0.0));
            let neg: Vec<usize> = (0..d).map(|a| (dims[a] - idx[a]) % dims[a]).collect();
            reflect.push(linear_index(&dims, &neg));
        }
        SpectralOps {
            fft: FftNd::new(&dims),
            grad_plus,
            grad_minus,
            y_abs,
            y_dis,
            smooth,
            reflect,
            norm,
        }
    }

    pub fn len(&self) -> usize {
        self.reflect.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflect.is_empty()
    }

    /// Inverse FFT of `symbol · F{a}`, real part only.
    pub fn apply(&self, a: &[f64], symbol: &[C64], out: &mut [f64], ws: &mut FftScratch) {
        ws.z.clear();
        ws.z.extend(a.iter().map(|&x| C64::new(x, 0.0)));
        self.fft.process(&mut ws.z, false, &mut ws.bufs);
        for (z, &s) in ws.z.iter_mut().zip(symbol) {
            *z *= s;
        }
        self.fft.process(&mut ws.z, true, &mut ws.bufs);
        for (o, v) in out.iter_mut().zip(&ws.z) {
            *o = v.re;
        }
    }

    /// Two symbols applied to one real field with a single forward and a
    /// single inverse transform.
    pub fn apply_one_two(
        &self,
        a: &[f64],
        s1: &[C64],
        s2: &[C64],
        out1: &mut [f64],
        out2: &mut [f64],
        ws: &mut FftScratch,
    ) {
        ws.z.clear();
        ws.z.extend(a.iter().map(|&x| C64::new(x, 0.0)));
        self.fft.process(&mut ws.z, false, &mut ws.bufs);
        let i = C64::new(0.0, 1.0);
        for ((z, &k1), &k2) in ws.z.iter_mut().zip(s1).zip(s2) {
            *z *= k1 + i * k2;
        }
        self.fft.process(&mut ws.z, true, &mut ws.bufs);
        for ((o1, o2), z) in out1.iter_mut().zip(out2.iter_mut()).zip(&ws.z) {
            *o1 = z.re;
            *o2 = z.im;
        }
    }

    /// Applies `sa` to `a` and `sb` to `b` through one complex transform pair.
    /// All symbols must be Hermitian, as they are for real operators.
    pub fn apply_pair(
        &self,
        a: &[f64],
        sa: &[C64],
        b: &[f64],
        sb: &[C64],
        out_a: &mut [f64],
        out_b: &mut [f64],
        ws: &mut FftScratch,
    ) {
        let i = C64::new(0.0, 1.0);
        self.pair_spectrum(a, sa, b, sb, ws, |za, zb| za + i * zb);
        for ((oa, ob), w) in out_a.iter_mut().zip(out_b.iter_mut()).zip(&ws.w) {
            *oa = w.re;
            *ob = w.im;
        }
    }

    /// `sa(a) + sb(b)` through one complex transform pair.
    pub fn apply_pair_sum(&self, a: &[f64], sa: &[C64], b: &[f64], sb: &[C64], out: &mut [f64], ws: &mut FftScratch) {
        self.pair_spectrum(a, sa, b, sb, ws, |za, zb| za + zb);
        for (o, w) in out.iter_mut().zip(&ws.w) {
            *o = w.re;
        }
    }

    /// Transforms `a + ib`, splits the spectra of `a` and `b`, filters them
    /// by `sa` and `sb`, combines them with `f` and inverts into `ws.w`.
    fn pair_spectrum<F>(&self, a: &[f64], sa: &[C64], b: &[f64], sb: &[C64], ws: &mut FftScratch, f: F)
    where
        F: Fn(C64, C64) -> C64,
    {
        let n = self.len();
        ws.z.clear();
        ws.z.extend(a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)));
        self.fft.process(&mut ws.z, false, &mut ws.bufs);
        ws.w.resize(n, C64::default());
        let half_i = C64::new(0.0, -0.5);
        let z = &ws.z;
        let it = ws.w.iter_mut().zip(z).zip(&self.reflect).zip(sa.iter().zip(sb));
        for (((w, &zm), &r), (&ka, &kb)) in it {
            let zr = z[r].conj();
            let za = (zm + zr) * 0.5;
            let zb = (zm - zr) * half_i;
            *w = f(ka * za, kb * zb);
        }
        self.fft.process(&mut ws.w, true, &mut ws.bufs);
    }

    /// Rebuilds the smoothing window so that it vanishes at the wavenumbers
    /// `cutoff` (rad/m, per axis) instead of at the grid Nyquist limits.
    pub fn set_smoothing_cutoff(&mut self, grid: &Grid, cutoff: &[f64]) {
        let dims = grid.total_dims().to_vec();
        for (lin, w) in self.smooth.iter_mut().enumerate() {
            let idx = multi_index(&dims, lin);
            let kvec: Vec<f64> = (0..dims.len()).map(|a| grid.k[a][idx[a]]).collect();
            *w = C64::new(window(&kvec, cutoff) * self.norm, 0.0);
        }
    }

    /// Symmetric smoothing `𝕊`.
    pub fn smooth_field(&self, a: &[f64], out: &mut [f64], ws: &mut FftScratch) {
        self.apply(a, &self.smooth, out, ws);
    }

    pub fn normalisation(&self) -> f64 {
        self.norm
    }
}
