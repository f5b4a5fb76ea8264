use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{Grid, GridSpec};
use crate::linalg::dot;

fn grid(dims: &[usize], h: f64, dt: f64, nt: usize, pml: usize, c_ref: f64) -> Grid {
    Grid::new(GridSpec {
        dims: dims.to_vec(),
        spacing: vec![h; dims.len()],
        origin: vec![],
        dt,
        nt,
        pml_size: pml,
        pml_alpha: 2.0,
        c_ref,
    })
    .unwrap()
}

fn random_medium(g: &Grid, rng: &mut ChaCha8Rng, alpha0: f64) -> AcousticMedium {
    let n = g.domain_len();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(1400.0..1600.0)).collect();
    let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(900.0..1100.0)).collect();
    AcousticMedium::new(g, &c, &rho, alpha0, 1.5).unwrap()
}

fn some_detectors(g: &Grid, count: usize) -> Detectors {
    let n = g.domain_len();
    Detectors::new(g, (0..count).map(|k| (k * 7 + 3) % n).collect()).unwrap()
}

#[test]
fn zero_state_stays_zero() {
    let g = grid(&[8, 8], 0.1, 2e-8, 4, 1, 1600.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let solver = AcousticSolver::new(g.clone(), random_medium(&g, &mut rng, 0.75), &some_detectors(&g, 3)).unwrap();
    let mut st = solver.new_state();
    let mut ws = solver.workspace();
    solver.step(&mut st, None, &mut ws);
    assert_eq!(st, solver.new_state());
    let p = solver.forward(&vec![0.0; 64]).unwrap();
    assert!(p.data.iter().all(|&v| v == 0.0));
    assert!(solver.make_source(&vec![0.0; 64]).unwrap().iter().all(|&v| v == 0.0));
    let back = solver.adjoint(&MeasurementSeries::zeros(3, 4, 2e-8)).unwrap();
    assert!(back.iter().all(|&v| v == 0.0));
}

#[test]
fn unsmoothed_delta_source() {
    let g = grid(&[8, 8], 0.1, 2e-8, 4, 1, 1600.0);
    let med = AcousticMedium::homogeneous(&g, 1500.0, 1000.0, 0.0, 1.5).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 2)).unwrap().with_smoothing(false);
    let mut p0 = vec![0.0; 64];
    p0[4 + 8 * 4] = 1.0;
    let s = solver.make_source(&p0).unwrap();
    let centre = g.domain_to_total()[4 + 8 * 4];
    let expect = 1.0 / (2.0 * 2.0 * 2e-8 * 1500.0 * 1500.0);
    assert!((s[centre] - expect).abs() < 1e-12 * expect);
    assert_eq!(s.iter().filter(|&&v| v != 0.0).count(), 1);
    // both injections together deposit 𝕊p0/(d c²) per coordinate
    let mut st = solver.new_state();
    let mut ws = solver.workspace();
    let mut st_free = solver.new_state();
    solver.step(&mut st, Some(&s), &mut ws);
    solver.step(&mut st_free, None, &mut ws);
    let injected = st.rho[0][centre] * 2.0;
    assert!((injected - 1.0 / (2.0 * 1500.0 * 1500.0)).abs() < 1e-15);
}

#[test]
fn lossless_plane_wave_is_exact() {
    let (nx, c, rho0) = (32usize, 1500.0, 1000.0);
    let h = 0.05;
    let dt = 0.3 * h * 1e-3 / c;
    let g = grid(&[nx, 4], h, dt, 4, 0, c);
    let med = AcousticMedium::homogeneous(&g, c, rho0, 0.0, 1.5).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 1)).unwrap();
    let hm = h * 1e-3;
    let k = 2.0 * PI * 3.0 / (nx as f64 * hm);
    let w = c * k;
    let mut st = solver.new_state();
    for m in 0..g.total_len() {
        let x = (m % nx) as f64 * hm;
        st.p[m] = (k * x).cos();
        st.rho[0][m] = st.p[m] / (c * c);
        st.v[0][m] = (k * (x + hm / 2.0) + w * dt / 2.0).cos() / (rho0 * c);
    }
    let mut ws = solver.workspace();
    let steps = 200;
    for _ in 0..steps {
        solver.step(&mut st, None, &mut ws);
    }
    let t = steps as f64 * dt;
    for m in 0..g.total_len() {
        let x = (m % nx) as f64 * hm;
        assert!((st.p[m] - (k * x - w * t).cos()).abs() < 1e-10, "node {m}");
    }
}

/// Measured spatial attenuation (Np/m) of a travelling mode with `cycles`
/// wavelengths across a periodic strip, observed over `periods` periods.
pub(crate) fn measured_attenuation(cycles: usize, periods: f64, alpha0: f64, y: f64) -> (f64, f64) {
    let (nx, c, rho0) = (128usize, 1500.0, 1000.0);
    let h = 6.0 / nx as f64;
    let hm = h * 1e-3;
    let dt = 0.3 * hm / c;
    let k = 2.0 * PI * cycles as f64 / (nx as f64 * hm);
    let w = c * k;
    let steps = (periods * 2.0 * PI / w / dt).round() as usize;
    let g = grid(&[nx, 4], h, dt, 4, 0, c);
    let med = AcousticMedium::homogeneous(&g, c, rho0, alpha0, y).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 1)).unwrap();
    let mut st = solver.new_state();
    for m in 0..g.total_len() {
        let x = (m % nx) as f64 * hm;
        st.p[m] = (k * x).cos();
        st.rho[0][m] = st.p[m] / (c * c);
        st.v[0][m] = (k * (x + hm / 2.0) + w * dt / 2.0).cos() / (rho0 * c);
    }
    let mut ws = solver.workspace();
    let mut ts = Vec::with_capacity(steps);
    let mut logs = Vec::with_capacity(steps);
    let mut phases = Vec::with_capacity(steps);
    for s in 1..=steps {
        solver.step(&mut st, None, &mut ws);
        let (mut re, mut im) = (0.0, 0.0);
        for m in 0..g.total_len() {
            let x = (m % nx) as f64 * hm;
            re += st.p[m] * (k * x).cos();
            im -= st.p[m] * (k * x).sin();
        }
        ts.push(s as f64 * dt);
        logs.push((re * re + im * im).sqrt().ln());
        phases.push(im.atan2(re));
    }
    let slope = |ys: &[f64]| {
        let n = ts.len() as f64;
        let mt = ts.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
        let den: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
        num / den
    };
    let mut unwrapped = phases.clone();
    for i in 1..unwrapped.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        unwrapped[i] = unwrapped[i - 1] + d;
    }
    let decay = -slope(&logs);
    let omega = -slope(&unwrapped);
    let phase_speed = omega / k;
    (decay / phase_speed, w)
}

#[test]
fn power_law_absorption() {
    let alpha0 = 0.75;
    for cycles in [4usize, 8] {
        let (measured, w) = measured_attenuation(cycles, 10.0, alpha0, 1.5);
        let expect = db_to_neper(alpha0, 1.5) * w.powf(1.5);
        let rel = (measured - expect).abs() / expect;
        assert!(rel < 0.05, "cycles {cycles}: measured {measured} expected {expect}");
    }
}

#[test]
fn lossless_periodic_energy_is_conserved() {
    let n = 32;
    let (c, rho0) = (1500.0, 1000.0);
    let h = 0.05;
    let dt = 0.3 * h * 1e-3 / c;
    let g = grid(&[n, n], h, dt, 300, 0, c);
    let med = AcousticMedium::homogeneous(&g, c, rho0, 0.0, 1.5).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 1)).unwrap();
    let mut st = solver.new_state();
    for m in 0..g.total_len() {
        let (i, j) = ((m % n) as f64 - 16.0, (m / n) as f64 - 12.0);
        let p = (-(i * i + j * j) / 8.0).exp();
        st.p[m] = p;
        st.rho[0][m] = p / (2.0 * c * c);
        st.rho[1][m] = p / (2.0 * c * c);
    }
    let mut ws = solver.workspace();
    let energy = |prev: &AcousticState, next: &AcousticState| -> f64 {
        let mut e = 0.0;
        for m in 0..prev.p.len() {
            e += prev.p[m] * prev.p[m] / (2.0 * rho0 * c * c);
            for i in 0..2 {
                e += 0.5 * rho0 * prev.v[i][m] * next.v[i][m];
            }
        }
        e
    };
    let mut prev = st.clone();
    solver.step(&mut st, None, &mut ws);
    let e0 = energy(&prev, &st);
    for _ in 0..300 {
        prev = st.clone();
        solver.step(&mut st, None, &mut ws);
        let e = energy(&prev, &st);
        assert!((e - e0).abs() < 0.01 * e0, "energy drifted from {e0} to {e}");
    }
}

#[test]
fn forward_is_linear() {
    let g = grid(&[12, 10], 0.1, 2e-8, 20, 2, 1600.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let solver = AcousticSolver::new(g.clone(), random_medium(&g, &mut rng, 0.75), &some_detectors(&g, 6)).unwrap();
    let nd = g.domain_len();
    let a: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.5 * x - 2.0 * y).collect();
    let (fa, fb, fc) = (
        solver.forward(&a).unwrap(),
        solver.forward(&b).unwrap(),
        solver.forward(&combo).unwrap(),
    );
    let scale = fc.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for i in 0..fc.data.len() {
        assert!((fc.data[i] - 1.5 * fa.data[i] + 2.0 * fb.data[i]).abs() < 1e-10 * scale);
    }
}

/// Relative adjoint mismatch `|⟨Hp, P⟩ - ⟨p, H*P⟩| / (‖Hp‖‖P‖)`.
pub(crate) fn adjoint_mismatch(solver: &AcousticSolver, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = solver.grid().domain_len();
    let p0: Vec<f64> = (0..nd).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let hp = solver.forward(&p0).unwrap();
    let data: Vec<f64> = (0..hp.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let pm = MeasurementSeries::from_data(hp.n_s, hp.n_t, hp.dt, data).unwrap();
    let back = solver.adjoint(&pm).unwrap();
    let lhs = dot(&hp.data, &pm.data);
    let rhs = dot(&p0, &back);
    (lhs - rhs).abs() / (crate::linalg::norm(&hp.data) * crate::linalg::norm(&pm.data))
}

#[test]
fn adjoint_test_three_media() {
    let c_ref = 1600.0;
    let dt = 0.3 * 0.1e-3 / 1600.0;
    let g = grid(&[16, 16], 0.1, dt, 32, 3, c_ref);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let media = [
        AcousticMedium::homogeneous(&g, 1500.0, 1000.0, 0.0, 1.5).unwrap(),
        random_medium(&g, &mut rng, 0.0),
        random_medium(&g, &mut rng, 0.75),
    ];
    for (k, med) in media.into_iter().enumerate() {
        let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 20)).unwrap();
        let err = adjoint_mismatch(&solver, 100 + k as u64);
        assert!(err < 1e-10, "medium {k}: {err:e}");
    }
}

#[test]
fn adjoint_test_three_dimensions() {
    let dt = 0.3 * 0.1e-3 / 1600.0;
    let g = grid(&[6, 5, 4], 0.1, dt, 10, 1, 1600.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let solver = AcousticSolver::new(g.clone(), random_medium(&g, &mut rng, 0.75), &some_detectors(&g, 9)).unwrap();
    assert!(adjoint_mismatch(&solver, 5) < 1e-10);
}

/// Dense `H_a` assembled by probing single steps: `T` column by column and
/// the source map from unit initial pressures.
pub(crate) fn dense_forward(solver: &AcousticSolver) -> DMatrix<f64> {
    let g = solver.grid();
    let d = g.dim();
    let n = g.total_len();
    let dim_z = (2 * d + 1) * n;
    let mut ws = solver.workspace();
    let mut t = DMatrix::<f64>::zeros(dim_z, dim_z);
    let mut e = vec![0.0; dim_z];
    for j in 0..dim_z {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let mut st = AcousticState::from_flat(d, &e);
        solver.step(&mut st, None, &mut ws);
        t.set_column(j, &DVector::from_vec(st.to_flat()));
    }
    let nd = g.domain_len();
    let mut s0 = DMatrix::<f64>::zeros(dim_z, nd);
    for j in 0..nd {
        let mut p0 = vec![0.0; nd];
        p0[j] = 1.0;
        let src = solver.make_source(&p0).unwrap();
        let mut st = solver.new_state();
        solver.step(&mut st, Some(&src), &mut ws);
        s0.set_column(j, &DVector::from_vec(st.to_flat()));
    }
    let det: Vec<usize> = solver.detectors().nodes.iter().map(|&k| g.domain_to_total()[k]).collect();
    let nt = g.nt();
    let ns = det.len();
    let mut h = DMatrix::<f64>::zeros(ns * nt, nd);
    // z_m = T^m S0 + T^{m-1} S0
    let mut cur = s0.clone();
    let mut prev: Option<DMatrix<f64>> = None;
    for m in 0..nt {
        let z = match &prev {
            Some(p) => &cur + p,
            None => cur.clone(),
        };
        for (s, &node) in det.iter().enumerate() {
            let row = z.row(2 * d * n + node);
            h.set_row(s * nt + m, &row);
        }
        let next = &t * &cur;
        prev = Some(cur);
        cur = next;
    }
    h
}

#[test]
fn dense_oracle_equivalence() {
    let dt = 0.3 * 0.1e-3 / 1600.0;
    let g = grid(&[8, 8], 0.1, dt, 6, 1, 1600.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let solver = AcousticSolver::new(g.clone(), random_medium(&g, &mut rng, 0.75), &some_detectors(&g, 5)).unwrap();
    let h = dense_forward(&solver);
    let p0: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let fwd = solver.forward(&p0).unwrap();
    let want = &h * DVector::from_column_slice(&p0);
    for i in 0..fwd.data.len() {
        assert!((fwd.data[i] - want[i]).abs() < 1e-10);
    }
    let data: Vec<f64> = (0..fwd.data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let back = solver.adjoint(&MeasurementSeries::from_data(5, 6, dt, data.clone()).unwrap()).unwrap();
    let want = h.transpose() * DVector::from_vec(data);
    for i in 0..64 {
        assert!((back[i] - want[i]).abs() < 1e-10);
    }
}

#[test]
fn blow_up_is_reported_with_step() {
    let g = grid(&[8, 8], 0.1, 2e-8, 6, 1, 1600.0);
    let med = AcousticMedium::homogeneous(&g, 1500.0, 1000.0, 0.0, 1.5).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &some_detectors(&g, 64)).unwrap();
    let mut p0 = vec![0.0; 64];
    p0[10] = f64::NAN;
    assert!(matches!(solver.forward(&p0), Err(crate::Error::NonFinite { step: -1 })));
}

#[test]
fn full_size_generation_run_completes() {
    let c_max = 1725.0;
    let h = 7.81e-2;
    let dt = cfl_time_step(&[h, h], c_max, 0.3);
    let g = grid(&[128, 128], h, dt, 1017, 20, c_max);
    let lo = vec![0.0, 0.0];
    let hi = g.spec().extent_max();
    let sides = [
        crate::geometry::Side { axis: 0, upper: false },
        crate::geometry::Side { axis: 1, upper: true },
    ];
    let det = Detectors::snapped(&g, &Detectors::side_points(&lo, &hi, &sides, 79));
    assert_eq!(det.len(), 158);
    let distinct: std::collections::HashSet<_> = det.nodes.iter().collect();
    assert_eq!(distinct.len(), 158);
    let med = AcousticMedium::homogeneous(&g, 1500.0, 1000.0, 0.75, 1.5).unwrap();
    let solver = AcousticSolver::new(g.clone(), med, &det).unwrap();
    let mut p0 = vec![0.0; g.domain_len()];
    for (k, v) in p0.iter_mut().enumerate() {
        let (i, j) = ((k % 128) as f64 - 64.0, (k / 128) as f64 - 64.0);
        *v = if i * i + j * j < 100.0 { 1.0 } else { 0.0 };
    }
    let out = solver.forward(&p0).unwrap();
    assert_eq!((out.n_s, out.n_t), (158, 1017));
    assert!(out.data.iter().all(|v| v.is_finite()));
    assert!(g.max_frequency(1276.0) > 7.0e6);
}
