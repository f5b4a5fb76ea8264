use std::path::Path;

use serde::Serialize;

use super::bundle::{cell_image, element_header, node_header, read_array, write_array, write_trace_outputs, ArrayHeader};
use super::config::{ExperimentConfig, GridConfig, Method, SideName};
use super::metrics::{relative_error, Prolongation};
use super::noise::{add_data_noise, corrupt_medium, MediumReport, NoiseReport};
use super::phantom::{make_phantom, AcousticMaps, Phantom};
use crate::acoustic::{cfl_time_step, AcousticMedium, AcousticSolver, Detectors, MeasurementSeries};
use crate::composite::{CounterSnapshot, ProblemSetup};
use crate::error::{Error, Result};
use crate::geometry::{FeMesh, Grid, GridSpec, Side};
use crate::optical::{CoefficientPair, Illumination};
use crate::regularization::TvOperator;
use crate::solvers::{run_admm, run_ld, run_pdipm, Reconstruction};

fn origin(g: &GridConfig) -> Vec<f64> {
    if g.origin.is_empty() {
        vec![0.0; g.dims.len()]
    } else {
        g.origin.clone()
    }
}

fn mesh_for(g: &GridConfig) -> Result<FeMesh> {
    FeMesh::structured(&g.dims, &g.spacing, &origin(g))
}

fn grid_for(g: &GridConfig, dt: f64, nt: usize, c_ref: f64) -> Result<Grid> {
    Grid::new(GridSpec {
        dims: g.dims.clone(),
        spacing: g.spacing.clone(),
        origin: origin(g),
        dt,
        nt,
        pml_size: g.pml_size,
        pml_alpha: g.pml_alpha,
        c_ref,
    })
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn sides(names: &[SideName]) -> Vec<Side> {
    names.iter().map(|s| s.side()).collect()
}

/// Shared time step and number of samples for both grids.
pub fn time_axis(cfg: &ExperimentConfig, generation: &AcousticMaps, reconstruction: &AcousticMaps) -> (f64, usize) {
    let dt = cfg.time.dt.unwrap_or_else(|| {
        let gen = cfl_time_step(&cfg.generation_grid.spacing, max_of(&generation.c), cfg.time.cfl);
        let rec = cfl_time_step(&cfg.reconstruction_grid.spacing, max_of(&reconstruction.c), cfg.time.cfl);
        gen.min(rec)
    });
    let nt = cfg.time.nt.unwrap_or_else(|| {
        let g = &cfg.generation_grid;
        let diag_m = g
            .dims
            .iter()
            .zip(&g.spacing)
            .map(|(&n, &h)| ((n - 1) as f64 * h * 1e-3).powi(2))
            .sum::<f64>()
            .sqrt();
        let t_end = cfg.time.t_end.unwrap_or(diag_m / min_of(&generation.c));
        (t_end / dt).floor() as usize + 1
    });
    (dt, nt)
}

/// Physical detector positions on the generation box, in mm.
pub fn detector_points(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    let g = &cfg.generation_grid;
    let lo = origin(g);
    let hi: Vec<f64> = (0..g.dims.len()).map(|a| lo[a] + (g.dims[a] - 1) as f64 * g.spacing[a]).collect();
    Detectors::side_points(&lo, &hi, &sides(&cfg.detectors.sides), cfg.detectors.per_side)
}

/// Everything produced before reconstruction.
#[derive(Debug, Clone)]
pub struct Generation {
    pub phantom: Phantom,
    pub mesh: FeMesh,
    pub clean_maps: AcousticMaps,
    /// The corrupted maps the data were simulated with.
    pub maps: AcousticMaps,
    pub reconstruction_maps: AcousticMaps,
    pub dt: f64,
    pub nt: usize,
    pub data: Vec<MeasurementSeries>,
    pub report: GenerationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationReport {
    pub dt: f64,
    pub nt: usize,
    pub detectors: usize,
    pub generation_max_frequency_hz: f64,
    pub reconstruction_max_frequency_hz: f64,
    pub medium_noise: MediumReport,
    pub data_noise: Vec<NoiseReport>,
}

/// Phantom, corrupted medium and noisy data on the generation grid.
pub fn generate(cfg: &ExperimentConfig) -> Result<Generation> {
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    let gen_cfg = &cfg.generation_grid;
    let mesh = mesh_for(gen_cfg).map_err(|e| e.at_stage("phantom"))?;
    let phantom = make_phantom(&cfg.phantom, &mesh, cfg.seeds.phantom);

    let rec_mesh = mesh_for(&cfg.reconstruction_grid).map_err(|e| e.at_stage("medium"))?;
    let clean_maps = AcousticMaps::sample(&cfg.acoustic, &mesh);
    let reconstruction_maps = AcousticMaps::sample(&cfg.acoustic, &rec_mesh);
    let (maps, medium_noise) = corrupt_medium(&clean_maps, cfg.acoustic.corruption_snr_db, cfg.seeds.medium);
    let (dt, nt) = time_axis(cfg, &maps, &reconstruction_maps);

    let simulate = || -> Result<Vec<MeasurementSeries>> {
        let grid = grid_for(gen_cfg, dt, nt, max_of(&maps.c))?;
        let medium = AcousticMedium::new(&grid, &maps.c, &maps.rho, cfg.acoustic.alpha0, cfg.acoustic.y)?;
        let det = Detectors::snapped(&grid, &detector_points(cfg));
        let mut solver = AcousticSolver::new(grid, medium, &det)?;
        if let Some(cut) = cfg.smoothing_cutoff() {
            solver = solver.with_smoothing_cutoff(&cut)?;
        }
        let illums = cfg.illuminations.iter().map(|q| Illumination::sides(&mesh, &sides(q))).collect();
        let setup = ProblemSetup::new(mesh.clone(), solver, illums, Vec::new())?;
        Ok(setup.forward(&phantom.coeffs)?.0)
    };
    let clean = simulate().map_err(|e| e.at_stage("simulate"))?;
    let (data, data_noise) = add_data_noise(&clean, cfg.data_noise_snr_db, cfg.seeds.data);

    let h_max = |g: &GridConfig| g.spacing.iter().copied().fold(0.0, f64::max) * 1e-3;
    let report = GenerationReport {
        dt,
        nt,
        detectors: detector_points(cfg).len(),
        generation_max_frequency_hz: min_of(&maps.c) / (2.0 * h_max(gen_cfg)),
        reconstruction_max_frequency_hz: min_of(&reconstruction_maps.c) / (2.0 * h_max(&cfg.reconstruction_grid)),
        medium_noise,
        data_noise,
    };
    Ok(Generation {
        phantom,
        mesh,
        clean_maps,
        maps,
        reconstruction_maps,
        dt,
        nt,
        data,
        report,
    })
}

/// Reconstruction result scored against the phantom.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub method: Method,
    pub mesh: FeMesh,
    pub reconstruction: Reconstruction,
    pub re_mu: f64,
    pub re_kappa: f64,
    pub counters: CounterSnapshot,
    /// The final estimate prolonged onto the generation mesh.
    pub prolonged: CoefficientPair,
}

/// The inverse problem on the reconstruction grid with the clean medium.
/// `phantom` is only used for the initial guess and for scoring.
pub fn reconstruct(cfg: &ExperimentConfig, phantom: &Phantom, data: Vec<MeasurementSeries>) -> Result<Outcome> {
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    let first = data.first().ok_or_else(|| Error::config("no measured data").at_stage("reconstruct"))?;
    let (dt, nt) = (first.dt, first.n_t);
    let rec_cfg = &cfg.reconstruction_grid;
    let gen_mesh = mesh_for(&cfg.generation_grid).map_err(|e| e.at_stage("reconstruct"))?;
    let build = || -> Result<(ProblemSetup, TvOperator)> {
        let mesh = mesh_for(rec_cfg)?;
        let maps = AcousticMaps::sample(&cfg.acoustic, &mesh);
        let grid = grid_for(rec_cfg, dt, nt, max_of(&maps.c))?;
        let medium = AcousticMedium::new(&grid, &maps.c, &maps.rho, cfg.acoustic.alpha0, cfg.acoustic.y)?;
        let det = Detectors::snapped(&grid, &detector_points(cfg));
        let mut solver = AcousticSolver::new(grid, medium, &det)?;
        if let Some(cut) = cfg.smoothing_cutoff() {
            solver = solver.with_smoothing_cutoff(&cut)?;
        }
        let illums = cfg.illuminations.iter().map(|q| Illumination::sides(&mesh, &sides(q))).collect();
        let tv = TvOperator::new(&mesh);
        Ok((ProblemSetup::new(mesh, solver, illums, data)?, tv))
    };
    let (setup, tv) = build().map_err(|e| e.at_stage("reconstruct"))?;
    let prolong = Prolongation::new(&setup.mesh, &gen_mesh);
    if phantom.coeffs.len() != gen_mesh.num_elements() {
        return Err(Error::config("phantom does not match the generation mesh").at_stage("score"));
    }
    let score = |x: &CoefficientPair| -> (f64, f64) {
        let re = |u: &[f64], t: &[f64]| relative_error(u, t, &prolong).unwrap_or(f64::NAN);
        (re(&x.mu, &phantom.coeffs.mu), re(&x.kappa, &phantom.coeffs.kappa))
    };
    let x0 = phantom.initial_guess(setup.num_elements(), cfg.initial_guess_factor);
    let timing = cfg.record_timing;
    let result = match cfg.method {
        Method::Admm => run_admm(&setup, &{ cfg.admm.with_timing(timing) }, &x0, &tv, Some(&score)),
        Method::Ld => run_ld(&setup, &{ cfg.ld.with_timing(timing) }, &x0, &tv, Some(&score)),
        Method::Pdipm => run_pdipm(&setup, &{ cfg.pdipm.with_timing(timing) }, &x0, &tv, Some(&score)),
    };
    let reconstruction = result.map_err(|e| e.at_stage("reconstruct"))?;
    let (re_mu, re_kappa) = score(&reconstruction.coeffs);
    let prolonged = CoefficientPair {
        kappa: prolong.apply(&reconstruction.coeffs.kappa).map_err(|e| e.at_stage("score"))?,
        mu: prolong.apply(&reconstruction.coeffs.mu).map_err(|e| e.at_stage("score"))?,
    };
    Ok(Outcome {
        method: cfg.method,
        counters: setup.counters.snapshot(),
        mesh: setup.mesh,
        reconstruction,
        re_mu,
        re_kappa,
        prolonged,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn series_header(s: &MeasurementSeries) -> ArrayHeader {
    ArrayHeader {
        shape: vec![s.n_s, s.n_t],
        spacing: vec![s.dt],
        layout: "series".into(),
    }
}

fn write_common(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("config.echo"), &cfg.to_toml())?;
    let s = &cfg.seeds;
    write_text(&dir.join("seeds.txt"), &format!("phantom {}\nmedium {}\ndata {}\n", s.phantom, s.medium, s.data))
}

/// Writes the generation half of a result bundle.
pub fn write_generation(dir: &Path, cfg: &ExperimentConfig, g: &Generation) -> Result<()> {
    write_common(dir, cfg)?;
    let eh = element_header(&g.mesh);
    write_array(&dir.join("phantom_mu.f64"), &eh, &g.phantom.coeffs.mu)?;
    write_array(&dir.join("phantom_kappa.f64"), &eh, &g.phantom.coeffs.kappa)?;
    let gh = node_header(&cfg.generation_grid.dims, &cfg.generation_grid.spacing);
    write_array(&dir.join("medium_c_generation.f64"), &gh, &g.maps.c)?;
    write_array(&dir.join("medium_rho_generation.f64"), &gh, &g.maps.rho)?;
    let rh = node_header(&cfg.reconstruction_grid.dims, &cfg.reconstruction_grid.spacing);
    write_array(&dir.join("medium_c_reconstruction.f64"), &rh, &g.reconstruction_maps.c)?;
    write_array(&dir.join("medium_rho_reconstruction.f64"), &rh, &g.reconstruction_maps.rho)?;
    for (q, s) in g.data.iter().enumerate() {
        write_array(&dir.join(format!("data_q{q}.f64")), &series_header(s), &s.data)?;
    }
    let report = toml::to_string(&g.report).map_err(|e| Error::config(e.to_string()))?;
    write_text(&dir.join("generation_report.toml"), &report)
}

/// Reads the phantom and data written by [`write_generation`].
pub fn load_generation(dir: &Path, cfg: &ExperimentConfig) -> Result<(Phantom, Vec<MeasurementSeries>)> {
    let (_, mu) = read_array(&dir.join("phantom_mu.f64"))?;
    let (_, kappa) = read_array(&dir.join("phantom_kappa.f64"))?;
    let phantom = Phantom {
        coeffs: CoefficientPair { kappa, mu },
        mu_range: cfg.phantom.mu_range,
        kappa_range: cfg.phantom.kappa_range,
        mu_background: cfg.phantom.mu_background,
        kappa_background: cfg.phantom.kappa_background,
    };
    let mut data = Vec::new();
    for q in 0..cfg.illuminations.len() {
        let path = dir.join(format!("data_q{q}.f64"));
        let (h, values) = read_array(&path)?;
        if h.layout != "series" || h.shape.len() != 2 || h.spacing.len() != 1 {
            return Err(Error::Format {
                path,
                reason: "expected a detector-by-time series".into(),
            });
        }
        data.push(MeasurementSeries::from_data(h.shape[0], h.shape[1], h.spacing[0], values)?);
    }
    Ok((phantom, data))
}

#[derive(Serialize)]
struct ReconstructionReport<'a> {
    method: String,
    re_mu: f64,
    re_kappa: f64,
    outer_iterations: usize,
    counters: &'a CounterSnapshot,
    warnings: &'a [String],
}

/// Writes the reconstruction half of a result bundle.
pub fn write_reconstruction(dir: &Path, cfg: &ExperimentConfig, phantom: &Phantom, out: &Outcome) -> Result<()> {
    write_common(dir, cfg)?;
    let eh = element_header(&out.mesh);
    write_array(&dir.join("reconstruction_mu.f64"), &eh, &out.reconstruction.coeffs.mu)?;
    write_array(&dir.join("reconstruction_kappa.f64"), &eh, &out.reconstruction.coeffs.kappa)?;
    let trace = &out.reconstruction.trace;
    write_trace_outputs(dir, trace)?;
    let gen_mesh = mesh_for(&cfg.generation_grid)?;
    let panel = |title: &str, v: &[f64]| (title.to_string(), cell_image(&gen_mesh, v));
    super::bundle::plot_maps(
        &dir.join("maps.svg"),
        &[
            vec![panel("mu phantom", &phantom.coeffs.mu), panel("mu reconstruction", &out.prolonged.mu)],
            vec![
                panel("kappa phantom", &phantom.coeffs.kappa),
                panel("kappa reconstruction", &out.prolonged.kappa),
            ],
        ],
    )?;
    let report = ReconstructionReport {
        method: out.method.to_string(),
        re_mu: out.re_mu,
        re_kappa: out.re_kappa,
        outer_iterations: trace.accepted().filter(|r| r.iteration > 0).count(),
        counters: &out.counters,
        warnings: &trace.warnings,
    };
    let text = toml::to_string(&report).map_err(|e| Error::config(e.to_string()))?;
    write_text(&dir.join("reconstruction_report.toml"), &text)
}

/// `generate` then `reconstruct`, writing the full bundle into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let g = generate(cfg)?;
    write_generation(dir, cfg, &g).map_err(|e| e.at_stage("write"))?;
    let out = reconstruct(cfg, &g.phantom, g.data.clone())?;
    write_reconstruction(dir, cfg, &g.phantom, &out).map_err(|e| e.at_stage("write"))?;
    Ok(out)
}
