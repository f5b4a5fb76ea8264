use std::collections::BTreeMap;

use super::*;
use crate::geometry::FeMesh;

const DESK: &str = include_str!("../../../../configs/desk_2d.toml");
const FULL: &str = include_str!("../../../../configs/full_2d.toml");

fn desk() -> ExperimentConfig {
    ExperimentConfig::from_toml(DESK).unwrap()
}

/// A 12² / 9² problem that runs in well under a second.
pub(crate) fn tiny() -> ExperimentConfig {
    let mut cfg = desk();
    cfg.generation_grid.dims = vec![12, 12];
    cfg.generation_grid.spacing = vec![0.9, 0.9];
    cfg.generation_grid.pml_size = 3;
    cfg.reconstruction_grid.dims = vec![9, 9];
    cfg.reconstruction_grid.spacing = vec![1.2, 1.2];
    cfg.reconstruction_grid.pml_size = 3;
    cfg.detectors.per_side = 9;
    cfg.illuminations.truncate(2);
    cfg.ld.max_outer = 2;
    cfg.ld.pcg.i_max = 4;
    cfg.pdipm.max_outer = 2;
    cfg.pdipm.k_max = 2;
    cfg.pdipm.pcg.i_max = 3;
    cfg.admm.max_outer = 2;
    cfg.admm.lbfgs.max_iterations = 2;
    cfg
}

fn histogram(v: &[f64]) -> BTreeMap<u64, usize> {
    let mut h = BTreeMap::new();
    for x in v {
        *h.entry(x.to_bits()).or_insert(0) += 1;
    }
    h
}

#[test]
fn config_round_trip_is_identity() {
    for text in [DESK, FULL] {
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_toml(), again.to_toml());
    }
    let mut cfg = desk();
    cfg.data_noise_snr_db = f64::INFINITY;
    cfg.time.nt = Some(17);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    let bad = DESK.replace("dimension = 2", "dimension = 2\ncolour = \"red\"");
    assert!(ExperimentConfig::from_toml(&bad).unwrap_err().is_config_error());
    let bad = DESK.replace("mu_background = 0.075", "mu_background = 0.5");
    assert!(ExperimentConfig::from_toml(&bad).unwrap_err().is_config_error());
    let bad = DESK.replace("method = \"ld\"", "method = \"gd\"");
    assert!(ExperimentConfig::from_toml(&bad).is_err());
    let bad = DESK.replace("dimension = 2", "dimension = 3");
    assert!(ExperimentConfig::from_toml(&bad).unwrap_err().is_config_error());
}

#[test]
fn inverse_crime_guard() {
    let mut cfg = desk();
    cfg.reconstruction_grid = cfg.generation_grid.clone();
    assert!(cfg.validate().unwrap_err().is_config_error());
    cfg.allow_inverse_crime = true;
    cfg.validate().unwrap();

    let mut cfg = desk();
    cfg.acoustic.corruption_snr_db = f64::INFINITY;
    assert!(cfg.validate().is_err());
    cfg.allow_inverse_crime = true;
    cfg.validate().unwrap();
}

#[test]
fn no_inclusions_give_background() {
    let mut cfg = desk();
    cfg.phantom.inclusions.clear();
    let mesh = FeMesh::structured(&[10, 10], &[1.0, 1.0], &[-5.0, -5.0]).unwrap();
    let p = make_phantom(&cfg.phantom, &mesh, 4);
    assert!(p.coeffs.mu.iter().all(|&v| v == 0.075));
    assert!(p.coeffs.kappa.iter().all(|&v| v == 0.3));
}

#[test]
fn desk_phantom_has_twenty_and_six_levels() {
    let cfg = desk();
    let g = &cfg.generation_grid;
    let mesh = FeMesh::structured(&g.dims, &g.spacing, &g.origin).unwrap();
    let p = make_phantom(&cfg.phantom, &mesh, cfg.seeds.phantom);
    let (hm, hk) = (histogram(&p.coeffs.mu), histogram(&p.coeffs.kappa));
    assert_eq!(hm.len(), 20);
    assert_eq!(hk.len(), 6);
    let mut expected: Vec<u64> = cfg.phantom.mu_values.iter().map(|v| v.to_bits()).collect();
    expected.push(0.075f64.to_bits());
    expected.sort();
    assert_eq!(hm.keys().copied().collect::<Vec<_>>(), expected);
    assert!(p.coeffs.mu.iter().all(|&v| (0.025..=0.325).contains(&v)));
    assert!(p.coeffs.kappa.iter().all(|&v| (0.2..=0.4).contains(&v)));
    // every inclusion keeps a visible part of its own
    assert!(hm.values().all(|&n| n >= 8), "{hm:?}");
}

#[test]
fn inclusion_values_enumerate_the_list() {
    let cfg = desk();
    for seed in [0, 1, 99] {
        let vals = inclusion_values(&cfg.phantom, seed);
        let mut mu: Vec<f64> = cfg
            .phantom
            .inclusions
            .iter()
            .zip(&vals)
            .filter(|(i, _)| i.target == Target::Mu)
            .map(|(_, &v)| v)
            .collect();
        mu.sort_by(f64::total_cmp);
        let mut listed = cfg.phantom.mu_values.clone();
        listed.sort_by(f64::total_cmp);
        assert_eq!(mu, listed);
    }
    assert_ne!(inclusion_values(&cfg.phantom, 0), inclusion_values(&cfg.phantom, 1));
    assert_eq!(inclusion_values(&cfg.phantom, 7), inclusion_values(&cfg.phantom, 7));
}

#[test]
fn explicit_inclusion_value_wins() {
    let mut cfg = desk();
    cfg.phantom.inclusions.truncate(1);
    cfg.phantom.inclusions[0].value = Some(0.3);
    assert_eq!(inclusion_values(&cfg.phantom, 3), vec![0.3]);
}

#[test]
fn corrupted_desk_medium_matches_table_ranges() {
    let cfg = desk();
    let g = &cfg.generation_grid;
    let mesh = FeMesh::structured(&g.dims, &g.spacing, &g.origin).unwrap();
    let clean = AcousticMaps::sample(&cfg.acoustic, &mesh);
    let lo = clean.c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = clean.c.iter().copied().fold(0.0, f64::max);
    assert_eq!((lo, hi), (1276.0, 1725.0));
    for seed in [cfg.seeds.medium, 1, 2, 3] {
        let (_, rep) = corrupt_medium(&clean, 30.0, seed);
        for r in [rep.c, rep.rho] {
            assert!((0.10..=0.20).contains(&r.max_relative_deviation), "{r:?}");
        }
        // corrupted extremes land near 1.13e3 and 1.90e3
        assert!(rep.c.min_after > 1000.0 && rep.c.min_after < 1200.0, "{:?}", rep.c);
        assert!(rep.c.max_after > 1800.0 && rep.c.max_after < 2000.0, "{:?}", rep.c);
    }
}

#[test]
fn desk_time_axis_and_detectors() {
    let cfg = desk();
    let pts = detector_points(&cfg);
    assert_eq!(pts.len(), 96);
    assert!(pts.iter().all(|p| p[0] == -5.0 || p[1] == -5.0 + 63.0 * 0.15625));
}

#[test]
fn full_size_config_is_expressible() {
    let cfg = ExperimentConfig::from_toml(FULL).unwrap();
    assert_eq!(cfg.generation_grid.dims, vec![128, 128]);
    assert_eq!(cfg.reconstruction_grid.dims, vec![80, 80]);
    assert_eq!(detector_points(&cfg).len(), 158);
    assert_eq!(cfg.time.nt, Some(1017));
    assert_eq!(cfg.illuminations.len(), 4);
    assert_eq!(cfg.generation_grid.pml_size, 20);
}

#[test]
fn tiny_pipeline_runs_and_bundle_reloads() {
    let mut cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&cfg).unwrap();
    assert_eq!(g.data.len(), 2);
    assert_eq!(g.data[0].n_s, 18);
    write_generation(dir.path(), &cfg, &g).unwrap();
    let (phantom, data) = load_generation(dir.path(), &cfg).unwrap();
    assert_eq!(phantom.coeffs, g.phantom.coeffs);
    assert_eq!(data, g.data);
    for method in [Method::Ld, Method::Pdipm, Method::Admm] {
        cfg.method = method;
        let out = reconstruct(&cfg, &phantom, data.clone()).unwrap();
        assert!(out.re_mu.is_finite() && out.re_kappa.is_finite());
        let first = &out.reconstruction.trace.records[0];
        assert!(first.re_mu > 0.0);
        write_reconstruction(dir.path(), &cfg, &phantom, &out).unwrap();
    }
    for f in ["config.echo", "seeds.txt", "trace.csv", "re.svg", "epsilon.svg", "maps.svg", "phantom_mu.f64"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let echo = std::fs::read_to_string(dir.path().join("config.echo")).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&echo).unwrap(), cfg);
}

#[test]
fn failing_stage_is_named() {
    let mut cfg = tiny();
    cfg.acoustic.c_background = 1e9;
    cfg.time.dt = Some(1e-6);
    let err = generate(&cfg).unwrap_err();
    assert!(err.to_string().starts_with("simulate"), "{err}");
    assert!(err.is_config_error(), "{err}");

    let cfg = tiny();
    let g = generate(&cfg).unwrap();
    let err = reconstruct(&cfg, &g.phantom, Vec::new()).unwrap_err();
    assert!(err.to_string().starts_with("reconstruct"), "{err}");
}

#[test]
fn initial_guess_is_scaled_mean() {
    let cfg = desk();
    let g = &cfg.generation_grid;
    let mesh = FeMesh::structured(&g.dims, &g.spacing, &g.origin).unwrap();
    let p = make_phantom(&cfg.phantom, &mesh, 1);
    let x0 = p.initial_guess(5, 1.2);
    let mean = p.coeffs.mu.iter().sum::<f64>() / p.coeffs.mu.len() as f64;
    assert_eq!(x0.mu, vec![1.2 * mean; 5]);
}
