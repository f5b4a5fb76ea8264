use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::phantom::AcousticMaps;
use crate::acoustic::MeasurementSeries;

/// Range of a signal before and after noise was added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseReport {
    pub snr_db: f64,
    /// Standard deviation of the added noise.
    pub sigma: f64,
    pub min_before: f64,
    pub max_before: f64,
    pub min_after: f64,
    pub max_after: f64,
    /// `max_i |x̃_i − x_i| / |x_i|` over nonzero entries.
    pub max_relative_deviation: f64,
}

/// Noise level giving signal power / noise power = 10^(snr/10), with the
/// signal power taken as the mean square of `x`.
pub fn noise_sigma(x: &[f64], snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY || x.is_empty() {
        return 0.0;
    }
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    (power / 10f64.powf(snr_db / 10.0)).sqrt()
}

fn range(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Adds white Gaussian noise at `snr_db` to `x` in place, drawing from `rng`.
pub fn add_awgn(x: &mut [f64], snr_db: f64, rng: &mut ChaCha8Rng) -> NoiseReport {
    let sigma = noise_sigma(x, snr_db);
    let (min_before, max_before) = range(x);
    let mut max_rel: f64 = 0.0;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
        for v in x.iter_mut() {
            let e = normal.sample(rng);
            if *v != 0.0 {
                max_rel = max_rel.max((e / *v).abs());
            }
            *v += e;
        }
    }
    let (min_after, max_after) = range(x);
    NoiseReport {
        snr_db,
        sigma,
        min_before,
        max_before,
        min_after,
        max_after,
        max_relative_deviation: max_rel,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediumReport {
    pub c: NoiseReport,
    pub rho: NoiseReport,
}

/// Corrupts sound speed, then density, from one stream seeded by `seed`.
pub fn corrupt_medium(maps: &AcousticMaps, snr_db: f64, seed: u64) -> (AcousticMaps, MediumReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = maps.clone();
    let c = add_awgn(&mut out.c, snr_db, &mut rng);
    let rho = add_awgn(&mut out.rho, snr_db, &mut rng);
    (out, MediumReport { c, rho })
}

/// Adds noise to every series at `snr_db` relative to that series' power.
pub fn add_data_noise(data: &[MeasurementSeries], snr_db: f64, seed: u64) -> (Vec<MeasurementSeries>, Vec<NoiseReport>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.to_vec();
    let reports = out.iter_mut().map(|s| add_awgn(&mut s.data, snr_db, &mut rng)).collect();
    (out, reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_snr_is_identity() {
        let maps = AcousticMaps {
            c: vec![1500.0, 1600.0],
            rho: vec![1000.0, 900.0],
        };
        let (out, rep) = corrupt_medium(&maps, f64::INFINITY, 3);
        assert_eq!(out, maps);
        assert_eq!(rep.c.sigma, 0.0);
        let s = MeasurementSeries::from_data(1, 3, 1e-8, vec![1.0, -2.0, 0.5]).unwrap();
        let (noisy, _) = add_data_noise(std::slice::from_ref(&s), f64::INFINITY, 1);
        assert_eq!(noisy[0], s);
    }

    #[test]
    fn measured_noise_power_matches_target() {
        let n = 200_000;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin() + 0.3).collect();
        let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        for snr in [10.0, 30.0] {
            let mut y = x.clone();
            add_awgn(&mut y, snr, &mut ChaCha8Rng::seed_from_u64(9));
            let noise = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
            let measured = 10.0 * (power / noise).log10();
            let ratio = 10f64.powf((measured - snr) / 10.0);
            assert!((ratio - 1.0).abs() < 0.01, "snr {snr}: measured {measured}");
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let maps = AcousticMaps {
            c: vec![1500.0; 50],
            rho: vec![1000.0; 50],
        };
        assert_eq!(corrupt_medium(&maps, 30.0, 5).0, corrupt_medium(&maps, 30.0, 5).0);
        assert_ne!(corrupt_medium(&maps, 30.0, 5).0, corrupt_medium(&maps, 30.0, 6).0);
    }
}
