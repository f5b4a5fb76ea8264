use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AcousticSpec, PhantomSpec, Target};
use crate::geometry::FeMesh;
use crate::optical::CoefficientPair;

/// Optical truth on the generation mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub coeffs: CoefficientPair,
    pub mu_range: [f64; 2],
    pub kappa_range: [f64; 2],
    pub mu_background: f64,
    pub kappa_background: f64,
}

impl Phantom {
    /// `factor` times the element mean of each coefficient.
    pub fn initial_guess(&self, n_elements: usize, factor: f64) -> CoefficientPair {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        CoefficientPair::constant(
            n_elements,
            factor * mean(&self.coeffs.kappa),
            factor * mean(&self.coeffs.mu),
        )
    }
}

/// Values of the inclusions in config order: explicit values first, the
/// rest cycling through the seed-shuffled value list of their coefficient.
pub fn inclusion_values(spec: &PhantomSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = spec.mu_values.clone();
    let mut kappa = spec.kappa_values.clone();
    mu.shuffle(&mut rng);
    kappa.shuffle(&mut rng);
    let (mut next_mu, mut next_kappa) = (0, 0);
    spec.inclusions
        .iter()
        .map(|inc| {
            inc.value.unwrap_or_else(|| match inc.target {
                Target::Mu => {
                    next_mu += 1;
                    mu[(next_mu - 1) % mu.len()]
                }
                Target::Kappa => {
                    next_kappa += 1;
                    kappa[(next_kappa - 1) % kappa.len()]
                }
            })
        })
        .collect()
}

/// Paints the inclusions onto the element centroids; later inclusions win.
pub fn make_phantom(spec: &PhantomSpec, mesh: &FeMesh, seed: u64) -> Phantom {
    let n = mesh.num_elements();
    let mut coeffs = CoefficientPair::constant(n, spec.kappa_background, spec.mu_background);
    let values = inclusion_values(spec, seed);
    let centroids: Vec<Vec<f64>> = (0..n).map(|e| mesh.centroid(e)).collect();
    for (inc, &v) in spec.inclusions.iter().zip(&values) {
        let field = match inc.target {
            Target::Mu => &mut coeffs.mu,
            Target::Kappa => &mut coeffs.kappa,
        };
        for (f, c) in field.iter_mut().zip(&centroids) {
            if inc.shape.contains(c) {
                *f = v;
            }
        }
    }
    Phantom {
        coeffs,
        mu_range: spec.mu_range,
        kappa_range: spec.kappa_range,
        mu_background: spec.mu_background,
        kappa_background: spec.kappa_background,
    }
}

/// Sound speed and ambient density on the domain nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticMaps {
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
}

impl AcousticMaps {
    /// The clean maps of `spec` sampled at the mesh nodes, which are the
    /// domain nodes of the matching acoustic grid.
    pub fn sample(spec: &AcousticSpec, mesh: &FeMesh) -> Self {
        let n = mesh.num_nodes();
        let mut c = vec![spec.c_background; n];
        let mut rho = vec![spec.rho_background; n];
        for lin in 0..n {
            let x = mesh.node(lin);
            for inc in spec.inclusions.iter().filter(|i| i.shape.contains(x)) {
                if let Some(v) = inc.c {
                    c[lin] = v;
                }
                if let Some(v) = inc.rho {
                    rho[lin] = v;
                }
            }
        }
        AcousticMaps { c, rho }
    }
}
