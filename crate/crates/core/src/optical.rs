//! P1 finite-element diffusion approximation: assembly, the heating map, its
//! Fréchet derivative and two discrete adjoints.

use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::geometry::{FeMesh, NodeElementMaps, Side};
use crate::linalg::{CsrMatrix, SpdFactor};

/// Elemental diffusion `κ` (mm) and absorption `μ` (1/mm).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub kappa: Vec<f64>,
    pub mu: Vec<f64>,
}

impl CoefficientPair {
    pub fn constant(n: usize, kappa: f64, mu: f64) -> Self {
        CoefficientPair {
            kappa: vec![kappa; n],
            mu: vec![mu; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Stacks `[κ, μ]` into one vector.
    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.kappa.clone();
        v.extend_from_slice(&self.mu);
        v
    }

    pub fn from_stacked(v: &[f64]) -> Self {
        let n = v.len() / 2;
        CoefficientPair {
            kappa: v[..n].to_vec(),
            mu: v[n..].to_vec(),
        }
    }

    pub fn check_positive(&self) -> Result<()> {
        for (what, v) in [("diffusion coefficient", &self.kappa), ("absorption coefficient", &self.mu)] {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, &x)| !(x > 0.0 && x.is_finite())) {
                return Err(Error::NonPositive { what, index, value });
            }
        }
        Ok(())
    }
}

/// Diffuse inward boundary current, one value per boundary facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Illumination {
    pub current: Vec<f64>,
}

impl Illumination {
    /// Unit current on every facet of the given box sides.
    pub fn sides(mesh: &FeMesh, sides: &[Side]) -> Self {
        Illumination {
            current: mesh
                .boundary_facets()
                .iter()
                .map(|f| if sides.contains(&f.side) { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn zero(mesh: &FeMesh) -> Self {
        Illumination {
            current: vec![0.0; mesh.boundary_facets().len()],
        }
    }
}

/// `2γ_d` in the Robin boundary term.
pub fn robin_factor(dim: usize) -> f64 {
    if dim == 2 {
        2.0 / PI
    } else {
        0.5
    }
}

/// Mesh-dependent parts of the optical system shared by all coefficients.
#[derive(Debug, Clone)]
pub struct OpticalModel {
    dim: usize,
    n_nodes: usize,
    /// Element node lists, `d + 1` per element.
    conn: Vec<usize>,
    /// Coefficient-free element stiffness `S ∇φ_a·∇φ_b`, row-major per element.
    stiff: Vec<f64>,
    volumes: Vec<f64>,
    boundary: CsrMatrix,
    facets: Vec<(Vec<usize>, f64)>,
    pub maps: NodeElementMaps,
}

/// Assembled `A_o = K[κ] + C[μ] + R` with its factorisation and solution `Φ₀`.
#[derive(Debug, Clone)]
pub struct PhotonSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    pub phi: Vec<f64>,
    /// `𝕀Φ₀`
    pub phi_elem: Vec<f64>,
    pub coeffs: CoefficientPair,
    factor: SpdFactor,
}

impl PhotonSystem {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(rhs)
    }
}

impl OpticalModel {
    pub fn new(mesh: &FeMesh) -> Self {
        let d = mesh.dim();
        let k = d + 1;
        let ne = mesh.num_elements();
        let mut conn = Vec::with_capacity(ne * k);
        let mut stiff = Vec::with_capacity(ne * k * k);
        for e in 0..ne {
            conn.extend_from_slice(mesh.element(e));
            let g = mesh.basis_gradients(e);
            let s = mesh.volumes()[e];
            for a in 0..k {
                for b in 0..k {
                    let gg: f64 = (0..d).map(|i| g[a][i] * g[b][i]).sum();
                    stiff.push(s * gg);
                }
            }
        }

        let gamma2 = robin_factor(d);
        let mut triplets = Vec::new();
        let mut facets = Vec::with_capacity(mesh.boundary_facets().len());
        for f in mesh.boundary_facets() {
            // ∫ φ_a φ_b over a (d-1)-simplex of measure s: s(1+δ_ab)/(d(d+1)).
            let w = gamma2 * f.measure / (d * (d + 1)) as f64;
            for &a in &f.nodes {
                for &b in &f.nodes {
                    triplets.push((a, b, if a == b { 2.0 * w } else { w }));
                }
            }
            facets.push((f.nodes.clone(), f.measure));
        }
        let n_nodes = mesh.num_nodes();
        OpticalModel {
            dim: d,
            n_nodes,
            conn,
            stiff,
            volumes: mesh.volumes().to_vec(),
            boundary: CsrMatrix::from_triplets(n_nodes, n_nodes, &triplets),
            facets,
            maps: NodeElementMaps::new(mesh),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.volumes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    fn nodes_of(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.conn[e * k..(e + 1) * k]
    }

    fn local_stiffness(&self, e: usize) -> &[f64] {
        let k = self.dim + 1;
        &self.stiff[e * k * k..(e + 1) * k * k]
    }

    /// Coefficient-free element mass entry `∫ φ_a φ_b`.
    fn mass_entry(&self, e: usize, a: usize, b: usize) -> f64 {
        let d = self.dim as f64;
        let s = self.volumes[e];
        let base = s / ((d + 1.0) * (d + 2.0));
        if a == b {
            2.0 * base
        } else {
            base
        }
    }

    fn check_coeff_len(&self, x: &CoefficientPair) -> Result<()> {
        check_len("diffusion coefficients", self.num_elements(), x.kappa.len())?;
        check_len("absorption coefficients", self.num_elements(), x.mu.len())
    }

    /// `K[κ] + C[μ] + R` without any positivity check.
    pub fn system_matrix(&self, x: &CoefficientPair) -> Result<CsrMatrix> {
        self.check_coeff_len(x)?;
        let k = self.dim + 1;
        let mut triplets = Vec::with_capacity(self.num_elements() * k * k + self.boundary.nnz());
        for e in 0..self.num_elements() {
            let nodes = self.nodes_of(e);
            let ks = self.local_stiffness(e);
            for a in 0..k {
                for b in 0..k {
                    let v = x.kappa[e] * ks[a * k + b] + x.mu[e] * self.mass_entry(e, a, b);
                    triplets.push((nodes[a], nodes[b], v));
                }
            }
        }
        for r in 0..self.n_nodes {
            for (c, v) in self.boundary.row(r) {
                triplets.push((r, c, v));
            }
        }
        Ok(CsrMatrix::from_triplets(self.n_nodes, self.n_nodes, &triplets))
    }

    /// `G_p = ∫ 2 I_s φ_p ds`.
    pub fn load_vector(&self, illum: &Illumination) -> Result<Vec<f64>> {
        check_len("boundary current", self.facets.len(), illum.current.len())?;
        let mut g = vec![0.0; self.n_nodes];
        let d = self.dim as f64;
        for ((nodes, measure), &i_s) in self.facets.iter().zip(&illum.current) {
            if i_s < 0.0 {
                return Err(Error::config("boundary current must be non-negative"));
            }
            for &p in nodes {
                g[p] += 2.0 * i_s * measure / d;
            }
        }
        Ok(g)
    }

    /// Assembles, factorises and solves for `Φ₀`.
    pub fn assemble(&self, x: &CoefficientPair, illum: &Illumination) -> Result<PhotonSystem> {
        self.check_coeff_len(x)?;
        x.check_positive()?;
        let matrix = self.system_matrix(x)?;
        let factor = SpdFactor::new(&matrix)?;
        let load = self.load_vector(illum)?;
        let phi = factor.solve(&load)?;
        let phi_elem = self.maps.node_to_element(&phi)?;
        Ok(PhotonSystem {
            matrix,
            load,
            phi,
            phi_elem,
            coeffs: x.clone(),
            factor,
        })
    }

    /// `H = μ ∘ 𝕀Φ₀`.
    pub fn heating(&self, sys: &PhotonSystem) -> Vec<f64> {
        sys.coeffs
            .mu
            .iter()
            .zip(&sys.phi_elem)
            .map(|(m, p)| m * p)
            .collect()
    }

    /// `A_δ[δκ, δμ] Φ`.
    fn perturbation_times(&self, dx: &CoefficientPair, phi: &[f64]) -> Vec<f64> {
        let k = self.dim + 1;
        let mut out = vec![0.0; self.n_nodes];
        for e in 0..self.num_elements() {
            if dx.kappa[e] == 0.0 && dx.mu[e] == 0.0 {
                continue;
            }
            let nodes = self.nodes_of(e);
            let ks = self.local_stiffness(e);
            for a in 0..k {
                let mut acc = 0.0;
                for b in 0..k {
                    acc += (dx.kappa[e] * ks[a * k + b] + dx.mu[e] * self.mass_entry(e, a, b)) * phi[nodes[b]];
                }
                out[nodes[a]] += acc;
            }
        }
        out
    }

    /// Per element `(uᵀ K̂_j Φ, uᵀ M̂_j Φ)` for the coefficient-free element matrices.
    fn element_products(&self, u: &[f64], phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.dim + 1;
        let ne = self.num_elements();
        let mut pk = vec![0.0; ne];
        let mut pm = vec![0.0; ne];
        for e in 0..ne {
            let nodes = self.nodes_of(e);
            let ks = self.local_stiffness(e);
            let (mut sk, mut sm) = (0.0, 0.0);
            for a in 0..k {
                let ua = u[nodes[a]];
                for b in 0..k {
                    let pb = phi[nodes[b]];
                    sk += ua * ks[a * k + b] * pb;
                    sm += ua * self.mass_entry(e, a, b) * pb;
                }
            }
            pk[e] = sk;
            pm[e] = sm;
        }
        (pk, pm)
    }

    /// `δH = δμ∘𝕀Φ₀ + μ∘𝕀δΦ` with `A_o δΦ = −A_δ Φ₀`.
    pub fn jacobian_apply(&self, sys: &PhotonSystem, dx: &CoefficientPair) -> Result<Vec<f64>> {
        self.check_coeff_len(dx)?;
        let mut rhs = self.perturbation_times(dx, &sys.phi);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let dphi = sys.solve(&rhs)?;
        let dphi_elem = self.maps.node_to_element(&dphi)?;
        Ok((0..self.num_elements())
            .map(|j| dx.mu[j] * sys.phi_elem[j] + sys.coeffs.mu[j] * dphi_elem[j])
            .collect())
    }

    /// Adjoint of [`Self::jacobian_apply`] under the volume-weighted inner
    /// product on elemental vectors.
    pub fn jacobian_adjoint(&self, sys: &PhotonSystem, h: &[f64]) -> Result<CoefficientPair> {
        check_len("elemental adjoint input", self.num_elements(), h.len())?;
        let mh: Vec<f64> = h.iter().zip(&sys.coeffs.mu).map(|(a, m)| a * m).collect();
        let mut rhs = self.maps.element_to_node(&mh)?;
        rhs.iter_mut().for_each(|v| *v = -*v);
        let h_tilde = sys.solve(&rhs)?;
        let (pk, pm) = self.element_products(&h_tilde, &sys.phi);
        let s = &self.volumes;
        Ok(CoefficientPair {
            kappa: (0..self.num_elements()).map(|j| pk[j] / s[j]).collect(),
            mu: (0..self.num_elements())
                .map(|j| pm[j] / s[j] + h[j] * sys.phi_elem[j])
                .collect(),
        })
    }

    /// Euclidean transpose of [`Self::jacobian_apply`], the exact gradient
    /// of an elemental least-squares functional.
    pub fn jacobian_transpose(&self, sys: &PhotonSystem, y: &[f64]) -> Result<CoefficientPair> {
        check_len("elemental adjoint input", self.num_elements(), y.len())?;
        let my: Vec<f64> = y.iter().zip(&sys.coeffs.mu).map(|(a, m)| a * m).collect();
        let rhs = self.maps.element_to_node_transpose(&my)?;
        let z = sys.solve(&rhs)?;
        let (pk, pm) = self.element_products(&z, &sys.phi);
        Ok(CoefficientPair {
            kappa: pk.iter().map(|v| -v).collect(),
            mu: (0..self.num_elements())
                .map(|j| -pm[j] + y[j] * sys.phi_elem[j])
                .collect(),
        })
    }
}
