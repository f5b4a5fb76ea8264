use super::FeMesh;
use crate::error::{check_len, Result};
use crate::linalg::CsrMatrix;

/// Node-to-element averaging map `𝕀` and its volume-weighted companion `𝕀⁺`.
#[derive(Debug, Clone)]
pub struct NodeElementMaps {
    /// `N_e × N_n`, entries `1/(d+1)`.
    pub to_element: CsrMatrix,
    /// `N_n × N_e`, entries `S_j/(d+1)`.
    pub to_node: CsrMatrix,
    volumes: Vec<f64>,
}

impl NodeElementMaps {
    pub fn new(mesh: &FeMesh) -> Self {
        let k = mesh.dim() + 1;
        let w = 1.0 / k as f64;
        let mut fwd = Vec::with_capacity(mesh.num_elements() * k);
        let mut back = Vec::with_capacity(mesh.num_elements() * k);
        for e in 0..mesh.num_elements() {
            let s = mesh.volumes()[e];
            for &n in mesh.element(e) {
                fwd.push((e, n, w));
                back.push((n, e, s * w));
            }
        }
        NodeElementMaps {
            to_element: CsrMatrix::from_triplets(mesh.num_elements(), mesh.num_nodes(), &fwd),
            to_node: CsrMatrix::from_triplets(mesh.num_nodes(), mesh.num_elements(), &back),
            volumes: mesh.volumes().to_vec(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.to_element.ncols()
    }

    pub fn num_elements(&self) -> usize {
        self.to_element.nrows()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn node_to_element(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_len("nodal vector", self.num_nodes(), theta.len())?;
        Ok(self.to_element.mul_vec(theta))
    }

    pub fn element_to_node(&self, big_theta: &[f64]) -> Result<Vec<f64>> {
        check_len("elemental vector", self.num_elements(), big_theta.len())?;
        Ok(self.to_node.mul_vec(big_theta))
    }

    /// `𝕀ᵀΘ`, the Euclidean transpose of [`Self::node_to_element`].
    pub fn element_to_node_transpose(&self, big_theta: &[f64]) -> Result<Vec<f64>> {
        check_len("elemental vector", self.num_elements(), big_theta.len())?;
        Ok(self.to_element.transpose_mul_vec(big_theta))
    }
}
