use std::collections::BTreeMap;
use std::io::Write;

use super::{linear_index, multi_index, Grid};
use crate::error::{Error, Result};

/// A face of the domain box: `axis` and whether it is the upper face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Side {
    pub axis: usize,
    pub upper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InternalFacet {
    pub elements: [usize; 2],
    /// Length (2D) or area (3D) of the shared facet, mm^(d-1).
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub element: usize,
    pub measure: f64,
    pub side: Side,
}

/// Simplicial mesh whose nodes coincide with the domain nodes of a [`Grid`].
///
/// Each grid cell is split into the `d!` Kuhn simplices, one per ordering of
/// the axes, so every 2D pixel holds two triangles sharing the diagonal from
/// its lower-left to its upper-right corner. Element `c * d! + r` is the
/// `r`-th simplex of cell `c`.
#[derive(Debug, Clone)]
pub struct FeMesh {
    dim: usize,
    node_dims: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<f64>,
    elements: Vec<usize>,
    volumes: Vec<f64>,
    internal: Vec<InternalFacet>,
    boundary: Vec<BoundaryFacet>,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 2 {
        return vec![vec![0, 1], vec![1, 0]];
    }
    vec![
        vec![0, 1, 2],
        vec![0, 2, 1],
        vec![1, 0, 2],
        vec![1, 2, 0],
        vec![2, 0, 1],
        vec![2, 1, 0],
    ]
}

fn sub(a: &[f64], b: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..a.len() {
        out[i] = a[i] - b[i];
    }
    out
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl FeMesh {
    pub fn from_grid(grid: &Grid) -> Result<Self> {
        let spec = grid.spec();
        Self::structured(&spec.dims, &spec.spacing, &spec.origin_or_zero())
    }

    /// Meshes a box of `dims` nodes directly; needs only two nodes per axis.
    pub fn structured(dims: &[usize], spacing: &[f64], origin: &[f64]) -> Result<Self> {
        let d = dims.len();
        if !(2..=3).contains(&d) {
            return Err(Error::config("mesh needs a 2D or 3D grid"));
        }
        if spacing.len() != d || origin.len() != d {
            return Err(Error::config("spacing/origin length must match dims"));
        }
        if dims.iter().any(|&n| n < 2) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::config("mesh needs at least 2 nodes and positive spacing per axis"));
        }
        let node_dims = dims.to_vec();
        let n_nodes: usize = node_dims.iter().product();
        let mut coords = Vec::with_capacity(n_nodes * d);
        for lin in 0..n_nodes {
            let idx = multi_index(&node_dims, lin);
            coords.extend((0..d).map(|a| origin[a] + idx[a] as f64 * spacing[a]));
        }

        let cell_dims: Vec<usize> = node_dims.iter().map(|n| n - 1).collect();
        let n_cells: usize = cell_dims.iter().product();
        let perms = permutations(d);
        let mut elements = Vec::with_capacity(n_cells * perms.len() * (d + 1));
        for c in 0..n_cells {
            let corner = multi_index(&cell_dims, c);
            for perm in &perms {
                let mut v = corner.clone();
                elements.push(linear_index(&node_dims, &v));
                for &axis in perm {
                    v[axis] += 1;
                    elements.push(linear_index(&node_dims, &v));
                }
            }
        }

        let mut mesh = FeMesh {
            dim: d,
            node_dims,
            spacing: spacing.to_vec(),
            coords,
            elements,
            volumes: Vec::new(),
            internal: Vec::new(),
            boundary: Vec::new(),
        };
        mesh.volumes = (0..mesh.num_elements()).map(|e| mesh.simplex_volume(e)).collect();
        mesh.build_facets();
        Ok(mesh)
    }

    fn simplex_volume(&self, e: usize) -> f64 {
        let nodes = self.element(e);
        let x0 = self.node(nodes[0]);
        let a = sub(self.node(nodes[1]), x0);
        let b = sub(self.node(nodes[2]), x0);
        if self.dim == 2 {
            (a[0] * b[1] - a[1] * b[0]).abs() / 2.0
        } else {
            let c = sub(self.node(nodes[3]), x0);
            let n = cross(a, b);
            (n[0] * c[0] + n[1] * c[1] + n[2] * c[2]).abs() / 6.0
        }
    }

    fn facet_measure(&self, nodes: &[usize]) -> f64 {
        let x0 = self.node(nodes[0]);
        let a = sub(self.node(nodes[1]), x0);
        if self.dim == 2 {
            norm3(a)
        } else {
            let b = sub(self.node(nodes[2]), x0);
            norm3(cross(a, b)) / 2.0
        }
    }

    fn build_facets(&mut self) {
        let d = self.dim;
        let mut owners: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for e in 0..self.num_elements() {
            let nodes = self.element(e).to_vec();
            for skip in 0..=d {
                let mut key: Vec<usize> = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &n)| n)
                    .collect();
                key.sort_unstable();
                owners.entry(key).or_default().push(e);
            }
        }
        let dims = self.node_dims.clone();
        for (nodes, elems) in owners {
            let measure = self.facet_measure(&nodes);
            match elems.as_slice() {
                &[a, b] => self.internal.push(InternalFacet {
                    elements: [a, b],
                    measure,
                }),
                &[a] => {
                    let idx: Vec<Vec<usize>> = nodes.iter().map(|&n| multi_index(&dims, n)).collect();
                    let side = (0..d)
                        .find_map(|axis| {
                            if idx.iter().all(|m| m[axis] == 0) {
                                Some(Side { axis, upper: false })
                            } else if idx.iter().all(|m| m[axis] == dims[axis] - 1) {
                                Some(Side { axis, upper: true })
                            } else {
                                None
                            }
                        })
                        .expect("facet with one owner lies on the box boundary");
                    self.boundary.push(BoundaryFacet {
                        nodes,
                        element: a,
                        measure,
                        side,
                    });
                }
                _ => unreachable!("a facet is shared by at most two simplices"),
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_dims(&self) -> &[usize] {
        &self.node_dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn elements_per_cell(&self) -> usize {
        if self.dim == 2 {
            2
        } else {
            6
        }
    }

    pub fn node(&self, p: usize) -> &[f64] {
        &self.coords[p * self.dim..(p + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn internal_facets(&self) -> &[InternalFacet] {
        &self.internal
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn centroid(&self, e: usize) -> Vec<f64> {
        let nodes = self.element(e);
        let mut c = vec![0.0; self.dim];
        for &n in nodes {
            for (ci, xi) in c.iter_mut().zip(self.node(n)) {
                *ci += xi;
            }
        }
        c.iter_mut().for_each(|v| *v /= nodes.len() as f64);
        c
    }

    /// Cell centre of the pixel/voxel holding element `e`.
    pub fn cell_centre(&self, e: usize) -> Vec<f64> {
        let cell = e / self.elements_per_cell();
        let cell_dims: Vec<usize> = self.node_dims.iter().map(|n| n - 1).collect();
        let corner = multi_index(&cell_dims, cell);
        let x0 = self.node(linear_index(&self.node_dims, &corner));
        (0..self.dim).map(|a| x0[a] + 0.5 * self.spacing[a]).collect()
    }

    /// Gradients of the `d + 1` barycentric basis functions on element `e`, 1/mm.
    pub fn basis_gradients(&self, e: usize) -> Vec<Vec<f64>> {
        let d = self.dim;
        let nodes = self.element(e);
        let x0 = self.node(nodes[0]);
        let mut b = nalgebra::DMatrix::<f64>::zeros(d, d);
        for k in 0..d {
            let xk = self.node(nodes[k + 1]);
            for a in 0..d {
                b[(a, k)] = xk[a] - x0[a];
            }
        }
        // The rows of B⁻¹ are the gradients of basis functions 1..=d.
        let inv = b.try_inverse().expect("elements are non-degenerate");
        let mut grads = vec![vec![0.0; d]; d + 1];
        for k in 0..d {
            for a in 0..d {
                grads[k + 1][a] = inv[(k, a)];
                grads[0][a] -= inv[(k, a)];
            }
        }
        grads
    }

    /// Writes node, element and edge tables as plain text.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nodes {} dim {}", self.num_nodes(), self.dim)?;
        for p in 0..self.num_nodes() {
            let row: Vec<String> = self.node(p).iter().map(|x| format!("{x:.9e}")).collect();
            writeln!(w, "{p} {}", row.join(" "))?;
        }
        writeln!(w, "elements {}", self.num_elements())?;
        for e in 0..self.num_elements() {
            let row: Vec<String> = self.element(e).iter().map(|n| n.to_string()).collect();
            writeln!(w, "{e} {} {:.9e}", row.join(" "), self.volumes[e])?;
        }
        writeln!(w, "internal_facets {}", self.internal.len())?;
        for (l, f) in self.internal.iter().enumerate() {
            writeln!(w, "{l} {} {} {:.9e}", f.elements[0], f.elements[1], f.measure)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;


    fn box_mesh(dims: &[usize], h: f64) -> FeMesh {
        FeMesh::structured(dims, &vec![h; dims.len()], &vec![0.0; dims.len()]).unwrap()
    }

    /// Brute-force count of facets shared by two elements.
    fn shared_facets_by_pairs(mesh: &FeMesh) -> usize {
        let ne = mesh.num_elements();
        let mut count = 0;
        for a in 0..ne {
            for b in a + 1..ne {
                let shared = mesh
                    .element(a)
                    .iter()
                    .filter(|n| mesh.element(b).contains(n))
                    .count();
                if shared == mesh.dim() {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn three_by_three_grid() {
        let h = 0.5;
        let mesh = box_mesh(&[4, 4], h);
        assert_eq!(mesh.num_elements(), 18);
        let mesh = box_mesh(&[3, 3], h);
        assert_eq!(mesh.num_elements(), 8);
        for &s in mesh.volumes() {
            assert!((s - h * h / 2.0).abs() < 1e-15);
        }
        assert_eq!(mesh.internal_facets().len(), 8);
        assert_eq!(shared_facets_by_pairs(&mesh), 8);
        assert_eq!(mesh.boundary_facets().len(), 8);
    }

    #[test]
    fn reconstruction_grid_element_count() {
        let mesh = FeMesh::from_grid(
            &Grid::new(GridSpec {
                dims: vec![80, 80],
                spacing: vec![0.1256; 2],
                origin: vec![-5.0, -5.0],
                dt: 1e-8,
                nt: 4,
                pml_size: 10,
                pml_alpha: 2.0,
                c_ref: 1500.0,
            })
            .unwrap(),
        )
        .unwrap();
        assert_eq!(mesh.num_elements(), 2 * 79 * 79);
        assert_eq!(mesh.num_elements(), 12482);
    }

    #[test]
    fn measures_sum_to_box() {
        for dims in [vec![5usize, 7], vec![4, 5, 6]] {
            let h = 0.3;
            let mesh = box_mesh(&dims, h);
            let sides: Vec<f64> = dims.iter().map(|&n| (n - 1) as f64 * h).collect();
            let vol: f64 = sides.iter().product();
            let total: f64 = mesh.volumes().iter().sum();
            assert!((total - vol).abs() < 1e-12 * vol);
            let surface: f64 = if dims.len() == 2 {
                2.0 * (sides[0] + sides[1])
            } else {
                2.0 * (sides[0] * sides[1] + sides[1] * sides[2] + sides[0] * sides[2])
            };
            let bsum: f64 = mesh.boundary_facets().iter().map(|f| f.measure).sum();
            assert!((bsum - surface).abs() < 1e-12 * surface);
            assert!(mesh.internal_facets().iter().all(|f| f.elements[0] != f.elements[1]));
            assert_eq!(mesh.internal_facets().len(), shared_facets_by_pairs(&mesh));
        }
    }

    #[test]
    fn each_pixel_holds_two_elements_around_its_centre() {
        let mesh = box_mesh(&[5, 4], 1.0);
        for cell in 0..12 {
            let c0 = mesh.centroid(2 * cell);
            let c1 = mesh.centroid(2 * cell + 1);
            let centre = mesh.cell_centre(2 * cell);
            for a in 0..2 {
                assert!(((c0[a] + c1[a]) / 2.0 - centre[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_gradients_sum_to_zero_and_reproduce_linears() {
        let mesh = box_mesh(&[3, 3, 3], 0.7);
        for e in 0..mesh.num_elements() {
            let g = mesh.basis_gradients(e);
            for a in 0..3 {
                let s: f64 = g.iter().map(|gk| gk[a]).sum();
                assert!(s.abs() < 1e-12);
                // Σ x_k^b ∇φ_k = e_b
                for b in 0..3 {
                    let v: f64 = mesh
                        .element(e)
                        .iter()
                        .zip(&g)
                        .map(|(&n, gk)| mesh.node(n)[b] * gk[a])
                        .sum();
                    assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn boundary_sides_are_balanced() {
        let mesh = box_mesh(&[6, 6], 1.0);
        for axis in 0..2 {
            for upper in [false, true] {
                let n = mesh
                    .boundary_facets()
                    .iter()
                    .filter(|f| f.side == Side { axis, upper })
                    .count();
                assert_eq!(n, 5);
            }
        }
    }

    #[test]
    fn text_export_lists_all_tables() {
        let mesh = box_mesh(&[3, 3], 1.0);
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("nodes 9 dim 2"));
        assert!(text.contains("elements 8"));
        assert!(text.contains("internal_facets 8"));
    }
}
