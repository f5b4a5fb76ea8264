//! Rectilinear acoustic grid, the matched simplicial FE mesh and the maps
//! between nodal and elemental fields.

mod grid;
mod maps;
mod mesh;

pub use grid::{Grid, GridSpec};
pub use maps::NodeElementMaps;
pub use mesh::{BoundaryFacet, FeMesh, InternalFacet, Side};

/// Linear index of a multi-index on a grid whose first coordinate varies fastest.
pub fn linear_index(dims: &[usize], idx: &[usize]) -> usize {
    let mut lin = 0;
    for a in (0..dims.len()).rev() {
        lin = lin * dims[a] + idx[a];
    }
    lin
}

/// Inverse of [`linear_index`].
pub fn multi_index(dims: &[usize], mut lin: usize) -> Vec<usize> {
    dims.iter()
        .map(|&n| {
            let i = lin % n;
            lin /= n;
            i
        })
        .collect()
}
