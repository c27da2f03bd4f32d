use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fespace::DofMap;
use crate::linalg::{Csr, RowMap};

/// Sparsity pattern of the matrices coupling two spaces, distributed like
/// the rows: rank `r` holds the sorted column list of each row it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGraph {
    rows: Arc<RowMap>,
    cols: Arc<RowMap>,
    /// Patterns with zero values, cloned as the starting point of assembly.
    blocks: Vec<Csr>,
}

/// For each scalar DoF, the cells whose closure contains it, ascending.
pub(crate) fn dof_cells(space: &DofMap) -> (Vec<usize>, Vec<usize>) {
    let n = space.n_scalar();
    let nc = space.mesh().n_cells();
    let mut ptr = vec![0usize; n + 1];
    for c in 0..nc {
        for &d in space.cell_dofs(c) {
            ptr[d + 1] += 1;
        }
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let mut fill = ptr.clone();
    let mut cells = vec![0; ptr[n]];
    for c in 0..nc {
        for &d in space.cell_dofs(c) {
            cells[fill[d]] = c;
            fill[d] += 1;
        }
    }
    (ptr, cells)
}

pub(crate) fn check_compatible(rows: &DofMap, cols: &DofMap) -> Result<()> {
    let same_mesh = Arc::ptr_eq(rows.mesh(), cols.mesh())
        || (rows.mesh().n_cells() == cols.mesh().n_cells() && rows.mesh().n_vertices() == cols.mesh().n_vertices());
    if !same_mesh {
        return Err(Error::Dimension("row and column spaces live on different meshes".into()));
    }
    if rows.partition().owners() != cols.partition().owners() {
        return Err(Error::Dimension("row and column spaces are distributed differently".into()));
    }
    Ok(())
}

/// Couples every row DoF of an element with every column DoF of the same
/// element, over all components.
pub fn build_graph(rows: &DofMap, cols: &DofMap) -> Result<MatrixGraph> {
    check_compatible(rows, cols)?;
    let row_map = rows.row_map();
    let col_map = cols.row_map();
    let (ptr, cells) = dof_cells(rows);
    let ns = rows.n_scalar();
    let (nt, kt) = (cols.n_scalar(), cols.components());
    let blocks = (0..row_map.n_ranks())
        .into_par_iter()
        .map(|r| {
            let mut row_lists = Vec::with_capacity(row_map.n_owned(r));
            let mut buf = Vec::new();
            for &g in row_map.owned(r) {
                let s = g % ns;
                buf.clear();
                for &c in &cells[ptr[s]..ptr[s + 1]] {
                    for k in 0..kt {
                        buf.extend(cols.cell_dofs(c).iter().map(|&d| k * nt + d));
                    }
                }
                buf.sort_unstable();
                buf.dedup();
                row_lists.push(buf.iter().map(|&j| (j, 0.0)).collect());
            }
            Csr::from_rows(col_map.n_global(), row_lists)
        })
        .collect();
    Ok(MatrixGraph { rows: row_map, cols: col_map, blocks })
}

impl MatrixGraph {
    pub fn row_map(&self) -> &Arc<RowMap> {
        &self.rows
    }

    pub fn col_map(&self) -> &Arc<RowMap> {
        &self.cols
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(Csr::nnz).sum()
    }

    /// Sorted columns of global row `g`.
    pub fn row(&self, g: usize) -> &[usize] {
        let (r, l) = (self.rows.owner(g), self.rows.local_index(g));
        self.blocks[r].row(l).0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    pub(crate) fn block(&self, r: usize) -> &Csr {
        &self.blocks[r]
    }
}
