use std::sync::{Arc, OnceLock};

use super::FiniteElement;
use crate::error::{Error, Result};
use crate::linalg::RowMap;
use crate::mesh::Mesh;
use crate::partition::Partition;

/// Global DoF numbering of a (possibly vector-valued) Lagrange space, with the
/// per-rank repeated and unique maps.
///
/// Scalar DoFs are numbered vertices first, then edges by lexicographic order
/// of their sorted vertex pair, so the numbering does not depend on the rank
/// count. Component `c` of a vector space occupies the block
/// `[c * n_scalar, (c + 1) * n_scalar)`.
#[derive(Debug)]
pub struct DofMap {
    mesh: Arc<Mesh>,
    partition: Arc<Partition>,
    element: FiniteElement,
    components: usize,
    n_scalar: usize,
    edges: Vec<[usize; 2]>,
    cell_dofs: Vec<usize>,
    scalar_owner: Vec<usize>,
    repeated: Vec<Vec<usize>>,
    unique: Vec<Vec<usize>>,
    row_map: OnceLock<Arc<RowMap>>,
}

/// Sorted global edge list of a mesh.
pub fn mesh_edges(mesh: &Mesh, element: &FiniteElement) -> Vec<[usize; 2]> {
    let mut edges = Vec::with_capacity(mesh.n_cells() * element.local_edges().len());
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        for &(a, b) in element.local_edges() {
            let (x, y) = (cell[a], cell[b]);
            edges.push(if x < y { [x, y] } else { [y, x] });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Builds the scalar DoF map of `element` on `mesh` distributed by `partition`.
pub fn build_dofmap(mesh: Arc<Mesh>, partition: Arc<Partition>, element: FiniteElement) -> Result<DofMap> {
    DofMap::new(mesh, partition, element, 1)
}

impl DofMap {
    /// Space with `components` copies of `element` (1 for scalar fields).
    pub fn new(mesh: Arc<Mesh>, partition: Arc<Partition>, element: FiniteElement, components: usize) -> Result<Self> {
        if element.dim() != mesh.dim() {
            return Err(Error::Dimension(format!("{}D element on a {}D mesh", element.dim(), mesh.dim())));
        }
        if partition.n_elements() != mesh.n_cells() {
            return Err(Error::Dimension("partition and mesh disagree on the cell count".into()));
        }
        if components == 0 {
            return Err(Error::Config("a space needs at least one component".into()));
        }
        let nv = mesh.n_vertices();
        let edges = if element.degree() == 2 { mesh_edges(&mesh, &element) } else { Vec::new() };
        let n_scalar = nv + edges.len();
        let nl = element.n_local_dof();
        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * nl);
        for c in 0..mesh.n_cells() {
            let cell = mesh.cell(c);
            cell_dofs.extend_from_slice(cell);
            if element.degree() == 2 {
                for &(a, b) in element.local_edges() {
                    let (x, y) = (cell[a].min(cell[b]), cell[a].max(cell[b]));
                    let e = edges.binary_search(&[x, y]).expect("edge collected above");
                    cell_dofs.push(nv + e);
                }
            }
        }

        // A DoF belongs to the lowest rank owning an element around it.
        let mut scalar_owner = vec![usize::MAX; n_scalar];
        for c in 0..mesh.n_cells() {
            let r = partition.owner(c);
            for &d in &cell_dofs[c * nl..(c + 1) * nl] {
                scalar_owner[d] = scalar_owner[d].min(r);
            }
        }
        if scalar_owner.contains(&usize::MAX) {
            return Err(Error::Invariant("mesh has vertices outside every cell".into()));
        }

        let nr = partition.n_ranks();
        let mut repeated_scalar = Vec::with_capacity(nr);
        let mut unique_scalar = vec![Vec::new(); nr];
        for r in 0..nr {
            let mut touched: Vec<usize> = partition
                .local_elements(r)
                .iter()
                .flat_map(|&c| cell_dofs[c * nl..(c + 1) * nl].iter().copied())
                .collect();
            touched.sort_unstable();
            touched.dedup();
            repeated_scalar.push(touched);
        }
        for (d, &r) in scalar_owner.iter().enumerate() {
            unique_scalar[r].push(d);
        }
        let expand = |lists: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            lists
                .into_iter()
                .map(|l| (0..components).flat_map(|c| l.iter().map(move |&d| c * n_scalar + d)).collect())
                .collect()
        };
        Ok(DofMap {
            repeated: expand(repeated_scalar),
            unique: expand(unique_scalar),
            mesh,
            partition,
            element,
            components,
            n_scalar,
            edges,
            cell_dofs,
            scalar_owner,
            row_map: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn element(&self) -> FiniteElement {
        self.element
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Scalar DoFs per component.
    pub fn n_scalar(&self) -> usize {
        self.n_scalar
    }

    /// Total DoF count over all components.
    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.components
    }

    pub fn n_ranks(&self) -> usize {
        self.partition.n_ranks()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Scalar global DoFs of `cell` (global cell index), vertices then edges.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let nl = self.element.n_local_dof();
        &self.cell_dofs[cell * nl..(cell + 1) * nl]
    }

    /// Global DoFs of local cell `local` on `rank`, all components, component-major.
    pub fn cell_to_global(&self, rank: usize, local: usize) -> Vec<usize> {
        let c = self.partition.local_elements(rank)[local];
        let s = self.cell_dofs(c);
        (0..self.components).flat_map(|k| s.iter().map(move |&d| k * self.n_scalar + d)).collect()
    }

    /// Sorted DoFs touched by the local (owned and halo) elements of `rank`.
    pub fn repeated_map(&self, rank: usize) -> &[usize] {
        &self.repeated[rank]
    }

    /// Sorted DoFs owned by `rank`.
    pub fn unique_map(&self, rank: usize) -> &[usize] {
        &self.unique[rank]
    }

    /// Owning rank of global DoF `dof`.
    pub fn owner(&self, dof: usize) -> usize {
        self.scalar_owner[dof % self.n_scalar]
    }

    /// Row distribution induced by the unique maps.
    pub fn row_map(&self) -> Arc<RowMap> {
        self.row_map
            .get_or_init(|| Arc::new(RowMap::new(self.n_dofs(), self.unique.clone()).expect("unique maps partition")))
            .clone()
    }

    /// Coordinates of the nodal point of scalar DoF `s`.
    pub fn dof_point(&self, s: usize) -> [f64; 3] {
        let nv = self.mesh.n_vertices();
        let d = self.mesh.dim();
        let mut p = [0.0; 3];
        if s < nv {
            p[..d].copy_from_slice(self.mesh.vertex(s));
        } else {
            let [a, b] = self.edges[s - nv];
            let (pa, pb) = (self.mesh.vertex(a), self.mesh.vertex(b));
            for i in 0..d {
                p[i] = 0.5 * (pa[i] + pb[i]);
            }
        }
        p
    }

    /// Scalar DoFs lying on boundary face `f`.
    pub fn face_dofs(&self, f: usize) -> Vec<usize> {
        let fv = self.mesh.boundary_face(f);
        let mut out = fv.to_vec();
        if self.element.degree() == 2 {
            let nv = self.mesh.n_vertices();
            for i in 0..fv.len() {
                for j in i + 1..fv.len() {
                    let key = [fv[i].min(fv[j]), fv[i].max(fv[j])];
                    let e = self.edges.binary_search(&key).expect("face edges belong to the mesh");
                    out.push(nv + e);
                }
            }
        }
        out
    }

    /// True when every element touching a DoF owned by `rank` is local to it,
    /// which is what assembling without exchange requires.
    pub fn halo_covers(&self, rank: usize) -> bool {
        let local = self.partition.local_elements(rank);
        (0..self.mesh.n_cells())
            .all(|c| local.binary_search(&c).is_ok() || self.cell_dofs(c).iter().all(|&d| self.scalar_owner[d] != rank))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box, BoxSpec};
    use crate::partition::{build_dual_graph, partition_greedy};
    use proptest::prelude::*;

    fn space(dim: usize, n: usize, ranks: usize, degree: usize) -> DofMap {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(dim, n)).unwrap());
        let part = Arc::new(partition_greedy(&build_dual_graph(&mesh), ranks, 0).unwrap());
        build_dofmap(mesh, part, FiniteElement::new(degree, dim).unwrap()).unwrap()
    }

    #[test]
    fn p1_unit_cube() {
        let s = space(3, 1, 1, 1);
        assert_eq!(s.n_dofs(), 8);
        assert_eq!(s.repeated_map(0), &(0..8).collect::<Vec<_>>()[..]);
        assert_eq!(s.unique_map(0), s.repeated_map(0));
    }

    #[test]
    fn two_tets_interface() {
        let coords = vec![0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 1.];
        let faces = vec![0, 1, 2, 0, 1, 3, 0, 2, 3, 1, 2, 4, 1, 3, 4, 2, 3, 4];
        let mesh = Arc::new(Mesh::new(3, coords, vec![0, 1, 2, 3, 1, 2, 3, 4], faces, vec![1; 6], None).unwrap());
        let part = Arc::new(Partition::from_owner(vec![0, 1], 2).unwrap());
        let s = build_dofmap(mesh, part, FiniteElement::p1(3)).unwrap();
        for d in [1, 2, 3] {
            assert!(s.repeated_map(0).contains(&d) && s.repeated_map(1).contains(&d));
            assert!(s.unique_map(0).contains(&d) != s.unique_map(1).contains(&d));
        }
    }

    #[test]
    fn p2_counts_and_edge_order() {
        let s = space(2, 2, 1, 2);
        // 9 vertices + 16 edges.
        assert_eq!(s.n_dofs(), 25);
        assert!(s.edges().windows(2).all(|w| w[0] < w[1]));
        let s3 = space(3, 3, 1, 2);
        assert_eq!(s3.n_dofs(), 7 * 7 * 7);
    }

    #[test]
    fn vector_space_blocks() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(2, 2)).unwrap());
        let part = Arc::new(partition_greedy(&build_dual_graph(&mesh), 2, 0).unwrap());
        let s = DofMap::new(mesh, part, FiniteElement::p2(2), 2).unwrap();
        assert_eq!(s.n_dofs(), 50);
        let cg = s.cell_to_global(0, 0);
        assert_eq!(cg.len(), 12);
        assert_eq!(cg[6], cg[0] + 25);
        assert_eq!(s.owner(cg[6]), s.owner(cg[0]));
    }

    #[test]
    fn numbering_independent_of_ranks() {
        for dim in [2, 3] {
            let a = space(dim, 3, 1, 2);
            let b = space(dim, 3, 4, 2);
            for c in 0..a.mesh().n_cells() {
                assert_eq!(a.cell_dofs(c), b.cell_dofs(c));
            }
        }
    }

    #[test]
    fn face_dofs_p2() {
        let s = space(2, 1, 1, 2);
        for f in 0..s.mesh().n_boundary_faces() {
            let d = s.face_dofs(f);
            assert_eq!(d.len(), 3);
            let mid = s.dof_point(d[2]);
            let (a, b) = (s.dof_point(d[0]), s.dof_point(d[1]));
            assert!((0..2).all(|i| (mid[i] - 0.5 * (a[i] + b[i])).abs() < 1e-15));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(30))]
        #[test]
        fn unique_maps_partition(dim in 2usize..=3, n in 1usize..=4, ranks in 1usize..=6, degree in 1usize..=2) {
            let mesh = Arc::new(generate_box(&BoxSpec::unit(dim, n)).unwrap());
            prop_assume!(ranks <= mesh.n_cells());
            let g = build_dual_graph(&mesh);
            let part = Arc::new(crate::partition::add_halo(&partition_greedy(&g, ranks, 1).unwrap(), &g, 1));
            let s = build_dofmap(mesh.clone(), part.clone(), FiniteElement::new(degree, dim).unwrap()).unwrap();
            let mut seen = vec![0; s.n_dofs()];
            for r in 0..ranks {
                for &d in s.unique_map(r) {
                    seen[d] += 1;
                    prop_assert!(s.repeated_map(r).binary_search(&d).is_ok());
                }
                for &c in part.local_elements(r) {
                    for d in s.cell_dofs(c) {
                        prop_assert!(s.repeated_map(r).binary_search(d).is_ok());
                    }
                }
            }
            prop_assert!(seen.iter().all(|&k| k == 1));
        }
    }
}
