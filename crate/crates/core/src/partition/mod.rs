//! Element partitioning: face-adjacency dual graph, greedy graph growing,
//! ghost halos and per-rank submesh extraction.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mesh::{face_key, local_face, FaceKey, Mesh};

/// Face-adjacency graph of mesh cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualGraph {
    adjacency: Vec<Vec<usize>>,
}

impl DualGraph {
    /// Builds a graph from explicit neighbour lists, symmetrizing and sorting them.
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        let mut extra = Vec::new();
        for (i, nb) in adjacency.iter().enumerate() {
            for &j in nb {
                if j >= n || j == i {
                    return Err(Error::Config(format!("invalid neighbour {j} of element {i}")));
                }
                extra.push((j, i));
            }
        }
        for (j, i) in extra {
            adjacency[j].push(i);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
            nb.dedup();
        }
        Ok(DualGraph { adjacency })
    }

    pub fn n_elements(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.adjacency[e]
    }
}

/// Two cells are adjacent when they share a full face.
pub fn build_dual_graph(mesh: &Mesh) -> DualGraph {
    let d = mesh.dim();
    let mut first: HashMap<FaceKey, usize> = HashMap::with_capacity(mesh.n_cells() * (d + 1));
    let mut adjacency = vec![Vec::with_capacity(d + 1); mesh.n_cells()];
    for c in 0..mesh.n_cells() {
        for lf in 0..=d {
            let (fv, n) = local_face(mesh.cell(c), lf);
            match first.entry(face_key(&fv[..n])) {
                std::collections::hash_map::Entry::Occupied(o) => {
                    let other = *o.get();
                    adjacency[c].push(other);
                    adjacency[other].push(c);
                }
                std::collections::hash_map::Entry::Vacant(v) => {
                    v.insert(c);
                }
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
    }
    DualGraph { adjacency }
}

/// Element ownership plus per-rank local element lists (owned and halo).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n_ranks: usize,
    owner: Vec<usize>,
    owned: Vec<Vec<usize>>,
    local_elements: Vec<Vec<usize>>,
    halo_depth: usize,
}

impl Partition {
    /// Partition from an explicit owner map, without halo.
    pub fn from_owner(owner: Vec<usize>, n_ranks: usize) -> Result<Self> {
        if n_ranks == 0 {
            return Err(Error::Config("at least one rank is required".into()));
        }
        let mut owned = vec![Vec::new(); n_ranks];
        for (e, &r) in owner.iter().enumerate() {
            if r >= n_ranks {
                return Err(Error::Config(format!("element {e} assigned to rank {r} of {n_ranks}")));
            }
            owned[r].push(e);
        }
        Ok(Partition { n_ranks, local_elements: owned.clone(), owner, owned, halo_depth: 0 })
    }

    /// Everything on one rank.
    pub fn serial(n_elements: usize) -> Self {
        Self::from_owner(vec![0; n_elements], 1).expect("one rank is valid")
    }

    pub fn n_ranks(&self) -> usize {
        self.n_ranks
    }

    pub fn n_elements(&self) -> usize {
        self.owner.len()
    }

    pub fn owner(&self, e: usize) -> usize {
        self.owner[e]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    /// Sorted elements owned by `rank`.
    pub fn owned(&self, rank: usize) -> &[usize] {
        &self.owned[rank]
    }

    /// Sorted owned and halo elements of `rank`.
    pub fn local_elements(&self, rank: usize) -> &[usize] {
        &self.local_elements[rank]
    }

    pub fn halo_depth(&self) -> usize {
        self.halo_depth
    }
}

/// Greedy graph-growing partitioner.
///
/// Each rank in turn seeds a region at the unassigned element with the fewest
/// unassigned neighbours and grows it breadth-first (lowest index first) until
/// it holds ⌈remaining / remaining ranks⌉ elements. When the frontier runs dry
/// (a component is exhausted) the region is reseeded the same way, so no rank
/// ends up empty. `seed` selects among equally good seed candidates.
pub fn partition_greedy(graph: &DualGraph, n_ranks: usize, seed: u64) -> Result<Partition> {
    let n = graph.n_elements();
    if n == 0 {
        return Err(Error::Config("cannot partition an empty graph".into()));
    }
    if n_ranks == 0 || n_ranks > n {
        return Err(Error::Config(format!("cannot split {n} elements over {n_ranks} ranks")));
    }
    const FREE: usize = usize::MAX;
    let mut owner = vec![FREE; n];
    let mut free_degree: Vec<usize> = (0..n).map(|e| graph.neighbors(e).len()).collect();
    let mut remaining = n;

    for r in 0..n_ranks {
        let target = remaining.div_ceil(n_ranks - r);
        let mut taken = 0;
        let mut queue = VecDeque::new();
        let take = |e: usize, owner: &mut [usize], free_degree: &mut [usize], queue: &mut VecDeque<usize>| {
            owner[e] = r;
            for &nb in graph.neighbors(e) {
                free_degree[nb] -= 1;
            }
            queue.push_back(e);
        };
        while taken < target {
            let Some(e) = queue.pop_front() else {
                let best = (0..n).filter(|&e| owner[e] == FREE).map(|e| free_degree[e]).min();
                let best = best.expect("unassigned elements remain while below target");
                let candidates: Vec<usize> = (0..n).filter(|&e| owner[e] == FREE && free_degree[e] == best).collect();
                let s = candidates[(seed % candidates.len() as u64) as usize];
                take(s, &mut owner, &mut free_degree, &mut queue);
                taken += 1;
                continue;
            };
            for &nb in graph.neighbors(e) {
                if taken == target {
                    break;
                }
                if owner[nb] == FREE {
                    take(nb, &mut owner, &mut free_degree, &mut queue);
                    taken += 1;
                }
            }
        }
        remaining -= taken;
    }
    Partition::from_owner(owner, n_ranks)
}

/// Extends every rank's local element set by `depth` face-adjacency layers.
/// Depth is measured from the owned elements; ownership is unchanged.
pub fn add_halo(partition: &Partition, graph: &DualGraph, depth: usize) -> Partition {
    let n = partition.n_elements();
    let mut local_elements = Vec::with_capacity(partition.n_ranks);
    for r in 0..partition.n_ranks {
        let mut seen = vec![false; n];
        let mut layer: Vec<usize> = partition.owned(r).to_vec();
        for &e in &layer {
            seen[e] = true;
        }
        let mut all = layer.clone();
        for _ in 0..depth {
            let mut next = Vec::new();
            for &e in &layer {
                for &nb in graph.neighbors(e) {
                    if !seen[nb] {
                        seen[nb] = true;
                        next.push(nb);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            all.extend_from_slice(&next);
            layer = next;
        }
        all.sort_unstable();
        local_elements.push(all);
    }
    Partition { local_elements, halo_depth: depth, ..partition.clone() }
}

/// A rank's local mesh with maps back to global numbering.
#[derive(Debug, Clone)]
pub struct SubMesh {
    pub mesh: Mesh,
    pub cell_l2g: Vec<usize>,
    pub vertex_l2g: Vec<usize>,
}

impl SubMesh {
    /// Local index of global vertex `g`, if present.
    pub fn vertex_g2l(&self, g: usize) -> Option<usize> {
        self.vertex_l2g.binary_search(&g).ok()
    }
}

/// Submesh induced by the local elements of `rank`. Only faces on the global
/// boundary are kept as boundary faces; inter-rank interfaces are not marked.
pub fn restrict_mesh(mesh: &Mesh, partition: &Partition, rank: usize) -> Result<SubMesh> {
    if rank >= partition.n_ranks() {
        return Err(Error::Config(format!("rank {rank} out of range")));
    }
    let cell_l2g = partition.local_elements(rank).to_vec();
    let mut vertex_l2g: Vec<usize> = cell_l2g.iter().flat_map(|&c| mesh.cell(c).iter().copied()).collect();
    vertex_l2g.sort_unstable();
    vertex_l2g.dedup();
    let mut g2l = vec![usize::MAX; mesh.n_vertices()];
    for (l, &g) in vertex_l2g.iter().enumerate() {
        g2l[g] = l;
    }
    let d = mesh.dim();
    let coords = vertex_l2g.iter().flat_map(|&g| mesh.vertex(g).iter().copied()).collect();
    let cells = cell_l2g.iter().flat_map(|&c| mesh.cell(c).iter().map(|&v| g2l[v])).collect();
    let mut is_local = vec![false; mesh.n_cells()];
    for &c in &cell_l2g {
        is_local[c] = true;
    }
    let mut faces = Vec::new();
    let mut markers = Vec::new();
    for f in 0..mesh.n_boundary_faces() {
        if is_local[mesh.face_cell(f)] {
            faces.extend(mesh.boundary_face(f).iter().map(|&v| g2l[v]));
            markers.push(mesh.face_marker(f));
        }
    }
    debug_assert_eq!(faces.len(), markers.len() * d);
    let cell_markers = mesh.cell_markers().map(|m| cell_l2g.iter().map(|&c| m[c]).collect());
    let sub = Mesh::new(d, coords, cells, faces, markers, cell_markers)?;
    Ok(SubMesh { mesh: sub, cell_l2g, vertex_l2g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box, BoxSpec};
    use proptest::prelude::*;

    fn two_tets() -> Mesh {
        let coords = vec![0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1., 1., 1., 1.];
        let faces = vec![0, 1, 2, 0, 1, 3, 0, 2, 3, 1, 2, 4, 1, 3, 4, 2, 3, 4];
        Mesh::new(3, coords, vec![0, 1, 2, 3, 1, 2, 3, 4], faces, vec![1; 6], None).unwrap()
    }

    fn path(n: usize) -> DualGraph {
        DualGraph::from_adjacency((0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![] }).collect()).unwrap()
    }

    #[test]
    fn two_tets_are_neighbours() {
        let g = build_dual_graph(&two_tets());
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn cube_graph_symmetric() {
        let g = build_dual_graph(&generate_box(&BoxSpec::unit(3, 1)).unwrap());
        let mut total = 0;
        for i in 0..g.n_elements() {
            for &j in g.neighbors(i) {
                assert!(g.neighbors(j).contains(&i));
                assert_ne!(i, j);
            }
            total += g.neighbors(i).len();
        }
        assert_eq!(total % 2, 0);
    }

    #[test]
    fn square_graph_matches_brute_force() {
        let m = generate_box(&BoxSpec::unit(2, 4)).unwrap();
        let g = build_dual_graph(&m);
        for i in 0..m.n_cells() {
            let mut expect = Vec::new();
            for j in 0..m.n_cells() {
                let shared = m.cell(i).iter().filter(|v| m.cell(j).contains(v)).count();
                if i != j && shared == 2 {
                    expect.push(j);
                }
            }
            assert_eq!(g.neighbors(i), &expect[..]);
            assert!((1..=3).contains(&expect.len()));
        }
    }

    #[test]
    fn path_of_eight_splits_evenly() {
        let p = partition_greedy(&path(8), 2, 0).unwrap();
        assert_eq!(p.owned(0), &[0, 1, 2, 3]);
        assert_eq!(p.owned(1), &[4, 5, 6, 7]);
    }

    #[test]
    fn one_rank_and_singletons() {
        let g = build_dual_graph(&generate_box(&BoxSpec::unit(2, 3)).unwrap());
        let p = partition_greedy(&g, 1, 7).unwrap();
        assert!(p.owners().iter().all(|&r| r == 0));
        assert_eq!(p.local_elements(0).len(), g.n_elements());
        let p = partition_greedy(&g, g.n_elements(), 3).unwrap();
        for r in 0..g.n_elements() {
            assert_eq!(p.owned(r).len(), 1);
        }
        assert!(partition_greedy(&g, g.n_elements() + 1, 0).is_err());
    }

    #[test]
    fn disconnected_graph_has_no_empty_rank() {
        // Two separate paths of 3 and 5 elements.
        let adj: Vec<Vec<usize>> = vec![vec![1], vec![2], vec![], vec![4], vec![5], vec![6], vec![7], vec![]];
        let g = DualGraph::from_adjacency(adj).unwrap();
        let p = partition_greedy(&g, 3, 0).unwrap();
        for r in 0..3 {
            assert!(!p.owned(r).is_empty());
        }
    }

    #[test]
    fn halo_on_two_elements() {
        let g = build_dual_graph(&two_tets());
        let p = Partition::from_owner(vec![0, 1], 2).unwrap();
        assert_eq!(add_halo(&p, &g, 0).local_elements(0), &[0]);
        let h = add_halo(&p, &g, 1);
        assert_eq!(h.local_elements(0), &[0, 1]);
        assert_eq!(h.local_elements(1), &[0, 1]);
        assert_eq!(h.owned(0), &[0]);
    }

    #[test]
    fn halo_depth_one_is_face_neighbourhood() {
        let m = generate_box(&BoxSpec::unit(3, 3)).unwrap();
        let g = build_dual_graph(&m);
        let p = add_halo(&partition_greedy(&g, 4, 0).unwrap(), &g, 1);
        for r in 0..4 {
            let mut expect: Vec<usize> = (0..m.n_cells())
                .filter(|&e| {
                    p.owner(e) == r
                        || (0..m.n_cells())
                            .any(|o| p.owner(o) == r && m.cell(e).iter().filter(|v| m.cell(o).contains(v)).count() == 3)
                })
                .collect();
            expect.sort();
            assert_eq!(p.local_elements(r), &expect[..]);
        }
    }

    #[test]
    fn restrict_round_trips_and_preserves_volume() {
        let m = generate_box(&BoxSpec::unit(3, 1)).unwrap();
        let g = build_dual_graph(&m);
        let p = partition_greedy(&g, 2, 0).unwrap();
        let mut vol = 0.0;
        for r in 0..2 {
            let sub = restrict_mesh(&m, &p, r).unwrap();
            for (l, &gv) in sub.vertex_l2g.iter().enumerate() {
                assert_eq!(sub.vertex_g2l(gv), Some(l));
                assert_eq!(sub.mesh.vertex(l), m.vertex(gv));
            }
            for (l, &gc) in sub.cell_l2g.iter().enumerate() {
                assert_eq!(sub.mesh.cell_volume(l).to_bits(), m.cell_volume(gc).to_bits());
                vol += sub.mesh.cell_volume(l);
            }
        }
        assert!((vol - 1.0).abs() < 1e-12);
        let whole = restrict_mesh(&m, &Partition::serial(6), 0).unwrap();
        assert_eq!(whole.mesh.n_cells(), 6);
        assert_eq!(whole.mesh.n_vertices(), 8);
        assert_eq!(whole.mesh.n_boundary_faces(), 12);
    }

    #[test]
    fn balance_on_connected_box() {
        let m = generate_box(&BoxSpec::unit(3, 4)).unwrap();
        let g = build_dual_graph(&m);
        for k in [2, 3, 5, 8] {
            let p = partition_greedy(&g, k, 0).unwrap();
            let sizes: Vec<usize> = (0..k).map(|r| p.owned(r).len()).collect();
            let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
            assert!(hi as f64 / lo as f64 <= 1.5, "{sizes:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn ownership_and_halo_properties(
            dim in 2usize..=3,
            n in 1usize..=4,
            ranks in 1usize..=8,
            seed in 0u64..1000,
        ) {
            let m = generate_box(&BoxSpec::unit(dim, n)).unwrap();
            prop_assume!(m.n_cells() <= 500 && ranks <= m.n_cells());
            let g = build_dual_graph(&m);
            let p = partition_greedy(&g, ranks, seed).unwrap();
            prop_assert_eq!(&p, &partition_greedy(&g, ranks, seed).unwrap());
            let mut count = vec![0; m.n_cells()];
            for r in 0..ranks {
                for &e in p.owned(r) {
                    count[e] += 1;
                    prop_assert_eq!(p.owner(e), r);
                }
                prop_assert_eq!(p.local_elements(r), p.owned(r));
            }
            prop_assert!(count.iter().all(|&c| c == 1));
            let mut prev = p.clone();
            for depth in 1..=3 {
                let h = add_halo(&p, &g, depth);
                for r in 0..ranks {
                    let inner = prev.local_elements(r);
                    prop_assert!(inner.iter().all(|e| h.local_elements(r).binary_search(e).is_ok()));
                }
                prev = h;
            }
        }
    }
}
