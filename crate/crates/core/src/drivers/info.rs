use crate::fespace::DofMap;

/// Per-rank partition statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankInfo {
    pub rank: usize,
    pub owned_elements: usize,
    pub halo_elements: usize,
    pub owned_dofs: usize,
    /// DoFs of owned elements that elements of another rank also touch.
    pub interface_dofs: usize,
    /// Touched DoFs owned by other ranks.
    pub ghost_dofs: usize,
}

pub fn partition_info(space: &DofMap) -> Vec<RankInfo> {
    let part = space.partition();
    let ns = space.n_scalar();
    // First and a second distinct rank touching each scalar DoF.
    let mut touch = vec![(usize::MAX, usize::MAX); ns];
    for c in 0..part.n_elements() {
        let r = part.owner(c);
        for &d in space.cell_dofs(c) {
            let t = &mut touch[d];
            if t.0 == usize::MAX {
                t.0 = r;
            } else if t.0 != r {
                t.1 = r;
            }
        }
    }
    let k = space.components();
    (0..part.n_ranks())
        .map(|r| {
            let mut mine = vec![false; ns];
            for &c in part.owned(r) {
                for &d in space.cell_dofs(c) {
                    mine[d] = true;
                }
            }
            let interface = (0..ns).filter(|&d| mine[d] && touch[d].1 != usize::MAX).count();
            let (repeated, unique) = (space.repeated_map(r).len(), space.unique_map(r).len());
            RankInfo {
                rank: r,
                owned_elements: part.owned(r).len(),
                halo_elements: part.local_elements(r).len() - part.owned(r).len(),
                owned_dofs: unique,
                interface_dofs: interface * k,
                ghost_dofs: repeated - unique,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FiniteElement;
    use crate::mesh::{generate_box, BoxSpec};
    use crate::partition::{add_halo, build_dual_graph, partition_greedy, Partition};
    use std::sync::Arc;

    #[test]
    fn serial_has_no_interface() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(2, 3)).unwrap());
        let part = Arc::new(Partition::serial(mesh.n_cells()));
        let s = DofMap::new(mesh, part, FiniteElement::p1(2), 1).unwrap();
        let info = partition_info(&s);
        assert_eq!(
            info,
            vec![RankInfo {
                rank: 0,
                owned_elements: 18,
                halo_elements: 0,
                owned_dofs: 16,
                interface_dofs: 0,
                ghost_dofs: 0
            }]
        );
    }

    #[test]
    fn two_strips_share_one_line() {
        // A 4x1 strip of squares split in two: the interface is the middle
        // vertical line with 2 vertices.
        let spec =
            BoxSpec { bounds: vec![(0.0, 4.0), (0.0, 1.0)], subdivisions: vec![4, 1], face_markers: vec![1, 2, 3, 4] };
        let mesh = Arc::new(generate_box(&spec).unwrap());
        let graph = build_dual_graph(&mesh);
        let part = partition_greedy(&graph, 2, 0).unwrap();
        let part = Arc::new(add_halo(&part, &graph, 1));
        let s = DofMap::new(mesh, part, FiniteElement::p1(2), 1).unwrap();
        let info = partition_info(&s);
        assert_eq!(info.iter().map(|i| i.owned_elements).sum::<usize>(), 8);
        assert!(info.iter().all(|i| i.interface_dofs == 2 && i.halo_elements > 0));
        assert_eq!(info.iter().map(|i| i.owned_dofs).sum::<usize>(), 10);
    }
}
