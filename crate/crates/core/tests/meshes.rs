use std::sync::Arc;

use pfem::fespace::{build_dofmap, FiniteElement};
use pfem::mesh::{generate_box, read_gmsh, write_gmsh, BoxSpec, Mesh};
use pfem::partition::{build_dual_graph, partition_greedy, Partition};

fn fixture(name: &str) -> Mesh {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    read_gmsh(&std::fs::read_to_string(path).unwrap()).unwrap()
}

// Counts as reported by gmsh when the fixtures were exported.
#[test]
fn gmsh_square_counts() {
    let m = fixture("unit_square.msh");
    assert_eq!(m.dim(), 2);
    assert_eq!(m.n_vertices(), 98);
    assert_eq!(m.n_cells(), 162);
    assert_eq!(m.n_boundary_faces(), 194 - 162);
    assert!((m.total_volume() - 1.0).abs() < 1e-12);
}

#[test]
fn gmsh_cube_counts() {
    let m = fixture("unit_cube.msh");
    assert_eq!(m.dim(), 3);
    assert_eq!(m.n_vertices(), 341);
    assert_eq!(m.n_cells(), 1140);
    assert_eq!(m.n_boundary_faces(), 1680 - 1140);
    assert!((m.total_volume() - 1.0).abs() < 1e-12);
    let total: f64 = (0..m.n_boundary_faces()).map(|f| m.face_measure(f)).sum();
    assert!((total - 6.0).abs() < 1e-12);
}

#[test]
fn gmsh_write_back_keeps_counts() {
    for name in ["unit_square.msh", "unit_cube.msh"] {
        let m = fixture(name);
        let again = read_gmsh(&write_gmsh(&m)).unwrap();
        assert_eq!(
            (again.n_vertices(), again.n_cells(), again.n_boundary_faces()),
            (m.n_vertices(), m.n_cells(), m.n_boundary_faces())
        );
    }
}

#[test]
fn imported_mesh_partitions_and_numbers() {
    let m = Arc::new(fixture("unit_cube.msh"));
    let part = Arc::new(partition_greedy(&build_dual_graph(&m), 4, 0).unwrap());
    let sizes: Vec<usize> = (0..4).map(|r| part.owned(r).len()).collect();
    assert_eq!(sizes.iter().sum::<usize>(), 1140);
    assert!(*sizes.iter().max().unwrap() as f64 / *sizes.iter().min().unwrap() as f64 <= 1.5);
    let s = build_dofmap(m.clone(), part, FiniteElement::p2(3)).unwrap();
    // Euler: V − E + F − T = 1 for a ball, so E = V + F − T − 1 with F the
    // number of distinct triangles (4T + boundary)/2.
    let faces = (4 * m.n_cells() + m.n_boundary_faces()) / 2;
    let edges = m.n_vertices() + faces - m.n_cells() - 1;
    assert_eq!(s.n_dofs(), m.n_vertices() + edges);
    let mut owned: Vec<usize> = (0..4).flat_map(|r| s.unique_map(r).to_vec()).collect();
    owned.sort_unstable();
    assert_eq!(owned, (0..s.n_dofs()).collect::<Vec<_>>());
}

#[test]
fn p2_dof_count_on_55_cube() {
    let m = Arc::new(generate_box(&BoxSpec::unit(3, 55)).unwrap());
    assert_eq!(m.n_vertices(), 175_616);
    let s = build_dofmap(m.clone(), Arc::new(Partition::serial(m.n_cells())), FiniteElement::p2(3)).unwrap();
    assert_eq!(s.n_dofs(), 1_367_631);
}
