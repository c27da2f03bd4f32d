//! Boundary conditions: marker bookkeeping, resolution of Dirichlet DoFs and
//! their enforcement by row replacement.
//!
//! A Dirichlet row i of the assembled system is replaced by c·u_i = c·g_i
//! with c the magnitude of the original diagonal, so the modified row keeps
//! the scale of its neighbours. Nothing is eliminated.

use std::sync::Arc;

use crate::assembly::VectorFn;
use crate::error::{Error, Result};
use crate::fespace::DofMap;
use crate::linalg::{DistMatrix, DistVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

#[derive(Clone)]
pub struct BcEntry {
    pub marker: i32,
    pub kind: BcKind,
    /// Boundary data at a point, one value per component of the space.
    pub data: VectorFn,
}

impl std::fmt::Debug for BcEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} on marker {}", self.kind, self.marker)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BcSet {
    entries: Vec<BcEntry>,
}

impl BcSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dirichlet(mut self, marker: i32, g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.entries.push(BcEntry { marker, kind: BcKind::Dirichlet, data: Arc::new(g) });
        self
    }

    /// Scalar Dirichlet data, applied to every component.
    pub fn dirichlet_scalar(self, marker: i32, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.dirichlet(marker, move |x, out| out.iter_mut().for_each(|v| *v = g(x)))
    }

    pub fn neumann(mut self, marker: i32, g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.entries.push(BcEntry { marker, kind: BcKind::Neumann, data: Arc::new(g) });
        self
    }

    pub fn entries(&self) -> &[BcEntry] {
        &self.entries
    }

    pub fn markers(&self, kind: BcKind) -> Vec<i32> {
        let mut m: Vec<i32> = self.entries.iter().filter(|e| e.kind == kind).map(|e| e.marker).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

/// Dirichlet DoFs (ascending, global numbering) and their values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dirichlet {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl Dirichlet {
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        let (dofs, values) = pairs.into_iter().unzip();
        Dirichlet { dofs, values }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Same DoFs with every value replaced by zero, e.g. for increments.
    pub fn homogeneous(&self) -> Self {
        Dirichlet { dofs: self.dofs.clone(), values: vec![0.0; self.dofs.len()] }
    }
}

/// Collects every DoF lying on a face with a Dirichlet marker and evaluates
/// the data at its nodal point. A DoF on faces of several Dirichlet markers
/// takes the value of the lowest marker.
pub fn resolve_dirichlet(space: &DofMap, bcs: &BcSet) -> Result<Dirichlet> {
    let mesh = space.mesh();
    let known = mesh.markers();
    let mut entries: Vec<&BcEntry> = bcs.entries.iter().filter(|e| e.kind == BcKind::Dirichlet).collect();
    for e in &entries {
        if !known.contains(&e.marker) {
            return Err(Error::Config(format!("Dirichlet condition on marker {} absent from the mesh", e.marker)));
        }
    }
    if known.contains(&0) && !bcs.entries.iter().any(|e| e.marker == 0) {
        log::warn!("boundary faces without a physical marker (0) get natural conditions");
    }
    entries.sort_by_key(|e| e.marker);
    let d = mesh.dim();
    let (ns, k) = (space.n_scalar(), space.components());
    let mut claimed = vec![false; ns];
    let mut out = Vec::new();
    let mut buf = vec![0.0; k];
    for e in entries {
        for f in 0..mesh.n_boundary_faces() {
            if mesh.face_marker(f) != e.marker {
                continue;
            }
            for s in space.face_dofs(f) {
                if claimed[s] {
                    continue;
                }
                claimed[s] = true;
                (e.data)(&space.dof_point(s)[..d], &mut buf);
                for (c, &v) in buf.iter().enumerate() {
                    out.push((c * ns + s, v));
                }
            }
        }
    }
    Ok(Dirichlet::new(out))
}

/// Replaces each Dirichlet row by c·u_i = c·g_i, c = |a_ii| before the change
/// (1 if that is below 1e-300). With `symmetrize`, Dirichlet columns are
/// also cleared after moving their known contribution −a_ji g_i to the right
/// side. Returns the c of each Dirichlet DoF.
pub fn apply_dirichlet(a: &mut DistMatrix, b: &mut DistVector, bc: &Dirichlet, symmetrize: bool) -> Result<Vec<f64>> {
    let n = a.n_rows();
    if a.n_cols() != n || b.len() != n {
        return Err(Error::Dimension("Dirichlet enforcement needs a square system".into()));
    }
    if let Some(&g) = bc.dofs.iter().find(|&&g| g >= n) {
        return Err(Error::Invariant(format!("Dirichlet DoF {g} is not owned by any rank")));
    }
    let mut is_bc = vec![None; n];
    for (k, &g) in bc.dofs.iter().enumerate() {
        is_bc[g] = Some(k);
    }
    if symmetrize {
        for i in 0..n {
            if is_bc[i].is_some() {
                continue;
            }
            let (cols, vals) = a.row_values_mut(i);
            let mut shift = 0.0;
            for (&j, v) in cols.iter().zip(vals.iter_mut()) {
                if let Some(k) = is_bc[j] {
                    shift += *v * bc.values[k];
                    *v = 0.0;
                }
            }
            if shift != 0.0 {
                b.set(i, b.get(i) - shift);
            }
        }
    }
    let mut scales = Vec::with_capacity(bc.len());
    for (&g, &val) in bc.dofs.iter().zip(&bc.values) {
        let (cols, vals) = a.row_values_mut(g);
        let pos =
            cols.binary_search(&g).map_err(|_| Error::Pattern(format!("Dirichlet row {g} has no diagonal entry")))?;
        let d = vals[pos].abs();
        let c = if d < 1e-300 { 1.0 } else { d };
        vals.iter_mut().for_each(|v| *v = 0.0);
        vals[pos] = c;
        b.set(g, c * val);
        scales.push(c);
    }
    Ok(scales)
}

/// Sets the right side of already enforced Dirichlet rows to c·g.
pub fn set_dirichlet_rhs(b: &mut DistVector, bc: &Dirichlet, scales: &[f64]) {
    for ((&g, &v), &c) in bc.dofs.iter().zip(&bc.values).zip(scales) {
        b.set(g, c * v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FiniteElement;
    use crate::linalg::RowMap;
    use crate::mesh::{generate_box, BoxSpec};
    use crate::partition::{build_dual_graph, partition_greedy};

    fn space(dim: usize, n: usize, degree: usize, ranks: usize) -> DofMap {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(dim, n)).unwrap());
        let p = partition_greedy(&build_dual_graph(&mesh), ranks, 0).unwrap();
        DofMap::new(mesh, Arc::new(p), FiniteElement::new(degree, dim).unwrap(), 1).unwrap()
    }

    fn system() -> (DistMatrix, DistVector) {
        let map = Arc::new(RowMap::contiguous(3, 2));
        let dense = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &dense).unwrap();
        let b = DistVector::from_global(map, &[1.0, 1.0, 1.0]).unwrap();
        (a, b)
    }

    #[test]
    fn face_counts_and_values() {
        let s = space(3, 3, 1, 2);
        let d = resolve_dirichlet(&s, &BcSet::new().dirichlet_scalar(1, |_| 5.0)).unwrap();
        assert_eq!(d.len(), 4 * 4);
        assert!(d.values.iter().all(|&v| v == 5.0));
        assert!(d.dofs.iter().all(|&g| s.dof_point(g)[0] == 0.0));
    }

    #[test]
    fn p2_midpoints_get_midpoint_values() {
        let s = space(2, 2, 2, 1);
        let d = resolve_dirichlet(&s, &BcSet::new().dirichlet_scalar(3, |x| x[0] + x[1])).unwrap();
        // 3 vertices and 2 edge midpoints on y = 0.
        assert_eq!(d.len(), 5);
        for (&g, &v) in d.dofs.iter().zip(&d.values) {
            let p = s.dof_point(g);
            assert_eq!(p[1], 0.0);
            assert_eq!(v, p[0] + p[1]);
        }
    }

    #[test]
    fn lowest_marker_wins_and_unknown_marker_fails() {
        let s = space(2, 2, 1, 1);
        let bcs = BcSet::new().dirichlet_scalar(3, |_| 3.0).dirichlet_scalar(1, |_| 1.0);
        let d = resolve_dirichlet(&s, &bcs).unwrap();
        // Corner (0, 0) is on markers 1 and 3.
        let k = d.dofs.iter().position(|&g| s.dof_point(g)[..2] == [0.0, 0.0]).unwrap();
        assert_eq!(d.values[k], 1.0);
        let bad = BcSet::new().dirichlet_scalar(17, |_| 0.0);
        assert!(matches!(resolve_dirichlet(&s, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn hand_checked_three_by_three() {
        let bc = Dirichlet::new(vec![(0, 2.0)]);
        let (mut a, mut b) = system();
        apply_dirichlet(&mut a, &mut b, &bc, false).unwrap();
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        assert_eq!(b.to_global(), vec![4.0, 1.0, 1.0]);

        let (mut a, mut b) = system();
        apply_dirichlet(&mut a, &mut b, &bc, true).unwrap();
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        // b_1 = 1 - (-1)(2) = 3.
        assert_eq!(b.to_global(), vec![4.0, 3.0, 1.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn idempotent_and_other_rows_untouched() {
        let bc = Dirichlet::new(vec![(2, -1.5)]);
        for sym in [false, true] {
            let (mut a, mut b) = system();
            apply_dirichlet(&mut a, &mut b, &bc, sym).unwrap();
            let (a1, b1) = (a.clone(), b.clone());
            apply_dirichlet(&mut a, &mut b, &bc, sym).unwrap();
            assert_eq!(a, a1);
            assert_eq!(b, b1);
        }
        let (mut a, mut b) = system();
        let before = a.clone();
        apply_dirichlet(&mut a, &mut b, &bc, false).unwrap();
        for i in 0..2 {
            assert_eq!(a.row(i), before.row(i));
        }
    }

    #[test]
    fn zero_diagonal_uses_unit_scale() {
        let map = Arc::new(RowMap::serial(2));
        let mut a =
            DistMatrix::from_triplets(map.clone(), map.clone(), &[(0, 0, 0.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let mut b = DistVector::zeros(map);
        let c = apply_dirichlet(&mut a, &mut b, &Dirichlet::new(vec![(0, 3.0)]), false).unwrap();
        assert_eq!(c, vec![1.0]);
        assert_eq!(b.get(0), 3.0);
    }

    #[test]
    fn out_of_range_dof_is_invariant_error() {
        let (mut a, mut b) = system();
        let r = apply_dirichlet(&mut a, &mut b, &Dirichlet::new(vec![(7, 0.0)]), false);
        assert!(matches!(r, Err(Error::Invariant(_))));
    }
}
