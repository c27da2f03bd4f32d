//! Simplicial meshes (triangles in 2D, tetrahedra in 3D) with marked boundary faces.

mod generate;
mod gmsh;

pub use generate::{generate_box, BoxSpec};
pub use gmsh::{read_gmsh, write_gmsh};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Sorted vertex tuple identifying a face; unused slots hold `usize::MAX`.
pub type FaceKey = [usize; 3];

/// Key of the face spanned by `verts` (2 or 3 vertex indices).
pub fn face_key(verts: &[usize]) -> FaceKey {
    let mut k = [usize::MAX; 3];
    k[..verts.len()].copy_from_slice(verts);
    k[..verts.len()].sort_unstable();
    k
}

/// Vertices of local face `f` of a simplex: every vertex except vertex `f`.
pub fn local_face(cell: &[usize], f: usize) -> ([usize; 3], usize) {
    let mut out = [usize::MAX; 3];
    let mut n = 0;
    for (k, &v) in cell.iter().enumerate() {
        if k != f {
            out[n] = v;
            n += 1;
        }
    }
    (out, n)
}

/// An immutable simplicial mesh.
///
/// Storage is flat: `dim` coordinates per vertex, `dim + 1` vertex indices per
/// cell and `dim` per boundary face.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    faces: Vec<usize>,
    face_markers: Vec<i32>,
    face_cells: Vec<usize>,
    cell_markers: Option<Vec<i32>>,
}

impl Mesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        faces: Vec<usize>,
        face_markers: Vec<i32>,
        cell_markers: Option<Vec<i32>>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("mesh dimension must be 2 or 3, got {dim}")));
        }
        if coords.len() % dim != 0 || cells.len() % (dim + 1) != 0 || faces.len() % dim != 0 {
            return Err(Error::Invariant("flat mesh arrays have ragged length".into()));
        }
        let nv = coords.len() / dim;
        let nc = cells.len() / (dim + 1);
        let nf = faces.len() / dim;
        if face_markers.len() != nf {
            return Err(Error::Invariant("one marker per boundary face required".into()));
        }
        if let Some(cm) = &cell_markers {
            if cm.len() != nc {
                return Err(Error::Invariant("one marker per cell required".into()));
            }
        }
        if let Some(&bad) = cells.iter().chain(faces.iter()).find(|&&v| v >= nv) {
            return Err(Error::Invariant(format!("vertex index {bad} out of range ({nv} vertices)")));
        }

        let mut mesh = Mesh { dim, coords, cells, faces, face_markers, face_cells: Vec::new(), cell_markers };
        for c in 0..nc {
            if mesh.signed_volume(c) <= 0.0 {
                return Err(Error::Invariant(format!("cell {c} has non-positive signed volume")));
            }
        }

        // Each boundary face must belong to exactly one cell.
        let mut lookup: HashMap<FaceKey, (usize, usize)> = HashMap::with_capacity(nf);
        for f in 0..nf {
            if lookup.insert(face_key(mesh.boundary_face(f)), (f, 0)).is_some() {
                return Err(Error::Invariant(format!("boundary face {f} listed twice")));
            }
        }
        let mut face_cells = vec![usize::MAX; nf];
        for c in 0..nc {
            for lf in 0..=dim {
                let (fv, n) = local_face(mesh.cell(c), lf);
                if let Some(entry) = lookup.get_mut(&face_key(&fv[..n])) {
                    entry.1 += 1;
                    face_cells[entry.0] = c;
                }
            }
        }
        if let Some((_, &(f, count))) = lookup.iter().find(|(_, e)| e.1 != 1) {
            return Err(Error::Invariant(format!("boundary face {f} belongs to {count} cells instead of one")));
        }
        mesh.face_cells = face_cells;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.face_markers.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn boundary_face(&self, f: usize) -> &[usize] {
        &self.faces[f * self.dim..(f + 1) * self.dim]
    }

    pub fn face_marker(&self, f: usize) -> i32 {
        self.face_markers[f]
    }

    /// The single cell adjacent to boundary face `f`.
    pub fn face_cell(&self, f: usize) -> usize {
        self.face_cells[f]
    }

    pub fn cell_markers(&self) -> Option<&[i32]> {
        self.cell_markers.as_deref()
    }

    /// Sorted list of distinct boundary markers.
    pub fn markers(&self) -> Vec<i32> {
        let mut m = self.face_markers.clone();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Signed volume under the stored vertex ordering.
    pub fn signed_volume(&self, c: usize) -> f64 {
        simplex_signed_volume(self.dim, |k| self.vertex(self.cell(c)[k]))
    }

    /// |det(edge matrix)| / d!
    pub fn cell_volume(&self, c: usize) -> f64 {
        self.signed_volume(c).abs()
    }

    /// Measure (length or area) of boundary face `f`.
    pub fn face_measure(&self, f: usize) -> f64 {
        let fv = self.boundary_face(f);
        simplex_measure(self.dim, &fv.iter().map(|&v| self.vertex(v)).collect::<Vec<_>>())
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }
}

/// Signed volume of the simplex whose `k`-th vertex is `vert(k)`.
pub fn simplex_signed_volume<'a>(dim: usize, vert: impl Fn(usize) -> &'a [f64]) -> f64 {
    let x0 = vert(0);
    if dim == 2 {
        let (a, b) = (vert(1), vert(2));
        0.5 * ((a[0] - x0[0]) * (b[1] - x0[1]) - (a[1] - x0[1]) * (b[0] - x0[0]))
    } else {
        let e = |k: usize| {
            let p = vert(k);
            [p[0] - x0[0], p[1] - x0[1], p[2] - x0[2]]
        };
        let (a, b, c) = (e(1), e(2), e(3));
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        det / 6.0
    }
}

/// Measure of a codimension-one simplex embedded in `dim` dimensions.
pub fn simplex_measure(dim: usize, pts: &[&[f64]]) -> f64 {
    if dim == 2 {
        let (a, b) = (pts[0], pts[1]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    } else {
        let u: Vec<f64> = (0..3).map(|i| pts[1][i] - pts[0][i]).collect();
        let w: Vec<f64> = (0..3).map(|i| pts[2][i] - pts[0][i]).collect();
        let cx = u[1] * w[2] - u[2] * w[1];
        let cy = u[2] * w[0] - u[0] * w[2];
        let cz = u[0] * w[1] - u[1] * w[0];
        0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
    }
}

/// Faces that belong to exactly one cell, in order of first discovery
/// (cell index, then local face index), with their owning cell.
pub(crate) fn exterior_faces(dim: usize, cells: &[usize]) -> Vec<([usize; 3], usize)> {
    let k = dim + 1;
    let nc = cells.len() / k;
    let mut count: HashMap<FaceKey, u32> = HashMap::with_capacity(nc * k);
    for c in 0..nc {
        for lf in 0..k {
            let (fv, n) = local_face(&cells[c * k..(c + 1) * k], lf);
            *count.entry(face_key(&fv[..n])).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for c in 0..nc {
        for lf in 0..k {
            let (fv, n) = local_face(&cells[c * k..(c + 1) * k], lf);
            if count[&face_key(&fv[..n])] == 1 {
                out.push((fv, c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref_tet() -> Mesh {
        let coords = vec![0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1.];
        Mesh::new(3, coords, vec![0, 1, 2, 3], vec![], vec![], None).unwrap()
    }

    #[test]
    fn reference_volumes() {
        assert!((ref_tet().cell_volume(0) - 1.0 / 6.0).abs() < 1e-15);
        let tri = Mesh::new(2, vec![0., 0., 1., 0., 0., 1.], vec![0, 1, 2], vec![], vec![], None).unwrap();
        assert!((tri.cell_volume(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_inverted_cell() {
        let coords = vec![0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0., 1.];
        let err = Mesh::new(3, coords, vec![0, 2, 1, 3], vec![], vec![], None).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn rejects_interior_boundary_face() {
        // Two triangles sharing edge (1,2); that edge cannot be a boundary face.
        let coords = vec![0., 0., 1., 0., 0., 1., 1., 1.];
        let err = Mesh::new(2, coords, vec![0, 1, 2, 1, 3, 2], vec![1, 2], vec![7], None).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn random_tet_volume_matches_monte_carlo() {
        // Small LCG so the test needs no RNG dependency.
        let mut s: u64 = 0x2545F4914F6CDD1D;
        let mut rnd = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut p: Vec<f64> = (0..12).map(|_| rnd()).collect();
        let mut cells = vec![0, 1, 2, 3];
        if simplex_signed_volume(3, |k| &p[3 * k..3 * k + 3]) < 0.0 {
            cells.swap(2, 3);
        }
        let mesh = Mesh::new(3, p.clone(), cells, vec![], vec![], None).unwrap();
        let vol = mesh.cell_volume(0);

        // Hit-or-miss estimate inside the bounding box via barycentric signs.
        let lo: Vec<f64> = (0..3).map(|i| (0..4).map(|k| p[3 * k + i]).fold(f64::MAX, f64::min)).collect();
        let hi: Vec<f64> = (0..3).map(|i| (0..4).map(|k| p[3 * k + i]).fold(f64::MIN, f64::max)).collect();
        let boxvol: f64 = (0..3).map(|i| hi[i] - lo[i]).product();
        let total = 4_000_000;
        let mut hits = 0usize;
        let orient = |pts: &[f64]| simplex_signed_volume(3, |k| &pts[3 * k..3 * k + 3]);
        let full = orient(&p);
        for _ in 0..total {
            let q: Vec<f64> = (0..3).map(|i| lo[i] + (hi[i] - lo[i]) * rnd()).collect();
            let mut inside = true;
            for k in 0..4 {
                let saved = [p[3 * k], p[3 * k + 1], p[3 * k + 2]];
                p[3 * k..3 * k + 3].copy_from_slice(&q);
                let sub = orient(&p);
                p[3 * k..3 * k + 3].copy_from_slice(&saved);
                if sub * full < 0.0 {
                    inside = false;
                    break;
                }
            }
            hits += inside as usize;
        }
        let est = boxvol * hits as f64 / total as f64;
        assert!((est - vol).abs() < 1e-3, "mc {est} vs {vol}");
    }
}
