use super::{exterior_faces, Mesh};
use crate::error::{Error, Result};

/// Axis-aligned box with per-axis subdivisions.
///
/// `face_markers` are ordered x-low, x-high, y-low, y-high (, z-low, z-high).
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    pub bounds: Vec<(f64, f64)>,
    pub subdivisions: Vec<usize>,
    pub face_markers: Vec<i32>,
}

impl BoxSpec {
    /// Unit square or cube with markers 1..=2d.
    pub fn unit(dim: usize, n: usize) -> Self {
        BoxSpec {
            bounds: vec![(0.0, 1.0); dim],
            subdivisions: vec![n; dim],
            face_markers: (1..=2 * dim as i32).collect(),
        }
    }

    fn validate(&self) -> Result<usize> {
        let dim = self.bounds.len();
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("box must be 2D or 3D, got {dim} axes")));
        }
        if self.subdivisions.len() != dim || self.face_markers.len() != 2 * dim {
            return Err(Error::Config("box spec arrays disagree on dimension".into()));
        }
        for (k, &(a, b)) in self.bounds.iter().enumerate() {
            if !(a < b) {
                return Err(Error::Config(format!("axis {k}: lower bound {a} not below upper {b}")));
            }
        }
        if self.subdivisions.contains(&0) {
            return Err(Error::Config("subdivisions must be at least 1".into()));
        }
        Ok(dim)
    }
}

/// The six tetrahedra of a unit hexahedron, one per axis permutation.
/// Each follows a monotone lattice path from corner 000 to corner 111, so
/// neighbouring hexahedra share the same diagonal split on common faces.
const KUHN_PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Structured simplicial mesh of a box.
///
/// 3D: each hexahedron is cut into 6 tetrahedra along its 000-111 diagonal
/// (Kuhn split). 2D: each quad is cut along its 00-11 diagonal. Vertices are
/// numbered lexicographically with x fastest.
pub fn generate_box(spec: &BoxSpec) -> Result<Mesh> {
    let dim = spec.validate()?;
    let n = &spec.subdivisions;
    let np: Vec<usize> = n.iter().map(|&k| k + 1).collect();
    let nv: usize = np.iter().product();

    let mut coords = Vec::with_capacity(nv * dim);
    let coord = |axis: usize, i: usize| {
        let (a, b) = spec.bounds[axis];
        if i == n[axis] {
            b
        } else {
            a + (b - a) * i as f64 / n[axis] as f64
        }
    };
    let index = |ijk: [usize; 3]| ijk[0] + np[0] * (ijk[1] + np[1] * ijk[2]);

    let mut cells = Vec::new();
    if dim == 2 {
        for j in 0..np[1] {
            for i in 0..np[0] {
                coords.extend([coord(0, i), coord(1, j)]);
            }
        }
        for j in 0..n[1] {
            for i in 0..n[0] {
                let v00 = index([i, j, 0]);
                let v10 = index([i + 1, j, 0]);
                let v01 = index([i, j + 1, 0]);
                let v11 = index([i + 1, j + 1, 0]);
                cells.extend([v00, v10, v11, v00, v11, v01]);
            }
        }
    } else {
        for k in 0..np[2] {
            for j in 0..np[1] {
                for i in 0..np[0] {
                    coords.extend([coord(0, i), coord(1, j), coord(2, k)]);
                }
            }
        }
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    for (p, path) in KUHN_PATHS.iter().enumerate() {
                        let mut at = [i, j, k];
                        let mut tet = [index(at); 4];
                        for (s, &axis) in path.iter().enumerate() {
                            at[axis] += 1;
                            tet[s + 1] = index(at);
                        }
                        // Odd permutations come out negatively oriented.
                        if matches!(p, 1 | 2 | 5) {
                            tet.swap(2, 3);
                        }
                        cells.extend(tet);
                    }
                }
            }
        }
    }

    let lattice = |v: usize| [v % np[0], (v / np[0]) % np[1], v / (np[0] * np[1])];
    let mut faces = Vec::new();
    let mut markers = Vec::new();
    for (fv, _) in exterior_faces(dim, &cells) {
        let fv = &fv[..dim];
        let side = (0..2 * dim).find(|&s| {
            let (axis, level) = (s / 2, if s % 2 == 0 { 0 } else { n[s / 2] });
            fv.iter().all(|&v| lattice(v)[axis] == level)
        });
        let side = side.ok_or_else(|| Error::Invariant("exterior face off the box boundary".into()))?;
        faces.extend_from_slice(fv);
        markers.push(spec.face_markers[side]);
    }
    Mesh::new(dim, coords, cells, faces, markers, None)
}
