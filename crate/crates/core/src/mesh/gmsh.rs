//! Gmsh MSH 2.2 ASCII import and a small writer used for debugging and round trips.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{exterior_faces, face_key, simplex_signed_volume, FaceKey, Mesh};
use crate::error::{Error, Result};

struct Element {
    kind: u32,
    tag: Option<i32>,
    nodes: Vec<usize>,
    line: usize,
}

fn nodes_per_type(kind: u32) -> Option<usize> {
    match kind {
        1 => Some(2),
        2 => Some(3),
        4 => Some(4),
        15 => Some(1),
        _ => None,
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-blank line, trimmed, with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next().ok_or_else(|| Error::parse(self.last, format!("unexpected end of file, expected {what}")))
    }

    fn expect_end(&mut self, section: &str) -> Result<()> {
        let (ln, l) = self.expect(&format!("$End{section}"))?;
        if l != format!("$End{section}") {
            return Err(Error::parse(ln, format!("malformed section: expected $End{section}, found '{l}'")));
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| Error::parse(line, format!("invalid {what} '{tok}'")))
}

/// Reads a Gmsh MSH 2.2 ASCII mesh.
///
/// Tetrahedra (type 4) make a 3D mesh, otherwise triangles (type 2) make a 2D
/// one. Codimension-one elements supply boundary markers from their first tag;
/// boundary faces absent from the file get marker 0. Point elements are
/// skipped, and in 3D so are line elements.
pub fn read_gmsh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let mut node_index: HashMap<u64, usize> = HashMap::new();
    let mut xyz: Vec<[f64; 3]> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let (mut saw_format, mut saw_nodes, mut saw_elements) = (false, false, false);

    while let Some((ln, l)) = lines.next() {
        match l {
            "$MeshFormat" => {
                let (fl, f) = lines.expect("format line")?;
                let mut it = f.split_whitespace();
                let version: String = parse_num(it.next(), fl, "format version")?;
                let ftype: u32 = parse_num(it.next(), fl, "file type")?;
                if !version.starts_with("2.") {
                    return Err(Error::parse(fl, format!("unsupported MSH version {version}")));
                }
                if ftype != 0 {
                    return Err(Error::parse(fl, "binary MSH files are not supported"));
                }
                lines.expect_end("MeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let (cl, c) = lines.expect("node count")?;
                let count: usize = parse_num(Some(c), cl, "node count")?;
                for _ in 0..count {
                    let (nl, n) = lines.expect("node line")?;
                    let mut it = n.split_whitespace();
                    let id: u64 = parse_num(it.next(), nl, "node id")?;
                    let x: f64 = parse_num(it.next(), nl, "x coordinate")?;
                    let y: f64 = parse_num(it.next(), nl, "y coordinate")?;
                    let z: f64 = parse_num(it.next(), nl, "z coordinate")?;
                    if node_index.insert(id, xyz.len()).is_some() {
                        return Err(Error::parse(nl, format!("duplicate node id {id}")));
                    }
                    xyz.push([x, y, z]);
                }
                lines.expect_end("Nodes")?;
                saw_nodes = true;
            }
            "$Elements" => {
                if !saw_nodes {
                    return Err(Error::parse(ln, "$Elements before $Nodes"));
                }
                let (cl, c) = lines.expect("element count")?;
                let count: usize = parse_num(Some(c), cl, "element count")?;
                for _ in 0..count {
                    let (el, e) = lines.expect("element line")?;
                    let mut it = e.split_whitespace();
                    let _id: u64 = parse_num(it.next(), el, "element id")?;
                    let kind: u32 = parse_num(it.next(), el, "element type")?;
                    let ntags: usize = parse_num(it.next(), el, "tag count")?;
                    let nn = nodes_per_type(kind)
                        .ok_or_else(|| Error::parse(el, format!("unsupported element type {kind}")))?;
                    let mut tag = None;
                    for t in 0..ntags {
                        let v: i32 = parse_num(it.next(), el, "tag")?;
                        if t == 0 {
                            tag = Some(v);
                        }
                    }
                    let mut nodes = Vec::with_capacity(nn);
                    for _ in 0..nn {
                        let id: u64 = parse_num(it.next(), el, "node reference")?;
                        let &idx = node_index
                            .get(&id)
                            .ok_or_else(|| Error::parse(el, format!("dangling node reference {id}")))?;
                        nodes.push(idx);
                    }
                    if it.next().is_some() {
                        return Err(Error::parse(el, "trailing data on element line"));
                    }
                    elements.push(Element { kind, tag, nodes, line: el });
                }
                lines.expect_end("Elements")?;
                saw_elements = true;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                // Sections such as $PhysicalNames carry nothing we need.
                let name = &s[1..];
                loop {
                    let (_, l) = lines.expect(&format!("$End{name}"))?;
                    if l == format!("$End{name}") {
                        break;
                    }
                }
            }
            other => return Err(Error::parse(ln, format!("malformed section header '{other}'"))),
        }
    }
    if !saw_format || !saw_nodes || !saw_elements {
        return Err(Error::parse(lines.last, "missing $MeshFormat, $Nodes or $Elements section"));
    }

    let dim = if elements.iter().any(|e| e.kind == 4) { 3 } else { 2 };
    let (cell_kind, face_kind) = if dim == 3 { (4, 2) } else { (2, 1) };
    if dim == 2 {
        if let Some(p) = xyz.iter().position(|p| p[2] != 0.0) {
            return Err(Error::parse(lines.last, format!("2D mesh has node {p} off the z = 0 plane")));
        }
    }
    let mut coords = Vec::with_capacity(xyz.len() * dim);
    for p in &xyz {
        coords.extend_from_slice(&p[..dim]);
    }

    let mut cells = Vec::new();
    let mut cell_tags = Vec::new();
    for e in elements.iter().filter(|e| e.kind == cell_kind) {
        let mut c = e.nodes.clone();
        let vol = simplex_signed_volume(dim, |k| &coords[c[k] * dim..(c[k] + 1) * dim]);
        if vol == 0.0 {
            return Err(Error::parse(e.line, "degenerate cell with zero volume"));
        }
        if vol < 0.0 {
            log::warn!("line {}: negatively oriented cell repaired by swapping two vertices", e.line);
            c.swap(dim - 1, dim);
        }
        cells.extend(c);
        cell_tags.push(e.tag);
    }
    if cells.is_empty() {
        return Err(Error::parse(lines.last, "no triangle or tetrahedron cells"));
    }

    let mut tagged: HashMap<FaceKey, i32> = HashMap::new();
    for e in elements.iter().filter(|e| e.kind == face_kind) {
        tagged.insert(face_key(&e.nodes), e.tag.unwrap_or(0));
    }
    let mut faces = Vec::new();
    let mut markers = Vec::new();
    for (fv, _) in exterior_faces(dim, &cells) {
        let fv = &fv[..dim];
        markers.push(tagged.remove(&face_key(fv)).unwrap_or(0));
        faces.extend_from_slice(fv);
    }
    if !tagged.is_empty() {
        log::debug!("{} tagged interior faces ignored", tagged.len());
    }

    let cell_markers = if cell_tags.iter().any(Option::is_some) {
        Some(cell_tags.into_iter().map(|t| t.unwrap_or(0)).collect())
    } else {
        None
    };
    Mesh::new(dim, coords, cells, faces, markers, cell_markers)
}

/// Writes `mesh` as MSH 2.2 ASCII: boundary faces first, then cells.
pub fn write_gmsh(mesh: &Mesh) -> String {
    let dim = mesh.dim();
    let mut s = String::from("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        let z = if dim == 3 { p[2] } else { 0.0 };
        let _ = writeln!(s, "{} {:e} {:e} {:e}", v + 1, p[0], p[1], z);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.n_boundary_faces() + mesh.n_cells());
    let (cell_kind, face_kind) = if dim == 3 { (4, 2) } else { (2, 1) };
    let mut id = 1;
    let mut line = |s: &mut String, kind: u32, tag: i32, verts: &[usize]| {
        let _ = write!(s, "{id} {kind} 2 {tag} {tag}");
        for v in verts {
            let _ = write!(s, " {}", v + 1);
        }
        s.push('\n');
        id += 1;
    };
    for f in 0..mesh.n_boundary_faces() {
        line(&mut s, face_kind, mesh.face_marker(f), mesh.boundary_face(f));
    }
    for c in 0..mesh.n_cells() {
        let tag = mesh.cell_markers().map_or(0, |m| m[c]);
        line(&mut s, cell_kind, tag, mesh.cell(c));
    }
    s.push_str("$EndElements\n");
    s
}
