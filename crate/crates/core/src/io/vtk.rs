use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fespace::DofMap;
use crate::mesh::Mesh;

/// A named nodal field in global DoF numbering.
pub struct VtkField<'a> {
    pub name: &'a str,
    pub space: &'a DofMap,
    pub values: &'a [f64],
}

/// Writes a legacy ASCII unstructured grid. Fields are sampled at the mesh
/// vertices; quadratic edge values are not written. Scalar fields become
/// SCALARS, vector fields VECTORS padded to three components.
pub fn write_vtk<W: Write>(mut w: W, mesh: &Mesh, fields: &[VtkField<'_>]) -> Result<()> {
    let (nv, nc, dim) = (mesh.n_vertices(), mesh.n_cells(), mesh.dim());
    for f in fields {
        if f.space.mesh().n_vertices() != nv {
            return Err(Error::Dimension(format!("field '{}' lives on another mesh", f.name)));
        }
        if f.values.len() != f.space.n_dofs() {
            return Err(Error::Dimension(format!(
                "field '{}' has {} values for {} DoFs",
                f.name,
                f.values.len(),
                f.space.n_dofs()
            )));
        }
        if f.name.is_empty() || f.name.contains(char::is_whitespace) {
            return Err(Error::Config(format!("invalid VTK field name '{}'", f.name)));
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "pfem output")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for v in 0..nv {
        let x = mesh.vertex(v);
        let z = if dim == 3 { x[2] } else { 0.0 };
        writeln!(w, "{} {} {}", x[0], x[1], z)?;
    }
    let npc = dim + 1;
    writeln!(w, "CELLS {nc} {}", nc * (npc + 1))?;
    for c in 0..nc {
        write!(w, "{npc}")?;
        for v in mesh.cell(c) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    let ty = if dim == 3 { 10 } else { 5 };
    for _ in 0..nc {
        writeln!(w, "{ty}")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {nv}")?;
    }
    for f in fields {
        let (ns, comps) = (f.space.n_scalar(), f.space.components());
        if comps == 1 {
            writeln!(w, "SCALARS {} double 1", f.name)?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in 0..nv {
                writeln!(w, "{}", f.values[v])?;
            }
        } else {
            writeln!(w, "VECTORS {} double", f.name)?;
            for v in 0..nv {
                let c = |k: usize| if k < comps { f.values[k * ns + v] } else { 0.0 };
                writeln!(w, "{} {} {}", c(0), c(1), c(2))?;
            }
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: impl AsRef<Path>, mesh: &Mesh, fields: &[VtkField<'_>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, mesh, fields)?;
    w.flush()?;
    Ok(())
}

/// Contents of a legacy unstructured-grid file as written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    /// Point data by name: (components, values point-major).
    pub point_data: BTreeMap<String, (usize, Vec<f64>)>,
}

struct Tokens<'a> {
    it: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (l, t) = self.it.next().ok_or_else(|| Error::parse(self.line, "unexpected end of file"))?;
        self.line = l;
        Ok(t)
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::parse(self.line, format!("expected a number, found '{t}'")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t != word {
            return Err(Error::parse(self.line, format!("expected '{word}', found '{t}'")));
        }
        Ok(())
    }
}

/// Minimal reader for the subset produced by [`write_vtk`].
pub fn read_vtk(text: &str) -> Result<VtkData> {
    let mut lines = text.lines();
    for (i, want) in ["# vtk DataFile Version", "", "ASCII", "DATASET UNSTRUCTURED_GRID"].iter().enumerate() {
        let l = lines.next().ok_or_else(|| Error::parse(i + 1, "truncated header"))?;
        if !l.starts_with(want) {
            return Err(Error::parse(i + 1, format!("unexpected header line '{l}'")));
        }
    }
    let body = text.lines().enumerate().skip(4).flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut tk = Tokens { it: (Box::new(body) as Box<dyn Iterator<Item = _>>).peekable(), line: 4 };

    tk.expect("POINTS")?;
    let np: usize = tk.num()?;
    tk.next()?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        points.push([tk.num()?, tk.num()?, tk.num()?]);
    }
    tk.expect("CELLS")?;
    let nc: usize = tk.num()?;
    let _size: usize = tk.num()?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let k: usize = tk.num()?;
        let c = (0..k).map(|_| tk.num()).collect::<Result<Vec<usize>>>()?;
        if c.iter().any(|&v| v >= np) {
            return Err(Error::parse(tk.line, "cell references a missing point"));
        }
        cells.push(c);
    }
    tk.expect("CELL_TYPES")?;
    if tk.num::<usize>()? != nc {
        return Err(Error::parse(tk.line, "cell type count differs from cell count"));
    }
    let cell_types = (0..nc).map(|_| tk.num()).collect::<Result<Vec<u8>>>()?;

    let mut point_data = BTreeMap::new();
    if tk.it.peek().is_some() {
        tk.expect("POINT_DATA")?;
        if tk.num::<usize>()? != np {
            return Err(Error::parse(tk.line, "point data count differs from point count"));
        }
        while tk.it.peek().is_some() {
            let kind = tk.next()?;
            let name = tk.next()?.to_string();
            tk.next()?;
            let comps = match kind {
                "SCALARS" => {
                    let c: usize = tk.num()?;
                    tk.expect("LOOKUP_TABLE")?;
                    tk.next()?;
                    c
                }
                "VECTORS" => 3,
                other => return Err(Error::parse(tk.line, format!("unsupported data section '{other}'"))),
            };
            let vals = (0..np * comps).map(|_| tk.num()).collect::<Result<Vec<f64>>>()?;
            point_data.insert(name, (comps, vals));
        }
    }
    Ok(VtkData { points, cells, cell_types, point_data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_dofmap, FiniteElement};
    use crate::mesh::{generate_box, BoxSpec};
    use crate::partition::Partition;
    use std::sync::Arc;

    fn one_tet() -> Arc<Mesh> {
        let coords = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        Arc::new(Mesh::new(3, coords, vec![0, 1, 2, 3], vec![], vec![], None).unwrap())
    }

    fn space(mesh: &Arc<Mesh>, degree: usize, comps: usize) -> DofMap {
        let part = Arc::new(Partition::serial(mesh.n_cells()));
        let el = FiniteElement::new(degree, mesh.dim()).unwrap();
        DofMap::new(mesh.clone(), part, el, comps).unwrap()
    }

    fn render(mesh: &Mesh, fields: &[VtkField<'_>]) -> String {
        let mut buf = Vec::new();
        write_vtk(&mut buf, mesh, fields).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_tet_scalar() {
        let mesh = one_tet();
        let s = space(&mesh, 1, 1);
        let vals = [0.5, -1.25, 3.0, 1e-17];
        let text = render(&mesh, &[VtkField { name: "u", space: &s, values: &vals }]);
        let data = read_vtk(&text).unwrap();
        assert_eq!(data.points.len(), 4);
        assert_eq!(data.cells, vec![vec![0, 1, 2, 3]]);
        assert_eq!(data.cell_types, vec![10]);
        assert_eq!(data.point_data["u"], (1, vals.to_vec()));
    }

    #[test]
    fn quadratic_vector_field_round_trip() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(2, 3)).unwrap());
        let s = space(&mesh, 2, 2);
        let vals: Vec<f64> = (0..s.n_dofs()).map(|i| (i as f64).sin() / 3.0).collect();
        let p = space(&mesh, 1, 1);
        let pv: Vec<f64> = (0..p.n_dofs()).map(|i| i as f64 * 0.1).collect();
        let text = render(
            &mesh,
            &[VtkField { name: "velocity", space: &s, values: &vals }, VtkField { name: "p", space: &p, values: &pv }],
        );
        let data = read_vtk(&text).unwrap();
        assert!(data.cell_types.iter().all(|&t| t == 5));
        let (comps, v) = &data.point_data["velocity"];
        assert_eq!(*comps, 3);
        let ns = s.n_scalar();
        for k in 0..mesh.n_vertices() {
            assert_eq!(v[3 * k], vals[k]);
            assert_eq!(v[3 * k + 1], vals[ns + k]);
            assert_eq!(v[3 * k + 2], 0.0);
        }
        assert_eq!(data.point_data["p"].1, pv);
        for (k, x) in data.points.iter().enumerate() {
            assert_eq!(&x[..2], mesh.vertex(k));
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let mesh = one_tet();
        let s = space(&mesh, 1, 1);
        let mut buf = Vec::new();
        assert!(write_vtk(&mut buf, &mesh, &[VtkField { name: "u", space: &s, values: &[1.0] }]).is_err());
    }

    #[test]
    fn reader_rejects_garbage() {
        assert!(read_vtk("hello").is_err());
        let mesh = one_tet();
        let text = render(&mesh, &[]);
        assert!(read_vtk(&text).unwrap().point_data.is_empty());
        assert!(read_vtk(&text.replace("CELL_TYPES 1", "CELL_TYPES 2")).is_err());
    }

    #[test]
    fn output_does_not_depend_on_rank_count() {
        let mesh = Arc::new(generate_box(&BoxSpec::unit(3, 2)).unwrap());
        let el = FiniteElement::p2(3);
        let serial = space(&mesh, 2, 1);
        let graph = crate::partition::build_dual_graph(&mesh);
        let part = Arc::new(crate::partition::partition_greedy(&graph, 4, 1).unwrap());
        let split = build_dofmap(mesh.clone(), part, el).unwrap();
        let vals: Vec<f64> = (0..serial.n_dofs()).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let a = render(&mesh, &[VtkField { name: "u", space: &serial, values: &vals }]);
        let b = render(&mesh, &[VtkField { name: "u", space: &split, values: &vals }]);
        assert_eq!(a, b);
    }
}
