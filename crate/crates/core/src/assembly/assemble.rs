use std::collections::VecDeque;

use rayon::prelude::*;

use super::compile::{compile_bilinear, compile_linear, CompiledForm};
use super::graph::{build_graph, check_compatible, MatrixGraph};
use super::kernel::{geometry, Kernel, Scratch, Tab};
use super::Expr;
use crate::error::{Error, Result};
use crate::fespace::{quadrature_for, DofMap, QuadratureRule};
use crate::linalg::{DistMatrix, DistVector};
use crate::partition::DualGraph;

/// How rank contributions to shared rows are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AssemblyMode {
    /// Ranks integrate their owned elements; contributions to rows owned
    /// elsewhere are sent to the owner and summed in increasing rank order.
    #[default]
    Standard,
    /// Ranks integrate owned and halo elements and keep only the rows they
    /// own, so no exchange happens. Needs a halo covering every owned row.
    Overlapped,
}

/// Quadrature exact for the product of two polynomial spaces (capped at the
/// highest tabulated degree).
pub fn default_quadrature(a: &DofMap, b: &DofMap) -> Result<QuadratureRule> {
    let deg = (a.element().degree() + b.element().degree()).min(4);
    quadrature_for(a.mesh().dim(), deg)
}

/// Assembles a bilinear form, rows on the test space and columns on the
/// trial space.
pub fn assemble_matrix(form: &Expr, rows: &DofMap, cols: &DofMap, quad: &QuadratureRule) -> Result<DistMatrix> {
    assemble_matrix_with(form, rows, cols, quad, None, AssemblyMode::Standard)
}

fn check_quad(space: &DofMap, quad: &QuadratureRule, facet: bool) -> Result<()> {
    let want = space.mesh().dim() - usize::from(facet);
    if quad.dim != want {
        return Err(Error::Dimension(format!("{}D quadrature where {want}D is needed", quad.dim)));
    }
    Ok(())
}

fn check_overlap(space: &DofMap) -> Result<()> {
    for r in 0..space.n_ranks() {
        if !space.halo_covers(r) {
            return Err(Error::Config(format!(
                "overlapped assembly: the halo of rank {r} misses elements touching its rows"
            )));
        }
    }
    Ok(())
}

/// Assembles with an optional precomputed graph. Without one, the graph is
/// built first; the result is the same either way.
pub fn assemble_matrix_with(
    form: &Expr,
    rows: &DofMap,
    cols: &DofMap,
    quad: &QuadratureRule,
    graph: Option<&MatrixGraph>,
    mode: AssemblyMode,
) -> Result<DistMatrix> {
    check_compatible(rows, cols)?;
    check_quad(rows, quad, false)?;
    let dim = rows.mesh().dim();
    let compiled = compile_bilinear(form, dim, rows.components(), cols.components())?;
    check_fields(&compiled, rows)?;
    let built;
    let graph = match graph {
        Some(g) => {
            if g.row_map().as_ref() != rows.row_map().as_ref() || g.col_map().as_ref() != cols.row_map().as_ref() {
                return Err(Error::Dimension("graph was built for other spaces".into()));
            }
            g
        }
        None => {
            built = build_graph(rows, cols)?;
            &built
        }
    };
    let kernel = Kernel::new(&compiled, (rows.element(), rows.components()), Some((cols.element(), cols.components())));
    let tab = kernel.tabulate(&quad.points);
    let row_map = rows.row_map();
    let nr = row_map.n_ranks();
    let part = rows.partition();
    let (n_test, n_trial) = (kernel.n_test(), kernel.n_trial());

    // Integrates `cell` and hands each (row, slot in the graph row, value) to `sink`.
    let element =
        |c: usize, s: &mut Scratch, a: &mut Vec<f64>, sink: &mut dyn FnMut(usize, usize, f64)| -> Result<()> {
            let geo = geometry(rows.mesh(), c);
            let w: Vec<f64> = quad.weights.iter().map(|&x| x * geo.det.abs()).collect();
            a.iter_mut().for_each(|v| *v = 0.0);
            kernel.add_matrix(&tab, &w, &geo, c, s, a);
            let rd = global_dofs(rows, c);
            let cd = global_dofs(cols, c);
            for (i, &gi) in rd.iter().enumerate() {
                let pattern = graph.row(gi);
                for (j, &gj) in cd.iter().enumerate() {
                    let slot = pattern
                        .binary_search(&gj)
                        .map_err(|_| Error::Pattern(format!("entry ({gi}, {gj}) is outside the matrix graph")))?;
                    sink(gi, slot, a[i * n_trial + j]);
                }
            }
            Ok(())
        };

    let blocks = match mode {
        AssemblyMode::Standard => {
            // Phase 1: each rank integrates its owned elements into buffers
            // over the rows it touches.
            let contribs: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)> = (0..nr)
                .into_par_iter()
                .map(|r| {
                    let touched = rows.repeated_map(r).to_vec();
                    let mut offsets = Vec::with_capacity(touched.len() + 1);
                    offsets.push(0);
                    for &g in &touched {
                        offsets.push(offsets.last().unwrap() + graph.row(g).len());
                    }
                    let mut vals = vec![0.0; *offsets.last().unwrap()];
                    let mut s = kernel.scratch();
                    let mut a = vec![0.0; n_test * n_trial];
                    for &c in part.owned(r) {
                        element(c, &mut s, &mut a, &mut |g, slot, v| {
                            let k = touched.binary_search(&g).expect("element rows are in the repeated map");
                            vals[offsets[k] + slot] += v;
                        })?;
                    }
                    Ok((touched, offsets, vals))
                })
                .collect::<Result<_>>()?;
            // Phase 2: owners sum the contributions in increasing source rank order.
            (0..nr)
                .into_par_iter()
                .map(|o| {
                    let mut block = graph.block(o).clone();
                    for (l, &g) in row_map.owned(o).iter().enumerate() {
                        let dst = block.row_ptr[l];
                        let len = block.row_ptr[l + 1] - dst;
                        for (touched, offsets, vals) in &contribs {
                            if let Ok(k) = touched.binary_search(&g) {
                                let src = &vals[offsets[k]..offsets[k] + len];
                                for (d, s) in block.vals[dst..dst + len].iter_mut().zip(src) {
                                    *d += s;
                                }
                            }
                        }
                    }
                    block
                })
                .collect()
        }
        AssemblyMode::Overlapped => {
            check_overlap(rows)?;
            (0..nr)
                .into_par_iter()
                .map(|r| {
                    let mut block = graph.block(r).clone();
                    let mut s = kernel.scratch();
                    let mut a = vec![0.0; n_test * n_trial];
                    for &c in part.local_elements(r) {
                        element(c, &mut s, &mut a, &mut |g, slot, v| {
                            if row_map.owner(g) == r {
                                let p = block.row_ptr[row_map.local_index(g)] + slot;
                                block.vals[p] += v;
                            }
                        })?;
                    }
                    Ok(block)
                })
                .collect::<Result<_>>()?
        }
    };
    DistMatrix::new(row_map, cols.row_map(), blocks)
}

fn check_fields(form: &CompiledForm, space: &DofMap) -> Result<()> {
    for f in &form.fields {
        let m = f.space().mesh();
        if m.n_cells() != space.mesh().n_cells() || m.n_vertices() != space.mesh().n_vertices() {
            return Err(Error::Dimension("coefficient field lives on another mesh".into()));
        }
    }
    Ok(())
}

/// Global DoFs of a cell, all components, component-major.
fn global_dofs(space: &DofMap, c: usize) -> Vec<usize> {
    let s = space.cell_dofs(c);
    let n = space.n_scalar();
    (0..space.components()).flat_map(|k| s.iter().map(move |&d| k * n + d)).collect()
}

/// Where a linear form is integrated.
#[derive(Debug, Clone, Copy)]
enum Domain<'a> {
    Cells(&'a QuadratureRule),
    /// Boundary faces carrying one of the markers, with a facet rule.
    Faces(&'a QuadratureRule, &'a [i32]),
}

/// Assembles a linear form over the cells.
pub fn assemble_vector(form: &Expr, space: &DofMap, quad: &QuadratureRule) -> Result<DistVector> {
    assemble_vector_with(form, space, quad, AssemblyMode::Standard)
}

pub fn assemble_vector_with(
    form: &Expr,
    space: &DofMap,
    quad: &QuadratureRule,
    mode: AssemblyMode,
) -> Result<DistVector> {
    check_quad(space, quad, false)?;
    assemble_linear(form, space, Domain::Cells(quad), mode)
}

/// Assembles a linear form over the boundary faces carrying one of
/// `markers`, e.g. a Neumann flux. `quad` is a facet rule.
pub fn assemble_boundary_vector(
    form: &Expr,
    space: &DofMap,
    quad: &QuadratureRule,
    markers: &[i32],
    mode: AssemblyMode,
) -> Result<DistVector> {
    check_quad(space, quad, true)?;
    let known = space.mesh().markers();
    if let Some(m) = markers.iter().find(|m| !known.contains(m)) {
        return Err(Error::Config(format!("boundary marker {m} does not occur in the mesh")));
    }
    assemble_linear(form, space, Domain::Faces(quad, markers), mode)
}

fn assemble_linear(form: &Expr, space: &DofMap, domain: Domain, mode: AssemblyMode) -> Result<DistVector> {
    let mesh = space.mesh();
    let dim = mesh.dim();
    let compiled = compile_linear(form, dim, space.components())?;
    check_fields(&compiled, space)?;
    let kernel = Kernel::new(&compiled, (space.element(), space.components()), None);
    let map = space.row_map();
    let part = space.partition();
    let nr = map.n_ranks();
    let n_test = kernel.n_test();
    let cell_tab = match domain {
        Domain::Cells(q) => Some(kernel.tabulate(&q.points)),
        Domain::Faces(..) => None,
    };
    let face_fact = if dim == 2 { 1.0 } else { 2.0 };

    // Runs `sink(global dof, value)` for every element vector of the cells in `cells`.
    let integrate = |cells: &[usize], sink: &mut dyn FnMut(usize, f64)| {
        let mut s = kernel.scratch();
        let mut b = vec![0.0; n_test];
        let mut emit = |c: usize, b: &[f64]| {
            for (i, g) in global_dofs(space, c).into_iter().enumerate() {
                sink(g, b[i]);
            }
        };
        match domain {
            Domain::Cells(q) => {
                let tab = cell_tab.as_ref().unwrap();
                for &c in cells {
                    let geo = geometry(mesh, c);
                    let w: Vec<f64> = q.weights.iter().map(|&x| x * geo.det.abs()).collect();
                    b.iter_mut().for_each(|v| *v = 0.0);
                    kernel.add_vector(tab, &w, &geo, c, &mut s, &mut b);
                    emit(c, &b);
                }
            }
            Domain::Faces(q, markers) => {
                for f in 0..mesh.n_boundary_faces() {
                    let c = mesh.face_cell(f);
                    if !markers.contains(&mesh.face_marker(f)) || cells.binary_search(&c).is_err() {
                        continue;
                    }
                    let geo = geometry(mesh, c);
                    let tab = face_tab(&kernel, &geo, mesh, f, q);
                    let m = mesh.face_measure(f);
                    let w: Vec<f64> = q.weights.iter().map(|&x| x * m * face_fact).collect();
                    b.iter_mut().for_each(|v| *v = 0.0);
                    kernel.add_vector(&tab, &w, &geo, c, &mut s, &mut b);
                    emit(c, &b);
                }
            }
        }
    };

    match mode {
        AssemblyMode::Standard => {
            let indices: Vec<Vec<usize>> = (0..nr).map(|r| space.repeated_map(r).to_vec()).collect();
            let values: Vec<Vec<f64>> = (0..nr)
                .into_par_iter()
                .map(|r| {
                    let idx = &indices[r];
                    let mut v = vec![0.0; idx.len()];
                    integrate(part.owned(r), &mut |g, x| {
                        v[idx.binary_search(&g).expect("element DoFs are in the repeated map")] += x;
                    });
                    v
                })
                .collect();
            Ok(DistVector::sum_contributions(map, &indices, &values))
        }
        AssemblyMode::Overlapped => {
            check_overlap(space)?;
            let parts = (0..nr)
                .into_par_iter()
                .map(|r| {
                    let mut v = vec![0.0; map.n_owned(r)];
                    integrate(part.local_elements(r), &mut |g, x| {
                        if map.owner(g) == r {
                            v[map.local_index(g)] += x;
                        }
                    });
                    v
                })
                .collect();
            DistVector::from_parts(map, parts)
        }
    }
}

/// Facet quadrature points of boundary face `f` in the reference coordinates
/// of its cell.
fn face_tab(
    kernel: &Kernel,
    geo: &super::kernel::Geometry,
    mesh: &crate::mesh::Mesh,
    f: usize,
    q: &QuadratureRule,
) -> Tab {
    let d = mesh.dim();
    let fv = mesh.boundary_face(f);
    let mut pts = Vec::with_capacity(q.len() * d);
    for k in 0..q.len() {
        let t = q.point(k);
        let mut x = [0.0; 3];
        let p0 = mesh.vertex(fv[0]);
        x[..d].copy_from_slice(p0);
        for (m, &tm) in t.iter().enumerate() {
            let pm = mesh.vertex(fv[m + 1]);
            for i in 0..d {
                x[i] += tm * (pm[i] - p0[i]);
            }
        }
        pts.extend_from_slice(&geo.inverse_map(d, &x)[..d]);
    }
    kernel.tabulate(&pts)
}

/// Nodal interpolant of `f`, which writes one value per component.
pub fn interpolate(space: &DofMap, f: impl Fn(&[f64], &mut [f64]) + Sync) -> DistVector {
    let d = space.mesh().dim();
    let (ns, k) = (space.n_scalar(), space.components());
    let mut out = vec![0.0; k];
    let mut global = vec![0.0; space.n_dofs()];
    for s in 0..ns {
        f(&space.dof_point(s)[..d], &mut out);
        for c in 0..k {
            global[c * ns + s] = out[c];
        }
    }
    DistVector::from_global(space.row_map(), &global).expect("sized to the space")
}

/// Nodal interpolant of a scalar function, repeated in every component.
pub fn interpolate_scalar(space: &DofMap, f: impl Fn(&[f64]) -> f64 + Sync) -> DistVector {
    interpolate(space, |x, out| out.iter_mut().for_each(|v| *v = f(x)))
}

/// Interpolant of `f` on the DoFs of boundary faces carrying one of
/// `markers`, zero elsewhere: a discrete lifting of boundary data.
pub fn interpolate_on_boundary(space: &DofMap, markers: &[i32], f: impl Fn(&[f64], &mut [f64]) + Sync) -> DistVector {
    let mesh = space.mesh();
    let d = mesh.dim();
    let (ns, k) = (space.n_scalar(), space.components());
    let mut on = vec![false; ns];
    for face in 0..mesh.n_boundary_faces() {
        if markers.contains(&mesh.face_marker(face)) {
            for s in space.face_dofs(face) {
                on[s] = true;
            }
        }
    }
    let mut out = vec![0.0; k];
    let mut global = vec![0.0; space.n_dofs()];
    for s in (0..ns).filter(|&s| on[s]) {
        f(&space.dof_point(s)[..d], &mut out);
        for c in 0..k {
            global[c * ns + s] = out[c];
        }
    }
    DistVector::from_global(space.row_map(), &global).expect("sized to the space")
}

/// Smallest element halo depth (in face-adjacency layers) that makes
/// overlapped assembly on `space` exact, or `None` if some owned row is
/// touched by an element unreachable through faces.
pub fn required_halo_depth(space: &DofMap, graph: &DualGraph) -> Option<usize> {
    let part = space.partition();
    let n = graph.n_elements();
    (0..part.n_ranks())
        .into_par_iter()
        .map(|r| {
            let mut dist = vec![usize::MAX; n];
            let mut queue = VecDeque::new();
            for &c in part.owned(r) {
                dist[c] = 0;
                queue.push_back(c);
            }
            while let Some(c) = queue.pop_front() {
                for &nb in graph.neighbors(c) {
                    if dist[nb] == usize::MAX {
                        dist[nb] = dist[c] + 1;
                        queue.push_back(nb);
                    }
                }
            }
            let mut need = 0;
            for c in 0..n {
                if space.cell_dofs(c).iter().any(|&d| space.owner(d) == r) {
                    if dist[c] == usize::MAX {
                        return None;
                    }
                    need = need.max(dist[c]);
                }
            }
            Some(need)
        })
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().max().unwrap_or(0))
}
