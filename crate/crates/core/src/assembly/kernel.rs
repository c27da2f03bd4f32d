//! Element-level evaluation of compiled forms on affine simplices.

use super::compile::{Atom, Coef, CompiledForm};
use crate::fespace::FiniteElement;
use crate::mesh::Mesh;

/// Affine map x = x0 + J x̂ of one cell.
pub(crate) struct Geometry {
    pub x0: [f64; 3],
    pub jac: [[f64; 3]; 3],
    /// `inv_t[k][m]` = (J⁻¹)_{mk}, so physical gradients are `inv_t · ĝ`.
    pub inv_t: [[f64; 3]; 3],
    pub det: f64,
}

pub(crate) fn geometry(mesh: &Mesh, cell: usize) -> Geometry {
    let d = mesh.dim();
    let vs = mesh.cell(cell);
    let mut x0 = [0.0; 3];
    x0[..d].copy_from_slice(mesh.vertex(vs[0]));
    let mut jac = [[0.0; 3]; 3];
    for k in 0..d {
        let p = mesh.vertex(vs[k + 1]);
        for i in 0..d {
            jac[i][k] = p[i] - x0[i];
        }
    }
    let mut inv_t = [[0.0; 3]; 3];
    let det;
    if d == 2 {
        det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        for k in 0..2 {
            for m in 0..2 {
                inv_t[k][m] = inv[m][k];
            }
        }
    } else {
        let j = &jac;
        // Cofactor matrix; J⁻ᵀ = cof / det.
        let cof = [
            [
                j[1][1] * j[2][2] - j[1][2] * j[2][1],
                j[1][2] * j[2][0] - j[1][0] * j[2][2],
                j[1][0] * j[2][1] - j[1][1] * j[2][0],
            ],
            [
                j[0][2] * j[2][1] - j[0][1] * j[2][2],
                j[0][0] * j[2][2] - j[0][2] * j[2][0],
                j[0][1] * j[2][0] - j[0][0] * j[2][1],
            ],
            [
                j[0][1] * j[1][2] - j[0][2] * j[1][1],
                j[0][2] * j[1][0] - j[0][0] * j[1][2],
                j[0][0] * j[1][1] - j[0][1] * j[1][0],
            ],
        ];
        det = j[0][0] * cof[0][0] + j[0][1] * cof[0][1] + j[0][2] * cof[0][2];
        for k in 0..3 {
            for m in 0..3 {
                inv_t[k][m] = cof[k][m] / det;
            }
        }
    }
    Geometry { x0, jac, inv_t, det }
}

impl Geometry {
    pub fn map(&self, d: usize, xr: &[f64]) -> [f64; 3] {
        let mut x = self.x0;
        for i in 0..d {
            for k in 0..d {
                x[i] += self.jac[i][k] * xr[k];
            }
        }
        x
    }

    /// Reference coordinates of physical point `x`.
    pub fn inverse_map(&self, d: usize, x: &[f64]) -> [f64; 3] {
        let mut r = [0.0; 3];
        for k in 0..d {
            for i in 0..d {
                // (J⁻¹)_{ki} = inv_t[i][k]
                r[k] += self.inv_t[i][k] * (x[i] - self.x0[i]);
            }
        }
        r
    }
}

/// Basis tables of every element involved in a form at a set of reference points.
pub(crate) struct Tab {
    pub nq: usize,
    pub points: Vec<f64>,
    vals: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
}

pub(crate) struct Kernel<'a> {
    form: &'a CompiledForm,
    dim: usize,
    elements: Vec<FiniteElement>,
    test_comps: usize,
    trial_comps: usize,
    trial_el: usize,
    field_el: Vec<usize>,
}

/// Per-thread buffers.
pub(crate) struct Scratch {
    phys: Vec<Vec<f64>>,
    coef: Vec<f64>,
    vec_buf: Vec<Vec<f64>>,
    pair: Vec<f64>,
}

impl<'a> Kernel<'a> {
    /// `trial` is `None` for linear forms.
    pub fn new(form: &'a CompiledForm, test: (FiniteElement, usize), trial: Option<(FiniteElement, usize)>) -> Self {
        let mut elements = vec![test.0];
        let mut index = |e: FiniteElement| match elements.iter().position(|&x| x == e) {
            Some(i) => i,
            None => {
                elements.push(e);
                elements.len() - 1
            }
        };
        let trial_el = trial.map(|t| index(t.0)).unwrap_or(0);
        let field_el = form.fields.iter().map(|f| index(f.space().element())).collect();
        Kernel {
            form,
            dim: test.0.dim(),
            elements,
            test_comps: test.1,
            trial_comps: trial.map(|t| t.1).unwrap_or(0),
            trial_el,
            field_el,
        }
    }

    pub fn n_test(&self) -> usize {
        self.test_comps * self.elements[0].n_local_dof()
    }

    pub fn n_trial(&self) -> usize {
        self.trial_comps * self.elements[self.trial_el].n_local_dof()
    }

    pub fn tabulate(&self, points: &[f64]) -> Tab {
        let d = self.dim;
        let nq = points.len() / d;
        let mut vals = Vec::with_capacity(self.elements.len());
        let mut grads = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let nl = e.n_local_dof();
            let mut v = vec![0.0; nq * nl];
            let mut g = vec![0.0; nq * nl * d];
            for q in 0..nq {
                e.eval_into(
                    &points[q * d..(q + 1) * d],
                    &mut v[q * nl..(q + 1) * nl],
                    &mut g[q * nl * d..(q + 1) * nl * d],
                );
            }
            vals.push(v);
            grads.push(g);
        }
        Tab { nq, points: points.to_vec(), vals, grads }
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            phys: self.elements.iter().map(|e| vec![0.0; e.n_local_dof() * self.dim]).collect(),
            coef: vec![0.0; self.form.coefs.len()],
            vec_buf: self.form.vec_funcs.iter().map(|(_, n)| vec![0.0; *n]).collect(),
            pair: vec![0.0; self.form.pairs.len()],
        }
    }

    /// Fills physical gradients, coefficient values and the per-pair weights
    /// (without the quadrature weight) at point `q`.
    fn eval_point(&self, tab: &Tab, q: usize, geo: &Geometry, cell: usize, s: &mut Scratch) {
        let d = self.dim;
        for (e, el) in self.elements.iter().enumerate() {
            let nl = el.n_local_dof();
            let g = &tab.grads[e][q * nl * d..(q + 1) * nl * d];
            let out = &mut s.phys[e];
            for j in 0..nl {
                for k in 0..d {
                    let mut acc = 0.0;
                    for m in 0..d {
                        acc += geo.inv_t[k][m] * g[j * d + m];
                    }
                    out[j * d + k] = acc;
                }
            }
        }
        let form = self.form;
        let need_x = !form.funcs.is_empty() || !form.vec_funcs.is_empty();
        let x = if need_x { geo.map(d, &tab.points[q * d..(q + 1) * d]) } else { [0.0; 3] };
        for (i, (f, _)) in form.vec_funcs.iter().enumerate() {
            f(&x[..d], &mut s.vec_buf[i]);
        }
        for (i, c) in form.coefs.iter().enumerate() {
            s.coef[i] = match *c {
                Coef::Func(f) => (form.funcs[f])(&x[..d]),
                Coef::VecFunc(f, k) => s.vec_buf[f][k],
                Coef::Field(f, a) => {
                    let field = &form.fields[f];
                    let space = field.space();
                    let e = self.field_el[f];
                    let nl = self.elements[e].n_local_dof();
                    let base = a.comp * space.n_scalar();
                    let vals = field.values();
                    let dofs = space.cell_dofs(cell);
                    let mut acc = 0.0;
                    for j in 0..nl {
                        let phi = match a.deriv {
                            None => tab.vals[e][q * nl + j],
                            Some(k) => s.phys[e][j * d + k],
                        };
                        acc += vals[base + dofs[j]] * phi;
                    }
                    acc
                }
            };
        }
        s.pair.iter_mut().for_each(|p| *p = 0.0);
        for t in &form.terms {
            let mut c = t.scale;
            for &i in &t.coefs {
                c *= s.coef[i];
            }
            s.pair[t.pair] += c;
        }
    }

    #[inline]
    fn basis(&self, tab: &Tab, s: &Scratch, e: usize, q: usize, a: Atom, j: usize) -> f64 {
        let nl = self.elements[e].n_local_dof();
        match a.deriv {
            None => tab.vals[e][q * nl + j],
            Some(k) => s.phys[e][j * self.dim + k],
        }
    }

    /// Adds the element matrix (row-major, test rows by trial columns) of
    /// `cell` integrated with physical weights `w`.
    pub fn add_matrix(&self, tab: &Tab, w: &[f64], geo: &Geometry, cell: usize, s: &mut Scratch, out: &mut [f64]) {
        let nls = self.elements[0].n_local_dof();
        let nlt = self.elements[self.trial_el].n_local_dof();
        let ncols = self.n_trial();
        let mut psi_s = [0.0; 10];
        let mut psi_t = [0.0; 10];
        for q in 0..tab.nq {
            self.eval_point(tab, q, geo, cell, s);
            for (p, &(ta, tr)) in self.form.pairs.iter().enumerate() {
                let c = s.pair[p] * w[q];
                if c == 0.0 {
                    continue;
                }
                let tr = tr.expect("bilinear pair");
                for i in 0..nls {
                    psi_s[i] = c * self.basis(tab, s, 0, q, ta, i);
                }
                for j in 0..nlt {
                    psi_t[j] = self.basis(tab, s, self.trial_el, q, tr, j);
                }
                for i in 0..nls {
                    let row = &mut out[(ta.comp * nls + i) * ncols + tr.comp * nlt..][..nlt];
                    for j in 0..nlt {
                        row[j] += psi_s[i] * psi_t[j];
                    }
                }
            }
        }
    }

    /// Adds the element vector of a linear form.
    pub fn add_vector(&self, tab: &Tab, w: &[f64], geo: &Geometry, cell: usize, s: &mut Scratch, out: &mut [f64]) {
        let nls = self.elements[0].n_local_dof();
        for q in 0..tab.nq {
            self.eval_point(tab, q, geo, cell, s);
            for (p, &(ta, _)) in self.form.pairs.iter().enumerate() {
                let c = s.pair[p] * w[q];
                if c == 0.0 {
                    continue;
                }
                for i in 0..nls {
                    out[ta.comp * nls + i] += c * self.basis(tab, s, 0, q, ta, i);
                }
            }
        }
    }
}
