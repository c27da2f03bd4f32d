use crate::error::{Error, Result};

/// Local edges of a triangle, in local DoF order.
pub const TRIANGLE_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (0, 2)];
/// Local edges of a tetrahedron, in local DoF order.
pub const TETRA_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

/// Lagrange element of degree 1 or 2 on a triangle or tetrahedron.
///
/// Local DoFs are the vertices in cell order followed, for degree 2, by the
/// edge midpoints in the order of [`TRIANGLE_EDGES`] / [`TETRA_EDGES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiniteElement {
    degree: usize,
    dim: usize,
}

impl FiniteElement {
    pub fn new(degree: usize, dim: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) || !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("no Lagrange P{degree} element in {dim}D")));
        }
        Ok(FiniteElement { degree, dim })
    }

    pub fn p1(dim: usize) -> Self {
        Self::new(1, dim).expect("valid dimension")
    }

    pub fn p2(dim: usize) -> Self {
        Self::new(2, dim).expect("valid dimension")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local_edges(&self) -> &'static [(usize, usize)] {
        if self.dim == 2 {
            &TRIANGLE_EDGES
        } else {
            &TETRA_EDGES
        }
    }

    pub fn n_local_dof(&self) -> usize {
        let nv = self.dim + 1;
        if self.degree == 1 {
            nv
        } else {
            nv + self.local_edges().len()
        }
    }

    /// Reference coordinates of the local nodes.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let vertex = |k: usize| -> Vec<f64> { (0..d).map(|i| if k == i + 1 { 1.0 } else { 0.0 }).collect() };
        let mut out: Vec<Vec<f64>> = (0..=d).map(vertex).collect();
        if self.degree == 2 {
            for &(a, b) in self.local_edges() {
                let (pa, pb) = (vertex(a), vertex(b));
                out.push(pa.iter().zip(&pb).map(|(x, y)| 0.5 * (x + y)).collect());
            }
        }
        out
    }

    /// Basis values and reference gradients at `x` (gradients flat, `dim` per function).
    pub fn eval_into(&self, x: &[f64], values: &mut [f64], grads: &mut [f64]) {
        let d = self.dim;
        let mut lam = [0.0; 4];
        lam[0] = 1.0 - x[..d].iter().sum::<f64>();
        lam[1..=d].copy_from_slice(&x[..d]);
        // ∇λ_0 = -1 in every direction, ∇λ_k = e_{k-1}.
        let dlam = |k: usize, i: usize| -> f64 {
            if k == 0 {
                -1.0
            } else if k == i + 1 {
                1.0
            } else {
                0.0
            }
        };
        if self.degree == 1 {
            for k in 0..=d {
                values[k] = lam[k];
                for i in 0..d {
                    grads[k * d + i] = dlam(k, i);
                }
            }
            return;
        }
        for k in 0..=d {
            values[k] = lam[k] * (2.0 * lam[k] - 1.0);
            for i in 0..d {
                grads[k * d + i] = (4.0 * lam[k] - 1.0) * dlam(k, i);
            }
        }
        for (e, &(a, b)) in self.local_edges().iter().enumerate() {
            let k = d + 1 + e;
            values[k] = 4.0 * lam[a] * lam[b];
            for i in 0..d {
                grads[k * d + i] = 4.0 * (dlam(a, i) * lam[b] + lam[a] * dlam(b, i));
            }
        }
    }

    /// Basis values and reference gradients at reference point `x`.
    pub fn eval_basis(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n_local_dof();
        let mut v = vec![0.0; n];
        let mut g = vec![0.0; n * self.dim];
        self.eval_into(x, &mut v, &mut g);
        (v, g.chunks(self.dim).map(|c| c.to_vec()).collect())
    }
}
