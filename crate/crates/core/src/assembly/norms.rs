use super::kernel::geometry;
use crate::error::{Error, Result};
use crate::fespace::{quadrature_for, DofMap};

/// L2 norm and H1 seminorm of the error between a scalar finite-element
/// function (global numbering) and an exact solution with known gradient.
pub fn error_norms(
    space: &DofMap,
    values: &[f64],
    exact: impl Fn(&[f64]) -> f64,
    exact_grad: impl Fn(&[f64], &mut [f64]),
) -> Result<(f64, f64)> {
    if space.components() != 1 || values.len() != space.n_dofs() {
        return Err(Error::Dimension(format!(
            "error norms need a scalar field with {} values, got {} values on {} components",
            space.n_dofs(),
            values.len(),
            space.components()
        )));
    }
    let mesh = space.mesh();
    let d = mesh.dim();
    let el = space.element();
    let quad = quadrature_for(d, 4)?;
    let nl = el.n_local_dof();
    let mut tabs = Vec::with_capacity(quad.len());
    for q in 0..quad.len() {
        let mut v = vec![0.0; nl];
        let mut g = vec![0.0; nl * d];
        el.eval_into(quad.point(q), &mut v, &mut g);
        tabs.push((v, g));
    }
    let (mut l2, mut h1) = (0.0, 0.0);
    let mut ge = [0.0; 3];
    for c in 0..mesh.n_cells() {
        let geo = geometry(mesh, c);
        let dofs = space.cell_dofs(c);
        let jw = geo.det.abs();
        for (q, (v, g)) in tabs.iter().enumerate() {
            let x = geo.map(d, quad.point(q));
            let mut uh = 0.0;
            let mut ref_grad = [0.0; 3];
            for (k, &dof) in dofs.iter().enumerate() {
                uh += values[dof] * v[k];
                for m in 0..d {
                    ref_grad[m] += values[dof] * g[k * d + m];
                }
            }
            exact_grad(&x[..d], &mut ge[..d]);
            let mut gerr = 0.0;
            for i in 0..d {
                let gi: f64 = (0..d).map(|m| geo.inv_t[i][m] * ref_grad[m]).sum();
                gerr += (gi - ge[i]).powi(2);
            }
            let w = quad.weights[q] * jw;
            l2 += w * (uh - exact(&x[..d])).powi(2);
            h1 += w * gerr;
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}
