use std::sync::Arc;

use super::{build_schwarz, DistMatrix, DistVector, RowMap, SubdomainSolver};
use crate::error::{Error, Result};

/// A linear map between distributed vectors.
pub trait Operator: Sync {
    fn domain(&self) -> &Arc<RowMap>;
    fn range(&self) -> &Arc<RowMap>;
    fn apply(&self, x: &DistVector, y: &mut DistVector) -> Result<()>;
}

impl Operator for DistMatrix {
    fn domain(&self) -> &Arc<RowMap> {
        self.col_map()
    }

    fn range(&self) -> &Arc<RowMap> {
        self.row_map()
    }

    fn apply(&self, x: &DistVector, y: &mut DistVector) -> Result<()> {
        self.spmv(x, y)
    }
}

/// Approximate inverse applied as z = P⁻¹ r.
pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &DistVector, z: &mut DistVector) -> Result<()>;
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &DistVector, z: &mut DistVector) -> Result<()> {
        z.copy_from(r);
        Ok(())
    }
}

/// Diagonal scaling by the inverse of the matrix diagonal.
pub struct Jacobi {
    inv_diag: DistVector,
}

impl Jacobi {
    pub fn new(a: &DistMatrix) -> Result<Self> {
        let mut inv_diag = a.diagonal();
        for (r, p) in inv_diag.parts_mut().iter_mut().enumerate() {
            for (l, v) in p.iter_mut().enumerate() {
                if *v == 0.0 {
                    return Err(Error::Factorization { subdomain: r, msg: format!("zero diagonal at local row {l}") });
                }
                *v = 1.0 / *v;
            }
        }
        Ok(Jacobi { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &DistVector, z: &mut DistVector) -> Result<()> {
        z.copy_from(r);
        z.mul_elementwise(&self.inv_diag);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cg,
    Gmres,
    BiCgStab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    None,
    Jacobi,
    /// Block ILU(0) on the rows each rank owns (Schwarz without overlap).
    Ilu0,
    Schwarz {
        overlap: usize,
        solver: SubdomainSolver,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Relative residual target ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Gmres,
            tol: 1e-10,
            max_iters: 1000,
            restart: 50,
            preconditioner: PreconditionerKind::Schwarz { overlap: 1, solver: SubdomainSolver::SparseLu },
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        if self.restart == 0 {
            return Err(Error::Config("GMRES restart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    /// Per-iteration monitor: the energy functional ½xᵀAx − bᵀx for CG
    /// (non-increasing in exact arithmetic), the residual estimate otherwise.
    pub history: Vec<f64>,
}

/// Builds the preconditioner named in `kind` for `a`.
pub fn make_preconditioner(a: &DistMatrix, kind: PreconditionerKind) -> Result<Box<dyn Preconditioner>> {
    Ok(match kind {
        PreconditionerKind::None => Box::new(Identity),
        PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)?),
        PreconditionerKind::Ilu0 => Box::new(build_schwarz(a, 0, SubdomainSolver::Ilu0)?),
        PreconditionerKind::Schwarz { overlap, solver } => Box::new(build_schwarz(a, overlap, solver)?),
    })
}

/// A matrix with its preconditioner, ready for repeated solves.
pub struct LinearSolver {
    matrix: Arc<DistMatrix>,
    pc: Box<dyn Preconditioner>,
    config: SolverConfig,
}

impl LinearSolver {
    pub fn new(matrix: Arc<DistMatrix>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::Dimension("linear solve needs a square matrix".into()));
        }
        let pc = make_preconditioner(&matrix, config.preconditioner)?;
        Ok(LinearSolver { matrix, pc, config })
    }

    pub fn matrix(&self) -> &Arc<DistMatrix> {
        &self.matrix
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn preconditioner(&self) -> &dyn Preconditioner {
        self.pc.as_ref()
    }

    /// Solves starting from the current content of `x`.
    pub fn solve_into(&self, b: &DistVector, x: &mut DistVector) -> Result<SolveStats> {
        krylov(self.matrix.as_ref(), self.pc.as_ref(), b, x, &self.config)
    }

    pub fn solve(&self, b: &DistVector) -> Result<(DistVector, SolveStats)> {
        let mut x = DistVector::zeros(self.matrix.col_map().clone());
        let stats = self.solve_into(b, &mut x)?;
        Ok((x, stats))
    }
}

/// One-shot solve of A x = b from a zero initial guess.
pub fn solve(a: &DistMatrix, b: &DistVector, config: &SolverConfig) -> Result<(DistVector, SolveStats)> {
    config.validate()?;
    let pc = make_preconditioner(a, config.preconditioner)?;
    let mut x = DistVector::zeros(a.col_map().clone());
    let stats = krylov(a, pc.as_ref(), b, &mut x, config)?;
    Ok((x, stats))
}

/// Dispatches on `config.method`.
pub fn krylov(
    op: &dyn Operator,
    pc: &dyn Preconditioner,
    b: &DistVector,
    x: &mut DistVector,
    config: &SolverConfig,
) -> Result<SolveStats> {
    config.validate()?;
    match config.method {
        Method::Cg => cg(op, pc, b, x, config.tol, config.max_iters),
        Method::Gmres => gmres(op, pc, b, x, config.tol, config.max_iters, config.restart),
        Method::BiCgStab => bicgstab(op, pc, b, x, config.tol, config.max_iters),
    }
}

fn finite(v: f64, what: &str, it: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("{what} became {v} at iteration {it}")))
    }
}

fn residual(op: &dyn Operator, b: &DistVector, x: &DistVector) -> Result<DistVector> {
    let mut r = DistVector::zeros(op.range().clone());
    op.apply(x, &mut r)?;
    r.axpby(1.0, b, -1.0);
    Ok(r)
}

/// Random-probe symmetry check, debug builds only.
fn probe_symmetry(op: &dyn Operator) -> Result<()> {
    if !cfg!(debug_assertions) {
        return Ok(());
    }
    let map = op.domain().clone();
    let u = DistVector::from_fn(map.clone(), |g| ((g as f64 + 1.0) * 0.754_877_666).fract() - 0.5);
    let v = DistVector::from_fn(map.clone(), |g| ((g as f64 + 1.0) * 0.569_840_290).fract() - 0.5);
    let mut au = DistVector::zeros(map.clone());
    let mut av = DistVector::zeros(map);
    op.apply(&u, &mut au)?;
    op.apply(&v, &mut av)?;
    let (a, b) = (v.dot(&au), u.dot(&av));
    if (a - b).abs() > 1e-8 * (a.abs() + b.abs() + 1e-300) {
        log::warn!("CG applied to an operator that looks non-symmetric ({a:e} vs {b:e})");
    }
    Ok(())
}

/// Preconditioned conjugate gradients.
pub fn cg(
    op: &dyn Operator,
    pc: &dyn Preconditioner,
    b: &DistVector,
    x: &mut DistVector,
    tol: f64,
    max_iters: usize,
) -> Result<SolveStats> {
    probe_symmetry(op)?;
    let bnorm = b.norm2();
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.fill(0.0);
        stats.converged = true;
        return Ok(stats);
    }
    let mut r = residual(op, b, x)?;
    let mut rel = r.norm2() / bnorm;
    let mut z = DistVector::zeros(r.map().clone());
    pc.apply(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut q = DistVector::zeros(r.map().clone());
    // Energy ½xᵀAx − bᵀx = −½(xᵀb + xᵀr) for the current iterate.
    let mut energy = -0.5 * (x.dot(b) + x.dot(&r));
    stats.history.push(energy);
    while rel > tol && stats.iterations < max_iters {
        op.apply(&p, &mut q)?;
        let pq = finite(p.dot(&q), "curvature", stats.iterations)?;
        if pq <= 0.0 {
            if rz == 0.0 {
                break;
            }
            return Err(Error::Divergence(format!("non-positive curvature {pq:e} in CG")));
        }
        let alpha = rz / pq;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &q);
        energy -= 0.5 * alpha * rz;
        stats.history.push(energy);
        stats.iterations += 1;
        rel = finite(r.norm2() / bnorm, "residual", stats.iterations)?;
        if rel <= tol {
            break;
        }
        pc.apply(&r, &mut z)?;
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.axpby(1.0, &z, beta);
    }
    // Report the true residual.
    let true_rel = residual(op, b, x)?.norm2() / bnorm;
    stats.relative_residual = finite(true_rel, "final residual", stats.iterations)?;
    stats.converged = rel <= tol;
    Ok(stats)
}

/// Right-preconditioned restarted GMRES with modified Gram–Schmidt.
///
/// A second orthogonalization pass runs when the first leaves components
/// above 1e-8 relative to the new vector. Convergence is only declared after
/// the true residual has been checked.
pub fn gmres(
    op: &dyn Operator,
    pc: &dyn Preconditioner,
    b: &DistVector,
    x: &mut DistVector,
    tol: f64,
    max_iters: usize,
    restart: usize,
) -> Result<SolveStats> {
    let bnorm = b.norm2();
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.fill(0.0);
        stats.converged = true;
        return Ok(stats);
    }
    let map = b.map().clone();
    let m = restart.max(1);
    loop {
        let r = residual(op, b, x)?;
        let beta = r.norm2();
        let rel = finite(beta / bnorm, "residual", stats.iterations)?;
        stats.relative_residual = rel;
        if rel <= tol {
            stats.converged = true;
            return Ok(stats);
        }
        if stats.iterations >= max_iters {
            return Ok(stats);
        }
        let mut v: Vec<DistVector> = Vec::with_capacity(m + 1);
        let mut v0 = r;
        v0.scale(1.0 / beta);
        v.push(v0);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_done = 0;
        let mut z = DistVector::zeros(map.clone());
        let mut w = DistVector::zeros(map.clone());
        for k in 0..m {
            if stats.iterations >= max_iters {
                break;
            }
            pc.apply(&v[k], &mut z)?;
            op.apply(&z, &mut w)?;
            for i in 0..=k {
                let hij = w.dot(&v[i]);
                h[i][k] = hij;
                w.axpy(-hij, &v[i]);
            }
            let mut wn = w.norm2();
            let loss = (0..=k).map(|i| w.dot(&v[i]).abs()).fold(0.0, f64::max);
            if wn > 0.0 && loss > 1e-8 * wn {
                for i in 0..=k {
                    let c = w.dot(&v[i]);
                    h[i][k] += c;
                    w.axpy(-c, &v[i]);
                }
                wn = w.norm2();
            }
            h[k + 1][k] = finite(wn, "Arnoldi norm", stats.iterations)?;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(Error::Divergence("GMRES breakdown with singular Hessenberg matrix".into()));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            stats.iterations += 1;
            k_done = k + 1;
            let est = g[k + 1].abs() / bnorm;
            stats.history.push(est);
            if est <= tol || wn <= 1e-14 * beta {
                break;
            }
            let mut vn = w.clone();
            vn.scale(1.0 / wn);
            v.push(vn);
        }
        // Back substitution and update x += P⁻¹ V y.
        let mut y = vec![0.0; k_done];
        for i in (0..k_done).rev() {
            let s: f64 = (i + 1..k_done).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut u = DistVector::zeros(map.clone());
        for (i, yi) in y.iter().enumerate() {
            u.axpy(*yi, &v[i]);
        }
        pc.apply(&u, &mut z)?;
        x.axpy(1.0, &z);
        if k_done == 0 {
            return Ok(stats);
        }
    }
}

/// Right-preconditioned BiCGStab.
pub fn bicgstab(
    op: &dyn Operator,
    pc: &dyn Preconditioner,
    b: &DistVector,
    x: &mut DistVector,
    tol: f64,
    max_iters: usize,
) -> Result<SolveStats> {
    let bnorm = b.norm2();
    let mut stats = SolveStats::default();
    if bnorm == 0.0 {
        x.fill(0.0);
        stats.converged = true;
        return Ok(stats);
    }
    let map = b.map().clone();
    let mut r = residual(op, b, x)?;
    let r0 = r.clone();
    let mut rel = r.norm2() / bnorm;
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = DistVector::zeros(map.clone());
    let mut p = DistVector::zeros(map.clone());
    let mut phat = DistVector::zeros(map.clone());
    let mut shat = DistVector::zeros(map.clone());
    let mut t = DistVector::zeros(map.clone());
    while rel > tol && stats.iterations < max_iters {
        let rho_new = r0.dot(&r);
        if rho_new == 0.0 {
            return Err(Error::Divergence("BiCGStab breakdown (rho = 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        // p = r + beta (p - omega v)
        p.axpy(-omega, &v);
        p.axpby(1.0, &r, beta);
        pc.apply(&p, &mut phat)?;
        op.apply(&phat, &mut v)?;
        alpha = rho / finite(r0.dot(&v), "r0·v", stats.iterations)?;
        let mut s = r.clone();
        s.axpy(-alpha, &v);
        x.axpy(alpha, &phat);
        stats.iterations += 1;
        let srel = s.norm2() / bnorm;
        if srel <= tol {
            rel = srel;
            stats.history.push(rel);
            break;
        }
        pc.apply(&s, &mut shat)?;
        op.apply(&shat, &mut t)?;
        let tt = t.dot(&t);
        omega = if tt == 0.0 { 0.0 } else { t.dot(&s) / tt };
        x.axpy(omega, &shat);
        r.copy_from(&s);
        r.axpy(-omega, &t);
        rel = finite(r.norm2() / bnorm, "residual", stats.iterations)?;
        stats.history.push(rel);
        if omega == 0.0 && rel > tol {
            return Err(Error::Divergence("BiCGStab breakdown (omega = 0)".into()));
        }
    }
    let true_rel = residual(op, b, x)?.norm2() / bnorm;
    stats.relative_residual = finite(true_rel, "final residual", stats.iterations)?;
    stats.converged = true_rel <= tol * 10.0 && rel <= tol;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, ranks: usize) -> DistMatrix {
        let map = Arc::new(RowMap::contiguous(n, ranks));
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        DistMatrix::from_triplets(map.clone(), map, &t).unwrap()
    }

    fn config(method: Method, pc: PreconditionerKind) -> SolverConfig {
        SolverConfig { method, tol: 1e-10, max_iters: 500, restart: 30, preconditioner: pc }
    }

    #[test]
    fn identity_converges_immediately() {
        let map = Arc::new(RowMap::contiguous(5, 2));
        let id: Vec<_> = (0..5).map(|i| (i, i, 1.0)).collect();
        let a = DistMatrix::from_triplets(map.clone(), map.clone(), &id).unwrap();
        let b = DistVector::from_fn(map, |g| g as f64 + 1.0);
        for m in [Method::Cg, Method::Gmres, Method::BiCgStab] {
            let (x, s) = solve(&a, &b, &config(m, PreconditionerKind::None)).unwrap();
            assert!(s.iterations <= 1);
            assert!((x.to_global().iter().zip(b.to_global()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)) < 1e-14);
        }
    }

    #[test]
    fn two_by_two_spd() {
        let map = Arc::new(RowMap::serial(2));
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = DistVector::from_global(map, &[1.0, 1.0]).unwrap();
        let (x, _) = solve(&a, &b, &config(Method::Cg, PreconditionerKind::None)).unwrap();
        for v in x.to_global() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn all_methods_and_preconditioners_converge() {
        let a = laplace_1d(60, 3);
        let b = DistVector::from_fn(a.row_map().clone(), |g| (g as f64 * 0.3).sin());
        let pcs = [
            PreconditionerKind::None,
            PreconditionerKind::Jacobi,
            PreconditionerKind::Ilu0,
            PreconditionerKind::Schwarz { overlap: 2, solver: SubdomainSolver::DenseLu },
            PreconditionerKind::Schwarz { overlap: 1, solver: SubdomainSolver::SparseLu },
        ];
        for m in [Method::Cg, Method::Gmres, Method::BiCgStab] {
            for pc in pcs {
                // Unpreconditioned GMRES(30) stagnates for a while on this operator.
                let cfg = SolverConfig { max_iters: 3000, ..config(m, pc) };
                let (x, s) = solve(&a, &b, &cfg).unwrap();
                assert!(s.converged, "{m:?} {pc:?}");
                let r = residual(&a, &b, &x).unwrap().norm2() / b.norm2();
                assert!(r <= 1e-9, "{m:?} {pc:?}: {r}");
            }
        }
    }

    #[test]
    fn cg_energy_is_non_increasing() {
        let a = laplace_1d(80, 4);
        let b = DistVector::from_fn(a.row_map().clone(), |g| 1.0 + (g % 7) as f64);
        let (_, s) = solve(&a, &b, &config(Method::Cg, PreconditionerKind::Ilu0)).unwrap();
        for w in s.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn max_iters_reported_not_fatal() {
        let a = laplace_1d(100, 1);
        let b = DistVector::from_fn(a.row_map().clone(), |_| 1.0);
        let mut c = config(Method::Cg, PreconditionerKind::None);
        c.max_iters = 3;
        let (_, s) = solve(&a, &b, &c).unwrap();
        assert_eq!(s.iterations, 3);
        assert!(!s.converged);
    }

    #[test]
    fn nan_is_divergence() {
        let map = Arc::new(RowMap::serial(2));
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = DistVector::from_global(map, &[1.0, 1.0]).unwrap();
        let r = solve(&a, &b, &config(Method::Gmres, PreconditionerKind::None));
        assert!(matches!(r, Err(Error::Divergence(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let a = laplace_1d(4, 1);
        let b = DistVector::zeros(a.row_map().clone());
        let mut c = config(Method::Cg, PreconditionerKind::None);
        c.tol = 0.0;
        assert!(matches!(solve(&a, &b, &c), Err(Error::Config(_))));
    }
}
