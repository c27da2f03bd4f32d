use std::sync::Arc;
use std::time::{Duration, Instant};

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use rayon::prelude::*;

use super::{ilu0_factor, Csr, DenseLu, DistMatrix, DistVector, Ilu0, Preconditioner, RowMap};
use crate::error::{Error, Result};

/// Local solver used on each Schwarz subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainSolver {
    DenseLu,
    SparseLu,
    Ilu0,
}

enum LocalFactor {
    Dense(DenseLu),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Ilu(Ilu0),
    Empty,
}

impl LocalFactor {
    fn solve(&self, x: &mut [f64]) {
        match self {
            LocalFactor::Dense(lu) => lu.solve(x),
            LocalFactor::Sparse(lu) => {
                let mut m = faer::Mat::<f64>::from_fn(x.len(), 1, |i, _| x[i]);
                lu.solve_in_place(m.as_mut());
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = m[(i, 0)];
                }
            }
            LocalFactor::Ilu(f) => f.solve_in_place(x),
            LocalFactor::Empty => {}
        }
    }
}

/// Algebraic additive Schwarz preconditioner
/// z = Σ_i R_iᵀ A_i⁻¹ R_i r with A_i = R_i A R_iᵀ.
///
/// Subdomain `i` starts from the rows owned by rank `i` and grows by
/// `overlap` layers of matrix-graph neighbours. Overlapping contributions are
/// summed without weights.
pub struct SchwarzPreconditioner {
    map: Arc<RowMap>,
    sets: Vec<Vec<usize>>,
    factors: Vec<LocalFactor>,
    /// For each rank: per subdomain, (position in set, local row) of owned entries.
    extension: Vec<Vec<Vec<(usize, usize)>>>,
    overlap: usize,
    solver: SubdomainSolver,
    factor_times: Vec<Duration>,
}

/// Subdomain index sets: owned rows of each rank grown `overlap` times
/// through the sparsity graph of `a`.
pub fn schwarz_index_sets(a: &DistMatrix, overlap: usize) -> Vec<Vec<usize>> {
    let map = a.row_map();
    let n = map.n_global();
    (0..map.n_ranks())
        .into_par_iter()
        .map(|r| {
            let mut mark = vec![false; n];
            let mut set: Vec<usize> = map.owned(r).to_vec();
            for &g in &set {
                mark[g] = true;
            }
            let mut frontier = set.clone();
            for _ in 0..overlap {
                let mut next = Vec::new();
                for &g in &frontier {
                    for &j in a.row(g).0 {
                        if !mark[j] {
                            mark[j] = true;
                            next.push(j);
                        }
                    }
                }
                set.extend_from_slice(&next);
                frontier = next;
            }
            set.sort_unstable();
            set
        })
        .collect()
}

/// Extracts R A Rᵀ for the sorted index set `set`.
pub fn extract_submatrix(a: &DistMatrix, set: &[usize]) -> Csr {
    let rows = set
        .iter()
        .map(|&g| {
            let (c, v) = a.row(g);
            c.iter().zip(v).filter_map(|(&j, &x)| set.binary_search(&j).ok().map(|l| (l, x))).collect()
        })
        .collect();
    Csr::from_rows(set.len(), rows)
}

fn factor(sub: usize, a: &Csr, solver: SubdomainSolver) -> Result<LocalFactor> {
    let n = a.n_rows();
    if n == 0 {
        return Ok(LocalFactor::Empty);
    }
    match solver {
        SubdomainSolver::DenseLu => {
            let mut d = vec![0.0; n * n];
            for i in 0..n {
                let (c, v) = a.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    d[i * n + j] = x;
                }
            }
            DenseLu::factor(n, d).map(LocalFactor::Dense).map_err(|col| Error::Factorization {
                subdomain: sub,
                msg: format!("singular block, zero pivot in column {col}"),
            })
        }
        SubdomainSolver::SparseLu => {
            let mut t = Vec::with_capacity(a.nnz());
            for i in 0..n {
                let (c, v) = a.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    t.push(Triplet::new(i, j, x));
                }
            }
            let err = |m: String| Error::Factorization { subdomain: sub, msg: m };
            let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t).map_err(|e| err(format!("{e:?}")))?;
            let lu = m.sp_lu().map_err(|e| err(format!("{e:?}")))?;
            Ok(LocalFactor::Sparse(lu))
        }
        SubdomainSolver::Ilu0 => ilu0_factor(a).map(LocalFactor::Ilu).map_err(|e| match e {
            Error::Pattern(m) => Error::Pattern(format!("subdomain {sub}: {m}")),
            other => other,
        }),
    }
}

/// Builds the preconditioner with one subdomain per rank of `a`'s row map.
pub fn build_schwarz(a: &DistMatrix, overlap: usize, solver: SubdomainSolver) -> Result<SchwarzPreconditioner> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::Dimension("Schwarz needs a square matrix".into()));
    }
    let sets = schwarz_index_sets(a, overlap);
    build_schwarz_with_sets(a, sets, overlap, solver)
}

/// Builds the preconditioner from explicit subdomain index sets.
pub fn build_schwarz_with_sets(
    a: &DistMatrix,
    mut sets: Vec<Vec<usize>>,
    overlap: usize,
    solver: SubdomainSolver,
) -> Result<SchwarzPreconditioner> {
    let map = a.row_map().clone();
    let mut covered = vec![false; map.n_global()];
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
        for &g in s.iter() {
            if g >= map.n_global() {
                return Err(Error::Dimension(format!("subdomain index {g} out of range")));
            }
            covered[g] = true;
        }
    }
    if covered.contains(&false) {
        return Err(Error::Config("subdomains do not cover every row".into()));
    }
    let built: Vec<Result<(LocalFactor, Duration)>> = sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let sub = extract_submatrix(a, set);
            let t0 = Instant::now();
            let f = factor(i, &sub, solver)?;
            Ok((f, t0.elapsed()))
        })
        .collect();
    let mut factors = Vec::with_capacity(sets.len());
    let mut factor_times = Vec::with_capacity(sets.len());
    for b in built {
        let (f, t) = b?;
        factors.push(f);
        factor_times.push(t);
    }
    let extension = (0..map.n_ranks())
        .map(|r| {
            sets.iter()
                .map(|set| {
                    set.iter()
                        .enumerate()
                        .filter(|(_, &g)| map.owner(g) == r)
                        .map(|(k, &g)| (k, map.local_index(g)))
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(SchwarzPreconditioner { map, sets, factors, extension, overlap, solver, factor_times })
}

impl SchwarzPreconditioner {
    pub fn n_subdomains(&self) -> usize {
        self.sets.len()
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn solver(&self) -> SubdomainSolver {
        self.solver
    }

    /// Wall time spent factoring each subdomain block.
    pub fn factor_times(&self) -> &[Duration] {
        &self.factor_times
    }
}

/// z = Σ_i R_iᵀ A_i⁻¹ R_i r
pub fn apply_preconditioner(p: &SchwarzPreconditioner, r: &DistVector) -> DistVector {
    // Restriction gather and local solves, one subdomain per worker.
    let local: Vec<Vec<f64>> = p
        .sets
        .par_iter()
        .zip(p.factors.par_iter())
        .map(|(set, f)| {
            let mut x: Vec<f64> = set.iter().map(|&g| r.get(g)).collect();
            f.solve(&mut x);
            x
        })
        .collect();
    // Extension scatter-add: owners sum subdomain contributions in subdomain order.
    let parts = p
        .extension
        .par_iter()
        .enumerate()
        .map(|(rank, per_sub)| {
            let mut part = vec![0.0; p.map.n_owned(rank)];
            for (i, entries) in per_sub.iter().enumerate() {
                for &(k, l) in entries {
                    part[l] += local[i][k];
                }
            }
            part
        })
        .collect();
    DistVector::from_parts(p.map.clone(), parts).expect("parts follow the row map")
}

impl Preconditioner for SchwarzPreconditioner {
    fn apply(&self, r: &DistVector, z: &mut DistVector) -> Result<()> {
        *z = apply_preconditioner(self, r);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.0,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect()
    }

    fn dense_inverse_apply(d: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
        let n = d.len();
        let lu = DenseLu::factor(n, d.iter().flatten().copied().collect()).unwrap();
        let mut x = r.to_vec();
        lu.solve(&mut x);
        x
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let d = tridiag(7);
        let map = Arc::new(RowMap::serial(7));
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &d).unwrap();
        let r: Vec<f64> = (0..7).map(|i| i as f64 - 2.0).collect();
        let e = dense_inverse_apply(&d, &r);
        for solver in [SubdomainSolver::DenseLu, SubdomainSolver::SparseLu] {
            for overlap in [0, 3] {
                let p = build_schwarz(&a, overlap, solver).unwrap();
                let z = apply_preconditioner(&p, &DistVector::from_global(map.clone(), &r).unwrap()).to_global();
                for i in 0..7 {
                    assert!((z[i] - e[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_diagonal_two_subdomains() {
        let mut d = vec![vec![0.0; 4]; 4];
        d[0][0] = 4.0;
        d[0][1] = 1.0;
        d[1][0] = 1.0;
        d[1][1] = 3.0;
        d[2][2] = 5.0;
        d[2][3] = -2.0;
        d[3][2] = -2.0;
        d[3][3] = 6.0;
        let map = Arc::new(RowMap::contiguous(4, 2));
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &d).unwrap();
        let p = build_schwarz(&a, 0, SubdomainSolver::DenseLu).unwrap();
        let r = [1.0, 2.0, 3.0, 4.0];
        let z = apply_preconditioner(&p, &DistVector::from_global(map, &r).unwrap()).to_global();
        let e = dense_inverse_apply(&d, &r);
        for i in 0..4 {
            assert!((z[i] - e[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_residual_gives_zero() {
        let map = Arc::new(RowMap::contiguous(8, 2));
        let a = DistMatrix::from_dense(map.clone(), map.clone(), &tridiag(8)).unwrap();
        let p = build_schwarz(&a, 1, SubdomainSolver::Ilu0).unwrap();
        assert_eq!(apply_preconditioner(&p, &DistVector::zeros(map)).norm_inf(), 0.0);
    }

    #[test]
    fn singular_block_names_subdomain() {
        let mut d = tridiag(4);
        d[2] = vec![0.0; 4];
        for row in d.iter_mut() {
            row[2] = 0.0;
        }
        d[2][2] = 0.0;
        let map = Arc::new(RowMap::contiguous(4, 2));
        // Keep an explicit zero on the diagonal so the pattern exists.
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 || i == j {
                    t.push((i, j, v));
                }
            }
        }
        let a = DistMatrix::from_triplets(map.clone(), map, &t).unwrap();
        match build_schwarz(&a, 0, SubdomainSolver::DenseLu) {
            Err(Error::Factorization { subdomain, .. }) => assert_eq!(subdomain, 1),
            other => panic!("expected factorization error, got {:?}", other.err()),
        }
    }
}
