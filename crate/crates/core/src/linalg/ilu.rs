use super::Csr;
use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude are replaced by ±`PIVOT_SHIFT`.
pub const PIVOT_SHIFT: f64 = 1e-12;

/// ILU(0) factors stored in the pattern of the input matrix: strictly lower
/// entries hold L (unit diagonal implied), the rest holds U.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

/// Incomplete LU without fill.
pub fn ilu0_factor(a: &Csr) -> Result<Ilu0> {
    let n = a.n_rows();
    if a.n_cols != n {
        return Err(Error::Dimension("ILU(0) needs a square matrix".into()));
    }
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let d = a.find(i, i).ok_or_else(|| Error::Pattern(format!("row {i} has no diagonal entry")))?;
        diag.push(d);
    }
    let mut lu = a.clone();
    // Position of each column of the current row, or usize::MAX.
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
        for k in start..end {
            pos[lu.cols[k]] = k;
        }
        for kk in start..end {
            let k = lu.cols[kk];
            if k >= i {
                break;
            }
            let f = lu.vals[kk] / lu.vals[diag[k]];
            lu.vals[kk] = f;
            for m in diag[k] + 1..lu.row_ptr[k + 1] {
                let p = pos[lu.cols[m]];
                if p != usize::MAX {
                    lu.vals[p] -= f * lu.vals[m];
                }
            }
        }
        let d = &mut lu.vals[diag[i]];
        if d.abs() < PIVOT_SHIFT {
            log::warn!("ILU(0): pivot {d:e} in row {i} shifted to ±{PIVOT_SHIFT:e}");
            *d = if d.is_sign_negative() { -PIVOT_SHIFT } else { PIVOT_SHIFT };
        }
        for k in start..end {
            pos[lu.cols[k]] = usize::MAX;
        }
    }
    Ok(Ilu0 { lu, diag })
}

/// Solves (LU) z = r.
pub fn ilu0_solve(f: &Ilu0, r: &[f64]) -> Vec<f64> {
    let mut z = r.to_vec();
    f.solve_in_place(&mut z);
    z
}

impl Ilu0 {
    pub fn solve_in_place(&self, z: &mut [f64]) {
        let lu = &self.lu;
        let n = lu.n_rows();
        for i in 0..n {
            let mut s = z[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = s / lu.vals[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseLu;

    fn csr(dense: &[Vec<f64>]) -> Csr {
        let rows = dense
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect())
            .collect();
        Csr::from_rows(dense.len(), rows)
    }

    fn dense_solve(d: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
        let n = d.len();
        let lu = DenseLu::factor(n, d.iter().flatten().copied().collect()).unwrap();
        let mut x = r.to_vec();
        lu.solve(&mut x);
        x
    }

    #[test]
    fn diagonal_is_exact() {
        let d = vec![vec![2.0, 0.0, 0.0], vec![0.0, -4.0, 0.0], vec![0.0, 0.0, 0.5]];
        let z = ilu0_solve(&ilu0_factor(&csr(&d)).unwrap(), &[1.0, 1.0, 1.0]);
        assert_eq!(z, vec![0.5, -0.25, 2.0]);
    }

    #[test]
    fn lower_triangular_is_exact() {
        let d = vec![vec![2.0, 0.0, 0.0], vec![1.0, 3.0, 0.0], vec![-1.0, 2.0, 4.0]];
        let r = [1.0, 2.0, 3.0];
        let z = ilu0_solve(&ilu0_factor(&csr(&d)).unwrap(), &r);
        let e = dense_solve(&d, &r);
        for i in 0..3 {
            assert!((z[i] - e[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_matches_dense_lu() {
        let n = 6;
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i: usize| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 2.5,
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let r: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sqrt()).collect();
        let z = ilu0_solve(&ilu0_factor(&csr(&d)).unwrap(), &r);
        let e = dense_solve(&d, &r);
        for i in 0..n {
            assert!((z[i] - e[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn missing_diagonal_is_pattern_error() {
        let d = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(ilu0_factor(&csr(&d)), Err(Error::Pattern(_))));
    }

    #[test]
    fn zero_pivot_shifted() {
        // Second pivot becomes exactly zero: 1 - 1*1/1.
        let d = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let f = ilu0_factor(&csr(&d)).unwrap();
        assert_eq!(f.lu.vals[f.diag[1]], PIVOT_SHIFT);
    }
}
