use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use super::{DistVector, RowMap};
use crate::error::{Error, Result};

/// Compressed sparse rows with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Csr {
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Builds from per-row (column, value) lists, summing duplicates.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in r {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n_cols, row_ptr, cols, vals }
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.first() != Some(&0) || *self.row_ptr.last().unwrap() != self.cols.len() {
            return Err(Error::Pattern("row pointer does not span the column array".into()));
        }
        if self.cols.len() != self.vals.len() {
            return Err(Error::Pattern("column and value arrays differ in length".into()));
        }
        for i in 0..self.n_rows() {
            let (c, _) = self.row(i);
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Pattern(format!("row {i}: columns not sorted and unique")));
            }
            if c.last().is_some_and(|&j| j >= self.n_cols) {
                return Err(Error::Pattern(format!("row {i}: column out of range")));
            }
        }
        Ok(())
    }

    /// Position of column `j` in row `i`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (c, _) = self.row(i);
        c.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }
}

/// Where each rank finds the column entries it does not own.
#[derive(Debug, Clone, PartialEq)]
struct ImportPlan {
    /// (rank, local index) of each ghost column, in ascending global order.
    sources: Vec<(usize, usize)>,
    /// For every stored entry, its slot in [owned columns | ghosts].
    slots: Vec<usize>,
}

/// Row-distributed sparse matrix: rank `r` stores the rows it owns in the
/// row map as CSR with global column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    rows: Arc<RowMap>,
    cols: Arc<RowMap>,
    blocks: Vec<Csr>,
    plans: Vec<ImportPlan>,
}

impl DistMatrix {
    pub fn new(rows: Arc<RowMap>, cols: Arc<RowMap>, blocks: Vec<Csr>) -> Result<Self> {
        if blocks.len() != rows.n_ranks() || cols.n_ranks() != rows.n_ranks() {
            return Err(Error::Dimension("one block per rank required".into()));
        }
        for (r, b) in blocks.iter().enumerate() {
            if b.n_rows() != rows.n_owned(r) || b.n_cols != cols.n_global() {
                return Err(Error::Dimension(format!("block of rank {r} has the wrong shape")));
            }
            b.validate()?;
        }
        let plans = blocks
            .par_iter()
            .enumerate()
            .map(|(r, b)| {
                let mut ghosts: Vec<usize> = b.cols.iter().copied().filter(|&g| cols.owner(g) != r).collect();
                ghosts.sort_unstable();
                ghosts.dedup();
                let own = cols.n_owned(r);
                let slots = b
                    .cols
                    .iter()
                    .map(|&g| {
                        if cols.owner(g) == r {
                            cols.local_index(g)
                        } else {
                            own + ghosts.binary_search(&g).expect("ghost collected")
                        }
                    })
                    .collect();
                let sources = ghosts.iter().map(|&g| (cols.owner(g), cols.local_index(g))).collect();
                ImportPlan { sources, slots }
            })
            .collect();
        Ok(DistMatrix { rows, cols, blocks, plans })
    }

    /// Assembles from global (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: Arc<RowMap>, cols: Arc<RowMap>, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_rank: Vec<Vec<Vec<(usize, f64)>>> =
            (0..rows.n_ranks()).map(|r| vec![Vec::new(); rows.n_owned(r)]).collect();
        for &(i, j, v) in triplets {
            if i >= rows.n_global() || j >= cols.n_global() {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside the matrix")));
            }
            per_rank[rows.owner(i)][rows.local_index(i)].push((j, v));
        }
        let n = cols.n_global();
        let blocks = per_rank.into_iter().map(|r| Csr::from_rows(n, r)).collect();
        Self::new(rows, cols, blocks)
    }

    /// Stores every nonzero of a dense row-major matrix.
    pub fn from_dense(rows: Arc<RowMap>, cols: Arc<RowMap>, dense: &[Vec<f64>]) -> Result<Self> {
        let mut t = Vec::new();
        for (i, row) in dense.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows, cols, &t)
    }

    pub fn row_map(&self) -> &Arc<RowMap> {
        &self.rows
    }

    pub fn col_map(&self) -> &Arc<RowMap> {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.n_global()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.n_global()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(Csr::nnz).sum()
    }

    pub fn block(&self, rank: usize) -> &Csr {
        &self.blocks[rank]
    }

    /// Columns and values of global row `g`, wherever it is stored.
    pub fn row(&self, g: usize) -> (&[usize], &[f64]) {
        self.blocks[self.rows.owner(g)].row(self.rows.local_index(g))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    /// Number of ghost columns rank `r` imports before a product.
    pub fn n_ghosts(&self, rank: usize) -> usize {
        self.plans[rank].sources.len()
    }

    /// y = A x. Each rank first fetches its ghost entries of `x`, then
    /// multiplies its rows independently.
    pub fn spmv(&self, x: &DistVector, y: &mut DistVector) -> Result<()> {
        if x.len() != self.n_cols() || y.len() != self.n_rows() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix applied to a vector of length {}",
                self.n_rows(),
                self.n_cols(),
                x.len()
            )));
        }
        let xp = x.parts();
        y.parts_mut().par_iter_mut().zip(self.blocks.par_iter().zip(self.plans.par_iter()).enumerate()).for_each(
            |(yr, (r, (b, plan)))| {
                let mut buf = xp[r].clone();
                buf.extend(plan.sources.iter().map(|&(s, l)| xp[s][l]));
                for (i, yi) in yr.iter_mut().enumerate() {
                    let (a, e) = (b.row_ptr[i], b.row_ptr[i + 1]);
                    let mut acc = 0.0;
                    for k in a..e {
                        acc += b.vals[k] * buf[plan.slots[k]];
                    }
                    *yi = acc;
                }
            },
        );
        Ok(())
    }

    pub fn mul(&self, x: &DistVector) -> Result<DistVector> {
        let mut y = DistVector::zeros(self.rows.clone());
        self.spmv(x, &mut y)?;
        Ok(y)
    }

    /// Diagonal entries as a vector on the row map (square matrices).
    pub fn diagonal(&self) -> DistVector {
        DistVector::from_fn(self.rows.clone(), |g| self.get(g, g))
    }

    pub fn scale(&mut self, a: f64) {
        self.blocks.par_iter_mut().for_each(|b| b.vals.iter_mut().for_each(|v| *v *= a));
    }

    /// Mutable access to the values of owned row `g` (pattern fixed).
    pub fn row_values_mut(&mut self, g: usize) -> (&[usize], &mut [f64]) {
        let (r, l) = (self.rows.owner(g), self.rows.local_index(g));
        let b = &mut self.blocks[r];
        let (a, e) = (b.row_ptr[l], b.row_ptr[l + 1]);
        (&b.cols[a..e], &mut b.vals[a..e])
    }

    /// Sets every stored value of the listed rows to zero.
    pub fn zero_rows(&mut self, rows: &[usize]) {
        for &g in rows {
            self.row_values_mut(g).1.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Dense copy in global numbering.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for (r, b) in self.blocks.iter().enumerate() {
            for (l, &g) in self.rows.owned(r).iter().enumerate() {
                let (c, v) = b.row(l);
                for (&j, &a) in c.iter().zip(v) {
                    d[g][j] = a;
                }
            }
        }
        d
    }

    /// The same matrix as one global CSR block in global row order.
    pub fn to_global_csr(&self) -> Csr {
        let rows = (0..self.n_rows())
            .map(|g| {
                let (c, v) = self.row(g);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        Csr::from_rows(self.n_cols(), rows)
    }

    /// Same entries on other row and column maps.
    pub fn redistribute(&self, rows: Arc<RowMap>, cols: Arc<RowMap>) -> Result<DistMatrix> {
        let blocks = (0..rows.n_ranks())
            .map(|r| {
                let rs = rows
                    .owned(r)
                    .iter()
                    .map(|&g| {
                        let (c, v) = self.row(g);
                        c.iter().copied().zip(v.iter().copied()).collect()
                    })
                    .collect();
                Csr::from_rows(cols.n_global(), rs)
            })
            .collect();
        DistMatrix::new(rows, cols, blocks)
    }

    /// Largest |a_ij - a_ji| over stored entries, relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n_rows() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                scale = scale.max(a.abs());
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Sparse product `self · diag(d) · other`.
    ///
    /// Rows of `other` referenced by a rank's entries are fetched from their
    /// owners, then each rank forms its rows independently.
    pub fn mul_diag_mul(&self, d: &DistVector, other: &DistMatrix) -> Result<DistMatrix> {
        if self.n_cols() != other.n_rows() || d.len() != self.n_cols() {
            return Err(Error::Dimension("incompatible shapes in triple product".into()));
        }
        let n = other.n_cols();
        let blocks = self
            .blocks
            .par_iter()
            .map(|b| {
                let rows = (0..b.n_rows())
                    .map(|i| {
                        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                        let (c, v) = b.row(i);
                        for (&k, &a) in c.iter().zip(v) {
                            let s = a * d.get(k);
                            let (oc, ov) = other.row(k);
                            for (&j, &bv) in oc.iter().zip(ov) {
                                *acc.entry(j).or_insert(0.0) += s * bv;
                            }
                        }
                        acc.into_iter().collect()
                    })
                    .collect();
                Csr::from_rows(n, rows)
            })
            .collect();
        DistMatrix::new(self.rows.clone(), other.cols.clone(), blocks)
    }

    /// Entrywise sum `a·self + b·other` over the union pattern.
    pub fn add(&self, a: f64, other: &DistMatrix, b: f64) -> Result<DistMatrix> {
        if self.rows != other.rows || self.n_cols() != other.n_cols() {
            return Err(Error::Dimension("matrix sum needs equal shapes and row maps".into()));
        }
        let blocks = self
            .blocks
            .par_iter()
            .zip(other.blocks.par_iter())
            .map(|(x, y)| {
                let rows = (0..x.n_rows())
                    .map(|i| {
                        let (c1, v1) = x.row(i);
                        let (c2, v2) = y.row(i);
                        let mut r: Vec<(usize, f64)> = c1.iter().zip(v1).map(|(&j, &v)| (j, a * v)).collect();
                        r.extend(c2.iter().zip(v2).map(|(&j, &v)| (j, b * v)));
                        r
                    })
                    .collect();
                Csr::from_rows(x.n_cols, rows)
            })
            .collect();
        DistMatrix::new(self.rows.clone(), self.cols.clone(), blocks)
    }

    /// Matrix Market coordinate export (1-based, general real).
    pub fn write_matrix_market(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows(), self.n_cols(), self.nnz())?;
        for i in 0..self.n_rows() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, a)?;
            }
        }
        Ok(())
    }
}
