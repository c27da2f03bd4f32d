use std::sync::Arc;

use rayon::prelude::*;

use super::RowMap;
use crate::error::{Error, Result};

/// Unique-mode distributed vector: each rank stores the entries it owns, in
/// the order of its row-map list.
#[derive(Debug, Clone, PartialEq)]
pub struct DistVector {
    map: Arc<RowMap>,
    parts: Vec<Vec<f64>>,
}

impl DistVector {
    pub fn zeros(map: Arc<RowMap>) -> Self {
        let parts = (0..map.n_ranks()).map(|r| vec![0.0; map.n_owned(r)]).collect();
        DistVector { map, parts }
    }

    pub fn from_fn(map: Arc<RowMap>, f: impl Fn(usize) -> f64) -> Self {
        let parts = (0..map.n_ranks()).map(|r| map.owned(r).iter().map(|&g| f(g)).collect()).collect();
        DistVector { map, parts }
    }

    /// Scatters a global array over the owning ranks.
    pub fn from_global(map: Arc<RowMap>, values: &[f64]) -> Result<Self> {
        if values.len() != map.n_global() {
            return Err(Error::Dimension(format!(
                "global array of length {} for map of size {}",
                values.len(),
                map.n_global()
            )));
        }
        Ok(Self::from_fn(map, |g| values[g]))
    }

    pub fn from_parts(map: Arc<RowMap>, parts: Vec<Vec<f64>>) -> Result<Self> {
        if parts.len() != map.n_ranks() || parts.iter().enumerate().any(|(r, p)| p.len() != map.n_owned(r)) {
            return Err(Error::Dimension("rank parts do not match the row map".into()));
        }
        Ok(DistVector { map, parts })
    }

    /// Gathers all entries into one array in global numbering.
    pub fn to_global(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.map.n_global()];
        for (r, part) in self.parts.iter().enumerate() {
            for (&g, &v) in self.map.owned(r).iter().zip(part) {
                out[g] = v;
            }
        }
        out
    }

    pub fn map(&self) -> &Arc<RowMap> {
        &self.map
    }

    pub fn len(&self) -> usize {
        self.map.n_global()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn parts(&self) -> &[Vec<f64>] {
        &self.parts
    }

    pub fn parts_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.parts
    }

    pub fn get(&self, g: usize) -> f64 {
        self.parts[self.map.owner(g)][self.map.local_index(g)]
    }

    pub fn set(&mut self, g: usize, v: f64) {
        let (r, l) = (self.map.owner(g), self.map.local_index(g));
        self.parts[r][l] = v;
    }

    fn check(&self, other: &DistVector) {
        assert!(Arc::ptr_eq(&self.map, &other.map) || *self.map == *other.map, "vectors live on different row maps");
    }

    /// Inner product. Per-rank partial sums are combined in rank order so the
    /// result does not depend on the thread count.
    pub fn dot(&self, other: &DistVector) -> f64 {
        self.check(other);
        let partial: Vec<f64> = self
            .parts
            .par_iter()
            .zip(other.parts.par_iter())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect();
        partial.iter().sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.parts.iter().flatten().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        let partial: Vec<f64> = self.parts.iter().map(|p| p.iter().sum()).collect();
        partial.iter().sum()
    }

    pub fn fill(&mut self, v: f64) {
        self.parts.par_iter_mut().for_each(|p| p.iter_mut().for_each(|x| *x = v));
    }

    pub fn scale(&mut self, a: f64) {
        self.parts.par_iter_mut().for_each(|p| p.iter_mut().for_each(|x| *x *= a));
    }

    /// self += a * x
    pub fn axpy(&mut self, a: f64, x: &DistVector) {
        self.check(x);
        self.parts.par_iter_mut().zip(x.parts.par_iter()).for_each(|(p, q)| {
            for (y, &v) in p.iter_mut().zip(q) {
                *y += a * v;
            }
        });
    }

    /// self = a * x + b * self
    pub fn axpby(&mut self, a: f64, x: &DistVector, b: f64) {
        self.check(x);
        self.parts.par_iter_mut().zip(x.parts.par_iter()).for_each(|(p, q)| {
            for (y, &v) in p.iter_mut().zip(q) {
                *y = a * v + b * *y;
            }
        });
    }

    pub fn copy_from(&mut self, x: &DistVector) {
        self.check(x);
        for (p, q) in self.parts.iter_mut().zip(&x.parts) {
            p.copy_from_slice(q);
        }
    }

    /// Entrywise product with `d`.
    pub fn mul_elementwise(&mut self, d: &DistVector) {
        self.check(d);
        self.parts.par_iter_mut().zip(d.parts.par_iter()).for_each(|(p, q)| {
            for (y, &v) in p.iter_mut().zip(q) {
                *y *= v;
            }
        });
    }

    /// Repeated-mode view: for each rank, the values at `indices[rank]`
    /// fetched from their owners.
    pub fn gather(&self, indices: &[Vec<usize>]) -> Vec<Vec<f64>> {
        indices.par_iter().map(|list| list.iter().map(|&g| self.get(g)).collect()).collect()
    }

    /// Sums per-rank repeated-mode contributions into a unique-mode vector.
    /// Each owned entry adds the contributions of source ranks in increasing
    /// rank order.
    pub fn sum_contributions(map: Arc<RowMap>, indices: &[Vec<usize>], values: &[Vec<f64>]) -> Self {
        let nr = map.n_ranks();
        let parts = (0..nr)
            .into_par_iter()
            .map(|o| {
                let mut part = vec![0.0; map.n_owned(o)];
                for (idx, val) in indices.iter().zip(values) {
                    for (&g, &v) in idx.iter().zip(val) {
                        if map.owner(g) == o {
                            part[map.local_index(g)] += v;
                        }
                    }
                }
                part
            })
            .collect();
        DistVector { map, parts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_round_trip_and_dot() {
        let map = Arc::new(RowMap::new(5, vec![vec![1, 3], vec![0, 2, 4]]).unwrap());
        let g = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let v = DistVector::from_global(map.clone(), &g).unwrap();
        assert_eq!(v.to_global(), g);
        assert_eq!(v.get(3), 4.0);
        assert_eq!(v.dot(&v), 55.0);
        let mut w = v.clone();
        w.axpby(2.0, &v, -1.0);
        assert_eq!(w.to_global(), g);
    }

    #[test]
    fn contributions_sum_on_owner() {
        let map = Arc::new(RowMap::new(3, vec![vec![0, 1], vec![2]]).unwrap());
        let idx = vec![vec![0, 1, 2], vec![1, 2]];
        let val = vec![vec![1.0, 2.0, 3.0], vec![10.0, 20.0]];
        let v = DistVector::sum_contributions(map, &idx, &val);
        assert_eq!(v.to_global(), vec![1.0, 12.0, 23.0]);
        assert_eq!(v.gather(&idx), vec![vec![1.0, 12.0, 23.0], vec![12.0, 23.0]]);
    }
}
