use crate::error::{Error, Result};

/// Distribution of global indices `[0, n)` over ranks: each index has exactly
/// one owner and a position in its owner's sorted list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowMap {
    n_global: usize,
    owned: Vec<Vec<usize>>,
    owner: Vec<u32>,
    local: Vec<u32>,
}

impl RowMap {
    /// `owned[r]` lists the indices of rank `r`; together they must cover `[0, n)` disjointly.
    pub fn new(n_global: usize, mut owned: Vec<Vec<usize>>) -> Result<Self> {
        if owned.is_empty() {
            return Err(Error::Config("a row map needs at least one rank".into()));
        }
        let mut owner = vec![u32::MAX; n_global];
        let mut local = vec![0u32; n_global];
        for (r, list) in owned.iter_mut().enumerate() {
            list.sort_unstable();
            for (l, &g) in list.iter().enumerate() {
                if g >= n_global {
                    return Err(Error::Invariant(format!("index {g} beyond map size {n_global}")));
                }
                if owner[g] != u32::MAX {
                    return Err(Error::Invariant(format!("index {g} owned twice")));
                }
                owner[g] = r as u32;
                local[g] = l as u32;
            }
        }
        if let Some(g) = owner.iter().position(|&o| o == u32::MAX) {
            return Err(Error::Invariant(format!("index {g} has no owner")));
        }
        Ok(RowMap { n_global, owned, owner, local })
    }

    /// Everything on rank 0.
    pub fn serial(n: usize) -> Self {
        Self::new(n, vec![(0..n).collect()]).expect("serial map is valid")
    }

    /// Consecutive blocks of near-equal size.
    pub fn contiguous(n: usize, ranks: usize) -> Self {
        let ranks = ranks.max(1);
        let owned = (0..ranks).map(|r| (r * n / ranks..(r + 1) * n / ranks).collect()).collect();
        Self::new(n, owned).expect("contiguous map is valid")
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn n_ranks(&self) -> usize {
        self.owned.len()
    }

    pub fn owned(&self, rank: usize) -> &[usize] {
        &self.owned[rank]
    }

    pub fn n_owned(&self, rank: usize) -> usize {
        self.owned[rank].len()
    }

    pub fn owner(&self, g: usize) -> usize {
        self.owner[g] as usize
    }

    /// Position of `g` within its owner's list.
    pub fn local_index(&self, g: usize) -> usize {
        self.local[g] as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let m = RowMap::new(5, vec![vec![4, 0], vec![1, 2, 3]]).unwrap();
        assert_eq!(m.owned(0), &[0, 4]);
        assert_eq!((m.owner(4), m.local_index(4)), (0, 1));
        assert_eq!((m.owner(2), m.local_index(2)), (1, 1));
    }

    #[test]
    fn rejects_overlap_and_gaps() {
        assert!(RowMap::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(RowMap::new(3, vec![vec![0], vec![2]]).is_err());
    }

    #[test]
    fn contiguous_blocks() {
        let m = RowMap::contiguous(10, 3);
        let sizes: Vec<usize> = (0..3).map(|r| m.n_owned(r)).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().all(|&s| s == 3 || s == 4));
    }
}
