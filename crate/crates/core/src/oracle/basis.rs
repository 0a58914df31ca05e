use num_complex::Complex64 as C64;

use super::sparse::SparseOp;

/// Tensor-product Fock basis with a cutoff per mode; the last mode varies
/// fastest in the linear index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockBasis {
    pub fn new(cutoffs: Vec<usize>) -> Self {
        let mut strides = vec![1usize; cutoffs.len()];
        for m in (0..cutoffs.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * (cutoffs[m + 1] + 1);
        }
        let dim = cutoffs.iter().map(|c| c + 1).product();
        Self { cutoffs, strides, dim }
    }

    /// Dimension that `cutoffs` would produce, saturating on overflow.
    pub fn dimension_of(cutoffs: &[usize]) -> usize {
        cutoffs.iter().fold(1usize, |acc, c| acc.saturating_mul(c + 1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.n_modes()).map(|m| self.occupation(index, m)).collect()
    }

    pub fn index(&self, occupations: &[usize]) -> Option<usize> {
        let mut idx = 0;
        for (m, &n) in occupations.iter().enumerate() {
            if n > self.cutoffs[m] {
                return None;
            }
            idx += n * self.strides[m];
        }
        Some(idx)
    }

    pub fn total_photons(&self, index: usize) -> usize {
        (0..self.n_modes()).map(|m| self.occupation(index, m)).sum()
    }

    /// Operator lowering `mode` by `power` quanta: `a^p |n⟩ = √(n!/(n−p)!) |n−p⟩`.
    pub fn lowering(&self, mode: usize, power: usize) -> SparseOp {
        let mut entries = Vec::new();
        for j in 0..self.dim {
            let n = self.occupation(j, mode);
            if n >= power {
                let coef: f64 = (0..power).map(|q| ((n - q) as f64).sqrt()).product();
                entries.push((j - power * self.strides[mode], j, C64::new(coef, 0.0)));
            }
        }
        SparseOp::from_triplets(self.dim, self.dim, entries)
    }

    /// `(a†)^p`, truncated at the cutoff.
    pub fn raising(&self, mode: usize, power: usize) -> SparseOp {
        self.lowering(mode, power).adjoint()
    }

    pub fn number(&self, mode: usize) -> SparseOp {
        SparseOp::from_triplets(
            self.dim,
            self.dim,
            (0..self.dim)
                .map(|j| (j, j, C64::new(self.occupation(j, mode) as f64, 0.0)))
                .collect(),
        )
    }
}

/// Partition of the basis into symmetry sectors on which the density
/// matrix is block diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorMap {
    sector_of: Vec<usize>,
    position: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl SectorMap {
    /// Group basis indices by `label`; sectors are ordered by first member.
    pub fn from_labels(labels: &[u64]) -> Self {
        let mut keys: Vec<u64> = Vec::new();
        let mut sector_of = vec![0usize; labels.len()];
        let mut position = vec![0usize; labels.len()];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let s = match keys.iter().position(|&k| k == l) {
                Some(s) => s,
                None => {
                    keys.push(l);
                    members.push(Vec::new());
                    keys.len() - 1
                }
            };
            sector_of[i] = s;
            position[i] = members[s].len();
            members[s].push(i);
        }
        Self {
            sector_of,
            position,
            members,
        }
    }

    pub fn trivial(dim: usize) -> Self {
        Self::from_labels(&vec![0; dim])
    }

    pub fn n_sectors(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.sector_of.len()
    }

    pub fn sector_of(&self, index: usize) -> usize {
        self.sector_of[index]
    }

    pub fn position(&self, index: usize) -> usize {
        self.position[index]
    }

    pub fn members(&self, sector: usize) -> &[usize] {
        &self.members[sector]
    }

    pub fn block_dim(&self, sector: usize) -> usize {
        self.members[sector].len()
    }

    /// Split `op` into per-sector pieces if every source sector maps into a
    /// single target sector; `None` otherwise.
    pub fn split(&self, op: &SparseOp) -> Option<BlockOp> {
        let mut target: Vec<Option<usize>> = vec![None; self.n_sectors()];
        let mut entries: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); self.n_sectors()];
        for (r, c, v) in op.triplets() {
            let (src, dst) = (self.sector_of[c], self.sector_of[r]);
            match target[src] {
                None => target[src] = Some(dst),
                Some(t) if t != dst => return None,
                _ => {}
            }
            entries[src].push((self.position[r], self.position[c], v));
        }
        let parts = target
            .into_iter()
            .zip(entries)
            .enumerate()
            .filter_map(|(src, (dst, e))| {
                dst.map(|dst| BlockPart {
                    src,
                    dst,
                    op: SparseOp::from_triplets(self.block_dim(dst), self.block_dim(src), e),
                })
            })
            .collect();
        Some(BlockOp { parts })
    }
}

/// Operator restricted to sector pairs: each part maps sector `src` into
/// sector `dst`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOp {
    pub parts: Vec<BlockPart>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockPart {
    pub src: usize,
    pub dst: usize,
    pub op: SparseOp,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let b = FockBasis::new(vec![2, 3, 1]);
        assert_eq!(b.dim(), 24);
        for i in 0..b.dim() {
            assert_eq!(b.index(&b.occupations(i)), Some(i));
        }
        assert_eq!(b.index(&[3, 0, 0]), None);
    }

    #[test]
    fn ladder_algebra_below_cutoff() {
        let b = FockBasis::new(vec![6]);
        let a = b.lowering(0, 1);
        let n = a.adjoint().mul(&a);
        assert!((n.to_dense() - b.number(0).to_dense()).norm() < 1e-14);
        let a2 = b.lowering(0, 2);
        assert!((a.mul(&a).to_dense() - a2.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn parity_sectors_split_ladder_operators() {
        let b = FockBasis::new(vec![3, 3]);
        let labels: Vec<u64> = (0..b.dim()).map(|i| (b.total_photons(i) % 2) as u64).collect();
        let sectors = SectorMap::from_labels(&labels);
        assert_eq!(sectors.n_sectors(), 2);
        let split = sectors.split(&b.lowering(1, 1)).unwrap();
        assert!(split.parts.iter().all(|p| p.src != p.dst));
        let mixed = b.lowering(0, 1).add(&b.number(1));
        assert!(sectors.split(&mixed).is_none());
    }
}
