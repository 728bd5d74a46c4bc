//! Regular grid over the unit behaviour cube: bin indexing and adjacency.

use crate::scalar::Scalar;

/// Shape of a regular grid partitioning `[0,1]^D`, given as bins per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridShape {
    dims: Vec<usize>,
}

impl GridShape {
    pub fn new(dims: Vec<usize>) -> Self {
        assert!(!dims.is_empty(), "grid must have at least one dimension");
        assert!(dims.iter().all(|&n| n > 0), "bins per dimension must be positive");
        Self { dims }
    }

    /// `per_dim` bins in each of `d` dimensions.
    pub fn uniform(per_dim: usize, d: usize) -> Self {
        Self::new(vec![per_dim; d])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_bins(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major flat index of a multi-index.
    pub fn flatten(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims.len());
        let mut flat = 0;
        for (&m, &n) in multi.iter().zip(&self.dims) {
            debug_assert!(m < n);
            flat = flat * n + m;
        }
        flat
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        debug_assert!(flat < self.total_bins());
        let mut multi = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            multi[i] = flat % self.dims[i];
            flat /= self.dims[i];
        }
        multi
    }

    /// Bin containing a descriptor: `floor(v * n)` per axis, clamped at the
    /// upper edge so `v = 1.0` falls in the last bin.
    pub fn bin_of<F: Scalar>(&self, descriptor: &[F]) -> usize {
        debug_assert_eq!(descriptor.len(), self.dims.len());
        let mut multi = Vec::with_capacity(self.dims.len());
        for (&v, &n) in descriptor.iter().zip(&self.dims) {
            let v = v.max(F::zero()).min(F::one());
            let idx = (v * F::from(n).unwrap()).floor().to_usize().unwrap_or(0);
            multi.push(idx.min(n - 1));
        }
        self.flatten(&multi)
    }

    /// Flat indices of the up-to-`2D` axis-adjacent neighbours of a bin.
    pub fn axis_neighbors(&self, flat: usize) -> Vec<usize> {
        let multi = self.unflatten(flat);
        let mut out = Vec::with_capacity(2 * self.dims.len());
        for axis in 0..self.dims.len() {
            let mut m = multi.clone();
            if multi[axis] > 0 {
                m[axis] = multi[axis] - 1;
                out.push(self.flatten(&m));
            }
            if multi[axis] + 1 < self.dims[axis] {
                m[axis] = multi[axis] + 1;
                out.push(self.flatten(&m));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_unflatten_round_trip() {
        let g = GridShape::new(vec![3, 4, 5]);
        for flat in 0..g.total_bins() {
            assert_eq!(g.flatten(&g.unflatten(flat)), flat);
        }
    }

    #[test]
    fn bin_of_clamps_edges() {
        let g = GridShape::uniform(10, 2);
        assert_eq!(g.bin_of(&[0.0, 0.0]), 0);
        assert_eq!(g.bin_of(&[1.0, 1.0]), 99);
        assert_eq!(g.bin_of(&[0.05, 0.95]), 9);
        // values straying outside the cube are clamped in
        assert_eq!(g.bin_of(&[-0.5, 1.5]), 9);
    }

    #[test]
    fn axis_neighbors_on_boundary_and_interior() {
        let g = GridShape::uniform(3, 2);
        // corner (0,0) has two neighbours
        let mut n = g.axis_neighbors(g.flatten(&[0, 0]));
        n.sort_unstable();
        assert_eq!(n, vec![g.flatten(&[0, 1]), g.flatten(&[1, 0])]);
        // interior (1,1) has four
        assert_eq!(g.axis_neighbors(g.flatten(&[1, 1])).len(), 4);
    }
}
