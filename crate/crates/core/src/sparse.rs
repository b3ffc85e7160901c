//! Compressed sparse row operators.

use crate::scalar::Real;

/// Square sparse matrix in CSR layout with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dimension: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseOperator<T> {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed in
    /// insertion order, so a fixed triplet order gives bit-identical values.
    pub fn from_triplets(dimension: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dimension + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dimension && c < dimension, "triplet ({r}, {c}) out of range");
            if last == Some((r, c)) {
                let slot = values.last_mut().expect("previous entry");
                *slot = *slot + v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dimension {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dimension,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn zeros(dimension: usize) -> Self {
        Self::from_triplets(dimension, Vec::new())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dimension);
        assert_eq!(y.len(), self.dimension);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc = acc + self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dimension];
        self.apply_into(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[T]) -> T {
        dot(x, &self.apply(x))
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dimension).map(|r| self.get(r, r)).collect()
    }

    pub fn entry_sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.dimension {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.dimension, triplets)
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dimension).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!(self.dimension, other.dimension);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.dimension {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, alpha * v)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        Self::from_triplets(self.dimension, triplets)
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let op = SparseOperator::from_triplets(
            3,
            vec![(0, 0, 1.0), (2, 1, 4.0), (0, 0, 2.0), (1, 2, 4.0), (1, 1, 5.0)],
        );
        assert_eq!(op.get(0, 0), 3.0);
        assert_eq!(op.get(0, 1), 0.0);
        assert_eq!(op.nnz(), 4);
        assert!(op.is_symmetric());
        assert_eq!(op.apply(&[1.0, 1.0, 1.0]), vec![3.0, 9.0, 4.0]);
        assert_eq!(op.diagonal(), vec![3.0, 5.0, 0.0]);
        assert_eq!(op.transpose(), op);
    }

    #[test]
    fn combine_merges_patterns() {
        let a = SparseOperator::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let b = SparseOperator::from_triplets(2, vec![(0, 1, 2.0), (1, 0, 2.0)]);
        let c = a.combine(2.0, &b, -1.0);
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(0, 1), -2.0);
        assert_eq!(c.quadratic_form(&[1.0, 1.0]), 0.0);
        assert!(SparseOperator::<f64>::zeros(4).is_zero());
    }
}
