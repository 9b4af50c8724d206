//! Compressed sparse row storage for symmetric matrices.
//!
//! Both triangles are stored, so a row slice is the full neighbourhood of a
//! node. Column indices within a row are strictly increasing.

use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SymCsr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SymCsr {
    /// Builds from upper-or-lower triangle entries `(i, j, v)`; diagonal
    /// entries are stored once. Each pair must appear once; callers deduplicate.
    pub(crate) fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in pairs {
            counts[i + 1] += 1;
            if i != j {
                counts[j + 1] += 1;
            }
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let indptr = counts.clone();
        let nnz = indptr[n];
        let mut cursor = counts;
        let mut indices = vec![0u32; nnz];
        let mut values = vec![0f64; nnz];
        for &(i, j, v) in pairs {
            let mirrored: &[(usize, usize)] = if i == j { &[(i, j)] } else { &[(i, j), (j, i)] };
            for &(a, b) in mirrored {
                let slot = cursor[a];
                indices[slot] = b as u32;
                values[slot] = v;
                cursor[a] += 1;
            }
        }
        let mut m = SymCsr { n, indptr, indices, values };
        m.sort_rows();
        m
    }

    fn sort_rows(&mut self) {
        for i in 0..self.n {
            let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
            let mut row: Vec<(u32, f64)> =
                self.indices[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.indices[lo + k] = c;
                self.values[lo + k] = v;
            }
        }
    }

    pub fn empty(n: usize) -> Self {
        SymCsr { n, indptr: vec![0; n + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries, counting both triangles.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (idx, val) = self.row(i);
        idx.binary_search(&(j as u32)).ok().map(|k| val[k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_some()
    }

    /// Upper-triangle entries `(i, j, v)` with `i < j`.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row_iter(i).filter(move |&(j, _)| j > i).map(move |(j, v)| (i, j, v)))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Same sparsity pattern, values replaced entrywise.
    pub(crate) fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SymCsr {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            for (j, v) in self.row_iter(i) {
                values.push(f(i, j, v));
            }
        }
        SymCsr { n: self.n, indptr: self.indptr.clone(), indices: self.indices.clone(), values }
    }

    /// Dense sub-matrix on `rows × cols`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut position = vec![usize::MAX; self.n];
        for (k, &c) in cols.iter().enumerate() {
            position[c] = k;
        }
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row_iter(i) {
                let k = position[j];
                if k != usize::MAX {
                    out[(r, k)] = v;
                }
            }
        }
        out
    }

    /// `X S` for a dense `X` with one column per row of `S`. Columns of a
    /// column-major matrix are contiguous, so this walks `S` row by row.
    pub(crate) fn left_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let u = x.nrows();
        let mut out = DMatrix::zeros(u, x.ncols());
        if u == 0 {
            return out;
        }
        let src = x.as_slice();
        for (a, col) in out.as_mut_slice().chunks_mut(u).enumerate() {
            for (b, v) in self.row_iter(a) {
                let xb = &src[b * u..(b + 1) * u];
                col.iter_mut().zip(xb).for_each(|(o, x)| *o += v * x);
            }
        }
        out
    }

    /// `Σ_{(a,b) stored} s_ab ⟨x_a, y_b⟩` over columns of `x` and `y`.
    pub(crate) fn bilinear(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let u = x.nrows();
        if u == 0 {
            return 0.0;
        }
        let (xs, ys) = (x.as_slice(), y.as_slice());
        let mut total = 0.0;
        for a in 0..self.n {
            let xa = &xs[a * u..(a + 1) * u];
            for (b, v) in self.row_iter(a) {
                let yb = &ys[b * u..(b + 1) * u];
                total += v * xa.iter().zip(yb).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        total
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.n).collect();
        self.submatrix(&all, &all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stores_both_triangles_sorted() {
        let m = SymCsr::from_pairs(4, &[(2, 0, 1.5), (0, 1, 2.0), (3, 2, 0.5)]);
        assert_eq!(m.nnz(), 6);
        assert_eq!(m.row(0).0, &[1, 2]);
        assert_eq!(m.get(2, 0), Some(1.5));
        assert_eq!(m.get(0, 3), None);
        let d = m.to_dense();
        assert_eq!(d, d.transpose());
        assert_eq!(m.upper().count(), 3);
    }

    #[test]
    fn products_match_dense() {
        let m = SymCsr::from_pairs(3, &[(0, 1, 2.0), (1, 2, -1.0), (2, 2, 4.0)]);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]);
        let y = DMatrix::from_row_slice(2, 3, &[0.5, 1.0, -2.0, 1.0, 1.0, 1.0]);
        let d = m.to_dense();
        assert_eq!(m.left_mul(&x), &x * &d);
        let expected = (x.transpose() * &y).component_mul(&d).sum();
        assert!((m.bilinear(&x, &y) - expected).abs() < 1e-12);
    }
}
