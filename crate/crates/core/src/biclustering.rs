//! Bi-clustering regularization.
//!
//! A non-negative embedding `C` (nodes × features) defines the bipartite
//! graph `S = [[0, C], [Cᵀ, 0]]`. The multiplicity of the eigenvalue 0 of its
//! normalized Laplacian `L = I − D^{-1/2} S D^{-1/2}` equals the number of
//! connected components, so driving the `k` smallest eigenvalues to zero
//! pushes `C` towards `k` pure blocks. The penalty is the Ky Fan form
//! `Tr(Fᵀ L F)` with `F` orthonormal.
//!
//! `L` is never formed in the solver. With `B = D_r^{-1/2} C D_c^{-1/2}`,
//! every singular triple `(σ, u, v)` of `B` gives the eigenpair
//! `(1 − σ, [u; v] / √2)` of `L`, so the `k` smallest eigenvectors come from
//! the eigen-decomposition of the small `BᵀB`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Added to zero degrees so that `D^{-1/2}` exists.
pub const DEGREE_EPS: f64 = 1e-12;

const DENSE_FALLBACK_LIMIT: usize = 2000;

fn regularized(d: f64) -> f64 {
    if d > 0.0 {
        d
    } else {
        DEGREE_EPS
    }
}

fn degrees(c: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let rows = c.row_iter().map(|r| regularized(r.sum())).collect();
    let cols = c.column_iter().map(|col| regularized(col.sum())).collect();
    (rows, cols)
}

/// Dense normalized Laplacian of the bipartite graph built from `c`.
pub fn bipartite_laplacian(c: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = c.shape();
    let (dr, dc) = degrees(c);
    let dim = n + r;
    let mut l = DMatrix::identity(dim, dim);
    for a in 0..n {
        for j in 0..r {
            let v = c[(a, j)] / (dr[a] * dc[j]).sqrt();
            l[(a, n + j)] -= v;
            l[(n + j, a)] -= v;
        }
    }
    l
}

/// Orthonormal eigenvectors of the `k` smallest eigenvalues of a symmetric
/// matrix, with those eigenvalues in ascending order.
pub fn smallest_eigvecs(l: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = l.nrows();
    if l.ncols() != dim || k > dim {
        return Err(Error::ShapeMismatch { context: "smallest_eigvecs", expected: (dim, dim), found: (l.ncols(), k) });
    }
    let eig = SymmetricEigen::try_new(l.clone(), 1e-14, 0).ok_or(Error::ConvergenceFailure(dim))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let f = DMatrix::from_fn(dim, k, |row, col| eig.eigenvectors[(row, order[col])]);
    Ok((values, f))
}

/// Per-subset regularizer state: the eigenvector block `F` and the degrees of
/// `S` at the time `F` was computed (held fixed for gradient steps).
#[derive(Clone, Debug)]
pub struct BcrContext {
    pub k: usize,
    pub f: DMatrix<f64>,
    pub row_degrees: Vec<f64>,
    pub col_degrees: Vec<f64>,
}

impl BcrContext {
    /// Recomputes `F` as the `k` smallest eigenvectors of `L_S(c)`.
    pub fn refresh(c: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, r) = c.shape();
        if k > n + r {
            return Err(Error::ShapeMismatch { context: "bcr k", expected: (n + r, 1), found: (k, 1) });
        }
        let (row_degrees, col_degrees) = degrees(c);
        let f = match spectral_block(c, &row_degrees, &col_degrees, k) {
            Some(f) => f,
            None if n + r <= DENSE_FALLBACK_LIMIT => smallest_eigvecs(&bipartite_laplacian(c), k)?.1,
            None => return Err(Error::ConvergenceFailure(n + r)),
        };
        Ok(BcrContext { k, f, row_degrees, col_degrees })
    }

    pub fn value(&self, c: &DMatrix<f64>) -> Result<f64> {
        bcr_value(c, &self.f)
    }

    /// Frozen-degree gradient; independent of the current `C`.
    pub fn gradient(&self, shape: (usize, usize)) -> Result<DMatrix<f64>> {
        frozen_gradient(&self.f, &self.row_degrees, &self.col_degrees, shape)
    }
}

/// `k` smallest eigenvectors via the singular vectors of `B`. A vanishing
/// singular value contributes `[0; v]`, an eigenvector of eigenvalue 1.
/// `None` when `k > r`, where the null space of `Bᵀ` would be needed.
fn spectral_block(c: &DMatrix<f64>, dr: &[f64], dc: &[f64], k: usize) -> Option<DMatrix<f64>> {
    let (n, r) = c.shape();
    if k > r {
        return None;
    }
    let b = DMatrix::from_fn(n, r, |a, j| c[(a, j)] / (dr[a] * dc[j]).sqrt());
    let gram = b.tr_mul(&b);
    let eig = SymmetricEigen::try_new(gram, 1e-15, 0)?;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let mut f = DMatrix::zeros(n + r, k);
    for (col, &idx) in order[..k].iter().enumerate() {
        let sigma = eig.eigenvalues[idx].max(0.0).sqrt();
        let v = eig.eigenvectors.column(idx);
        if sigma < 1e-8 {
            for j in 0..r {
                f[(n + j, col)] = v[j];
            }
            continue;
        }
        let u: DVector<f64> = &b * v / sigma;
        for a in 0..n {
            f[(a, col)] = u[a] / std::f64::consts::SQRT_2;
        }
        for j in 0..r {
            f[(n + j, col)] = v[j] / std::f64::consts::SQRT_2;
        }
    }
    Some(f)
}

fn check_f(c: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<()> {
    let dim = c.nrows() + c.ncols();
    if f.nrows() != dim {
        return Err(Error::ShapeMismatch { context: "bcr F", expected: (dim, f.ncols()), found: f.shape() });
    }
    Ok(())
}

/// `Tr(Fᵀ L_S F)` with the degrees of the current `c`.
pub fn bcr_value(c: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<f64> {
    check_f(c, f)?;
    let (n, r) = c.shape();
    let (dr, dc) = degrees(c);
    let fr = f.rows(0, n);
    let fc = f.rows(n, r);
    // Tr(FᵀF) − 2 Σ_{a,j} c_aj ⟨f_a, g_j⟩ / √(d_a d_j)
    let cross = fr * fc.transpose();
    let mut coupling = 0.0;
    for j in 0..r {
        for a in 0..n {
            let w = c[(a, j)];
            if w != 0.0 {
                coupling += w * cross[(a, j)] / (dr[a] * dc[j]).sqrt();
            }
        }
    }
    Ok(f.norm_squared() - 2.0 * coupling)
}

/// Gradient of `½ Σ_{u,v} s_uv ‖f_u/√d_u − f_v/√d_v‖²` with respect to `C`
/// at frozen degrees. Each `c_aj` appears as both `s_{a,j}` and `s_{j,a}`,
/// so the entry is `‖f_a/√d_a − g_j/√d_j‖²`.
pub fn bcr_gradient(c: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_f(c, f)?;
    let (dr, dc) = degrees(c);
    frozen_gradient(f, &dr, &dc, c.shape())
}

fn frozen_gradient(f: &DMatrix<f64>, dr: &[f64], dc: &[f64], (n, r): (usize, usize)) -> Result<DMatrix<f64>> {
    if dr.len() != n || dc.len() != r || f.nrows() != n + r {
        return Err(Error::ShapeMismatch { context: "bcr gradient", expected: (n + r, f.ncols()), found: f.shape() });
    }
    let k = f.ncols();
    let scaled_rows = DMatrix::from_fn(n, k, |a, col| f[(a, col)] / dr[a].sqrt());
    let scaled_cols = DMatrix::from_fn(r, k, |j, col| f[(n + j, col)] / dc[j].sqrt());
    let row_sq: Vec<f64> = scaled_rows.row_iter().map(|x| x.norm_squared()).collect();
    let col_sq: Vec<f64> = scaled_cols.row_iter().map(|x| x.norm_squared()).collect();
    let cross = &scaled_rows * scaled_cols.transpose();
    Ok(DMatrix::from_fn(n, r, |a, j| (row_sq[a] + col_sq[j] - 2.0 * cross[(a, j)]).max(0.0)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_orthonormal(dim: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(dim, k, |_, _| rng.random_range(-1.0..1.0));
        m.qr().q().columns(0, k).into_owned()
    }

    fn zero_count(l: &DMatrix<f64>) -> usize {
        SymmetricEigen::new(l.clone()).eigenvalues.iter().filter(|&&x| x.abs() < 1e-8).count()
    }

    #[test]
    fn identity_has_two_components() {
        let l = bipartite_laplacian(&DMatrix::identity(2, 2));
        assert_eq!(zero_count(&l), 2);
    }

    #[test]
    fn all_ones_has_one_component() {
        let l = bipartite_laplacian(&DMatrix::from_element(2, 2, 1.0));
        assert_eq!(zero_count(&l), 1);
    }

    #[test]
    fn smallest_eigenvalue_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let c = DMatrix::from_fn(7, 3, |_, _| rng.random_range(0.01..1.0));
            let eig = SymmetricEigen::new(bipartite_laplacian(&c));
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min.abs() <= 1e-10, "{min}");
        }
    }

    #[test]
    fn zero_column_is_regularized() {
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let l = bipartite_laplacian(&c);
        assert!(l.iter().all(|v| v.is_finite()));
        assert_eq!(l[(4, 4)], 1.0);
    }

    #[test]
    fn diagonal_examples() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0]));
        let (vals, f) = smallest_eigvecs(&l, 1).unwrap();
        assert_eq!(vals, vec![0.0]);
        assert_abs_diff_eq!(f[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!((f.transpose() * &l * &f).trace(), 0.0, epsilon = 1e-12);
        let (_, f2) = smallest_eigvecs(&l, 2).unwrap();
        assert_abs_diff_eq!((f2.transpose() * &l * &f2).trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_psd_trace_matches_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
        let l = &a * a.transpose();
        let (_, f) = smallest_eigvecs(&l, 3).unwrap();
        let mut all: Vec<f64> = SymmetricEigen::new(l.clone()).eigenvalues.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        let expected: f64 = all[..3].iter().sum();
        assert_abs_diff_eq!((f.transpose() * &l * &f).trace(), expected, epsilon = 1e-8);
    }

    #[test]
    fn spectral_block_matches_dense_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, r, k, zero_cols) in [(9, 4, 2, 0), (12, 5, 5, 0), (6, 6, 3, 0), (7, 6, 5, 3), (2, 5, 4, 0)] {
            let c = DMatrix::from_fn(n, r, |_, j| if j < zero_cols { 0.0 } else { rng.random_range(0.0..1.0) });
            let ctx = BcrContext::refresh(&c, k).unwrap();
            let l = bipartite_laplacian(&c);
            let (vals, _) = smallest_eigvecs(&l, k).unwrap();
            let ftf = ctx.f.transpose() * &ctx.f;
            assert_abs_diff_eq!(ftf, DMatrix::identity(k, k), epsilon = 1e-8);
            let trace = (ctx.f.transpose() * &l * &ctx.f).trace();
            assert_abs_diff_eq!(trace, vals.iter().sum::<f64>(), epsilon = 1e-8);
        }
    }

    #[test]
    fn value_of_identity_with_zero_eigenvectors() {
        let c = DMatrix::identity(3, 3);
        let ctx = BcrContext::refresh(&c, 3).unwrap();
        assert_abs_diff_eq!(ctx.value(&c).unwrap(), 0.0, epsilon = 1e-12);
    }

    /// Dense edge-sum evaluation `½ Σ_{u,v} s_uv ‖f_u/√d_u − f_v/√d_v‖²`.
    pub(crate) fn edge_sum(c: &DMatrix<f64>, f: &DMatrix<f64>, degrees: Option<&[f64]>) -> f64 {
        let (n, r) = c.shape();
        let dim = n + r;
        let mut s = DMatrix::zeros(dim, dim);
        for a in 0..n {
            for j in 0..r {
                s[(a, n + j)] = c[(a, j)];
                s[(n + j, a)] = c[(a, j)];
            }
        }
        let live: Vec<f64> = (0..dim).map(|u| regularized(s.row(u).sum())).collect();
        let d = degrees.unwrap_or(&live);
        let mut total = 0.0;
        for u in 0..dim {
            for v in 0..dim {
                if s[(u, v)] != 0.0 {
                    let diff = f.row(u) / d[u].sqrt() - f.row(v) / d[v].sqrt();
                    total += 0.5 * s[(u, v)] * diff.norm_squared();
                }
            }
        }
        total
    }

    #[test]
    fn value_matches_trace_and_edge_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let c = DMatrix::from_fn(8, 3, |_, _| rng.random_range(0.0..1.0));
            let f = random_orthonormal(11, 2, &mut rng);
            let trace = (f.transpose() * bipartite_laplacian(&c) * &f).trace();
            let value = bcr_value(&c, &f).unwrap();
            assert_abs_diff_eq!(value, trace, epsilon = 1e-10);
            assert_abs_diff_eq!(value, edge_sum(&c, &f, None), epsilon = 1e-10);
        }
    }

    #[test]
    fn value_is_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let c = DMatrix::from_fn(6, 4, |_, _| rng.random_range(0.0..1.0));
        let f = random_orthonormal(10, 3, &mut rng);
        let rot = random_orthonormal(3, 3, &mut rng);
        assert_abs_diff_eq!(bcr_value(&c, &f).unwrap(), bcr_value(&c, &(&f * rot)).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn gradient_is_nonnegative_and_zero_on_aligned_pairs() {
        let c = DMatrix::identity(2, 2);
        // f_u/√d_u equal for node 0 and feature 0.
        let f = DMatrix::from_row_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let g = bcr_gradient(&c, &f).unwrap();
        assert!(g.iter().all(|&x| x >= 0.0));
        assert_abs_diff_eq!(g[(0, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let c = DMatrix::from_fn(6, 3, |_, _| rng.random_range(0.1..1.0));
        let f = random_orthonormal(9, 2, &mut rng);
        let ctx_deg: Vec<f64> = {
            let (dr, dc) = degrees(&c);
            dr.into_iter().chain(dc).collect()
        };
        let g = bcr_gradient(&c, &f).unwrap();
        let h = 1e-6;
        for a in 0..6 {
            for j in 0..3 {
                let (mut plus, mut minus) = (c.clone(), c.clone());
                plus[(a, j)] += h;
                minus[(a, j)] -= h;
                let fd = (edge_sum(&plus, &f, Some(&ctx_deg)) - edge_sum(&minus, &f, Some(&ctx_deg))) / (2.0 * h);
                assert!((fd - g[(a, j)]).abs() <= 1e-4 * fd.abs().max(1e-8), "{fd} vs {}", g[(a, j)]);
            }
        }
    }
}
