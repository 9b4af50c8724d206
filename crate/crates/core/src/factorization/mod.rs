//! Constrained factorization of PMI matrices.
//!
//! The separated form splits the non-landmark nodes into subsets and fits
//! every block of `M_t` through the shared landmark block `M00`:
//! `M^{i0} ≈ P^i M00`, `M^{0j} ≈ M00 Q^j` and `M^{ij} ≈ P^i M00 Q^j`. Node
//! embeddings are `C^i = P^i Φ`, where `M00 ≈ ΦΨ` is the landmark
//! factorization.

mod baseline;
mod blocks;
mod separated;

pub use baseline::{baseline_temporal_mf, factorize_snapshot, BaselineFactors};
pub use blocks::{build_blocks, inter_loss, intra_loss, partition_subsets, BlockView, Coupling, SubsetPlan};
pub use separated::{SeparatedInputs, SeparatedProblem, SeparatedSolution};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration controls shared by the alternating solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when a sweep lowers the objective by less than this fraction.
    pub tol: f64,
    pub max_iter: usize,
    /// Projected-gradient steps per block and sweep.
    pub inner_steps: usize,
    /// Run independent subset updates on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-5, max_iter: 200, inner_steps: 3, parallel: false }
    }
}

/// Euclidean projection of `v` onto the probability simplex, in place.
pub fn simplex_project(v: &mut [f64]) {
    match v.len() {
        0 => return,
        1 => {
            v[0] = 1.0;
            return;
        }
        _ => {}
    }
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 4.0 * f64::EPSILON * v.len() as f64 {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if x - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Projects every row of `m` onto the simplex.
pub fn project_rows_to_simplex(m: &mut DMatrix<f64>) {
    let mut row = vec![0.0; m.ncols()];
    for i in 0..m.nrows() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[(i, j)];
        }
        simplex_project(&mut row);
        for (j, &x) in row.iter().enumerate() {
            m[(i, j)] = x;
        }
    }
}

/// Projects every column of `m` onto the simplex (columns are contiguous).
pub(crate) fn project_columns_to_simplex(m: &mut DMatrix<f64>) {
    let rows = m.nrows();
    if rows == 0 {
        return;
    }
    for col in m.as_mut_slice().chunks_mut(rows) {
        simplex_project(col);
    }
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix, by power
/// iteration with a small safety margin.
pub fn lambda_max(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    v /= v.norm();
    let mut estimate = 0.0;
    for _ in 0..100 {
        let w = h * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - estimate).abs() <= 1e-6 * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    // Power iteration approaches from below; the line searches absorb the rest.
    estimate.max(0.0) * 1.05
}

/// `C = PΦ`, with rows guarded back onto the simplex. A no-op guard when the
/// rows of `P` and `Φ` are already on the simplex.
pub fn assemble_embeddings(p: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p.ncols() != phi.nrows() {
        return Err(Error::ShapeMismatch { context: "assemble_embeddings", expected: (p.nrows(), phi.nrows()), found: p.shape() });
    }
    let mut c = p * phi;
    for mut row in c.row_iter_mut() {
        let sum: f64 = row.sum();
        if row.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            let mut v: Vec<f64> = row.iter().copied().collect();
            simplex_project(&mut v);
            row.iter_mut().zip(v).for_each(|(x, y)| *x = y);
        }
    }
    Ok(c)
}

/// Row-wise argmax with ties to the lowest column.
pub fn row_argmax(c: &DMatrix<f64>) -> Vec<u32> {
    c.row_iter()
        .map(|row| {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (j, &x) in row.iter().enumerate() {
                if x > best.1 {
                    best = (j, x);
                }
            }
            best.0 as u32
        })
        .collect()
}
