use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PmiMatrix;
use crate::seed::{self, tag};

/// Random split of the non-landmark nodes into `s` subsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetPlan {
    /// Node ids per subset, ascending within each subset.
    pub subsets: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SubsetPlan {
    /// Uniformly random split of `nodes` into `s` subsets whose sizes differ by at most one.
    pub fn split(nodes: &[usize], s: usize, seed: u64) -> Result<Self> {
        if s == 0 || nodes.len() < s {
            return Err(Error::TooManySubsets { requested: s, available: nodes.len() });
        }
        let mut shuffled = nodes.to_vec();
        shuffled.shuffle(&mut seed::rng(seed, tag::SUBSETS, 0));
        let (base, extra) = (nodes.len() / s, nodes.len() % s);
        let mut subsets = Vec::with_capacity(s);
        let mut start = 0;
        for i in 0..s {
            let len = base + usize::from(i < extra);
            let mut subset = shuffled[start..start + len].to_vec();
            subset.sort_unstable();
            subsets.push(subset);
            start += len;
        }
        Ok(SubsetPlan { subsets, seed })
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Splits every node of `0..n` outside `landmark_ids` into `s` subsets.
pub fn partition_subsets(n: usize, landmark_ids: &[usize], s: usize, seed: u64) -> Result<SubsetPlan> {
    let mut is_landmark = vec![false; n];
    for &l in landmark_ids {
        is_landmark[l] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| !is_landmark[v]).collect();
    SubsetPlan::split(&rest, s, seed)
}

/// Dense tiles of a PMI matrix under a landmark/subset split. Meant for
/// small instances and as a reference for the sparse solver.
#[derive(Clone, Debug)]
pub struct BlockView {
    pub m00: DMatrix<f64>,
    /// `M^{i0}`: subset rows × landmark columns.
    pub row_landmark: Vec<DMatrix<f64>>,
    /// `M^{0i}`: landmark rows × subset columns.
    pub landmark_col: Vec<DMatrix<f64>>,
    /// `M^{ij}` for every ordered pair, including `i = j`.
    pub pairs: Vec<Vec<DMatrix<f64>>>,
}

pub fn build_blocks(pmi: &PmiMatrix, plan: &SubsetPlan, landmarks: &[usize]) -> Result<BlockView> {
    let m = pmi.matrix();
    let covered = landmarks.len() + plan.subsets.iter().map(Vec::len).sum::<usize>();
    if covered != m.dim() {
        return Err(Error::LengthMismatch(covered, m.dim()));
    }
    Ok(BlockView {
        m00: m.submatrix(landmarks, landmarks),
        row_landmark: plan.subsets.iter().map(|s| m.submatrix(s, landmarks)).collect(),
        landmark_col: plan.subsets.iter().map(|s| m.submatrix(landmarks, s)).collect(),
        pairs: plan.subsets.iter().map(|a| plan.subsets.iter().map(|b| m.submatrix(a, b)).collect()).collect(),
    })
}

/// How the cross-subset blocks are tied to the link matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coupling {
    /// `M^{ij} ≈ P^i M00 Q^j`: each block through its own row and column factors.
    Symmetric,
    /// `M^{ij} ≈ P^i M00 Q^i` and `M^{ji} ≈ P^j M00 Q^i`; only defined for equal subset sizes.
    AsPrinted,
}

fn sq_residual(target: &DMatrix<f64>, model: &DMatrix<f64>, context: &'static str) -> Result<f64> {
    if target.shape() != model.shape() {
        return Err(Error::ShapeMismatch { context, expected: target.shape(), found: model.shape() });
    }
    Ok((target - model).norm_squared())
}

fn check_factor_shapes(view: &BlockView, i: usize, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<()> {
    let n_i = view.row_landmark[i].nrows();
    let u = view.m00.nrows();
    if p.shape() != (n_i, u) {
        return Err(Error::ShapeMismatch { context: "P", expected: (n_i, u), found: p.shape() });
    }
    if q.shape() != (u, n_i) {
        return Err(Error::ShapeMismatch { context: "Q", expected: (u, n_i), found: q.shape() });
    }
    Ok(())
}

/// `‖M^{ii} − P M00 Q‖² + ‖M^{0i} − M00 Q‖² + ‖M^{i0} − P M00‖²`.
pub fn intra_loss(view: &BlockView, i: usize, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    check_factor_shapes(view, i, p, q)?;
    let k = &view.m00;
    let kq = k * q;
    Ok(sq_residual(&view.pairs[i][i], &(p * &kq), "M^ii")?
        + sq_residual(&view.landmark_col[i], &kq, "M^0i")?
        + sq_residual(&view.row_landmark[i], &(p * k), "M^i0")?)
}

/// Cross-subset loss summed over unordered pairs `i < j`.
pub fn inter_loss(view: &BlockView, factors: &[(DMatrix<f64>, DMatrix<f64>)], coupling: Coupling) -> Result<f64> {
    if factors.len() != view.pairs.len() {
        return Err(Error::LengthMismatch(factors.len(), view.pairs.len()));
    }
    for (i, (p, q)) in factors.iter().enumerate() {
        check_factor_shapes(view, i, p, q)?;
    }
    let k = &view.m00;
    let mut total = 0.0;
    for i in 0..factors.len() {
        for j in i + 1..factors.len() {
            let (pi, qi) = &factors[i];
            let (pj, qj) = &factors[j];
            let (first, second) = match coupling {
                Coupling::Symmetric => (pi * k * qj, pj * k * qi),
                Coupling::AsPrinted => (pi * k * qi, pj * k * qi),
            };
            total += sq_residual(&view.pairs[i][j], &first, "M^ij")?;
            total += sq_residual(&view.pairs[j][i], &second, "M^ji")?;
        }
    }
    Ok(total)
}
