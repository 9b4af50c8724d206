//! Selective embedding updating.
//!
//! Each node gets a change score over the window `t−1, t, t+1`: how far its
//! adjacency row at `t` sits from the window average, plus how far its
//! nearest cluster center at `t` sits from the window-averaged nearest
//! center. The top `⌈μn⌉` scores are dynamic; the rest may keep their
//! embeddings from `t − 1`.
//!
//! The printed center term `‖(w_t − θ_t) − (w_t − θ̄)‖²` telescopes to
//! `‖θ̄ − θ_t‖²`, which is what is computed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factorization::SolverOptions;
use crate::graph::{PmiMatrix, Snapshot};
use crate::landmarks::{refine_landmark_factors, Centers, LandmarkBcr, LandmarkFactors, SparseRows};

/// Change score of a single node from dense window rows. Index 1 is the
/// current timestamp and must be present; missing neighbors are dropped
/// from the averages.
pub fn change_score(rows: [Option<&[f64]>; 3], centers: [Option<&[f64]>; 3]) -> f64 {
    fn deviation(window: [Option<&[f64]>; 3]) -> f64 {
        let current = window[1].expect("current timestamp is required");
        let present: Vec<&[f64]> = window.iter().flatten().copied().collect();
        let m = present.len() as f64;
        (0..current.len())
            .map(|j| {
                let mean = present.iter().map(|r| r[j]).sum::<f64>() / m;
                (current[j] - mean).powi(2)
            })
            .sum()
    }
    deviation(rows) + deviation(centers)
}

/// Inputs for scoring every node of snapshot `t`.
#[derive(Clone, Copy, Debug)]
pub struct ChangeWindow<'a> {
    /// Snapshots `t−1, t, t+1`; index 1 is required.
    pub snapshots: [Option<&'a Snapshot>; 3],
    /// PMI matrix at `t`; nearest centers are looked up for its rows.
    pub pmi: &'a PmiMatrix,
    /// Temporal K-means centers at `t−1, t, t+1`; index 1 is required.
    pub centers: [Option<&'a Centers>; 3],
}

/// `Δε` for every node.
pub fn node_change_scores(window: ChangeWindow<'_>) -> Result<Vec<f64>> {
    let current = window.snapshots[1].ok_or(Error::InvalidConfig("window needs the current snapshot".into()))?;
    let center_now = window.centers[1].ok_or(Error::InvalidConfig("window needs the current centers".into()))?;
    let n = current.node_count();
    for s in window.snapshots.iter().flatten() {
        if s.node_count() != n {
            return Err(Error::NodeCountMismatch { expected: n, found: s.node_count() });
        }
    }
    let snaps: Vec<&Snapshot> = window.snapshots.iter().flatten().copied().collect();
    let m = snaps.len() as f64;

    // Topological term via a scratch accumulator over each node's neighbourhood.
    let mut scratch = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut topo = vec![0.0; n];
    for (a, score) in topo.iter_mut().enumerate() {
        for s in &snaps {
            for (b, w) in s.adjacency().row_iter(a) {
                if scratch[b] == 0.0 {
                    touched.push(b);
                }
                scratch[b] += w / m;
            }
        }
        let own: Vec<(usize, f64)> = current.adjacency().row_iter(a).collect();
        let mut total = 0.0;
        for &(b, w) in &own {
            total += (w - scratch[b]).powi(2);
            scratch[b] = f64::NAN;
        }
        for &b in &touched {
            if !scratch[b].is_nan() {
                total += scratch[b].powi(2);
            }
            scratch[b] = 0.0;
        }
        touched.clear();
        *score = total;
    }

    // Center term: nearest center per available timestamp, then
    // ‖θ̄ − θ_t‖² expanded over a Gram matrix of all centers involved.
    let rows = SparseRows::from_pmi(window.pmi, &(0..n).collect::<Vec<_>>());
    let sets: Vec<&Centers> = window.centers.iter().flatten().copied().collect();
    let now_index = window.centers[..1].iter().flatten().count();
    let mut offsets = vec![0];
    for c in &sets {
        offsets.push(offsets.last().unwrap() + c.len());
    }
    let all: Vec<&Vec<f64>> = sets.iter().flat_map(|c| c.vectors.iter()).collect();
    let gram = DMatrix::from_fn(all.len(), all.len(), |i, j| all[i].iter().zip(all[j]).map(|(x, y)| x * y).sum::<f64>());
    debug_assert!(std::ptr::eq(sets[now_index], center_now));
    let mut scores = topo;
    for (a, score) in scores.iter_mut().enumerate() {
        let picks: Vec<usize> = sets.iter().enumerate().map(|(s, c)| offsets[s] + c.nearest(&rows, a).0).collect();
        let now = picks[now_index];
        // θ̄ − θ_t = Σ_s (θ_s − θ_t) / m
        let mut sq = 0.0;
        for &x in &picks {
            for &y in &picks {
                sq += gram[(x, y)] - gram[(x, now)] - gram[(now, y)] + gram[(now, now)];
            }
        }
        *score += (sq / (picks.len() as f64).powi(2)).max(0.0);
    }
    Ok(scores)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangeSplit {
    /// High-change nodes, by decreasing score.
    pub dynamic: Vec<usize>,
    /// Ascending node ids.
    pub fixed: Vec<usize>,
}

/// Top `⌈μn⌉` scores form the dynamic set; ties at the cut go to the lower
/// node id.
pub fn split_dynamic_static(scores: &[f64], mu: f64) -> Result<ChangeSplit> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidConfig(format!("μ = {mu} outside [0, 1]")));
    }
    let n = scores.len();
    let take = ((mu * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let dynamic = order[..take].to_vec();
    let mut fixed = order[take..].to_vec();
    fixed.sort_unstable();
    Ok(ChangeSplit { dynamic, fixed })
}

/// Landmark factors of the previous timestamp, keyed by node id.
#[derive(Clone, Copy, Debug)]
pub struct PreviousLandmarks<'a> {
    pub node_ids: &'a [usize],
    pub phi: &'a DMatrix<f64>,
    pub psi: &'a DMatrix<f64>,
}

/// Refits `M00 ≈ ΦΨ` while copying the `Φ` row and `Ψ` column of every
/// landmark flagged static (and present at `t − 1`) bit-exactly from the
/// previous factors. Previous factors narrower than `init` are padded with
/// zeros in the new columns.
pub fn factorize_landmarks_selective(
    m00: &DMatrix<f64>,
    landmark_ids: &[usize],
    init: (DMatrix<f64>, DMatrix<f64>),
    prev: Option<PreviousLandmarks<'_>>,
    is_static: &[bool],
    bcr: Option<LandmarkBcr>,
    opts: SolverOptions,
) -> Result<LandmarkFactors> {
    let prev = prev.ok_or(Error::MissingPrevFactors)?;
    let (mut phi, mut psi) = init;
    let u = landmark_ids.len();
    if is_static.len() != u || phi.nrows() != u {
        return Err(Error::LengthMismatch(is_static.len(), u));
    }
    let r = phi.ncols();
    let r_prev = prev.phi.ncols();
    if r_prev > r {
        return Err(Error::ShapeMismatch { context: "previous Φ", expected: (prev.phi.nrows(), r), found: prev.phi.shape() });
    }
    let position: std::collections::HashMap<usize, usize> = prev.node_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut frozen = vec![false; u];
    for (l, &node) in landmark_ids.iter().enumerate() {
        let Some(&p) = position.get(&node).filter(|_| is_static[l]) else { continue };
        frozen[l] = true;
        for j in 0..r {
            phi[(l, j)] = if j < r_prev { prev.phi[(p, j)] } else { 0.0 };
            psi[(j, l)] = if j < r_prev { prev.psi[(j, p)] } else { 0.0 };
        }
    }
    refine_landmark_factors(m00, phi, psi, Some(&frozen), bcr, opts)
}
