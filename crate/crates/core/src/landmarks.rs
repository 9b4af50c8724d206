//! Temporal landmark selection and landmark factorization.
//!
//! K-means runs on PMI rows. At `t > 1` every center also has to stay close
//! to the same members' rows at `t − 1`, weighted by `λ`, so the chosen
//! landmarks remain representative across consecutive snapshots.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::biclustering::BcrContext;
use crate::error::{Error, Result};
use crate::factorization::{lambda_max, project_rows_to_simplex, SolverOptions};
use crate::graph::PmiMatrix;
use crate::seed::{self, tag};

/// Rows in CSR layout, a subset of a sparse matrix's rows or a small dense
/// point set.
#[derive(Clone, Debug)]
pub struct SparseRows {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    norms: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut rows = SparseRows { dim, indptr: vec![0], indices: Vec::new(), values: Vec::new(), norms: Vec::new() };
        for p in points {
            assert_eq!(p.len(), dim, "ragged point set");
            rows.push(p.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)));
        }
        rows
    }

    /// Rows `nodes` of a PMI matrix, in the given order.
    pub fn from_pmi(pmi: &PmiMatrix, nodes: &[usize]) -> Self {
        let m = pmi.matrix();
        let mut rows = SparseRows { dim: m.dim(), indptr: vec![0], indices: Vec::new(), values: Vec::new(), norms: Vec::new() };
        for &a in nodes {
            rows.push(m.row_iter(a));
        }
        rows
    }

    fn push(&mut self, entries: impl Iterator<Item = (usize, f64)>) {
        let mut norm = 0.0;
        for (j, v) in entries {
            self.indices.push(j as u32);
            self.values.push(v);
            norm += v * v;
        }
        self.indptr.push(self.indices.len());
        self.norms.push(norm);
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[lo..hi].iter().zip(&self.values[lo..hi]).map(|(&j, &v)| (j as usize, v))
    }

    fn dot(&self, i: usize, center: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * center[j]).sum()
    }

    /// `‖row_i − center‖²` given `‖center‖²`.
    pub fn sq_dist(&self, i: usize, center: &[f64], center_norm: f64) -> f64 {
        (self.norms[i] + center_norm - 2.0 * self.dot(i, center)).max(0.0)
    }

    /// Row `i` as a dense vector.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.row(i).for_each(|(j, x)| v[j] = x);
        v
    }

    fn identical_rows(&self) -> bool {
        let first: Vec<_> = if self.is_empty() { Vec::new() } else { self.row(0).collect() };
        (1..self.len()).all(|i| self.row(i).eq(first.iter().copied()))
    }
}

/// Current rows plus, optionally, the same nodes' rows one snapshot earlier.
#[derive(Clone, Copy, Debug)]
pub struct TemporalRows<'a> {
    pub current: &'a SparseRows,
    pub previous: Option<&'a SparseRows>,
    pub lambda: f64,
}

impl<'a> TemporalRows<'a> {
    pub fn plain(current: &'a SparseRows) -> Self {
        TemporalRows { current, previous: None, lambda: 0.0 }
    }

    fn temporal(&self) -> Option<&'a SparseRows> {
        self.previous.filter(|_| self.lambda > 0.0)
    }

    fn cost(&self, i: usize, center: &[f64], norm: f64) -> f64 {
        let mut c = self.current.sq_dist(i, center, norm);
        if let Some(prev) = self.temporal() {
            c += self.lambda * prev.sq_dist(i, center, norm);
        }
        c
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Centers {
    pub vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl Centers {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        let norms = vectors.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
        Centers { vectors, norms }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn norm_sq(&self, c: usize) -> f64 {
        self.norms[c]
    }

    /// Nearest center to row `i`, ties to the lower index.
    pub fn nearest(&self, rows: &SparseRows, i: usize) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, v) in self.vectors.iter().enumerate() {
            let d = rows.sq_dist(i, v, self.norms[c]);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }
}

/// Closed-form centers for a fixed assignment: the mean of the members'
/// rows, or with a previous snapshot the minimizer of
/// `Σ ‖m_t − θ‖² + λ ‖m_{t−1} − θ‖²`, i.e. `(Σ m_t + λ Σ m_{t−1}) / ((1+λ)|Θ|)`.
pub fn update_centers(rows: TemporalRows<'_>, assignment: &[usize], k: usize) -> Result<Centers> {
    let dim = rows.current.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    let lambda = if rows.temporal().is_some() { rows.lambda } else { 0.0 };
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (j, v) in rows.current.row(i) {
            sums[c][j] += v;
        }
        if let Some(prev) = rows.temporal() {
            for (j, v) in prev.row(i) {
                sums[c][j] += lambda * v;
            }
        }
    }
    for (c, sum) in sums.iter_mut().enumerate() {
        if counts[c] == 0 {
            return Err(Error::EmptyCluster { cluster: c, reseeds: 0 });
        }
        let scale = 1.0 / ((1.0 + lambda) * counts[c] as f64);
        sum.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(Centers::new(sums))
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub centers: Centers,
    pub assignment: Vec<usize>,
    /// Per-row cost to the assigned center.
    pub costs: Vec<f64>,
    pub objective: f64,
    pub trace: Vec<f64>,
}

const MAX_RESEEDS: usize = 3;
const MAX_HALVINGS: usize = 30;

fn plus_plus_init(rows: &SparseRows, k: usize, rng: &mut seed::Rng) -> Centers {
    let n = rows.len();
    let dense = |i: usize| {
        let mut v = vec![0.0; rows.dim()];
        for (j, x) in rows.row(i) {
            v[j] = x;
        }
        v
    };
    let mut chosen = vec![dense(rng.random_range(0..n))];
    let mut centers = Centers::new(chosen.clone());
    let mut d2: Vec<f64> = (0..n).map(|i| rows.sq_dist(i, &centers.vectors[0], centers.norms[0])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(dense(pick));
        centers = Centers::new(chosen.clone());
        let last = chosen.len() - 1;
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(rows.sq_dist(i, &centers.vectors[last], centers.norms[last]));
        }
    }
    centers
}

fn assign(rows: TemporalRows<'_>, centers: &Centers) -> (Vec<usize>, Vec<f64>) {
    (0..rows.current.len())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centers.len() {
                let d = rows.cost(i, &centers.vectors[c], centers.norms[c]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Moves centers of empty clusters onto the costliest row of a cluster that
/// has more than one member.
fn reseed_empty(
    assignment: &mut [usize],
    costs: &mut [f64],
    k: usize,
    reseeds: &mut [usize],
) -> Result<bool> {
    let mut changed = false;
    loop {
        let mut counts = vec![0usize; k];
        assignment.iter().for_each(|&c| counts[c] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return Ok(changed) };
        reseeds[empty] += 1;
        let donor = (0..assignment.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .max_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)));
        match donor {
            Some(i) if reseeds[empty] <= MAX_RESEEDS && costs[i] > 0.0 => {
                assignment[i] = empty;
                costs[i] = 0.0;
                changed = true;
            }
            _ => return Err(Error::EmptyCluster { cluster: empty, reseeds: reseeds[empty] }),
        }
    }
}

fn objective(costs: &[f64]) -> f64 {
    costs.iter().sum()
}

/// One Lloyd run from the given centers. Converges when the relative
/// objective change drops below `1e-6` or after 100 iterations.
fn lloyd(rows: TemporalRows<'_>, k: usize, mut centers: Centers) -> Result<KMeansResult> {
    let (mut assignment, mut costs) = assign(rows, &centers);
    let mut reseeds = vec![0usize; k];
    let mut trace = vec![objective(&costs)];
    for _ in 0..100 {
        reseed_empty(&mut assignment, &mut costs, k, &mut reseeds)?;
        centers = update_centers(rows, &assignment, k)?;
        let (a, c) = assign(rows, &centers);
        assignment = a;
        costs = c;
        let obj = objective(&costs);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if (prev - obj).abs() <= 1e-6 * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // Centers must match the final assignment; an empty cluster here is reseeded once more.
    reseed_empty(&mut assignment, &mut costs, k, &mut reseeds)?;
    centers = update_centers(rows, &assignment, k)?;
    for (i, c) in assignment.iter().enumerate() {
        costs[i] = rows.cost(i, &centers.vectors[*c], centers.norms[*c]);
    }
    let obj = objective(&costs);
    trace.push(obj);
    Ok(KMeansResult { centers, assignment, costs, objective: obj, trace })
}

/// Best of `restarts` seeded Lloyd runs.
pub fn temporal_kmeans(rows: TemporalRows<'_>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    temporal_kmeans_hinted(rows, k, restarts, seed, None)
}

/// [`temporal_kmeans`] with one extra Lloyd run started from the centers of
/// `hint`, a full assignment of the rows. The lowest objective wins.
pub fn temporal_kmeans_hinted(
    rows: TemporalRows<'_>,
    k: usize,
    restarts: usize,
    seed: u64,
    hint: Option<&[usize]>,
) -> Result<KMeansResult> {
    let n = rows.current.len();
    if k == 0 || k > n {
        return Err(Error::InfeasibleParams(format!("cannot form {k} clusters from {n} rows")));
    }
    if let Some(prev) = rows.previous {
        if prev.len() != n {
            return Err(Error::LengthMismatch(n, prev.len()));
        }
    }
    let mut best: Option<KMeansResult> = None;
    let mut last_err = None;
    if let Some(hint) = hint {
        if hint.len() != n || hint.iter().any(|&c| c >= k) {
            return Err(Error::InvalidConfig(format!("hint must assign {n} rows to {k} clusters")));
        }
        // A hint with an empty cluster is skipped; the seeded restarts still run.
        if let Ok(centers) = update_centers(rows, hint, k) {
            match lloyd(rows, k, centers) {
                Ok(res) => best = Some(res),
                Err(e) => last_err = Some(e),
            }
        }
    }
    for restart in 0..restarts.max(1) {
        let mut rng = seed::rng(seed, tag::KMEANS, (k as u64) << 16 | restart as u64);
        match lloyd(rows, k, plus_plus_init(rows.current, k, &mut rng)) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.objective < b.objective) {
                    best = Some(res);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap())
}

/// Picks the `k` maximizing the discrete curvature
/// `SSE(k−1) − 2 SSE(k) + SSE(k+1)` of an SSE curve given for `k = 1..`.
/// Ties go to the smaller `k`.
pub fn elbow_from_sse(sse: &[f64]) -> usize {
    let mut best = (sse.len().min(1), f64::NEG_INFINITY);
    for k in 2..sse.len() {
        let curvature = sse[k - 2] - 2.0 * sse[k - 1] + sse[k];
        if curvature > best.1 {
            best = (k, curvature);
        }
    }
    best.0
}

/// Curvature rule on log SSE, so a knee counts by its relative drop and an
/// early large absolute drop cannot outweigh it. The floor keeps exact fits finite.
fn log_elbow(sse: &[f64]) -> usize {
    let floor = sse.first().map_or(0.0, |&s| s * 1e-12) + f64::MIN_POSITIVE;
    let log_sse: Vec<f64> = sse.iter().map(|&x| x.max(floor).ln()).collect();
    elbow_from_sse(&log_sse)
}

/// Elbow estimate of the cluster count among `2..=k_max`: the curvature rule
/// of [`elbow_from_sse`] applied to the logarithm of the SSE curve. Returns 1
/// when all rows are identical.
pub fn elbow_cluster_count(rows: &SparseRows, k_max: usize, restarts: usize, seed: u64) -> Result<usize> {
    if k_max < 2 {
        return Err(Error::InvalidConfig(format!("k_max must be at least 2, got {k_max}")));
    }
    let n = rows.len();
    if n <= 1 || rows.identical_rows() {
        return Ok(1);
    }
    let k_max = k_max.min(n);
    let top = (k_max + 1).min(n);
    let mut sse = Vec::with_capacity(top);
    for k in 1..=top {
        let res = temporal_kmeans(TemporalRows::plain(rows), k, restarts, seed::derive(seed, tag::ELBOW, k as u64))?;
        // Local minima can make SSE rise with k; the best fit with fewer centers is always attainable.
        let best = sse.last().map_or(res.objective, |&p: &f64| p.min(res.objective));
        sse.push(best);
    }
    // Without SSE(k_max + 1) the curvature at k_max is undefined and k_max − 1 is the last candidate.
    Ok(log_elbow(&sse).clamp(2, k_max))
}

const SUBSPACE_ITERATIONS: usize = 60;
const DIFFUSION_STEPS: i32 = 16;

/// Low-dimensional coordinates of `nodes` for cluster-count estimation.
///
/// Takes the `dim` leading eigenvectors of the lazy normalized operator
/// `(I + D^{-1/2} M D^{-1/2}) / 2` on the PMI submatrix of `nodes`, by
/// subspace iteration with a final Rayleigh–Ritz rotation. Each eigenvector
/// is weighted by its eigenvalue to the power 16, which damps directions
/// without community structure, and rows are scaled to unit length.
pub fn spectral_rows(pmi: &PmiMatrix, nodes: &[usize], dim: usize, seed: u64) -> SparseRows {
    let m = pmi.matrix();
    let n = nodes.len();
    let d = dim.min(n);
    if d == 0 {
        return SparseRows::from_dense(&vec![Vec::new(); n]);
    }
    let mut local = vec![usize::MAX; m.dim()];
    for (i, &a) in nodes.iter().enumerate() {
        local[a] = i;
    }
    let edges: Vec<Vec<(usize, f64)>> = nodes
        .iter()
        .map(|&a| m.row_iter(a).filter(|&(b, _)| local[b] != usize::MAX).map(|(b, v)| (local[b], v)).collect())
        .collect();
    let inv_sqrt: Vec<f64> = edges
        .iter()
        .map(|row| {
            let deg: f64 = row.iter().map(|&(_, v)| v).sum();
            if deg > 0.0 { deg.sqrt().recip() } else { 0.0 }
        })
        .collect();
    let apply = |x: &DMatrix<f64>| {
        let mut y = x * 0.5;
        for c in 0..d {
            let (src, mut dst) = (x.column(c), y.column_mut(c));
            for (i, row) in edges.iter().enumerate() {
                let acc: f64 = row.iter().map(|&(j, v)| v * inv_sqrt[j] * src[j]).sum();
                dst[i] += 0.5 * inv_sqrt[i] * acc;
            }
        }
        y
    };
    let mut rng = seed::rng(seed, tag::SPECTRAL, 0);
    let mut basis = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5).qr().q();
    for _ in 0..SUBSPACE_ITERATIONS {
        basis = apply(&basis).qr().q();
    }
    let projected = basis.tr_mul(&apply(&basis));
    let eig = nalgebra::SymmetricEigen::new((&projected + projected.transpose()) * 0.5);
    let mut coords = basis * &eig.eigenvectors;
    for (c, &mu) in eig.eigenvalues.iter().enumerate() {
        coords.column_mut(c).scale_mut(mu.max(0.0).powi(DIFFUSION_STEPS));
    }
    let points: Vec<Vec<f64>> = coords
        .row_iter()
        .map(|row| {
            let norm = row.norm();
            row.iter().map(|&x| if norm > 0.0 { x / norm } else { 0.0 }).collect()
        })
        .collect();
    SparseRows::from_dense(&points)
}

#[derive(Clone, Debug)]
pub struct LandmarkParams {
    pub lambda: f64,
    pub fraction: f64,
    /// Upper bound on `|U_t|`, applied after the fraction.
    pub max_landmarks: Option<usize>,
    pub restarts: usize,
}

impl Default for LandmarkParams {
    fn default() -> Self {
        LandmarkParams { lambda: 0.2, fraction: 0.5, max_landmarks: None, restarts: 3 }
    }
}

#[derive(Clone, Debug)]
pub struct LandmarkSet {
    /// Landmark node ids in selection order.
    pub node_ids: Vec<usize>,
    pub centers: Centers,
    /// Center index of each landmark, aligned with `node_ids`.
    pub assignment: Vec<usize>,
    /// Center index of every candidate row, aligned with the candidate list.
    pub row_assignment: Vec<usize>,
    pub kmeans_objective: f64,
}

/// Number of landmarks for `n` candidate rows.
pub fn landmark_target(n: usize, params: &LandmarkParams) -> usize {
    let target = (params.fraction * n as f64).floor() as usize;
    params.max_landmarks.map_or(target, |cap| target.min(cap)).min(n)
}

/// Runs temporal K-means with `k` centers over `candidates` (node ids whose
/// rows are in `rows`) and picks the landmarks closest to each center.
///
/// Landmarks are taken round-robin over centers in order of proximity, each
/// row counted only for its own nearest center, so every center contributes
/// `⌊|U|/k⌋` or `⌈|U|/k⌉` landmarks whenever its cluster is large enough.
pub fn select_landmarks(
    rows: TemporalRows<'_>,
    candidates: &[usize],
    k: usize,
    params: &LandmarkParams,
    seed: u64,
) -> Result<LandmarkSet> {
    select_landmarks_hinted(rows, candidates, k, params, seed, None)
}

/// [`select_landmarks`] whose K-means also tries a start from `hint`.
pub fn select_landmarks_hinted(
    rows: TemporalRows<'_>,
    candidates: &[usize],
    k: usize,
    params: &LandmarkParams,
    seed: u64,
    hint: Option<&[usize]>,
) -> Result<LandmarkSet> {
    let n = rows.current.len();
    if candidates.len() != n {
        return Err(Error::LengthMismatch(candidates.len(), n));
    }
    if !(params.fraction > 0.0 && params.fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("landmark fraction {} outside (0, 1]", params.fraction)));
    }
    let target = landmark_target(n, params);
    if target < k {
        return Err(Error::InfeasibleParams(format!("{target} landmarks cannot cover {k} clusters")));
    }
    let km = temporal_kmeans_hinted(rows, k, params.restarts, seed, hint)?;
    let mut members: Vec<Vec<(f64, usize)>> = vec![Vec::new(); k];
    for (i, &c) in km.assignment.iter().enumerate() {
        let d = rows.current.sq_dist(i, &km.centers.vectors[c], km.centers.norm_sq(c));
        members[c].push((d, i));
    }
    let mut ranked: Vec<(usize, f64, usize)> = Vec::with_capacity(n);
    for list in &mut members {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.extend(list.iter().enumerate().map(|(rank, &(d, i))| (rank, d, i)));
    }
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let chosen: Vec<usize> = ranked.into_iter().take(target).map(|(_, _, i)| i).collect();
    Ok(LandmarkSet {
        node_ids: chosen.iter().map(|&i| candidates[i]).collect(),
        assignment: chosen.iter().map(|&i| km.assignment[i]).collect(),
        row_assignment: km.assignment,
        centers: km.centers,
        kmeans_objective: km.objective,
    })
}

#[derive(Clone, Debug)]
pub struct LandmarkFactors {
    /// `|U| × r`, rows on the probability simplex.
    pub phi: DMatrix<f64>,
    /// `r × |U|`, nonnegative.
    pub psi: DMatrix<f64>,
    /// Loss after initialization and after each outer iteration.
    pub trace: Vec<f64>,
}

impl LandmarkFactors {
    pub fn loss(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

pub(crate) fn landmark_loss(m00: &DMatrix<f64>, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    (m00 - phi * psi).norm_squared()
}

/// Alternating projected gradient on `‖M00 − ΦΨ‖²` from a random feasible
/// start: `Φ` rows uniform on the simplex, `Ψ` absolute Gaussian.
pub fn factorize_landmarks(m00: &DMatrix<f64>, r: usize, opts: SolverOptions, seed: u64) -> Result<LandmarkFactors> {
    let u = m00.nrows();
    if m00.ncols() != u {
        return Err(Error::ShapeMismatch { context: "M00", expected: (u, u), found: m00.shape() });
    }
    if r == 0 || r > u {
        return Err(Error::InfeasibleParams(format!("rank {r} not in 1..={u}")));
    }
    let mut rng = seed::rng(seed, tag::LANDMARK_FACTORS, 0);
    let normal = rand_distr::StandardNormal;
    let mut phi = DMatrix::from_fn(u, r, |_, _| rng.random::<f64>());
    project_rows_to_simplex(&mut phi);
    let scale = (m00.norm_squared() / (u * u) as f64).sqrt().max(1e-3);
    let psi = DMatrix::from_fn(r, u, |_, _| scale * rng.sample::<f64, _>(normal).abs());
    refine_landmark_factors(m00, phi, psi, None, None, opts)
}

/// Bi-clustering penalty on the landmark embeddings `Φ`, which are the
/// landmark block's rows of `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandmarkBcr {
    pub beta: f64,
    pub k: usize,
}

/// Alternating projected gradient from the given start. Rows of `Φ` and
/// columns of `Ψ` flagged in `frozen` are never written. With `bcr` the
/// `Φ`-step also carries `β·Tr(FᵀL_S F)`, with `F` refreshed after every
/// outer iteration; frozen rows still enter the penalty.
pub fn refine_landmark_factors(
    m00: &DMatrix<f64>,
    mut phi: DMatrix<f64>,
    mut psi: DMatrix<f64>,
    frozen: Option<&[bool]>,
    bcr: Option<LandmarkBcr>,
    opts: SolverOptions,
) -> Result<LandmarkFactors> {
    let u = m00.nrows();
    if phi.nrows() != u || psi.ncols() != u || phi.ncols() != psi.nrows() {
        return Err(Error::ShapeMismatch { context: "landmark factors", expected: (u, phi.ncols()), found: psi.shape() });
    }
    if m00.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteLoss("landmark block"));
    }
    let r = phi.ncols();
    let bcr = bcr.filter(|b| b.beta > 0.0 && u > 0);
    let refresh = |phi: &DMatrix<f64>| -> Result<Option<BcrContext>> {
        bcr.map(|b| BcrContext::refresh(phi, b.k.min(u + r))).transpose()
    };
    let penalty = |ctx: &Option<BcrContext>, phi: &DMatrix<f64>| -> Result<f64> {
        match (ctx, bcr) {
            (Some(ctx), Some(b)) => Ok(b.beta * ctx.value(phi)?),
            _ => Ok(0.0),
        }
    };
    let is_frozen = |i: usize| frozen.is_some_and(|f| f[i]);
    let mut ctx = refresh(&phi)?;
    let mut fit = landmark_loss(m00, &phi, &psi);
    let mut reg = penalty(&ctx, &phi)?;
    let mut trace = vec![fit + reg];
    for _ in 0..opts.max_iter {
        let before = fit + reg;
        for _ in 0..opts.inner_steps.max(1) {
            // Ψ-step: gradient 2Φᵀ(ΦΨ − M).
            let gram = phi.tr_mul(&phi);
            let step = 0.5 / lambda_max(&gram).max(1e-12);
            let grad = phi.tr_mul(&(&phi * &psi - m00));
            let mut cand = &psi - grad * (2.0 * step);
            cand.iter_mut().for_each(|x| *x = x.max(0.0));
            for j in (0..u).filter(|&j| is_frozen(j)) {
                cand.set_column(j, &psi.column(j));
            }
            let l = landmark_loss(m00, &phi, &cand);
            if l <= fit {
                psi = cand;
                fit = l;
            }
            // Φ-step: gradient 2(ΦΨ − M)Ψᵀ (+ β ∇Bcr), rows projected to the simplex.
            let gram = &psi * psi.transpose();
            let mut step = 0.5 / lambda_max(&gram).max(1e-12);
            let mut grad = (&phi * &psi - m00) * psi.transpose() * 2.0;
            if let (Some(c), Some(b)) = (&ctx, bcr) {
                grad += c.gradient((u, r))? * b.beta;
            }
            for _ in 0..MAX_HALVINGS {
                let mut cand = &phi - &grad * step;
                project_rows_to_simplex(&mut cand);
                for i in (0..u).filter(|&i| is_frozen(i)) {
                    cand.set_row(i, &phi.row(i));
                }
                let (l, g) = (landmark_loss(m00, &cand, &psi), penalty(&ctx, &cand)?);
                if l + g <= fit + reg {
                    phi = cand;
                    fit = l;
                    reg = g;
                    break;
                }
                step *= 0.5;
            }
        }
        ctx = refresh(&phi)?;
        reg = penalty(&ctx, &phi)?;
        let loss = fit + reg;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss("landmark factorization"));
        }
        trace.push(loss);
        if before - loss <= opts.tol * before.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(LandmarkFactors { phi, psi, trace })
}

/// Shuffled copy of `0..n`, used for tie-free test fixtures.
#[cfg(test)]
pub(crate) fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut seed::rng(seed, 0, 0));
    v
}
