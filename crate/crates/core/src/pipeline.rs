//! Snapshot-by-snapshot clustering.
//!
//! For every timestamp: PMI, elbow estimate of the cluster count, temporal
//! K-means and landmark selection, change scores and the static/dynamic
//! split, selective landmark factorization, the subset solve with the
//! bi-clustering regularizer, then assembly of `C_t` and argmax labels.
//!
//! Embedding columns stand for clusters and persist across timestamps: each
//! new K-means cluster takes over the column most of its members held at
//! `t − 1`. That makes a frozen row from `t − 1` meaningful at `t`.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info};
use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dynamics::{factorize_landmarks_selective, node_change_scores, split_dynamic_static, ChangeWindow, PreviousLandmarks};
use crate::error::{Error, Result};
use crate::factorization::{
    baseline_temporal_mf, row_argmax, Coupling, SeparatedInputs, SeparatedProblem, SolverOptions, SubsetPlan,
};
use crate::graph::{build_pmi, DynamicGraph, PmiMatrix};
use crate::landmarks::{
    elbow_cluster_count, refine_landmark_factors, select_landmarks_hinted, spectral_rows, temporal_kmeans, LandmarkBcr, LandmarkFactors, LandmarkParams, LandmarkSet,
    SparseRows, TemporalRows,
};
use crate::metrics::{average, evaluate_snapshot, MetricBundle};
use crate::partition::Partition;
use crate::seed::{self, tag};

/// Graphs up to this size run as a single subset by default.
pub const SMALL_GRAPH: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Number of subsets `s`; `None` picks 1 for small graphs and 50 otherwise.
    pub subsets: Option<usize>,
    /// Upper bound on the embedding width `r`.
    pub rank: usize,
    /// Weight of the previous snapshot in temporal K-means.
    pub lambda: f64,
    /// Bi-clustering weight.
    pub beta: f64,
    /// Share of nodes treated as dynamic.
    pub mu: f64,
    /// Share of candidate nodes used as landmarks; `None` picks 0.5 up to
    /// 10 000 nodes and 0.005 beyond.
    pub landmark_fraction: Option<f64>,
    pub max_landmarks: Option<usize>,
    /// Smoothness weight, used only without selective updating.
    pub alpha: f64,
    pub k_max: usize,
    /// Rows sampled for the elbow estimate.
    pub elbow_sample: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub inner_steps: usize,
    pub seed: u64,
    pub parallel: bool,
    pub coupling: Coupling,
    pub no_tsmf: bool,
    pub no_bcr: bool,
    pub no_seu: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subsets: None,
            rank: 1000,
            lambda: 0.2,
            beta: 20.0,
            mu: 0.16,
            landmark_fraction: None,
            max_landmarks: Some(160),
            alpha: 0.5,
            k_max: 12,
            elbow_sample: 600,
            restarts: 10,
            tol: 1e-5,
            max_iter: 200,
            inner_steps: 3,
            seed: 0,
            parallel: false,
            coupling: Coupling::Symmetric,
            no_tsmf: false,
            no_bcr: false,
            no_seu: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.subsets == Some(0) {
            return bad("s must be at least 1".into());
        }
        if self.rank == 0 {
            return bad("r must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("μ = {} outside [0, 1]", self.mu));
        }
        if let Some(f) = self.landmark_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("landmark fraction {f} outside (0, 1]"));
            }
        }
        if self.max_landmarks.is_some_and(|m| m < 2) {
            return bad("max_landmarks must be at least 2".into());
        }
        for (name, v) in [("λ", self.lambda), ("β", self.beta), ("α", self.alpha), ("tol", self.tol)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and nonnegative"));
            }
        }
        if self.k_max < 2 {
            return bad("k_max must be at least 2".into());
        }
        if self.elbow_sample < 2 {
            return bad("elbow_sample must be at least 2".into());
        }
        Ok(())
    }

    pub fn subsets_for(&self, n: usize) -> usize {
        self.subsets.unwrap_or(if n <= SMALL_GRAPH { 1 } else { 50 })
    }

    pub fn landmark_params(&self, n: usize) -> LandmarkParams {
        LandmarkParams {
            lambda: self.lambda,
            fraction: self.landmark_fraction.unwrap_or(if n <= 10_000 { 0.5 } else { 0.005 }),
            max_landmarks: self.max_landmarks,
            restarts: self.restarts,
        }
    }

    fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.max_iter, inner_steps: self.inner_steps, parallel: self.parallel }
    }
}

/// The method and its three ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoTsmf,
    NoBcr,
    NoSeu,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoTsmf, Variant::NoBcr, Variant::NoSeu];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoTsmf => "no-tsmf",
            Variant::NoBcr => "no-bcr",
            Variant::NoSeu => "no-seu",
        }
    }

    /// `config` with exactly this variant's flag set.
    pub fn apply(self, config: &RunConfig) -> RunConfig {
        RunConfig {
            no_tsmf: self == Variant::NoTsmf,
            no_bcr: self == Variant::NoBcr,
            no_seu: self == Variant::NoSeu,
            ..config.clone()
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}`")))
    }
}

/// Wall-clock seconds per phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub pmi: f64,
    /// Elbow estimate, temporal K-means and landmark choice.
    pub landmarks: f64,
    /// Change scores and the static/dynamic split.
    pub change: f64,
    pub landmark_factorization: f64,
    /// Subset solves, excluding regularizer eigen-solves and gradients.
    pub factorization: f64,
    pub bcr: f64,
    pub assembly: f64,
}

impl PhaseTimings {
    pub fn sum(&self) -> f64 {
        self.pmi + self.landmarks + self.change + self.landmark_factorization + self.factorization + self.bcr + self.assembly
    }

    fn add(&mut self, other: &PhaseTimings) {
        self.pmi += other.pmi;
        self.landmarks += other.landmarks;
        self.change += other.change;
        self.landmark_factorization += other.landmark_factorization;
        self.factorization += other.factorization;
        self.bcr += other.bcr;
        self.assembly += other.assembly;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub timestamp: usize,
    /// Estimated cluster count `ϱ_t`.
    pub clusters: usize,
    /// Embedding width `r_t`.
    pub rank: usize,
    pub landmarks: usize,
    pub subsets: usize,
    pub dynamic: usize,
    /// Nodes whose embedding was carried over from `t − 1`.
    pub frozen: usize,
    pub sweeps: usize,
    pub converged: bool,
    /// Full objective after initialization and after every sweep.
    pub objective: Vec<f64>,
    pub landmark_loss: Vec<f64>,
    pub metrics: MetricBundle,
    pub timings: PhaseTimings,
}

/// Landmark factors of one timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkRecord {
    pub node_ids: Vec<usize>,
    /// Copied bit-exactly from `t − 1`, aligned with `node_ids`.
    pub frozen: Vec<bool>,
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub partitions: Vec<Partition>,
    pub snapshots: Vec<SnapshotReport>,
    pub average: MetricBundle,
    pub timings: PhaseTimings,
    pub total_seconds: f64,
    #[serde(skip)]
    pub landmarks: Vec<LandmarkRecord>,
}

/// Row-wise argmax of an embedding, ties to the lowest column.
pub fn extract_partition(c: &DMatrix<f64>) -> Partition {
    Partition::new(row_argmax(c))
}

/// Everything derived from one snapshot before factorization.
struct Stage {
    pmi: PmiMatrix,
    /// Nodes with a nonzero PMI row.
    active: Vec<usize>,
    clusters: usize,
    set: LandmarkSet,
    /// K-means cluster of every node; isolated nodes have none.
    cluster_of: Vec<Option<usize>>,
    centers: crate::landmarks::Centers,
    elapsed: (f64, f64),
}

/// Elbow estimate on the spectral coordinates of a seeded sample of at most
/// `elbow_sample` active nodes. Also returns the coordinates of all of them.
fn estimate_clusters(config: &RunConfig, pmi: &PmiMatrix, active: &[usize], t: usize) -> Result<(usize, SparseRows)> {
    let coords = spectral_rows(pmi, active, config.k_max + 1, seed::derive(config.seed, tag::SPECTRAL, t as u64));
    let estimate = if active.len() > config.elbow_sample {
        let mut rng = seed::rng(config.seed, tag::ELBOW, t as u64);
        let mut picks = index::sample(&mut rng, active.len(), config.elbow_sample).into_vec();
        picks.sort_unstable();
        let points: Vec<Vec<f64>> = picks.iter().map(|&i| coords.point(i)).collect();
        elbow_cluster_count(&SparseRows::from_dense(&points), config.k_max, config.restarts, seed::derive(config.seed, tag::ELBOW, t as u64))?
    } else {
        elbow_cluster_count(&coords, config.k_max, config.restarts, seed::derive(config.seed, tag::ELBOW, t as u64))?
    };
    Ok((estimate, coords))
}

/// PMI, elbow estimate and temporal landmark selection for snapshot `t`.
fn prepare(config: &RunConfig, graph: &DynamicGraph, t: usize, prev: Option<&Stage>) -> Result<Stage> {
    let start = Instant::now();
    let snap = graph.snapshot(t);
    let pmi = build_pmi(snap)?;
    let pmi_time = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let n = snap.node_count();
    let active: Vec<usize> = (0..n).filter(|&a| pmi.matrix().row_norm_sq(a) > 0.0).collect();
    if active.len() < 2 {
        return Err(Error::DegenerateData);
    }
    let rows = SparseRows::from_pmi(&pmi, &active);
    let params = config.landmark_params(active.len());
    let target = crate::landmarks::landmark_target(active.len(), &params).max(1);
    let (estimate, coords) = estimate_clusters(config, &pmi, &active, t)?;
    let clusters = estimate.min(target).min(config.rank).max(1);
    let hint = temporal_kmeans(TemporalRows::plain(&coords), clusters, config.restarts, seed::derive(config.seed, tag::SPECTRAL, t as u64))?;
    let previous = prev.map(|p| SparseRows::from_pmi(&p.pmi, &active));
    let temporal = TemporalRows { current: &rows, previous: previous.as_ref(), lambda: config.lambda };
    let mut params = params;
    if target < 2 {
        params.fraction = 1.0;
    }
    let set = select_landmarks_hinted(
        temporal,
        &active,
        clusters,
        &params,
        seed::derive(config.seed, tag::KMEANS, t as u64),
        Some(&hint.assignment),
    )?;
    let mut cluster_of = vec![None; n];
    for (i, &a) in active.iter().enumerate() {
        cluster_of[a] = Some(set.row_assignment[i]);
    }
    let centers = set.centers.clone();
    Ok(Stage { pmi, active, clusters, set, cluster_of, centers, elapsed: (pmi_time, start.elapsed().as_secs_f64()) })
}

/// Embedding state carried to the next timestamp.
struct Carry {
    labels: Vec<u32>,
    /// `n × r`, rows on the simplex.
    c: DMatrix<f64>,
    landmark_ids: Vec<usize>,
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
}

/// Maps every K-means cluster to an embedding column. Clusters inherit the
/// previous column most of their members held (greedy by overlap); the rest
/// take unused columns, then fresh ones up to `cap`.
fn map_columns(stage: &Stage, prev: Option<&Carry>, cap: usize) -> (Vec<usize>, usize) {
    let k = stage.clusters;
    let Some(prev) = prev else {
        return ((0..k).collect(), k);
    };
    let width = prev.c.ncols();
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &a in &stage.active {
        let c = stage.cluster_of[a].expect("active node has a cluster");
        *overlap.entry((c, prev.labels[a] as usize)).or_default() += 1;
    }
    let mut pairs: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut column = vec![usize::MAX; k];
    let mut taken = vec![false; width.max(cap)];
    for ((c, j), _) in pairs {
        if column[c] == usize::MAX && !taken[j] {
            column[c] = j;
            taken[j] = true;
        }
    }
    let mut width = width;
    for c in 0..k {
        if column[c] != usize::MAX {
            continue;
        }
        let free = (0..width).find(|&j| !taken[j]);
        let j = match free {
            Some(j) => j,
            None if width < cap => {
                width += 1;
                width - 1
            }
            // Out of columns: share the least crowded one.
            None => (0..width).min_by_key(|&j| column.iter().filter(|&&x| x == j).count()).unwrap(),
        };
        column[c] = j;
        taken[j] = true;
    }
    (column, width)
}

fn pad_columns(m: &DMatrix<f64>, width: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), width, |i, j| if j < m.ncols() { m[(i, j)] } else { 0.0 })
}

/// Runs the variant selected by the config flags.
pub fn run(config: &RunConfig, graph: &DynamicGraph) -> Result<RunResult> {
    config.validate()?;
    let flags = [config.no_tsmf, config.no_bcr, config.no_seu].iter().filter(|&&f| f).count();
    if flags > 1 {
        return Err(Error::InvalidConfig("at most one ablation flag may be set".into()));
    }
    if graph.is_empty() {
        return Err(Error::NoSnapshots);
    }
    if config.no_tsmf {
        return run_joint(config, graph);
    }
    run_separated(config, graph)
}

/// Runs `variant` on top of `config`.
pub fn run_ablation(config: &RunConfig, variant: Variant, graph: &DynamicGraph) -> Result<RunResult> {
    run(&variant.apply(config), graph)
}

fn variant_of(config: &RunConfig) -> Variant {
    match (config.no_tsmf, config.no_bcr, config.no_seu) {
        (true, _, _) => Variant::NoTsmf,
        (_, true, _) => Variant::NoBcr,
        (_, _, true) => Variant::NoSeu,
        _ => Variant::Full,
    }
}

fn score(graph: &DynamicGraph, t: usize, partition: &Partition) -> Result<MetricBundle> {
    let truth = graph.labels().map(|l| &l[t]);
    evaluate_snapshot(graph.snapshot(t), partition, truth)
}

fn run_separated(config: &RunConfig, graph: &DynamicGraph) -> Result<RunResult> {
    let started = Instant::now();
    let n = graph.node_count();
    let opts = config.solver();
    let s = config.subsets_for(n);
    if config.coupling == Coupling::AsPrinted && s > 1 {
        return Err(Error::InvalidConfig(
            "the as-printed inter-subset coupling is only evaluated by `inter_loss`; the solver needs the symmetric form when s > 1".into(),
        ));
    }
    let beta = if config.no_bcr { 0.0 } else { config.beta };
    let mut partitions = Vec::with_capacity(graph.len());
    let mut reports = Vec::with_capacity(graph.len());
    let mut records = Vec::with_capacity(graph.len());
    let mut totals = PhaseTimings::default();
    let mut carry: Option<Carry> = None;
    let mut before: Option<Stage> = None;
    let mut current = prepare(config, graph, 0, None).map_err(|e| e.at_snapshot(1))?;
    for t in 0..graph.len() {
        let timestamp = t + 1;
        let wrap = |e: Error| e.at_snapshot(timestamp);
        let mut timings = PhaseTimings { pmi: current.elapsed.0, landmarks: current.elapsed.1, ..Default::default() };
        // One-snapshot lookahead for the change window.
        let seu = !config.no_seu && carry.is_some();
        let after = if seu && t + 1 < graph.len() {
            // Its preparation time is charged to snapshot t + 1.
            Some(prepare(config, graph, t + 1, Some(&current)).map_err(|e| e.at_snapshot(timestamp + 1))?)
        } else {
            None
        };

        let start = Instant::now();
        let cap = config.rank.min(current.set.node_ids.len());
        let (column, width) = map_columns(&current, carry.as_ref(), cap);
        let mut frozen = vec![false; n];
        let mut dynamic_count = 0;
        if let (true, Some(prev)) = (seu, carry.as_ref()) {
            let window = ChangeWindow {
                snapshots: [Some(graph.snapshot(t - 1)), Some(graph.snapshot(t)), after.as_ref().map(|_| graph.snapshot(t + 1))],
                pmi: &current.pmi,
                centers: [before.as_ref().map(|b| &b.centers), Some(&current.centers), after.as_ref().map(|a| &a.centers)],
            };
            let scores = node_change_scores(window).map_err(wrap)?;
            let split = split_dynamic_static(&scores, config.mu).map_err(wrap)?;
            dynamic_count = split.dynamic.len();
            // A static node is frozen only if its cluster still maps to the column it held.
            for &a in &split.fixed {
                if let Some(c) = current.cluster_of[a] {
                    frozen[a] = column[c] == prev.labels[a] as usize;
                }
            }
        }
        timings.change = start.elapsed().as_secs_f64();

        // Landmark factors, initialized from the K-means clusters.
        let start = Instant::now();
        let ids = &current.set.node_ids;
        let u = ids.len();
        let m00 = current.pmi.matrix().submatrix(ids, ids);
        let mut phi0 = DMatrix::zeros(u, width);
        for (l, &c) in current.set.assignment.iter().enumerate() {
            phi0[(l, column[c])] = 1.0;
        }
        let mut psi0 = DMatrix::zeros(width, u);
        for (c, center) in current.centers.vectors.iter().enumerate() {
            for (l, &node) in ids.iter().enumerate() {
                psi0[(column[c], l)] = center[node].max(psi0[(column[c], l)]);
            }
        }
        let landmark_frozen: Vec<bool> = ids.iter().map(|&a| frozen[a]).collect();
        // Penalty weights are relative to ‖M_t‖², so one β serves every graph size.
        let scale = current.pmi.matrix().frobenius_sq().max(f64::MIN_POSITIVE);
        let bcr = (beta > 0.0).then_some(LandmarkBcr { beta: beta * scale, k: width });
        let factors: LandmarkFactors = match (seu, carry.as_ref()) {
            (true, Some(prev)) => {
                let previous = PreviousLandmarks { node_ids: &prev.landmark_ids, phi: &prev.phi, psi: &prev.psi };
                factorize_landmarks_selective(&m00, ids, (phi0, psi0), Some(previous), &landmark_frozen, bcr, opts)
            }
            _ => refine_landmark_factors(&m00, phi0, psi0, None, bcr, opts),
        }
        .map_err(wrap)?;
        let previous_set: std::collections::HashSet<usize> = carry.as_ref().map(|p| p.landmark_ids.iter().copied().collect()).unwrap_or_default();
        let copied: Vec<bool> = ids.iter().zip(&landmark_frozen).map(|(a, &f)| f && previous_set.contains(a)).collect();
        timings.landmark_factorization = start.elapsed().as_secs_f64();

        // Subset solve over the remaining active nodes.
        let start = Instant::now();
        let mut is_landmark = vec![false; n];
        for &a in ids {
            is_landmark[a] = true;
        }
        let prev_rows = carry.as_ref().map(|p| pad_columns(&p.c, width));
        let members: Vec<usize> = current.active.iter().copied().filter(|&a| !is_landmark[a]).collect();
        let s_eff = s.min(members.len()).max(1);
        let (free_subsets, fixed_subsets): (Vec<Vec<usize>>, Vec<Vec<usize>>) = if members.is_empty() {
            (vec![Vec::new()], vec![Vec::new()])
        } else {
            let plan = SubsetPlan::split(&members, s_eff, seed::derive(config.seed, tag::SUBSETS, t as u64)).map_err(wrap)?;
            plan.subsets.into_iter().map(|sub| sub.into_iter().partition(|&a| !frozen[a])).unzip()
        };
        let problem = SeparatedProblem::new(&current.pmi, ids, &free_subsets).map_err(wrap)?;
        let free: Vec<usize> = free_subsets.concat();
        let fixed: Option<Vec<DMatrix<f64>>> = prev_rows.as_ref().map(|rows| {
            fixed_subsets.iter().map(|sub| DMatrix::from_fn(width, sub.len(), |j, i| rows[(sub[i], j)])).collect()
        });
        let (mut pt, q) = problem.initial_factors(seed::derive(config.seed, tag::SUBSET_INIT, t as u64));
        // Start every free node on the landmarks of its own K-means cluster.
        let mut per_cluster: Vec<Vec<usize>> = vec![Vec::new(); current.clusters];
        for (l, &c) in current.set.assignment.iter().enumerate() {
            per_cluster[c].push(l);
        }
        for (p, &a) in free.iter().enumerate() {
            if let Some(c) = current.cluster_of[a].filter(|&c| !per_cluster[c].is_empty()) {
                let mut col = pt.column_mut(p);
                col.fill(0.0);
                let share = 1.0 / per_cluster[c].len() as f64;
                for &l in &per_cluster[c] {
                    col[l] = share;
                }
            }
        }
        let smooth_prev = match (&prev_rows, config.no_seu) {
            (Some(rows), true) => Some(DMatrix::from_fn(width, free.len(), |j, p| rows[(free[p], j)])),
            _ => None,
        };
        let inputs = SeparatedInputs {
            phi: &factors.phi,
            beta: beta * scale,
            bcr_k: width,
            alpha: if smooth_prev.is_some() { config.alpha * scale } else { 0.0 },
            prev_c: smooth_prev.as_ref(),
            fixed: fixed.as_deref(),
            constant: factors.loss(),
        };
        let solution = problem.solve(inputs, (pt, q), opts).map_err(wrap)?;
        let solve_time = start.elapsed().as_secs_f64();
        timings.bcr = solution.bcr_time.as_secs_f64();
        timings.factorization = (solve_time - timings.bcr).max(0.0);

        // Assembly: landmarks from Φ, free nodes from the solve, the rest carried over.
        let start = Instant::now();
        let mut c = match &prev_rows {
            Some(rows) => rows.clone(),
            None => {
                let mut c = DMatrix::zeros(n, width);
                c.column_mut(0).fill(1.0);
                c
            }
        };
        for (l, &a) in ids.iter().enumerate() {
            c.set_row(a, &factors.phi.row(l));
        }
        for (p, &a) in free.iter().enumerate() {
            for j in 0..width {
                c[(a, j)] = solution.ct[(j, p)];
            }
        }
        let partition = extract_partition(&c);
        if log::log_enabled!(log::Level::Debug) {
            let agree = |nodes: &mut dyn Iterator<Item = usize>| {
                let (mut hit, mut total) = (0, 0);
                for a in nodes {
                    if let Some(k) = current.cluster_of[a] {
                        total += 1;
                        hit += usize::from(column[k] == partition.label(a) as usize);
                    }
                }
                hit as f64 / total.max(1) as f64
            };
            debug!(
                "t={timestamp}: agreement with K-means columns: landmarks {:.3}, free {:.3}",
                agree(&mut ids.iter().copied()),
                agree(&mut free.iter().copied())
            );
        }
        let metrics = score(graph, t, &partition).map_err(wrap)?;
        timings.assembly = start.elapsed().as_secs_f64();

        let frozen_count = frozen.iter().filter(|&&f| f).count();
        info!(
            "t={timestamp}: ϱ={} r={width} |U|={u} dynamic={dynamic_count} frozen={frozen_count} sweeps={} objective={:.6e} nmi={:?}",
            current.clusters,
            solution.sweeps,
            solution.trace.last().copied().unwrap_or(f64::NAN),
            metrics.nmi
        );
        debug!("t={timestamp}: timings {timings:?}");
        totals.add(&timings);
        reports.push(SnapshotReport {
            timestamp,
            clusters: current.clusters,
            rank: width,
            landmarks: u,
            subsets: free_subsets.len(),
            dynamic: dynamic_count,
            frozen: frozen_count,
            sweeps: solution.sweeps,
            converged: solution.converged,
            objective: solution.trace,
            landmark_loss: factors.trace.clone(),
            metrics,
            timings,
        });
        records.push(LandmarkRecord { node_ids: ids.clone(), frozen: copied, phi: factors.phi.clone(), psi: factors.psi.clone() });
        partitions.push(partition.clone());
        carry = Some(Carry {
            labels: partition.into_labels(),
            c,
            landmark_ids: ids.clone(),
            phi: factors.phi,
            psi: factors.psi,
        });

        if t + 1 == graph.len() {
            break;
        }
        let next = match after {
            Some(next) => next,
            None => prepare(config, graph, t + 1, Some(&current)).map_err(|e| e.at_snapshot(timestamp + 1))?,
        };
        before = Some(std::mem::replace(&mut current, next));
    }
    let average = average(&reports.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>());
    Ok(RunResult {
        variant: variant_of(config),
        partitions,
        snapshots: reports,
        average,
        timings: totals,
        total_seconds: started.elapsed().as_secs_f64(),
        landmarks: records,
    })
}

/// Non-separated ablation: one joint factorization of every `M_t` with
/// width `max_t ϱ_t`, tied across snapshots by the smoothness term.
fn run_joint(config: &RunConfig, graph: &DynamicGraph) -> Result<RunResult> {
    let started = Instant::now();
    let mut pmis = Vec::with_capacity(graph.len());
    let mut timings = vec![PhaseTimings::default(); graph.len()];
    let mut clusters = Vec::with_capacity(graph.len());
    let n = graph.node_count();
    for (t, timing) in timings.iter_mut().enumerate() {
        let start = Instant::now();
        let pmi = build_pmi(graph.snapshot(t)).map_err(|e| e.at_snapshot(t + 1))?;
        timing.pmi = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let active: Vec<usize> = (0..n).filter(|&a| pmi.matrix().row_norm_sq(a) > 0.0).collect();
        if active.len() < 2 {
            return Err(Error::DegenerateData.at_snapshot(t + 1));
        }
        let (k, _) = estimate_clusters(config, &pmi, &active, t).map_err(|e| e.at_snapshot(t + 1))?;
        timing.landmarks = start.elapsed().as_secs_f64();
        clusters.push(k);
        pmis.push(pmi);
    }
    let width = clusters.iter().copied().max().unwrap_or(1).min(config.rank).min(n);
    let start = Instant::now();
    let factors = baseline_temporal_mf(&pmis, width, config.alpha, config.solver(), seed::derive(config.seed, tag::BASELINE, 0))?;
    let per_snapshot = start.elapsed().as_secs_f64() / graph.len() as f64;
    let mut partitions = Vec::with_capacity(graph.len());
    let mut reports = Vec::with_capacity(graph.len());
    let mut totals = PhaseTimings::default();
    for (t, f) in factors.into_iter().enumerate() {
        let start = Instant::now();
        let partition = Partition::new(row_argmax(&f.ct.transpose()));
        let metrics = score(graph, t, &partition).map_err(|e| e.at_snapshot(t + 1))?;
        timings[t].factorization = per_snapshot;
        timings[t].assembly = start.elapsed().as_secs_f64();
        totals.add(&timings[t]);
        reports.push(SnapshotReport {
            timestamp: t + 1,
            clusters: clusters[t],
            rank: width,
            landmarks: 0,
            subsets: 1,
            dynamic: n,
            frozen: 0,
            sweeps: f.trace.len() - 1,
            converged: f.trace.len() - 1 < config.max_iter,
            objective: f.trace,
            landmark_loss: Vec::new(),
            metrics,
            timings: timings[t].clone(),
        });
        partitions.push(partition);
    }
    let average = average(&reports.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>());
    Ok(RunResult {
        variant: Variant::NoTsmf,
        partitions,
        snapshots: reports,
        average,
        timings: totals,
        total_seconds: started.elapsed().as_secs_f64(),
        landmarks: Vec::new(),
    })
}
