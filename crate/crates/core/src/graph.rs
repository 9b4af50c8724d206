//! Dynamic graph data model, PMI construction and noise injection.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed;
use crate::sparse::SymCsr;

/// One timestamped, undirected, weighted snapshot over `0..n`.
///
/// Adjacency is symmetric with no self-loops and strictly positive stored
/// weights; [`Snapshot::from_edges`] enforces this.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    timestamp: usize,
    adjacency: SymCsr,
}

impl Snapshot {
    /// Builds a snapshot from an edge list. Repeated pairs (in either
    /// orientation) collapse into one edge carrying the larger weight.
    pub fn from_edges<I>(node_count: usize, timestamp: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidEdge { u, v, reason: "node id out of range" });
            }
            if u == v {
                return Err(Error::InvalidEdge { u, v, reason: "self-loop" });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidEdge { u, v, reason: "weight must be finite and positive" });
            }
            let key = (u.min(v), u.max(v));
            let slot = merged.entry(key).or_insert(w);
            *slot = slot.max(w);
        }
        let pairs: Vec<_> = merged.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        Ok(Snapshot { timestamp, adjacency: SymCsr::from_pairs(node_count, &pairs) })
    }

    pub fn empty(node_count: usize, timestamp: usize) -> Self {
        Snapshot { timestamp, adjacency: SymCsr::empty(node_count) }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.dim()
    }

    pub fn timestamp(&self) -> usize {
        self.timestamp
    }

    pub(crate) fn with_timestamp(mut self, timestamp: usize) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &SymCsr {
        &self.adjacency
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.upper()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.contains(u, v)
    }

    pub fn total_weight(&self) -> f64 {
        self.adjacency.sum() / 2.0
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency.row_iter(u)
    }
}

/// `d_i = Σ_j w_ij`.
pub fn degree_vector(snapshot: &Snapshot) -> Vec<f64> {
    (0..snapshot.node_count()).map(|i| snapshot.adjacency.row_sum(i)).collect()
}

/// An ordered sequence of snapshots sharing one node universe, with optional
/// per-snapshot ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicGraph {
    node_count: usize,
    snapshots: Vec<Snapshot>,
    labels: Option<Vec<Partition>>,
}

impl DynamicGraph {
    pub fn new(snapshots: Vec<Snapshot>) -> Result<Self> {
        let first = snapshots.first().ok_or(Error::NoSnapshots)?;
        let node_count = first.node_count();
        for s in &snapshots {
            if s.node_count() != node_count {
                return Err(Error::NodeCountMismatch { expected: node_count, found: s.node_count() });
            }
        }
        Ok(DynamicGraph { node_count, snapshots, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<Partition>) -> Result<Self> {
        if labels.len() != self.snapshots.len() {
            return Err(Error::InvalidConfig(format!(
                "{} label sets for {} snapshots",
                labels.len(),
                self.snapshots.len()
            )));
        }
        for l in &labels {
            if l.len() != self.node_count {
                return Err(Error::NodeCountMismatch { expected: self.node_count, found: l.len() });
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, t: usize) -> &Snapshot {
        &self.snapshots[t]
    }

    pub fn labels(&self) -> Option<&[Partition]> {
        self.labels.as_deref()
    }

    pub fn total_edges(&self) -> usize {
        self.snapshots.iter().map(Snapshot::edge_count).sum()
    }
}

/// Pointwise mutual information of a snapshot, stored on the edge pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct PmiMatrix(SymCsr);

impl PmiMatrix {
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &SymCsr {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j).unwrap_or(0.0)
    }
}

/// Unclamped PMI of one edge: `ln(w · vol / (d_i d_j))`.
pub fn pmi_value(weight: f64, degree_i: f64, degree_j: f64, volume: f64) -> f64 {
    (weight * volume / (degree_i * degree_j)).ln()
}

/// PMI on every edge, clamped at zero; non-edges are implicit zeros.
pub fn build_pmi(snapshot: &Snapshot) -> Result<PmiMatrix> {
    if snapshot.edge_count() == 0 {
        return Err(Error::EmptySnapshot);
    }
    let degrees = degree_vector(snapshot);
    let volume: f64 = degrees.iter().sum();
    let m = snapshot
        .adjacency
        .map_entries(|i, j, w| pmi_value(w, degrees[i], degrees[j], volume).max(0.0));
    Ok(PmiMatrix(m))
}

/// Adds `⌊fraction · |E_t|⌋` unit-weight edges to every snapshot, drawn
/// uniformly among absent pairs. Existing edges and labels are untouched.
pub fn inject_noise(graph: &DynamicGraph, fraction: f64, seed: u64) -> Result<DynamicGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let n = graph.node_count();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let mut snapshots = Vec::with_capacity(graph.len());
    for (t, snap) in graph.snapshots().iter().enumerate() {
        let requested = (fraction * snap.edge_count() as f64).floor() as usize;
        let available = total_pairs - snap.edge_count();
        if requested > available {
            return Err(Error::SaturatedGraph { requested, available });
        }
        if requested == 0 {
            snapshots.push(snap.clone());
            continue;
        }
        let mut rng = seed::rng(seed, seed::tag::NOISE, t as u64);
        let added = if requested * 4 < available {
            let mut chosen = HashSet::with_capacity(requested);
            while chosen.len() < requested {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u == v {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                if !snap.has_edge(key.0, key.1) {
                    chosen.insert(key);
                }
            }
            let mut chosen: Vec<_> = chosen.into_iter().collect();
            chosen.sort_unstable();
            chosen
        } else {
            let free: Vec<(usize, usize)> = (0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|&(u, v)| !snap.has_edge(u, v))
                .collect();
            let mut picks: Vec<_> = index::sample(&mut rng, free.len(), requested).into_iter().map(|k| free[k]).collect();
            picks.sort_unstable();
            picks
        };
        let edges = snap.edges().chain(added.into_iter().map(|(u, v)| (u, v, 1.0)));
        snapshots.push(Snapshot::from_edges(n, snap.timestamp(), edges)?);
    }
    let noisy = DynamicGraph::new(snapshots)?;
    match graph.labels() {
        Some(labels) => noisy.with_labels(labels.to_vec()),
        None => Ok(noisy),
    }
}
