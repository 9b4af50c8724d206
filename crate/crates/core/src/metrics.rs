//! Clustering evaluation: NMI, NF1, modularity and density.
//!
//! NF1 here is the mean best-match F1 of the predicted communities divided by
//! their redundancy (predicted communities per matched ground-truth
//! community). It does not apply a coverage factor, so a prediction that
//! merges everything into one cluster is scored by its F1 alone.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Snapshot;
use crate::partition::Partition;

fn check_lengths(a: &Partition, b: &Partition) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Dense contingency counts plus marginals.
struct Contingency {
    cells: BTreeMap<(usize, usize), f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
    total: f64,
}

impl Contingency {
    fn new(a: &Partition, b: &Partition) -> Self {
        let (da, db) = (a.densified(), b.densified());
        let ka = da.labels().iter().max().map_or(0, |&m| m as usize + 1);
        let kb = db.labels().iter().max().map_or(0, |&m| m as usize + 1);
        let mut cells = BTreeMap::new();
        let mut rows = vec![0.0; ka];
        let mut cols = vec![0.0; kb];
        for (&x, &y) in da.labels().iter().zip(db.labels()) {
            *cells.entry((x as usize, y as usize)).or_insert(0.0) += 1.0;
            rows[x as usize] += 1.0;
            cols[y as usize] += 1.0;
        }
        Contingency { cells, rows, cols, total: a.len() as f64 }
    }
}

// Written as p ln(N / c) so that identical partitions give bit-identical
// entropy and mutual information sums.
fn entropy(counts: &[f64], total: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0.0).map(|&c| (c / total) * (total / c).ln()).sum()
}

/// Normalized mutual information `2 I(a; b) / (H(a) + H(b))`, natural log.
///
/// Two single-cluster partitions score 1.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    let c = Contingency::new(a, b);
    let (ha, hb) = (entropy(&c.rows, c.total), entropy(&c.cols, c.total));
    if ha + hb <= 0.0 {
        return Ok(1.0);
    }
    let mi: f64 = c
        .cells
        .iter()
        .map(|(&(i, j), &nij)| {
            let p = nij / c.total;
            p * (nij * c.total / (c.rows[i] * c.cols[j])).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// Normalized F1 of `pred` against `truth` (not symmetric).
pub fn nf1(pred: &Partition, truth: &Partition) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let c = Contingency::new(pred, truth);
    let mut best: Vec<(f64, usize)> = vec![(0.0, usize::MAX); c.rows.len()];
    for (&(p, g), &overlap) in &c.cells {
        let precision = overlap / c.rows[p];
        let recall = overlap / c.cols[g];
        let f1 = 2.0 * precision * recall / (precision + recall);
        let slot = &mut best[p];
        if f1 > slot.0 || (f1 == slot.0 && g < slot.1) {
            *slot = (f1, g);
        }
    }
    let mean_f1 = best.iter().map(|b| b.0).sum::<f64>() / best.len() as f64;
    let mut matched: Vec<usize> = best.iter().map(|b| b.1).collect();
    matched.sort_unstable();
    matched.dedup();
    let redundancy = best.len() as f64 / matched.len() as f64;
    Ok((mean_f1 / redundancy).clamp(0.0, 1.0))
}

/// Per-community intra weight, intra edge count, degree sum and size.
fn community_stats(snapshot: &Snapshot, p: &Partition) -> Result<HashMap<u32, (f64, usize, f64, usize)>> {
    if p.len() != snapshot.node_count() {
        return Err(Error::LengthMismatch(p.len(), snapshot.node_count()));
    }
    let mut stats: HashMap<u32, (f64, usize, f64, usize)> = HashMap::new();
    for (node, &label) in p.labels().iter().enumerate() {
        let entry = stats.entry(label).or_default();
        entry.2 += snapshot.adjacency().row_sum(node);
        entry.3 += 1;
    }
    for (u, v, w) in snapshot.edges() {
        if p.label(u) == p.label(v) {
            let entry = stats.get_mut(&p.label(u)).expect("label registered above");
            entry.0 += w;
            entry.1 += 1;
        }
    }
    Ok(stats)
}

/// Newman modularity `Σ_c (e_c / m − (d_c / 2m)²)`.
pub fn modularity(snapshot: &Snapshot, p: &Partition) -> Result<f64> {
    if snapshot.edge_count() == 0 {
        return Err(Error::EmptySnapshot);
    }
    let m = snapshot.total_weight();
    let stats = community_stats(snapshot, p)?;
    let mut q = 0.0;
    let mut labels: Vec<_> = stats.keys().copied().collect();
    labels.sort_unstable();
    for label in labels {
        let (intra, _, degree, _) = stats[&label];
        q += intra / m - (degree / (2.0 * m)).powi(2);
    }
    Ok(q)
}

/// Size-weighted mean internal edge density; singletons count as 1.
pub fn density(snapshot: &Snapshot, p: &Partition) -> Result<f64> {
    if snapshot.node_count() == 0 {
        return Err(Error::EmptySnapshot);
    }
    let stats = community_stats(snapshot, p)?;
    let n = p.len() as f64;
    let mut total = 0.0;
    for (_, edges, _, size) in stats.values() {
        let d = if *size < 2 { 1.0 } else { 2.0 * *edges as f64 / (*size * (*size - 1)) as f64 };
        total += *size as f64 / n * d;
    }
    Ok(total)
}

/// Metric bundle for one snapshot. Label-based scores are absent when no
/// ground truth is available.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub nmi: Option<f64>,
    pub nf1: Option<f64>,
    pub modularity: Option<f64>,
    pub density: Option<f64>,
}

/// Scores a prediction; label metrics ignore nodes whose truth is background.
pub fn evaluate_snapshot(snapshot: &Snapshot, pred: &Partition, truth: Option<&Partition>) -> Result<MetricBundle> {
    let (nmi_v, nf1_v) = match truth {
        Some(t) => {
            check_lengths(pred, t)?;
            let (p, t) = Partition::restrict_to_labeled(pred, t);
            (Some(nmi(&p, &t)?), Some(nf1(&p, &t)?))
        }
        None => (None, None),
    };
    let modularity_v = if snapshot.edge_count() > 0 { Some(modularity(snapshot, pred)?) } else { None };
    Ok(MetricBundle { nmi: nmi_v, nf1: nf1_v, modularity: modularity_v, density: Some(density(snapshot, pred)?) })
}

/// Field-wise mean over snapshots, skipping missing values.
pub fn average(bundles: &[MetricBundle]) -> MetricBundle {
    fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let v: Vec<f64> = values.flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
    MetricBundle {
        nmi: mean(bundles.iter().map(|b| b.nmi)),
        nf1: mean(bundles.iter().map(|b| b.nf1)),
        modularity: mean(bundles.iter().map(|b| b.modularity)),
        density: mean(bundles.iter().map(|b| b.density)),
    }
}
