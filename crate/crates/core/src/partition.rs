use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Reserved label for nodes that belong to no community at a timestamp
/// (members of hidden communities in the Green generator).
pub const BACKGROUND: u32 = u32::MAX;

/// A node → cluster map for one snapshot. Every node in `0..n` carries exactly
/// one label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<u32>,
}

impl Partition {
    pub fn new(labels: Vec<u32>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> u32 {
        self.labels[node]
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    /// Distinct labels, background excluded.
    pub fn cluster_count(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.iter().copied().filter(|&l| l != BACKGROUND).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Members of each cluster, keyed by label, in ascending label order.
    pub fn clusters(&self) -> Vec<(u32, Vec<usize>)> {
        let mut map: HashMap<u32, Vec<usize>> = HashMap::new();
        for (node, &label) in self.labels.iter().enumerate() {
            map.entry(label).or_default().push(node);
        }
        let mut out: Vec<_> = map.into_iter().collect();
        out.sort_unstable_by_key(|(label, _)| *label);
        out
    }

    /// Relabels clusters to `0..k` in order of first appearance.
    pub fn densified(&self) -> Partition {
        let mut map = HashMap::new();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// Restricts both partitions to the nodes where `truth` is not background.
    pub fn restrict_to_labeled(pred: &Partition, truth: &Partition) -> (Partition, Partition) {
        let (p, t): (Vec<u32>, Vec<u32>) = pred
            .labels
            .iter()
            .zip(&truth.labels)
            .filter(|(_, &t)| t != BACKGROUND)
            .map(|(&p, &t)| (p, t))
            .unzip();
        (Partition::new(p), Partition::new(t))
    }
}

impl From<Vec<u32>> for Partition {
    fn from(labels: Vec<u32>) -> Self {
        Partition::new(labels)
    }
}
