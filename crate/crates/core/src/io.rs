//! Directory format for dynamic graphs and label files.
//!
//! A dynamic graph is a directory holding `t0001.edges … tNNNN.edges` and,
//! optionally, matching `tNNNN.labels`. Predictions use `tNNNN.pred` with the
//! label-file layout. Edge lines are `u v [w]` with 0-based ids; label lines
//! are `node cluster`, where cluster `-1` marks a node outside every
//! community. Lines starting with `#` are comments, except for the
//! `# nodes N` header, which fixes the node count when trailing nodes are
//! isolated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Snapshot};
use crate::partition::{Partition, BACKGROUND};

pub const EDGES: &str = "edges";
pub const LABELS: &str = "labels";
pub const PREDICTIONS: &str = "pred";

/// `dir/tNNNN.ext` for the 1-based `timestamp`.
pub fn snapshot_path(dir: &Path, timestamp: usize, ext: &str) -> PathBuf {
    dir.join(format!("t{timestamp:04}.{ext}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Timestamps `1..=τ` of the files with extension `ext`. Gaps are an error.
pub fn list_timestamps(dir: &Path, ext: &str) -> Result<Vec<usize>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_suffix(ext).and_then(|s| s.strip_suffix('.')) else { continue };
        if let Some(t) = stem.strip_prefix('t').and_then(|d| d.parse::<usize>().ok()) {
            found.push(t);
        }
    }
    found.sort_unstable();
    for (i, &t) in found.iter().enumerate() {
        if t != i + 1 {
            return Err(Error::Parse {
                path: snapshot_path(dir, i + 1, ext),
                line: 0,
                reason: format!("missing snapshot; found t{t:04}.{ext} instead"),
            });
        }
    }
    Ok(found)
}

struct Lines<'a> {
    path: &'a Path,
    text: &'a str,
}

impl<'a> Lines<'a> {
    /// Non-comment lines with their 1-based line numbers, split on whitespace.
    fn records(&self) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
        self.text.lines().enumerate().filter_map(|(i, line)| {
            let line = line.trim();
            (!line.is_empty() && !line.starts_with('#')).then(|| (i + 1, line.split_whitespace().collect()))
        })
    }

    fn declared_nodes(&self) -> Result<Option<usize>> {
        for (i, line) in self.text.lines().enumerate() {
            if let Some(rest) = line.trim().strip_prefix('#') {
                let mut words = rest.split_whitespace();
                if words.next() == Some("nodes") {
                    let n = words.next().and_then(|w| w.parse().ok());
                    return n.map(Some).ok_or_else(|| self.error(i + 1, "malformed `# nodes` header".into()));
                }
            }
        }
        Ok(None)
    }

    fn error(&self, line: usize, reason: String) -> Error {
        Error::Parse { path: self.path.to_path_buf(), line, reason }
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, word: &str, what: &str) -> Result<T> {
        word.parse().map_err(|_| self.error(line, format!("bad {what} `{word}`")))
    }
}

type EdgeList = Vec<(usize, usize, f64)>;

fn parse_edges(path: &Path, text: &str) -> Result<(EdgeList, Option<usize>)> {
    let lines = Lines { path, text };
    let mut edges = Vec::new();
    for (line, words) in lines.records() {
        if !(2..=3).contains(&words.len()) {
            return Err(lines.error(line, format!("expected `u v [w]`, found {} fields", words.len())));
        }
        let u = lines.parse(line, words[0], "node id")?;
        let v = lines.parse(line, words[1], "node id")?;
        let w = match words.get(2) {
            Some(w) => lines.parse(line, w, "weight")?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    Ok((edges, lines.declared_nodes()?))
}

/// `(node, label)` pairs and the declared node count.
type LabelRecords = (Vec<(usize, u32)>, Option<usize>);

/// Parses a label file into `(node, label)` pairs.
fn parse_labels(path: &Path, text: &str) -> Result<LabelRecords> {
    let lines = Lines { path, text };
    let mut pairs = Vec::new();
    for (line, words) in lines.records() {
        if words.len() != 2 {
            return Err(lines.error(line, format!("expected `node cluster`, found {} fields", words.len())));
        }
        let node = lines.parse(line, words[0], "node id")?;
        let label: i64 = lines.parse(line, words[1], "cluster id")?;
        let label = match label {
            -1 => BACKGROUND,
            l if (0..BACKGROUND as i64).contains(&l) => l as u32,
            l => return Err(lines.error(line, format!("cluster id {l} out of range"))),
        };
        pairs.push((node, label));
    }
    Ok((pairs, lines.declared_nodes()?))
}

fn to_partition(path: &Path, pairs: &[(usize, u32)], n: usize) -> Result<Partition> {
    let mut labels = vec![BACKGROUND; n];
    let mut seen = vec![false; n];
    for &(node, label) in pairs {
        if node >= n {
            return Err(Error::Parse { path: path.to_path_buf(), line: 0, reason: format!("node {node} outside 0..{n}") });
        }
        if std::mem::replace(&mut seen[node], true) {
            return Err(Error::Parse { path: path.to_path_buf(), line: 0, reason: format!("node {node} labeled twice") });
        }
        labels[node] = label;
    }
    Ok(Partition::new(labels))
}

/// Reads a label file. Nodes without a line are background.
pub fn read_partition(path: &Path, node_count: usize) -> Result<Partition> {
    let (pairs, _) = parse_labels(path, &read(path)?)?;
    to_partition(path, &pairs, node_count)
}

pub fn write_partition(path: &Path, partition: &Partition) -> Result<()> {
    let mut text = format!("# nodes {}\n", partition.len());
    for (node, &label) in partition.labels().iter().enumerate() {
        if label == BACKGROUND {
            writeln!(text, "{node} -1").unwrap();
        } else {
            writeln!(text, "{node} {label}").unwrap();
        }
    }
    write(path, &text)
}

/// Reads a dynamic graph directory, with ground truth when every snapshot
/// has a label file. The node count is the largest `# nodes` header or
/// otherwise one past the largest id in any edge or label file.
pub fn read_dynamic_graph(dir: &Path) -> Result<DynamicGraph> {
    let stamps = list_timestamps(dir, EDGES)?;
    if stamps.is_empty() {
        return Err(Error::NoSnapshots);
    }
    let mut n = 0;
    let mut edge_lists = Vec::with_capacity(stamps.len());
    for &t in &stamps {
        let path = snapshot_path(dir, t, EDGES);
        let (edges, declared) = parse_edges(&path, &read(&path)?)?;
        n = edges.iter().map(|&(u, v, _)| u.max(v) + 1).fold(n.max(declared.unwrap_or(0)), usize::max);
        edge_lists.push(edges);
    }
    let label_stamps = list_timestamps(dir, LABELS)?;
    let mut label_lists = Vec::new();
    if !label_stamps.is_empty() {
        if label_stamps.len() != stamps.len() {
            return Err(Error::InvalidConfig(format!(
                "{} label files for {} snapshots in {}",
                label_stamps.len(),
                stamps.len(),
                dir.display()
            )));
        }
        for &t in &label_stamps {
            let path = snapshot_path(dir, t, LABELS);
            let (pairs, declared) = parse_labels(&path, &read(&path)?)?;
            n = pairs.iter().map(|&(a, _)| a + 1).fold(n.max(declared.unwrap_or(0)), usize::max);
            label_lists.push((path, pairs));
        }
    }
    let snapshots = stamps
        .iter()
        .zip(edge_lists)
        .map(|(&t, edges)| Snapshot::from_edges(n, t, edges).map_err(|e| e.at_snapshot(t)))
        .collect::<Result<Vec<_>>>()?;
    let graph = DynamicGraph::new(snapshots)?;
    if label_lists.is_empty() {
        return Ok(graph);
    }
    let labels = label_lists.iter().map(|(path, pairs)| to_partition(path, pairs, n)).collect::<Result<Vec<_>>>()?;
    graph.with_labels(labels)
}

/// Writes edge files, and label files when the graph carries ground truth.
pub fn write_dynamic_graph(dir: &Path, graph: &DynamicGraph) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, snap) in graph.snapshots().iter().enumerate() {
        let mut text = format!("# nodes {}\n", graph.node_count());
        for (u, v, w) in snap.edges() {
            if w == 1.0 {
                writeln!(text, "{u} {v}").unwrap();
            } else {
                writeln!(text, "{u} {v} {w}").unwrap();
            }
        }
        write(&snapshot_path(dir, t + 1, EDGES), &text)?;
    }
    if let Some(labels) = graph.labels() {
        for (t, p) in labels.iter().enumerate() {
            write_partition(&snapshot_path(dir, t + 1, LABELS), p)?;
        }
    }
    Ok(())
}

pub fn write_predictions(dir: &Path, partitions: &[Partition]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, p) in partitions.iter().enumerate() {
        write_partition(&snapshot_path(dir, t + 1, PREDICTIONS), p)?;
    }
    Ok(())
}

/// Reads `tNNNN.ext` label files for `1..=τ`, where `ext` is
/// [`PREDICTIONS`] or [`LABELS`].
pub fn read_partitions(dir: &Path, ext: &str, node_count: usize) -> Result<Vec<Partition>> {
    list_timestamps(dir, ext)?.into_iter().map(|t| read_partition(&snapshot_path(dir, t, ext), node_count)).collect()
}

/// Pretty JSON to `path`.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_lines_accept_comments_and_weights() {
        let (edges, n) = parse_edges(Path::new("x"), "# nodes 7\n0 1\n\n# note\n2 3 0.5\n").unwrap();
        assert_eq!(edges, vec![(0, 1, 1.0), (2, 3, 0.5)]);
        assert_eq!(n, Some(7));
    }

    #[test]
    fn malformed_lines_name_file_and_line() {
        let err = parse_edges(Path::new("g/t0001.edges"), "0 1\n0 x\n").unwrap_err();
        assert_eq!(err.to_string(), "g/t0001.edges:2: bad node id `x`");
        let err = parse_edges(Path::new("e"), "0 1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_labels(Path::new("l"), "0 -2\n").unwrap_err();
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn background_round_trips_as_minus_one() {
        let (pairs, _) = parse_labels(Path::new("l"), "0 3\n1 -1\n").unwrap();
        assert_eq!(pairs, vec![(0, 3), (1, BACKGROUND)]);
        let p = to_partition(Path::new("l"), &pairs, 3).unwrap();
        assert_eq!(p.labels(), &[3, BACKGROUND, BACKGROUND]);
        assert!(to_partition(Path::new("l"), &[(0, 1), (0, 2)], 2).is_err());
    }
}
