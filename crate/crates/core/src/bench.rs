//! Sweep harness: noise, node-count, snapshot-count and ablation sweeps with
//! repetitions over seeds, aggregated to mean and sample standard deviation.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{inject_noise, DynamicGraph};
use crate::io::read_dynamic_graph;
use crate::pipeline::{run_ablation, RunConfig, Variant};
use crate::seed::{self, tag};
use crate::synthgen::{gen_green, gen_syn_fix, gen_syn_var_scaled, GreenEvent, GreenParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Dataset {
    SynFix,
    SynVar { scale: usize },
    Green { event: GreenEvent, n: usize, tau: usize },
    /// A dataset directory; the repetition seed only drives the solver and noise.
    Dir { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "kebab-case")]
pub enum Sweep {
    Noise(Vec<f64>),
    Nodes(Vec<usize>),
    Snapshots(Vec<usize>),
    Ablation(Vec<Variant>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Noise(_) => "noise",
            Sweep::Nodes(_) => "nodes",
            Sweep::Snapshots(_) => "snapshots",
            Sweep::Ablation(_) => "ablation",
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            Sweep::Noise(v) => v.iter().map(|x| x.to_string()).collect(),
            Sweep::Nodes(v) | Sweep::Snapshots(v) => v.iter().map(|x| x.to_string()).collect(),
            Sweep::Ablation(v) => v.iter().map(|x| x.name().to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchSpec {
    pub dataset: Dataset,
    pub sweep: Sweep,
    /// Runs per sweep value, with seeds `seed, seed + 1, …`.
    pub repetitions: usize,
    pub seed: u64,
    pub config: RunConfig,
    /// Worker threads for independent cells; 1 runs them in order.
    pub jobs: usize,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if self.seed.checked_add(self.repetitions as u64 - 1).is_none() {
            return bad("seed range overflows");
        }
        if self.sweep.labels().is_empty() {
            return bad("sweep needs at least one value");
        }
        match (&self.sweep, &self.dataset) {
            (Sweep::Noise(v), _) if v.iter().any(|f| !(0.0..=1.0).contains(f)) => bad("noise fractions must lie in [0, 1]"),
            (Sweep::Nodes(_), Dataset::SynFix | Dataset::Dir { .. }) => bad("node sweeps need a green or syn-var dataset"),
            (Sweep::Nodes(v), Dataset::SynVar { .. }) if v.iter().any(|n| n % 256 != 0 || *n == 0) => {
                bad("syn-var node counts must be positive multiples of 256")
            }
            (Sweep::Snapshots(v), _) if v.contains(&0) => bad("snapshot counts must be positive"),
            _ => self.config.validate(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repetitions as u64).map(|i| self.seed + i).collect()
    }
}

/// Outcome of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub value: String,
    pub seed: u64,
    pub nmi: Option<f64>,
    pub nf1: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and sample standard deviation (zero for a single value).
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Some(Summary { mean, std: var.sqrt() })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Row {
    pub value: String,
    pub runs: usize,
    pub failed: usize,
    pub nmi: Option<Summary>,
    pub nf1: Option<Summary>,
    pub seconds: Option<Summary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub axis: String,
    pub rows: Vec<Row>,
    pub cells: Vec<Cell>,
    /// Least-squares slope of log mean runtime against log node count.
    pub loglog_slope: Option<f64>,
}

fn truncate(graph: DynamicGraph, tau: usize) -> Result<DynamicGraph> {
    if tau > graph.len() {
        return Err(Error::InvalidConfig(format!("{tau} snapshots requested, dataset has {}", graph.len())));
    }
    let labels = graph.labels().map(|l| l[..tau].to_vec());
    let g = DynamicGraph::new(graph.snapshots()[..tau].to_vec())?;
    match labels {
        Some(l) => g.with_labels(l),
        None => Ok(g),
    }
}

fn dataset(spec: &BenchSpec, nodes: Option<usize>, tau: Option<usize>, seed: u64) -> Result<DynamicGraph> {
    let graph = match &spec.dataset {
        Dataset::SynFix => gen_syn_fix(seed)?,
        Dataset::SynVar { scale } => gen_syn_var_scaled(seed, nodes.map_or(*scale, |n| n / 256))?,
        Dataset::Green { event, n, tau: steps } => {
            let mut params = GreenParams::new(*event, seed);
            params.n = nodes.unwrap_or(*n);
            params.tau = tau.unwrap_or(*steps);
            return gen_green(&params);
        }
        Dataset::Dir { path } => read_dynamic_graph(path)?,
    };
    match tau {
        Some(t) => truncate(graph, t),
        None => Ok(graph),
    }
}

fn run_cell(spec: &BenchSpec, index: usize, seed: u64) -> Result<(Option<f64>, Option<f64>, f64)> {
    let mut variant = Variant::Full;
    let (mut nodes, mut tau, mut noise) = (None, None, 0.0);
    match &spec.sweep {
        Sweep::Noise(v) => noise = v[index],
        Sweep::Nodes(v) => nodes = Some(v[index]),
        Sweep::Snapshots(v) => tau = Some(v[index]),
        Sweep::Ablation(v) => variant = v[index],
    }
    let mut graph = dataset(spec, nodes, tau, seed)?;
    if noise > 0.0 {
        graph = inject_noise(&graph, noise, seed::derive(seed, tag::BENCH, index as u64))?;
    }
    let config = RunConfig { seed, ..spec.config.clone() };
    let start = Instant::now();
    let result = run_ablation(&config, variant, &graph)?;
    Ok((result.average.nmi, result.average.nf1, start.elapsed().as_secs_f64()))
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs every (value, seed) cell. A failing cell is recorded, not fatal.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    let labels = spec.sweep.labels();
    let jobs: Vec<(usize, u64)> = (0..labels.len()).flat_map(|i| spec.seeds().into_iter().map(move |s| (i, s))).collect();
    let cell = |&(i, seed): &(usize, u64)| {
        let outcome = run_cell(spec, i, seed);
        if let Err(e) = &outcome {
            log::warn!("{} = {} seed {seed}: {e}", spec.sweep.name(), labels[i]);
        }
        match outcome {
            Ok((nmi, nf1, seconds)) => Cell { value: labels[i].clone(), seed, nmi, nf1, seconds, error: None },
            Err(e) => Cell { value: labels[i].clone(), seed, nmi: None, nf1: None, seconds: 0.0, error: Some(e.to_string()) },
        }
    };
    let cells: Vec<Cell> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(cell).collect())
    } else {
        jobs.iter().map(cell).collect()
    };
    let rows: Vec<Row> = labels
        .iter()
        .map(|label| {
            let own: Vec<&Cell> = cells.iter().filter(|c| &c.value == label && c.error.is_none()).collect();
            let collect = |f: fn(&Cell) -> Option<f64>| own.iter().filter_map(|c| f(c)).collect::<Vec<_>>();
            Row {
                value: label.clone(),
                runs: spec.repetitions,
                failed: spec.repetitions - own.len(),
                nmi: Summary::of(&collect(|c| c.nmi)),
                nf1: Summary::of(&collect(|c| c.nf1)),
                seconds: Summary::of(&collect(|c| Some(c.seconds))),
            }
        })
        .collect();
    let loglog_slope = match &spec.sweep {
        Sweep::Nodes(v) => {
            let points: Vec<(f64, f64)> = v
                .iter()
                .zip(&rows)
                .filter_map(|(&n, r)| r.seconds.filter(|s| s.mean > 0.0).map(|s| ((n as f64).ln(), s.mean.ln())))
                .collect();
            least_squares_slope(&points)
        }
        _ => None,
    };
    Ok(BenchReport { axis: spec.sweep.name().to_string(), rows, cells, loglog_slope })
}

pub const CSV_HEADER: &str = "axis,value,runs,failed,nmi_mean,nmi_std,nf1_mean,nf1_std,seconds_mean,seconds_std";

impl BenchReport {
    /// One line per sweep value under [`CSV_HEADER`]; missing statistics are empty fields.
    pub fn to_csv(&self) -> String {
        let field = |s: Option<Summary>| s.map_or_else(|| ",".to_string(), |s| format!("{:.6},{:.6}", s.mean, s.std));
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{},{}", self.axis, r.value, r.runs, r.failed, field(r.nmi), field(r.nf1), field(r.seconds))
                .unwrap();
        }
        out
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().map(|r| r.failed).sum()
    }
}
