use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dygmf::bench::{run_bench, BenchSpec, Dataset, Sweep};
use dygmf::io::{read_dynamic_graph, read_partitions, write_dynamic_graph, write_json, write_predictions, PREDICTIONS};
use dygmf::metrics::{average, evaluate_snapshot, MetricBundle};
use dygmf::pipeline::{run, RunConfig, Variant};
use dygmf::synthgen::{gen_green, gen_syn_fix, gen_syn_var_scaled, GreenEvent, GreenParams};
use dygmf::{inject_noise, DynamicGraph};
use serde::Serialize;
use serde_json::json;

use crate::{Axis, BenchArgs, ClusterArgs, CliError, EvaluateArgs, GenerateArgs, Generator, NoiseArgs, SolverArgs};

type Result<T> = std::result::Result<T, CliError>;

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn event(name: &str) -> Result<GreenEvent> {
    name.parse().map_err(usage)
}

/// A dataset directory that exists; anything else is a usage error.
fn dataset_dir(path: &Path) -> Result<DynamicGraph> {
    if !path.is_dir() {
        return Err(usage(format!("{} is not a directory", path.display())));
    }
    read_dynamic_graph(path).map_err(|e| match e {
        dygmf::Error::NoSnapshots => usage(format!("no tNNNN.edges files in {}", path.display())),
        e => e.into(),
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Run(dygmf::Error::Io { path: path.to_path_buf(), source: e }))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Run(dygmf::Error::Io { path: path.to_path_buf(), source: e }))
}

pub fn build_config(args: &SolverArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    for item in &args.overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key, value).map_err(usage)?;
    }
    macro_rules! apply {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = args.$flag { config.$field = v; })*
        };
    }
    apply!(seed => seed, r => rank, lambda => lambda, beta => beta, mu => mu, alpha => alpha, k_max => k_max, tol => tol, max_iter => max_iter);
    if let Some(s) = args.s {
        config.subsets = Some(s);
    }
    if let Some(f) = args.landmark_fraction {
        config.landmark_fraction = Some(f);
    }
    config.parallel |= args.parallel;
    config.no_tsmf |= args.no_tsmf;
    config.no_bcr |= args.no_bcr;
    config.no_seu |= args.no_seu;
    config.validate().map_err(usage)?;
    if [config.no_tsmf, config.no_bcr, config.no_seu].iter().filter(|&&f| f).count() > 1 {
        return Err(usage("at most one of --no-tsmf, --no-bcr, --no-seu may be set"));
    }
    Ok(config)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let (name, graph, params) = match args.generator {
        Generator::SynFix => ("syn-fix", gen_syn_fix(args.seed)?, json!({})),
        Generator::SynVar => {
            if args.scale == 0 {
                return Err(usage("--scale must be at least 1"));
            }
            ("syn-var", gen_syn_var_scaled(args.seed, args.scale)?, json!({ "scale": args.scale }))
        }
        Generator::Green => {
            let params = GreenParams {
                n: args.n,
                tau: args.tau,
                avg_degree: args.avg_degree,
                max_degree: args.max_degree,
                community_count_range: (args.communities, args.communities),
                mixing: args.mixing,
                ..GreenParams::new(event(&args.event)?, args.seed)
            };
            let graph = gen_green(&params).map_err(|e| match e {
                dygmf::Error::InfeasibleParams(m) => usage(format!("infeasible generator parameters: {m}")),
                e => e.into(),
            })?;
            ("green", graph, serde_json::to_value(&params).expect("plain data"))
        }
    };
    write_dynamic_graph(&args.out, &graph)?;
    let meta = json!({
        "generator": name,
        "seed": args.seed,
        "params": params,
        "nodes": graph.node_count(),
        "snapshots": graph.len(),
        "edges": graph.total_edges(),
    });
    write_json(&args.out.join("meta.json"), &meta)?;
    println!("wrote {} snapshots of {} nodes to {}", graph.len(), graph.node_count(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    input: &'a Path,
    config: &'a RunConfig,
    variant: Variant,
    snapshots: &'a [dygmf::pipeline::SnapshotReport],
    average: &'a MetricBundle,
    timings: &'a dygmf::pipeline::PhaseTimings,
    total_seconds: f64,
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let config = build_config(&args.solver)?;
    let graph = dataset_dir(&args.input)?;
    log::info!("clustering {} snapshots of {} nodes", graph.len(), graph.node_count());
    let result = run(&config, &graph)?;
    create_dir(&args.out)?;
    write_predictions(&args.out, &result.partitions)?;
    let report = ClusterReport {
        input: &args.input,
        config: &config,
        variant: result.variant,
        snapshots: &result.snapshots,
        average: &result.average,
        timings: &result.timings,
        total_seconds: result.total_seconds,
    };
    write_json(&args.out.join("result.json"), &report)?;
    let mut log_text = format!("# input {}\n# variant {}\n", args.input.display(), result.variant.name());
    for line in config.to_kv().lines() {
        writeln!(log_text, "# {line}").unwrap();
    }
    for s in &result.snapshots {
        writeln!(
            log_text,
            "t={} clusters={} rank={} landmarks={} dynamic={} frozen={} sweeps={} objective={:.6e} nmi={} nf1={} seconds={:.3}",
            s.timestamp,
            s.clusters,
            s.rank,
            s.landmarks,
            s.dynamic,
            s.frozen,
            s.sweeps,
            s.objective.last().copied().unwrap_or(f64::NAN),
            fmt_metric(s.metrics.nmi),
            fmt_metric(s.metrics.nf1),
            s.timings.sum(),
        )
        .unwrap();
    }
    writeln!(log_text, "total_seconds={:.3}", result.total_seconds).unwrap();
    write_text(&args.out.join("run.log"), &log_text)?;
    println!(
        "{} snapshots, mean nmi {} nf1 {}, {:.2}s",
        result.partitions.len(),
        fmt_metric(result.average.nmi),
        fmt_metric(result.average.nf1),
        result.total_seconds
    );
    Ok(())
}

#[derive(Serialize)]
struct SnapshotScore {
    timestamp: usize,
    #[serde(flatten)]
    metrics: MetricBundle,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let graph = dataset_dir(&args.truth)?;
    if !args.pred.is_dir() {
        return Err(usage(format!("{} is not a directory", args.pred.display())));
    }
    let preds = read_partitions(&args.pred, PREDICTIONS, graph.node_count())?;
    if preds.is_empty() {
        return Err(usage(format!("no tNNNN.pred files in {}", args.pred.display())));
    }
    if preds.len() != graph.len() {
        return Err(usage(format!(
            "snapshot count mismatch: {} prediction files in {} but {} snapshots in {}",
            preds.len(),
            args.pred.display(),
            graph.len(),
            args.truth.display()
        )));
    }
    let mut scores = Vec::with_capacity(preds.len());
    for (t, pred) in preds.iter().enumerate() {
        let truth = graph.labels().map(|l| &l[t]);
        let metrics = evaluate_snapshot(graph.snapshot(t), pred, truth).map_err(|e| e.at_snapshot(t + 1))?;
        scores.push(SnapshotScore { timestamp: t + 1, metrics });
    }
    let avg = average(&scores.iter().map(|s| s.metrics.clone()).collect::<Vec<_>>());
    let report = json!({ "snapshots": scores, "average": avg });
    println!("{}", serde_json::to_string_pretty(&report).expect("plain data"));
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn noise(args: &NoiseArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.fraction) {
        return Err(usage(format!("--fraction {} outside [0, 1]", args.fraction)));
    }
    let graph = dataset_dir(&args.input)?;
    let noisy = inject_noise(&graph, args.fraction, args.seed)?;
    write_dynamic_graph(&args.out, &noisy)?;
    let meta = json!({
        "source": args.input,
        "noise_fraction": args.fraction,
        "seed": args.seed,
        "nodes": noisy.node_count(),
        "snapshots": noisy.len(),
        "edges": noisy.total_edges(),
    });
    write_json(&args.out.join("meta.json"), &meta)?;
    println!("added {} edges", noisy.total_edges() - graph.total_edges());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(values: &str) -> Result<Vec<T>> {
    values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| usage(format!("bad sweep value `{v}`"))))
        .collect()
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let dataset = match args.dataset.as_str() {
        "syn-fix" => Dataset::SynFix,
        "syn-var" => Dataset::SynVar { scale: args.scale },
        "green" => Dataset::Green { event: event(&args.event)?, n: args.n, tau: args.tau },
        dir => {
            let path = PathBuf::from(dir);
            if !path.is_dir() {
                return Err(usage(format!("dataset `{dir}` is neither a generator name nor a directory")));
            }
            Dataset::Dir { path }
        }
    };
    let sweep = match args.sweep {
        Axis::Noise => Sweep::Noise(parse_list(&args.values)?),
        Axis::Nodes => Sweep::Nodes(parse_list(&args.values)?),
        Axis::Snapshots => Sweep::Snapshots(parse_list(&args.values)?),
        Axis::Ablation => Sweep::Ablation(parse_list(&args.values)?),
    };
    let spec = BenchSpec { dataset, sweep, repetitions: args.reps, seed: args.base_seed, config: build_config(&args.solver)?, jobs: args.jobs };
    spec.validate().map_err(usage)?;
    let report = run_bench(&spec)?;
    create_dir(&args.out)?;
    let csv = report.to_csv();
    write_text(&args.out.join("bench.csv"), &csv)?;
    write_json(&args.out.join("bench.json"), &json!({ "spec": spec, "report": report }))?;
    print!("{csv}");
    if let Some(slope) = report.loglog_slope {
        println!("log-log runtime slope {slope:.3}");
    }
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::Failed(format!("{n} of {} runs failed; see bench.json", report.cells.len()))),
    }
}
