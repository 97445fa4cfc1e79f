//! Experiment orchestration over algorithms, topologies and seeds.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ObjectiveKind, TopologySpec};
use super::data::{ingest_ratings, synth_ratings, IngestReport};
use super::plot::emit_plots;
use crate::algorithms::{run_dmfw, run_dobga, run_mono_dmfw, AlgorithmKind, Trace};
use crate::error::{invalid, Result};
use crate::evaluation::{
    alpha_regret, audit_counters, benchmark_dominance, offline_opt, probe_report, Benchmark, CounterAudit,
    Dominance, ProbeReport, RegretReport,
};
use crate::network::WeightMatrix;
use crate::objectives::ObjectiveStream;
use crate::region::{FeasibleRegion, Region};

pub const CSV_HEADER: [&str; 10] = [
    "round",
    "node",
    "algorithm",
    "topology",
    "seed",
    "reward",
    "cum_regret",
    "regret_ratio",
    "grad_queries",
    "exchanges",
];

/// Everything shared by the cells of one experiment: the objective stream,
/// the region and the hindsight benchmark.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub stream: ObjectiveStream,
    pub region: FeasibleRegion,
    pub benchmark: Benchmark,
    pub ingest: Option<IngestReport>,
}

impl Scenario {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let e = &config.experiment;
        let o = &config.objective;
        let region = config.region()?;
        let n = config.region.n;
        let (stream, ingest) = match o.kind {
            ObjectiveKind::Facility => {
                let b = config.users_per_round()?;
                let (ratings, report) = match &o.ratings {
                    Some(path) => {
                        let got = ingest_ratings(path, n, e.rounds, b)?;
                        (got.ratings, Some(got.report))
                    }
                    None => (synth_ratings(o.data_seed, e.rounds, b, n, &o.levels, o.rate_prob)?, None),
                };
                (ObjectiveStream::facility(&ratings.partition(e.nodes)?, e.sigma)?, report)
            }
            ObjectiveKind::Quadratic => (
                ObjectiveStream::random_quadratic(e.rounds, e.nodes, n, o.scale, e.sigma, o.data_seed)?,
                None,
            ),
        };
        let benchmark = offline_opt(&stream, &region, config.fw_steps())?;
        // Warm the geometry cache.
        region.geometry();
        Ok(Self {
            config: config.clone(),
            stream,
            region,
            benchmark,
            ingest,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub tag: String,
    pub algorithm: AlgorithmKind,
    pub topology: String,
    pub seed: u64,
    pub trace: Trace,
    pub regret: RegretReport,
    /// `Err` holds the audit failure message.
    pub audit: std::result::Result<CounterAudit, String>,
    pub probes: ProbeReport,
    pub dominance: Dominance,
    /// Wall-clock seconds spent in the algorithm itself.
    pub elapsed: f64,
}

impl CellOutcome {
    pub fn passed(&self) -> bool {
        self.audit.is_ok() && self.probes.passed()
    }
}

pub fn cell_tag(algorithm: AlgorithmKind, topology: &str, seed: u64) -> String {
    format!("{}_{topology}_s{seed}", algorithm.name())
}

/// Build the network, run one algorithm and evaluate the trace.
pub fn run_cell(scenario: &Scenario, algorithm: AlgorithmKind, topology: &TopologySpec, seed: u64) -> Result<CellOutcome> {
    let cfg = &scenario.config;
    let graph = topology.build(cfg.experiment.nodes, seed)?;
    let weights = WeightMatrix::metropolis(&graph)?;
    let (stream, region) = (&scenario.stream, &scenario.region);
    let clock = Instant::now();
    let trace = match algorithm {
        AlgorithmKind::MonoDmfw => run_mono_dmfw(stream, &weights, region, &cfg.mono_config()?, seed)?,
        AlgorithmKind::Dobga => run_dobga(stream, &weights, region, &cfg.dobga_config(), seed)?,
        AlgorithmKind::Dmfw => run_dmfw(stream, &weights, region, &cfg.dmfw_config()?, seed)?,
    };
    let elapsed = clock.elapsed().as_secs_f64();
    let regret = alpha_regret(&trace, stream, region, &scenario.benchmark, cfg.eval.alpha)?;
    let label = topology.label();
    Ok(CellOutcome {
        tag: cell_tag(algorithm, &label, seed),
        algorithm,
        topology: label,
        seed,
        audit: audit_counters(&trace).map_err(|e| e.to_string()),
        probes: probe_report(&trace)?,
        dominance: benchmark_dominance(&trace, stream, &scenario.benchmark)?,
        regret,
        trace,
        elapsed,
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    round: usize,
    node: usize,
    algorithm: &'a str,
    topology: &'a str,
    seed: u64,
    reward: f64,
    cum_regret: f64,
    regret_ratio: f64,
    grad_queries: u64,
    exchanges: u64,
}

fn write_cell_csv(cell: &CellOutcome, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in 0..cell.trace.rounds() {
        for node in 0..cell.trace.nodes() {
            w.serialize(CsvRow {
                round: t + 1,
                node,
                algorithm: cell.algorithm.name(),
                topology: &cell.topology,
                seed: cell.seed,
                reward: cell.trace.rewards[t][node],
                cum_regret: cell.regret.cum_regret[t][node],
                regret_ratio: cell.regret.ratio[t][node],
                grad_queries: cell.trace.grad_queries[t][node],
                exchanges: cell.trace.exchanges[t][node],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CellMeta<'a> {
    tag: &'a str,
    algorithm: &'a str,
    topology: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    resolved: serde_json::Value,
    trace: &'a crate::algorithms::TraceMeta,
    benchmark: &'a Benchmark,
    final_ratio: f64,
    audit: serde_json::Value,
    probes: &'a ProbeReport,
    dominance: &'a Dominance,
    data: serde_json::Value,
    /// Oracle regret guarantee `c diam G sqrt(t)` uses `c = 1.5`.
    oracle_regret_factor: f64,
    elapsed_seconds: f64,
}

fn resolved_params(cfg: &ExperimentConfig, algorithm: AlgorithmKind) -> Result<serde_json::Value> {
    Ok(match algorithm {
        AlgorithmKind::MonoDmfw => serde_json::to_value(cfg.mono_config()?)?,
        AlgorithmKind::Dobga => serde_json::to_value(cfg.dobga_config())?,
        AlgorithmKind::Dmfw => serde_json::to_value(cfg.dmfw_config()?)?,
    })
}

fn write_cell_meta(scenario: &Scenario, cell: &CellOutcome, path: &Path) -> Result<()> {
    let cfg = &scenario.config;
    let mut resolved = resolved_params(cfg, cell.algorithm)?;
    if let serde_json::Value::Object(map) = &mut resolved {
        map.insert("fw_steps".into(), cfg.fw_steps().into());
        map.insert("alpha".into(), cfg.eval.alpha.into());
    }
    let data = serde_json::json!({
        "source": match (&cfg.objective.kind, &cfg.objective.ratings) {
            (ObjectiveKind::Quadratic, _) => "random-quadratic".to_string(),
            (_, Some(p)) => p.display().to_string(),
            (_, None) => "synthetic".to_string(),
        },
        "user_order": "first-appearance",
        "unrated_entries": 0.0,
        "users_without_ratings": "kept as all-zero vectors",
        "ingest": scenario.ingest,
    });
    let meta = CellMeta {
        tag: &cell.tag,
        algorithm: cell.algorithm.name(),
        topology: &cell.topology,
        seed: cell.seed,
        config: cfg,
        resolved,
        trace: &cell.trace.meta,
        benchmark: &scenario.benchmark,
        final_ratio: cell.regret.final_ratio(),
        audit: match &cell.audit {
            Ok(a) => serde_json::json!({ "passed": true, "expected": a.expected, "observed": a.observed }),
            Err(msg) => serde_json::json!({ "passed": false, "error": msg }),
        },
        probes: &cell.probes,
        dominance: &cell.dominance,
        data,
        oracle_regret_factor: 1.5,
        elapsed_seconds: cell.elapsed,
    };
    fs::write(path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// A cell that errored or failed its audit or probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub tag: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub tag: String,
    pub algorithm: String,
    pub topology: String,
    pub seed: u64,
    pub final_ratio: f64,
    pub audit_passed: bool,
    pub probes_passed: bool,
    pub dominance_holds: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentSummary {
    pub cells: Vec<CellSummary>,
    pub failures: Vec<Failure>,
    pub csv_files: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

impl ExperimentSummary {
    /// True when no cell errored or failed an audit or probe.
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Mean final ratio over seeds for one `(algorithm, topology)` pair.
    pub fn mean_final_ratio(&self, algorithm: AlgorithmKind, topology: &str) -> Option<f64> {
        let ratios: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.algorithm == algorithm.name() && c.topology == topology)
            .map(|c| c.final_ratio)
            .collect();
        (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(k) else { break };
                let r = f(item);
                slots.lock().expect("result slots poisoned")[k] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

/// Run every `(algorithm, topology, seed)` cell and write
/// `<tag>.csv`, `meta_<tag>.json` and `trace_<tag>.json` per cell, plus
/// `summary.csv`, `failures.csv` and one `ratio_<topology>.svg` per topology.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentSummary> {
    let scenario = Scenario::build(config)?;
    let algorithms = config.algorithms()?;
    let topologies = config.topologies()?;
    fs::create_dir_all(out)?;

    let mut cells = Vec::new();
    for topology in &topologies {
        for &algorithm in &algorithms {
            for &seed in &config.experiment.seeds {
                cells.push((algorithm, topology.clone(), seed));
            }
        }
    }

    let results = parallel_map(&cells, |(algorithm, topology, seed)| {
        let tag = cell_tag(*algorithm, &topology.label(), *seed);
        let outcome = run_cell(&scenario, *algorithm, topology, *seed).and_then(|cell| {
            let csv = out.join(format!("{tag}.csv"));
            write_cell_csv(&cell, &csv)?;
            write_cell_meta(&scenario, &cell, &out.join(format!("meta_{tag}.json")))?;
            fs::write(out.join(format!("trace_{tag}.json")), cell.trace.to_json()?)?;
            Ok((cell, csv))
        });
        (tag, topology.label(), outcome)
    });

    let mut summary = ExperimentSummary::default();
    let mut by_topology: Vec<(String, Vec<PathBuf>)> = Vec::new();
    for (tag, topology, outcome) in results {
        match outcome {
            Err(e) => summary.failures.push(Failure {
                tag,
                stage: "run".into(),
                message: e.to_string(),
            }),
            Ok((cell, csv)) => {
                if let Err(msg) = &cell.audit {
                    summary.failures.push(Failure {
                        tag: tag.clone(),
                        stage: "audit".into(),
                        message: msg.clone(),
                    });
                }
                for p in cell.probes.probes.iter().filter(|p| !p.passed) {
                    summary.failures.push(Failure {
                        tag: tag.clone(),
                        stage: "probe".into(),
                        message: format!("{}: observed {} exceeds bound {}", p.name, p.max_observed, p.bound),
                    });
                }
                summary.cells.push(CellSummary {
                    tag,
                    algorithm: cell.algorithm.name().to_string(),
                    topology: topology.clone(),
                    seed: cell.seed,
                    final_ratio: cell.regret.final_ratio(),
                    audit_passed: cell.audit.is_ok(),
                    probes_passed: cell.probes.passed(),
                    dominance_holds: cell.dominance.holds,
                    elapsed_seconds: cell.elapsed,
                });
                match by_topology.iter_mut().find(|(t, _)| *t == topology) {
                    Some((_, files)) => files.push(csv.clone()),
                    None => by_topology.push((topology, vec![csv.clone()])),
                }
                summary.csv_files.push(csv);
            }
        }
    }

    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    for c in &summary.cells {
        w.serialize(c)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("failures.csv"))?;
    w.write_record(["tag", "stage", "message"])?;
    for f in &summary.failures {
        w.serialize(f)?;
    }
    w.flush()?;

    for (topology, files) in &by_topology {
        let svg = out.join(format!("ratio_{topology}.svg"));
        emit_plots(files, &svg)?;
        summary.plots.push(svg);
    }
    if summary.cells.is_empty() && !summary.failures.is_empty() {
        return Err(invalid(format!(
            "every cell failed; first failure: {}: {}",
            summary.failures[0].tag, summary.failures[0].message
        )));
    }
    Ok(summary)
}
