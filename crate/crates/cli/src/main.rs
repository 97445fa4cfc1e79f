//! `dsubmod`: run experiments, ingest ratings, plot curves and probe traces.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsubmod::algorithms::Trace;
use dsubmod::evaluation::{audit_counters, probe_report};
use dsubmod::harness::{emit_plots, ingest_ratings, run_experiment, ExperimentConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_AUDIT: u8 = 2;

#[derive(Parser)]
#[command(name = "dsubmod", version, about = "Decentralized online DR-submodular maximization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, topology, seed) cell of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `experiment.out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; overrides `experiment.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Read a ratings CSV and report how it splits into rounds.
    Ingest {
        #[arg(long)]
        ratings: PathBuf,
        /// Number of movies kept.
        #[arg(long)]
        n: usize,
        /// Rounds.
        #[arg(long)]
        t: usize,
        /// Users per round.
        #[arg(long)]
        b: usize,
        /// Verify that exactly `T b` rating vectors of length `n` come out.
        #[arg(long)]
        check: bool,
    },
    /// Plot mean ratio curves from run CSVs.
    Plot {
        /// Glob of run CSVs, e.g. `out/*_s*.csv`.
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a saved trace against the counter audit and the consensus and residual bounds.
    Probe {
        #[arg(long)]
        trace: PathBuf,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run(config: &Path, out: Option<PathBuf>, seeds: Option<Vec<u64>>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(seeds) = seeds {
        cfg.experiment.seeds = seeds;
    }
    let out = out
        .or_else(|| cfg.experiment.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, e);
    }
    let summary = match run_experiment(&cfg, &out) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    println!("{:<28} {:>12} {:>6} {:>7} {:>9} {:>9}", "cell", "final ratio", "audit", "probes", "dominance", "seconds");
    for c in &summary.cells {
        println!(
            "{:<28} {:>12.6} {:>6} {:>7} {:>9} {:>9.3}",
            c.tag,
            c.final_ratio,
            pass(c.audit_passed),
            pass(c.probes_passed),
            pass(c.dominance_holds),
            c.elapsed_seconds
        );
    }
    for f in &summary.failures {
        eprintln!("FAIL {} [{}] {}", f.tag, f.stage, f.message);
    }
    println!("wrote {} CSVs and {} plots to {}", summary.csv_files.len(), summary.plots.len(), out.display());
    if summary.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_AUDIT)
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn ingest(ratings: &Path, n: usize, t: usize, b: usize, check: bool) -> ExitCode {
    let got = match ingest_ratings(ratings, n, t, b) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let r = &got.report;
    println!("rows            {}", r.rows);
    println!("distinct users  {}", r.users);
    println!("kept users      {}", r.kept_users);
    println!("excluded rows   {} (movieId >= {n})", r.excluded_rows);
    println!("all-zero users  {}", r.empty_users);
    println!("rounds          {}", got.ratings.rounds.len());
    if check {
        let vectors = got.ratings.user_vectors();
        let shaped = got.ratings.rounds.len() == t
            && got.ratings.rounds.iter().all(|round| round.len() == b)
            && got.ratings.rounds.iter().flatten().all(|u| u.len() == n);
        if vectors != t * b || !shaped {
            return fail(EXIT_AUDIT, format!("expected {} rating vectors of length {n}, got {vectors}", t * b));
        }
        println!("check           ok: {vectors} = T b rating vectors of length {n}");
    }
    ExitCode::SUCCESS
}

fn plot(pattern: &str, out: &Path) -> ExitCode {
    let paths = match glob::glob(pattern) {
        Ok(paths) => paths,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut files = Vec::new();
    for p in paths {
        match p {
            Ok(p) => files.push(p),
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    files.sort();
    if files.is_empty() {
        return fail(EXIT_CONFIG, format!("no files match '{pattern}'"));
    }
    match emit_plots(&files, out) {
        Ok(()) => {
            println!("plotted {} CSVs to {}", files.len(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn probe(path: &Path) -> ExitCode {
    let trace = match std::fs::read_to_string(path)
        .map_err(dsubmod::error::Error::from)
        .and_then(|text| Trace::from_json(&text))
    {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let report = match probe_report(&trace) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    println!(
        "{} trace: N = {}, T = {}, beta = {:.6}, r = {:.6}",
        trace.algorithm.name(),
        trace.meta.nodes,
        trace.rounds(),
        trace.meta.beta,
        trace.meta.radius
    );
    println!("{:<24} {:>7} {:>14} {:>14} {:>14} {:>6}", "probe", "checks", "max observed", "bound", "margin", "");
    for p in &report.probes {
        println!(
            "{:<24} {:>7} {:>14.6e} {:>14.6e} {:>14.6e} {:>6}",
            p.name,
            p.checks,
            p.max_observed,
            p.bound,
            p.margin,
            pass(p.passed)
        );
    }
    let audit = audit_counters(&trace);
    match &audit {
        Ok(a) => println!(
            "counter audit: grad queries {} and exchanges {} per node per round  ok",
            a.observed.0, a.observed.1
        ),
        Err(e) => println!("counter audit: {e}  FAIL"),
    }
    if report.passed() && audit.is_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_AUDIT)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match cli.command {
        Command::Run { config, out, seeds } => run(&config, out, seeds),
        Command::Ingest { ratings, n, t, b, check } => ingest(&ratings, n, t, b, check),
        Command::Plot { input, out } => plot(&input, &out),
        Command::Probe { trace } => probe(&trace),
    }
}
