//! End-to-end: ratings file to CSVs, metadata, traces and probes.

use std::fs;
use std::path::Path;

use dsubmod::algorithms::Trace;
use dsubmod::evaluation::{audit_counters, probe_report};
use dsubmod::harness::{ingest_reader, run_experiment, ExperimentConfig, CSV_HEADER};
use proptest::prelude::*;

fn write_ratings(dir: &Path, users: usize, movies: usize) -> std::path::PathBuf {
    let mut text = String::from("userId,movieId,rating,timestamp\n");
    for u in 0..users {
        for m in 0..movies {
            if (u * 7 + m * 3) % 4 == 0 {
                let rating = 0.5 * (1 + (u + m) % 10) as f64;
                text += &format!("{},{m},{rating},{}\n", 100 + u, 1_000 + u * movies + m);
            }
        }
    }
    let path = dir.join("ratings.csv");
    fs::write(&path, text).unwrap();
    path
}

fn config(dir: &Path) -> ExperimentConfig {
    let ratings = write_ratings(dir, 40, 12);
    ExperimentConfig::from_toml(&format!(
        r#"
        [experiment]
        nodes = 2
        rounds = 16
        sigma = 0.05
        seeds = [1, 2]
        algorithms = ["mono-dmfw", "dobga", "dmfw"]
        topologies = ["complete", "cycle"]

        [region]
        n = 8
        budget = 2.0

        [objective]
        kind = "facility"
        users_per_round = 2
        ratings = "{}"

        [mono_dmfw]
        phases = 4
        blocks = 4

        [dmfw]
        phases = 6
        "#,
        ratings.display()
    ))
    .unwrap()
}

#[test]
fn ratings_file_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let summary = run_experiment(&config(dir.path()), &out).unwrap();
    assert!(summary.passed(), "{:?}", summary.failures);
    assert_eq!(summary.cells.len(), 3 * 2 * 2);
    assert_eq!(summary.plots.len(), 2);

    for cell in &summary.cells {
        let csv = fs::read_to_string(out.join(format!("{}.csv", cell.tag))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 16 * 2);

        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("meta_{}.json", cell.tag))).unwrap()).unwrap();
        assert_eq!(meta["data"]["user_order"], "first-appearance");
        assert_eq!(meta["data"]["ingest"]["kept_users"], 32);
        assert_eq!(meta["resolved"]["fw_steps"], 200);

        let trace = Trace::from_json(&fs::read_to_string(out.join(format!("trace_{}.json", cell.tag))).unwrap()).unwrap();
        assert!(probe_report(&trace).unwrap().passed());
        assert!(audit_counters(&trace).is_ok());
    }
}

#[test]
fn same_config_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = run_experiment(&cfg, &a).unwrap();
    run_experiment(&cfg, &b).unwrap();
    for path in &first.csv_files {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    for plot in &first.plots {
        let name = plot.file_name().unwrap();
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn tampered_trace_fails_its_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_experiment(&config(dir.path()), &out).unwrap();
    let text = fs::read_to_string(out.join("trace_dobga_cycle_s1.json")).unwrap();
    let mut trace = Trace::from_json(&text).unwrap();
    trace.grad_queries[3][1] += 1;
    assert!(audit_counters(&trace).is_err());
    trace.steps[5].residual = 10.0;
    assert!(!probe_report(&trace).unwrap().passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ingestion_conserves_user_count(
        rounds in 1usize..5,
        per_round in 1usize..5,
        extra in 0usize..4,
        n in 1usize..6,
        seed in any::<u64>(),
    ) {
        let users = rounds * per_round + extra;
        let mut text = String::new();
        let mut state = seed;
        for row in 0..users * 3 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let user = if row < users { row } else { (state >> 33) as usize % users };
            let movie = (state >> 20) as usize % (n + 2);
            text += &format!("{},{movie},{}\n", 1000 - user, 0.5 * (1 + (state >> 40) % 10) as f64);
        }
        let got = ingest_reader(text.as_bytes(), n, rounds, per_round).unwrap();
        prop_assert_eq!(got.ratings.user_vectors(), rounds * per_round);
        prop_assert_eq!(got.ratings.rounds.len(), rounds);
        prop_assert!(got.ratings.rounds.iter().flatten().all(|u| u.len() == n));
    }
}
