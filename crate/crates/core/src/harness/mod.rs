//! Config parsing, data ingestion, experiment orchestration and plots.

mod config;
mod data;
mod experiment;
mod plot;

pub use config::{
    Caps, DmfwSection, DobgaSection, EvalSection, ExperimentConfig, ExperimentSection, MonoDmfwSection,
    ObjectiveKind, ObjectiveSection, RegionSection, TopologySpec,
};
pub use data::{
    all_levels, ingest_ratings, ingest_reader, partition_users, synth_ratings, IngestReport, Ingested,
    RatingsByRound, SYNTH_RATE_PROB,
};
pub use experiment::{
    run_cell, run_experiment, CellOutcome, CellSummary, ExperimentSummary, Failure, Scenario, CSV_HEADER,
};
pub use plot::{emit_plots, read_curves, render_svg, Curve};
