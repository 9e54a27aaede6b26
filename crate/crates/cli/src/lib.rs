//! Experiment harness around `mtfilter-core`: config files, measurement and
//! truth file ingestion, scenario runs, clutter sweeps, and CSV/JSONL report
//! emission.

pub mod checkpoint;
pub mod config;
pub mod ingest;
pub mod report;
pub mod run;
