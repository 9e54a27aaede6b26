//! Run reports and their CSV/JSONL serialization.
//!
//! Emission is fully deterministic for a fixed report: floats use Rust's
//! shortest round-trip formatting and records appear in frame order. The
//! `elapsed_ms` column is wall-clock telemetry and the one field that varies
//! between otherwise identical runs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const CSV_HEADER: &str = "time_step,M,N,ospa,loc,card,births,deaths,decays,elapsed_ms";

/// Per-frame filtering outcome. OSPA fields are absent when no ground truth
/// was supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub time_step: u64,
    /// Posterior target count `M` (survivors + decays + births).
    pub num_targets: usize,
    /// Measurement count `N`.
    pub num_measurements: usize,
    pub ospa: Option<f64>,
    pub loc: Option<f64>,
    pub card: Option<f64>,
    pub births: usize,
    pub deaths: usize,
    pub decays: usize,
    pub elapsed_ms: f64,
}

/// Run-level aggregates, recomputable from the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: usize,
    pub seed: u64,
    pub avg_ospa: Option<f64>,
    pub avg_loc: Option<f64>,
    pub avg_card: Option<f64>,
    pub avg_targets: f64,
    pub total_births: usize,
    pub total_deaths: usize,
    pub total_decays: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub records: Vec<FrameRecord>,
    pub summary: RunSummary,
    /// Echo of the configuration that produced the run.
    pub config: RunConfig,
}

impl RunReport {
    pub fn from_records(records: Vec<FrameRecord>, config: RunConfig) -> Self {
        let frames = records.len();
        let denom = frames.max(1) as f64;
        let avg_of = |get: fn(&FrameRecord) -> Option<f64>| {
            let vals: Vec<f64> = records.iter().filter_map(get).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let summary = RunSummary {
            frames,
            seed: config.scenario.seed,
            avg_ospa: avg_of(|r| r.ospa),
            avg_loc: avg_of(|r| r.loc),
            avg_card: avg_of(|r| r.card),
            avg_targets: records.iter().map(|r| r.num_targets as f64).sum::<f64>() / denom,
            total_births: records.iter().map(|r| r.births).sum(),
            total_deaths: records.iter().map(|r| r.deaths).sum(),
            total_decays: records.iter().map(|r| r.decays).sum(),
        };
        RunReport { records, summary, config }
    }

    /// Zeroes the telemetry column, leaving only reproducible fields.
    pub fn without_timing(mut self) -> Self {
        for r in &mut self.records {
            r.elapsed_ms = 0.0;
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(report: &RunReport) -> String {
    let mut out = String::with_capacity(64 * (report.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.time_step,
            r.num_targets,
            r.num_measurements,
            opt(r.ospa),
            opt(r.loc),
            opt(r.card),
            r.births,
            r.deaths,
            r.decays,
            r.elapsed_ms,
        ));
    }
    out
}

/// One JSON line per frame plus a final summary line carrying the aggregates
/// and the config echo.
pub fn to_jsonl(report: &RunReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    let tail = serde_json::json!({ "summary": report.summary, "config": report.config });
    out.push_str(&serde_json::to_string(&tail).expect("summary serializes"));
    out.push('\n');
    out
}

pub fn render(report: &RunReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(report),
        OutputFormat::Jsonl => to_jsonl(report),
    }
}

pub fn emit(report: &RunReport, path: &Path, format: OutputFormat) -> anyhow::Result<()> {
    fs::write(path, render(report, format))
        .with_context(|| format!("writing report to {}", path.display()))
}

/// Parses the per-frame CSV back into records (the summary and config echo
/// are not part of the CSV contract).
pub fn parse_csv(text: &str) -> anyhow::Result<Vec<FrameRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => bail!("bad report header: {other:?}"),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            bail!("row {}: expected 10 fields, got {}", i + 2, fields.len());
        }
        let opt_f = |s: &str| -> anyhow::Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse()?))
            }
        };
        records.push(FrameRecord {
            time_step: fields[0].parse()?,
            num_targets: fields[1].parse()?,
            num_measurements: fields[2].parse()?,
            ospa: opt_f(fields[3])?,
            loc: opt_f(fields[4])?,
            card: opt_f(fields[5])?,
            births: fields[6].parse()?,
            deaths: fields[7].parse()?,
            decays: fields[8].parse()?,
            elapsed_ms: fields[9].parse()?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let records = vec![
            FrameRecord {
                time_step: 1,
                num_targets: 3,
                num_measurements: 21,
                ospa: Some(42.5),
                loc: Some(10.25),
                card: Some(32.25),
                births: 3,
                deaths: 0,
                decays: 0,
                elapsed_ms: 1.25,
            },
            FrameRecord {
                time_step: 2,
                num_targets: 4,
                num_measurements: 18,
                ospa: None,
                loc: None,
                card: None,
                births: 1,
                deaths: 0,
                decays: 2,
                elapsed_ms: 0.75,
            },
        ];
        RunReport::from_records(records, RunConfig::default())
    }

    #[test]
    fn csv_round_trips_records_exactly() {
        let report = sample();
        let text = to_csv(&report);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back, report.records);
    }

    #[test]
    fn jsonl_has_one_line_per_frame_plus_summary() {
        let report = sample();
        let text = to_jsonl(&report);
        assert_eq!(text.lines().count(), report.records.len() + 1);
        let last = text.lines().last().unwrap();
        let v: serde_json::Value = serde_json::from_str(last).unwrap();
        assert!(v.get("summary").is_some() && v.get("config").is_some());
    }

    #[test]
    fn averages_recompute_from_records() {
        let report = sample();
        assert_eq!(report.summary.frames, 2);
        assert_eq!(report.summary.avg_ospa, Some(42.5));
        assert_eq!(report.summary.avg_targets, 3.5);
        assert_eq!(report.summary.total_births, 4);
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render(&sample(), OutputFormat::Csv);
        let b = render(&sample(), OutputFormat::Csv);
        assert_eq!(a, b);
        let a = render(&sample(), OutputFormat::Jsonl);
        let b = render(&sample(), OutputFormat::Jsonl);
        assert_eq!(a, b);
    }
}
