//! Measurement and ground-truth file ingestion.
//!
//! Measurements: CSV with a mandatory `time_step,x,y` header. Truth: CSV with
//! a mandatory `time_step,track_label,x,y` header. Rows are grouped by time
//! step in ascending order; gaps inside the observed range become empty
//! frames. Malformed rows fail with their line number.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use mtfilter_core::simulator::GroundTruthFrame;
use mtfilter_core::types::MeasurementFrame;

fn open_reader(path: &Path, header: &[&str]) -> anyhow::Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if !reader.is_done() {
        let got = reader.headers().context("reading header")?;
        if got != *header {
            bail!("{}: expected header {:?}, got {:?}", path.display(), header.join(","), got);
        }
    }
    Ok(reader)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec
        .get(idx)
        .ok_or_else(|| anyhow!("line {line}: missing field {name}"))?;
    raw.parse::<T>().map_err(|e| anyhow!("line {line}: bad {name} {raw:?}: {e}"))
}

/// Reads a measurement file into gap-filled frames.
pub fn ingest_measurements(path: &Path) -> anyhow::Result<Vec<MeasurementFrame>> {
    let mut reader = open_reader(path, &["time_step", "x", "y"])?;
    let mut groups: BTreeMap<u64, Vec<Vec<f64>>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.context("reading record")?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            bail!("line {line}: expected 3 fields, got {}", rec.len());
        }
        let t: u64 = parse_field(&rec, 0, "time_step")?;
        if t < 1 {
            bail!("line {line}: time_step must be >= 1");
        }
        let x: f64 = parse_field(&rec, 1, "x")?;
        let y: f64 = parse_field(&rec, 2, "y")?;
        groups.entry(t).or_default().push(vec![x, y]);
    }
    let Some((&first, _)) = groups.iter().next() else { return Ok(Vec::new()) };
    let &last = groups.keys().last().expect("nonempty map");
    Ok((first..=last)
        .map(|t| MeasurementFrame::new(t, groups.remove(&t).unwrap_or_default()))
        .collect())
}

/// Reads a truth file into gap-filled labelled frames.
pub fn ingest_truth(path: &Path) -> anyhow::Result<Vec<GroundTruthFrame>> {
    let mut reader = open_reader(path, &["time_step", "track_label", "x", "y"])?;
    let mut groups: BTreeMap<u64, Vec<(u64, Vec<f64>)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.context("reading record")?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            bail!("line {line}: expected 4 fields, got {}", rec.len());
        }
        let t: u64 = parse_field(&rec, 0, "time_step")?;
        if t < 1 {
            bail!("line {line}: time_step must be >= 1");
        }
        let label: u64 = parse_field(&rec, 1, "track_label")?;
        let x: f64 = parse_field(&rec, 2, "x")?;
        let y: f64 = parse_field(&rec, 3, "y")?;
        groups.entry(t).or_default().push((label, vec![x, y]));
    }
    let Some((&first, _)) = groups.iter().next() else { return Ok(Vec::new()) };
    let &last = groups.keys().last().expect("nonempty map");
    Ok((first..=last)
        .map(|t| GroundTruthFrame { time_step: t, truths: groups.remove(&t).unwrap_or_default() })
        .collect())
}

/// Serializes measurement frames back to the ingestion format.
pub fn measurements_to_csv(frames: &[MeasurementFrame]) -> String {
    let mut out = String::from("time_step,x,y\n");
    for f in frames {
        for p in &f.points {
            out.push_str(&format!("{},{},{}\n", f.time_step, p[0], p[1]));
        }
    }
    out
}

/// Serializes ground truth back to the ingestion format.
pub fn truth_to_csv(frames: &[GroundTruthFrame]) -> String {
    let mut out = String::from("time_step,track_label,x,y\n");
    for f in frames {
        for (label, p) in &f.truths {
            out.push_str(&format!("{},{},{},{}\n", f.time_step, label, p[0], p[1]));
        }
    }
    out
}
