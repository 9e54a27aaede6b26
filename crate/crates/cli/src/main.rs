//! Command-line entry point: synthetic runs, clutter sweeps, measurement-file
//! filtering and OSPA evaluation.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use mtfilter_cli::checkpoint::{load_model, save_model};
use mtfilter_cli::config::{Overrides, RunConfig};
use mtfilter_cli::ingest::{ingest_measurements, ingest_truth, measurements_to_csv, truth_to_csv};
use mtfilter_cli::report::{emit, OutputFormat};
use mtfilter_cli::run::{run_frames, run_sweep, EngineOutput};

use mtfilter_core::metrics::ospa_series;
use mtfilter_core::simulator::GroundTruthFrame;

#[derive(Parser)]
#[command(name = "mtfilter", about = "Multi-target point filtering with online-learned motion models", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; omitted sections fall back to built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; drives scenario generation and model initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Mean clutter count per frame.
    #[arg(long = "lambda-c")]
    lambda_c: Option<f64>,
    /// Number of frames to simulate.
    #[arg(long)]
    frames: Option<u64>,
    /// Report format.
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

impl CommonArgs {
    fn build_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides { seed: self.seed, lambda_c: self.lambda_c, frames: self.frames });
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct ModelIoArgs {
    /// Write the trained model to this checkpoint when the run finishes.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Start from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    load_model: Option<PathBuf>,
    /// Write per-frame association diagnostics as JSONL.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scenario, filter it and report per-frame OSPA.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the generated measurements in the ingestion format.
        #[arg(long)]
        dump_measurements: Option<PathBuf>,
        /// Also write the ground truth in the truth-file format.
        #[arg(long)]
        dump_truth: Option<PathBuf>,
        #[command(flatten)]
        model_io: ModelIoArgs,
    },
    /// Run one synthetic report per clutter rate.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Clutter rates to sweep.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
        lambdas: Vec<f64>,
        /// Directory for the per-rate reports and the sweep summary.
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter a measurement file; OSPA is reported only when truth is given.
    Filter {
        #[command(flatten)]
        common: CommonArgs,
        /// Measurement CSV with header `time_step,x,y`.
        #[arg(long)]
        input: PathBuf,
        /// Truth CSV with header `time_step,track_label,x,y`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Report output path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model_io: ModelIoArgs,
    },
    /// Score an estimate file against a truth file with OSPA.
    Eval {
        /// Truth CSV with header `time_step,track_label,x,y`.
        #[arg(long)]
        truth: PathBuf,
        /// Estimates as a measurement CSV with header `time_step,x,y`.
        #[arg(long)]
        est: PathBuf,
        /// OSPA order.
        #[arg(long, default_value_t = 1.0)]
        ospa_p: f64,
        /// OSPA cutoff.
        #[arg(long, default_value_t = 100.0)]
        ospa_c: f64,
        /// Optional per-frame CSV (`time_step,ospa,loc,card`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn finish_run(
    output: &EngineOutput,
    model_io: &ModelIoArgs,
    out: &std::path::Path,
    format: OutputFormat,
) -> anyhow::Result<()> {
    emit(&output.report, out, format)?;
    if let Some(path) = &model_io.save_model {
        save_model(path, &output.model.tuple)?;
    }
    if let Some(path) = &model_io.diagnostics {
        let mut text = String::new();
        for diag in &output.diagnostics {
            text.push_str(&serde_json::to_string(diag).context("serializing diagnostics")?);
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let s = &output.report.summary;
    match s.avg_ospa {
        Some(avg) => println!(
            "{} frames, avg OSPA {:.3} (loc {:.3}, card {:.3})",
            s.frames,
            avg,
            s.avg_loc.unwrap_or(0.0),
            s.avg_card.unwrap_or(0.0)
        ),
        None => println!("{} frames filtered (no truth supplied)", s.frames),
    }
    Ok(())
}

/// Frames missing from one stream inside the union time range become empty
/// sets, so both series align step for step. Returns the aligned series and
/// the first time step covered.
fn align_series(
    truth: Vec<GroundTruthFrame>,
    estimates: Vec<mtfilter_core::types::MeasurementFrame>,
) -> (Vec<GroundTruthFrame>, Vec<Vec<Vec<f64>>>, u64) {
    let lo = truth
        .first()
        .map(|f| f.time_step)
        .into_iter()
        .chain(estimates.first().map(|f| f.time_step))
        .min();
    let hi = truth
        .last()
        .map(|f| f.time_step)
        .into_iter()
        .chain(estimates.last().map(|f| f.time_step))
        .max();
    let (Some(lo), Some(hi)) = (lo, hi) else { return (Vec::new(), Vec::new(), 1) };
    let mut truth_by: std::collections::BTreeMap<u64, GroundTruthFrame> =
        truth.into_iter().map(|f| (f.time_step, f)).collect();
    let mut est_by: std::collections::BTreeMap<u64, Vec<Vec<f64>>> =
        estimates.into_iter().map(|f| (f.time_step, f.points)).collect();
    let mut truth_out = Vec::new();
    let mut est_out = Vec::new();
    for t in lo..=hi {
        truth_out.push(
            truth_by.remove(&t).unwrap_or(GroundTruthFrame { time_step: t, truths: Vec::new() }),
        );
        est_out.push(est_by.remove(&t).unwrap_or_default());
    }
    (truth_out, est_out, lo)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { common, out, dump_measurements, dump_truth, model_io } => {
            let cfg = common.build_config()?;
            cfg.validate()?;
            let initial = model_io.load_model.as_deref().map(load_model).transpose()?;
            let (truth, frames) = mtfilter_core::simulator::generate(&cfg.scenario)?;
            if let Some(path) = &dump_measurements {
                fs::write(path, measurements_to_csv(&frames))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = &dump_truth {
                fs::write(path, truth_to_csv(&truth))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let output = run_frames(&cfg, &frames, Some(&truth), initial)?;
            finish_run(&output, &model_io, &out, common.format)
        }
        Command::Sweep { common, lambdas, out } => {
            let cfg = common.build_config()?;
            cfg.validate()?;
            let sweep = run_sweep(&cfg, &lambdas)?;
            fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let ext = match common.format {
                OutputFormat::Csv => "csv",
                OutputFormat::Jsonl => "jsonl",
            };
            let mut summary = String::from("lambda_c,avg_ospa,avg_loc,avg_card\n");
            for entry in &sweep.entries {
                let path = out.join(format!("run_lc{}.{ext}", entry.lambda_c));
                emit(&entry.output.report, &path, common.format)?;
                let s = &entry.output.report.summary;
                summary.push_str(&format!(
                    "{},{},{},{}\n",
                    entry.lambda_c,
                    s.avg_ospa.unwrap_or(f64::NAN),
                    s.avg_loc.unwrap_or(f64::NAN),
                    s.avg_card.unwrap_or(f64::NAN),
                ));
            }
            fs::write(out.join("summary.csv"), summary)?;
            println!(
                "{} runs done; Spearman(lambda_c, avg OSPA) = {:.3}",
                sweep.entries.len(),
                sweep.spearman
            );
            Ok(())
        }
        Command::Filter { common, input, truth, out, model_io } => {
            let cfg = common.build_config()?;
            cfg.filter.validate()?;
            let frames = ingest_measurements(&input)?;
            let truth_frames = truth.as_deref().map(ingest_truth).transpose()?;
            let initial = model_io.load_model.as_deref().map(load_model).transpose()?;
            let output = run_frames(&cfg, &frames, truth_frames.as_deref(), initial)?;
            finish_run(&output, &model_io, &out, common.format)
        }
        Command::Eval { truth, est, ospa_p, ospa_c, out } => {
            let truth_frames = ingest_truth(&truth)?;
            let est_frames = ingest_measurements(&est)?;
            let (truth_aligned, est_aligned, start) = align_series(truth_frames, est_frames);
            let series = ospa_series(&truth_aligned, &est_aligned, ospa_p, ospa_c)?;
            if let Some(path) = out {
                let mut text = String::from("time_step,ospa,loc,card\n");
                for (i, r) in series.per_frame.iter().enumerate() {
                    text.push_str(&format!(
                        "{},{},{},{}\n",
                        start + i as u64,
                        r.total,
                        r.loc,
                        r.card
                    ));
                }
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "{} frames, avg OSPA {:.3} (loc {:.3}, card {:.3})",
                series.per_frame.len(),
                series.avg_total,
                series.avg_loc,
                series.avg_card
            );
            Ok(())
        }
    }
}
