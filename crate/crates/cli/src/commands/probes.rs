//! `train-probes`: one probe sweep over every layer.

use std::path::{Path, PathBuf};

use clap::Args;
use probelens::probe::{layer_sweep, LayerSweepReport, ProbeError};
use probelens::tensor_store::check_compatible;

use super::{load_archive, set, set_opt, validated};
use crate::config::{require_file, Precision, RunConfig};
use crate::output::{self, CmdResult, ExitCode, EXIT_ANALYSIS, EXIT_ARCHIVE, EXIT_CONFIG};
use crate::plot::{Plot, Series};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub probe: ProbeFlags,
}

#[derive(Debug, Args)]
pub struct ProbeFlags {
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    /// Standardize features with training statistics (true/false).
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    probe_seed: Option<u64>,
    /// Independent training runs per layer.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_enum)]
    precision: Option<Precision>,
}

impl ProbeFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.probe;
        set(&mut p.learning_rate, &self.lr);
        set(&mut p.epochs, &self.epochs);
        set(&mut p.batch_size, &self.batch_size);
        set(&mut p.l2_penalty, &self.l2);
        set(&mut p.standardize, &self.standardize);
        set(&mut p.seed, &self.probe_seed);
        set(&mut p.repeats, &self.repeats);
        set(&mut cfg.precision, &self.precision);
    }
}

pub fn train_probes(cfg: &mut RunConfig, args: &TrainArgs) -> CmdResult {
    set_opt(&mut cfg.paths.train_archive, &args.train);
    set_opt(&mut cfg.paths.test_archive, &args.test);
    set_opt(&mut cfg.paths.out, &args.out);
    args.probe.apply(cfg);
    validated(cfg)?;
    let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
    let report = run_sweep(cfg, &out)?;
    println!(
        "peak layer {} (mean accuracy {:.4}) over {} layers",
        report.peak_layer,
        report.peak_accuracy,
        report.metrics.len()
    );
    Ok(())
}

/// Trains the sweep and writes `sweep.{json,csv,svg}` into `out`.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> CmdResult<LayerSweepReport> {
    let train_path = require_file("train archive", cfg.paths.train_archive.as_deref()).exit(EXIT_CONFIG)?;
    let test_path = require_file("test archive", cfg.paths.test_archive.as_deref()).exit(EXIT_CONFIG)?;
    let train = load_archive(&train_path)?;
    let test = load_archive(&test_path)?;
    check_compatible(&train, &test).exit(EXIT_ARCHIVE)?;
    let result = match cfg.precision {
        Precision::F32 => layer_sweep::<f32>(&train, &test, &cfg.probe),
        Precision::F64 => layer_sweep::<f64>(&train, &test, &cfg.probe),
    };
    let report = match result {
        Ok(r) => r,
        Err(e @ ProbeError::Archive(_)) => return Err(e).exit(EXIT_ARCHIVE),
        Err(e) => return Err(e).exit(EXIT_ANALYSIS),
    };
    write_sweep(&report, out).exit(EXIT_ANALYSIS)?;
    cfg.write_resolved(out).exit(EXIT_ANALYSIS)?;
    Ok(report)
}

fn write_sweep(report: &LayerSweepReport, out: &Path) -> anyhow::Result<()> {
    output::write_json(out, "sweep.json", report)?;
    output::write(out, "sweep.csv", report.to_csv())?;
    output::write(out, "sweep.svg", sweep_plot(report).to_svg())
}

fn sweep_plot(report: &LayerSweepReport) -> Plot {
    let mut plot = Plot::new("Probe accuracy by layer", "layer", "accuracy").with_y_range(0.0, 1.0);
    plot.push(Series::line(
        "mean",
        report.metrics.iter().map(|m| (m.layer as f64, m.mean_accuracy)).collect(),
    ));
    let n_classes = report.metrics.first().map_or(0, |m| m.per_class_accuracy.len());
    for c in 0..n_classes {
        let name = match report.positions.get(c) {
            Some(p) => format!("position {p}"),
            None => format!("class {c}"),
        };
        plot.push(Series::line(
            name,
            report.metrics.iter().map(|m| (m.layer as f64, m.per_class_accuracy[c])).collect(),
        ));
    }
    plot
}
