//! `analyze gap | peak-regression | pca-distance | logit-lens`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand};
use probelens::analysis::distance::{distance_curve, DistanceCurve, DistanceOptions, DistanceSpace, Representative};
use probelens::analysis::gap::{ktdt_gap, peaks_from_sweep, GapReport};
use probelens::analysis::generation::generation_accuracy;
use probelens::analysis::lens::{first_token_consistency, logit_lens_curve, LensHead, LensMismatch, NormMode};
use probelens::analysis::regression::{peak_layer_regression, RegressionPoint, RegressionResult};
use probelens::analysis::AnalysisError;
use probelens::probe::LayerSweepReport;
use probelens::tensor_store::{read_manifest, read_weights, EmbeddingArchive, WeightMatrix};
use probelens::Scalar;
use serde::Serialize;

use super::{load_archive, parse_enum, set, set_opt, validated};
use crate::config::{require_file, Precision, RunConfig};
use crate::output::{self, CmdResult, ExitCode, EXIT_ANALYSIS, EXIT_ARCHIVE, EXIT_CONFIG};
use crate::plot::{Plot, Series};

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Probe peak accuracy versus generation accuracy per gold position.
    Gap(GapArgs),
    /// Regress generation accuracy on the probes' peak layer.
    PeakRegression(RegressionArgs),
    /// Average distance between consecutive positions in a 2-d projection.
    PcaDistance(DistanceArgs),
    /// Probability of the first answer token read out at every layer.
    LogitLens(LensArgs),
}

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Sweep report (sweep.json) from train-probes.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Archive whose manifest carries the generations.
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegressionArgs {
    /// gap.json files; may be repeated.
    #[arg(long = "gap")]
    gaps: Vec<PathBuf>,
    /// JSON array of regression points.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    min_probe_accuracy: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    archive: Option<PathBuf>,
    /// single_prompt_per_position or class_mean.
    #[arg(long, value_parser = parse_enum::<Representative>)]
    representative: Option<Representative>,
    /// projected or ambient.
    #[arg(long, value_parser = parse_enum::<DistanceSpace>)]
    space: Option<DistanceSpace>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LensArgs {
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    lm_head: Option<PathBuf>,
    #[arg(long)]
    norm_scale: Option<PathBuf>,
    /// apply or skip.
    #[arg(long, value_parser = parse_enum::<NormMode>)]
    norm_mode: Option<NormMode>,
    #[arg(long)]
    rms_eps: Option<f64>,
    /// Allowed gap between lens and recorded first-token probabilities.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn analyze(cfg: &mut RunConfig, cmd: &AnalyzeCommand) -> CmdResult {
    match cmd {
        AnalyzeCommand::Gap(a) => {
            set_opt(&mut cfg.paths.sweep, &a.sweep);
            set_opt(&mut cfg.paths.archive, &a.archive);
            set_opt(&mut cfg.paths.out, &a.out);
            validated(cfg)?;
            let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
            let sweep = read_sweep(&input("sweep report", cfg.paths.sweep.as_deref())?)?;
            let archive = input("archive", cfg.paths.archive.as_deref())?;
            let r = run_gap(cfg, &sweep, &archive, &out)?;
            println!("mean gap {:.4} over {} positions", r.mean_gap, r.per_position.len());
        }
        AnalyzeCommand::PeakRegression(a) => {
            if !a.gaps.is_empty() {
                cfg.paths.gap_reports = a.gaps.clone();
            }
            set_opt(&mut cfg.paths.regression_points, &a.points);
            set(&mut cfg.analysis.min_probe_accuracy, &a.min_probe_accuracy);
            set_opt(&mut cfg.paths.out, &a.out);
            validated(cfg)?;
            let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
            let points = collect_points(cfg, &[])?;
            let r = run_regression(cfg, &points, &out)?;
            println!(
                "slope {:.6}, t {:.4}, p {} ({} points)",
                r.slope,
                r.t_statistic,
                r.p_value_display(),
                r.points.len()
            );
        }
        AnalyzeCommand::PcaDistance(a) => {
            set_opt(&mut cfg.paths.archive, &a.archive);
            set(&mut cfg.analysis.representative, &a.representative);
            set(&mut cfg.analysis.space, &a.space);
            set(&mut cfg.analysis.distance_repetitions, &a.repetitions);
            set_opt(&mut cfg.paths.out, &a.out);
            validated(cfg)?;
            let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
            let archive = load_archive(&input("archive", cfg.paths.archive.as_deref())?)?;
            let c = run_distance(cfg, &archive, &out)?;
            println!("distance curve over {} layers", c.per_layer.len());
        }
        AnalyzeCommand::LogitLens(a) => {
            set_opt(&mut cfg.paths.archive, &a.archive);
            set_opt(&mut cfg.paths.lm_head, &a.lm_head);
            set_opt(&mut cfg.paths.norm_scale, &a.norm_scale);
            set(&mut cfg.analysis.norm_mode, &a.norm_mode);
            set(&mut cfg.analysis.rms_eps, &a.rms_eps);
            set(&mut cfg.analysis.lens_tolerance, &a.tolerance);
            set(&mut cfg.precision, &a.precision);
            set_opt(&mut cfg.paths.out, &a.out);
            validated(cfg)?;
            let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();
            let archive = load_archive(&input("archive", cfg.paths.archive.as_deref())?)?;
            let s = run_lens(cfg, &archive, &out)?;
            println!(
                "logit lens over {} layers ({:?}); first-token check: {} compared, {} mismatched",
                s.n_layers, s.norm_mode, s.compared, s.mismatches
            );
        }
    }
    Ok(())
}

/// A required analysis input; absence is an analysis failure.
fn input(what: &str, path: Option<&Path>) -> CmdResult<PathBuf> {
    require_file(what, path).exit(EXIT_ANALYSIS)
}

fn analysis_err(e: AnalysisError) -> crate::output::Failure {
    let code = match e {
        AnalysisError::Archive(_) => EXIT_ARCHIVE,
        _ => EXIT_ANALYSIS,
    };
    crate::output::Failure {
        code,
        error: e.into(),
    }
}

pub fn read_sweep(path: &Path) -> CmdResult<LayerSweepReport> {
    read_json(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .exit(EXIT_ANALYSIS)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .exit(EXIT_ANALYSIS)
}

/// Writes `gap.{json,csv,svg}` and `regression_points.json`.
pub fn run_gap(cfg: &RunConfig, sweep: &LayerSweepReport, archive: &Path, out: &Path) -> CmdResult<GapReport> {
    let manifest = read_manifest(archive).exit(EXIT_ARCHIVE)?;
    let gens = manifest
        .generations
        .as_deref()
        .ok_or_else(|| anyhow!("{}: manifest has no generations", archive.display()))
        .exit(EXIT_ANALYSIS)?;
    let generation = generation_accuracy(gens, &manifest).map_err(analysis_err)?;
    let report = ktdt_gap(&peaks_from_sweep(sweep), &generation).map_err(analysis_err)?;
    let label = archive
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let write = || -> anyhow::Result<()> {
        output::write_json(out, "gap.json", &report)?;
        output::write(out, "gap.csv", report.to_csv())?;
        output::write(out, "gap.svg", gap_plot(&report).to_svg())?;
        output::write_json(out, "regression_points.json", &report.regression_points(&label))?;
        cfg.write_resolved(out)
    };
    write().exit(EXIT_ANALYSIS)?;
    Ok(report)
}

fn gap_plot(r: &GapReport) -> Plot {
    let mut plot = Plot::new("Probing versus generation", "gold position", "accuracy").with_y_range(0.0, 1.0);
    let xs = |f: fn(&probelens::analysis::gap::GapRow) -> f64| {
        r.per_position.iter().map(|g| (g.gold_position as f64, f(g))).collect()
    };
    plot.push(Series::line("probing peak", xs(|g| g.peak_probe_accuracy)));
    plot.push(Series::line("generation", xs(|g| g.generation_accuracy)));
    plot
}

/// Points from the configured gap reports and points file, plus `extra`.
pub fn collect_points(cfg: &RunConfig, extra: &[RegressionPoint]) -> CmdResult<Vec<RegressionPoint>> {
    let mut points = Vec::new();
    for path in &cfg.paths.gap_reports {
        let report: GapReport = read_json(path)?;
        let label = path
            .parent()
            .and_then(|p| p.file_name())
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        points.extend(report.regression_points(&label));
    }
    if let Some(path) = &cfg.paths.regression_points {
        points.extend(read_json::<Vec<RegressionPoint>>(path)?);
    }
    points.extend_from_slice(extra);
    if points.is_empty() {
        return Err(anyhow!("no regression inputs: pass --gap or --points")).exit(EXIT_ANALYSIS);
    }
    Ok(points)
}

#[derive(Serialize)]
struct RegressionOutput<'a> {
    min_probe_accuracy: f64,
    n_input_points: usize,
    p_value_display: String,
    result: &'a RegressionResult<f64>,
}

/// Writes `regression.{json,csv,svg}`.
pub fn run_regression(cfg: &RunConfig, points: &[RegressionPoint], out: &Path) -> CmdResult<RegressionResult<f64>> {
    let thr = cfg.analysis.min_probe_accuracy;
    let r = peak_layer_regression::<f64>(points, thr).map_err(analysis_err)?;
    let write = || -> anyhow::Result<()> {
        output::write_json(
            out,
            "regression.json",
            &RegressionOutput {
                min_probe_accuracy: thr,
                n_input_points: points.len(),
                p_value_display: r.p_value_display(),
                result: &r,
            },
        )?;
        let mut csv = String::from("label,peak_layer,peak_probe_accuracy,generation_accuracy,kept\n");
        for p in points {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                p.label.as_deref().unwrap_or(""),
                p.peak_layer,
                p.peak_probe_accuracy,
                p.generation_accuracy,
                p.peak_probe_accuracy > thr
            ));
        }
        output::write(out, "regression.csv", csv)?;
        output::write(out, "regression.svg", regression_plot(&r).to_svg())?;
        cfg.write_resolved(out)
    };
    write().exit(EXIT_ANALYSIS)?;
    Ok(r)
}

fn regression_plot(r: &RegressionResult<f64>) -> Plot {
    let title = format!("slope {:.4}, p {}", r.slope, r.p_value_display());
    let mut plot = Plot::new(&title, "peak layer", "generation accuracy");
    plot.push(Series::markers("positions", r.points.clone()));
    let (lo, hi) = r
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    plot.push(Series::line(
        "fit",
        vec![(lo, r.intercept + r.slope * lo), (hi, r.intercept + r.slope * hi)],
    ));
    plot
}

/// Writes `distance.{json,csv,svg}`.
pub fn run_distance(cfg: &RunConfig, archive: &EmbeddingArchive, out: &Path) -> CmdResult<DistanceCurve<f64>> {
    let a = &cfg.analysis;
    let options = DistanceOptions {
        representative: a.representative,
        space: a.space,
        repetitions: a.distance_repetitions,
    };
    let curve = distance_curve::<f64>(archive, &options).map_err(analysis_err)?;
    let write = || -> anyhow::Result<()> {
        output::write_json(out, "distance.json", &curve)?;
        output::write(out, "distance.csv", curve.to_csv())?;
        let mut plot = Plot::new("Distance between consecutive positions", "layer", "average distance");
        plot.push(Series::line(
            "average distance",
            curve.per_layer.iter().enumerate().map(|(l, &d)| (l as f64, d)).collect(),
        ));
        output::write(out, "distance.svg", plot.to_svg())?;
        cfg.write_resolved(out)
    };
    write().exit(EXIT_ANALYSIS)?;
    Ok(curve)
}

#[derive(Debug, Clone, Serialize)]
pub struct LensSummary {
    pub n_layers: usize,
    pub norm_mode: NormMode,
    /// Prompts whose recorded first-token probability was checked.
    pub compared: usize,
    pub mismatches: usize,
}

#[derive(Serialize)]
struct ConsistencyOutput<'a> {
    tolerance: f64,
    compared: usize,
    mismatches: &'a [LensMismatch],
}

fn read_weight_file(what: &str, path: &Path) -> CmdResult<WeightMatrix> {
    read_weights(path)
        .with_context(|| format!("reading {what} {}", path.display()))
        .exit(EXIT_ARCHIVE)
}

/// Writes `lens.{json,csv,svg}` and, when the manifest records first-token
/// probabilities, `lens_consistency.json`.
pub fn run_lens(cfg: &RunConfig, archive: &EmbeddingArchive, out: &Path) -> CmdResult<LensSummary> {
    let lm = read_weight_file("LM head", &input("LM head", cfg.paths.lm_head.as_deref())?)?;
    let norm = match &cfg.paths.norm_scale {
        Some(p) => Some(read_weight_file("norm scale", p)?),
        None => None,
    };
    match cfg.precision {
        Precision::F32 => lens_typed::<f32>(cfg, archive, &lm, norm.as_ref(), out),
        Precision::F64 => lens_typed::<f64>(cfg, archive, &lm, norm.as_ref(), out),
    }
}

fn lens_typed<T: Scalar + Serialize>(
    cfg: &RunConfig,
    archive: &EmbeddingArchive,
    lm: &WeightMatrix,
    norm: Option<&WeightMatrix>,
    out: &Path,
) -> CmdResult<LensSummary> {
    let a = &cfg.analysis;
    let head = LensHead::<T>::from_weights(lm, norm, a.norm_mode, a.rms_eps).map_err(analysis_err)?;
    let curve = logit_lens_curve(archive, &head, None).map_err(analysis_err)?;
    let consistency = match archive.manifest.generations {
        Some(_) => Some(first_token_consistency(archive, &head, a.lens_tolerance).map_err(analysis_err)?),
        None => None,
    };
    let write = || -> anyhow::Result<()> {
        output::write_json(out, "lens.json", &curve)?;
        output::write(out, "lens.csv", curve.to_csv())?;
        let mut plot = Plot::new("First answer token probability", "layer", "probability").with_y_range(0.0, 1.0);
        for (i, p) in curve.positions.iter().enumerate() {
            plot.push(Series::line(
                format!("position {p}"),
                curve
                    .per_layer_per_position
                    .iter()
                    .enumerate()
                    .map(|(l, row)| (l as f64, row[i].to_f64_lossy()))
                    .collect(),
            ));
        }
        output::write(out, "lens.svg", plot.to_svg())?;
        if let Some((mismatches, compared)) = &consistency {
            output::write_json(
                out,
                "lens_consistency.json",
                &ConsistencyOutput {
                    tolerance: a.lens_tolerance,
                    compared: *compared,
                    mismatches,
                },
            )?;
        }
        cfg.write_resolved(out)
    };
    write().exit(EXIT_ANALYSIS)?;
    let (compared, mismatches) = consistency.map_or((0, 0), |(m, c)| (c, m.len()));
    Ok(LensSummary {
        n_layers: curve.per_layer_per_position.len(),
        norm_mode: curve.norm_mode,
        compared,
        mismatches,
    })
}
