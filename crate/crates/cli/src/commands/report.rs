//! `report`: every analysis whose inputs are present, summarized in
//! `report.md`.

use std::fmt::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use probelens::analysis::regression::RegressionPoint;

use super::analyze::{collect_points, read_sweep, run_distance, run_gap, run_lens, run_regression};
use super::probes::{run_sweep, ProbeFlags};
use super::{load_archive, set_opt, validated};
use crate::config::RunConfig;
use crate::output::{self, CmdResult, ExitCode, EXIT_ANALYSIS, EXIT_CONFIG};

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Existing sweep report, used when no train/test pair is given.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Archive for the gap, distance and lens analyses (default: the test
    /// archive).
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long)]
    lm_head: Option<PathBuf>,
    #[arg(long)]
    norm_scale: Option<PathBuf>,
    /// Additional gap.json files for the peak regression.
    #[arg(long = "gap")]
    gaps: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeFlags,
}

pub fn report(cfg: &mut RunConfig, args: &ReportArgs) -> CmdResult {
    let p = &mut cfg.paths;
    set_opt(&mut p.train_archive, &args.train);
    set_opt(&mut p.test_archive, &args.test);
    set_opt(&mut p.sweep, &args.sweep);
    set_opt(&mut p.archive, &args.archive);
    set_opt(&mut p.lm_head, &args.lm_head);
    set_opt(&mut p.norm_scale, &args.norm_scale);
    if !args.gaps.is_empty() {
        p.gap_reports = args.gaps.clone();
    }
    set_opt(&mut p.out, &args.out);
    args.probe.apply(cfg);
    validated(cfg)?;
    let out = cfg.out_dir().exit(EXIT_CONFIG)?.to_path_buf();

    let mut md = String::from("# Probing report\n\n");
    let mut ran = 0;

    let sweep = if cfg.paths.train_archive.is_some() && cfg.paths.test_archive.is_some() {
        Some(run_sweep(cfg, &out.join("probes"))?)
    } else {
        cfg.paths.sweep.as_deref().map(read_sweep).transpose()?
    };
    if let Some(s) = &sweep {
        ran += 1;
        let _ = writeln!(md, "## Probes\n");
        let _ = writeln!(
            md,
            "Peak layer {} with mean accuracy {:.4} ({} layers, {} repeats).\n",
            s.peak_layer,
            s.peak_accuracy,
            s.metrics.len(),
            s.metrics.first().map_or(0, |m| m.repeats)
        );
        let _ = writeln!(md, "| layer | mean | std |\n|---|---|---|");
        for m in &s.metrics {
            let _ = writeln!(md, "| {} | {:.4} | {:.4} |", m.layer, m.mean_accuracy, m.std_accuracy);
        }
        md.push('\n');
    }

    let archive_path = cfg.paths.archive.clone().or_else(|| cfg.paths.test_archive.clone());
    let archive = archive_path.as_deref().map(load_archive).transpose()?;

    let mut extra: Vec<RegressionPoint> = Vec::new();
    if let (Some(s), Some(path), Some(a)) = (&sweep, &archive_path, &archive) {
        if a.manifest.generations.is_some() {
            ran += 1;
            let g = run_gap(cfg, s, path, &out.join("gap"))?;
            let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            extra = g.regression_points(&label);
            let _ = writeln!(md, "## Gap\n\nMean gap {:.4}.\n", g.mean_gap);
            let _ = writeln!(md, "| position | probe peak | peak layer | generation | gap |\n|---|---|---|---|---|");
            for r in &g.per_position {
                let _ = writeln!(
                    md,
                    "| {} | {:.4} | {} | {:.4} | {:.4} |",
                    r.gold_position, r.peak_probe_accuracy, r.peak_layer, r.generation_accuracy, r.gap
                );
            }
            md.push('\n');
        }
    }

    if !cfg.paths.gap_reports.is_empty() || cfg.paths.regression_points.is_some() || !extra.is_empty() {
        let points = collect_points(cfg, &extra)?;
        let _ = writeln!(md, "## Peak-layer regression\n");
        match run_regression(cfg, &points, &out.join("regression")) {
            Ok(r) => {
                ran += 1;
                let _ = writeln!(
                    md,
                    "Slope {:.6}, intercept {:.6}, t = {:.4}, p {} over {} points.\n",
                    r.slope,
                    r.intercept,
                    r.t_statistic,
                    r.p_value_display(),
                    r.points.len()
                );
            }
            Err(f) if f.code == EXIT_ANALYSIS => {
                let _ = writeln!(md, "Skipped: {:#}.\n", f.error);
            }
            Err(f) => return Err(f),
        }
    }

    if let Some(a) = &archive {
        let _ = writeln!(md, "## Distance between positions\n");
        match run_distance(cfg, a, &out.join("distance")) {
            Ok(c) => {
                ran += 1;
                let _ = writeln!(md, "| layer | average distance |\n|---|---|");
                for (l, d) in c.per_layer.iter().enumerate() {
                    let _ = writeln!(md, "| {l} | {d:.6} |");
                }
                md.push('\n');
            }
            Err(f) if f.code == EXIT_ANALYSIS => {
                let _ = writeln!(md, "Skipped: {:#}.\n", f.error);
            }
            Err(f) => return Err(f),
        }
        if cfg.paths.lm_head.is_some() {
            let s = run_lens(cfg, a, &out.join("lens"))?;
            ran += 1;
            let _ = writeln!(
                md,
                "## Logit lens\n\nNorm mode {:?}; {} layers. First-token check: {} compared, {} beyond tolerance {}.\n",
                s.norm_mode, s.n_layers, s.compared, s.mismatches, cfg.analysis.lens_tolerance
            );
        }
    }

    if ran == 0 {
        return Err(anyhow!(
            "nothing to report: pass --train/--test or --sweep, --archive, --lm-head or --gap"
        ))
        .exit(EXIT_ANALYSIS);
    }
    let write = || -> anyhow::Result<()> {
        output::write(&out, "report.md", &md)?;
        cfg.write_resolved(&out)
    };
    write().exit(EXIT_ANALYSIS)?;
    println!("{ran} analyses written to {}", out.display());
    Ok(())
}
