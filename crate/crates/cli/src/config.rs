//! Run configuration: a JSON file whose fields any command-line flag can
//! override. The effective configuration is written next to every output as
//! `config.resolved.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use probelens::analysis::distance::{DistanceSpace, Representative};
use probelens::analysis::lens::{NormMode, DEFAULT_RMS_EPS};
use probelens::analysis::regression::DEFAULT_MIN_PROBE_ACCURACY;
use probelens::corpus::{Task, DEFAULT_MAX_BODY_CHARS};
use probelens::probe::TrainConfig;
use serde::{Deserialize, Serialize};

pub const RESOLVED_NAME: &str = "config.resolved.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub synth: SynthConfig,
    pub probe: TrainConfig,
    pub precision: Precision,
    pub analysis: AnalysisConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig::default(),
            synth: SynthConfig::default(),
            probe: TrainConfig::default(),
            precision: Precision::F32,
            analysis: AnalysisConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub task: Task,
    pub n_items: u32,
    pub iterations: usize,
    pub seed: u64,
    pub test_fraction: f64,
    /// Line-delimited QA pool; required for MDQA.
    pub pool: Option<PathBuf>,
    pub max_doc_chars: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            task: Task::Kv,
            n_items: 100,
            iterations: 10,
            seed: 0,
            test_fraction: 0.2,
            pool: None,
            max_doc_chars: DEFAULT_MAX_BODY_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Pure noise at every layer instead of a planted signal.
    pub chance: bool,
    pub n_layers: u32,
    pub hidden_dim: u32,
    pub n_classes: u32,
    pub signal_layer: u32,
    pub decay_start: Option<u32>,
    pub noise_sigma: f64,
    pub separation: f64,
    pub n_prompts_per_class: u32,
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            chance: false,
            n_layers: 8,
            hidden_dim: 32,
            n_classes: 11,
            signal_layer: 3,
            decay_start: None,
            noise_sigma: 0.1,
            separation: 4.0,
            n_prompts_per_class: 100,
            seed: 0,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub min_probe_accuracy: f64,
    pub representative: Representative,
    pub space: DistanceSpace,
    pub distance_repetitions: usize,
    pub norm_mode: NormMode,
    pub rms_eps: f64,
    /// Allowed difference between lens and recorded first-token probability.
    pub lens_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            min_probe_accuracy: DEFAULT_MIN_PROBE_ACCURACY,
            representative: Representative::default(),
            space: DistanceSpace::default(),
            distance_repetitions: 1,
            norm_mode: NormMode::default(),
            rms_eps: DEFAULT_RMS_EPS,
            lens_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out: Option<PathBuf>,
    pub train_archive: Option<PathBuf>,
    pub test_archive: Option<PathBuf>,
    /// Archive read by the single-archive analyses.
    pub archive: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub gap_reports: Vec<PathBuf>,
    pub regression_points: Option<PathBuf>,
    pub lm_head: Option<PathBuf>,
    pub norm_scale: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.iterations == 0 {
            bail!("corpus.iterations must be at least 1");
        }
        if c.n_items == 0 {
            bail!("corpus.n_items must be at least 1");
        }
        check_fraction("corpus.test_fraction", c.test_fraction)?;
        check_fraction("synth.test_fraction", self.synth.test_fraction)?;
        self.probe.validate().context("probe")?;
        let a = &self.analysis;
        if !(0.0..=1.0).contains(&a.min_probe_accuracy) {
            bail!("analysis.min_probe_accuracy must lie in [0, 1]");
        }
        if a.distance_repetitions == 0 {
            bail!("analysis.distance_repetitions must be at least 1");
        }
        if !(a.rms_eps >= 0.0 && a.rms_eps.is_finite()) {
            bail!("analysis.rms_eps must be >= 0");
        }
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.paths
            .out
            .as_deref()
            .context("no output directory: pass --out or set paths.out")
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        crate::output::write(dir, RESOLVED_NAME, json + "\n")
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        bail!("{name} must lie strictly between 0 and 1, got {f}");
    }
    Ok(())
}

/// `path` must exist as a file.
pub fn require_file(what: &str, path: Option<&Path>) -> Result<PathBuf> {
    let path = path.with_context(|| format!("missing {what} path"))?;
    if !path.is_file() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"corpus": {"task": "mdqa", "n_items": 30}}"#).unwrap();
        assert_eq!(c.corpus.task, Task::Mdqa);
        assert_eq!(c.corpus.iterations, 10);
        assert_eq!(c.probe.repeats, 10);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"corpus": {"tsak": "kv"}}"#).is_err());
    }

    #[test]
    fn bad_fraction_rejected() {
        let mut c = RunConfig::default();
        c.corpus.test_fraction = 1.0;
        assert!(c.validate().is_err());
    }
}
