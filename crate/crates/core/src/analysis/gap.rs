//! The gap between what the probes can locate and what the model says.

use serde::{Deserialize, Serialize};

use super::generation::PositionAccuracy;
use super::regression::RegressionPoint;
use super::AnalysisError;
use crate::probe::LayerSweepReport;

/// Best probe accuracy for one gold position and the layer reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePeak {
    pub gold_position: u32,
    pub peak_layer: u32,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub gold_position: u32,
    pub generation_accuracy: f64,
    pub peak_probe_accuracy: f64,
    pub peak_layer: u32,
    /// `peak_probe_accuracy − generation_accuracy`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub per_position: Vec<GapRow>,
    pub mean_gap: f64,
}

impl GapReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gold_position,generation_accuracy,peak_probe_accuracy,peak_layer,gap\n");
        for r in &self.per_position {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.gold_position, r.generation_accuracy, r.peak_probe_accuracy, r.peak_layer, r.gap
            ));
        }
        s
    }

    /// One regression point per position, labelled `label:pos<k>`.
    pub fn regression_points(&self, label: &str) -> Vec<RegressionPoint> {
        self.per_position
            .iter()
            .map(|r| RegressionPoint {
                peak_layer: r.peak_layer as f64,
                peak_probe_accuracy: r.peak_probe_accuracy,
                generation_accuracy: r.generation_accuracy,
                label: Some(format!("{label}:pos{}", r.gold_position)),
            })
            .collect()
    }
}

/// Per position, the best per-class probe accuracy over all layers of a
/// global sweep (earliest layer on ties).
pub fn peaks_from_sweep(report: &LayerSweepReport) -> Vec<ProbePeak> {
    report
        .per_class_peaks()
        .into_iter()
        .enumerate()
        .map(|(c, (layer, acc))| ProbePeak {
            gold_position: report.positions.get(c).copied().unwrap_or(c as u32 + 1),
            peak_layer: layer,
            accuracy: acc,
        })
        .collect()
}

pub fn ktdt_gap(
    probe_peaks: &[ProbePeak],
    generation: &[PositionAccuracy],
) -> Result<GapReport, AnalysisError> {
    let pa: Vec<u32> = probe_peaks.iter().map(|v| v.gold_position).collect();
    let pb: Vec<u32> = generation.iter().map(|v| v.gold_position).collect();
    if pa != pb {
        return Err(AnalysisError::ScheduleMismatch(format!(
            "probe positions {pa:?} vs generation positions {pb:?}"
        )));
    }
    if pa.is_empty() {
        return Err(AnalysisError::InsufficientData("no positions".into()));
    }
    let per_position: Vec<GapRow> = probe_peaks
        .iter()
        .zip(generation)
        .map(|(p, g)| GapRow {
            gold_position: p.gold_position,
            generation_accuracy: g.accuracy,
            peak_probe_accuracy: p.accuracy,
            peak_layer: p.peak_layer,
            gap: p.accuracy - g.accuracy,
        })
        .collect();
    let mean_gap = per_position.iter().map(|r| r.gap).sum::<f64>() / per_position.len() as f64;
    Ok(GapReport {
        per_position,
        mean_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peaks(vals: &[(u32, f64)]) -> Vec<ProbePeak> {
        vals.iter()
            .enumerate()
            .map(|(i, &(gold_position, accuracy))| ProbePeak {
                gold_position,
                peak_layer: 10 + i as u32,
                accuracy,
            })
            .collect()
    }

    fn gens(vals: &[(u32, f64)]) -> Vec<PositionAccuracy> {
        vals.iter()
            .map(|&(gold_position, accuracy)| PositionAccuracy {
                gold_position,
                n: 10,
                correct: (accuracy * 10.0).round() as usize,
                accuracy,
            })
            .collect()
    }

    #[test]
    fn constant_gap() {
        let p = peaks(&[(1, 1.0), (5, 1.0), (10, 1.0)]);
        let g = gens(&[(1, 0.6), (5, 0.6), (10, 0.6)]);
        let r = ktdt_gap(&p, &g).unwrap();
        assert!(r.per_position.iter().all(|g| (g.gap - 0.4).abs() < 1e-12));
        assert!((r.mean_gap - 0.4).abs() < 1e-12);
        let r = ktdt_gap(&p, &gens(&[(1, 1.0), (5, 1.0), (10, 1.0)])).unwrap();
        assert!(r.per_position.iter().all(|g| g.gap == 0.0));
    }

    #[test]
    fn hand_fixture_and_mismatch() {
        let p = peaks(&[(1, 0.9), (2, 0.8), (3, 0.95)]);
        let g = gens(&[(1, 0.7), (2, 0.3), (3, 1.0)]);
        let r = ktdt_gap(&p, &g).unwrap();
        let gaps: Vec<f64> = r.per_position.iter().map(|g| g.gap).collect();
        for (got, want) in gaps.iter().zip([0.2, 0.5, -0.05]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((r.mean_gap - 0.65 / 3.0).abs() < 1e-12);
        assert!(ktdt_gap(&p, &g[..2]).is_err());
        assert_eq!(r.to_csv().lines().count(), 4);
        let pts = r.regression_points("m");
        assert_eq!(pts[1].peak_layer, 11.0);
        assert_eq!(pts[1].label.as_deref(), Some("m:pos2"));
    }
}
