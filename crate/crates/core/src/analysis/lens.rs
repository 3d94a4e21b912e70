//! Logit lens: read an intermediate hidden state through the output head.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::probe::softmax_in_place;
use crate::scalar::pairwise_mean;
use crate::tensor_store::{EmbeddingArchive, WeightMatrix};
use crate::Scalar;

/// Default epsilon inside the RMS normalization.
pub const DEFAULT_RMS_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// RMS-normalize and scale by the final norm weights when available.
    #[default]
    Apply,
    /// Feed the raw hidden state to the head.
    Skip,
}

/// `x / sqrt(mean(x²) + eps) ⊙ scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsNorm<T: Scalar> {
    pub scale: Array1<T>,
    pub eps: T,
}

impl<T: Scalar> RmsNorm<T> {
    pub fn from_weights(w: &WeightMatrix, eps: f64) -> Result<Self, AnalysisError> {
        if w.rows != 1 {
            return Err(AnalysisError::Dimension(format!(
                "norm scale must be 1 × d, got {} × {}",
                w.rows, w.cols
            )));
        }
        Ok(Self {
            scale: w.data.iter().map(|&v| T::of_f32(v)).collect(),
            eps: T::lit(eps),
        })
    }

    pub fn apply(&self, x: ArrayView1<T>) -> Array1<T> {
        let ms = x.iter().map(|v| *v * *v).sum::<T>() / T::of_usize(x.len());
        let inv = T::one() / (ms + self.eps).sqrt();
        x.iter()
            .zip(&self.scale)
            .map(|(&v, &s)| v * inv * s)
            .collect()
    }
}

/// The head (V×d) plus optional final normalization.
#[derive(Debug, Clone)]
pub struct LensHead<T: Scalar> {
    pub lm_head: Array2<T>,
    pub norm: Option<RmsNorm<T>>,
}

impl<T: Scalar> LensHead<T> {
    /// Builds a head; `norm_scale` is ignored under [`NormMode::Skip`].
    pub fn from_weights(
        lm_head: &WeightMatrix,
        norm_scale: Option<&WeightMatrix>,
        mode: NormMode,
        eps: f64,
    ) -> Result<Self, AnalysisError> {
        let norm = match (mode, norm_scale) {
            (NormMode::Apply, Some(w)) => Some(RmsNorm::from_weights(w, eps)?),
            _ => None,
        };
        let head = Self {
            lm_head: lm_head.to_array(),
            norm,
        };
        head.check()?;
        Ok(head)
    }

    fn check(&self) -> Result<(), AnalysisError> {
        if let Some(n) = &self.norm {
            if n.scale.len() != self.lm_head.ncols() {
                return Err(AnalysisError::Dimension(format!(
                    "norm scale has {} entries, head has {} columns",
                    n.scale.len(),
                    self.lm_head.ncols()
                )));
            }
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.lm_head.nrows()
    }

    pub fn mode(&self) -> NormMode {
        if self.norm.is_some() {
            NormMode::Apply
        } else {
            NormMode::Skip
        }
    }

    /// Full next-token distribution for hidden state `x`.
    pub fn distribution(&self, x: ArrayView1<T>) -> Result<Array1<T>, AnalysisError> {
        if x.len() != self.lm_head.ncols() {
            return Err(AnalysisError::Dimension(format!(
                "hidden state has {} entries, head expects {}",
                x.len(),
                self.lm_head.ncols()
            )));
        }
        self.check()?;
        let mut logits = match &self.norm {
            Some(n) => self.lm_head.dot(&n.apply(x)),
            None => self.lm_head.dot(&x),
        };
        softmax_in_place(logits.as_slice_mut().expect("contiguous"));
        Ok(logits)
    }
}

/// Probability the head assigns to `target_row` given hidden state `x`.
pub fn logit_lens<T: Scalar>(
    x: ArrayView1<T>,
    head: &LensHead<T>,
    target_row: usize,
) -> Result<T, AnalysisError> {
    if target_row >= head.vocab_size() {
        return Err(AnalysisError::Dimension(format!(
            "target row {target_row} out of range for vocabulary of {}",
            head.vocab_size()
        )));
    }
    Ok(head.distribution(x)?[target_row])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitLensCurve<T: Scalar> {
    /// Gold positions present in the archive, in schedule order.
    pub positions: Vec<u32>,
    /// `[layer][position]` mean probability of the first answer token.
    pub per_layer_per_position: Vec<Vec<T>>,
    pub norm_mode: NormMode,
}

impl<T: Scalar> LogitLensCurve<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer");
        for p in &self.positions {
            s.push_str(&format!(",prob_pos{p}"));
        }
        s.push('\n');
        for (l, row) in self.per_layer_per_position.iter().enumerate() {
            s.push_str(&l.to_string());
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Mean first-answer-token probability per layer and gold position.
/// `target_rows` defaults to the manifest's `target_token_rows`.
pub fn logit_lens_curve<T: Scalar>(
    archive: &EmbeddingArchive,
    head: &LensHead<T>,
    target_rows: Option<&[u32]>,
) -> Result<LogitLensCurve<T>, AnalysisError> {
    let rows = target_rows
        .or(archive.manifest.target_token_rows.as_deref())
        .ok_or_else(|| {
            AnalysisError::Consistency("no target token rows supplied or in manifest".into())
        })?;
    if rows.len() != archive.n_prompts() {
        return Err(AnalysisError::Consistency(format!(
            "{} target rows for {} prompts",
            rows.len(),
            archive.n_prompts()
        )));
    }
    let schedule = &archive.manifest.schedule;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); schedule.len()];
    for (p, &c) in archive.manifest.gold_classes.iter().enumerate() {
        members[c as usize].push(p);
    }
    let present: Vec<usize> = (0..schedule.len()).filter(|&c| !members[c].is_empty()).collect();

    let mut curve = Vec::with_capacity(archive.n_layers());
    for layer in 0..archive.n_layers() {
        let mut row = Vec::with_capacity(present.len());
        for &c in &present {
            let probs = members[c]
                .iter()
                .map(|&p| {
                    let x: Array1<T> = archive.embedding(p, layer).iter().map(|&v| T::of_f32(v)).collect();
                    logit_lens(x.view(), head, rows[p] as usize)
                })
                .collect::<Result<Vec<T>, _>>()?;
            row.push(pairwise_mean(&probs).expect("non-empty class"));
        }
        curve.push(row);
    }
    Ok(LogitLensCurve {
        positions: present.iter().map(|&c| schedule.positions[c]).collect(),
        per_layer_per_position: curve,
        norm_mode: head.mode(),
    })
}

/// A prompt whose final-layer lens probability of its greedy first token
/// disagrees with the probability recorded by the extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensMismatch {
    pub prompt_id: String,
    pub lens_probability: f64,
    pub recorded_probability: f64,
}

/// Compares the last layer's lens probability for each generation's first
/// token against the extractor-recorded value. Generations without both
/// fields are skipped; returns the mismatches beyond `tolerance` and the
/// number of prompts compared.
pub fn first_token_consistency<T: Scalar>(
    archive: &EmbeddingArchive,
    head: &LensHead<T>,
    tolerance: f64,
) -> Result<(Vec<LensMismatch>, usize), AnalysisError> {
    let gens = archive
        .manifest
        .generations
        .as_ref()
        .ok_or_else(|| AnalysisError::Consistency("manifest has no generations".into()))?;
    let index: std::collections::HashMap<&str, usize> = archive
        .manifest
        .prompt_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let last = archive.n_layers() - 1;
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for g in gens {
        let (Some(row), Some(recorded)) = (g.first_token_row, g.first_token_prob) else {
            continue;
        };
        let &p = index.get(g.prompt_id.as_str()).ok_or_else(|| {
            AnalysisError::Consistency(format!("generation for unknown prompt {}", g.prompt_id))
        })?;
        let x: Array1<T> = archive.embedding(p, last).iter().map(|&v| T::of_f32(v)).collect();
        let lens = logit_lens(x.view(), head, row as usize)?.to_f64_lossy();
        compared += 1;
        if (lens - recorded as f64).abs() > tolerance {
            mismatches.push(LensMismatch {
                prompt_id: g.prompt_id.clone(),
                lens_probability: lens,
                recorded_probability: recorded as f64,
            });
        }
    }
    Ok((mismatches, compared))
}
