//! Synthetic archives with a planted positional signal.
//!
//! Class `c` gets mean `separation · u_c`, where the `u_c` are the first
//! `n_classes` columns of a seeded random orthogonal matrix. Before
//! `signal_layer` every prompt is pure noise; from `signal_layer` on the
//! class mean is added, scaled by `α(l)` once `decay_start` is reached:
//! `α(l) = (L − 1 − l) / (L − decay_start)`, which falls linearly to 0 at
//! the last layer.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{PositionSchedule, Task};
use crate::rng::{self, stream};
use crate::tensor_store::{EmbeddingArchive, Manifest, LAYER_INDEXING_NOTE};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid plant spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Archive(#[from] crate::tensor_store::ArchiveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub n_layers: u32,
    pub hidden_dim: u32,
    pub n_classes: u32,
    pub signal_layer: u32,
    #[serde(default)]
    pub decay_start: Option<u32>,
    pub noise_sigma: f64,
    pub separation: f64,
    pub n_prompts_per_class: u32,
    pub seed: u64,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_layers == 0 || self.hidden_dim == 0 || self.n_classes == 0 || self.n_prompts_per_class == 0 {
            return bad("counts must be >= 1".into());
        }
        if self.signal_layer >= self.n_layers {
            return bad(format!(
                "signal_layer {} must be < n_layers {}",
                self.signal_layer, self.n_layers
            ));
        }
        if let Some(d) = self.decay_start {
            if d <= self.signal_layer || d >= self.n_layers {
                return bad(format!(
                    "decay_start {d} must lie in ({}, {})",
                    self.signal_layer, self.n_layers
                ));
            }
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be > 0".into());
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad("separation must be > 0".into());
        }
        if self.n_classes > self.hidden_dim {
            return bad(format!(
                "n_classes {} exceeds hidden_dim {}",
                self.n_classes, self.hidden_dim
            ));
        }
        if self.n_classes as usize > crate::corpus::MAX_SCHEDULE_LEN {
            return bad(format!(
                "n_classes {} exceeds the schedule limit of {}",
                self.n_classes,
                crate::corpus::MAX_SCHEDULE_LEN
            ));
        }
        Ok(())
    }

    /// Class-mean scale at `layer`.
    pub fn alpha(&self, layer: u32) -> f64 {
        if layer < self.signal_layer {
            return 0.0;
        }
        match self.decay_start {
            Some(d) if layer >= d => {
                (self.n_layers - 1 - layer) as f64 / (self.n_layers - d) as f64
            }
            _ => 1.0,
        }
    }
}

/// `n_classes` orthonormal directions in `R^d` (Gram-Schmidt on Gaussian
/// vectors, i.e. the leading columns of a random rotation).
pub fn class_directions(n_classes: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::sub_rng(seed, stream::SYNTH_ROTATION, 0);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    while dirs.len() < n_classes {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for u in &dirs {
                let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            dirs.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    dirs
}

fn synthetic_manifest(model: &str, n_classes: u32, n_per_class: u32, note: &str) -> Manifest {
    let schedule = PositionSchedule {
        n: n_classes,
        positions: (1..=n_classes).collect(),
    };
    let n = (n_classes * n_per_class) as usize;
    // Interleaved: prompt p belongs to class p mod C.
    let gold_classes: Vec<u32> = (0..n).map(|p| p as u32 % n_classes).collect();
    Manifest {
        model_name: model.into(),
        layer_indexing_note: format!("{LAYER_INDEXING_NOTE}; {note}"),
        prompt_ids: (0..n).map(|p| format!("synth-{p:06}")).collect(),
        gold_positions: gold_classes.iter().map(|c| c + 1).collect(),
        gold_classes,
        task: Task::Synthetic,
        schedule,
        generations: None,
        extractor_version: format!("probelens-synth/{}", env!("CARGO_PKG_VERSION")),
        target_token_rows: None,
        skipped: vec![],
    }
}

pub fn planted_archive(spec: &PlantSpec) -> Result<EmbeddingArchive, SynthError> {
    spec.validate()?;
    let (l, d, c) = (spec.n_layers as usize, spec.hidden_dim as usize, spec.n_classes);
    let dirs = class_directions(c as usize, d, spec.seed);
    let manifest = synthetic_manifest(
        "synthetic-planted",
        c,
        spec.n_prompts_per_class,
        &format!(
            "planted: signal_layer={}, decay_start={:?}, sigma={}, separation={}, seed={}",
            spec.signal_layer, spec.decay_start, spec.noise_sigma, spec.separation, spec.seed
        ),
    );
    let n = manifest.prompt_ids.len();
    let mut data = Vec::with_capacity(n * l * d);
    for p in 0..n {
        let class = manifest.gold_classes[p] as usize;
        let mut rng = rng::sub_rng(spec.seed, stream::SYNTH_PROMPT, p as u64);
        for layer in 0..l {
            let a = spec.alpha(layer as u32) * spec.separation;
            for &u in &dirs[class] {
                let noise: f64 = rng.sample(StandardNormal);
                data.push((a * u + spec.noise_sigma * noise) as f32);
            }
        }
    }
    Ok(EmbeddingArchive::new(spec.n_layers, spec.hidden_dim, data, manifest)?)
}

/// Unit Gaussian noise everywhere; labels balanced and uninformative.
pub fn chance_archive(
    n_layers: u32,
    hidden_dim: u32,
    n_classes: u32,
    n_per_class: u32,
    seed: u64,
) -> Result<EmbeddingArchive, SynthError> {
    if n_layers == 0 || hidden_dim == 0 || n_classes == 0 || n_per_class == 0 {
        return Err(SynthError::InvalidSpec("counts must be >= 1".into()));
    }
    if n_classes as usize > crate::corpus::MAX_SCHEDULE_LEN {
        return Err(SynthError::InvalidSpec(format!(
            "n_classes {n_classes} exceeds the schedule limit"
        )));
    }
    let manifest = synthetic_manifest("synthetic-chance", n_classes, n_per_class, &format!("chance: seed={seed}"));
    let n = manifest.prompt_ids.len();
    let per_prompt = (n_layers * hidden_dim) as usize;
    let mut data = Vec::with_capacity(n * per_prompt);
    for p in 0..n {
        let mut rng = rng::sub_rng(seed, stream::SYNTH_PROMPT, p as u64);
        data.extend((0..per_prompt).map(|_| rng.sample::<f64, _>(StandardNormal) as f32));
    }
    Ok(EmbeddingArchive::new(n_layers, hidden_dim, data, manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PlantSpec {
        PlantSpec {
            n_layers: 8,
            hidden_dim: 16,
            n_classes: 4,
            signal_layer: 3,
            decay_start: None,
            noise_sigma: 0.1,
            separation: 4.0,
            n_prompts_per_class: 5,
            seed: 1,
        }
    }

    #[test]
    fn directions_are_orthonormal() {
        let dirs = class_directions(11, 32, 9);
        for (i, a) in dirs.iter().enumerate() {
            for (j, b) in dirs.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_schedule() {
        let mut s = spec();
        assert_eq!(s.alpha(2), 0.0);
        assert_eq!(s.alpha(3), 1.0);
        assert_eq!(s.alpha(7), 1.0);
        s.decay_start = Some(5);
        assert!((s.alpha(5) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.alpha(6) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.alpha(7), 0.0);
    }

    #[test]
    fn spec_violations() {
        for f in [
            (|s: &mut PlantSpec| s.signal_layer = 8) as fn(&mut PlantSpec),
            |s| s.decay_start = Some(3),
            |s| s.decay_start = Some(8),
            |s| s.n_classes = 17,
            |s| s.noise_sigma = 0.0,
            |s| s.separation = -1.0,
            |s| s.n_prompts_per_class = 0,
        ] {
            let mut s = spec();
            f(&mut s);
            assert!(planted_archive(&s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn chance_shapes_and_seeds() {
        let a = chance_archive(2, 8, 11, 100, 1).unwrap();
        assert_eq!(a.header.n_prompts, 1100);
        let b = chance_archive(2, 8, 11, 100, 2).unwrap();
        assert_ne!(a.data, b.data);
        assert_eq!(a.manifest.gold_classes, b.manifest.gold_classes);
        assert_eq!(a.header, b.header);
    }

    #[test]
    fn planted_is_deterministic() {
        assert_eq!(planted_archive(&spec()).unwrap(), planted_archive(&spec()).unwrap());
    }
}
