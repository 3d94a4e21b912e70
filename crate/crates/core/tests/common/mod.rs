#![allow(dead_code)]

use probelens::corpus::{PositionSchedule, Task};
use probelens::tensor_store::{EmbeddingArchive, Manifest, LAYER_INDEXING_NOTE};

/// Balanced interleaved manifest over positions `1..=n_classes`.
pub fn manifest(n_prompts: usize, n_classes: u32) -> Manifest {
    let gold_classes: Vec<u32> = (0..n_prompts).map(|p| p as u32 % n_classes).collect();
    Manifest {
        model_name: "fixture".into(),
        layer_indexing_note: LAYER_INDEXING_NOTE.into(),
        prompt_ids: (0..n_prompts).map(|p| format!("p{p}")).collect(),
        gold_positions: gold_classes.iter().map(|c| c + 1).collect(),
        gold_classes,
        task: Task::Synthetic,
        schedule: PositionSchedule {
            n: n_classes,
            positions: (1..=n_classes).collect(),
        },
        generations: None,
        extractor_version: "fixture".into(),
        target_token_rows: None,
        skipped: vec![],
    }
}

/// Accuracy at `layer` of assigning each test prompt to the nearest
/// train-class centroid. Independent of the probe code path: plain loops,
/// f64 accumulation, reading the raw payload.
pub fn nearest_centroid_accuracy(train: &EmbeddingArchive, test: &EmbeddingArchive, layer: usize) -> f64 {
    let c = train.manifest.schedule.positions.len();
    let d = train.header.hidden_dim as usize;
    let l = train.header.n_layers as usize;
    let at = |a: &EmbeddingArchive, p: usize| -> Vec<f64> {
        let off = (p * l + layer) * d;
        a.data[off..off + d].iter().map(|&v| v as f64).collect()
    };
    let mut sums = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    for p in 0..train.manifest.prompt_ids.len() {
        let k = train.manifest.gold_classes[p] as usize;
        for (s, v) in sums[k].iter_mut().zip(at(train, p)) {
            *s += v;
        }
        counts[k] += 1;
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    let n_test = test.manifest.prompt_ids.len();
    let mut correct = 0;
    for p in 0..n_test {
        let x = at(test, p);
        let mut best = (usize::MAX, f64::INFINITY);
        for (k, mu) in sums.iter().enumerate() {
            let dist: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (k, dist);
            }
        }
        if best.0 == test.manifest.gold_classes[p] as usize {
            correct += 1;
        }
    }
    correct as f64 / n_test as f64
}
