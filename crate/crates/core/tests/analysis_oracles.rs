mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use probelens::analysis::distance::{
    adjacent_distance, distance_curve, DistanceOptions, DistanceSpace, Representative,
};
use probelens::analysis::lens::{logit_lens, logit_lens_curve, LensHead, NormMode, RmsNorm};
use probelens::analysis::pca::{pca_fit, pca_project};
use probelens::analysis::AnalysisError;
use probelens::rng::rng_from_seed;
use probelens::tensor_store::{EmbeddingArchive, WeightMatrix};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(m: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut r = rng_from_seed(seed);
    Array2::from_shape_fn((m, d), |_| r.sample(StandardNormal))
}

/// Sample covariance eigenvalues, descending, from nalgebra.
fn oracle_eigenvalues(x: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, d) = x.dim();
    let xm = DMatrix::from_fn(m, d, |i, j| x[[i, j]]);
    let mean = xm.row_mean();
    let mut xc = xm.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    let cov = xc.transpose() * &xc / (m as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

#[test]
fn pca_variances_match_covariance_eigendecomposition() {
    for seed in 0..10 {
        let x = gaussian(20, 8, seed);
        let model = pca_fit(x.view(), 8).unwrap();
        let (vals, vecs) = oracle_eigenvalues(&x);
        for i in 0..8 {
            assert!(
                (model.explained_variance[i] - vals[i]).abs() < 1e-8,
                "seed {seed}, component {i}: {} vs {}",
                model.explained_variance[i],
                vals[i]
            );
            // Same direction up to sign.
            let dot: f64 = (0..8).map(|j| model.components[[i, j]] * vecs[(j, i)]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6, "seed {seed}, component {i}: |dot| = {dot}");
        }
        assert!((model.total_variance - vals.iter().sum::<f64>()).abs() < 1e-8);
    }
}

#[test]
fn wide_pca_matches_oracle() {
    // More features than samples takes the Gram path.
    let x = gaussian(11, 40, 77);
    let model = pca_fit(x.view(), 2).unwrap();
    let (vals, _) = oracle_eigenvalues(&x);
    for i in 0..2 {
        assert!((model.explained_variance[i] - vals[i]).abs() < 1e-8);
    }
}

fn random_orthogonal(d: usize, seed: u64) -> Array2<f64> {
    let g = gaussian(d, d, seed);
    let q = DMatrix::from_fn(d, d, |i, j| g[[i, j]]).qr().q();
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn projected_distances_are_rotation_invariant(seed in any::<u64>(), d in 2usize..9) {
        let x = gaussian(11, d, seed);
        let q = random_orthogonal(d, seed ^ 0x5eed);
        let xr = x.dot(&q);
        let dist = |a: &Array2<f64>| {
            let m = pca_fit(a.view(), 2).unwrap();
            adjacent_distance(pca_project(&m, a.view()).unwrap().view()).unwrap()
        };
        prop_assert!((dist(&x) - dist(&xr)).abs() < 1e-6);
    }
}

/// Class means sit at `c · spacing` along one direction from `signal` on;
/// before that every prompt is the zero vector.
fn line_archive(spacing: f64, sigma: f64, signal: usize) -> EmbeddingArchive {
    let (layers, d, c, per) = (4usize, 6usize, 11u32, 3usize);
    let n = c as usize * per;
    let mut r = rng_from_seed(8);
    let dir: Vec<f64> = {
        let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / norm).collect()
    };
    let mut data = Vec::with_capacity(n * layers * d);
    for p in 0..n {
        let class = (p % c as usize) as f64;
        for l in 0..layers {
            for j in 0..d {
                let v = if l >= signal {
                    class * spacing * dir[j] + sigma * r.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                data.push(v as f32);
            }
        }
    }
    EmbeddingArchive::new(layers as u32, d as u32, data, common::manifest(n, c)).unwrap()
}

#[test]
fn distance_curve_recovers_planted_spacing() {
    let a = line_archive(2.0, 1e-4, 1);
    for representative in [Representative::ClassMean, Representative::SinglePromptPerPosition] {
        let opts = DistanceOptions {
            representative,
            space: DistanceSpace::Projected,
            repetitions: 3,
        };
        let curve = distance_curve::<f64>(&a, &opts).unwrap();
        assert_eq!(curve.per_layer.len(), 4);
        assert_eq!(curve.per_layer[0], 0.0);
        for &dl in &curve.per_layer[1..] {
            assert!((dl - 2.0).abs() < 1e-2, "{representative:?}: {dl}");
        }
    }
    let ambient = DistanceOptions {
        space: DistanceSpace::Ambient,
        representative: Representative::ClassMean,
        repetitions: 1,
    };
    let curve = distance_curve::<f64>(&a, &ambient).unwrap();
    assert!((curve.per_layer[2] - 2.0).abs() < 1e-2);
}

#[test]
fn distance_curve_needs_two_positions() {
    let a = EmbeddingArchive::new(1, 2, vec![0.0; 6], common::manifest(3, 1)).unwrap();
    assert!(matches!(
        distance_curve::<f64>(&a, &DistanceOptions::default()),
        Err(AnalysisError::Coverage(_))
    ));
}

/// Softmax of `head · x̂` with plain loops.
fn oracle_lens(head: &[Vec<f64>], x: &[f64], scale: Option<&[f64]>, eps: f64, row: usize) -> f64 {
    let xh: Vec<f64> = match scale {
        Some(s) => {
            let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
            x.iter().zip(s).map(|(v, g)| v / (ms + eps).sqrt() * g).collect()
        }
        None => x.to_vec(),
    };
    let logits: Vec<f64> = head.iter().map(|r| r.iter().zip(&xh).map(|(a, b)| a * b).sum()).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    (logits[row] - max).exp() / z
}

#[test]
fn logit_lens_matches_dense_oracle() {
    let mut r = rng_from_seed(21);
    for trial in 0..10 {
        let head: Vec<Vec<f64>> = (0..8).map(|_| (0..4).map(|_| r.sample(StandardNormal)).collect()).collect();
        let x: Vec<f64> = (0..4).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let scale: Vec<f64> = (0..4).map(|_| 1.0 + 0.5 * r.sample::<f64, _>(StandardNormal)).collect();
        let lm = Array2::from_shape_fn((8, 4), |(i, j)| head[i][j]);
        let row = trial % 8;
        let plain = LensHead { lm_head: lm.clone(), norm: None };
        let p = logit_lens(Array1::from(x.clone()).view(), &plain, row).unwrap();
        assert!((p - oracle_lens(&head, &x, None, 0.0, row)).abs() < 1e-7);
        let normed = LensHead {
            lm_head: lm,
            norm: Some(RmsNorm { scale: Array1::from(scale.clone()), eps: 1e-5 }),
        };
        let p = logit_lens(Array1::from(x.clone()).view(), &normed, row).unwrap();
        assert!((p - oracle_lens(&head, &x, Some(&scale), 1e-5, row)).abs() < 1e-7);
    }
}

fn weights(name: &str, rows: u32, cols: u32, data: Vec<f32>) -> WeightMatrix {
    WeightMatrix { name: name.into(), rows, cols, data, token_strings: None }
}

#[test]
fn lens_curve_is_composition_of_single_calls() {
    let data = vec![0.5f32, -1.0, 2.0, 0.25, 1.5, -0.5];
    let mut m = common::manifest(1, 1);
    m.target_token_rows = Some(vec![2]);
    let a = EmbeddingArchive::new(2, 3, data.clone(), m).unwrap();
    let lm = weights("lm_head", 4, 3, (0..12).map(|i| (i as f32 - 5.0) / 4.0).collect());
    let norm = weights("final_norm_scale", 1, 3, vec![1.0, 0.5, 2.0]);
    let head = LensHead::<f64>::from_weights(&lm, Some(&norm), NormMode::Apply, 1e-5).unwrap();
    let curve = logit_lens_curve(&a, &head, None).unwrap();
    for layer in 0..2 {
        let x: Array1<f64> = data[layer * 3..layer * 3 + 3].iter().map(|&v| v as f64).collect();
        assert_eq!(curve.per_layer_per_position[layer][0], logit_lens(x.view(), &head, 2).unwrap());
    }
    let skip = LensHead::<f64>::from_weights(&lm, Some(&norm), NormMode::Skip, 1e-5).unwrap();
    assert_eq!(skip.mode(), NormMode::Skip);
    assert!(logit_lens_curve(&a, &skip, Some(&[])).is_err());
}

#[test]
fn zero_layer_is_uniform() {
    let mut m = common::manifest(4, 2);
    m.target_token_rows = Some(vec![0, 1, 2, 3]);
    let mut data = vec![0.0f32; 4 * 2 * 3];
    for p in 0..4 {
        for j in 0..3 {
            data[(p * 2 + 1) * 3 + j] = (p + j) as f32;
        }
    }
    let a = EmbeddingArchive::new(2, 3, data, m).unwrap();
    let lm = weights("lm_head", 5, 3, (0..15).map(|i| (i % 4) as f32 - 1.5).collect());
    let head = LensHead::<f64>::from_weights(&lm, None, NormMode::Apply, 1e-5).unwrap();
    let curve = logit_lens_curve(&a, &head, None).unwrap();
    assert_eq!(curve.positions, vec![1, 2]);
    for &v in &curve.per_layer_per_position[0] {
        assert!((v - 0.2).abs() < 1e-15);
    }
    assert_missing_rows_rejected(&a, &head);
}

fn assert_missing_rows_rejected(a: &EmbeddingArchive, head: &LensHead<f64>) {
    let mut b = a.clone();
    b.manifest.target_token_rows = None;
    assert!(matches!(logit_lens_curve(&b, head, None), Err(AnalysisError::Consistency(_))));
}
