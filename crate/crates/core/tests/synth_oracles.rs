mod common;

use common::nearest_centroid_accuracy;
use probelens::analysis::stats::binomial_interval;
use probelens::probe::{layer_sweep, TrainConfig};
use probelens::synth::{chance_archive, planted_archive, PlantSpec};
use probelens::tensor_store::{split_archive, validate_archive, write_archive};
use proptest::prelude::*;

fn spec(seed: u64) -> PlantSpec {
    PlantSpec {
        n_layers: 8,
        hidden_dim: 32,
        n_classes: 11,
        signal_layer: 3,
        decay_start: None,
        noise_sigma: 0.1,
        separation: 4.0,
        n_prompts_per_class: 100,
        seed,
    }
}

#[test]
fn nearest_centroid_sees_signal_only_from_signal_layer() {
    let a = planted_archive(&spec(5)).unwrap();
    let (train, test) = split_archive(&a, 0.2, 5).unwrap();
    let (lo, hi) = binomial_interval(test.n_prompts() as u64, 1.0 / 11.0, 0.99);
    for layer in 0..8 {
        let acc = nearest_centroid_accuracy(&train, &test, layer);
        if layer < 3 {
            assert!(acc >= lo && acc <= hi, "layer {layer}: {acc} outside [{lo}, {hi}]");
        } else {
            assert!(acc >= 0.99, "layer {layer}: {acc}");
        }
    }
}

#[test]
fn decay_makes_oracle_accuracy_non_increasing() {
    let s = PlantSpec {
        decay_start: Some(5),
        noise_sigma: 1.0,
        separation: 6.0,
        ..spec(9)
    };
    let a = planted_archive(&s).unwrap();
    let (train, test) = split_archive(&a, 0.2, 9).unwrap();
    let accs: Vec<f64> = (5..8).map(|l| nearest_centroid_accuracy(&train, &test, l)).collect();
    assert!(accs.windows(2).all(|w| w[0] >= w[1]), "{accs:?}");
    // The last layer carries no signal at all.
    assert!(accs[2] < 0.3, "{accs:?}");
}

#[test]
fn noiseless_limit_gives_perfect_probes() {
    let s = PlantSpec {
        noise_sigma: 1e-6,
        n_prompts_per_class: 10,
        n_layers: 5,
        ..spec(2)
    };
    let a = planted_archive(&s).unwrap();
    let (train, test) = split_archive(&a, 0.2, 2).unwrap();
    let cfg = TrainConfig {
        repeats: 2,
        ..TrainConfig::default()
    };
    let report = layer_sweep::<f64>(&train, &test, &cfg).unwrap();
    for m in &report.metrics[3..] {
        assert_eq!(m.mean_accuracy, 1.0, "layer {}", m.layer);
    }
    assert_eq!(report.peak_layer, 3);
}

#[test]
fn chance_sweep_stays_in_band() {
    let a = chance_archive(3, 32, 11, 100, 4).unwrap();
    let (train, test) = split_archive(&a, 0.2, 4).unwrap();
    let cfg = TrainConfig {
        repeats: 3,
        ..TrainConfig::default()
    };
    let report = layer_sweep::<f32>(&train, &test, &cfg).unwrap();
    let (lo, hi) = binomial_interval(test.n_prompts() as u64, 1.0 / 11.0, 0.99);
    for m in &report.metrics {
        assert!(m.mean_accuracy >= lo && m.mean_accuracy <= hi, "layer {}: {}", m.layer, m.mean_accuracy);
    }
}

#[test]
fn chance_seeds_differ_only_in_payload() {
    let a = chance_archive(2, 4, 11, 100, 1).unwrap();
    let b = chance_archive(2, 4, 11, 100, 2).unwrap();
    assert_eq!(a.header, b.header);
    assert_eq!(a.header.n_prompts, 1100);
    assert_eq!(a.manifest.prompt_ids, b.manifest.prompt_ids);
    assert_ne!(a.data, b.data);
}

fn plant_spec() -> impl Strategy<Value = PlantSpec> {
    (2u32..7, 1u32..12, 1u32..6, any::<u64>(), 0.01f64..2.0, 0.1f64..10.0)
        .prop_flat_map(|(n_layers, n_classes, per_class, seed, sigma, sep)| {
            let dims = n_classes.max(1)..=(n_classes + 4);
            (Just((n_layers, n_classes, per_class, seed, sigma, sep)), dims, 0..n_layers - 1)
        })
        .prop_flat_map(|((n_layers, n_classes, per_class, seed, sigma, sep), dim, signal)| {
            let decay = prop::option::of(signal + 1..n_layers);
            (Just((n_layers, n_classes, per_class, seed, sigma, sep, dim, signal)), decay)
        })
        .prop_map(|((n_layers, n_classes, per_class, seed, sigma, sep, dim, signal), decay)| PlantSpec {
            n_layers,
            hidden_dim: dim,
            n_classes,
            signal_layer: signal,
            decay_start: decay,
            noise_sigma: sigma,
            separation: sep,
            n_prompts_per_class: per_class,
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn planted_archives_validate(s in plant_spec()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.prbe");
        let a = planted_archive(&s).unwrap();
        write_archive(&a, &path).unwrap();
        let report = validate_archive(&path).unwrap();
        prop_assert!(report.is_valid(), "{:?}", report.failures);
    }
}
