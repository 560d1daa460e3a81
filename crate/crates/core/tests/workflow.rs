use std::collections::BTreeMap;

use csiqa::diversity::feature_diversity;
use csiqa::features::extract_features;
use csiqa::similarity::dataset_difference;
use csiqa::synth::{self, generate_dataset};
use csiqa::workflow::{augment_select, diversity_report, similarity_report, MethodConfig};
use csiqa::*;
use num_complex::Complex32;

fn cfg(seed: u64, n: usize) -> SynthConfig {
    SynthConfig {
        antenna_grid: (2, 4),
        n_samples: n,
        seed: RandomSeed(seed),
        ..SynthConfig::default()
    }
}

fn spread(seed: u64, target: f64) -> Dataset {
    generate_dataset(&cfg(seed, 12), &synth::delay_spread_ranges(target))
        .unwrap()
        .dataset
}

#[test]
fn identical_sets_have_zero_wasserstein() {
    let d = spread(1, 300.0);
    let report = similarity_report(&d, &d, &SimilarityConfig::default()).unwrap();
    assert_eq!(report.per_feature.keys().copied().collect::<Vec<_>>(), {
        let mut k = FeatureKind::DEFAULT.to_vec();
        k.sort();
        k
    });
    for v in report.per_feature.values() {
        assert!(v.abs() < 1e-9, "{v}");
    }
    assert!(report.aggregate.abs() < 1e-9);
}

#[test]
fn report_matches_stage_by_stage_composition() {
    let (x, y) = (spread(2, 100.0), spread(3, 900.0));
    let cfg = SimilarityConfig {
        measure: SimilarityMeasure::Nnca,
        ..SimilarityConfig::default()
    };
    let report = similarity_report(&x, &y, &cfg).unwrap();
    for f in FeatureKind::DEFAULT {
        let manual =
            dataset_difference(&x, &y, f, DistanceKind::Ecs, SimilarityMeasure::Nnca).unwrap();
        assert_eq!(report.per_feature[&f], manual);
    }
    let raw: Vec<f64> = report.per_feature.values().copied().collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(*v), h.max(*v))
        });
    for (f, v) in &report.normalized {
        let expected = if hi > lo {
            (report.per_feature[f] - lo) / (hi - lo)
        } else {
            0.0
        };
        assert!((v - expected).abs() < 1e-15);
    }
    let mean = report.normalized.values().sum::<f64>() / 4.0;
    assert!((report.aggregate - mean).abs() < 1e-12);
}

#[test]
fn reports_replay_bit_identically() {
    let (x, y) = (spread(4, 200.0), spread(5, 400.0));
    let cfg = SimilarityConfig {
        measure: SimilarityMeasure::Mmd {
            bandwidth: Bandwidth::MedianHeuristic,
        },
        rule: AggregationRule::Min,
        ..SimilarityConfig::default()
    };
    let report = similarity_report(&x, &y, &cfg).unwrap();
    let text = report.to_json().unwrap();
    let parsed = QualityReport::from_json(&text).unwrap();
    assert_eq!(parsed, report);
    let replayed = parsed.replay(&x, Some(&y)).unwrap();
    assert_eq!(replayed.to_json().unwrap(), text);

    let div = diversity_report(&x, &DiversityConfig::default()).unwrap();
    let text = div.to_json().unwrap();
    assert!(matches!(div.method_config, MethodConfig::Diversity(_)));
    assert_eq!(
        QualityReport::from_json(&text)
            .unwrap()
            .replay(&x, None)
            .unwrap()
            .to_json()
            .unwrap(),
        text
    );
}

#[test]
fn diversity_report_averages_raw_values() {
    let d = spread(6, 600.0);
    let report = diversity_report(&d, &DiversityConfig::default()).unwrap();
    let bundles = extract_features(&d).unwrap();
    let manual: f64 = FeatureKind::DEFAULT
        .iter()
        .map(|&f| feature_diversity(&bundles, f, &DiversityMeasure::default_for(f)).unwrap())
        .sum::<f64>()
        / 4.0;
    assert!((report.aggregate - manual).abs() < 1e-12);
    assert!(!report.per_feature.contains_key(&FeatureKind::Doppler));
    let doppler = DiversityConfig::for_features(&[FeatureKind::Doppler]);
    assert!(matches!(
        diversity_report(&d, &doppler),
        Err(Error::Incompatible(_))
    ));
}

#[test]
fn constant_dataset_has_zero_diversity() {
    let shape = SampleShape::new((2, 2), 8, 1).unwrap();
    let s = ChannelSample::from_fn(shape, |a, f, _| {
        Complex32::new(1.0 + a as f32, f as f32 * 0.1)
    })
    .unwrap();
    let d = Dataset::new(vec![s; 6], BTreeMap::new()).unwrap();
    let report = diversity_report(&d, &DiversityConfig::default()).unwrap();
    for v in report.per_feature.values() {
        assert_eq!(*v, 0.0);
    }
}

#[test]
fn selection_prefers_the_copy() {
    let reference = spread(7, 200.0);
    let far = spread(8, 3000.0);
    let candidates = vec![far.clone(), reference.clone()];
    let result = augment_select(&reference, &candidates, &SelectionConfig::top_k(1)).unwrap();
    assert_eq!(result.selected, vec![1]);
    assert_eq!(result.ranking, vec![1, 0]);

    let all = augment_select(&reference, &candidates, &SelectionConfig::top_k(2)).unwrap();
    assert_eq!(all.selected, all.ranking);
    assert!(augment_select(&reference, &candidates, &SelectionConfig::top_k(3)).is_err());
    assert!(augment_select(&reference, &candidates, &SelectionConfig::top_k(0)).is_err());
    assert!(augment_select(&reference, &[], &SelectionConfig::top_k(1)).is_err());
}

#[test]
fn selection_ties_break_by_index() {
    let reference = spread(9, 500.0);
    let twin = spread(10, 1500.0);
    let candidates = vec![twin.clone(), twin.clone(), twin];
    let result = augment_select(&reference, &candidates, &SelectionConfig::top_k(2)).unwrap();
    assert_eq!(result.ranking, vec![0, 1, 2]);
    assert_eq!(result.selected, vec![0, 1]);
    let aggregates: Vec<f64> = result.differences.iter().map(|d| d.aggregate).collect();
    assert!(aggregates.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn threshold_selection() {
    let reference = spread(11, 100.0);
    let candidates = vec![spread(12, 3000.0), reference.clone(), spread(13, 150.0)];
    let mut cfg = SelectionConfig::top_k(1);
    cfg.selector = Selector::Threshold(0.0);
    let result = augment_select(&reference, &candidates, &cfg).unwrap();
    assert_eq!(result.selected, vec![1]);
    cfg.selector = Selector::Threshold(1.0);
    assert_eq!(
        augment_select(&reference, &candidates, &cfg)
            .unwrap()
            .selected
            .len(),
        3
    );
}

#[test]
fn generated_datasets_honour_their_windows() {
    let g = generate_dataset(&cfg(14, 30), &synth::appendix_a_ranges(800.0, 2000.0)).unwrap();
    assert_eq!(g.dataset.len(), 30);
    for s in &g.rms_delay_spreads {
        let ns = s * 1e9;
        assert!((800.0 - 1e-6..=2800.0 + 1e-6).contains(&ns), "{ns}");
    }
    let other = generate_dataset(&cfg(15, 30), &synth::appendix_a_ranges(800.0, 2000.0)).unwrap();
    let d = dataset_difference(
        &g.dataset,
        &other.dataset,
        FeatureKind::Pdp,
        DistanceKind::Ecs,
        SimilarityMeasure::MeanDistance,
    )
    .unwrap();
    assert!(d > 0.0);
}

#[test]
fn paper_scale_sample_count() {
    let c = SynthConfig {
        n_samples: 200,
        antenna_grid: (1, 2),
        n_subcarriers: 8,
        ..SynthConfig::default()
    };
    assert_eq!(
        generate_dataset(&c, &synth::uma_proxy_ranges())
            .unwrap()
            .dataset
            .len(),
        200
    );
}

#[test]
fn candidate_pool_and_grid_counts() {
    let c = SynthConfig {
        n_samples: 2,
        antenna_grid: (2, 8),
        n_subcarriers: 8,
        ..SynthConfig::default()
    };
    let pool = synth::appendix_b_candidate_pool(&c, 100).unwrap();
    assert_eq!(pool.len(), 100);
    for g in &pool {
        assert!(g.ranges.aod_deg.0 >= -90.0 && g.ranges.aod_deg.1 <= 90.0);
        assert!(g.ranges.delay_ns.0 >= 0.0);
    }
    assert_eq!(synth::appendix_c_grid(&c).unwrap().len(), 84);
}
