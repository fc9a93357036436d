use proptest::prelude::*;

use tsasd_core::detectors::{DetectorId, DetectorSpec};
use tsasd_core::pipeline::{self, PipelineConfig, TrainedPipeline};
use tsasd_core::series::{TimeSeries, WindowSelector};

fn wave(n: usize, phase: usize, dims: usize) -> TimeSeries {
    let values = (0..n)
        .flat_map(|i| (0..dims).map(move |d| ((i + phase) as f64 * 0.3 + d as f64).sin()))
        .collect();
    TimeSeries::new("wave", dims, values).unwrap()
}

#[test]
fn model_json_round_trip_scores_identically() {
    let cfg = PipelineConfig::new(DetectorSpec::new(DetectorId::Iforest), WindowSelector::Acf).with_seed(11);
    let trained = pipeline::train(&wave(400, 0, 2), &cfg).unwrap();
    let restored = TrainedPipeline::from_json(&trained.to_json().unwrap()).unwrap();
    let test = wave(300, 5, 2);
    assert_eq!(pipeline::test(&trained, &test).unwrap(), pipeline::test(&restored, &test).unwrap());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let cfg = PipelineConfig::new(DetectorSpec::new(DetectorId::Knn), WindowSelector::Fixed(8));
    let trained = pipeline::train(&wave(200, 0, 2), &cfg).unwrap();
    assert!(pipeline::test(&trained, &wave(200, 0, 3)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_follow_health(spike in 0usize..180, height in 0.0f64..5.0, w in 4usize..20) {
        let cfg = PipelineConfig::new(DetectorSpec::new(DetectorId::Knn), WindowSelector::Fixed(w));
        let trained = pipeline::train(&wave(300, 0, 1), &cfg).unwrap();
        let mut test = wave(200, 7, 1).values().to_vec();
        for v in &mut test[spike..spike + 10] {
            *v += height;
        }
        let out = pipeline::test(&trained, &TimeSeries::new("t", 1, test).unwrap()).unwrap();
        prop_assert_eq!(out.scores.len(), 200);
        for (h, l) in out.health.as_slice().iter().zip(out.labels.as_slice()) {
            prop_assert!((0.0..=1.0).contains(h));
            prop_assert_eq!(*l == 1, *h >= trained.decision.threshold);
        }
    }
}
