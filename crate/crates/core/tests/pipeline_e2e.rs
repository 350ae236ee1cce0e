use leadership::eval::{chance_interval, group_sizes, within_dataset_eval};
use leadership::pipeline::{
    featurize, predict_corpus, train_on_corpus, FeatureConfig, FeatureSetId, PipelineConfig, T2Mode, TrainedModel,
    WindowPolicy,
};
use leadership::synth::{generate_corpus, SynthConfig};

fn source(effect: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        triads: 12,
        tetrads: 18,
        duration_minutes: 6.0,
        segment_minutes: Some(2.0),
        effect_size: effect,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn featurization_is_deterministic() {
    let corpus = generate_corpus(&source(1.0, 1)).unwrap();
    let policy = WindowPolicy::Segments;
    let run = || featurize(&corpus, &FeatureSetId::ALL, &policy, &FeatureConfig::default(), T2Mode::PerStream).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    // 30 interactions, 3 segments each, 4 featuresets
    let participants: usize = corpus.iter().map(|r| r.meta.participants.len()).sum();
    assert_eq!(a.len(), participants * 3 * 4);
}

#[test]
fn vfoa_model_round_trips_and_rejects_foreign_registry() {
    let corpus = generate_corpus(&source(1.0, 2)).unwrap();
    let model = train_on_corpus(&corpus, &[FeatureSetId::Vfoa], &PipelineConfig::default(), 6).unwrap();
    assert_eq!(model.models.len(), 1);
    assert_eq!(model.models[0].dim, 15);
    let text = model.to_json();
    let back = TrainedModel::from_json(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(
        predict_corpus(&back, &corpus, 6.0).unwrap(),
        predict_corpus(&model, &corpus, 6.0).unwrap()
    );
    let hash = &model.models[0].registry_hash;
    let tampered = text.replacen(hash.as_str(), &"0".repeat(hash.len()), 1);
    assert!(TrainedModel::from_json(&tampered).is_err());
}

#[test]
fn strong_leader_is_found_within_corpus() {
    let corpus = generate_corpus(&source(1.0, 3)).unwrap();
    let result =
        within_dataset_eval(&corpus, &[FeatureSetId::Vfoa, FeatureSetId::Speech], 3, &PipelineConfig::default(), 1)
            .unwrap();
    assert_eq!(result.outcomes.len(), corpus.len());
    assert!(result.accuracy >= 0.9, "accuracy {}", result.accuracy);
}

#[test]
fn null_corpus_stays_near_chance() {
    let corpus = generate_corpus(&source(0.0, 4)).unwrap();
    let result = within_dataset_eval(&corpus, &[FeatureSetId::Vfoa], 3, &PipelineConfig::default(), 2).unwrap();
    let (lo, hi) = chance_interval(&group_sizes(&corpus), 0.95).unwrap();
    assert!(lo <= result.accuracy && result.accuracy <= hi, "{} not in [{lo}, {hi}]", result.accuracy);
}
