use leadership::corpus::{InteractionRecord, PoseFrame};
use leadership::pipeline::{featurize_record, FeatureConfig, FeatureSetId, T2Mode};
use leadership::pose::compute_pose_features;
use leadership::synth::{brute_force_feature_oracle, generate_corpus, SynthConfig};

fn tot_watcher(record: &InteractionRecord) -> Vec<f64> {
    featurize_record(record, FeatureSetId::Vfoa, &FeatureConfig::default(), T2Mode::PerStream)
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect()
}

fn corpus(effect: f64, noise: f64, n: usize, seed: u64) -> Vec<InteractionRecord> {
    generate_corpus(&SynthConfig {
        triads: n / 2,
        tetrads: n - n / 2,
        duration_minutes: 2.0,
        effect_size: effect,
        gaze_noise: noise,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn leader_gaps(records: &[InteractionRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            let w = tot_watcher(r);
            let l = r.meta.leader_index().unwrap();
            let others: f64 = w.iter().enumerate().filter(|(p, _)| *p != l).map(|(_, v)| v).sum::<f64>();
            w[l] - others / (w.len() - 1) as f64
        })
        .collect()
}

#[test]
fn no_effect_means_no_leader_gap() {
    let gaps = leader_gaps(&corpus(0.0, 0.3, 200, 17));
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let sd = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "mean gap {mean}, se {}", sd / n.sqrt());
}

#[test]
fn strong_effect_makes_the_leader_most_watched() {
    let records = corpus(1.0, 0.0, 100, 18);
    let wins = records
        .iter()
        .filter(|r| {
            let w = tot_watcher(r);
            let l = r.meta.leader_index().unwrap();
            (0..w.len()).all(|p| p == l || w[p] < w[l])
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn leader_gap_grows_with_effect() {
    let means: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&e| {
            let g = leader_gaps(&corpus(e, 0.3, 60, 19));
            g.iter().sum::<f64>() / g.len() as f64
        })
        .collect();
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[test]
fn features_agree_with_brute_force_oracle() {
    let config = FeatureConfig::default();
    let records = generate_corpus(&SynthConfig {
        triads: 2,
        tetrads: 2,
        fps: 3.0,
        duration_minutes: 1.5,
        pose_noise: 1.0,
        au_noise: 0.2,
        seed: 44,
        ..SynthConfig::default()
    })
    .unwrap();
    for r in &records {
        for fs in FeatureSetId::ALL {
            let module = featurize_record(r, fs, &config, T2Mode::PerStream).unwrap();
            for (p, values) in module.iter().enumerate() {
                let oracle = brute_force_feature_oracle(r, p, fs, &config, None).unwrap();
                for (m, o) in values.iter().zip(&oracle) {
                    assert!((m - o).abs() <= 1e-9, "{} {fs} p{p}: {m} vs {o}", r.meta.id);
                }
            }
        }
    }
}

#[test]
fn no_active_frames_gives_zero_pose_vector() {
    let record = &corpus(1.0, 0.0, 2, 3)[0];
    let frames: &[PoseFrame] = &record.pose.as_ref().unwrap().frames[0];
    let v = compute_pose_features(frames, &vec![false; frames.len()]).unwrap();
    assert_eq!(v.0.len(), 80);
    assert!(v.0.iter().all(|&x| x == 0.0));
}
