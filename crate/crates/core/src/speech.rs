//! Speaking-activity features from speaker segmentations.

use serde::{Deserialize, Serialize};

use crate::corpus::{Interval, SpeechSegments};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeechConfig {
    /// Segments of one speaker separated by at most this gap form one turn.
    pub turn_merge_gap_s: f64,
}

impl Default for SpeechConfig {
    fn default() -> Self {
        SpeechConfig { turn_merge_gap_s: 0.5 }
    }
}

/// Speaking length, turns, interruptions (all per second of window) and
/// average turn duration in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeechVector {
    pub spl: f64,
    pub spt: f64,
    pub spi: f64,
    pub asp: f64,
}

pub const SPEECH_FEATURES: [&str; 4] = ["SPL", "SPT", "SPI", "ASP"];

impl SpeechVector {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.spl, self.spt, self.spi, self.asp]
    }
}

pub fn build_turns(segments: &[Interval], config: &SpeechConfig) -> Vec<Interval> {
    let mut sorted = segments.to_vec();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut turns: Vec<Interval> = Vec::with_capacity(sorted.len());
    for seg in sorted {
        match turns.last_mut() {
            Some(last) if seg.start_s - last.end_s <= config.turn_merge_gap_s => {
                last.end_s = last.end_s.max(seg.end_s);
            }
            _ => turns.push(seg),
        }
    }
    turns
}

pub fn compute_speech_features(
    all: &SpeechSegments,
    subject: usize,
    window_s: f64,
    config: &SpeechConfig,
) -> Result<SpeechVector> {
    if subject >= all.intervals.len() {
        return Err(Error::Argument(format!("subject index {subject} out of range")));
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::Argument(format!("window length must be positive, got {window_s}")));
    }
    let turns: Vec<Vec<Interval>> = all.intervals.iter().map(|s| build_turns(s, config)).collect();
    let own = &turns[subject];
    if own.is_empty() {
        return Ok(SpeechVector { spl: 0.0, spt: 0.0, spi: 0.0, asp: 0.0 });
    }
    let total: f64 = own.iter().map(Interval::duration).sum();
    let interruptions = own
        .iter()
        .filter(|t| {
            turns
                .iter()
                .enumerate()
                .filter(|(q, _)| *q != subject)
                .flat_map(|(_, other)| other.iter())
                .any(|o| o.start_s < t.start_s && t.start_s < o.end_s)
        })
        .count();
    Ok(SpeechVector {
        spl: total / window_s,
        spt: own.len() as f64 / window_s,
        spi: interruptions as f64 / window_s,
        asp: total / own.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b)
    }

    #[test]
    fn short_gap_merges() {
        let turns = build_turns(&[iv(0.0, 5.0), iv(5.3, 8.0)], &SpeechConfig::default());
        assert_eq!(turns, vec![iv(0.0, 8.0)]);
        let turns = build_turns(&[iv(0.0, 5.0), iv(6.0, 8.0)], &SpeechConfig::default());
        assert_eq!(turns.len(), 2);
    }

    #[test]
    fn silent_subject() {
        let s = SpeechSegments { intervals: vec![vec![], vec![iv(0.0, 3.0)], vec![]] };
        let v = compute_speech_features(&s, 0, 60.0, &SpeechConfig::default()).unwrap();
        assert_eq!(v.to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn hand_walked_timeline() {
        let s = SpeechSegments {
            intervals: vec![vec![iv(0.0, 10.0), iv(20.0, 30.0)], vec![iv(15.0, 25.0)], vec![]],
        };
        let v = compute_speech_features(&s, 0, 60.0, &SpeechConfig::default()).unwrap();
        assert!((v.spl - 20.0 / 60.0).abs() < 1e-15);
        assert!((v.spt - 2.0 / 60.0).abs() < 1e-15);
        assert!((v.spi - 1.0 / 60.0).abs() < 1e-15);
        assert_eq!(v.asp, 10.0);
        let other = compute_speech_features(&s, 1, 60.0, &SpeechConfig::default()).unwrap();
        assert_eq!(other.spi, 0.0);
    }

    #[test]
    fn simultaneous_onsets_are_not_interruptions() {
        let s = SpeechSegments { intervals: vec![vec![iv(0.0, 60.0)], vec![iv(0.0, 60.0)], vec![]] };
        for p in 0..2 {
            assert_eq!(compute_speech_features(&s, p, 60.0, &SpeechConfig::default()).unwrap().spi, 0.0);
        }
    }

    #[test]
    fn bad_arguments() {
        let s = SpeechSegments { intervals: vec![vec![]; 3] };
        assert!(compute_speech_features(&s, 3, 60.0, &SpeechConfig::default()).is_err());
        assert!(compute_speech_features(&s, 0, 0.0, &SpeechConfig::default()).is_err());
    }

    /// Sweep over boundary events: a turn closes once the silence after the
    /// last open segment exceeds the gap.
    fn sweep_merge(segments: &[Interval], gap: f64) -> Vec<Interval> {
        let mut events: Vec<(f64, i32)> = Vec::new();
        for s in segments {
            events.push((s.start_s, 1));
            events.push((s.end_s, -1));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut out: Vec<Interval> = Vec::new();
        let mut depth = 0;
        let mut open_at = 0.0;
        for (t, delta) in events {
            if delta == 1 {
                if depth == 0 {
                    match out.last() {
                        Some(last) if t - last.end_s <= gap => open_at = out.pop().unwrap().start_s,
                        _ => open_at = t,
                    }
                }
                depth += 1;
            } else {
                depth -= 1;
                if depth == 0 {
                    out.push(Interval::new(open_at, t));
                }
            }
        }
        out
    }

    fn segments_strategy() -> impl Strategy<Value = Vec<Interval>> {
        proptest::collection::vec((0.05..3.0f64, 0.1..4.0f64), 0..12).prop_map(|pairs| {
            let mut t = 0.0;
            pairs
                .into_iter()
                .map(|(gap, len)| {
                    let s = t + gap;
                    t = s + len;
                    Interval::new(s, t)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_matches_sweep(segs in segments_strategy(), gap in 0.0..2.0f64) {
            let cfg = SpeechConfig { turn_merge_gap_s: gap };
            prop_assert_eq!(build_turns(&segs, &cfg), sweep_merge(&segs, gap));
        }

        #[test]
        fn totals_and_scaling(a in segments_strategy(), b in segments_strategy()) {
            let s = SpeechSegments { intervals: vec![a, b, vec![]] };
            let cfg = SpeechConfig::default();
            let window = 100.0;
            let v = compute_speech_features(&s, 0, window, &cfg).unwrap();
            if v.spt > 0.0 {
                prop_assert!((v.spl * window - v.spt * window * v.asp).abs() < 1e-9);
            } else {
                prop_assert_eq!(v.to_vec(), vec![0.0; 4]);
            }
            let w = compute_speech_features(&s, 0, 2.0 * window, &cfg).unwrap();
            prop_assert_eq!(w.spl, v.spl / 2.0);
            prop_assert_eq!(w.spt, v.spt / 2.0);
            prop_assert_eq!(w.spi, v.spi / 2.0);
            prop_assert_eq!(w.asp, v.asp);
        }
    }
}
