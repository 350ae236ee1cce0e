//! Visual focus of attention features computed from eye-contact streams.
//!
//! Frame-valued quantities are fractions of the window length; durations of
//! mutual-eye-contact (MEC) episodes and initiation lead times are seconds.

use serde::{Deserialize, Serialize};

use crate::corpus::GazeStream;
use crate::error::{Error, Result};
use crate::util::{mean, population_std};

pub const VFOA_FEATURES: [&str; 15] = [
    "totWatcher",
    "totME",
    "totWatcherNoME",
    "totNoLook",
    "lookSomeOne",
    "totInitiatorME",
    "stdInitiatorME",
    "totInterCurrME",
    "stdInterCurrME",
    "totWatchNoME",
    "maxTwoWatcherWME",
    "minTwoWatcherWME",
    "maxTwoWatcherNoME",
    "minTwoWatcherNoME",
    "ratioWatcherLookSOne",
];

pub const DEFAULT_MEDIAN_WIDTH: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VfoaVector(pub [f64; 15]);

impl VfoaVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        VFOA_FEATURES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Maximal run of mutual gaze between `pair.0 < pair.1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MecEpisode {
    pub pair: (usize, usize),
    pub start_frame: usize,
    pub end_frame: usize,
    pub initiator: Option<usize>,
    pub initiator_lead_frames: usize,
}

impl MecEpisode {
    pub fn frames(&self) -> usize {
        self.end_frame - self.start_frame
    }

    pub fn involves(&self, p: usize) -> bool {
        self.pair.0 == p || self.pair.1 == p
    }
}

/// Windowed majority vote per participant. Ties keep the centre label.
pub fn median_filter_gaze(stream: &GazeStream, width: usize) -> Result<GazeStream> {
    if width == 0 || width % 2 == 0 {
        return Err(Error::Argument(format!(
            "median filter width must be odd and positive, got {width}"
        )));
    }
    let half = width / 2;
    let n = stream.participants();
    let targets = stream
        .targets
        .iter()
        .map(|seq| {
            let len = seq.len();
            // Label slot n stands for NONE.
            let mut counts = vec![0usize; n + 1];
            let slot = |t: Option<usize>| t.unwrap_or(n);
            (0..len)
                .map(|f| {
                    let lo = f.saturating_sub(half);
                    let hi = (f + half + 1).min(len);
                    counts.iter_mut().for_each(|c| *c = 0);
                    for t in &seq[lo..hi] {
                        counts[slot(*t)] += 1;
                    }
                    let best = *counts.iter().max().expect("non-empty");
                    let winners = counts.iter().filter(|&&c| c == best).count();
                    let centre = seq[f];
                    if winners > 1 || counts[slot(centre)] == best {
                        centre
                    } else {
                        let label = counts.iter().position(|&c| c == best).expect("max exists");
                        (label < n).then_some(label)
                    }
                })
                .collect()
        })
        .collect();
    Ok(GazeStream { targets })
}

/// All maximal mutual-gaze runs with initiator attribution.
pub fn extract_mec_episodes(gaze: &GazeStream) -> Vec<MecEpisode> {
    let n = gaze.participants();
    let frames = gaze.frames();
    let mut episodes = Vec::new();
    for p in 0..n {
        for q in p + 1..n {
            let gp = &gaze.targets[p];
            let gq = &gaze.targets[q];
            let mutual = |f: usize| gp[f] == Some(q) && gq[f] == Some(p);
            let mut f = 0;
            while f < frames {
                if !mutual(f) {
                    f += 1;
                    continue;
                }
                let start = f;
                while f < frames && mutual(f) {
                    f += 1;
                }
                let onset = |seq: &[Option<usize>], partner: usize| {
                    let mut s = start;
                    while s > 0 && seq[s - 1] == Some(partner) {
                        s -= 1;
                    }
                    s
                };
                let (op, oq) = (onset(gp, q), onset(gq, p));
                let (initiator, lead) = match op.cmp(&oq) {
                    std::cmp::Ordering::Less => (Some(p), start - op),
                    std::cmp::Ordering::Greater => (Some(q), start - oq),
                    std::cmp::Ordering::Equal => (None, 0),
                };
                episodes.push(MecEpisode {
                    pair: (p, q),
                    start_frame: start,
                    end_frame: f,
                    initiator,
                    initiator_lead_frames: lead,
                });
            }
        }
    }
    episodes
}

/// Lengths of maximal runs of frames satisfying `pred`.
fn run_lengths(frames: usize, mut pred: impl FnMut(usize) -> bool) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for f in 0..frames {
        if pred(f) {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

/// The 15 VFOA features of `subject` over the whole (already filtered) stream.
pub fn compute_vfoa_features(gaze: &GazeStream, subject: usize, fps: f64) -> Result<VfoaVector> {
    let n = gaze.participants();
    if subject >= n {
        return Err(Error::Argument(format!(
            "subject index {subject} out of range for {n} participants"
        )));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Argument(format!("fps must be positive, got {fps}")));
    }
    let frames = gaze.frames();
    if frames == 0 {
        return Err(Error::Argument("empty gaze window".into()));
    }
    let w = frames as f64;
    let own = &gaze.targets[subject];
    let watchers = |f: usize| (0..n).filter(move |&q| q != subject && gaze.targets[q][f] == Some(subject));

    let mut watched = 0usize;
    let mut in_mec = 0usize;
    let mut watched_unreturned = 0usize;
    let mut no_look = 0usize;
    let mut watch_no_me = 0usize;
    for f in 0..frames {
        let mut any = false;
        let mut unreturned = false;
        for q in watchers(f) {
            any = true;
            if own[f] != Some(q) {
                unreturned = true;
            }
        }
        watched += usize::from(any);
        watched_unreturned += usize::from(unreturned);
        match own[f] {
            None => no_look += 1,
            Some(q) => {
                if gaze.targets[q][f] == Some(subject) {
                    in_mec += 1;
                } else {
                    watch_no_me += 1;
                }
            }
        }
    }

    let episodes: Vec<MecEpisode> = extract_mec_episodes(gaze)
        .into_iter()
        .filter(|e| e.involves(subject))
        .collect();
    let attributed = episodes.iter().filter(|e| e.initiator.is_some()).count();
    let initiated: Vec<&MecEpisode> = episodes.iter().filter(|e| e.initiator == Some(subject)).collect();
    let tot_initiator = if attributed == 0 {
        0.0
    } else {
        initiated.len() as f64 / attributed as f64
    };
    let durations: Vec<f64> = initiated.iter().map(|e| e.frames() as f64 / fps).collect();
    let leads: Vec<f64> = initiated.iter().map(|e| e.initiator_lead_frames as f64 / fps).collect();

    let two_watchers = |f: usize, with_me: bool| {
        let mut count = 0;
        let mut mutual = false;
        for q in watchers(f) {
            count += 1;
            if own[f] == Some(q) {
                mutual = true;
            }
        }
        count >= 2 && mutual == with_me
    };
    let extremes = |runs: Vec<usize>| match (runs.iter().max(), runs.iter().min()) {
        (Some(&hi), Some(&lo)) => (hi as f64 / w, lo as f64 / w),
        _ => (0.0, 0.0),
    };
    let (max_wme, min_wme) = extremes(run_lengths(frames, |f| two_watchers(f, true)));
    let (max_nome, min_nome) = extremes(run_lengths(frames, |f| two_watchers(f, false)));

    let tot_watcher = watched as f64 / w;
    let tot_no_look = no_look as f64 / w;
    let look_some_one = 1.0 - tot_no_look;
    let ratio = if look_some_one == 0.0 {
        0.0
    } else {
        tot_watcher / look_some_one
    };

    Ok(VfoaVector([
        tot_watcher,
        in_mec as f64 / w,
        watched_unreturned as f64 / w,
        tot_no_look,
        look_some_one,
        tot_initiator,
        population_std(&durations),
        mean(&leads),
        population_std(&leads),
        watch_no_me as f64 / w,
        max_wme,
        min_wme,
        max_nome,
        min_nome,
        ratio,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: Option<usize> = Some(1);

    fn stream(targets: Vec<Vec<Option<usize>>>) -> GazeStream {
        GazeStream { targets }
    }

    #[test]
    fn filter_keeps_constant_sequence() {
        let g = stream(vec![vec![B; 6], vec![Some(0); 6]]);
        assert_eq!(median_filter_gaze(&g, 5).unwrap(), g);
    }

    #[test]
    fn filter_removes_single_dropout() {
        let g = stream(vec![vec![B, B, None, B, B], vec![Some(0); 5]]);
        assert_eq!(median_filter_gaze(&g, 5).unwrap().targets[0], vec![B; 5]);
    }

    #[test]
    fn filter_width_one_is_identity() {
        let g = stream(vec![vec![B, None, Some(2), B, None], vec![None, Some(0), Some(2), None, None]]);
        assert_eq!(median_filter_gaze(&g, 1).unwrap(), g);
    }

    #[test]
    fn filter_tie_keeps_centre() {
        // Window of frame 2: {A, A, C, B, B}; A and B tie, so C stays.
        let a = Some(0);
        let c = Some(2);
        let g = stream(vec![vec![None; 5], vec![a, a, c, Some(3), Some(3)], vec![None; 5], vec![None; 5]]);
        assert_eq!(median_filter_gaze(&g, 5).unwrap().targets[1][2], c);
    }

    #[test]
    fn filter_rejects_even_width() {
        let g = stream(vec![vec![B; 3]]);
        assert!(median_filter_gaze(&g, 4).is_err());
        assert!(median_filter_gaze(&g, 0).is_err());
    }

    #[test]
    fn episode_with_leading_gaze() {
        // p = 0 looks at q = 1 on frames 0..10, q looks back on 4..10.
        let mut p = vec![Some(1); 10];
        let mut q = vec![None; 4];
        q.extend(vec![Some(0); 6]);
        p.push(None);
        q.push(None);
        let eps = extract_mec_episodes(&stream(vec![p, q, vec![None; 11]]));
        assert_eq!(
            eps,
            vec![MecEpisode {
                pair: (0, 1),
                start_frame: 4,
                end_frame: 10,
                initiator: Some(0),
                initiator_lead_frames: 4
            }]
        );
    }

    #[test]
    fn simultaneous_onset_has_no_initiator() {
        let g = stream(vec![
            vec![None, Some(1), Some(1), None],
            vec![None, Some(0), Some(0), None],
            vec![None; 4],
        ]);
        let eps = extract_mec_episodes(&g);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].initiator, None);
        assert_eq!(eps[0].initiator_lead_frames, 0);
        assert!(extract_mec_episodes(&stream(vec![vec![None; 4]; 3])).is_empty());
    }

    #[test]
    fn nobody_looking() {
        let g = stream(vec![vec![None; 20]; 4]);
        let v = compute_vfoa_features(&g, 2, 10.0).unwrap();
        assert_eq!(v.get("totNoLook"), Some(1.0));
        assert_eq!(v.get("lookSomeOne"), Some(0.0));
        assert_eq!(v.get("totWatcher"), Some(0.0));
        assert_eq!(v.get("ratioWatcherLookSOne"), Some(0.0));
        for name in ["totInitiatorME", "stdInitiatorME", "totInterCurrME", "stdInterCurrME"] {
            assert_eq!(v.get(name), Some(0.0));
        }
    }

    #[test]
    fn symmetric_stare() {
        let g = stream(vec![vec![Some(1); 30], vec![Some(0); 30], vec![None; 30]]);
        for s in 0..2 {
            let v = compute_vfoa_features(&g, s, 10.0).unwrap();
            assert_eq!(v.get("totME"), Some(1.0));
            assert_eq!(v.get("totWatcher"), Some(1.0));
            assert_eq!(v.get("totInitiatorME"), Some(0.0));
            assert_eq!(v.get("totWatcherNoME"), Some(0.0));
        }
    }

    #[test]
    fn two_watcher_runs() {
        // Subject 0 watched by 1 and 2 on frames 0..4, returns gaze to 1 on 0..2.
        let g = stream(vec![
            vec![Some(1), Some(1), None, None, None, None, None, None],
            vec![Some(0), Some(0), Some(0), Some(0), None, None, None, None],
            vec![Some(0), Some(0), Some(0), Some(0), Some(0), None, None, None],
        ]);
        let v = compute_vfoa_features(&g, 0, 1.0).unwrap();
        assert_eq!(v.get("maxTwoWatcherWME"), Some(2.0 / 8.0));
        assert_eq!(v.get("minTwoWatcherWME"), Some(2.0 / 8.0));
        assert_eq!(v.get("maxTwoWatcherNoME"), Some(2.0 / 8.0));
        assert_eq!(v.get("totWatcher"), Some(5.0 / 8.0));
        assert_eq!(v.get("totWatcherNoME"), Some(5.0 / 8.0));
    }

    #[test]
    fn unknown_subject_is_rejected() {
        let g = stream(vec![vec![None; 3]; 3]);
        assert!(matches!(compute_vfoa_features(&g, 3, 1.0), Err(Error::Argument(_))));
    }

    fn gaze_strategy(n: usize, frames: usize) -> impl Strategy<Value = GazeStream> {
        proptest::collection::vec(proptest::collection::vec(0..n, frames), n).prop_map(move |raw| {
            let targets = raw
                .into_iter()
                .enumerate()
                .map(|(p, seq)| seq.into_iter().map(|t| (t != p).then_some(t)).collect())
                .collect();
            GazeStream { targets }
        })
    }

    proptest! {
        #[test]
        fn no_look_and_look_sum_to_one(g in gaze_strategy(4, 40), s in 0usize..4) {
            let v = compute_vfoa_features(&g, s, 5.0).unwrap();
            prop_assert_eq!(v.get("totNoLook").unwrap() + v.get("lookSomeOne").unwrap(), 1.0);
            for name in ["totWatcher", "totME", "totWatcherNoME", "totWatchNoME",
                         "maxTwoWatcherWME", "minTwoWatcherWME", "maxTwoWatcherNoME",
                         "minTwoWatcherNoME", "totInitiatorME"] {
                let x = v.get(name).unwrap();
                prop_assert!((0.0..=1.0).contains(&x), "{name} = {x}");
            }
        }

        #[test]
        fn relabeling_permutes_features(g in gaze_strategy(4, 30), rot in 1usize..4) {
            let n = 4;
            let perm = |p: usize| (p + rot) % n;
            let mut relabeled = vec![Vec::new(); n];
            for p in 0..n {
                relabeled[perm(p)] = g.targets[p].iter().map(|t| t.map(perm)).collect();
            }
            let h = GazeStream { targets: relabeled };
            for p in 0..n {
                let a = compute_vfoa_features(&g, p, 3.0).unwrap();
                let b = compute_vfoa_features(&h, perm(p), 3.0).unwrap();
                for (x, y) in a.0.iter().zip(b.0.iter()) {
                    // Episode order differs after relabeling, so sums may round differently.
                    prop_assert!((x - y).abs() < 1e-12, "{x} vs {y}");
                }
            }
        }

        #[test]
        fn frame_doubling_preserves_features(g in gaze_strategy(3, 25), s in 0usize..3) {
            let doubled = GazeStream {
                targets: g.targets.iter().map(|seq| seq.iter().flat_map(|t| [*t, *t]).collect()).collect(),
            };
            let a = compute_vfoa_features(&g, s, 4.0).unwrap();
            let b = compute_vfoa_features(&doubled, s, 8.0).unwrap();
            for (x, y) in a.0.iter().zip(b.0.iter()) {
                prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }

        #[test]
        fn filter_keeps_frames_agreeing_with_neighbours(g in gaze_strategy(3, 30)) {
            let out = median_filter_gaze(&g, 5).unwrap();
            for (seq, filtered) in g.targets.iter().zip(&out.targets) {
                prop_assert_eq!(seq.len(), filtered.len());
                for f in 2..seq.len().saturating_sub(2) {
                    if seq[f - 2..=f + 2].iter().all(|t| *t == seq[f]) {
                        prop_assert_eq!(filtered[f], seq[f]);
                    }
                }
            }
        }
    }
}
