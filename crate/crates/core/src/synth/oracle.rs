//! Deliberately naive second implementation of every featureset, written
//! frame by frame without touching the feature modules.

use crate::corpus::{InteractionRecord, Joint};
use crate::error::{Error, Result};
use crate::pipeline::{FeatureConfig, FeatureSetId};

/// Recomputes one participant's featureset over the whole record. `t2`
/// fixes the activity threshold; `None` derives it from the participant's
/// own motion stream.
pub fn brute_force_feature_oracle(
    record: &InteractionRecord,
    subject: usize,
    featureset: FeatureSetId,
    config: &FeatureConfig,
    t2: Option<u32>,
) -> Result<Vec<f64>> {
    let n = record.meta.participants.len();
    if subject >= n {
        return Err(Error::Argument(format!("subject {subject} out of range")));
    }
    let missing = |stream: &str| Error::Featurization {
        interaction: record.meta.id.clone(),
        stream: stream.into(),
    };
    match featureset {
        FeatureSetId::Vfoa => {
            let gaze = record.gaze.as_ref().ok_or_else(|| missing("gaze"))?;
            let filtered: Vec<Vec<Option<usize>>> =
                gaze.targets.iter().map(|s| naive_median(s, config.median_width)).collect();
            Ok(naive_vfoa(&filtered, subject, record.meta.fps))
        }
        FeatureSetId::Speech => {
            let speech = record.speech.as_ref().ok_or_else(|| missing("speech"))?;
            let window = record.meta.duration_frames as f64 / record.meta.fps;
            let pairs: Vec<Vec<(f64, f64)>> = speech
                .intervals
                .iter()
                .map(|v| v.iter().map(|i| (i.start_s, i.end_s)).collect())
                .collect();
            Ok(naive_speech(&pairs, subject, window, config.speech.turn_merge_gap_s))
        }
        FeatureSetId::Face => {
            let aus = record.aus.as_ref().ok_or_else(|| missing("au"))?;
            let k = aus.names.len();
            let col = |name: &str| aus.names.iter().position(|a| a == name);
            let frames = aus.values[subject].len() / k;
            let mut out = Vec::new();
            for au in &config.au_set {
                let c = col(au).ok_or_else(|| Error::Config(format!("{au} missing")))?;
                let mut pres = 0.0;
                let mut inten = 0.0;
                for f in 0..frames {
                    pres += aus.values[subject][f * k + c].presence as f64;
                    inten += aus.values[subject][f * k + c].intensity;
                }
                out.push(pres / frames as f64);
                out.push(inten / frames as f64);
            }
            let at = |f: usize, name: &str| aus.values[subject][f * k + col(name).expect("checked")].intensity;
            let pos: Vec<f64> = (0..frames)
                .map(|f| 0.5 * (at(f, "AU6") + at(f, "AU12")) - at(f, "AU15"))
                .collect();
            let (m, sd) = mean_std(&pos);
            out.push(m);
            out.push(sd);
            Ok(out)
        }
        FeatureSetId::Pose => {
            let pose = record.pose.as_ref().ok_or_else(|| missing("pose"))?;
            let motion = record.motion.as_ref().ok_or_else(|| missing("motion"))?;
            let counts = &motion.counts[subject];
            let threshold = match t2 {
                Some(t) => t,
                None => naive_t2(counts, config.pose.activity_proportion),
            };
            let frames = &pose.frames[subject];
            let mut out = Vec::new();
            for channel in 0..10 {
                let mut values = Vec::new();
                for f in 0..frames.len() {
                    if counts[f] > threshold {
                        if let Some(a) = naive_angle(&frames[f], channel) {
                            values.push(a);
                        }
                    }
                }
                out.extend(naive_stats(&values));
            }
            Ok(out)
        }
    }
}

fn naive_median(seq: &[Option<usize>], width: usize) -> Vec<Option<usize>> {
    let half = (width / 2) as i64;
    let len = seq.len() as i64;
    let mut out = Vec::new();
    for f in 0..len {
        let mut window = Vec::new();
        for g in (f - half)..=(f + half) {
            if g >= 0 && g < len {
                window.push(seq[g as usize]);
            }
        }
        let count = |l: Option<usize>| window.iter().filter(|&&w| w == l).count();
        let top = window.iter().map(|&l| count(l)).max().unwrap_or(0);
        let mut leaders: Vec<Option<usize>> = window.iter().copied().filter(|&l| count(l) == top).collect();
        leaders.sort();
        leaders.dedup();
        let centre = seq[f as usize];
        if leaders.len() == 1 {
            out.push(leaders[0]);
        } else {
            out.push(centre);
        }
    }
    out
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

fn naive_vfoa(g: &[Vec<Option<usize>>], s: usize, fps: f64) -> Vec<f64> {
    let n = g.len();
    let frames = g[0].len();
    let w = frames as f64;
    let looks = |a: usize, b: usize, f: usize| g[a][f] == Some(b);
    let mutual = |a: usize, b: usize, f: usize| looks(a, b, f) && looks(b, a, f);

    let mut watched = 0;
    let mut me = 0;
    let mut watched_nome = 0;
    let mut nolook = 0;
    let mut watch_nome = 0;
    let mut two_wme = vec![false; frames];
    let mut two_nome = vec![false; frames];
    for f in 0..frames {
        let watchers: Vec<usize> = (0..n).filter(|&q| q != s && looks(q, s, f)).collect();
        if !watchers.is_empty() {
            watched += 1;
        }
        if watchers.iter().any(|&q| !looks(s, q, f)) {
            watched_nome += 1;
        }
        if (0..n).any(|q| q != s && mutual(s, q, f)) {
            me += 1;
        }
        if g[s][f].is_none() {
            nolook += 1;
        }
        if (0..n).any(|q| q != s && looks(s, q, f) && !looks(q, s, f)) {
            watch_nome += 1;
        }
        let returned = watchers.iter().any(|&q| looks(s, q, f));
        two_wme[f] = watchers.len() >= 2 && returned;
        two_nome[f] = watchers.len() >= 2 && !returned;
    }

    // Episodes involving the subject: (initiator, duration frames, lead frames).
    let mut episodes: Vec<(Option<usize>, usize, usize)> = Vec::new();
    for q in 0..n {
        if q == s {
            continue;
        }
        for f in 0..frames {
            if !mutual(s, q, f) || (f > 0 && mutual(s, q, f - 1)) {
                continue;
            }
            let mut end = f;
            while end < frames && mutual(s, q, end) {
                end += 1;
            }
            let onset = |a: usize, b: usize| {
                let mut t = f;
                while t > 0 && looks(a, b, t - 1) {
                    t -= 1;
                }
                t
            };
            let (os, oq) = (onset(s, q), onset(q, s));
            let entry = if os < oq {
                (Some(s), end - f, f - os)
            } else if oq < os {
                (Some(q), end - f, f - oq)
            } else {
                (None, end - f, 0)
            };
            episodes.push(entry);
        }
    }
    let attributed = episodes.iter().filter(|e| e.0.is_some()).count();
    let mine: Vec<&(Option<usize>, usize, usize)> = episodes.iter().filter(|e| e.0 == Some(s)).collect();
    let tot_init = if attributed > 0 {
        mine.len() as f64 / attributed as f64
    } else {
        0.0
    };
    let durations: Vec<f64> = mine.iter().map(|e| e.1 as f64 / fps).collect();
    let leads: Vec<f64> = mine.iter().map(|e| e.2 as f64 / fps).collect();
    let (_, std_dur) = mean_std(&durations);
    let (mean_lead, std_lead) = mean_std(&leads);

    let runs = |flags: &[bool]| {
        let mut lens = Vec::new();
        let mut f = 0;
        while f < flags.len() {
            if flags[f] {
                let start = f;
                while f < flags.len() && flags[f] {
                    f += 1;
                }
                lens.push(f - start);
            } else {
                f += 1;
            }
        }
        if lens.is_empty() {
            (0.0, 0.0)
        } else {
            let hi = *lens.iter().max().unwrap() as f64;
            let lo = *lens.iter().min().unwrap() as f64;
            (hi / w, lo / w)
        }
    };
    let (max_wme, min_wme) = runs(&two_wme);
    let (max_nome, min_nome) = runs(&two_nome);
    let look_some = 1.0 - nolook as f64 / w;
    vec![
        watched as f64 / w,
        me as f64 / w,
        watched_nome as f64 / w,
        nolook as f64 / w,
        look_some,
        tot_init,
        std_dur,
        mean_lead,
        std_lead,
        watch_nome as f64 / w,
        max_wme,
        min_wme,
        max_nome,
        min_nome,
        if look_some == 0.0 { 0.0 } else { (watched as f64 / w) / look_some },
    ]
}

/// Repeatedly fuses the first pair of turns closer than `gap` until no pair
/// remains.
fn naive_turns(segments: &[(f64, f64)], gap: f64) -> Vec<(f64, f64)> {
    let mut turns = segments.to_vec();
    loop {
        turns.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut fused = false;
        for i in 0..turns.len().saturating_sub(1) {
            if turns[i + 1].0 - turns[i].1 <= gap {
                let end = if turns[i + 1].1 > turns[i].1 { turns[i + 1].1 } else { turns[i].1 };
                turns[i].1 = end;
                turns.remove(i + 1);
                fused = true;
                break;
            }
        }
        if !fused {
            return turns;
        }
    }
}

fn naive_speech(all: &[Vec<(f64, f64)>], s: usize, window: f64, gap: f64) -> Vec<f64> {
    let turns: Vec<Vec<(f64, f64)>> = all.iter().map(|v| naive_turns(v, gap)).collect();
    let mine = &turns[s];
    if mine.is_empty() {
        return vec![0.0; 4];
    }
    let mut total = 0.0;
    let mut interrupts = 0;
    for &(a, b) in mine {
        total += b - a;
        let mut inside = false;
        for (q, other) in turns.iter().enumerate() {
            for &(c, d) in other {
                if q != s && c < a && a < d {
                    inside = true;
                }
            }
        }
        if inside {
            interrupts += 1;
        }
    }
    vec![
        total / window,
        mine.len() as f64 / window,
        interrupts as f64 / window,
        total / mine.len() as f64,
    ]
}

/// Smallest threshold flagging no more than the allowed share of frames,
/// found by bisection on the monotone flagged count.
fn naive_t2(counts: &[u32], proportion: f64) -> u32 {
    let budget = proportion * counts.len() as f64 + 1e-9;
    let flagged = |t: u32| counts.iter().filter(|&&c| c > t).count() as f64;
    let (mut lo, mut hi) = (0u32, counts.iter().copied().max().unwrap_or(0));
    if flagged(lo) <= budget {
        return 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if flagged(mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn naive_angle(frame: &crate::corpus::PoseFrame, channel: usize) -> Option<f64> {
    use Joint::*;
    let at = |j: Joint| frame[j.index()].filter(|k| k.confidence > 0.0).map(|k| (k.x, k.y));
    let vec = |a: Joint, b: Joint| -> Option<(f64, f64)> {
        let (p, q) = (at(a)?, at(b)?);
        Some((q.0 - p.0, q.1 - p.1))
    };
    let up = Some((0.0, -1.0));
    let down = Some((0.0, 1.0));
    let across = Some((1.0, 0.0));
    let (u, v) = match channel {
        0 => (vec(Neck, Nose), up),
        1 => (vec(RightShoulder, LeftShoulder), across),
        2 => (vec(Neck, RightShoulder), vec(RightShoulder, RightElbow)),
        3 => (vec(RightShoulder, RightElbow), vec(RightElbow, RightWrist)),
        4 => (vec(Neck, LeftShoulder), vec(LeftShoulder, LeftElbow)),
        5 => (vec(LeftShoulder, LeftElbow), vec(LeftElbow, LeftWrist)),
        6 => (vec(RightShoulder, RightElbow), down),
        7 => (vec(LeftShoulder, LeftElbow), down),
        8 => (vec(RightElbow, RightWrist), down),
        _ => (vec(LeftElbow, LeftWrist), down),
    };
    let (u, v) = (u?, v?);
    if u == (0.0, 0.0) || v == (0.0, 0.0) {
        return None;
    }
    let mut d = (v.1.atan2(v.0) - u.1.atan2(u.0)).abs();
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    Some(d)
}

fn naive_stats(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return vec![0.0; 8];
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let quant = |q: f64| {
        let h = (n - 1) as f64 * q;
        let l = h.floor() as usize;
        if l + 1 < n {
            s[l] + (h - l as f64) * (s[l + 1] - s[l])
        } else {
            s[l]
        }
    };
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    let deltas: Vec<f64> = (1..n).map(|i| v[i] - v[i - 1]).collect();
    let abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let (m, sd) = mean_std(v);
    let (dm, _) = mean_std(&abs);
    let (_, dsd) = mean_std(&deltas);
    vec![m, sd, s[0], s[n - 1], median, quant(0.75) - quant(0.25), dm, dsd]
}
