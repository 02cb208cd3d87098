//! Windowed coincidence identification.
//!
//! All matching is greedy earliest-match over time-ordered streams, with the
//! window boundary inclusive: `|t_a - t_b| <= window_ps` is a coincidence.

use serde::{Deserialize, Serialize};

use super::{is_sorted, OffsetTrack, SyncError};
use crate::photonics_sim::tags::{Channel, TimeTag};
use crate::qcore::BellState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoincidenceKind {
    Twofold,
    Threefold,
    Fourfold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceEvent {
    pub kind: CoincidenceKind,
    pub channels: Vec<Channel>,
    /// Reference time (the trigger tag for three-folds).
    pub time_ps: i64,
    pub bsm_label: Option<BellState>,
}

/// Times of all tags on one channel, as signed picoseconds.
pub fn channel_times(tags: &[TimeTag], channel: Channel) -> Vec<i64> {
    tags.iter()
        .filter(|t| t.channel == channel)
        .map(|t| t.time_ps as i64)
        .collect()
}

/// Greedy earliest-match pairing of two ordered streams.
///
/// Each element of `a`, in order, takes the earliest unused element of `b`
/// within the window. Returns index pairs `(i, j)`.
pub fn find_coincidences(a: &[i64], b: &[i64], window_ps: i64) -> Result<Vec<(usize, usize)>, SyncError> {
    if window_ps < 0 {
        return Err(SyncError::BadParams("negative coincidence window".into()));
    }
    if !is_sorted(a) || !is_sorted(b) {
        return Err(SyncError::Unordered);
    }
    let mut out = Vec::new();
    let mut j = 0usize;
    for (i, &ta) in a.iter().enumerate() {
        while j < b.len() && b[j] < ta - window_ps {
            j += 1;
        }
        if j < b.len() && b[j] <= ta + window_ps {
            out.push((i, j));
            j += 1;
        }
    }
    Ok(out)
}

/// Outcome of three-fold classification at Alice.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreefoldReport {
    pub events: Vec<CoincidenceEvent>,
    /// Trigger clusters with BSM clicks that match no identified pattern.
    pub discarded: u64,
}

/// Builds trigger-centred three-folds from Alice's stream and labels them.
///
/// A trigger tag with exactly two BSM tags on distinct channels within the
/// window (and the whole triple spanning at most the window) is labelled
/// by the detector-pattern table. Clusters with one BSM click are ignored;
/// anything else with BSM clicks counts as discarded.
pub fn classify_threefolds(alice: &[TimeTag], window_ps: i64) -> Result<ThreefoldReport, SyncError> {
    let times: Vec<i64> = alice.iter().map(|t| t.time_ps as i64).collect();
    if !is_sorted(&times) {
        return Err(SyncError::Unordered);
    }
    let bsm: Vec<(i64, Channel)> = alice
        .iter()
        .filter(|t| matches!(t.channel, Channel::A | Channel::B | Channel::C | Channel::D))
        .map(|t| (t.time_ps as i64, t.channel))
        .collect();
    let mut report = ThreefoldReport::default();
    let mut lo = 0usize;
    for tt in alice.iter().filter(|t| t.channel == Channel::T) {
        let t0 = tt.time_ps as i64;
        while lo < bsm.len() && bsm[lo].0 < t0 - window_ps {
            lo += 1;
        }
        let hi = lo + bsm[lo..].partition_point(|&(t, _)| t <= t0 + window_ps);
        let cluster = &bsm[lo..hi];
        match cluster.len() {
            0 | 1 => continue,
            2 => {
                let (x, y) = (cluster[0], cluster[1]);
                let span = t0.max(x.0).max(y.0) - t0.min(x.0).min(y.0);
                let label = if x.1 != y.1 && span <= window_ps {
                    classify_pair(x.1, y.1)
                } else {
                    None
                };
                match label {
                    Some(bell) => report.events.push(CoincidenceEvent {
                        kind: CoincidenceKind::Threefold,
                        channels: vec![Channel::T, x.1, y.1],
                        time_ps: t0,
                        bsm_label: Some(bell),
                    }),
                    None => report.discarded += 1,
                }
            }
            _ => report.discarded += 1,
        }
    }
    Ok(report)
}

fn classify_pair(x: Channel, y: Channel) -> Option<BellState> {
    crate::protocol::classify_pair(x.alice_detector()?, y.alice_detector()?)
}

/// One identified teleportation event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fourfold {
    pub alice_time_ps: i64,
    pub bob_time_ps: i64,
    pub bsm_label: BellState,
    pub bob_channel: Channel,
}

/// Matches Alice three-folds to Bob's `e`/`f` tags.
///
/// Bob times are mapped to Alice's frame by subtracting the Alice→Bob
/// latency and the synchronized clock offset before matching.
pub fn match_fourfolds(
    threefolds: &[CoincidenceEvent],
    bob: &[TimeTag],
    track: &OffsetTrack,
    latency_ps: i64,
    window_ps: i64,
) -> Result<Vec<Fourfold>, SyncError> {
    let mut corrected: Vec<(i64, &TimeTag)> = bob
        .iter()
        .filter(|t| matches!(t.channel, Channel::E | Channel::F))
        .map(|t| {
            let local = t.time_ps as i64 - latency_ps;
            (local - track.offset_at(local).round() as i64, t)
        })
        .collect();
    corrected.sort_by_key(|(t, tag)| (*t, tag.channel.code()));
    let alice: Vec<i64> = threefolds.iter().map(|e| e.time_ps).collect();
    let bob_t: Vec<i64> = corrected.iter().map(|(t, _)| *t).collect();
    let pairs = find_coincidences(&alice, &bob_t, window_ps)?;
    Ok(pairs
        .into_iter()
        .filter_map(|(i, j)| {
            Some(Fourfold {
                alice_time_ps: alice[i],
                bob_time_ps: corrected[j].1.time_ps as i64,
                bsm_label: threefolds[i].bsm_label?,
                bob_channel: corrected[j].1.channel,
            })
        })
        .collect())
}

/// Bob detections that fall inside an EOM gate opened by a received
/// feed-forward pulse: `ff + delay - width/2 <= t <= ff + delay + width/2`.
pub fn gate_on_feedforward(bob: &[TimeTag], delay_ps: i64, width_ps: i64) -> Vec<TimeTag> {
    let ff = channel_times(bob, Channel::Ff);
    let half = width_ps / 2;
    let mut k = 0usize;
    bob.iter()
        .filter(|t| matches!(t.channel, Channel::E | Channel::F))
        .filter(|t| {
            let x = t.time_ps as i64;
            while k < ff.len() && ff[k] + delay_ps + half < x {
                k += 1;
            }
            k < ff.len() && ff[k] + delay_ps - half <= x
        })
        .copied()
        .collect()
}
